"""Naive reference implementations used as test oracles.

Everything here is written with explicit Python loops over scalars, straight
from the textbook formulas, and shares no code with the package.
"""

import math


def fcm_cost(X, V, U, m):
    total = 0.0
    for i in range(len(V)):
        for j in range(len(X)):
            d2 = sum((X[j][k] - V[i][k]) ** 2 for k in range(len(X[j])))
            total += U[i][j] ** m * d2
    return total


def fcm_centers(X, U, m):
    c, p = len(U), len(X[0])
    V = []
    for i in range(c):
        num = [0.0] * p
        den = 0.0
        for j in range(len(X)):
            w = U[i][j] ** m
            den += w
            for k in range(p):
                num[k] += w * X[j][k]
        V.append([num[k] / den for k in range(p)])
    return V


def fcm_memberships(X, V, m):
    c = len(V)
    U = [[0.0] * len(X) for _ in range(c)]
    for j in range(len(X)):
        d = [math.sqrt(sum((X[j][k] - V[i][k]) ** 2 for k in range(len(X[j])))) for i in range(c)]
        hit = [i for i in range(c) if d[i] == 0.0]
        if hit:
            U[hit[0]][j] = 1.0
            continue
        for i in range(c):
            U[i][j] = 1.0 / sum((d[i] / d[k]) ** (2.0 / (m - 1.0)) for k in range(c))
    return U


def gaussian(x, center, width):
    return math.exp(-((x - center) ** 2) / (2.0 * width**2))


def ts_infer(x, rules, offset, scale):
    """rules: list of (centers, widths, consequent rows [bias, coefs...])."""
    xn = [(x[k] - offset[k]) / scale[k] for k in range(len(x))]
    num = None
    den = 0.0
    for centers, widths, conseq in rules:
        w = 1.0
        for k in range(len(xn)):
            w *= gaussian(xn[k], centers[k], widths[k])
        z = [row[0] + sum(row[k + 1] * xn[k] for k in range(len(xn))) for row in conseq]
        num = [w * v for v in z] if num is None else [a + w * v for a, v in zip(num, z)]
        den += w
    return [v / den for v in num]
