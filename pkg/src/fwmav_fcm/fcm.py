"""Batch fuzzy C-means clustering.

The functional core works on a data matrix of shape ``(n, p)`` (samples in
rows) and a partition matrix of shape ``(c, n)`` whose columns sum to one.
:class:`FuzzyCMeans` wraps it in a scikit-learn estimator; there the
membership matrix is exposed sample-major, ``(n, c)``, like ``predict_proba``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import (
    as_data_matrix,
    check_fuzzifier,
    check_positive,
    check_positive_int,
)
from .exceptions import ConfigError, DegenerateClusterError, DimensionError


@dataclass(frozen=True)
class FcmConfig:
    c: int = 3
    m: float = 2.0
    tol: float = 1e-6
    max_iter: int = 200
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        check_positive_int(self.c, "c")
        check_fuzzifier(self.m)
        check_positive(self.tol, "tol")
        check_positive_int(self.max_iter, "max_iter")
        check_positive_int(self.restarts, "restarts")


@dataclass
class FcmModel:
    """Result of :func:`fcm_fit`.

    ``partition`` is ``(c, n)``; ``final_cost`` is the objective evaluated at
    the stored ``centers`` and ``partition``.
    """

    centers: np.ndarray
    partition: np.ndarray
    final_cost: float
    iterations_used: int
    cost_history: list[float] = field(default_factory=list)
    m: float = 2.0


def init_partition(n, c, seed):
    """Random partition matrix with unit column sums, shape ``(c, n)``."""
    n = check_positive_int(n, "n")
    c = check_positive_int(c, "c")
    if c > n:
        raise ConfigError(f"cluster count c={c} exceeds sample count n={n}")
    rng = np.random.default_rng(seed)
    # 1 - U[0, 1) lies in (0, 1], so no column can be all zeros
    U = 1.0 - rng.random((c, n))
    return U / U.sum(axis=0, keepdims=True)


def _squared_distances(X, centers):
    # (c, n)
    diff = centers[:, None, :] - X[None, :, :]
    return np.einsum("cnp,cnp->cn", diff, diff)


def _check_centers(X, centers):
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers.reshape(-1, 1)
    if centers.ndim != 2 or centers.shape[1] != X.shape[1]:
        raise DimensionError(
            f"centers shape {centers.shape} incompatible with data shape {X.shape}"
        )
    return centers


def _check_partition(U, c, n):
    U = np.asarray(U, dtype=float)
    if U.shape != (c, n):
        raise DimensionError(f"partition must have shape {(c, n)}, got {U.shape}")
    return U


def cost(data, centers, partition, m):
    """FCM objective: sum over clusters and samples of mu**m * distance**2."""
    X = as_data_matrix(data, "data")
    V = _check_centers(X, centers)
    U = _check_partition(partition, V.shape[0], X.shape[0])
    m = check_fuzzifier(m)
    return float(np.sum(U**m * _squared_distances(X, V)))


def update_centers(data, partition, m):
    """Membership-weighted means, one row per cluster."""
    X = as_data_matrix(data, "data")
    U = np.asarray(partition, dtype=float)
    if U.ndim != 2 or U.shape[1] != X.shape[0]:
        raise DimensionError(
            f"partition shape {U.shape} incompatible with {X.shape[0]} samples"
        )
    m = check_fuzzifier(m)
    Um = U**m
    mass = Um.sum(axis=1)
    if np.any(mass <= 0.0):
        bad = np.flatnonzero(mass <= 0.0).tolist()
        raise DegenerateClusterError(f"clusters {bad} have zero membership mass")
    return (Um @ X) / mass[:, None]


def update_memberships(data, centers, m):
    """Membership update for fixed centers, shape ``(c, n)``.

    A sample lying exactly on a center is assigned crisply to the first such
    center.
    """
    X = as_data_matrix(data, "data")
    V = _check_centers(X, centers)
    m = check_fuzzifier(m)
    d2 = _squared_distances(X, V)
    c, n = d2.shape
    U = np.empty((c, n))

    zero = d2 == 0.0
    crisp = zero.any(axis=0)
    if crisp.any():
        U[:, crisp] = 0.0
        U[np.argmax(zero[:, crisp], axis=0), np.flatnonzero(crisp)] = 1.0

    soft = ~crisp
    if soft.any():
        d2s = d2[:, soft]
        # (d_ij / d_kj)^(2/(m-1)) == (d2_ij / d2_kj)^(1/(m-1)); scale by the
        # column minimum first so the powers stay in range
        ratio = d2s / d2s.min(axis=0, keepdims=True)
        inv = ratio ** (-1.0 / (m - 1.0))
        U[:, soft] = inv / inv.sum(axis=0, keepdims=True)
    return U


def _fit_once(X, U, m, tol, max_iter):
    history = []
    V = update_centers(X, U, m)
    U = update_memberships(X, V, m)
    J = float(np.sum(U**m * _squared_distances(X, V)))
    history.append(J)
    it = 1
    while it < max_iter:
        V_new = update_centers(X, U, m)
        U_new = update_memberships(X, V_new, m)
        J_new = float(np.sum(U_new**m * _squared_distances(X, V_new)))
        it += 1
        if J_new > J:
            # rounding noise at the optimum; keep the better state
            break
        V, U = V_new, U_new
        decrease = J - J_new
        J = J_new
        history.append(J)
        if decrease < tol:
            break
    return FcmModel(
        centers=V,
        partition=U,
        final_cost=J,
        iterations_used=it,
        cost_history=history,
        m=m,
    )


def fcm_fit(data, config=None, init=None, **kwargs):
    """Fit fuzzy C-means by alternating center and membership updates.

    Parameters
    ----------
    data : array-like of shape (n, p)
    config : FcmConfig, optional
        Keyword arguments build one when omitted.
    init : array-like of shape (c, n), optional
        Initial partition for the first restart; later restarts (and the
        first one when ``init`` is None) use ``init_partition(n, c, seed + k)``.

    Returns
    -------
    FcmModel
        The restart with the lowest final cost.
    """
    if config is None:
        config = FcmConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either config or keyword arguments, not both")
    X = as_data_matrix(data, "data")
    n = X.shape[0]
    if config.c > n:
        raise ConfigError(f"cluster count c={config.c} exceeds sample count n={n}")

    best = None
    for k in range(config.restarts):
        if k == 0 and init is not None:
            U0 = _check_partition(init, config.c, n)
            if np.any(U0 < 0) or not np.allclose(U0.sum(axis=0), 1.0, atol=1e-9):
                raise ConfigError("init partition must be nonnegative with unit column sums")
        else:
            U0 = init_partition(n, config.c, config.seed + k)
        model = _fit_once(X, U0, config.m, config.tol, config.max_iter)
        if best is None or model.final_cost < best.final_cost:
            best = model
    return best


class FuzzyCMeans(ClusterMixin, TransformerMixin, BaseEstimator):
    """Fuzzy C-means clustering estimator.

    Parameters
    ----------
    n_clusters : int, default=3
    m : float, default=2.0
        Fuzzifier, must be > 1.
    tol : float, default=1e-6
        Stop once the objective decreases by less than this.
    max_iter : int, default=200
    n_init : int, default=1
        Number of random restarts; the lowest-cost run is kept.
    random_state : int, default=0

    Attributes
    ----------
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
    membership_ : ndarray of shape (n_samples, n_clusters)
    labels_ : ndarray of shape (n_samples,)
    inertia_ : float
        Final objective value.
    cost_history_ : list of float
    n_iter_ : int
    """

    def __init__(self, n_clusters=3, m=2.0, tol=1e-6, max_iter=200, n_init=1, random_state=0):
        self.n_clusters = n_clusters
        self.m = m
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.random_state = random_state

    def _config(self):
        seed = 0 if self.random_state is None else int(self.random_state)
        return FcmConfig(
            c=self.n_clusters,
            m=self.m,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=seed,
            restarts=self.n_init,
        )

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        model = fcm_fit(X, self._config())
        self.n_features_in_ = X.shape[1]
        self.cluster_centers_ = model.centers
        self.membership_ = model.partition.T
        self.labels_ = np.argmax(model.partition, axis=0)
        self.inertia_ = model.final_cost
        self.cost_history_ = model.cost_history
        self.n_iter_ = model.iterations_used
        return self

    def predict_proba(self, X):
        """Membership degrees of each sample, rows sum to one."""
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return update_memberships(X, self.cluster_centers_, self.m).T

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def transform(self, X):
        """Alias for :meth:`predict_proba`."""
        return self.predict_proba(X)
