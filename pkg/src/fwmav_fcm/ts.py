"""Takagi-Sugeno fuzzy inference and FCM-based MIMO identification."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_data_matrix, check_positive, check_vector
from .exceptions import ConfigError, DimensionError, RankDeficientWarning
from .fcm import FcmConfig, fcm_fit

#: Below this total firing strength the weighted average is replaced by the
#: plain mean of the rule outputs.
FIRING_EPS = 1e-300

INPUT_COLUMNS = ("a1", "a2", "a3", "a4")
OUTPUT_COLUMNS = ("vbx", "vby", "vbz", "wbx", "wby", "wbz")


@dataclass(frozen=True)
class GaussianMf:
    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"membership width must be > 0, got {self.width}")

    def degree(self, x):
        return mf_degree(x, self)


def mf_degree(x, mf):
    """Gaussian membership degree ``exp(-(x - center)**2 / (2 width**2))``."""
    if not mf.width > 0:
        raise ConfigError(f"membership width must be > 0, got {mf.width}")
    u = (x - mf.center) / mf.width
    return math.exp(-0.5 * u * u)


@dataclass(frozen=True)
class TsRule:
    """One rule: a Gaussian per input and an affine map per output.

    ``consequent`` has shape ``(outputs, inputs + 1)``; column 0 is the bias.
    """

    antecedent: tuple
    consequent: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.consequent, dtype=float)
        if coef.ndim != 2 or coef.shape[1] != len(self.antecedent) + 1:
            raise DimensionError(
                f"consequent shape {coef.shape} does not match "
                f"{len(self.antecedent)} antecedent inputs"
            )
        object.__setattr__(self, "antecedent", tuple(self.antecedent))
        object.__setattr__(self, "consequent", coef)


@dataclass(frozen=True)
class TsModel:
    """First-order TS rule base with per-input (offset, scale) normalization.

    Antecedents and consequents act on normalized inputs
    ``(x - offset) / scale``.
    """

    input_dim: int
    output_dim: int
    rules: tuple
    input_scaling: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.rules) < 1:
            raise ConfigError("a TS model needs at least one rule")
        scaling = np.asarray(self.input_scaling, dtype=float)
        if scaling.shape != (self.input_dim, 2):
            raise DimensionError(
                f"input_scaling must have shape {(self.input_dim, 2)}, got {scaling.shape}"
            )
        if np.any(scaling[:, 1] == 0):
            raise ConfigError("input scales must be nonzero")
        for r in self.rules:
            if len(r.antecedent) != self.input_dim:
                raise DimensionError("rule antecedent length differs from input_dim")
            if r.consequent.shape != (self.output_dim, self.input_dim + 1):
                raise DimensionError("rule consequent shape differs from model dims")
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "input_scaling", scaling)
        # dense copies for vectorized inference
        object.__setattr__(
            self, "_centers", np.array([[mf.center for mf in r.antecedent] for r in self.rules])
        )
        object.__setattr__(
            self, "_widths", np.array([[mf.width for mf in r.antecedent] for r in self.rules])
        )
        object.__setattr__(self, "_coef", np.stack([r.consequent for r in self.rules]))

    @property
    def n_rules(self):
        return len(self.rules)

    def normalize(self, X):
        return (np.asarray(X, dtype=float) - self.input_scaling[:, 0]) / self.input_scaling[:, 1]

    def __eq__(self, other):
        if not isinstance(other, TsModel):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and self.output_dim == other.output_dim
            and np.array_equal(self.input_scaling, other.input_scaling)
            and np.array_equal(self._centers, other._centers)
            and np.array_equal(self._widths, other._widths)
            and np.array_equal(self._coef, other._coef)
        )

    __hash__ = None


@dataclass
class IoDataset:
    """Flapping amplitudes (deg) and body velocities sampled every ``dt`` s."""

    inputs: np.ndarray
    outputs: np.ndarray
    dt: float
    t: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = as_data_matrix(self.inputs, "inputs")
        self.outputs = as_data_matrix(self.outputs, "outputs")
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise DimensionError("inputs and outputs must have the same number of rows")
        self.dt = check_positive(self.dt, "dt")
        if self.t is None:
            self.t = np.arange(self.inputs.shape[0]) * self.dt
        else:
            self.t = check_vector(self.t, self.inputs.shape[0], "t")

    def __len__(self):
        return self.inputs.shape[0]


def fire_rules(inputs, model):
    """Firing strength of every rule: product of its antecedent degrees."""
    x = model.normalize(check_vector(inputs, model.input_dim, "inputs"))
    u = (x - model._centers) / model._widths
    return np.prod(np.exp(-0.5 * u * u), axis=1)


def _rule_outputs(xn, model):
    # (N, q) for one normalized input vector
    return model._coef[:, :, 0] + model._coef[:, :, 1:] @ xn


def _combine(w, z):
    total = w.sum()
    if total < FIRING_EPS:
        return z.mean(axis=0)
    return (w @ z) / total


def infer(inputs, model):
    """Weighted-average TS output for one input vector."""
    x = check_vector(inputs, model.input_dim, "inputs")
    xn = model.normalize(x)
    u = (xn - model._centers) / model._widths
    w = np.prod(np.exp(-0.5 * u * u), axis=1)
    return _combine(w, _rule_outputs(xn, model))


def infer_batch(X, model):
    """Vectorized :func:`infer` over the rows of ``X``."""
    X = as_data_matrix(X, "X")
    if X.shape[1] != model.input_dim:
        raise DimensionError(f"X must have {model.input_dim} columns, got {X.shape[1]}")
    Xn = model.normalize(X)
    u = (Xn[:, None, :] - model._centers[None]) / model._widths[None]
    W = np.prod(np.exp(-0.5 * u * u), axis=2)  # (n, N)
    Z = model._coef[None, :, :, 0] + np.einsum("rqp,np->nrq", model._coef[:, :, 1:], Xn)
    total = W.sum(axis=1)
    out = np.einsum("nr,nrq->nq", W, Z)
    ok = total >= FIRING_EPS
    out[ok] /= total[ok, None]
    out[~ok] = Z[~ok].mean(axis=1)
    return out


def evaluate_fit(model, data):
    """Per-output-channel RMSE of the model on a dataset."""
    if len(data) == 0:
        raise DimensionError("empty dataset")
    if data.outputs.shape[1] != model.output_dim:
        raise DimensionError("dataset output width differs from model output_dim")
    residual = infer_batch(data.inputs, model) - data.outputs
    return np.sqrt(np.mean(residual**2, axis=0))


def _weighted_std(values, weights, mean):
    return np.sqrt(weights @ (values - mean) ** 2 / weights.sum())


def _fit_rules(Xn, Y, U, m, x_range, ridge):
    n, p = Xn.shape
    Um = U**m
    Phi = np.hstack([np.ones((n, 1)), Xn])
    floor = 1e-3 * np.where(x_range > 0, x_range, 1.0)
    rules = []
    rank_deficient = []
    for i in range(U.shape[0]):
        wts = Um[i]
        mass = wts.sum()
        centers = wts @ Xn / mass
        widths = np.maximum(_weighted_std(Xn, wts, centers), floor)
        gram = Phi.T @ (wts[:, None] * Phi)
        rank = np.linalg.matrix_rank(np.sqrt(wts)[:, None] * Phi)
        deficient = bool(rank < p + 1)
        if deficient:
            warnings.warn(
                f"rule {i}: consequent regression has rank {rank} < {p + 1}; "
                "ridge damping keeps it solvable",
                RankDeficientWarning,
                stacklevel=3,
            )
        rank_deficient.append(deficient)
        coef = np.linalg.solve(gram + ridge * np.eye(p + 1), Phi.T @ (wts[:, None] * Y))
        antecedent = tuple(GaussianMf(float(c), float(s)) for c, s in zip(centers, widths))
        rules.append(TsRule(antecedent, coef.T.copy()))
    return rules, rank_deficient


def identify_ts_model(
    data,
    c=3,
    fcm_config=None,
    *,
    ridge=1e-8,
    add_rule_threshold=None,
    c_max=10,
):
    """Identify a first-order TS model from input/output data.

    Inputs are standardized (the scaling is stored in the model), outputs are
    standardized for clustering only, and FCM runs on the joint
    input-output space. Each cluster yields one rule: antecedent centers are
    the cluster center's input coordinates, widths the membership-weighted
    spread, and consequents come from membership-weighted ridge least squares.

    If ``add_rule_threshold`` is given, the model is refit with one more
    cluster while the worst per-channel ``rmse / std`` exceeds it, up to
    ``c_max`` clusters.
    """
    if fcm_config is None:
        fcm_config = FcmConfig(c=c)
    n = len(data)
    if c > n:
        raise ConfigError(f"cluster count c={c} exceeds sample count n={n}")

    X, Y = data.inputs, data.outputs
    offset = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xn = (X - offset) / scale
    y_scale = Y.std(axis=0)
    y_scale[y_scale == 0] = 1.0
    joint = np.hstack([Xn, (Y - Y.mean(axis=0)) / y_scale])
    x_range = np.ptp(Xn, axis=0)
    y_std = Y.std(axis=0)

    while True:
        cfg = FcmConfig(
            c=c,
            m=fcm_config.m,
            tol=fcm_config.tol,
            max_iter=fcm_config.max_iter,
            seed=fcm_config.seed,
            restarts=fcm_config.restarts,
        )
        clusters = fcm_fit(joint, cfg)
        rules, deficient = _fit_rules(Xn, Y, clusters.partition, cfg.m, x_range, ridge)
        model = TsModel(
            input_dim=X.shape[1],
            output_dim=Y.shape[1],
            rules=tuple(rules),
            input_scaling=np.column_stack([offset, scale]),
            info={
                "clusters": c,
                "fcm_cost": clusters.final_cost,
                "fcm_iterations": clusters.iterations_used,
                "rank_deficient": deficient,
            },
        )
        if add_rule_threshold is None or c >= min(c_max, n):
            return model
        rel = evaluate_fit(model, data) / np.where(y_std > 0, y_std, 1.0)
        if rel.max() <= add_rule_threshold:
            return model
        c += 1


class TakagiSugenoRegressor(RegressorMixin, BaseEstimator):
    """Multi-output first-order TS regressor identified by fuzzy C-means.

    Parameters
    ----------
    n_rules : int, default=3
        Number of FCM clusters, i.e. rules.
    m : float, default=2.0
    tol : float, default=1e-6
    max_iter : int, default=200
    n_init : int, default=1
    ridge : float, default=1e-8
    add_rule_threshold : float or None, default=None
    max_rules : int, default=10
    random_state : int, default=0

    Attributes
    ----------
    model_ : TsModel
    """

    def __init__(
        self,
        n_rules=3,
        m=2.0,
        tol=1e-6,
        max_iter=200,
        n_init=1,
        ridge=1e-8,
        add_rule_threshold=None,
        max_rules=10,
        random_state=0,
    ):
        self.n_rules = n_rules
        self.m = m
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.ridge = ridge
        self.add_rule_threshold = add_rule_threshold
        self.max_rules = max_rules
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X)
        y = np.asarray(y, dtype=float)
        self._single_output = y.ndim == 1
        Y = y.reshape(-1, 1) if self._single_output else check_array(y)
        cfg = FcmConfig(
            c=self.n_rules,
            m=self.m,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=0 if self.random_state is None else int(self.random_state),
            restarts=self.n_init,
        )
        self.model_ = identify_ts_model(
            IoDataset(X, Y, dt=1.0),
            c=self.n_rules,
            fcm_config=cfg,
            ridge=self.ridge,
            add_rule_threshold=self.add_rule_threshold,
            c_max=self.max_rules,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        out = infer_batch(X, self.model_)
        return out[:, 0] if self._single_output else out
