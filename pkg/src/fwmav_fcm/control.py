"""Altitude control loop: reference signals, PID baseline and the adaptive
fuzzy controller whose membership functions are retuned by fuzzy C-means."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive
from .exceptions import ConfigError, DegenerateClusterError, SimulationFault
from .fcm import FcmConfig, fcm_fit
from .plant import IdentifiedPlant, SurrogatePlant, SurrogateParams
from .ts import FIRING_EPS, TsModel

REFERENCE_KINDS = ("constant", "sine", "square", "step")


@dataclass(frozen=True)
class ReferenceSignal:
    """Desired altitude profile.

    ``steps`` holds ``(switch_time, magnitude)`` pairs summed as unit steps
    with ``u(0) = 1``; the other kinds use ``amplitude``, ``frequency`` and
    ``offset``.
    """

    kind: str
    amplitude: float = 1.0
    frequency: float = 0.0
    offset: float = 0.0
    steps: tuple = ()

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ConfigError(
                f"unknown reference kind {self.kind!r}; expected one of {REFERENCE_KINDS}"
            )
        if self.kind in ("sine", "square") and not self.frequency > 0:
            raise ConfigError(f"{self.kind} reference needs frequency > 0")
        object.__setattr__(
            self, "steps", tuple((float(t), float(a)) for t, a in self.steps)
        )

    def __call__(self, t):
        return reference_value(self, t)


def reference_value(ref, t):
    if ref.kind == "constant":
        return ref.amplitude + ref.offset
    if ref.kind == "sine":
        return ref.offset + ref.amplitude * math.sin(2 * math.pi * ref.frequency * t)
    if ref.kind == "square":
        phase = (t * ref.frequency) % 1.0
        return ref.offset + (ref.amplitude if phase < 0.5 else -ref.amplitude)
    if ref.kind == "step":
        return ref.offset + sum(a for t0, a in ref.steps if t >= t0)
    raise ConfigError(f"unknown reference kind {ref.kind!r}")


# --------------------------------------------------------------------------
# PID
# --------------------------------------------------------------------------


@dataclass
class PidState:
    kp: float
    ki: float
    kd: float
    u_min: float = -math.inf
    u_max: float = math.inf
    integral: float = 0.0
    prev_error: float | None = None

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ConfigError(f"need u_min < u_max, got ({self.u_min}, {self.u_max})")

    @property
    def integral_limit(self):
        return (self.u_max - self.u_min) / max(abs(self.ki), 1e-12)


def pid_step(state, e, dt):
    """One PID update with conditional-integration anti-windup.

    The integral only accumulates when doing so leaves the output inside
    the limits. The derivative is zero on the first call.
    """
    dt = check_positive(dt, "dt")
    deriv = 0.0 if state.prev_error is None else (e - state.prev_error) / dt
    state.prev_error = e
    base = state.kp * e + state.kd * deriv
    candidate = state.integral + e * dt
    u = base + state.ki * candidate
    if state.u_min <= u <= state.u_max:
        state.integral = candidate
    else:
        u = base + state.ki * state.integral
    lim = state.integral_limit
    state.integral = min(max(state.integral, -lim), lim)
    return min(max(u, state.u_min), state.u_max)


class PidController:
    """PID wrapper exposing the loop's controller interface."""

    name = "pid"

    def __init__(self, kp, ki, kd, output_limits=(-math.inf, math.inf)):
        self.kp, self.ki, self.kd = kp, ki, kd
        self.output_limits = tuple(output_limits)
        self.reset()

    def reset(self):
        self.state = PidState(self.kp, self.ki, self.kd, *self.output_limits)

    def step(self, e, de, dt):
        return pid_step(self.state, e, dt)


# --------------------------------------------------------------------------
# Adaptive fuzzy controller
# --------------------------------------------------------------------------


def _gaussians(x, centers, widths):
    u = (x - centers) / widths
    return np.exp(-0.5 * u * u)


@dataclass
class AdaptiveFuzzyController:
    """TS controller on (error, error rate) with 5 x 5 product rules.

    Every step the rule consequents move along the sign-gradient of the
    squared error; every ``retune_period`` seconds the membership functions
    of each input are re-placed by clustering the recent samples of that
    input with fuzzy C-means. Inputs beyond the outermost centers are
    clipped to them, so the edge rules act as saturation rules.

    Consequent ``z[j, k]`` belongs to error MF ``j`` and rate MF ``k``.
    """

    n_mfs: int = 5
    error_range: tuple = (-10.0, 10.0)
    rate_range: tuple = (-5.0, 5.0)
    learning_rate: float = 2000.0
    window: int = 1000
    retune_period: float = 2.0
    output_limits: tuple = (-135.0, 45.0)
    width_floor_error: float = 0.1
    width_floor_rate: float = 2.0
    dz_du_sign: float = 1.0
    fcm_m: float = 2.0
    fcm_tol: float = 1e-6
    fcm_max_iter: int = 100
    seed: int = 0

    name = "fuzzy"

    centers_e: np.ndarray = field(init=False, repr=False)
    widths_e: np.ndarray = field(init=False, repr=False)
    centers_de: np.ndarray = field(init=False, repr=False)
    widths_de: np.ndarray = field(init=False, repr=False)
    consequents: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_mfs < 2:
            raise ConfigError("n_mfs must be >= 2")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        check_positive(self.retune_period, "retune_period")
        check_positive(self.width_floor_error, "width_floor_error")
        check_positive(self.width_floor_rate, "width_floor_rate")
        if self.dz_du_sign not in (1, -1):
            raise ConfigError("dz_du_sign must be +1 or -1")
        if not self.output_limits[0] < self.output_limits[1]:
            raise ConfigError("output_limits must be increasing")
        self.reset()

    @property
    def n_rules(self):
        return self.n_mfs * self.n_mfs

    def reset(self):
        self.centers_e, self.widths_e = self._even(self.error_range)
        self.centers_de, self.widths_de = self._even(self.rate_range)
        self.consequents = np.zeros((self.n_mfs, self.n_mfs))
        self.samples = deque(maxlen=self.window)
        self.elapsed = 0.0
        self.retunes = 0
        self.last_output = 0.0

    def _even(self, bounds):
        centers = np.linspace(bounds[0], bounds[1], self.n_mfs)
        spacing = (bounds[1] - bounds[0]) / (self.n_mfs - 1)
        return centers, np.full(self.n_mfs, 0.5 * spacing)

    def clip_inputs(self, e, de):
        """Limit both inputs to the span of their membership centers."""
        e = min(max(e, self.centers_e[0]), self.centers_e[-1])
        de = min(max(de, self.centers_de[0]), self.centers_de[-1])
        return e, de

    def firing(self, e, de):
        """Rule firing strengths, shape ``(n_mfs, n_mfs)``, inputs clipped."""
        e, de = self.clip_inputs(e, de)
        return np.outer(
            _gaussians(e, self.centers_e, self.widths_e),
            _gaussians(de, self.centers_de, self.widths_de),
        )

    def normalized_firing(self, e, de):
        w = self.firing(e, de)
        total = w.sum()
        if total < FIRING_EPS:
            return np.full_like(w, 1.0 / w.size)
        return w / total

    def output(self, e, de):
        return fuzzy_control_output(self, e, de)

    def adapt(self, e, de, u_applied=None, dt=0.01):
        return adapt(self, e, de, u_applied, self.dz_du_sign, dt)

    def step(self, e, de, dt):
        # adapt on the fresh measurement first so the command already uses it
        self.adapt(e, de, self.last_output, dt)
        self.last_output = self.output(e, de)
        return self.last_output

    def retune(self):
        """Re-place both inputs' MFs by clustering the window; False if skipped."""
        c = self.n_mfs
        if len(self.samples) < 5 * c:
            return False
        data = np.asarray(self.samples)
        try:
            ce, we = self._cluster(data[:, 0], self.width_floor_error)
            cd, wd = self._cluster(data[:, 1], self.width_floor_rate)
        except DegenerateClusterError:
            return False
        self.centers_e, self.widths_e = ce, we
        self.centers_de, self.widths_de = cd, wd
        self.retunes += 1
        return True

    def _cluster(self, values, floor):
        cfg = FcmConfig(
            c=self.n_mfs,
            m=self.fcm_m,
            tol=self.fcm_tol,
            max_iter=self.fcm_max_iter,
            seed=self.seed,
        )
        fit = fcm_fit(values.reshape(-1, 1), cfg)
        centers = fit.centers[:, 0]
        wts = fit.partition**self.fcm_m
        mass = wts.sum(axis=1)
        if np.any(mass <= 0.0):
            # coincident samples can leave a cluster empty after the last update
            raise DegenerateClusterError("empty cluster in membership retune")
        spread = np.sqrt(np.sum(wts * (values[None, :] - centers[:, None]) ** 2, axis=1) / mass)
        order = np.argsort(centers, kind="stable")
        centers = centers[order]
        widths = np.maximum(spread[order], floor)
        for i in range(1, len(centers)):
            if centers[i] <= centers[i - 1]:
                centers[i] = centers[i - 1] + 1e-9 * i
        return centers, widths


def fuzzy_control_output(ctrl, e, de):
    """Weighted average of the rule consequents, clamped to the output limits."""
    w = ctrl.firing(e, de)
    total = w.sum()
    if total < FIRING_EPS:
        y = ctrl.consequents.mean()
    else:
        y = float(np.sum(w * ctrl.consequents) / total)
    lo, hi = ctrl.output_limits
    return min(max(y, lo), hi)


def adapt(ctrl, e, de, u_applied, dz_du_sign, dt):
    """Consequent descent every call, FCM antecedent retune every period.

    The consequent step is ``learning_rate * dz_du_sign * e * w_bar`` with
    ``w_bar`` the normalized firing strengths; consequents stay within the
    output limits. Returns the controller.
    """
    if e != 0.0:
        ctrl.consequents += ctrl.learning_rate * dz_du_sign * e * ctrl.normalized_firing(e, de)
        np.clip(ctrl.consequents, *ctrl.output_limits, out=ctrl.consequents)
    ctrl.samples.append((e, de))
    ctrl.elapsed += dt
    if ctrl.elapsed >= ctrl.retune_period - 1e-12:
        ctrl.elapsed = 0.0
        ctrl.retune()
    return ctrl


# --------------------------------------------------------------------------
# Closed loop
# --------------------------------------------------------------------------


@dataclass
class SimTrace:
    t: np.ndarray
    ref: np.ndarray
    z: np.ndarray
    e: np.ndarray
    u: np.ndarray
    vbz: np.ndarray
    rmse: float
    metadata: dict = field(default_factory=dict)

    COLUMNS = ("t", "ref", "z", "e", "u", "vbz")

    def __len__(self):
        return len(self.t)

    def as_array(self):
        return np.column_stack([self.t, self.ref, self.z, self.e, self.u, self.vbz])


def compute_rmse(trace):
    e = np.asarray(trace.e if isinstance(trace, SimTrace) else trace, dtype=float)
    if e.size == 0:
        raise ConfigError("cannot compute RMSE of an empty trace")
    return float(np.sqrt(np.mean(e * e)))


def _as_plant(plant, seed):
    if isinstance(plant, SurrogateParams):
        return SurrogatePlant(plant, seed=seed), plant.hover_trim
    if isinstance(plant, TsModel):
        return IdentifiedPlant(plant), SurrogateParams().hover_trim
    return plant, getattr(plant, "hover_trim", SurrogateParams().hover_trim)


def closed_loop_run(
    plant,
    controller,
    ref,
    duration=100.0,
    dt=0.01,
    seed=0,
    *,
    z0=0.0,
    hover_trim=None,
    rate_filter=0.0,
    metadata=None,
):
    """Simulate altitude tracking.

    ``plant`` is a :class:`SurrogateParams`, an identified :class:`TsModel`
    or any object with ``reset(z0)`` and ``step(amplitudes, dt) -> (v_bz, z)``.
    The controller output is a collective offset added to ``hover_trim`` on
    all four actuators. Row ``k`` of the trace holds the state at ``k * dt``
    and the command applied from then on.
    """
    duration = check_positive(duration, "duration")
    dt = check_positive(dt, "dt")
    if not 0.0 <= rate_filter < 1.0:
        raise ConfigError("rate_filter must lie in [0, 1)")
    plant, default_trim = _as_plant(plant, seed)
    trim = default_trim if hover_trim is None else hover_trim
    steps = int(round(duration / dt))
    rows = np.zeros((steps + 1, 6))
    plant.reset(z0)
    controller.reset()
    z, vbz = float(z0), 0.0
    e_prev = de = 0.0
    meta = {
        "controller": getattr(controller, "name", type(controller).__name__),
        "seed": seed,
        "dt": dt,
        "duration": duration,
        **(metadata or {}),
    }
    for k in range(steps + 1):
        t = k * dt
        r = ref(t)
        e = r - z
        if k > 0:
            de = rate_filter * de + (1.0 - rate_filter) * (e - e_prev) / dt
        u = controller.step(e, de, dt)
        rows[k] = (t, r, z, e, u, vbz)
        if not math.isfinite(u):
            raise SimulationFault(
                f"non-finite control output at t={t:.6g}", _trace(rows[: k + 1], meta)
            )
        if k < steps:
            try:
                vbz, z = plant.step(np.full(4, trim + u), dt)
            except SimulationFault as exc:
                raise SimulationFault(str(exc), _trace(rows[: k + 1], meta)) from exc
        e_prev = e
    return _trace(rows, meta)


def _trace(rows, meta):
    t, r, z, e, u, v = (rows[:, i].copy() for i in range(6))
    return SimTrace(t, r, z, e, u, v, rmse=compute_rmse(e), metadata=dict(meta))


def tune_pid(plant, ref, grid, output_limits, duration=100.0, dt=0.01, seed=0):
    """Grid search of PID gains minimizing tracking RMSE.

    ``grid`` maps ``"kp"``, ``"ki"``, ``"kd"`` to candidate values. Returns
    ``(best_gains, best_rmse)``; ties keep the first candidate in grid order.
    """
    best, best_rmse = None, math.inf
    for kp in grid["kp"]:
        for ki in grid["ki"]:
            for kd in grid["kd"]:
                ctrl = PidController(kp, ki, kd, output_limits)
                rmse = closed_loop_run(plant, ctrl, ref, duration, dt, seed).rmse
                if rmse < best_rmse:
                    best, best_rmse = {"kp": kp, "ki": ki, "kd": kd}, rmse
    return best, best_rmse
