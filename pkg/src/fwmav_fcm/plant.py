"""Four-wing flapping MAV: wing kinematics and a surrogate velocity plant.

The surrogate maps the four flapping amplitudes (degrees, actuators numbered
1-4 with 1, 2 on the right and 1, 3 at the front) to the six body velocities
through decoupled first-order channels:

* collective ``mean(a) - hover_trim`` drives the vertical velocity,
* right/left difference ``mean(a1, a2) - mean(a3, a4)`` drives roll rate,
* front/back difference ``mean(a1, a3) - mean(a2, a4)`` drives pitch rate,
* forward, lateral and yaw channels are damped and fed by the roll and
  pitch rates.

Altitude is the integral of the vertical velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_vector
from .exceptions import ConfigError, SimulationFault
from .ts import IoDataset, infer

AMPLITUDE_LIMIT = 90.0

#: Excitation frequencies (Hz) of the four actuator sinusoids.
EXCITATION_FREQUENCIES = (0.05, 0.07, 0.09, 0.11)


def flapping_angle(t, phi_fa, f):
    """Flapping angle (rad) at time ``t`` for stroke amplitude ``phi_fa`` (rad)."""
    if not f > 0:
        raise ConfigError(f"flapping frequency must be > 0, got {f}")
    return 0.5 * phi_fa * math.cos(math.pi * f * t)


@dataclass(frozen=True)
class WingKinematicsParams:
    phi_fa: float
    f: float
    alpha_ma: float
    alpha_0: float
    omega: float
    psi: float
    dt: float

    def __post_init__(self):
        check_positive(self.f, "f")
        check_positive(self.dt, "dt")
        if self.alpha_0 < 0:
            raise ConfigError(f"alpha_0 must be >= 0, got {self.alpha_0}")


def angle_of_attack(params, step_time):
    """Angle of attack (rad) with the pitching phase evaluated at ``step_time``.

    Pass the integration step ``params.dt`` for the per-step reading or the
    elapsed time for a continuous pitching profile.
    """
    return params.alpha_ma - params.alpha_0 * math.sin(params.omega * step_time + params.psi)


@dataclass(frozen=True)
class SurrogateParams:
    """Coefficients of the surrogate plant.

    Gains are per degree of amplitude; ``damping`` and ``noise_std`` are
    ordered ``(vbx, vby, vbz, wbx, wby, wbz)``.
    """

    thrust_gain: float = 6.0
    roll_gain: float = 3.0
    pitch_gain: float = 3.0
    coupling_gain: float = 3.0
    damping: tuple = (30.0,) * 6
    hover_trim: float = 45.0
    noise_std: tuple = (0.0,) * 6

    def __post_init__(self):
        damping = tuple(float(d) for d in self.damping)
        noise = tuple(float(s) for s in self.noise_std)
        if len(damping) != 6 or len(noise) != 6:
            raise ConfigError("damping and noise_std need one value per velocity channel (6)")
        if any(not d > 0 for d in damping):
            raise ConfigError(f"damping coefficients must be > 0, got {damping}")
        if any(s < 0 for s in noise):
            raise ConfigError(f"noise_std must be >= 0, got {noise}")
        if not 0 < self.hover_trim <= AMPLITUDE_LIMIT:
            raise ConfigError(f"hover_trim must lie in (0, 90], got {self.hover_trim}")
        object.__setattr__(self, "damping", damping)
        object.__setattr__(self, "noise_std", noise)

    @property
    def command_limits(self):
        """Collective offset range that keeps every amplitude within +-90 deg."""
        return (-AMPLITUDE_LIMIT - self.hover_trim, AMPLITUDE_LIMIT - self.hover_trim)


@dataclass(frozen=True)
class PlantState:
    v_b: tuple = (0.0, 0.0, 0.0)
    omega_b: tuple = (0.0, 0.0, 0.0)
    z_b: float = 0.0
    t: float = 0.0

    @property
    def velocities(self):
        return np.array(self.v_b + self.omega_b)


def clamp_command(amplitudes):
    """Four actuator amplitudes clipped to the +-90 deg range."""
    a = check_vector(amplitudes, 4, "amplitudes")
    return np.clip(a, -AMPLITUDE_LIMIT, AMPLITUDE_LIMIT)


def _derivatives(vel, a, p):
    collective = 0.25 * (a[0] + a[1] + a[2] + a[3]) - p.hover_trim
    roll = 0.5 * (a[0] + a[1]) - 0.5 * (a[2] + a[3])
    pitch = 0.5 * (a[0] + a[2]) - 0.5 * (a[1] + a[3])
    vbx, vby, vbz, wbx, wby, wbz = vel
    d = p.damping
    k = p.coupling_gain
    return (
        k * wby - d[0] * vbx,
        k * wbx - d[1] * vby,
        p.thrust_gain * collective - d[2] * vbz,
        p.roll_gain * roll - d[3] * wbx,
        p.pitch_gain * pitch - d[4] * wby,
        k * (wbx - wby) - d[5] * wbz,
    )


def plant_step(state, cmd, params, dt, rng=None):
    """Advance the surrogate by one semi-implicit Euler step.

    Velocities take an explicit Euler step; altitude is then integrated with
    the updated vertical velocity. ``rng`` (a ``numpy.random.Generator``)
    is required only when ``params.noise_std`` is nonzero.
    """
    dt = check_positive(dt, "dt")
    a = clamp_command(cmd)
    vel = state.v_b + state.omega_b
    with np.errstate(invalid="ignore", over="ignore"):
        # a blown-up state is reported as a fault below, not as a warning
        new = [v + dt * dv for v, dv in zip(vel, _derivatives(vel, a, params))]
    if any(params.noise_std):
        if rng is None:
            raise ConfigError("noise_std > 0 requires an explicit rng")
        new = [v + s * rng.standard_normal() if s else v for v, s in zip(new, params.noise_std)]
    z = state.z_b + new[2] * dt
    if not all(math.isfinite(v) for v in new) or not math.isfinite(z):
        raise SimulationFault(f"non-finite plant state at t={state.t + dt:.6g}")
    return PlantState(tuple(new[:3]), tuple(new[3:]), z, state.t + dt)


def excitation(t):
    """Amplitudes (deg) of the four actuators for the identification run."""
    return np.array(
        [
            AMPLITUDE_LIMIT * math.sin(2 * math.pi * f * t + (i + 1) * math.pi / 7)
            for i, f in enumerate(EXCITATION_FREQUENCIES)
        ]
    )


def generate_training_data(params, duration=100.0, dt=0.01, seed=0):
    """Simulate the surrogate under sinusoidal excitation.

    Row ``k`` holds the time ``k * dt``, the amplitudes applied at that time
    and the velocities reached after applying them for one step.
    """
    duration = check_positive(duration, "duration")
    dt = check_positive(dt, "dt")
    steps = int(round(duration / dt))
    rng = np.random.default_rng(seed)
    t = np.arange(steps + 1) * dt
    inputs = np.empty((steps + 1, 4))
    outputs = np.empty((steps + 1, 6))
    state = PlantState()
    for k in range(steps + 1):
        a = clamp_command(excitation(t[k]))
        state = plant_step(state, a, params, dt, rng)
        inputs[k] = a
        outputs[k] = state.velocities
    return IoDataset(inputs, outputs, dt, t)


class SurrogatePlant:
    """Stateful wrapper around :func:`plant_step` for the control loop."""

    def __init__(self, params=None, seed=0):
        self.params = SurrogateParams() if params is None else params
        self.seed = seed
        self.reset()

    def reset(self, z0=0.0):
        self.state = PlantState(z_b=float(z0))
        self._rng = np.random.default_rng(self.seed)
        return self.state

    def step(self, amplitudes, dt):
        """Apply the command for ``dt``; returns ``(v_bz, z_b)``."""
        self.state = plant_step(self.state, amplitudes, self.params, dt, self._rng)
        return self.state.v_b[2], self.state.z_b


@dataclass
class IdentifiedPlant:
    """An identified TS model used as the plant: velocities are a static map
    of the amplitudes and altitude integrates the vertical velocity."""

    model: object
    vbz_index: int = 2
    z: float = field(default=0.0, init=False)

    def reset(self, z0=0.0):
        self.z = float(z0)

    def step(self, amplitudes, dt):
        v = infer(clamp_command(amplitudes), self.model)
        vbz = float(v[self.vbz_index])
        self.z += vbz * dt
        if not (math.isfinite(vbz) and math.isfinite(self.z)):
            raise SimulationFault("non-finite identified-plant output")
        return vbz, self.z

