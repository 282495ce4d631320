import math

import numpy as np
import pytest

from fwmav_fcm.config import default_references
from fwmav_fcm.control import (
    AdaptiveFuzzyController,
    PidController,
    PidState,
    ReferenceSignal,
    SimTrace,
    adapt,
    closed_loop_run,
    compute_rmse,
    fuzzy_control_output,
    pid_step,
    reference_value,
    tune_pid,
)
from fwmav_fcm.exceptions import ConfigError, SimulationFault
from fwmav_fcm.plant import SurrogateParams
from oracles import gaussian

REFS = default_references()


class IntegratorPlant:
    """Altitude rate equals the collective offset; no dynamics."""

    hover_trim = 45.0

    def reset(self, z0=0.0):
        self.z = z0

    def step(self, amplitudes, dt):
        vbz = amplitudes[0] - self.hover_trim
        self.z += vbz * dt
        return vbz, self.z


class FeedforwardStub:
    """Commands exactly the reference slope over the next step."""

    name = "stub"

    def __init__(self, ref):
        self.ref = ref

    def reset(self):
        self.k = 0

    def step(self, e, de, dt):
        t = self.k * dt
        self.k += 1
        return (self.ref((self.k) * dt) - self.ref(t)) / dt


def test_reference_examples():
    step1, step3 = REFS["step1"], REFS["step3"]
    assert reference_value(step1, 19.99) == 0 and reference_value(step1, 20.0) == 10
    assert REFS["constant"](0.0) == 10 and REFS["constant"](73.2) == 10
    assert step3(0.0) == -5 and step3(25.0) == 5
    assert REFS["step2"](0.0) == 5 and REFS["step2"](20.0) == 10
    assert REFS["sine"](0.25) == pytest.approx(1.0)
    sq = REFS["square"]
    assert [sq(t) for t in (0.0, 4.99, 5.0, 9.99, 10.0)] == [1, 1, -1, -1, 1]


def test_reference_validation():
    with pytest.raises(ConfigError):
        ReferenceSignal("ramp")
    with pytest.raises(ConfigError):
        ReferenceSignal("sine", frequency=0.0)


def test_pid_proportional():
    assert pid_step(PidState(1.0, 0.0, 0.0), 2.0, 0.01) == 2.0


def test_pid_integral_rectangle_rule():
    state = PidState(0.0, 0.7, 0.0)
    for _ in range(10):
        u = pid_step(state, 1.0, 0.1)
    assert state.integral == pytest.approx(1.0, abs=1e-12)
    assert u == pytest.approx(0.7 * 1.0, abs=1e-12)


def test_pid_derivative_starts_at_zero():
    state = PidState(0.0, 0.0, 2.0)
    assert pid_step(state, 1.0, 0.1) == 0.0
    assert pid_step(state, 1.5, 0.1) == pytest.approx(10.0)


def test_pid_anti_windup_freezes_integral_at_limit():
    state = PidState(5.0, 1.0, 0.0, u_min=-1.0, u_max=1.0)
    pid_step(state, 0.1, 0.01)
    frozen = state.integral
    for _ in range(100):
        assert pid_step(state, 10.0, 0.01) == 1.0
        assert state.integral == frozen


def test_pid_integral_magnitude_is_bounded():
    rng = np.random.default_rng(0)
    for ki in (0.0, 1e-3, 0.5, 20.0):
        state = PidState(1.0, ki, 0.1, -135.0, 45.0)
        for e in rng.normal(scale=50, size=2000):
            pid_step(state, e, 0.01)
            assert abs(state.integral) <= (45.0 + 135.0) / max(ki, 1e-12)


def test_pid_rejects_bad_limits():
    with pytest.raises(ConfigError):
        PidState(1, 0, 0, u_min=1.0, u_max=1.0)


def test_fuzzy_initial_layout():
    ctrl = AdaptiveFuzzyController()
    assert ctrl.n_rules == 25
    assert ctrl.centers_e.tolist() == [-10, -5, 0, 5, 10]
    assert ctrl.centers_de.tolist() == [-5, -2.5, 0, 2.5, 5]
    assert np.all(ctrl.widths_e == 2.5) and np.all(ctrl.widths_de == 1.25)
    assert np.all(ctrl.consequents == 0)


def test_fuzzy_output_dominated_by_one_rule():
    ctrl = AdaptiveFuzzyController()
    ctrl.widths_e[:] = 0.5
    ctrl.widths_de[:] = 0.25
    ctrl.consequents = np.arange(25.0).reshape(5, 5) - 12.0
    assert fuzzy_control_output(ctrl, 5.0, -2.5) == pytest.approx(ctrl.consequents[3, 1], abs=1e-3)


def test_fuzzy_output_constant_consequents():
    ctrl = AdaptiveFuzzyController()
    ctrl.consequents[:] = -7.25
    for e, de in [(0.0, 0.0), (3.3, -4.1), (-9.0, 2.0), (100.0, -100.0)]:
        assert fuzzy_control_output(ctrl, e, de) == pytest.approx(-7.25, abs=1e-12)


def test_fuzzy_output_matches_naive_sum():
    rng = np.random.default_rng(1)
    ctrl = AdaptiveFuzzyController()
    for _ in range(50):
        ctrl.consequents = rng.uniform(-100, 40, size=(5, 5))
        ctrl.widths_e = rng.uniform(0.5, 5, 5)
        ctrl.widths_de = rng.uniform(0.3, 3, 5)
        e, de = rng.uniform(-10, 10), rng.uniform(-5, 5)
        num = den = 0.0
        for j in range(5):
            for k in range(5):
                w = gaussian(e, ctrl.centers_e[j], ctrl.widths_e[j]) * gaussian(
                    de, ctrl.centers_de[k], ctrl.widths_de[k]
                )
                num += w * ctrl.consequents[j, k]
                den += w
        y = fuzzy_control_output(ctrl, e, de)
        assert abs(y - num / den) <= 1e-12
        assert ctrl.consequents.min() <= y <= ctrl.consequents.max()


def test_fuzzy_output_is_clamped():
    ctrl = AdaptiveFuzzyController(output_limits=(-1.0, 1.0))
    ctrl.consequents[:] = 5.0
    assert fuzzy_control_output(ctrl, 0.0, 0.0) == 1.0


def test_adapt_zero_error_is_noop():
    ctrl = AdaptiveFuzzyController()
    ctrl.consequents = np.random.default_rng(2).uniform(-10, 10, (5, 5))
    before = ctrl.consequents.copy()
    adapt(ctrl, 0.0, 1.3, 0.0, 1, 0.01)
    assert np.array_equal(ctrl.consequents, before)


@pytest.mark.parametrize("sign, e", [(1, 0.8), (1, -0.8), (-1, 0.8)])
def test_adapt_moves_fired_consequents_monotonically(sign, e):
    ctrl = AdaptiveFuzzyController(learning_rate=0.5, dz_du_sign=sign, retune_period=1e6)
    direction = sign * np.sign(e)
    prev = ctrl.consequents.copy()
    for _ in range(20):
        adapt(ctrl, e, 0.2, 0.0, sign, 0.01)
        fired = ctrl.normalized_firing(e, 0.2) > 0
        assert np.all(direction * (ctrl.consequents - prev)[fired] > 0)
        prev = ctrl.consequents.copy()


def test_consequents_stay_within_output_limits():
    ctrl = AdaptiveFuzzyController(retune_period=1e6)
    for _ in range(200):
        adapt(ctrl, 10.0, 0.0, 0.0, 1, 0.01)
    assert ctrl.consequents.max() <= ctrl.output_limits[1]


def test_retune_on_two_groups_keeps_centers_inside():
    ctrl = AdaptiveFuzzyController(retune_period=1e6)
    rng = np.random.default_rng(3)
    for k in range(200):
        e = (-1.0 if k % 2 else 1.0) + rng.normal(scale=1e-3)
        ctrl.samples.append((float(np.clip(e, -1, 1)), rng.normal()))
    assert ctrl.retune()
    assert np.all(ctrl.centers_e >= -1.0) and np.all(ctrl.centers_e <= 1.0)
    assert np.all(np.diff(ctrl.centers_e) > 0) and np.all(np.diff(ctrl.centers_de) > 0)
    assert np.all(ctrl.widths_e >= ctrl.width_floor_error)
    assert np.all(ctrl.widths_de >= ctrl.width_floor_rate)


def test_retune_on_coincident_samples_is_skipped():
    ctrl = AdaptiveFuzzyController()
    before = (ctrl.centers_e.copy(), ctrl.widths_e.copy())
    for _ in range(50):
        ctrl.samples.append((0.5, 0.0))
    assert not ctrl.retune()
    assert np.array_equal(ctrl.centers_e, before[0]) and np.array_equal(ctrl.widths_e, before[1])


def test_retune_ties_are_separated(monkeypatch):
    from fwmav_fcm import control
    from fwmav_fcm.fcm import FcmModel

    def fake_fit(data, cfg):
        centers = np.array([[0.0], [0.5], [0.5], [0.5], [1.0]])
        return FcmModel(centers, np.full((5, len(data)), 0.2), 0.0, 1)

    monkeypatch.setattr(control, "fcm_fit", fake_fit)
    ctrl = AdaptiveFuzzyController()
    for k in range(30):
        ctrl.samples.append((0.1 * k, -0.1 * k))
    assert ctrl.retune()
    assert np.all(np.diff(ctrl.centers_e) > 0)
    assert ctrl.centers_e[2] == 0.5 + 2e-9 and ctrl.centers_e[3] == 0.5 + 2e-9 + 3e-9
    assert np.all(ctrl.widths_e >= ctrl.width_floor_error)


def test_retune_skipped_on_small_window():
    ctrl = AdaptiveFuzzyController(retune_period=0.01)
    before = ctrl.centers_e.copy()
    for k in range(24):
        adapt(ctrl, 1.0 + 0.01 * k, 0.5 - 0.02 * k, 0.0, 1, 0.01)
    assert ctrl.retunes == 0
    assert np.array_equal(ctrl.centers_e, before)
    assert np.any(ctrl.consequents != 0)
    adapt(ctrl, 1.0, 0.5, 0.0, 1, 0.01)
    assert ctrl.retunes == 1


def test_retune_happens_on_schedule():
    ctrl = AdaptiveFuzzyController(retune_period=0.5)
    rng = np.random.default_rng(4)
    for _ in range(300):
        ctrl.step(rng.normal(), rng.normal(), 0.01)
    assert ctrl.retunes == 6


def test_fuzzy_controller_validation():
    for kwargs in ({"n_mfs": 1}, {"window": 0}, {"retune_period": 0.0},
                   {"dz_du_sign": 0.5}, {"output_limits": (1.0, -1.0)}):
        with pytest.raises(ConfigError):
            AdaptiveFuzzyController(**kwargs)


def test_compute_rmse_examples():
    assert compute_rmse(np.zeros(5)) == 0.0
    assert compute_rmse(np.full(7, 0.5)) == 0.5
    assert compute_rmse(np.array([1.0, -1.0] * 4)) == 1.0
    with pytest.raises(ConfigError):
        compute_rmse(np.array([]))


@pytest.mark.parametrize("name", ["sine", "step2", "constant"])
def test_perfect_feedforward_has_zero_error(name):
    ref = REFS[name]
    trace = closed_loop_run(IntegratorPlant(), FeedforwardStub(ref), ref, 30.0, 0.01, z0=ref(0.0))
    assert trace.rmse <= 1e-12


def test_zero_gain_pid_on_constant_reference():
    trace = closed_loop_run(SurrogateParams(), PidController(0, 0, 0), REFS["constant"], 10.0, 0.01)
    assert trace.rmse == pytest.approx(10.0, abs=1e-12)
    assert np.all(trace.z == 0.0)


def test_trace_layout_and_rmse():
    ctrl = PidController(2.0, 0.1, 0.0, SurrogateParams().command_limits)
    trace = closed_loop_run(SurrogateParams(), ctrl, REFS["step1"], 30.0, 0.01, seed=5)
    assert len(trace) == 3001
    assert trace.as_array().shape == (3001, 6)
    assert np.all(trace.ref[trace.t < 20 - 1e-9] == 0)
    assert np.all(trace.ref[trace.t >= 20 - 1e-9] == 10)
    assert np.allclose(trace.e, trace.ref - trace.z, rtol=0, atol=0)
    assert abs(compute_rmse(trace) - trace.rmse) <= 1e-12
    assert trace.metadata["controller"] == "pid" and trace.metadata["seed"] == 5
    assert np.all(trace.u <= 45.0) and np.all(trace.u >= -135.0)


def test_closed_loop_is_deterministic():
    def once():
        return closed_loop_run(SurrogateParams(), AdaptiveFuzzyController(), REFS["square"], 20.0, 0.01,
                               rate_filter=0.8)

    a, b = once(), once()
    assert np.array_equal(a.as_array(), b.as_array())
    assert a.rmse == b.rmse


def test_controller_state_is_reset_between_runs():
    ctrl = AdaptiveFuzzyController()
    a = closed_loop_run(SurrogateParams(), ctrl, REFS["sine"], 5.0, 0.01)
    b = closed_loop_run(SurrogateParams(), ctrl, REFS["sine"], 5.0, 0.01)
    assert np.array_equal(a.as_array(), b.as_array())


def test_fuzzy_tracks_constant_height():
    ctrl = AdaptiveFuzzyController()
    trace = closed_loop_run(SurrogateParams(), ctrl, REFS["constant"], 20.0, 0.01, rate_filter=0.8)
    assert abs(trace.e[-1]) < 0.05


def test_non_finite_output_aborts_with_trace():
    class Exploding:
        name = "boom"

        def reset(self):
            self.k = 0

        def step(self, e, de, dt):
            self.k += 1
            return math.nan if self.k > 5 else 0.0

    with pytest.raises(SimulationFault) as info:
        closed_loop_run(SurrogateParams(), Exploding(), REFS["constant"], 1.0, 0.01)
    assert isinstance(info.value.trace, SimTrace)
    assert len(info.value.trace) == 6


def test_loop_validation():
    with pytest.raises(ConfigError):
        closed_loop_run(SurrogateParams(), PidController(1, 0, 0), REFS["sine"], 0.0, 0.01)
    with pytest.raises(ConfigError):
        closed_loop_run(SurrogateParams(), PidController(1, 0, 0), REFS["sine"], 1.0, 0.01, rate_filter=1.0)


def test_tune_pid_picks_the_grid_minimum():
    grid = {"kp": (0.5, 5.0), "ki": (0.0, 0.5), "kd": (0.0,)}
    limits = SurrogateParams().command_limits
    best, rmse = tune_pid(SurrogateParams(), REFS["constant"], grid, limits, 10.0, 0.01)
    runs = {
        (kp, ki): closed_loop_run(SurrogateParams(), PidController(kp, ki, 0.0, limits),
                                  REFS["constant"], 10.0, 0.01).rmse
        for kp in grid["kp"] for ki in grid["ki"]
    }
    assert rmse == min(runs.values())
    assert runs[(best["kp"], best["ki"])] == rmse
