"""Hybrid integration: oracles, integrator agreement, traces, exports."""

import copy
import csv
import math

import numpy as np
import pytest
import scipy.linalg

from omaslab import (
    ConfigError,
    ModeMatrix,
    PerturbationModel,
    Segment,
    SwitchingSignal,
    Trajectory,
    error_projector,
    export_events_csv,
    export_trajectory_csv,
    integrate_segment,
    lyapunov_trace,
    run_scenario,
    run_switched,
)
from omaslab.demo import DEMO_A
from omaslab.simulate import SegmentTrace

from helpers import pure_relabel_event

ZERO = PerturbationModel(kind="zero", bound=0.0)


def scalar_follower(a: float) -> ModeMatrix:
    """One 1-d follower with rate a, leader frozen at zero."""
    return ModeMatrix(
        mode_id=1, n_agents=1, p=1,
        A_err=np.array([[a]]),
        A_full=np.array([[0.0, 0.0], [0.0, a]]),
        alpha=a, stable=a < 0,
    )


# --------------------------------------------------------------------------
# closed-form oracles


@pytest.mark.parametrize("method", ["exact", "rk4"])
def test_scalar_ode_against_closed_form(method):
    # xdot = -x + 1, x(0) = 0: x(1) = 1 - e^-1
    mode = scalar_follower(-1.0)
    drive = PerturbationModel(kind="constant", bound=10.0, amplitude=(1.0,))
    res = integrate_segment(mode, np.zeros(2), drive, (0.0, 1.0), dt=1e-3, method=method)
    assert res.diverged_at is None
    assert res.states[-1][1] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)
    assert res.states[-1][0] == 0.0  # leader untouched
    assert res.max_h_norm == pytest.approx(1.0, rel=1e-12)


def test_pure_decay_against_exponential():
    mode = scalar_follower(-2.0)
    res = integrate_segment(mode, np.array([0.0, 3.0]), ZERO, (0.0, 2.0), dt=1e-3)
    np.testing.assert_allclose(res.states[:, 1], 3.0 * np.exp(-2.0 * res.t), rtol=1e-10)


def test_unstable_mode_growth_rate(demo_matrices):
    # dominant eigenvalue pair 5.925 +- i omega with omega^2 = det - 0.025^2:
    # a log-norm fit over one full oscillation period cancels the wobble
    mm = demo_matrices[3]
    omega = math.sqrt(0.2 - 0.025**2)
    period = 2.0 * math.pi / omega
    rng = np.random.default_rng(5)
    leader = np.array([1.0, 0.5])
    x0 = np.concatenate([leader, np.tile(leader, 5) + 0.1 * rng.standard_normal(10)])
    res = integrate_segment(mm, x0, ZERO, (0.0, 1.0 + period), dt=1e-3)
    errs = res.states @ error_projector(5, 2).T
    norms = np.linalg.norm(errs, axis=1)
    mask = res.t >= 1.0  # skip the transient of the subdominant modes
    slope = np.polyfit(res.t[mask], np.log(norms[mask]), 1)[0]
    assert slope == pytest.approx(5.925, rel=0.02)


def test_leader_follows_its_own_flow(practical_run):
    # the leader block of A_full is [A | 0] and jumps preserve the leader,
    # so x0(t) = expm(A t) x0(0) across segments and migrations alike
    leader0 = np.array([1.0, 0.5])
    A = np.array(DEMO_A)
    for seg in practical_run.trajectory.segments:
        for idx in range(0, len(seg.t), 700):
            t = seg.t[idx]
            expected = scipy.linalg.expm(A * t) @ leader0
            np.testing.assert_allclose(seg.states[idx][:2], expected, atol=1e-8)


def test_errors_equal_follower_minus_leader(practical_run):
    p = 2
    for seg in practical_run.trajectory.segments:
        for idx in range(0, len(seg.t), 900):
            state = seg.states[idx]
            direct = state[p:] - np.tile(state[:p], seg.n_agents)
            np.testing.assert_allclose(seg.errs[idx], direct, atol=1e-12)


# --------------------------------------------------------------------------
# integrator agreement


def test_exact_and_rk4_agree_on_practical_run(practical_scenario, practical_run):
    rk4 = run_scenario(practical_scenario, method="rk4")
    exact_segs = practical_run.trajectory.segments
    rk4_segs = rk4.trajectory.segments
    assert len(exact_segs) == len(rk4_segs)
    for se, sr in zip(exact_segs, rk4_segs):
        np.testing.assert_array_equal(se.t, sr.t)
        scale = max(1.0, float(np.abs(se.states).max()))
        assert float(np.abs(se.states - sr.states).max()) / scale <= 1e-6


# --------------------------------------------------------------------------
# perturbation models


def test_perturbation_norm_bound_on_run(practical_run):
    assert practical_run.trajectory.max_h_norm <= 0.2 + 1e-12
    assert practical_run.trajectory.max_h_norm > 0.1  # the drive is actually active


def test_random_perturbation_determinism_and_holds():
    h = PerturbationModel(kind="random", bound=0.5, hold=0.05, seed=7)
    a = h.sample(0.01, 2, 2)
    b = h.sample(0.04, 2, 2)
    c = h.sample(0.06, 2, 2)
    np.testing.assert_array_equal(a, b)  # same hold window
    assert not np.array_equal(a, c)      # next hold redraws
    np.testing.assert_array_equal(a, h.sample(0.01, 2, 2))  # reproducible
    assert np.linalg.norm(h.sample(12.34, 3, 2)) <= 0.5
    # dimension changes rekey the draw instead of truncating it
    assert not np.array_equal(a[:2], h.sample(0.01, 1, 2))


def test_constant_perturbation_rescaled_into_ball():
    h = PerturbationModel(kind="constant", bound=1.0, amplitude=(3.0, 4.0))
    v = h.sample(0.0, 1, 2)
    np.testing.assert_allclose(v, [0.6, 0.8], rtol=1e-12)
    v = h.sample(0.0, 2, 2)  # tiled across two agents, norm still 1
    assert np.linalg.norm(v) == pytest.approx(1.0, rel=1e-12)


def test_sinusoidal_perturbation():
    h = PerturbationModel(kind="sinusoidal", bound=2.0, amplitude=(1.0, 0.0), frequency=1.0)
    np.testing.assert_allclose(h.sample(0.25, 1, 2), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(h.sample(0.5, 1, 2), [0.0, 0.0], atol=1e-12)


def test_zero_bound_silences_any_kind():
    h = PerturbationModel(kind="random", bound=0.0)
    assert not h.sample(0.3, 2, 2).any()


def test_perturbation_validation():
    with pytest.raises(ConfigError, match="kind"):
        PerturbationModel(kind="banana", bound=1.0)
    with pytest.raises(ConfigError, match="bound"):
        PerturbationModel(kind="zero", bound=-1.0)
    with pytest.raises(ConfigError, match="amplitude"):
        PerturbationModel(kind="constant", bound=1.0)
    with pytest.raises(ConfigError, match="hold"):
        PerturbationModel(kind="random", bound=1.0, hold=0.0)
    h = PerturbationModel(kind="constant", bound=1.0, amplitude=(1.0, 2.0, 3.0))
    with pytest.raises(ConfigError, match="amplitude"):
        h.sample(0.0, 1, 2)


def test_with_seed_respects_explicit_seed():
    assert PerturbationModel(kind="zero", bound=0.0, seed=3).with_seed(9).seed == 3
    assert PerturbationModel(kind="zero", bound=0.0).with_seed(9).seed == 9


# --------------------------------------------------------------------------
# argument validation


def test_integrate_segment_validation():
    mode = scalar_follower(-1.0)
    with pytest.raises(ConfigError, match="integrator"):
        integrate_segment(mode, np.zeros(2), ZERO, (0.0, 1.0), method="euler")
    with pytest.raises(ConfigError, match="dt"):
        integrate_segment(mode, np.zeros(2), ZERO, (0.0, 1.0), dt=0.0)
    with pytest.raises(ConfigError, match="sample_stride"):
        integrate_segment(mode, np.zeros(2), ZERO, (0.0, 1.0), sample_stride=0)
    with pytest.raises(ConfigError, match="time span"):
        integrate_segment(mode, np.zeros(2), ZERO, (1.0, 1.0))
    with pytest.raises(ConfigError, match="state has shape"):
        integrate_segment(mode, np.zeros(3), ZERO, (0.0, 1.0))


# --------------------------------------------------------------------------
# sampling and stride


def test_explicit_stride_keeps_final_sample():
    mode = scalar_follower(-1.0)
    res = integrate_segment(mode, np.array([0.0, 1.0]), ZERO, (0.0, 1.0), dt=1e-2,
                            sample_stride=7)
    assert res.t[0] == 0.0 and res.t[-1] == 1.0
    # interior samples arrive every 7 steps of 0.01
    np.testing.assert_allclose(np.diff(res.t)[:-1], 0.07, rtol=1e-9)


def test_auto_stride_on_long_horizons():
    mode = scalar_follower(-0.01)
    sig = SwitchingSignal(
        t0=0.0, tf=150.0, segments=(Segment(start=0.0, mode=1),), events=()
    )
    traj = run_switched({1: mode}, sig, np.array([0.0, 1.0]), ZERO, dt=1e-2)
    seg = traj.segments[0]
    assert seg.t[-1] == 150.0
    # ceil(150 / 100) = 2 grid steps per retained sample
    assert seg.t[1] - seg.t[0] == pytest.approx(2e-2, rel=1e-9)
    assert len(seg.t) < 8000


def test_uneven_final_step_hits_boundary_exactly():
    mode = scalar_follower(-1.0)
    res = integrate_segment(mode, np.array([0.0, 1.0]), ZERO, (0.0, 0.0105), dt=1e-3)
    assert res.t[-1] == 0.0105
    np.testing.assert_allclose(
        res.states[-1][1], math.exp(-0.0105), rtol=1e-12
    )


# --------------------------------------------------------------------------
# trajectory-level behavior


def test_monotone_energy_decay_single_stable_mode(demo_matrices, practical_bundle):
    mm = demo_matrices[1]
    P = practical_bundle.certificates[1].P
    rng = np.random.default_rng(3)
    leader = np.array([1.0, 0.5])
    x0 = np.concatenate([leader, np.tile(leader, 4) + rng.standard_normal(8)])
    sig = SwitchingSignal(0.0, 5.0, (Segment(start=0.0, mode=1),), ())
    traj = run_switched({1: mm}, sig, x0, ZERO, dt=1e-3)
    errs = traj.segments[0].errs
    v = np.sqrt(np.einsum("ij,jk,ik->i", errs, P, errs))
    assert np.all(v[1:] <= v[:-1] * (1.0 + 1e-9))
    assert v[-1] < 1e-3 * v[0]


def test_tail_sup_error_hand_case():
    traj = Trajectory(p=1, t0=0.0, tf=10.0)
    traj.segments.append(
        SegmentTrace(
            index=0, mode_id=1, n_agents=1,
            t=np.array([0.0, 4.0, 7.999, 8.0, 9.0, 10.0]),
            states=np.zeros((6, 2)),
            errs=np.array([[100.0], [50.0], [60.0], [3.0], [-2.0], [7.0]]),
        )
    )
    assert traj.tail_sup_error(0.2) == pytest.approx(7.0, abs=1e-12)
    assert traj.tail_sup_error(1.0) == pytest.approx(100.0, abs=1e-12)


def test_divergence_detected_and_reported():
    mode = ModeMatrix(
        mode_id=1, n_agents=1, p=1,
        A_err=np.array([[50.0]]),
        A_full=np.array([[0.0, 0.0], [0.0, 50.0]]),
        alpha=50.0, stable=False,
    )
    res = integrate_segment(mode, np.array([0.0, 1.0]), ZERO, (0.0, 20.0), dt=1e-3)
    # e^(50 t) overflows float64 just past t = 709.78 / 50
    assert res.diverged_at == pytest.approx(709.78 / 50.0, abs=0.5)
    # run_switched stops at the diverging segment and skips later ones
    sig = SwitchingSignal(
        0.0, 20.0,
        (Segment(start=0.0, mode=1), Segment(start=19.0, mode=2)),
        (pure_relabel_event(1, 1, 2, n=1),),
    )
    traj = run_switched({1: mode, 2: scalar_follower(-1.0)}, sig,
                        np.array([0.0, 1.0]), ZERO, dt=1e-3)
    assert traj.diverged
    assert len(traj.segments) == 1 and not traj.events


def test_practical_run_summary(practical_run):
    s = practical_run.summary
    assert not s.diverged
    assert s.n_events == len(practical_run.signal.events)
    assert s.ultimate_bound is not None and math.isfinite(s.ultimate_bound)
    assert s.tail_sup_error <= s.ultimate_bound
    assert s.bound_respected is True
    assert s.max_h_norm <= 0.2 + 1e-12


def test_asymptotic_run_summary(asymptotic_run):
    s = asymptotic_run.summary
    assert not s.diverged
    assert s.converged
    assert s.ultimate_bound == 0.0
    assert s.bound_respected is True
    assert s.max_h_norm == 0.0


# --------------------------------------------------------------------------
# energy trace and envelope


def test_lyapunov_trace_ok_on_demo_runs(
    practical_run, practical_bundle, asymptotic_run, asymptotic_bundle
):
    for run, bundle in ((practical_run, practical_bundle), (asymptotic_run, asymptotic_bundle)):
        trace = lyapunov_trace(run.trajectory, bundle)
        assert trace.ok
        assert not trace.violations
        assert len(trace.jump_checks) == len(run.trajectory.events)
        assert len(trace.t) == len(trace.v) == len(trace.envelope)


def test_lyapunov_trace_catches_tampered_flow(practical_run, practical_bundle):
    traj = copy.deepcopy(practical_run.trajectory)
    traj.segments[-1].errs *= 1e4
    trace = lyapunov_trace(traj, practical_bundle)
    assert trace.violations
    assert not trace.ok


def test_lyapunov_trace_catches_tampered_jump(practical_run, practical_bundle):
    traj = copy.deepcopy(practical_run.trajectory)
    traj.events[0].post_err = traj.events[0].post_err * 1e4
    trace = lyapunov_trace(traj, practical_bundle)
    assert any(not c[3] for c in trace.jump_checks)
    assert not trace.ok


# --------------------------------------------------------------------------
# CSV export


def test_trajectory_csv_layout(tmp_path, practical_run):
    traj = practical_run.trajectory
    path = tmp_path / "trajectory.csv"
    export_trajectory_csv(traj, str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n_max, p = traj.max_agents(), traj.p
    expected = ["t", "mode", "agent_count"]
    expected += [f"xi_agent{i}_dim{d}" for i in range(n_max + 1) for d in range(p)]
    expected += [f"err_agent{i}_dim{d}" for i in range(1, n_max + 1) for d in range(p)]
    assert header == expected
    assert len(body) == sum(len(seg.t) for seg in traj.segments)
    # boundary instants appear twice: pre-jump and post-jump
    times = [float(r[0]) for r in body]
    for ev in traj.events:
        assert times.count(ev.t) == 2
    # rows of small modes blank out the unused agent columns
    for row in body:
        n_here = int(row[2])
        if n_here < n_max:
            assert row[3 + (n_here + 1) * p] == ""
            state_vals = row[3 : 3 + (n_here + 1) * p]
            assert all(v != "" for v in state_vals)
    # values survive the decimal round trip exactly
    first = body[0]
    np.testing.assert_array_equal(
        np.array([float(v) for v in first[3 : 3 + 10]]),
        traj.segments[0].states[0][:10],
    )


def test_events_csv_layout(tmp_path, practical_run):
    traj = practical_run.trajectory
    path = tmp_path / "events.csv"
    export_events_csv(traj, str(path))
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == [
        "k", "t", "mode_before", "mode_after", "n_before", "n_after",
        "pre_err_norm", "post_err_norm", "impulse_norm",
    ]
    assert len(rows) - 1 == len(traj.events)
    for row, ev in zip(rows[1:], traj.events):
        assert int(row[0]) == ev.index
        assert float(row[1]) == ev.t
        assert (int(row[2]), int(row[3])) == (ev.mode_before, ev.mode_after)
        assert float(row[7]) == pytest.approx(ev.post_err_norm, rel=1e-15)
