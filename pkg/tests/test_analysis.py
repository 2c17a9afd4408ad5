import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from matrix_lorenz.core.algebra import named_basis, named_tensors
from matrix_lorenz.core.analysis import (
    EnsembleSpec,
    JobResult,
    LyapunovEstimate,
    LyapunovJob,
    ObservableSeries,
    PhaseDiagram,
    aggregate,
    block_lyapunov,
    casimir_statistics,
    detect_rcrit,
    ensemble_average,
    initial_state,
    largest_lyapunov,
    lyapunov_estimate,
    observables,
    run_lyapunov_job,
    sample_rng,
    sweep_r,
    two_trajectory_lyapunov,
)
from matrix_lorenz.core.dynamics import LorenzParams
from matrix_lorenz.core.errors import EnsembleError, ParameterError, TransitionNotFound
from matrix_lorenz.core.integrator import IntegrationSpec, Trajectory, integrate
from matrix_lorenz.core.systems import build_system

# Linearization at the origin for r < 1: top eigenvalue of [[-sigma, sigma], [r, -1]]
LAMBDA_R_HALF = (-11.0 + math.sqrt(121.0 - 4.0 * (10.0 - 5.0))) / 2.0

FAST = IntegrationSpec.from_horizon(0.01, 100.0)


def diagram(r_values, means, stderr=0.01):
    estimates = tuple(LyapunovEstimate(lambda_max=m, stderr=stderr, n_samples=4) for m in means)
    return PhaseDiagram(r_values=r_values, estimates=estimates, sigma=10.0, b=8 / 3)


def test_sample_streams_are_reproducible_and_distinct():
    a = sample_rng(5, 0).uniform(size=4)
    assert_array_equal(a, sample_rng(5, 0).uniform(size=4))
    assert not np.allclose(a, sample_rng(5, 1).uniform(size=4))
    assert not np.allclose(a, sample_rng(6, 0).uniform(size=4))


def test_initial_state_range_and_cartan_axis():
    model = build_system("u2_paper")
    state = initial_state(model, sample_rng(0), 10.0)
    assert state.shape == (12,)
    assert np.all(np.abs(state) <= 10.0)
    cartan = initial_state(model, sample_rng(0), 10.0, cartan_axis=3)
    for var in range(3):
        assert cartan[4 * var + 1] == cartan[4 * var + 2] == 0.0
        assert cartan[4 * var + 3] != 0.0
    with pytest.raises(ParameterError):
        initial_state(model, sample_rng(0), 10.0, cartan_axis=0)


def test_classical_exponent_below_onset():
    lam = largest_lyapunov("classical", LorenzParams(r=0.5), FAST, renorm_interval=100, seed=0)
    assert lam == pytest.approx(LAMBDA_R_HALF, abs=0.02)


def test_su2_exponent_below_onset():
    # su(2) has d = 0: three copies of the linear system
    lam = largest_lyapunov("su2", LorenzParams(r=0.5), FAST, seed=3)
    assert lam == pytest.approx(LAMBDA_R_HALF, abs=0.02)


def test_su2_diverges_above_one():
    job = LyapunovJob(system="su2", r=28.0, sigma=10.0, b=8 / 3, spec=FAST, seed=0)
    result = run_lyapunov_job(job)
    assert not result.ok
    assert "exceeded" in result.error or "non-finite" in result.error


def test_benettin_agrees_with_two_trajectory_method():
    p = LorenzParams(r=0.5)
    benettin = largest_lyapunov("classical", p, FAST, seed=11)
    oracle = two_trajectory_lyapunov("classical", p, FAST, seed=11)
    assert benettin == pytest.approx(oracle, abs=0.01)


@pytest.mark.slow
def test_benettin_agrees_with_two_trajectory_method_when_chaotic():
    spec = IntegrationSpec.from_horizon(0.01, 400.0)
    benettin = largest_lyapunov("classical", LorenzParams(), spec, seed=2)
    oracle = two_trajectory_lyapunov("classical", LorenzParams(), spec, seed=2)
    assert benettin == pytest.approx(oracle, abs=0.15)


@pytest.mark.slow
def test_classical_exponent_at_r28_over_eight_seeds():
    p, spec, seeds = LorenzParams(), IntegrationSpec.from_horizon(0.01, 2000.0), list(range(8))
    estimate = lyapunov_estimate("classical", p, spec, seeds, workers=None)
    oracle = np.mean([two_trajectory_lyapunov("classical", p, spec, seed=seed) for seed in seeds])
    assert estimate.n_samples == 8
    assert 0.85 <= estimate.lambda_max <= 0.96
    assert estimate.lambda_max == pytest.approx(oracle, abs=0.03)


@pytest.mark.slow
def test_classical_exponent_at_stable_fixed_points():
    lam = largest_lyapunov("classical", LorenzParams(r=15.0), IntegrationSpec.from_horizon(0.01, 300.0), seed=1)
    assert lam < 0.0


def test_lyapunov_is_deterministic():
    p = LorenzParams(r=0.5)
    assert largest_lyapunov("u2_paper", p, FAST, seed=4) == largest_lyapunov("u2_paper", p, FAST, seed=4)


def test_explicit_initial_state():
    p = LorenzParams(r=0.5)
    lam = largest_lyapunov("classical", p, FAST, initial=[1.0, 2.0, 3.0])
    assert lam == pytest.approx(LAMBDA_R_HALF, abs=0.02)
    with pytest.raises(ParameterError):
        largest_lyapunov("classical", p, FAST, initial=[1.0, 2.0])


def test_horizon_shorter_than_renorm_interval():
    with pytest.raises(ParameterError):
        largest_lyapunov("classical", LorenzParams(), IntegrationSpec(dt=0.01, n_steps=50), renorm_interval=100)
    with pytest.raises(ParameterError):
        largest_lyapunov("classical", LorenzParams(), FAST, renorm_interval=0)


def test_block_exponents_below_onset():
    lam_u1, lam_su2 = block_lyapunov("u2_paper", LorenzParams(r=0.5), FAST, seed=0)
    assert lam_u1 == pytest.approx(LAMBDA_R_HALF, abs=0.02)
    assert lam_su2 == pytest.approx(LAMBDA_R_HALF, abs=0.02)


BLOCK_SPEC = IntegrationSpec.from_horizon(0.01, 300.0)


def block_runs(r, seeds=range(4)):
    results = [run_lyapunov_job(LyapunovJob(system="u2_paper", r=r, sigma=10.0, b=8 / 3, spec=BLOCK_SPEC, seed=seed))
               for seed in seeds]
    assert all(res.ok for res in results)
    return results


@pytest.mark.slow
def test_block_exponents_split_below_onset():
    # members settle on fixed points; a neutral rotation of the su(2) part leaves u(1) untouched
    results = block_runs(15.0)
    gaps = [res.lambda_su2 - res.lambda_u1 for res in results]
    assert all(gap > -0.05 for gap in gaps)
    assert sum(gap > 0.05 for gap in gaps) >= 2
    estimate = aggregate(results)
    assert estimate.block_gap > 2.0 * estimate.block_gap_stderr
    lambdas = sorted(res.lambda_max for res in results)
    assert lambdas[0] < -0.25 and lambdas[-1] > -0.05


@pytest.mark.slow
def test_block_exponents_agree_when_chaotic():
    results = block_runs(28.0)
    for res in results:
        assert res.lambda_max > 0.5
        assert res.lambda_u1 == pytest.approx(res.lambda_su2, abs=0.08)
    estimate = aggregate(results)
    (u1, su2), (u1_err, su2_err) = estimate.block_lambda, estimate.block_stderr
    assert abs(u1 - su2) <= 2.0 * math.hypot(u1_err, su2_err)


def test_aggregate_pairs_block_exponents():
    pairs = [(-0.30, 0.0), (-0.35, -0.35), (-0.10, 0.0)]
    results = [JobResult(r=15.0, seed=s, lambda_max=su2, lambda_u1=u1, lambda_su2=su2)
               for s, (u1, su2) in enumerate(pairs)]
    estimate = aggregate(results)
    gaps = np.array([su2 - u1 for u1, su2 in pairs])
    assert estimate.block_gap == pytest.approx(gaps.mean())
    assert estimate.block_gap_stderr == pytest.approx(gaps.std(ddof=1) / math.sqrt(3))
    assert estimate.block_lambda == (pytest.approx(-0.25), pytest.approx(-0.35 / 3))
    assert aggregate([JobResult(r=15.0, seed=0, lambda_max=0.1)]).block_gap is None


def test_block_exponents_need_both_factors():
    with pytest.raises(ParameterError):
        block_lyapunov("su2", LorenzParams(r=0.5), FAST)
    with pytest.raises(ParameterError):
        block_lyapunov("classical", LorenzParams(r=0.5), FAST)


def test_u1_trajectory_is_rescaled_classical():
    p = LorenzParams()
    spec = IntegrationSpec(dt=0.01, n_steps=200)
    s0 = np.array([1.0, 2.0, 20.0])
    classical = integrate(build_system("classical").vector_field(p), s0, spec)
    u1 = integrate(build_system("u1").vector_field(p), 2.0 * s0, spec)
    assert_allclose(u1.states, 2.0 * classical.states, rtol=1e-8, atol=1e-8)


@pytest.mark.slow
def test_u1_exponent_equals_classical():
    p = LorenzParams()
    spec = IntegrationSpec.from_horizon(0.01, 400.0)
    s0 = np.array([1.0, 2.0, 20.0])
    classical = largest_lyapunov("classical", p, spec, initial=s0)
    u1 = largest_lyapunov("u1", p, spec, initial=2.0 * s0)
    assert u1 == pytest.approx(classical, abs=0.15)


def test_aggregate_is_seed_ordered():
    results = [JobResult(r=1.0, seed=s, lambda_max=float(s)) for s in (3, 1, 2)]
    estimate = aggregate(results)
    assert estimate.lambda_max == pytest.approx(2.0)
    assert estimate.stderr == pytest.approx(1.0 / math.sqrt(3))
    assert estimate.n_samples == 3
    assert aggregate(reversed(results)) == estimate


def test_aggregate_counts_failures():
    results = [JobResult(r=1.0, seed=0, lambda_max=0.5), JobResult(r=1.0, seed=1, error="diverged")]
    estimate = aggregate(results)
    assert estimate.n_samples == 1 and estimate.n_failed == 1
    assert estimate.stderr == 0.0
    empty = aggregate([JobResult(r=1.0, seed=1, error="diverged")])
    assert empty.n_samples == 0 and math.isnan(empty.lambda_max)


def test_lyapunov_estimate_ensemble():
    estimate = lyapunov_estimate("u2_paper", LorenzParams(r=0.5), FAST, seeds=[0, 1, 2])
    assert estimate.n_samples == 3
    assert estimate.lambda_max == pytest.approx(LAMBDA_R_HALF, abs=0.02)
    assert estimate.block_lambda is not None
    assert estimate.stderr >= 0.0


def test_sweep_does_not_depend_on_worker_count():
    spec = IntegrationSpec.from_horizon(0.01, 20.0)
    serial = sweep_r([0.5, 1.5], 10.0, 8 / 3, "classical", spec, [0, 1], workers=1)
    pooled = sweep_r([0.5, 1.5], 10.0, 8 / 3, "classical", spec, [0, 1], workers=2)
    assert_array_equal(serial.means, pooled.means)
    assert_array_equal(serial.stderrs, pooled.stderrs)
    assert serial.failures == pooled.failures == ()


def test_sweep_rejects_bad_input():
    with pytest.raises(ParameterError):
        sweep_r([], 10.0, 8 / 3, "classical", FAST, [0])
    with pytest.raises(ParameterError):
        sweep_r([1.0], 10.0, 8 / 3, "nonsense", FAST, [0])


def test_detect_rcrit_interpolates():
    d = diagram([20.0, 21.0, 22.0, 23.0], [-0.1, -0.05, 0.05, 0.5])
    assert detect_rcrit(d) == pytest.approx(21.5)


def test_detect_rcrit_skips_noise():
    # 0.005 exceeds the threshold but not the noise floor
    d = diagram([20.0, 21.0, 22.0, 23.0], [-0.1, 0.005, -0.02, 0.4])
    assert detect_rcrit(d) == pytest.approx(22.0 + 0.02 / 0.42)


def test_detect_rcrit_skips_failed_points():
    d = diagram([20.0, 21.0, 22.0, 23.0], [-0.2, float("nan"), -0.1, 0.3])
    assert detect_rcrit(d) == pytest.approx(22.25)


def test_detect_rcrit_without_transition():
    with pytest.raises(TransitionNotFound) as info:
        detect_rcrit(diagram([20.0, 21.0], [-0.3, -0.2]))
    assert info.value.reason == "no transition"


def test_detect_rcrit_transition_below_range():
    with pytest.raises(TransitionNotFound) as info:
        detect_rcrit(diagram([25.0, 26.0], [0.8, 0.9]))
    assert info.value.reason == "transition below range"


@pytest.mark.slow
def test_chaos_onset_of_classical_and_u2_sweeps():
    grid = [20.0, 22.0, 23.5, 24.5, 25.5, 27.0]
    spec = IntegrationSpec.from_horizon(0.01, 200.0)
    classical = detect_rcrit(sweep_r(grid, 10.0, 8 / 3, "classical", spec, [0, 1, 2]))
    u2 = detect_rcrit(sweep_r(grid, 10.0, 8 / 3, "u2_paper", spec, [0, 1, 2]))
    assert 23.5 <= classical <= 25.5
    # two Lorenz copies in the Cartan frame stay on transient chaos longer
    assert 20.0 < u2 < classical


def test_phase_diagram_validation():
    with pytest.raises(ParameterError):
        diagram([21.0, 20.0], [0.0, 0.0])
    with pytest.raises(ParameterError):
        PhaseDiagram(r_values=[1.0], estimates=(), sigma=10.0, b=1.0)


def single_point(x, y, z):
    state = np.concatenate([x, y, z]).astype(float)
    return Trajectory(times=np.array([0.0]), states=state[None])


def test_observables_of_identity_state():
    series = observables(single_point([1.0, 0, 0, 0], [2.0, 0, 0, 0], [0, 0, 0, 0]),
                         named_basis("u2"), named_tensors("u2"))
    assert series.tr_x[0] == pytest.approx(1.0)
    assert series.tr_y[0] == pytest.approx(2.0)
    assert series.comm_xy[0] == pytest.approx(0.0)
    assert series.casimir_x[0] == pytest.approx(0.0)


def test_observables_of_pauli_pair():
    series = observables(single_point([0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]),
                         named_basis("u2"), named_tensors("u2"))
    assert series.comm_xy[0] == pytest.approx(math.sqrt(0.5))
    assert series.comm_yz[0] == pytest.approx(math.sqrt(0.5))
    assert series.comm_xz[0] == pytest.approx(math.sqrt(0.5))
    assert series.casimir_x[0] == pytest.approx(1.0)
    assert series.tr_x[0] == pytest.approx(0.0)


def test_observable_series_names():
    assert ObservableSeries.series_names() == (
        "tr_x", "tr_y", "tr_z", "comm_xy", "comm_yz", "comm_xz", "casimir_x", "casimir_y", "casimir_z",
    )


def test_single_member_ensemble_has_zero_spread():
    spec = EnsembleSpec(n_samples=1, r=15.0, system="u2_paper")
    result = ensemble_average(spec, LorenzParams(), IntegrationSpec(dt=0.01, n_steps=50))
    assert result.n_samples == 1
    for name in ObservableSeries.series_names():
        assert_array_equal(getattr(result.spread, name), 0.0)
    assert result.mean.comm_xy.shape == (51,)


def test_ensemble_matches_individual_members():
    spec = EnsembleSpec(n_samples=3, r=15.0, system="u2_derived", seed=9)
    ispec = IntegrationSpec(dt=0.01, n_steps=30)
    result = ensemble_average(spec, LorenzParams(), ispec)
    model = build_system("u2_derived")
    traces = []
    for k in range(3):
        s0 = initial_state(model, sample_rng(9, k), spec.init_scale)
        traj = integrate(model.vector_field(LorenzParams(r=15.0)), s0, ispec)
        traces.append(observables(traj, model.basis, model.tensors).tr_x)
    assert_allclose(result.mean.tr_x, np.mean(traces, axis=0), rtol=1e-10, atol=1e-10)
    assert_allclose(result.spread.tr_x, np.std(traces, axis=0), rtol=1e-8, atol=1e-10)


def test_cartan_ensemble_has_no_off_axis_commutators():
    # with one traceless direction every commutator vanishes identically
    spec = EnsembleSpec(n_samples=4, r=15.0, system="u2_paper", cartan_axis=3)
    result = ensemble_average(spec, LorenzParams(), IntegrationSpec(dt=0.01, n_steps=200))
    assert_array_equal(result.mean.comm_xy, 0.0)
    assert_array_equal(result.mean.comm_yz, 0.0)
    assert np.all(result.mean.casimir_x > 0.0)


def test_ensemble_reports_diverged_member():
    spec = EnsembleSpec(n_samples=2, r=28.0, system="su2", seed=5)
    with pytest.raises(EnsembleError) as info:
        ensemble_average(spec, LorenzParams(), IntegrationSpec(dt=0.01, n_steps=1000))
    assert info.value.seed == 5
    assert info.value.sample in (0, 1)


def test_ensemble_rejects_classical():
    with pytest.raises(ParameterError):
        ensemble_average(EnsembleSpec(n_samples=1, system="classical"), LorenzParams(), FAST)


def test_casimir_statistics():
    times = np.arange(10.0)
    values = np.concatenate([np.full(5, 100.0), np.full(5, 2.0)])
    zeros = np.zeros(10)
    series = ObservableSeries(times, zeros, zeros, zeros, zeros, zeros, zeros, values, values, values)
    stats = casimir_statistics(series, burn_in=0.5)
    assert stats["x"] == (pytest.approx(2.0), pytest.approx(0.0))
    assert set(stats) == {"x", "y", "z"}


@pytest.mark.slow
def test_commutators_collapse_onto_a_nonzero_casimir():
    spec = EnsembleSpec(n_samples=32, r=15.0, system="u2_paper")
    result = ensemble_average(spec, LorenzParams(), IntegrationSpec.from_horizon(0.01, 100.0, record_every=10))
    mean = result.mean
    curves = np.array([mean.comm_xy, mean.comm_yz, mean.comm_xz])
    initial = curves[:, 0]
    late = curves[:, -11:]
    assert np.all(late < 0.1 * initial[:, None])
    assert np.ptp(late, axis=0).max() <= 0.1 * initial.max()
    assert mean.casimir_x[-1] - result.spread.casimir_x[-1] > 0.0
