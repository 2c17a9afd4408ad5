#!/usr/bin/env python3
"""
Chaos and quantum-fluctuation diagnostics

Benettin estimates of the largest Lyapunov exponent (overall and per group
factor), a two-trajectory oracle, ensemble statistics of traces, commutator
norms and Casimirs, sweeps over r and location of the chaos transition.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .algebra import AlgebraBasis, StructureTensors, commutator_norm
from .dynamics import LorenzParams
from .errors import (
    EnsembleError,
    IntegrationError,
    LyapunovError,
    MatrixLorenzError,
    ParameterError,
    TransitionNotFound,
)
from .integrator import DIVERGENCE_LIMIT, IntegrationSpec, Trajectory, integrate, rk8_step
from .systems import SYSTEMS, SystemModel, build_system

logger = logging.getLogger("matrix-lorenz-analysis")

DEFAULT_RENORM_INTERVAL = 100
DEFAULT_BURN_IN = 0.1
DEFAULT_INIT_SCALE = 10.0
TANGENT_MIN = 1e-12
TANGENT_MAX = 1e12
NOISE_FLOOR = 0.01

BLOCK_DEFINITION = (
    "growth rate of the u(1) (resp. su(2)) slot projection of a tangent vector "
    "initialized on those slots and evolved under the full Jacobian"
)

SystemLike = Union[str, SystemModel]


def _resolve(system: SystemLike, basis_path: Optional[str] = None) -> SystemModel:
    return system if isinstance(system, SystemModel) else build_system(system, basis_path)


def sample_rng(seed: int, sample: int = 0) -> np.random.Generator:
    """Counter-based stream for ensemble member `sample`, independent of execution order"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(sample,))))


def initial_state(system: SystemModel, rng: np.random.Generator, init_scale: float = DEFAULT_INIT_SCALE,
                  cartan_axis: Optional[int] = None) -> np.ndarray:
    """Uniform coefficients in [-init_scale, init_scale]; optionally keep a single traceless slot"""
    state = rng.uniform(-init_scale, init_scale, system.dim)
    if cartan_axis is not None:
        if system.basis is None or cartan_axis not in system.basis.traceless_slots:
            raise ParameterError(f"cartan_axis {cartan_axis} is not a traceless slot of '{system.name}'")
        off_axis = np.zeros(system.m, dtype=bool)
        off_axis[system.basis.traceless_slots] = True
        off_axis[cartan_axis] = False
        state[np.tile(off_axis, 3)] = 0.0
    return state


# Lyapunov exponents

def _benettin(system: SystemModel, p: LorenzParams, spec: IntegrationSpec, state0: np.ndarray,
              tangents0: np.ndarray, renorm_interval: int, burn_in: float,
              masks: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Growth rate of each tangent row, renormalized to unit norm every renorm_interval steps.

    With masks, row k reports the growth rate of its projection onto the slots
    selected by masks[k] instead of its full norm.
    """
    if renorm_interval < 1:
        raise ParameterError(f"renorm_interval must be at least 1, got {renorm_interval}")
    n_blocks = spec.n_steps // renorm_interval
    burn_blocks = int(round(burn_in * n_blocks))
    if n_blocks - burn_blocks < 1:
        raise ParameterError(
            f"{spec.n_steps} steps leave no renormalization interval after burn-in; "
            f"increase the horizon"
        )

    rhs = system.vector_field(p)
    jvp = system.tangent_map(p)

    def augmented(t, y):
        return np.concatenate([rhs(t, y[0])[None], jvp(y[0], y[1:])])

    def projected_log_norms(tangents):
        # rows measured on every slot keep the plain Benettin rate
        norms = np.linalg.norm(tangents * masks, axis=1)
        partial = ~masks.all(axis=1)
        if np.any(norms[partial] == 0.0):
            raise LyapunovError("a tangent has no component on its measured slots",
                                time=spec.time_at(step), step=step)
        return np.where(partial, np.log(np.where(partial, norms, 1.0)), 0.0)

    y = np.vstack([state0, tangents0 / np.linalg.norm(tangents0, axis=1)[:, None]])
    log_growth = np.zeros(len(tangents0))
    step = 0
    if masks is not None and burn_blocks == 0:
        log_growth -= projected_log_norms(y[1:])
    for block in range(n_blocks):
        for _ in range(renorm_interval):
            t = spec.time_at(step)
            try:
                y = rk8_step(augmented, y, t, spec.dt)
            except IntegrationError as e:
                raise IntegrationError(f"{e} (step {step})", time=t, step=step)
            if np.max(np.abs(y[0])) > DIVERGENCE_LIMIT:
                raise IntegrationError(
                    f"state exceeded {DIVERGENCE_LIMIT:g} at t={spec.time_at(step + 1):.6g}",
                    time=spec.time_at(step + 1), step=step,
                )
            step += 1

        norms = np.linalg.norm(y[1:], axis=1)
        if np.any(norms < TANGENT_MIN) or np.any(norms > TANGENT_MAX):
            raise LyapunovError(
                f"tangent norm {norms.min():.3e}..{norms.max():.3e} left "
                f"[{TANGENT_MIN:g}, {TANGENT_MAX:g}]; reduce renorm_interval",
                time=spec.time_at(step), step=step,
            )
        if block >= burn_blocks:
            log_growth += np.log(norms)
        y[1:] /= norms[:, None]
        if masks is not None and block == burn_blocks - 1:
            log_growth -= projected_log_norms(y[1:])

    if masks is not None:
        log_growth += projected_log_norms(y[1:])
    return log_growth / ((n_blocks - burn_blocks) * renorm_interval * spec.dt)


def _start(system: SystemModel, seed: int, init_scale: float,
           initial: Optional[np.ndarray]) -> Tuple[np.ndarray, np.random.Generator]:
    rng = sample_rng(seed)
    state = initial_state(system, rng, init_scale)
    if initial is not None:
        state = np.array(initial, dtype=float)
        if state.shape != (system.dim,):
            raise ParameterError(f"initial state must have length {system.dim}, got {state.shape}")
    return state, rng


def largest_lyapunov(system: SystemLike, p: LorenzParams, spec: IntegrationSpec,
                     renorm_interval: int = DEFAULT_RENORM_INTERVAL, seed: int = 0, *,
                     init_scale: float = DEFAULT_INIT_SCALE, burn_in: float = DEFAULT_BURN_IN,
                     initial: Optional[np.ndarray] = None) -> float:
    """Benettin estimate with the analytic tangent map and a random initial tangent"""
    model = _resolve(system)
    state, rng = _start(model, seed, init_scale, initial)
    tangent = rng.standard_normal(model.dim)
    return float(_benettin(model, p, spec, state, tangent[None], renorm_interval, burn_in)[0])


def _block_run(model: SystemModel, p: LorenzParams, spec: IntegrationSpec, renorm_interval: int,
               seed: int, init_scale: float, burn_in: float,
               initial: Optional[np.ndarray]) -> Tuple[float, float, float]:
    state, rng = _start(model, seed, init_scale, initial)
    generic = rng.standard_normal(model.dim)
    u1 = rng.standard_normal(model.dim) * model.sector_mask("u1")
    su2 = rng.standard_normal(model.dim) * model.sector_mask("su2")
    masks = np.vstack([np.ones(model.dim, dtype=bool), model.sector_mask("u1"), model.sector_mask("su2")])
    rates = _benettin(model, p, spec, state, np.vstack([generic, u1, su2]), renorm_interval, burn_in, masks)
    return float(rates[0]), float(rates[1]), float(rates[2])


def block_lyapunov(system: SystemLike, p: LorenzParams, spec: IntegrationSpec, seed: int = 0,
                   renorm_interval: int = DEFAULT_RENORM_INTERVAL, *,
                   init_scale: float = DEFAULT_INIT_SCALE, burn_in: float = DEFAULT_BURN_IN,
                   initial: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """(lambda_u1, lambda_su2) for a system with both group factors"""
    model = _resolve(system)
    if not model.has_blocks:
        raise ParameterError(f"system '{model.name}' does not have both u(1) and su(2) factors")
    _, lambda_u1, lambda_su2 = _block_run(model, p, spec, renorm_interval, seed, init_scale, burn_in, initial)
    return lambda_u1, lambda_su2


def two_trajectory_lyapunov(system: SystemLike, p: LorenzParams, spec: IntegrationSpec,
                            renorm_interval: int = DEFAULT_RENORM_INTERVAL, seed: int = 0, *,
                            init_scale: float = DEFAULT_INIT_SCALE, burn_in: float = DEFAULT_BURN_IN,
                            separation: float = 1e-8, initial: Optional[np.ndarray] = None) -> float:
    """Divergence of a nearby trajectory, rescaled back to `separation` every renorm_interval steps"""
    model = _resolve(system)
    state, rng = _start(model, seed, init_scale, initial)
    direction = rng.standard_normal(model.dim)
    direction /= np.linalg.norm(direction)

    n_blocks = spec.n_steps // renorm_interval
    burn_blocks = int(round(burn_in * n_blocks))
    if n_blocks - burn_blocks < 1:
        raise ParameterError("horizon too short for the requested burn-in")

    rhs = model.vector_field(p)
    pair = np.vstack([state, state + separation * direction])
    log_growth = 0.0
    step = 0
    for block in range(n_blocks):
        for _ in range(renorm_interval):
            pair = rk8_step(rhs, pair, spec.time_at(step), spec.dt)
            step += 1
        delta = pair[1] - pair[0]
        distance = np.linalg.norm(delta)
        if block >= burn_blocks:
            log_growth += math.log(distance / separation)
        pair[1] = pair[0] + delta * (separation / distance)

    return log_growth / ((n_blocks - burn_blocks) * renorm_interval * spec.dt)


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_max: float
    stderr: float
    n_samples: int
    block_lambda: Optional[Tuple[float, float]] = None
    block_stderr: Optional[Tuple[float, float]] = None
    block_gap: Optional[float] = None
    block_gap_stderr: Optional[float] = None
    n_failed: int = 0

    def __post_init__(self):
        if self.stderr < 0:
            raise ParameterError("stderr must be non-negative")

    @classmethod
    def empty(cls, n_failed: int) -> "LyapunovEstimate":
        return cls(lambda_max=math.nan, stderr=math.nan, n_samples=0, n_failed=n_failed)


def _summarize(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and standard error of the mean (0 for a single value)"""
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance / n)


@dataclass(frozen=True)
class LyapunovJob:
    """One (r, seed) cell; plain data so it pickles into worker processes"""

    system: str
    r: float
    sigma: float
    b: float
    spec: IntegrationSpec
    seed: int
    renorm_interval: int = DEFAULT_RENORM_INTERVAL
    init_scale: float = DEFAULT_INIT_SCALE
    burn_in: float = DEFAULT_BURN_IN
    basis_path: Optional[str] = None


@dataclass(frozen=True)
class JobResult:
    r: float
    seed: int
    lambda_max: float = math.nan
    lambda_u1: Optional[float] = None
    lambda_su2: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_lyapunov_job(job: LyapunovJob) -> JobResult:
    """Failures are reported in the result instead of raised"""
    try:
        model = build_system(job.system, job.basis_path)
        p = LorenzParams(sigma=job.sigma, r=job.r, b=job.b)
        if model.has_blocks:
            lam, u1, su2 = _block_run(model, p, job.spec, job.renorm_interval, job.seed,
                                      job.init_scale, job.burn_in, None)
            return JobResult(r=job.r, seed=job.seed, lambda_max=lam, lambda_u1=u1, lambda_su2=su2)
        lam = largest_lyapunov(model, p, job.spec, job.renorm_interval, job.seed,
                               init_scale=job.init_scale, burn_in=job.burn_in)
        return JobResult(r=job.r, seed=job.seed, lambda_max=lam)
    except MatrixLorenzError as e:
        return JobResult(r=job.r, seed=job.seed, error=str(e))


def aggregate(results: Iterable[JobResult]) -> LyapunovEstimate:
    """Seed-ordered aggregation, so the estimate does not depend on completion order"""
    results = sorted(results, key=lambda res: res.seed)
    ok = [res for res in results if res.ok]
    n_failed = len(results) - len(ok)
    if not ok:
        return LyapunovEstimate.empty(n_failed)

    mean, stderr = _summarize([res.lambda_max for res in ok])
    block_lambda = block_stderr = gap = gap_err = None
    if all(res.lambda_u1 is not None for res in ok):
        u1_mean, u1_err = _summarize([res.lambda_u1 for res in ok])
        su2_mean, su2_err = _summarize([res.lambda_su2 for res in ok])
        block_lambda, block_stderr = (u1_mean, su2_mean), (u1_err, su2_err)
        # paired per seed
        gap, gap_err = _summarize([res.lambda_su2 - res.lambda_u1 for res in ok])
    return LyapunovEstimate(lambda_max=mean, stderr=stderr, n_samples=len(ok),
                            block_lambda=block_lambda, block_stderr=block_stderr,
                            block_gap=gap, block_gap_stderr=gap_err, n_failed=n_failed)


def _run_jobs(jobs: List[LyapunovJob], workers: Optional[int], progress: bool) -> List[JobResult]:
    bar = tqdm(total=len(jobs), desc="lyapunov", unit="run", disable=not progress)
    try:
        if workers == 1 or len(jobs) == 1:
            results = []
            for job in jobs:
                results.append(run_lyapunov_job(job))
                bar.update()
            return results
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = []
            for result in executor.map(run_lyapunov_job, jobs):
                results.append(result)
                bar.update()
            return results
    finally:
        bar.close()


def lyapunov_estimate(system: str, p: LorenzParams, spec: IntegrationSpec, seeds: Sequence[int], *,
                      renorm_interval: int = DEFAULT_RENORM_INTERVAL, init_scale: float = DEFAULT_INIT_SCALE,
                      burn_in: float = DEFAULT_BURN_IN, basis_path: Optional[str] = None,
                      workers: Optional[int] = 1, progress: bool = False) -> LyapunovEstimate:
    """Ensemble of Benettin runs over seeds at one parameter point"""
    jobs = [LyapunovJob(system=system, r=p.r, sigma=p.sigma, b=p.b, spec=spec, seed=seed,
                        renorm_interval=renorm_interval, init_scale=init_scale, burn_in=burn_in,
                        basis_path=basis_path) for seed in seeds]
    results = _run_jobs(jobs, workers, progress)
    for res in results:
        if not res.ok:
            logger.warning(f"Lyapunov run failed at r={res.r:g}, seed={res.seed}: {res.error}")
    return aggregate(results)


@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    r_values: np.ndarray
    estimates: Tuple[LyapunovEstimate, ...]
    sigma: float
    b: float
    system: str = "classical"
    failures: Tuple[Tuple[float, int, str], ...] = ()

    def __post_init__(self):
        r_values = np.asarray(self.r_values, dtype=float)
        if len(r_values) != len(self.estimates):
            raise ParameterError("r_values and estimates must have equal length")
        if np.any(np.diff(r_values) <= 0):
            raise ParameterError("r_values must be strictly increasing")
        object.__setattr__(self, "r_values", r_values)

    @property
    def means(self) -> np.ndarray:
        return np.array([e.lambda_max for e in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([e.stderr for e in self.estimates])


def sweep_r(r_values: Sequence[float], sigma: float, b: float, system: str, spec: IntegrationSpec,
            seeds: Sequence[int], *, workers: Optional[int] = None,
            renorm_interval: int = DEFAULT_RENORM_INTERVAL, init_scale: float = DEFAULT_INIT_SCALE,
            burn_in: float = DEFAULT_BURN_IN, basis_path: Optional[str] = None,
            progress: bool = False) -> PhaseDiagram:
    """
    Lyapunov ensemble at every r. Cells (r, seed) run independently, in worker
    processes unless workers == 1; the diagram is identical for any worker count.
    """
    r_values = [float(r) for r in r_values]
    if not r_values:
        raise ParameterError("the r grid is empty")
    if system not in SYSTEMS:
        raise ParameterError(f"Unknown system '{system}'")
    build_system(system, basis_path)

    jobs = [LyapunovJob(system=system, r=r, sigma=sigma, b=b, spec=spec, seed=seed,
                        renorm_interval=renorm_interval, init_scale=init_scale, burn_in=burn_in,
                        basis_path=basis_path)
            for r in r_values for seed in seeds]
    logger.info(f"Sweeping {len(r_values)} values of r with {len(seeds)} seeds each ({len(jobs)} runs)")
    results = _run_jobs(jobs, workers, progress)

    by_r: Dict[float, List[JobResult]] = {r: [] for r in r_values}
    failures = []
    for res in results:
        by_r[res.r].append(res)
        if not res.ok:
            failures.append((res.r, res.seed, res.error))
            logger.warning(f"Sweep cell r={res.r:g}, seed={res.seed} failed: {res.error}")

    estimates = tuple(aggregate(by_r[r]) for r in r_values)
    return PhaseDiagram(r_values=np.array(r_values), estimates=estimates, sigma=sigma, b=b,
                        system=system, failures=tuple(failures))


def detect_rcrit(diagram: PhaseDiagram, threshold: float = 0.0, noise_floor: float = NOISE_FLOOR) -> float:
    """
    First r whose mean exponent exceeds threshold with mean - stderr above the
    noise floor, interpolated linearly against the last point at or below threshold.
    """
    means, errors, rs = diagram.means, diagram.stderrs, diagram.r_values
    valid = np.flatnonzero(np.isfinite(means))

    onset = next((i for i in valid if means[i] > threshold and means[i] - errors[i] > noise_floor), None)
    if onset is None:
        raise TransitionNotFound("no transition")

    below = [i for i in valid if i < onset and means[i] <= threshold]
    if not below:
        raise TransitionNotFound("transition below range")
    lo = below[-1]
    hi = next(i for i in valid if i > lo)
    return float(rs[lo] + (threshold - means[lo]) * (rs[hi] - rs[lo]) / (means[hi] - means[lo]))


# Observables and ensembles

@dataclass(frozen=True, eq=False)
class ObservableSeries:
    """Per-sample observables; arrays share the leading time axis"""

    times: np.ndarray
    tr_x: np.ndarray
    tr_y: np.ndarray
    tr_z: np.ndarray
    comm_xy: np.ndarray
    comm_yz: np.ndarray
    comm_xz: np.ndarray
    casimir_x: np.ndarray
    casimir_y: np.ndarray
    casimir_z: np.ndarray

    @classmethod
    def series_names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls) if f.name != "times")

    def slice(self, start: int) -> "ObservableSeries":
        return ObservableSeries(**{f.name: getattr(self, f.name)[start:] for f in fields(self)})


def observables(traj: Trajectory, basis: AlgebraBasis, tensors: StructureTensors) -> ObservableSeries:
    """Traces, pairwise commutator norms and traceless-part Casimirs along a trajectory"""
    m = basis.m
    states = np.asarray(traj.states)
    if states.shape[-1] != 3 * m:
        raise ParameterError(f"states of length {states.shape[-1]} do not match {m} generators")
    x, y, z = states[..., :m], states[..., m:2 * m], states[..., 2 * m:]
    traceless = basis.traceless_slots

    def casimir(c):
        return np.sum(c[..., traceless] ** 2, axis=-1)

    f, kappa = tensors.f, tensors.kappa
    return ObservableSeries(
        times=np.asarray(traj.times),
        tr_x=x @ basis.traces,
        tr_y=y @ basis.traces,
        tr_z=z @ basis.traces,
        comm_xy=commutator_norm(f, kappa, x, y),
        comm_yz=commutator_norm(f, kappa, y, z),
        comm_xz=commutator_norm(f, kappa, x, z),
        casimir_x=casimir(x),
        casimir_y=casimir(y),
        casimir_z=casimir(z),
    )


@dataclass(frozen=True)
class EnsembleSpec:
    n_samples: int = 32
    init_scale: float = DEFAULT_INIT_SCALE
    seed: int = 0
    r: float = 15.0
    system: str = "u2_paper"
    cartan_axis: Optional[int] = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ParameterError(f"n_samples must be at least 1, got {self.n_samples}")
        if not self.init_scale > 0:
            raise ParameterError(f"init_scale must be positive, got {self.init_scale}")
        if self.system not in SYSTEMS:
            raise ParameterError(f"Unknown system '{self.system}'")


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    mean: ObservableSeries
    spread: ObservableSeries
    n_samples: int


def ensemble_average(spec: EnsembleSpec, p: LorenzParams, ispec: IntegrationSpec, *,
                     basis_path: Optional[str] = None, burn_in: float = 0.0) -> EnsembleResult:
    """
    Integrate n_samples members from i.i.d. uniform initial coefficients as one
    batch and return the pointwise mean and 1-sigma spread of every observable.
    The initial transient is kept unless burn_in > 0.
    """
    model = build_system(spec.system, basis_path)
    if not model.is_matrix:
        raise ParameterError("ensemble observables need a matrix system")
    p = replace(p, r=spec.r)

    states0 = np.stack([
        initial_state(model, sample_rng(spec.seed, k), spec.init_scale, spec.cartan_axis)
        for k in range(spec.n_samples)
    ])
    logger.info(f"Integrating ensemble of {spec.n_samples} '{spec.system}' members at r={spec.r:g}")
    try:
        traj = integrate(model.vector_field(p), states0, ispec)
    except IntegrationError as e:
        sample = e.members[0] if e.members else -1
        raise EnsembleError(
            f"ensemble member {sample} (seed {spec.seed}) diverged: {e}", sample=sample, seed=spec.seed,
        )

    series = observables(traj, model.basis, model.tensors)
    start = int(round(burn_in * len(traj)))
    if start:
        series = series.slice(start)

    mean = {"times": series.times}
    spread = {"times": series.times}
    for name in ObservableSeries.series_names():
        values = getattr(series, name)
        mean[name] = values.mean(axis=1)
        spread[name] = values.std(axis=1)
    return EnsembleResult(mean=ObservableSeries(**mean), spread=ObservableSeries(**spread),
                          n_samples=spec.n_samples)


def casimir_statistics(series: ObservableSeries, burn_in: float = DEFAULT_BURN_IN) -> Dict[str, Tuple[float, float]]:
    """Time-average and variance of each Casimir after burn-in"""
    start = int(round(burn_in * len(series.times)))
    stats = {}
    for axis in "xyz":
        values = np.asarray(getattr(series, f"casimir_{axis}"))[start:]
        stats[axis] = (float(np.mean(values)), float(np.var(values)))
    return stats
