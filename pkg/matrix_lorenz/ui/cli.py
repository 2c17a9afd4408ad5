#!/usr/bin/env python3
"""
Command-line front end

    matrix-lorenz simulate | lyapunov | sweep | commutators | map-llg | serve

Settings come from the bundled defaults, then --config, then explicit flags.
Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..core.analysis import (
    BLOCK_DEFINITION,
    EnsembleSpec,
    ObservableSeries,
    detect_rcrit,
    ensemble_average,
    initial_state,
    lyapunov_estimate,
    observables,
    sample_rng,
    sweep_r,
)
from ..core.dynamics import (
    LLGParams,
    LorenzParams,
    MaterialParams,
    llg_rhs,
    llg_to_lorenz,
    lorenz_rhs,
    map_state_llg_to_lorenz,
    map_state_lorenz_to_llg,
    material_to_reduced,
)
from ..core.errors import BasisError, ConfigError, MatrixLorenzError, ParameterError, TransitionNotFound
from ..core.integrator import IntegrationSpec, integrate
from ..core.systems import SYSTEMS, build_system
from ..utils.config_manager import LOG_LEVELS, SIMULATE_SYSTEMS, ConfigManager, RunConfig
from ..utils.export import format_number, render_json, render_table, write_text

logger = logging.getLogger('matrix-lorenz-cli')

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
MAP_LLG_HORIZON = 5.0

# flag destination -> dot-notation configuration key
FLAG_KEYS = {
    'system': 'system',
    'basis': 'basis_path',
    'sigma': 'params.sigma',
    'r': 'params.r',
    'b': 'params.b',
    'dt': 'integration.dt',
    'horizon': 'integration.horizon',
    'record_every': 'integration.record_every',
    'initial_state': 'integration.initial_state',
    'renorm_interval': 'lyapunov.renorm_interval',
    'burn_in': 'lyapunov.burn_in',
    'samples': 'ensemble.n_samples',
    'init_scale': 'ensemble.init_scale',
    'seed': 'ensemble.seed',
    'cartan_axis': 'ensemble.cartan_axis',
    'r_min': 'sweep.r_min',
    'r_max': 'sweep.r_max',
    'r_step': 'sweep.r_step',
    'threads': 'runtime.threads',
    'log_level': 'runtime.log_level',
    'out': 'output.path',
    'format': 'output.format',
}

OBSERVABLE_COLUMNS = (
    ('tr_x', 'tr_x'), ('tr_y', 'tr_y'), ('tr_z', 'tr_z'),
    ('comm_xy', 'comm_xy'), ('comm_yz', 'comm_yz'), ('comm_xz', 'comm_xz'),
    ('cas_x', 'casimir_x'), ('cas_y', 'casimir_y'), ('cas_z', 'casimir_z'),
)
ENSEMBLE_COLUMNS = OBSERVABLE_COLUMNS[3:]

# lyapunov and sweep read their step and horizon from the lyapunov section
LYAPUNOV_COMMANDS = ('lyapunov', 'sweep')
LYAPUNOV_KEYS = {'dt': 'lyapunov.dt', 'horizon': 'lyapunov.horizon'}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON configuration document')
    common.add_argument('--system', choices=SIMULATE_SYSTEMS)
    common.add_argument('--basis', help='custom basis JSON file (system custom_basis)')
    common.add_argument('--sigma', type=float)
    common.add_argument('--r', type=float)
    common.add_argument('--b', type=float)
    common.add_argument('--dt', type=float)
    common.add_argument('--horizon', type=float)
    common.add_argument('--record-every', type=int)
    common.add_argument('--initial-state', type=float, nargs='+', metavar='C')
    common.add_argument('--renorm-interval', type=int)
    common.add_argument('--burn-in', type=float)
    common.add_argument('--samples', type=int)
    common.add_argument('--init-scale', type=float)
    common.add_argument('--seed', type=int)
    common.add_argument('--cartan-axis', type=int)
    common.add_argument('--r-min', type=float)
    common.add_argument('--r-max', type=float)
    common.add_argument('--r-step', type=float)
    common.add_argument('--threads', type=int)
    common.add_argument('--out')
    common.add_argument('--format', choices=('csv', 'json'))
    common.add_argument('--log-level', choices=LOG_LEVELS)
    common.add_argument('--no-progress', action='store_true')

    parser = argparse.ArgumentParser(
        prog='matrix-lorenz',
        description='Classical, spin (LLG) and Lie-algebra-valued Lorenz systems',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('simulate', parents=[common], help='integrate one trajectory and export observables')
    commands.add_parser('lyapunov', parents=[common], help='largest (and per-factor) Lyapunov exponent')
    commands.add_parser('sweep', parents=[common], help='Lyapunov phase diagram over r')
    commands.add_parser('commutators', parents=[common], help='ensemble-averaged commutator norms and Casimirs')
    commands.add_parser('map-llg', parents=[common], help='LLG parameters of a Lorenz system, with a round-trip check')
    commands.add_parser('serve', parents=[common], help='run the MCP tool server on stdio')
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    manager = ConfigManager()
    manager.load_config(args.config)
    overrides = LYAPUNOV_KEYS if args.command in LYAPUNOV_COMMANDS else {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            manager.set(overrides.get(dest, key), value)
    if getattr(args, 'no_progress', False):
        manager.set('runtime.progress', False)
    return RunConfig.from_manager(manager)


def _params(config: RunConfig) -> LorenzParams:
    return LorenzParams(sigma=config.sigma, r=config.r, b=config.b)


def _spec(config: RunConfig) -> IntegrationSpec:
    return IntegrationSpec.from_horizon(config.dt, config.horizon, config.record_every, config.t0)


def _lyapunov_spec(config: RunConfig) -> IntegrationSpec:
    return IntegrationSpec.from_horizon(config.lyapunov_dt, config.lyapunov_horizon)


def _emit(config: RunConfig, text: str):
    if config.out:
        write_text(config.out, text)
    else:
        sys.stdout.write(text)


def _start_state(config: RunConfig, dim: int) -> np.ndarray:
    if config.initial_state is not None:
        if len(config.initial_state) != dim:
            raise ConfigError(f"initial_state needs {dim} values, got {len(config.initial_state)}")
        return np.array(config.initial_state)
    return sample_rng(config.seed).uniform(-config.init_scale, config.init_scale, dim)


def _rows(times: np.ndarray, columns: Sequence[np.ndarray]) -> List[List[float]]:
    return np.column_stack([times] + list(columns)).tolist()


def llg_params(config: RunConfig) -> LLGParams:
    """LLG parameters from the Lorenz map, from material constants, or given explicitly"""
    llg = config.llg
    if llg.get('from_lorenz', True):
        return llg_to_lorenz(_params(config))
    eta, beta = llg.get('eta'), llg.get('beta')
    material = llg.get('material')
    if material:
        eta, beta = material_to_reduced(MaterialParams(
            K=tuple(material['K']), B=tuple(material['B']),
            mu0=float(material['mu0']), Ms=float(material['Ms']),
        ))
    tau = [float('inf') if t is None else t for t in llg.get('tau')]
    return LLGParams(eta=eta, axes=llg.get('axes'), beta=beta, tau=tau, torque_d=float(llg.get('torque_d', 0.0)))


def cmd_simulate(config: RunConfig) -> int:
    p = _params(config)
    spec = _spec(config)

    if config.system == 'classical':
        traj = integrate(lambda t, s: lorenz_rhs(s, p), _start_state(config, 3), spec)
        header = ['t', 'x', 'y', 'z']
        rows = _rows(traj.times, traj.states.T)
    elif config.system == 'llg':
        llg = llg_params(config)
        if config.initial_state is not None:
            M0 = _start_state(config, 3)
        else:
            M0 = map_state_lorenz_to_llg(_start_state(config, 3), p)
        traj = integrate(lambda t, s: llg_rhs(s, llg), M0, spec)
        header = ['t', 'm1', 'm2', 'm3']
        rows = _rows(traj.times, traj.states.T)
    else:
        model = build_system(config.system, config.basis_path)
        traj = integrate(model.vector_field(p), _start_state(config, model.dim), spec)
        series = observables(traj, model.basis, model.tensors)
        header = ['t'] + [label for label, _ in OBSERVABLE_COLUMNS]
        rows = _rows(series.times, [getattr(series, name) for _, name in OBSERVABLE_COLUMNS])

    logger.info(f"Simulated '{config.system}' for {spec.horizon:g} time units ({len(traj)} records)")
    _emit(config, render_table(header, rows, config.fmt))
    return 0


def _lyapunov_system(config: RunConfig) -> str:
    if config.system not in SYSTEMS:
        raise ConfigError(f"Lyapunov exponents are computed for {', '.join(SYSTEMS)}, not '{config.system}'")
    return config.system


def cmd_lyapunov(config: RunConfig) -> int:
    system = _lyapunov_system(config)
    seeds = list(range(config.seed, config.seed + config.n_samples))
    estimate = lyapunov_estimate(
        system, _params(config), _lyapunov_spec(config), seeds,
        renorm_interval=config.renorm_interval, init_scale=config.init_scale, burn_in=config.burn_in,
        basis_path=config.basis_path, workers=config.threads, progress=config.progress,
    )
    if estimate.n_samples == 0:
        logger.error(f"All {estimate.n_failed} Lyapunov runs failed")
        return 1

    lambda_u1, lambda_su2 = estimate.block_lambda or (None, None)
    record: Dict[str, Any] = {
        'system': system,
        'r': config.r,
        'lambda_max': estimate.lambda_max,
        'stderr': estimate.stderr,
        'lambda_u1': lambda_u1,
        'lambda_su2': lambda_su2,
        'n_samples': estimate.n_samples,
        'n_failed': estimate.n_failed,
        'seed': config.seed,
    }
    if estimate.block_lambda is not None:
        record['stderr_u1'], record['stderr_su2'] = estimate.block_stderr
        record['block_gap'], record['stderr_gap'] = estimate.block_gap, estimate.block_gap_stderr
        record['block_definition'] = BLOCK_DEFINITION

    print(f"lambda_max = {format_number(estimate.lambda_max)} +/- {format_number(estimate.stderr)}")
    if estimate.block_lambda is not None:
        print(f"lambda_u1 = {format_number(lambda_u1)}, lambda_su2 = {format_number(lambda_su2)}, "
              f"gap = {format_number(estimate.block_gap)} +/- {format_number(estimate.block_gap_stderr)}")
    if config.out:
        write_text(config.out, render_json(record))
    else:
        sys.stdout.write(render_json(record))
    return 0


def cmd_sweep(config: RunConfig) -> int:
    system = _lyapunov_system(config)
    grid = config.r_grid()
    seeds = list(range(config.seed, config.seed + config.n_samples))
    diagram = sweep_r(
        grid, config.sigma, config.b, system, _lyapunov_spec(config), seeds,
        workers=config.threads, renorm_interval=config.renorm_interval, init_scale=config.init_scale,
        burn_in=config.burn_in, basis_path=config.basis_path, progress=config.progress,
    )

    try:
        r_crit = detect_rcrit(diagram)
        r_crit_line = f"r_crit = {format_number(r_crit)}"
    except TransitionNotFound as e:
        r_crit = None
        r_crit_line = f"r_crit: not found ({e.reason})"

    header = ['r', 'lambda_mean', 'lambda_stderr', 'lambda_u1', 'lambda_su2', 'n_ok', 'n_failed']
    rows = []
    for r, est in zip(diagram.r_values, diagram.estimates):
        u1, su2 = est.block_lambda or (None, None)
        rows.append([r, est.lambda_max, est.stderr, u1, su2, est.n_samples, est.n_failed])

    if config.fmt == 'json':
        text = render_json({'rows': [dict(zip(header, row)) for row in rows], 'r_crit': r_crit})
    else:
        text = render_table(header, rows, 'csv')
    _emit(config, text)
    print(r_crit_line)
    return 0


def cmd_commutators(config: RunConfig) -> int:
    if config.system not in SYSTEMS or config.system == 'classical':
        raise ConfigError(f"commutators need a matrix system, got '{config.system}'")
    spec = EnsembleSpec(n_samples=config.n_samples, init_scale=config.init_scale, seed=config.seed,
                        r=config.r, system=config.system, cartan_axis=config.cartan_axis)
    result = ensemble_average(spec, _params(config), _spec(config), basis_path=config.basis_path)

    header = ['t']
    columns = []
    for label, name in ENSEMBLE_COLUMNS:
        header += [f'{label}_mean', f'{label}_sd']
        columns += [getattr(result.mean, name), getattr(result.spread, name)]
    _emit(config, render_table(header, _rows(result.mean.times, columns), config.fmt))
    return 0


def cmd_map_llg(config: RunConfig) -> int:
    p = _params(config)
    llg = llg_to_lorenz(p)
    print(f"eta = {[format_number(v) for v in llg.eta]}")
    print(f"beta = {[format_number(v) for v in llg.beta]}")
    print(f"tau = {[format_number(v) for v in llg.tau]}")
    print(f"d = {format_number(llg.torque_d)}")

    spec = IntegrationSpec.from_horizon(config.dt, MAP_LLG_HORIZON, config.record_every)
    xyz0 = _start_state(config, 3)
    lorenz_traj = integrate(lambda t, s: lorenz_rhs(s, p), xyz0, spec)
    llg_traj = integrate(lambda t, s: llg_rhs(s, llg), map_state_lorenz_to_llg(xyz0, p), spec)
    deviation = float(np.max(np.abs(map_state_llg_to_lorenz(llg_traj.states, p) - lorenz_traj.states)))
    print(f"max deviation over {MAP_LLG_HORIZON:g} time units = {format_number(deviation)}")

    if config.out:
        write_text(config.out, render_json({
            'sigma': p.sigma, 'r': p.r, 'b': p.b,
            'eta': list(llg.eta), 'beta': list(llg.beta), 'tau': list(llg.tau), 'd': llg.torque_d,
            'max_deviation': deviation, 'horizon': MAP_LLG_HORIZON,
        }))
    return 0


def cmd_serve(config: RunConfig) -> int:
    from ..core.mcp_server import main as serve_main
    return serve_main()


COMMANDS = {
    'simulate': cmd_simulate,
    'lyapunov': cmd_lyapunov,
    'sweep': cmd_sweep,
    'commutators': cmd_commutators,
    'map-llg': cmd_map_llg,
    'serve': cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level or 'INFO', format=LOG_FORMAT, stream=sys.stderr)

    try:
        config = load_run_config(args)
        logging.getLogger().setLevel(config.log_level)
        return COMMANDS[args.command](config)
    except (ConfigError, ParameterError, BasisError) as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except MatrixLorenzError as e:
        logger.error(f"Run failed: {e}")
        return 1
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        return 1


if __name__ == '__main__':
    sys.exit(main())
