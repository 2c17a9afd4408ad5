#!/usr/bin/env python3
"""
Configuration Manager for matrix Lorenz runs
Layers bundled defaults, a user JSON document and command-line overrides
"""

import copy
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from ..core.errors import ConfigError
from ..core.systems import SYSTEMS

logger = logging.getLogger('matrix-lorenz-config')

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / 'config.json'

SIMULATE_SYSTEMS = SYSTEMS + ('llg',)
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


class ConfigManager:
    """Manages run configuration as a nested dict with dot-notation access"""

    def __init__(self, defaults_path: Union[str, Path] = DEFAULT_CONFIG_PATH):
        self.config: Optional[Dict[str, Any]] = None
        self.defaults_path = Path(defaults_path)
        self.default_config = self._read_json(self.defaults_path)

    @staticmethod
    def _read_json(path: Path) -> Dict[str, Any]:
        try:
            with open(path, 'r') as f:
                document = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Could not read configuration {path}: {e}")
        if not isinstance(document, dict):
            raise ConfigError(f"Configuration {path} must be a JSON object")
        return document

    def load_config(self, user_path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
        """Load defaults, merged with a user document when given"""
        self.config = copy.deepcopy(self.default_config)
        if user_path:
            user_config = self._read_json(Path(user_path))
            self.config = self._merge_config(self.config, user_config)
            logger.info(f"Configuration loaded from {user_path}")
        else:
            logger.debug("Using default configuration")
        return self.config

    def save_config(self, path: Union[str, Path]):
        """Write the merged configuration, e.g. to turn a command line into a recipe"""
        if not self.config:
            return
        with open(path, 'w') as f:
            json.dump(self.config, f, indent=2, sort_keys=True)
        logger.info(f"Configuration saved to {path}")

    def get(self, key: str, default: Any = None) -> Any:
        if not self.config:
            self.load_config()
        return self._get_nested(self.config, key, default)

    def set(self, key: str, value: Any):
        if not self.config:
            self.load_config()
        self._set_nested(self.config, key, value)

    def _get_nested(self, config: Dict[str, Any], key: str, default: Any = None) -> Any:
        current = config
        for k in key.split('.'):
            if isinstance(current, dict) and k in current:
                current = current[k]
            else:
                return default
        return current

    def _set_nested(self, config: Dict[str, Any], key: str, value: Any):
        keys = key.split('.')
        current = config
        for k in keys[:-1]:
            if not isinstance(current.get(k), dict):
                current[k] = {}
            current = current[k]
        current[keys[-1]] = value

    def _merge_config(self, default: Dict[str, Any], user: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge user config over defaults"""
        for key, value in user.items():
            if key in default and isinstance(default[key], dict) and isinstance(value, dict):
                default[key] = self._merge_config(default[key], value)
            else:
                if key not in default:
                    logger.warning(f"Unknown configuration key '{key}'")
                default[key] = value
        return default

    def reset_to_defaults(self):
        self.config = copy.deepcopy(self.default_config)
        logger.info("Configuration reset to defaults")


def _number(manager: ConfigManager, key: str, kind=float) -> Any:
    value = manager.get(key)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a {kind.__name__}, got {value!r}")


def _optional(manager: ConfigManager, key: str, kind=float) -> Any:
    return None if manager.get(key) is None else _number(manager, key, kind)


@dataclass(frozen=True)
class RunConfig:
    """Validated view of a merged configuration"""

    system: str
    basis_path: Optional[str]
    sigma: float
    r: float
    b: float
    dt: float
    horizon: float
    record_every: int
    t0: float
    initial_state: Optional[Tuple[float, ...]]
    lyapunov_dt: float
    lyapunov_horizon: float
    renorm_interval: int
    burn_in: float
    n_samples: int
    init_scale: float
    seed: int
    cartan_axis: Optional[int]
    r_min: float
    r_max: float
    r_step: float
    out: Optional[str]
    fmt: str
    threads: Optional[int]
    progress: bool
    log_level: str
    llg: Dict[str, Any]

    @classmethod
    def from_manager(cls, manager: ConfigManager) -> "RunConfig":
        system = manager.get('system')
        if system not in SIMULATE_SYSTEMS:
            raise ConfigError(f"system must be one of {', '.join(SIMULATE_SYSTEMS)}, got {system!r}")
        basis_path = manager.get('basis_path')
        if system == 'custom_basis' and not basis_path:
            raise ConfigError("system 'custom_basis' needs basis_path (--basis)")

        initial = manager.get('integration.initial_state')
        if initial is not None:
            try:
                initial = tuple(float(v) for v in initial)
            except (TypeError, ValueError):
                raise ConfigError("integration.initial_state must be a list of numbers")

        fmt = manager.get('output.format', 'csv')
        if fmt not in ('csv', 'json'):
            raise ConfigError(f"output.format must be csv or json, got {fmt!r}")

        config = cls(
            system=system,
            basis_path=basis_path,
            sigma=_number(manager, 'params.sigma'),
            r=_number(manager, 'params.r'),
            b=_number(manager, 'params.b'),
            dt=_number(manager, 'integration.dt'),
            horizon=_number(manager, 'integration.horizon'),
            record_every=_number(manager, 'integration.record_every', int),
            t0=_number(manager, 'integration.t0'),
            initial_state=initial,
            lyapunov_dt=_number(manager, 'lyapunov.dt'),
            lyapunov_horizon=_number(manager, 'lyapunov.horizon'),
            renorm_interval=_number(manager, 'lyapunov.renorm_interval', int),
            burn_in=_number(manager, 'lyapunov.burn_in'),
            n_samples=_number(manager, 'ensemble.n_samples', int),
            init_scale=_number(manager, 'ensemble.init_scale'),
            seed=_number(manager, 'ensemble.seed', int),
            cartan_axis=_optional(manager, 'ensemble.cartan_axis', int),
            r_min=_number(manager, 'sweep.r_min'),
            r_max=_number(manager, 'sweep.r_max'),
            r_step=_number(manager, 'sweep.r_step'),
            out=manager.get('output.path'),
            fmt=fmt,
            threads=_optional(manager, 'runtime.threads', int),
            progress=bool(manager.get('runtime.progress', True)),
            log_level=str(manager.get('runtime.log_level', 'INFO')).upper(),
            llg=manager.get('llg', {}) or {},
        )
        config._validate()
        return config

    def _validate(self):
        if not self.dt > 0:
            raise ConfigError(f"integration.dt must be positive, got {self.dt}")
        if self.horizon < 0:
            raise ConfigError(f"integration.horizon must be non-negative, got {self.horizon}")
        if not self.lyapunov_dt > 0:
            raise ConfigError(f"lyapunov.dt must be positive, got {self.lyapunov_dt}")
        if self.lyapunov_horizon < 0:
            raise ConfigError(f"lyapunov.horizon must be non-negative, got {self.lyapunov_horizon}")
        if self.record_every < 1:
            raise ConfigError("integration.record_every must be at least 1")
        if self.renorm_interval < 1:
            raise ConfigError("lyapunov.renorm_interval must be at least 1")
        if not 0 <= self.burn_in < 1:
            raise ConfigError("lyapunov.burn_in must lie in [0, 1)")
        if self.n_samples < 1:
            raise ConfigError("ensemble.n_samples must be at least 1")
        if not self.init_scale > 0:
            raise ConfigError("ensemble.init_scale must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("runtime.threads must be at least 1")
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"runtime.log_level must be one of {', '.join(LOG_LEVELS)}, got {self.log_level!r}")
        if self.sigma <= 0 or self.b <= 0:
            logger.warning(f"sigma={self.sigma:g}, b={self.b:g}: non-positive values are not physical")

    def r_grid(self):
        """Sweep grid r_min, r_min + r_step, ... up to r_max inclusive"""
        if not self.r_step > 0:
            raise ConfigError(f"sweep.r_step must be positive, got {self.r_step}")
        if self.r_max < self.r_min:
            raise ConfigError(f"empty sweep grid: r_max {self.r_max} < r_min {self.r_min}")
        count = int((self.r_max - self.r_min) / self.r_step + 1e-9) + 1
        return [self.r_min + k * self.r_step for k in range(count)]
