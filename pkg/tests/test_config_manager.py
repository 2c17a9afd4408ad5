import json

import pytest

from matrix_lorenz.core.errors import ConfigError
from matrix_lorenz.utils.config_manager import ConfigManager, RunConfig


@pytest.fixture
def manager():
    manager = ConfigManager()
    manager.load_config()
    return manager


def write_config(tmp_path, document):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document))
    return path


def test_defaults(manager):
    assert manager.get("system") == "u2_paper"
    assert manager.get("params.r") == 28.0
    assert manager.get("lyapunov.renorm_interval") == 100
    assert manager.get("lyapunov.horizon") == 2000.0
    assert manager.get("lyapunov.dt") == 0.01
    assert manager.get("missing.key", "fallback") == "fallback"


def test_user_document_overrides_nested_keys(tmp_path):
    manager = ConfigManager()
    manager.load_config(write_config(tmp_path, {"params": {"r": 15.0}, "ensemble": {"n_samples": 32}}))
    assert manager.get("params.r") == 15.0
    assert manager.get("params.sigma") == 10.0
    assert manager.get("ensemble.n_samples") == 32
    assert manager.get("ensemble.seed") == 0


def test_unknown_keys_are_kept_with_a_warning(tmp_path, caplog):
    manager = ConfigManager()
    with caplog.at_level("WARNING"):
        manager.load_config(write_config(tmp_path, {"colour": "blue"}))
    assert manager.get("colour") == "blue"
    assert "Unknown configuration key 'colour'" in caplog.text


def test_defaults_are_not_mutated_by_merges(tmp_path):
    manager = ConfigManager()
    manager.load_config(write_config(tmp_path, {"params": {"r": 1.0}}))
    manager.set("integration.dt", 0.5)
    assert manager.default_config["params"]["r"] == 28.0
    manager.reset_to_defaults()
    assert manager.get("params.r") == 28.0
    assert manager.get("integration.dt") == 0.001


def test_set_creates_sections(manager):
    manager.set("extra.nested.value", 3)
    assert manager.get("extra.nested.value") == 3


def test_save_and_reload(tmp_path, manager):
    manager.set("params.r", 24.5)
    path = tmp_path / "saved.json"
    manager.save_config(path)
    reloaded = ConfigManager()
    reloaded.load_config(path)
    assert reloaded.get("params.r") == 24.5
    assert reloaded.config == manager.config


def test_unreadable_documents(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    with pytest.raises(ConfigError):
        ConfigManager().load_config(bad)
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ConfigManager().load_config(listing)
    with pytest.raises(ConfigError):
        ConfigManager().load_config(tmp_path / "absent.json")


def test_run_config_from_defaults(manager):
    config = RunConfig.from_manager(manager)
    assert config.system == "u2_paper"
    assert config.b == pytest.approx(8 / 3)
    assert config.record_every == 10
    assert config.initial_state is None
    assert config.cartan_axis is None
    assert config.log_level == "INFO"
    assert (config.lyapunov_dt, config.lyapunov_horizon) == (0.01, 2000.0)
    assert config.horizon == 100.0
    assert config.progress is True


def test_r_grid_includes_end_point(manager):
    grid = RunConfig.from_manager(manager).r_grid()
    assert len(grid) == 21
    assert grid[0] == 20.0 and grid[-1] == pytest.approx(30.0)


@pytest.mark.parametrize("r_min, r_max, r_step", [(30.0, 20.0, 0.5), (20.0, 30.0, 0.0), (20.0, 30.0, -1.0)])
def test_r_grid_errors(manager, r_min, r_max, r_step):
    manager.set("sweep.r_min", r_min)
    manager.set("sweep.r_max", r_max)
    manager.set("sweep.r_step", r_step)
    with pytest.raises(ConfigError):
        RunConfig.from_manager(manager).r_grid()


def test_single_point_grid(manager):
    manager.set("sweep.r_min", 25.0)
    manager.set("sweep.r_max", 25.0)
    assert RunConfig.from_manager(manager).r_grid() == [25.0]


@pytest.mark.parametrize("key, value", [
    ("system", "lorenz96"),
    ("integration.dt", 0.0),
    ("integration.horizon", -1.0),
    ("integration.record_every", 0),
    ("integration.initial_state", ["a", "b"]),
    ("lyapunov.renorm_interval", 0),
    ("lyapunov.dt", 0.0),
    ("lyapunov.horizon", -5.0),
    ("lyapunov.burn_in", 1.0),
    ("ensemble.n_samples", 0),
    ("ensemble.init_scale", 0.0),
    ("params.r", "high"),
    ("output.format", "xml"),
    ("runtime.threads", 0),
    ("runtime.log_level", "chatty"),
])
def test_invalid_values(manager, key, value):
    manager.set(key, value)
    with pytest.raises(ConfigError):
        RunConfig.from_manager(manager)


def test_custom_basis_needs_a_path(manager):
    manager.set("system", "custom_basis")
    with pytest.raises(ConfigError):
        RunConfig.from_manager(manager)
    manager.set("basis_path", "u2.json")
    assert RunConfig.from_manager(manager).basis_path == "u2.json"


def test_log_level_is_case_insensitive(manager):
    manager.set("runtime.log_level", "debug")
    assert RunConfig.from_manager(manager).log_level == "DEBUG"


def test_non_physical_parameters_warn(manager, caplog):
    manager.set("params.sigma", -1.0)
    with caplog.at_level("WARNING"):
        RunConfig.from_manager(manager)
    assert "not physical" in caplog.text
