import logging

import pytest

from utils.config import get_config, reload_config
from utils.exceptions import ConfigError
from utils.logging_config import (
    NOISY_LOGGERS,
    PACKAGE_LOGGERS,
    LogTimer,
    create_structured_logger,
    setup_logging,
    setup_preset,
)
from utils.parallel import parallel_map


class TestConfig:
    def test_defaults_are_valid(self):
        checked = get_config().validate_config()
        assert checked["valid"]
        assert checked["errors"] == []

    def test_section_and_bare_overrides(self):
        config = get_config()
        config.apply_overrides({"frequency.grid_size": "512", "trials": "7", "solver.tolerance": None})
        assert config.frequency.grid_size == 512
        assert config.simulation.trials == 7
        assert config.solver.tolerance == 1e-12

    @pytest.mark.parametrize("key", ["frequency.bogus", "nonsense", "ghost.grid_size"])
    def test_unknown_key(self, key):
        with pytest.raises(ConfigError):
            get_config().apply_overrides({key: "1"})

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            get_config().apply_overrides({"simulation.steps": "many"})

    @pytest.mark.parametrize("overrides", [
        {"frequency.grid_size": 1023},
        {"simulation.omega": 7.0},
        {"hinf.bisection_tol": 2.0},
        {"solver.acceptance": 1e-15},
    ])
    def test_invalid_settings(self, overrides):
        config = get_config()
        config.apply_overrides(overrides)
        assert not config.validate_config()["valid"]

    def test_small_grid_warns(self):
        config = get_config()
        config.apply_overrides({"frequency.grid_size": 64})
        checked = config.validate_config()
        assert checked["valid"]
        assert any("grid_size" in w for w in checked["warnings"])

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("COMPET_CTL_GRID", "2048")
        monkeypatch.setenv("COMPET_CTL_FILE_LOGGING", "yes")
        config = reload_config()
        assert config.frequency.grid_size == 2048
        assert config.app.file_logging is True
        monkeypatch.setenv("COMPET_CTL_STEPS", "lots")
        with pytest.raises(ConfigError):
            reload_config()

    def test_solver_options_follow_config(self):
        config = get_config()
        config.apply_overrides({"solver.max_iterations": 50})
        assert config.solver_options().max_iterations == 50

    def test_loose_tolerance_raises_acceptance(self):
        config = get_config()
        config.apply_overrides({"solver.tolerance": 1e-6})
        assert config.solver.acceptance == 1e-6
        assert config.validate_config()["valid"]
        assert config.solver_options().acceptance == 1e-6

    def test_loose_tolerance_from_environment(self, monkeypatch):
        monkeypatch.setenv("COMPET_CTL_TOL", "1e-6")
        config = reload_config()
        assert config.solver.acceptance == 1e-6
        assert config.validate_config()["valid"]

    def test_summary(self):
        config = get_config()
        config.apply_overrides({"threads": 3, "grid_size": 4096})
        summary = config.get_config_summary()
        assert summary["app"]["threads"] == 3
        assert summary["frequency"]["grid_size"] == 4096

    def test_export(self):
        exported = get_config().export_config()
        assert set(exported) == {"solver", "frequency", "simulation", "hinf", "app"}
        assert exported["simulation"]["burn_in"] == 1000


class TestLoggingHelpers:
    @pytest.fixture(autouse=True)
    def restore_root(self):
        root = logging.getLogger()
        handlers, level = root.handlers[:], root.level
        yield
        for handler in root.handlers:
            if handler not in handlers:
                handler.close()
        root.handlers[:] = handlers
        root.setLevel(level)
        for name in PACKAGE_LOGGERS + NOISY_LOGGERS:
            logging.getLogger(name).setLevel(logging.NOTSET)

    def test_testing_preset(self):
        setup_preset("testing")
        root = logging.getLogger()
        assert root.level == logging.WARNING
        assert len(root.handlers) == 1
        assert logging.getLogger("langgraph").level == logging.WARNING
        with pytest.raises(ValueError):
            setup_preset("verbose")

    def test_rotating_file(self, tmp_path):
        setup_logging("DEBUG", enable_console=False, enable_file=True, logs_directory=str(tmp_path))
        logging.getLogger("synthesis.tests").debug("written to file")
        for handler in logging.getLogger().handlers:
            handler.flush()
        [log_file] = list(tmp_path.glob("compet_ctl_*.log"))
        assert "written to file" in log_file.read_text()

    def test_bad_level(self):
        with pytest.raises(ValueError):
            setup_logging("CHATTY")

    def test_log_timer(self, caplog):
        logger = logging.getLogger("tests.timer")
        with caplog.at_level(logging.INFO, logger="tests.timer"):
            with LogTimer(logger, "sweep") as timer:
                pass
        assert timer.duration >= 0.0
        assert "Completed sweep" in caplog.text

    def test_log_timer_failure(self, caplog):
        logger = logging.getLogger("tests.timer")
        with caplog.at_level(logging.INFO, logger="tests.timer"):
            with pytest.raises(RuntimeError):
                with LogTimer(logger, "solve"):
                    raise RuntimeError("diverged")
        assert "Failed solve" in caplog.text

    def test_structured_metric(self, caplog):
        metric_log = create_structured_logger("tests.metrics")
        with caplog.at_level(logging.INFO, logger="tests.metrics"):
            metric_log.log_metric("cr", "regret", 0.5, omega=1.25, system="demo")
        record = caplog.records[-1]
        assert record.controller == "cr"
        assert record.system == "demo"
        assert "omega=1.250000" in record.getMessage()


class TestParallel:
    @pytest.mark.parametrize("workers", [1, 4])
    def test_order_is_preserved(self, workers):
        assert parallel_map(lambda x: x * x, range(10), workers) == [x * x for x in range(10)]
