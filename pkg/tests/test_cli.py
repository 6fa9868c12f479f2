import logging

import pandas as pd
import pytest

from cli import EXIT_INVALID, EXIT_OK, EXIT_SYNTHESIS, RunConfig, build_parser, main
from models.matrix_file import load_controller, load_system
from tests.conftest import SCALAR_RATIO
from utils.exceptions import ConfigError


@pytest.fixture(autouse=True)
def restore_root_handlers():
    """main() installs console handlers bound to the captured stderr"""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def integrator_path(tmp_path):
    path = tmp_path / "integrator.sys"
    path.write_text("name = integrator\nA = [1]\nB_u = [1]\nB_w = [1]\nQ = [1]\nR = [1]\n")
    return str(path)


class TestRunConfig:
    def test_comma_and_repeated_lists(self, scalar_path):
        args = build_parser().parse_args(["sweep", "--system", scalar_path, "--method", "h2,cr",
                                          "--method", "regret", "--omega", "0.016,0.5"])
        run = RunConfig.from_args(args)
        assert run.methods == ["h2", "cr", "regret"]
        assert run.omegas == [0.016, 0.5]
        run.validate()

    @pytest.mark.parametrize("argv", [
        ["synth"],
        ["sweep", "--method", "lqg"],
        ["sim"],
        ["sim", "--method", "cr", "--disturbance", "file"],
        ["sweep", "--grid", "-4"],
    ])
    def test_invalid_runs(self, scalar_path, argv):
        args = build_parser().parse_args(argv[:1] + ["--system", scalar_path] + argv[1:])
        with pytest.raises(ConfigError):
            RunConfig.from_args(args).validate()

    def test_missing_system_file(self, tmp_path):
        args = build_parser().parse_args(["check", "--system", str(tmp_path / "absent.sys")])
        with pytest.raises(ConfigError):
            RunConfig.from_args(args).validate()

    def test_overrides(self, scalar_path):
        args = build_parser().parse_args(["sim", "--system", scalar_path, "--method", "h2", "--steps", "50",
                                          "--grid", "512"])
        overrides = RunConfig.from_args(args).overrides()
        assert overrides["simulation.steps"] == 50
        assert overrides["frequency.grid_size"] == 512
        assert overrides["simulation.trials"] is None


class TestCommands:
    def test_check(self, scalar_path, capsys):
        assert main(["check", "--system", scalar_path]) == EXIT_OK
        assert "valid = yes" in capsys.readouterr().out

    def test_check_rejects_unit_circle_pole(self, integrator_path, tmp_path, capsys):
        report = tmp_path / "report.txt"
        assert main(["check", "--system", integrator_path, "--report", str(report)]) == EXIT_INVALID
        assert "unit_circle = FAIL" in capsys.readouterr().out
        assert "unit_circle = FAIL" in report.read_text()

    def test_synth_cr(self, scalar_path, tmp_path, capsys):
        assert main(["synth", "--system", scalar_path, "--method", "cr", "--out", str(tmp_path)]) == EXIT_OK
        line = capsys.readouterr().out.strip().splitlines()[-1]
        assert line.startswith("scalar_example cr path=scalar ratio=")
        ratio = float(line.split("ratio=")[1].split()[0])
        assert ratio == pytest.approx(SCALAR_RATIO, rel=1e-9)
        assert (tmp_path / "scalar_example_cr.cert").exists()
        controller = load_controller(str(tmp_path / "scalar_example_cr.ctl"), load_system(scalar_path))
        assert controller.method == "cr"

    def test_synth_noncausal_writes_no_controller(self, scalar_path, tmp_path):
        assert main(["synth", "--system", scalar_path, "--method", "noncausal", "--out", str(tmp_path)]) == EXIT_OK
        assert not list(tmp_path.glob("*.ctl"))

    def test_synth_failure_exit_code(self, tmp_path):
        # the unstable mode is not reachable from the input
        path = tmp_path / "blind.sys"
        path.write_text("A = [1.5 0; 0 0.5]\nB_u = [0; 1]\nB_w = [1 0; 0 1]\nQ = [1 0; 0 1]\nR = [1]\n")
        assert main(["synth", "--system", str(path), "--method", "h2", "--out", str(tmp_path)]) == EXIT_SYNTHESIS

    def test_gen(self, tmp_path, capsys):
        out = tmp_path / "rand.sys"
        assert main(["gen", "--n", "3", "--p", "1", "--m", "2", "--seed", "9", "--out", str(out)]) == EXIT_OK
        sys = load_system(str(out))
        assert sys.dims == (3, 1, 2)
        assert sys.name == "rand"

    def test_sweep(self, scalar_path, tmp_path):
        argv = ["sweep", "--system", scalar_path, "--method", "noncausal,cr", "--grid", "256", "--out", str(tmp_path)]
        assert main(argv) == EXIT_OK
        summary = pd.read_csv(tmp_path / "scalar_example_summary.csv").set_index("controller")
        assert list(summary.index) == ["noncausal", "cr"]
        assert summary.loc["noncausal", "regret"] == pytest.approx(0.0, abs=1e-9)
        assert summary.loc["noncausal", "cr"] == pytest.approx(1.0, rel=1e-9)
        assert summary.loc["cr", "cr"] == pytest.approx(SCALAR_RATIO, rel=1e-8)
        metrics = pd.read_csv(tmp_path / "scalar_example_metrics.csv")
        assert len(metrics) == 2 * 256

    def test_sweep_rejects_invalid_plant(self, integrator_path, tmp_path):
        assert main(["sweep", "--system", integrator_path, "--out", str(tmp_path)]) == EXIT_INVALID

    def test_table(self, scalar_path, tmp_path):
        other = tmp_path / "other.sys"
        assert main(["gen", "--n", "2", "--p", "1", "--m", "1", "--seed", "2", "--stable", "--out", str(other)]) == EXIT_OK
        argv = ["table", "--system", scalar_path, str(other), "--method", "h2,cr", "--grid", "256",
                "--out", str(tmp_path)]
        assert main(argv) == EXIT_OK
        table = pd.read_csv(tmp_path / "table.csv")
        assert list(table["system"]) == ["scalar_example", "scalar_example", "other", "other"]

    def test_sim(self, scalar_path, tmp_path):
        argv = ["sim", "--system", scalar_path, "--method", "h2", "--steps", "1500", "--trials", "2",
                "--disturbance", "sine", "--omega", "0.5", "--out", str(tmp_path)]
        assert main(argv) == EXIT_OK
        per_time = pd.read_csv(tmp_path / "scalar_example_h2_sine_0.5_cost.csv")
        assert list(per_time.columns) == ["t", "trial", "cost_avg"]
        assert len(per_time) == 2 * 500
        summary = pd.read_csv(tmp_path / "scalar_example_sim_summary.csv")
        assert summary.loc[0, "controller"] == "h2"
        assert summary.loc[0, "T"] == 1500

    def test_sim_with_controller_file(self, scalar_path, tmp_path):
        assert main(["synth", "--system", scalar_path, "--method", "h2", "--out", str(tmp_path)]) == EXIT_OK
        argv = ["sim", "--system", scalar_path, "--controller", str(tmp_path / "scalar_example_h2.ctl"),
                "--steps", "100", "--trials", "1", "--out", str(tmp_path)]
        assert main(argv) == EXIT_OK
        assert (tmp_path / "scalar_example_h2_gaussian_cost.csv").exists()

    def test_run_config_file(self, scalar_path, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("frequency.grid_size = 7\n")
        assert main(["check", "--system", scalar_path, "--config", str(cfg)]) == EXIT_INVALID
        cfg.write_text("frequency.grid_size = 128\nsimulation.trials = 3\n")
        assert main(["check", "--system", scalar_path, "--config", str(cfg)]) == EXIT_OK
