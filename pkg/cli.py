"""
Command-line front end.

    compet-ctl check  --system plant.sys
    compet-ctl synth  --system plant.sys --method cr --out results/
    compet-ctl sweep  --system plant.sys --method h2,hinf,cr,regret,noncausal --grid 2048
    compet-ctl sim    --system plant.sys --method cr --disturbance sine --omega 0.016,0.5
    compet-ctl table  --system a.sys b.sys --out results/
    compet-ctl gen    --n 4 --p 2 --m 2 --seed 3 --out plant.sys

Exit codes: 0 success, 2 model/config/validation failure, 3 synthesis failure,
1 anything else.
"""
import argparse
import logging
import os
import sys as _sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from models.lti_system import LtiSystem, validate
from models.matrix_file import (load_controller, load_key_values, load_system, save_certificate,
                                save_controller, save_system)
from models.random_system import make_random_system
from run_workflow import ExperimentWorkflow
from sim.disturbances import DisturbanceSpec
from sim.simulator import SUMMARY_COLUMNS, simulate
from synthesis.orchestrator import METHODS, SynthesisOrchestrator
from utils.config import get_config
from utils.exceptions import CompetCtlError, ConfigError, ModelError, SimulationError, SynthesisError
from utils.logging_config import setup_logging

logger = logging.getLogger("cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_SYNTHESIS = 3

SUBCOMMANDS = ("check", "synth", "sweep", "sim", "table", "gen")


def _split(values: Optional[List[str]]) -> List[str]:
    out: List[str] = []
    for value in values or []:
        out.extend(part.strip() for part in value.split(",") if part.strip())
    return out


@dataclass
class RunConfig:
    subcommand: str
    systems: List[str] = field(default_factory=list)
    methods: List[str] = field(default_factory=list)
    grid: Optional[int] = None
    steps: Optional[int] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    omegas: List[float] = field(default_factory=list)
    out: str = ""
    tol: Optional[float] = None
    config_path: Optional[str] = None
    log_level: Optional[str] = None
    controller: Optional[str] = None
    disturbance: str = "gaussian"
    disturbance_file: Optional[str] = None
    report: Optional[str] = None
    n: int = 4
    p: int = 2
    m: int = 2
    stable: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        try:
            omegas = [float(w) for w in _split(args.omega)]
        except ValueError as e:
            raise ConfigError(f"--omega expects a comma-separated list of numbers: {e}") from e
        return cls(
            subcommand=args.command,
            systems=_split(args.system),
            methods=_split(args.method),
            grid=args.grid,
            steps=args.steps,
            trials=args.trials,
            seed=args.seed,
            omegas=omegas,
            out=args.out or "",
            tol=args.tol,
            config_path=args.config,
            log_level=args.log_level,
            controller=args.controller,
            disturbance=args.disturbance,
            disturbance_file=args.disturbance_file,
            report=args.report,
            n=args.n, p=args.p, m=args.m,
            stable=args.stable,
        )

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.subcommand != "gen":
            if not self.systems:
                raise ConfigError("--system is required")
            if self.subcommand != "table" and len(self.systems) > 1:
                raise ConfigError(f"{self.subcommand} takes a single --system")
        for path in self.systems + [p for p in (self.config_path, self.controller, self.disturbance_file) if p]:
            if not os.path.isfile(path):
                raise ConfigError(f"file not found: {path}")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}", {"choices": METHODS})
        if self.subcommand == "synth" and not self.methods:
            raise ConfigError("--method is required for synth")
        if self.subcommand == "sim":
            if not self.methods and not self.controller:
                raise ConfigError("sim needs --method or --controller")
            if self.disturbance == "file" and not self.disturbance_file:
                raise ConfigError("--disturbance file needs --disturbance-file")
        for name in ("grid", "steps", "trials", "tol"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(f"--{name} must be positive", {name: value})
        if self.seed is not None and self.seed < 0:
            raise ConfigError("--seed must be non-negative")
        if self.subcommand == "gen" and not self.out:
            raise ConfigError("gen needs --out for the system file")

    def overrides(self) -> Dict[str, object]:
        return {
            "frequency.grid_size": self.grid,
            "simulation.steps": self.steps,
            "simulation.trials": self.trials,
            "simulation.seed": self.seed,
            "solver.tolerance": self.tol,
            "app.log_level": self.log_level,
        }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="compet-ctl",
                                     description="Competitive-ratio and regret-optimal controller synthesis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--system", nargs="+", help="plant file(s); table accepts several")
        cmd.add_argument("--method", action="append", help=f"comma list from {', '.join(METHODS)}")
        cmd.add_argument("--grid", type=int)
        cmd.add_argument("--steps", type=int)
        cmd.add_argument("--trials", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--omega", action="append", help="comma list of sinusoid frequencies")
        cmd.add_argument("--out")
        cmd.add_argument("--tol", type=float)
        cmd.add_argument("--config", help="key = value run configuration file")
        cmd.add_argument("--log-level")
        cmd.add_argument("--controller", help="controller file (sim)")
        cmd.add_argument("--disturbance", choices=("gaussian", "sine", "file"), default="gaussian")
        cmd.add_argument("--disturbance-file")
        cmd.add_argument("--report", help="write the textual report to this file")
        cmd.add_argument("--n", type=int, default=4)
        cmd.add_argument("--p", type=int, default=2)
        cmd.add_argument("--m", type=int, default=2)
        cmd.add_argument("--stable", action="store_true", help="gen: draw a stable A")
    return parser


def _write_report(path: Optional[str], text: str) -> None:
    if not path:
        return
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text + "\n")


def _out_dir(run: RunConfig) -> str:
    out = run.out or get_config().app.output_directory
    os.makedirs(out, exist_ok=True)
    return out


def _format_table(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=lambda x: f"{x:.6g}")


def cmd_check(run: RunConfig) -> int:
    sys = load_system(run.systems[0])
    report = validate(sys, get_config().frequency.rank_grid_size)
    text = report.to_text()
    print(text)
    _write_report(run.report, text)
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_synth(run: RunConfig) -> int:
    sys = load_system(run.systems[0])
    orchestrator = SynthesisOrchestrator(grid_size=run.grid)
    out = _out_dir(run)
    lines = []
    status = EXIT_OK
    for method, result in orchestrator.run(sys, run.methods).items():
        if not result["success"]:
            lines.append(f"{sys.name} {method} FAILED: {result['error']}")
            status = EXIT_SYNTHESIS
            continue
        controller = result["controller"]
        if getattr(controller, "realizable", True):
            save_controller(controller, os.path.join(out, f"{sys.name}_{method}.ctl"))
        else:
            logger.warning(f"{method} controller has no realization; nothing written")
        certificate = result.get("certificate")
        if certificate is not None:
            save_certificate(certificate, os.path.join(out, f"{sys.name}_{method}.cert"))
            lines.append(certificate.summary())
        elif result.get("value") is not None:
            lines.append(f"{sys.name} {method} value={result['value']:.10g}")
        else:
            lines.append(f"{sys.name} {method}")
    text = "\n".join(lines)
    print(text)
    _write_report(run.report, text)
    return status


def _run_workflow(run: RunConfig, path: str, workflow: ExperimentWorkflow):
    state = workflow.run(path, run.methods or list(METHODS), run.grid)
    if state.get("error"):
        stage = state.get("error_stage")
        if state.get("report") is not None and stage == "validate":
            print(state["report"].to_text())
        raise (SynthesisError if stage in ("synthesize", "evaluate") else ModelError)(
            f"{path}: {state['error']}", {"stage": stage})
    return state


def cmd_sweep(run: RunConfig) -> int:
    workflow = ExperimentWorkflow(SynthesisOrchestrator(grid_size=run.grid))
    state = _run_workflow(run, run.systems[0], workflow)
    name = state["system"].name
    out = _out_dir(run)
    state["metrics"].save_csv(os.path.join(out, f"{name}_metrics.csv"))
    summary = state["summary"]
    summary.to_csv(os.path.join(out, f"{name}_summary.csv"), index=False, float_format="%.17g")
    text = _format_table(summary)
    print(text)
    _write_report(run.report, text)
    failed = [m for m, r in state["synthesis"].items() if not r.get("success")]
    return EXIT_SYNTHESIS if failed else EXIT_OK


def cmd_table(run: RunConfig) -> int:
    workflow = ExperimentWorkflow(SynthesisOrchestrator(grid_size=run.grid))
    frames = []
    status = EXIT_OK
    for path in run.systems:
        state = _run_workflow(run, path, workflow)
        frames.append(state["summary"])
        if any(not r.get("success") for r in state["synthesis"].values()):
            status = EXIT_SYNTHESIS
    table = pd.concat(frames, ignore_index=True)
    table.to_csv(os.path.join(_out_dir(run), "table.csv"), index=False, float_format="%.17g")
    blocks = [_format_table(frame) for frame in frames]
    text = "\n\n".join(blocks)
    print(text)
    _write_report(run.report, text)
    return status


def _sim_controllers(run: RunConfig, sys: LtiSystem) -> Dict[str, object]:
    if run.controller:
        controller = load_controller(run.controller, sys)
        return {controller.method or os.path.splitext(os.path.basename(run.controller))[0]: controller}
    results = SynthesisOrchestrator(grid_size=run.grid).run(sys, run.methods)
    failed = {m: r["error"] for m, r in results.items() if not r["success"]}
    if failed:
        raise SynthesisError(f"synthesis failed for {sorted(failed)}", failed)
    return {method: r["controller"] for method, r in results.items()}


def cmd_sim(run: RunConfig) -> int:
    config = get_config().simulation
    sys = load_system(run.systems[0])
    controllers = _sim_controllers(run, sys)
    steps = run.steps or config.steps
    seed = run.seed if run.seed is not None else config.seed
    if run.disturbance == "sine":
        specs = [DisturbanceSpec("sine", steps, seed=seed, omega=w) for w in (run.omegas or [config.omega])]
    elif run.disturbance == "file":
        specs = [DisturbanceSpec("file", steps, seed=seed, path=run.disturbance_file)]
    else:
        specs = [DisturbanceSpec("gaussian", steps, seed=seed)]

    out = _out_dir(run)
    summaries = []
    for spec in specs:
        for name, controller in controllers.items():
            result = simulate(sys, controller, spec, trials=run.trials or config.trials, seed=seed)
            result.controller = name
            tag = spec.label.replace("(", "_").replace(")", "").replace(os.sep, "_")
            result.save_csv(os.path.join(out, f"{sys.name}_{name}_{tag}_cost.csv"))
            summaries.append(result.summary_frame())
    summary = pd.concat(summaries, ignore_index=True)[SUMMARY_COLUMNS]
    summary.to_csv(os.path.join(out, f"{sys.name}_sim_summary.csv"), index=False, float_format="%.17g")
    text = _format_table(summary)
    print(text)
    _write_report(run.report, text)
    return EXIT_OK


def cmd_gen(run: RunConfig) -> int:
    seed = run.seed if run.seed is not None else 0
    name = os.path.splitext(os.path.basename(run.out))[0]
    sys = make_random_system(run.n, run.p, run.m, seed=seed, unstable=not run.stable, name=name)
    save_system(sys, run.out)
    print(f"wrote {run.out} (n={sys.n} p={sys.p} m={sys.m})")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "sim": cmd_sim,
    "table": cmd_table,
    "gen": cmd_gen,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = get_config()
    try:
        run = RunConfig.from_args(args)
        run.validate()
        if run.config_path:
            config.apply_overrides(load_key_values(run.config_path))
        config.apply_overrides(run.overrides())
        checked = config.validate_config()
        if not checked["valid"]:
            raise ConfigError("invalid configuration", {"errors": checked["errors"]})
        setup_logging(config.app.log_level, enable_file=config.app.file_logging,
                      logs_directory=config.app.logs_directory)
        logger.debug(f"Configuration: {config.get_config_summary()}")
        for warning in checked["warnings"]:
            logger.warning(warning)
        return COMMANDS[run.subcommand](run)
    except (ModelError, ConfigError) as e:
        logger.error(str(e))
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_INVALID
    except SynthesisError as e:
        logger.error(str(e))
        print(f"synthesis failed: {e}", file=_sys.stderr)
        return EXIT_SYNTHESIS
    except (SimulationError, CompetCtlError) as e:
        logger.error(str(e))
        print(f"error: {e}", file=_sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"unexpected error: {e}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    _sys.exit(main())
