#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Core application class: command-line entry points
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from src.core.config import Config
from src.core.errors import ConfigurationError, InvalidBasisError, ReconciliationError, SolverError
from src.core.runlog import RunLog
from src.data.parser import load_hierarchy
from src.data.tables import panel_frame, read_errors, read_forecasts, write_panel, write_table
from src.estimation.covariance import WEIGHT_KINDS, estimate
from src.hierarchy.structure import check_basis
from src.reconcile.mapping import reconcile
from src.simulate.experiment import PLANS, constrained_win_share, run_experiment
from src.simulate.scenarios import SCENARIOS, SimulationConfig

logger = logging.getLogger(__name__)

APP_NAME = "immutable-reconcile"
APP_VERSION = "0.1.0"

EXIT_OK = 0
EXIT_INVALID_BASIS = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

COMMANDS = ("reconcile", "validate-basis", "simulate")
ERROR_WEIGHTS = ("wls_v", "mint_shrink")


def split_labels(text: Optional[str]) -> List[str]:
    """Comma-separated labels; blanks dropped, so "" is the empty set"""
    if not text:
        return []
    return [label.strip() for label in text.split(",") if label.strip()]


@dataclass
class RunConfig:
    """Everything one command needs, after flags and Config are merged"""

    command: str
    hierarchy_path: Optional[Path] = None
    forecasts_path: Optional[Path] = None
    errors_path: Optional[Path] = None
    output_path: Optional[Path] = None
    weights: str = "ols"
    immutable: List[str] = field(default_factory=list)
    nonneg: bool = False
    candidate: List[str] = field(default_factory=list)
    scenario: str = "one"
    replications: int = 100
    seed: int = 2022
    plan: str = "ets_arima"
    workers: int = 1
    horizon: int = 24
    t_total: int = 324
    include_nonneg: bool = False
    deterministic: bool = False
    digits: int = 12

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"Unknown command: {self.command}")
        if self.command == "reconcile":
            if self.hierarchy_path is None or self.forecasts_path is None:
                raise ConfigurationError("reconcile requires --hierarchy and --forecasts")
            if self.weights not in WEIGHT_KINDS:
                raise ConfigurationError(f"Unknown --weights {self.weights}")
            if self.weights in ERROR_WEIGHTS and self.errors_path is None:
                raise ConfigurationError(f"--errors is required for --weights {self.weights}")
        elif self.command == "validate-basis":
            if self.hierarchy_path is None:
                raise ConfigurationError("validate-basis requires --hierarchy")
            if not self.candidate:
                raise ConfigurationError("validate-basis requires --candidate")
        else:
            if self.replications < 1:
                raise ConfigurationError(f"--replications must be positive, got {self.replications}")
            if self.plan not in PLANS:
                raise ConfigurationError(f"Unknown --plan {self.plan}")


class Application:
    """Command-line application for reconciliation, basis validation and simulation"""

    def __init__(self, config: Optional[Config] = None):
        """Initialize the application"""
        self.config = config if config is not None else Config()
        self.parser = self.build_parser()

    def build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog=APP_NAME,
            description="Hierarchical forecast reconciliation with immutable series",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
        commands = parser.add_subparsers(dest="command", required=True)

        rec = commands.add_parser("reconcile", help="reconcile base forecasts from files")
        rec.add_argument("--hierarchy", required=True, type=Path, help="hierarchy file")
        rec.add_argument("--forecasts", required=True, type=Path, help="base forecast CSV (series,h1,...)")
        rec.add_argument("--errors", type=Path, help="in-sample error CSV (series,t1,...)")
        rec.add_argument("--weights", choices=WEIGHT_KINDS, help="weight matrix estimator")
        rec.add_argument("--immutable", default="", help="comma-separated labels held at their base forecasts")
        rec.add_argument("--nonneg", action="store_true", default=None, help="bound basis forecasts at zero")
        rec.add_argument("--out", type=Path, help="reconciled CSV (stdout when omitted)")

        val = commands.add_parser("validate-basis", help="check whether series can form a basis")
        val.add_argument("--hierarchy", required=True, type=Path, help="hierarchy file")
        val.add_argument("--candidate", required=True, help="comma-separated candidate basis labels")

        sim = commands.add_parser("simulate", help="run the replicated simulation experiment")
        sim.add_argument("--scenario", choices=SCENARIOS, default="one")
        sim.add_argument("--replications", type=int)
        sim.add_argument("--seed", type=int)
        sim.add_argument("--plan", choices=tuple(PLANS))
        sim.add_argument("--workers", type=int)
        sim.add_argument("--immutable", default="Total", help="comma-separated immutable labels")
        sim.add_argument("--nonneg", action="store_true", help="add the non-negative cells")
        sim.add_argument("--deterministic", action="store_true", help="leave wall-clock fields out of the run log")
        sim.add_argument("--out", type=Path, help="RMSE table CSV (stdout when omitted)")
        return parser

    def parse(self, argv: Sequence[str]) -> RunConfig:
        """Parse flags; unset flags take their value from Config"""
        args = self.parser.parse_args(list(argv))
        reconcile_section = self.config.get_section("reconcile")
        simulation_section = self.config.get_section("simulation")

        cfg = RunConfig(command=args.command, digits=reconcile_section["significant_digits"])
        if args.command == "reconcile":
            cfg.hierarchy_path = args.hierarchy
            cfg.forecasts_path = args.forecasts
            cfg.errors_path = args.errors
            cfg.output_path = args.out
            cfg.weights = args.weights or reconcile_section["default_weights"]
            cfg.immutable = split_labels(args.immutable)
            cfg.nonneg = reconcile_section["nonneg"] if args.nonneg is None else args.nonneg
        elif args.command == "validate-basis":
            cfg.hierarchy_path = args.hierarchy
            cfg.candidate = split_labels(args.candidate)
        else:
            cfg.output_path = args.out
            cfg.scenario = args.scenario
            cfg.replications = simulation_section["replications"] if args.replications is None else args.replications
            cfg.seed = simulation_section["seed"] if args.seed is None else args.seed
            cfg.plan = args.plan or simulation_section["plan"]
            cfg.workers = simulation_section["workers"] if args.workers is None else args.workers
            cfg.horizon = simulation_section["horizon"]
            cfg.t_total = simulation_section["t_total"]
            cfg.immutable = split_labels(args.immutable)
            cfg.include_nonneg = args.nonneg
            cfg.deterministic = args.deterministic
        return cfg

    def run(self, argv: Sequence[str]) -> int:
        """Parse, dispatch and map failures to exit codes"""
        try:
            cfg = self.parse(argv)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_VALIDATION

        handlers = {
            "reconcile": self.cmd_reconcile,
            "validate-basis": self.cmd_validate_basis,
            "simulate": self.cmd_simulate,
        }
        try:
            cfg.validate()
            return handlers[cfg.command](cfg)
        except SolverError as e:
            logger.error(f"Solver failure: {e}")
            print(f"error: solver failure: {e}", file=sys.stderr)
            return EXIT_SOLVER
        except ReconciliationError as e:
            logger.error(f"{type(e).__name__}: {e}")
            print(f"error: {e}", file=sys.stderr)
            return EXIT_VALIDATION

    def cmd_reconcile(self, cfg: RunConfig) -> int:
        h = load_hierarchy(cfg.hierarchy_path)
        panel = read_forecasts(cfg.forecasts_path)
        errors = read_errors(cfg.errors_path, h.labels) if cfg.errors_path is not None else None

        wm = estimate(cfg.weights, h, errors)
        result = reconcile(h, wm, panel, immutable=cfg.immutable, nonneg=cfg.nonneg)
        for message in result.warnings:
            print(f"warning: {message}", file=sys.stderr)

        # rows back in the input file's order
        order = [h.index_of(label) for label in panel.labels]
        values = result.reconciled[order]
        if cfg.output_path is None:
            panel_frame(panel.labels, values).to_csv(sys.stdout, float_format=f"%.{cfg.digits}g")
            return EXIT_OK

        write_panel(cfg.output_path, panel.labels, values, digits=cfg.digits)
        diagnostics = dict(result.diagnostics)
        diagnostics.update(
            coherence_residual=result.coherence_residual,
            immutability_residual=result.immutability_residual,
            basis=[h.labels[i] for i in result.basis_indices],
            weight_jitter=wm.jitter,
            shrink_lambda=wm.shrink_lambda,
        )
        RunLog("reconcile").write_diagnostics(self.diagnostics_path(cfg.output_path), diagnostics)
        return EXIT_OK

    def cmd_validate_basis(self, cfg: RunConfig) -> int:
        h = load_hierarchy(cfg.hierarchy_path)
        candidate = h.indices_of(cfg.candidate)
        try:
            outcome = check_basis(h, candidate)
        except InvalidBasisError as e:
            print(f"invalid: {e}")
            return EXIT_INVALID_BASIS

        if outcome.valid:
            print(f"valid: {', '.join(cfg.candidate)} (singular value ratio {outcome.singular_ratio:.3g})")
            return EXIT_OK
        print(f"invalid: {outcome.reason}")
        print(f"dependency: {outcome.describe_witness()}")
        return EXIT_INVALID_BASIS

    def cmd_simulate(self, cfg: RunConfig) -> int:
        sim = SimulationConfig(
            scenario=cfg.scenario,
            horizon=cfg.horizon,
            t_total=cfg.t_total,
            replications=cfg.replications,
            seed=cfg.seed,
            workers=cfg.workers,
        )
        result = run_experiment(sim, base_model_plan=cfg.plan, immutable=cfg.immutable,
                                include_nonneg=cfg.include_nonneg)

        if cfg.output_path is None:
            result.table.to_csv(sys.stdout, float_format=f"%.{cfg.digits}g")
        else:
            write_table(cfg.output_path, result.table, digits=cfg.digits)
            run_log = RunLog("simulate", deterministic=cfg.deterministic)
            for record in result.records:
                run_log.add_record(record)
            run_log.write_jsonl(cfg.output_path.with_suffix(".runlog.jsonl"))

        for kind in WEIGHT_KINDS:
            share = constrained_win_share(result, kind)
            if share is not None:
                print(f"{kind}: constrained <= unconstrained in {share:.0%} of replications", file=sys.stderr)
        if result.dropped:
            print(f"warning: {result.dropped} replication(s) dropped", file=sys.stderr)
        return EXIT_OK

    @staticmethod
    def diagnostics_path(output_path: Path) -> Path:
        return output_path.with_suffix(".diagnostics.json")
