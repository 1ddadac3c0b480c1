#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Replicated simulation experiments comparing base, unconstrained and immutable reconciliation
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.errors import ConfigurationError, ReconciliationError
from src.estimation.covariance import WEIGHT_KINDS, ErrorSample, estimate
from src.forecast.models import fit, predict
from src.hierarchy.structure import Hierarchy
from src.metrics.accuracy import accuracy_report
from src.reconcile.mapping import ForecastPanel, reconcile_immutable, reconcile_unconstrained
from src.simulate.scenarios import SimulationConfig, generate, simulation_hierarchy

logger = logging.getLogger(__name__)

AVERAGE_ROW = "Average"
BASE_CELL = "Base"

# level -> (model kind, fitted on seasonal structure)
PLANS: Dict[str, Dict[str, Tuple[str, bool]]] = {
    "ets": {
        "0": ("holt_winters_additive", True),
        "1": ("holt_winters_additive", True),
        "2": ("holt_winters_additive", True),
    },
    "ets_arima": {
        "0": ("holt_winters_additive", True),
        "1": ("ar", True),
        "2": ("ar", True),
    },
    # trend-free, non-seasonal smoothing below a well-specified top
    "misspecified_bottom": {
        "0": ("holt_winters_additive", True),
        "1": ("ses", False),
        "2": ("ses", False),
    },
}


@dataclass
class ExperimentResult:
    """Average per-level RMSE over replications, plus one record per replication"""

    table: pd.DataFrame
    records: List[Dict[str, Any]] = field(default_factory=list)
    dropped: int = 0

    @property
    def completed(self) -> int:
        return len(self.records) - self.dropped


def cell_names(weight_kinds: Sequence[str], include_nonneg: bool = False) -> List[str]:
    names = [BASE_CELL]
    for kind in weight_kinds:
        names += [f"{kind}:U", f"{kind}:C"]
        if include_nonneg:
            names += [f"{kind}:U+NN", f"{kind}:C+NN"]
    return names


def resolve_plan(plan) -> Dict[str, Tuple[str, bool]]:
    if isinstance(plan, dict):
        return plan
    if plan not in PLANS:
        raise ConfigurationError(f"Unknown plan: {plan} (expected one of {', '.join(PLANS)})")
    return PLANS[plan]


def base_forecasts(h: Hierarchy, train: np.ndarray, plan: Dict[str, Tuple[str, bool]], horizon: int,
                   season_length: int) -> Tuple[np.ndarray, ErrorSample]:
    """
    Fit one model per series; stack forecasts and in-sample errors

    Errors are cut to the common complete window: the last observations
    every model has a residual for.
    """
    forecasts = np.zeros((h.n, horizon))
    residuals = []
    for i, level in enumerate(h.levels):
        if level not in plan:
            raise ConfigurationError(f"Plan has no model for level {level}")
        kind, seasonal = plan[level]
        model = fit(kind, train[i], season_length=season_length if seasonal else None)
        forecasts[i] = predict(model, horizon)
        residuals.append(model.insample_errors)

    length = min(len(r) for r in residuals)
    errors = np.column_stack([r[len(r) - length:] for r in residuals])
    return forecasts, ErrorSample(errors, labels=list(h.labels))


def _level_scores(h: Hierarchy, actual: np.ndarray, forecast: np.ndarray) -> Dict[str, float]:
    report = accuracy_report(h, actual, forecast, metric="rmse")
    scores = dict(report.per_level)
    scores[AVERAGE_ROW] = report.overall
    return scores


def run_replication(cfg: SimulationConfig, replication: int, plan: Dict[str, Tuple[str, bool]],
                    weight_kinds: Sequence[str], immutable: Sequence[str],
                    include_nonneg: bool = False) -> Dict[str, Any]:
    """Simulate, forecast, reconcile and score one replication"""
    seed = cfg.seed + replication
    record: Dict[str, Any] = {"replication": replication, "seed": seed}
    h = simulation_hierarchy()
    try:
        data = generate(cfg, np.random.default_rng(seed))
        train, test = data[:, :-cfg.horizon], data[:, -cfg.horizon:]
        forecasts, errors = base_forecasts(h, train, plan, cfg.horizon, cfg.season_length)
        panel = ForecastPanel(forecasts, list(h.labels))

        scores = {BASE_CELL: _level_scores(h, test, forecasts)}
        for kind in weight_kinds:
            wm = estimate(kind, h, errors)
            variants = [("", False), ("+NN", True)] if include_nonneg else [("", False)]
            for suffix, nonneg in variants:
                unconstrained = reconcile_unconstrained(h, wm, panel, nonneg=nonneg)
                constrained = reconcile_immutable(h, immutable, wm, panel, nonneg=nonneg)
                scores[f"{kind}:U{suffix}"] = _level_scores(h, test, unconstrained.reconciled)
                scores[f"{kind}:C{suffix}"] = _level_scores(h, test, constrained.reconciled)
        record.update(status="ok", rmse=scores)
    except ReconciliationError as e:
        logger.warning(f"Replication {replication} dropped: {e}")
        record.update(status="dropped", error=str(e))
    return record


def run_experiment(cfg: SimulationConfig, base_model_plan="ets_arima",
                   weight_kinds: Sequence[str] = WEIGHT_KINDS, immutable: Sequence[str] = ("Total",),
                   include_nonneg: bool = False) -> ExperimentResult:
    """
    Average per-level RMSE over cfg.replications simulated hierarchies

    Replication r uses seed cfg.seed + r; with cfg.workers > 1 replications
    run on a thread pool and are collected in replication order.
    """
    cfg.validate()
    plan = resolve_plan(base_model_plan)
    unknown = [kind for kind in weight_kinds if kind not in WEIGHT_KINDS]
    if unknown:
        raise ConfigurationError(f"Unknown weight kinds: {unknown}")

    def task(replication: int) -> Dict[str, Any]:
        return run_replication(cfg, replication, plan, weight_kinds, immutable, include_nonneg)

    logger.info(f"Running {cfg.replications} replication(s) of scenario {cfg.scenario} "
                f"with {cfg.workers} worker(s)")
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(task, range(cfg.replications)))
    else:
        records = [task(r) for r in range(cfg.replications)]

    completed = [record for record in records if record["status"] == "ok"]
    dropped = len(records) - len(completed)
    cells = cell_names(weight_kinds, include_nonneg)
    rows = list(simulation_hierarchy().level_groups()) + [AVERAGE_ROW]

    table = pd.DataFrame(index=rows, columns=cells, dtype=float)
    table.index.name = "Level"
    if completed:
        for cell in cells:
            for row in rows:
                table.loc[row, cell] = np.mean([record["rmse"][cell][row] for record in completed])
    if dropped:
        logger.warning(f"{dropped} of {len(records)} replication(s) dropped")
    return ExperimentResult(table=table, records=records, dropped=dropped)


def constrained_win_share(result: ExperimentResult, kind: str, row: str = AVERAGE_ROW) -> Optional[float]:
    """Share of completed replications where the immutable cell scores at most the unconstrained cell"""
    completed = [record for record in result.records if record["status"] == "ok"]
    if not completed:
        return None
    wins = [record["rmse"][f"{kind}:C"][row] <= record["rmse"][f"{kind}:U"][row] for record in completed]
    return float(np.mean(wins))
