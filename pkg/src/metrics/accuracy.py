#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Point forecast accuracy: RMSE, MASE and per-level reports
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.core.errors import InputFormatError
from src.hierarchy.structure import Hierarchy

logger = logging.getLogger(__name__)

METRICS = ("rmse", "mase")


def _pair(actual, forecast):
    actual = np.asarray(actual, dtype=float).ravel()
    forecast = np.asarray(forecast, dtype=float).ravel()
    if actual.shape != forecast.shape:
        raise InputFormatError(f"Length mismatch: {actual.size} actuals, {forecast.size} forecasts")
    if actual.size == 0:
        raise InputFormatError("Accuracy needs at least one forecast")
    return actual, forecast


def rmse(actual, forecast) -> float:
    """Root mean squared error"""
    actual, forecast = _pair(actual, forecast)
    return float(np.sqrt(np.mean((actual - forecast) ** 2)))


def mase(actual, forecast, insample, m: int = 1) -> float:
    """
    Mean absolute scaled error

    Out-of-sample MAE divided by the in-sample MAE of the seasonal naive
    forecast with lag m. A zero denominator gives +inf.
    """
    actual, forecast = _pair(actual, forecast)
    insample = np.asarray(insample, dtype=float).ravel()
    insample = insample[~np.isnan(insample)]
    if m < 1 or insample.size <= m:
        raise InputFormatError(f"MASE needs more than m={m} in-sample observations, got {insample.size}")

    scale = np.mean(np.abs(insample[m:] - insample[:-m]))
    error = np.mean(np.abs(actual - forecast))
    if scale == 0.0:
        logger.debug("MASE scale is zero (constant in-sample series), returning inf")
        return float("inf")
    return float(error / scale)


@dataclass
class AccuracyReport:
    """Per-series metric values with their per-level means"""

    metric: str
    per_series: Dict[str, float]
    per_level: Dict[str, float]
    overall: float
    excluded: int = 0
    excluded_series: List[str] = field(default_factory=list)


def accuracy_report(h: Hierarchy, actual: np.ndarray, forecast: np.ndarray, metric: str = "rmse",
                    insample: Optional[Sequence[Sequence[float]]] = None, m: int = 1) -> AccuracyReport:
    """
    Score every series and average per level

    Infinite MASE values are left out of the level means and counted in
    excluded. overall is the mean of the level means.
    """
    if metric not in METRICS:
        raise InputFormatError(f"Unknown metric: {metric} (expected one of {', '.join(METRICS)})")
    actual = np.atleast_2d(np.asarray(actual, dtype=float))
    forecast = np.atleast_2d(np.asarray(forecast, dtype=float))
    if actual.shape[0] != h.n or forecast.shape[0] != h.n:
        raise InputFormatError(f"Expected {h.n} series rows, got {actual.shape[0]} and {forecast.shape[0]}")
    if metric == "mase" and (insample is None or len(insample) != h.n):
        raise InputFormatError("MASE reports need one in-sample history per series")

    per_series: Dict[str, float] = {}
    for i, label in enumerate(h.labels):
        if metric == "rmse":
            per_series[label] = rmse(actual[i], forecast[i])
        else:
            per_series[label] = mase(actual[i], forecast[i], insample[i], m=m)

    excluded_series = [label for label, value in per_series.items() if not np.isfinite(value)]
    per_level: Dict[str, float] = {}
    for level, indices in h.level_groups().items():
        values = [per_series[h.labels[i]] for i in indices if np.isfinite(per_series[h.labels[i]])]
        per_level[level] = float(np.mean(values)) if values else float("nan")

    finite_levels = [v for v in per_level.values() if np.isfinite(v)]
    overall = float(np.mean(finite_levels)) if finite_levels else float("nan")
    if excluded_series:
        logger.info(f"{len(excluded_series)} series with infinite {metric} left out of level means")
    return AccuracyReport(metric=metric, per_series=per_series, per_level=per_level, overall=overall,
                          excluded=len(excluded_series), excluded_series=excluded_series)
