#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Base forecasting models: simple exponential smoothing, additive Holt-Winters and AR(p)
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.optimize

from src.core.errors import ForecastModelError

logger = logging.getLogger(__name__)

MODEL_KINDS = ("ses", "holt_winters_additive", "ar")
MAX_AR_ORDER = 3

# coarse grid for Holt-Winters before bounded refinement
HW_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)
HW_BETAS = (0.01, 0.1, 0.3)
HW_GAMMAS = (0.05, 0.2, 0.5, 0.8)


@dataclass
class SeriesModel:
    """A fitted base forecasting model"""

    kind: str
    params: Dict[str, Any]
    season_length: Optional[int] = None
    insample_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    state: Dict[str, Any] = field(default_factory=dict)

    @property
    def warmup(self) -> int:
        return int(self.state.get("warmup", 0))


def _as_series(series) -> np.ndarray:
    y = np.asarray(series, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ForecastModelError("Series contains missing or non-finite values")
    return y


# Simple exponential smoothing

def _ses_pass(y: np.ndarray, alpha: float, window: int = 1) -> Tuple[np.ndarray, float]:
    """Errors from observation window on; the level starts at the mean of the first window"""
    level = float(np.mean(y[:window]))
    errors = np.empty(len(y) - window)
    for t in range(window, len(y)):
        errors[t - window] = y[t] - level
        level += alpha * errors[t - window]
    return errors, level


def _fit_ses(y: np.ndarray, season: Optional[int] = None) -> SeriesModel:
    window = season or 1
    if len(y) < max(3, window + 2):
        raise ForecastModelError(f"ses needs at least {max(3, window + 2)} observations, got {len(y)}")

    def sse(alpha: float) -> float:
        return float(np.sum(_ses_pass(y, alpha, window)[0] ** 2))

    grid = np.linspace(0.0, 1.0, 21)
    scores = [sse(a) for a in grid]
    alpha = float(grid[int(np.argmin(scores))])
    best = min(scores)
    if best > 0.0:
        refined = scipy.optimize.minimize_scalar(sse, bounds=(max(0.0, alpha - 0.05), min(1.0, alpha + 0.05)),
                                                 method="bounded")
        if refined.success and refined.fun < best:
            alpha = float(refined.x)

    errors, level = _ses_pass(y, alpha, window)
    return SeriesModel(kind="ses", params={"alpha": alpha}, season_length=season, insample_errors=errors,
                       state={"level": level, "warmup": window})


# Additive Holt-Winters

def _hw_initial(y: np.ndarray, season: int) -> Tuple[float, float, np.ndarray]:
    first = y[:season].mean()
    trend = (y[season:2 * season].mean() - first) / season
    offsets = np.arange(season) - (season - 1) / 2.0
    seasonal = y[:season] - (first + trend * offsets)
    level = first + trend * (season - 1) / 2.0
    return level, trend, seasonal


def _hw_pass(y: np.ndarray, season: int, alpha: float, beta: float,
             gamma: float) -> Tuple[np.ndarray, float, float, np.ndarray]:
    level, trend, seasonal = _hw_initial(y, season)
    seasonal = seasonal.copy()
    errors = np.empty(len(y) - season)
    for t in range(season, len(y)):
        index = t % season
        errors[t - season] = y[t] - (level + trend + seasonal[index])
        previous = level
        level = alpha * (y[t] - seasonal[index]) + (1.0 - alpha) * (level + trend)
        trend = beta * (level - previous) + (1.0 - beta) * trend
        seasonal[index] = gamma * (y[t] - level) + (1.0 - gamma) * seasonal[index]
    return errors, level, trend, seasonal


def _fit_holt_winters(y: np.ndarray, season: Optional[int]) -> SeriesModel:
    if not season or season < 2:
        raise ForecastModelError("holt_winters_additive needs a season length of at least 2")
    if len(y) < 2 * season:
        raise ForecastModelError(f"holt_winters_additive needs at least {2 * season} observations, got {len(y)}")

    def sse(params) -> float:
        errors = _hw_pass(y, season, *np.clip(params, 0.0, 1.0))[0]
        return float(np.sum(errors ** 2))

    best_params, best = None, np.inf
    for params in itertools.product(HW_ALPHAS, HW_BETAS, HW_GAMMAS):
        score = sse(params)
        if score < best:
            best_params, best = params, score

    if best > 0.0 and len(y) > 2 * season:
        refined = scipy.optimize.minimize(sse, x0=np.array(best_params), method="L-BFGS-B",
                                          bounds=[(0.0, 1.0)] * 3, options={"maxiter": 50})
        if np.isfinite(refined.fun) and refined.fun < best:
            best_params = tuple(float(v) for v in np.clip(refined.x, 0.0, 1.0))

    alpha, beta, gamma = (float(v) for v in best_params)
    errors, level, trend, seasonal = _hw_pass(y, season, alpha, beta, gamma)
    return SeriesModel(
        kind="holt_winters_additive",
        params={"alpha": alpha, "beta": beta, "gamma": gamma},
        season_length=season,
        insample_errors=errors,
        state={"level": level, "trend": trend, "seasonal": seasonal, "next_index": len(y), "warmup": season},
    )


# Autoregression

def _lag_matrix(x: np.ndarray, p: int, start: int) -> np.ndarray:
    rows = len(x) - start
    columns = [np.ones(rows)] + [x[start - i:len(x) - i] for i in range(1, p + 1)]
    return np.column_stack(columns)


def _check_stationary(phi: np.ndarray) -> bool:
    if phi.size == 0:
        return True
    roots = np.roots(np.r_[-phi[::-1], 1.0])
    return bool(np.all(np.abs(roots) > 1.0))


def _fit_ar(y: np.ndarray, season: Optional[int], order: Optional[int]) -> SeriesModel:
    if np.ptp(y) == 0.0:
        logger.debug("Constant series, falling back to ses")
        return _fit_ses(y)

    work = y[season:] - y[:-season] if season else y
    if order is not None and not 0 <= order <= MAX_AR_ORDER:
        raise ForecastModelError(f"AR order must lie in 0..{MAX_AR_ORDER}, got {order}")
    needed = (order or 0) + 2
    if len(work) < max(needed, 2):
        raise ForecastModelError(f"ar needs at least {needed} usable observations, got {len(work)}")

    if np.ptp(work) == 0.0:
        p = 0
    elif order is not None:
        p = order
    else:
        p_max = min(MAX_AR_ORDER, (len(work) - 2) // 2)
        scores = []
        for candidate in range(p_max + 1):
            design = _lag_matrix(work, candidate, p_max)
            coef = np.linalg.lstsq(design, work[p_max:], rcond=None)[0]
            residual = work[p_max:] - design @ coef
            n = len(residual)
            sse = max(float(residual @ residual), np.finfo(float).tiny)
            scores.append(n * np.log(sse / n) + 2.0 * (candidate + 1))
        p = int(np.argmin(scores))

    design = _lag_matrix(work, p, p)
    coef = np.linalg.lstsq(design, work[p:], rcond=None)[0]
    errors = work[p:] - design @ coef
    phi = coef[1:]
    if not _check_stationary(phi):
        logger.warning(f"Fitted AR({p}) coefficients {np.round(phi, 4).tolist()} are not stationary")

    return SeriesModel(
        kind="ar",
        params={"intercept": float(coef[0]), "phi": phi.tolist(), "order": p},
        season_length=season,
        insample_errors=errors,
        state={
            "history": work[len(work) - p:].tolist() if p else [],
            "tail": y[-season:].tolist() if season else [],
            "warmup": p + (season or 0),
        },
    )


def fit(kind: str, series, season_length: Optional[int] = None, order: Optional[int] = None) -> SeriesModel:
    """
    Fit a base model by minimizing in-sample one-step squared error

    ses starts its level at the mean of the first season when given a
    season_length, at the first observation otherwise. ar takes an optional
    season_length, in which case it is fitted to the seasonal differences of
    the series, and an optional fixed order; otherwise the order is chosen by
    AIC on a common sample.
    """
    y = _as_series(series)
    if kind == "ses":
        model = _fit_ses(y, season_length)
    elif kind == "holt_winters_additive":
        model = _fit_holt_winters(y, season_length)
    elif kind == "ar":
        model = _fit_ar(y, season_length, order)
    else:
        raise ForecastModelError(f"Unknown model kind: {kind} (expected one of {', '.join(MODEL_KINDS)})")
    logger.debug(f"Fitted {model.kind} with {model.params}")
    return model


def predict(model: SeriesModel, horizon: int) -> np.ndarray:
    """Recursive point forecasts for steps 1..horizon"""
    if horizon < 1:
        raise ForecastModelError(f"Horizon must be positive, got {horizon}")
    steps = np.arange(1, horizon + 1)

    if model.kind == "ses":
        return np.full(horizon, float(model.state["level"]))

    if model.kind == "holt_winters_additive":
        seasonal = np.asarray(model.state["seasonal"], dtype=float)
        season = len(seasonal)
        index = (model.state["next_index"] + steps - 1) % season
        return model.state["level"] + steps * model.state["trend"] + seasonal[index]

    if model.kind == "ar":
        phi = np.asarray(model.params["phi"], dtype=float)
        intercept = float(model.params.get("intercept", 0.0))
        history = list(model.state.get("history", []))
        values = []
        for _ in steps:
            lags = history[::-1][:len(phi)]
            value = intercept + float(np.dot(phi, lags)) if len(phi) else intercept
            values.append(value)
            history.append(value)
        forecasts = np.array(values)

        tail = list(model.state.get("tail", []))
        if not tail:
            return forecasts
        # undo seasonal differencing
        levels = tail[:]
        for value in forecasts:
            levels.append(value + levels[-len(tail)])
        return np.array(levels[len(tail):])

    raise ForecastModelError(f"Unknown model kind: {model.kind}")
