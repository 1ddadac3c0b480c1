#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Weight matrices estimated from base forecast error history
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.errors import EstimationError
from src.hierarchy.structure import BasisSelection, Hierarchy

logger = logging.getLogger(__name__)

WEIGHT_KINDS = ("ols", "wls_s", "wls_v", "mint_shrink")

# zero variances are replaced by the smallest positive variance times this
ZERO_VARIANCE_FACTOR = 1e-3
PD_FLOOR = 1e-10
PD_JITTER = 1e-8


@dataclass
class ErrorSample:
    """In-sample one-step base forecast errors, T_e x n, NaN marks a missing entry"""

    errors: np.ndarray
    labels: Optional[List[str]] = None

    def __post_init__(self):
        errors = np.array(self.errors, dtype=float)
        if errors.ndim == 1:
            errors = errors[:, None]
        if errors.ndim != 2 or errors.shape[0] < 1:
            raise EstimationError(f"Error history must be a non-empty T x n matrix, got shape {errors.shape}")
        if np.isinf(errors).any():
            raise EstimationError("Error history contains non-finite entries")
        self.errors = errors
        if self.labels is not None and len(self.labels) != errors.shape[1]:
            raise EstimationError(f"{len(self.labels)} labels for {errors.shape[1]} error columns")

    @property
    def n(self) -> int:
        return self.errors.shape[1]

    @property
    def series_counts(self) -> np.ndarray:
        """Number of valid observations per series"""
        return np.sum(~np.isnan(self.errors), axis=0)

    def conditioned_on(self, row_mask: Sequence[bool]) -> "ErrorSample":
        """Keep only the time points selected by row_mask"""
        mask = np.asarray(row_mask, dtype=bool)
        if mask.shape != (self.errors.shape[0],):
            raise EstimationError(f"Row mask of shape {mask.shape} for {self.errors.shape[0]} error rows")
        if not mask.any():
            raise EstimationError("Row mask selects no error observations")
        return ErrorSample(self.errors[mask], labels=self.labels)


@dataclass
class WeightMatrix:
    """Symmetric positive definite error covariance estimate used as the GLS weight"""

    w: np.ndarray
    kind: str
    shrink_lambda: Optional[float] = None
    jitter: float = 0.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.w.shape[0]


def _ensure_positive_definite(w: np.ndarray) -> Tuple[np.ndarray, float]:
    """Symmetrize and add a ridge when the smallest eigenvalue is below the floor"""
    w = 0.5 * (w + w.T)
    n = w.shape[0]
    scale = np.trace(w) / n
    if not np.isfinite(scale) or scale <= 0.0:
        raise EstimationError("Weight matrix has a non-positive trace")

    smallest = float(np.linalg.eigvalsh(w)[0])
    if smallest >= PD_FLOOR * scale:
        return w, 0.0

    jitter = max(PD_JITTER * scale, -smallest + PD_JITTER * scale)
    logger.info(f"Weight matrix not positive definite (min eigenvalue {smallest:.3e}), adding jitter {jitter:.3e}")
    return w + jitter * np.eye(n), jitter


def _series_name(sample: ErrorSample, i: int) -> str:
    return sample.labels[i] if sample.labels else str(i)


def _checked_variances(sample: ErrorSample, diagnostics: Dict[str, Any]) -> np.ndarray:
    counts = sample.series_counts
    short = [_series_name(sample, i) for i in np.flatnonzero(counts < 2)]
    if short:
        raise EstimationError(f"Insufficient error history: series {short} have fewer than 2 observations")

    variances = np.nanvar(sample.errors, axis=0, ddof=1)
    zero = variances <= 0.0
    if zero.any():
        positive = variances[~zero]
        # with no positive variance to scale from, fall back to unit weights
        replacement = positive.min() * ZERO_VARIANCE_FACTOR if positive.size else 1.0
        names = [_series_name(sample, i) for i in np.flatnonzero(zero)]
        logger.warning(f"Zero error variance for {names}, replaced with {replacement:.6g}")
        diagnostics.setdefault("warnings", []).append(f"zero variance replaced for {names}")
        diagnostics["zero_variance_series"] = names
        variances = np.where(zero, replacement, variances)

    diagnostics["series_counts"] = counts.tolist()
    return variances


def shrinkage_intensity(errors: np.ndarray) -> float:
    """
    Schafer-Strimmer intensity for shrinking toward the diagonal

    Works on pairwise-complete observations: each correlation and its
    estimated variance use only the time points where both series are
    observed. Returns 1.0 when every off-diagonal correlation is zero.
    """
    x = np.asarray(errors, dtype=float)
    present = ~np.isnan(x)
    centered = x - np.nanmean(x, axis=0)
    sd = np.nanstd(x, axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    xs = np.where(present, centered / sd, 0.0)

    mask = present.astype(float)
    pairs = mask.T @ mask
    usable = pairs >= 2
    safe_pairs = np.where(usable, pairs, 2.0)

    w_bar = (xs.T @ xs) / safe_pairs
    correlation = safe_pairs / (safe_pairs - 1.0) * w_bar
    xs2 = xs ** 2
    variance = safe_pairs / (safe_pairs - 1.0) ** 3 * ((xs2.T @ xs2) - safe_pairs * w_bar ** 2)

    off_diagonal = usable & ~np.eye(x.shape[1], dtype=bool)
    denominator = np.sum(correlation[off_diagonal] ** 2)
    if denominator <= 0.0:
        return 1.0
    return float(np.clip(np.sum(variance[off_diagonal]) / denominator, 0.0, 1.0))


def _pairwise_covariance(sample: ErrorSample, variances: np.ndarray, diagnostics: Dict[str, Any]) -> np.ndarray:
    cov = pd.DataFrame(sample.errors).cov(min_periods=2).to_numpy()
    missing = np.isnan(cov)
    if missing.any():
        logger.warning(f"{int(missing.sum()) // 2} series pairs share fewer than 2 observations, covariance set to 0")
        diagnostics.setdefault("warnings", []).append("pairs without overlap treated as uncorrelated")
        cov = np.where(missing, 0.0, cov)
    np.fill_diagonal(cov, variances)
    return cov


def estimate(kind: str, h: Optional[Hierarchy] = None, errors: Optional[ErrorSample] = None,
             shrink_lambda: Optional[float] = None) -> WeightMatrix:
    """Estimate the weight matrix of the given kind"""
    if kind not in WEIGHT_KINDS:
        raise EstimationError(f"Unknown weight kind: {kind} (expected one of {', '.join(WEIGHT_KINDS)})")

    if kind == "ols":
        if h is None and errors is None:
            raise EstimationError("ols needs a hierarchy or an error sample to size W")
        n = h.n if h is not None else errors.n
        return WeightMatrix(w=np.eye(n), kind=kind)

    if kind == "wls_s":
        if h is None:
            raise EstimationError("wls_s requires the hierarchy")
        counts = np.abs(h.bottom_s_matrix).sum(axis=1)
        return WeightMatrix(w=np.diag(counts), kind=kind)

    if errors is None:
        raise EstimationError(f"{kind} requires an error history")
    if h is not None and errors.n != h.n:
        raise EstimationError(f"Error history has {errors.n} series, hierarchy has {h.n}")

    diagnostics: Dict[str, Any] = {}
    variances = _checked_variances(errors, diagnostics)

    if kind == "wls_v":
        w, jitter = _ensure_positive_definite(np.diag(variances))
        return WeightMatrix(w=w, kind=kind, jitter=jitter, diagnostics=diagnostics)

    sample_cov = _pairwise_covariance(errors, variances, diagnostics)
    if shrink_lambda is None:
        shrink_lambda = shrinkage_intensity(errors.errors)
    elif not 0.0 <= shrink_lambda <= 1.0:
        raise EstimationError(f"Shrinkage intensity {shrink_lambda} outside [0, 1]")

    shrunk = shrink_lambda * np.diag(variances) + (1.0 - shrink_lambda) * sample_cov
    w, jitter = _ensure_positive_definite(shrunk)
    logger.debug(f"mint_shrink intensity {shrink_lambda:.4f}, jitter {jitter:.3e}")
    return WeightMatrix(w=w, kind=kind, shrink_lambda=float(shrink_lambda), jitter=jitter,
                        diagnostics=diagnostics)


def restrict_to_mutable(wm: WeightMatrix, sel: BasisSelection) -> WeightMatrix:
    """Principal submatrix of W over the mutable series, ordered (w, v)"""
    n = sel.hierarchy.n
    if wm.w.shape != (n, n):
        raise EstimationError(f"Weight matrix of shape {wm.w.shape} for a hierarchy of {n} series")
    index = list(sel.mutable)
    return WeightMatrix(
        w=wm.w[np.ix_(index, index)].copy(),
        kind=wm.kind,
        shrink_lambda=wm.shrink_lambda,
        jitter=wm.jitter,
        diagnostics=dict(wm.diagnostics),
    )
