#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Strategies for choosing which series to hold immutable
"""

import logging
from typing import List, Mapping, Optional

import pandas as pd

from src.core.errors import ConfigurationError

logger = logging.getLogger(__name__)


def intermittent_series(history: pd.DataFrame, zero_share: float = 0.6, window: Optional[int] = None) -> List[str]:
    """
    Series whose recent history is mostly zeros

    history has one row per series and one column per time point. A series
    qualifies when at least zero_share of its last window observed values
    are exactly zero.
    """
    if not 0.0 < zero_share <= 1.0:
        raise ConfigurationError(f"zero_share must lie in (0, 1], got {zero_share}")
    if window is not None and window < 1:
        raise ConfigurationError(f"window must be positive, got {window}")

    recent = history if window is None else history.iloc[:, -window:]
    observed = recent.notna().sum(axis=1)
    zeros = (recent == 0).sum(axis=1)
    share = zeros / observed.where(observed > 0)
    selected = [str(label) for label in share.index[share.fillna(0.0) >= zero_share]]
    logger.info(f"{len(selected)} of {len(history)} series are intermittent (zero share >= {zero_share})")
    return selected


def long_history_series(counts: Mapping[str, int], min_obs: int) -> List[str]:
    """Series with at least min_obs training observations, in the given order"""
    if min_obs < 1:
        raise ConfigurationError(f"min_obs must be positive, got {min_obs}")
    selected = [label for label, count in counts.items() if count >= min_obs]
    logger.info(f"{len(selected)} of {len(counts)} series have at least {min_obs} observations")
    return selected
