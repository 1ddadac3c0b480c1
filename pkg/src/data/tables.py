#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
CSV readers and writers for forecast panels, error histories and result tables
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.core.errors import InputFormatError
from src.estimation.covariance import ErrorSample
from src.reconcile.mapping import ForecastPanel

logger = logging.getLogger(__name__)

SERIES_COLUMN = "series"
DEFAULT_DIGITS = 12

PathLike = Union[str, Path]


def _read_series_table(path: PathLike) -> pd.DataFrame:
    """Rows keyed by the series column, numeric values, empty cells as NaN"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputFormatError(f"Cannot read {path}: {e}") from e

    if frame.columns.empty or frame.columns[0].strip() != SERIES_COLUMN:
        raise InputFormatError(f"{path}: first column must be '{SERIES_COLUMN}'")
    labels = frame.iloc[:, 0].str.strip()
    if labels.duplicated().any():
        raise InputFormatError(f"{path}: duplicate series {sorted(set(labels[labels.duplicated()]))}")

    values = frame.iloc[:, 1:].apply(lambda column: column.str.strip()).replace("", np.nan)
    try:
        values = values.apply(pd.to_numeric)
    except (ValueError, TypeError) as e:
        raise InputFormatError(f"{path}: non-numeric entry ({e})") from e
    values.index = labels
    values.columns = [str(c).strip() for c in values.columns]
    return values.astype(float)


def read_forecasts(path: PathLike) -> ForecastPanel:
    """Forecast CSV with header series,h1,...,hH"""
    values = _read_series_table(path)
    if values.shape[1] == 0:
        raise InputFormatError(f"{path}: no horizon columns")
    if values.isna().any().any():
        raise InputFormatError(f"{path}: missing base forecasts")
    logger.info(f"Read {values.shape[0]} series x {values.shape[1]} horizon(s) from {path}")
    return ForecastPanel(values.to_numpy(), list(values.index))


def read_errors(path: PathLike, labels: Optional[Sequence[str]] = None) -> ErrorSample:
    """Error history CSV with header series,t1,...; returned as T x n, columns in label order"""
    values = _read_series_table(path)
    if labels is not None:
        missing = [label for label in labels if label not in values.index]
        extra = [label for label in values.index if label not in labels]
        if missing or extra:
            raise InputFormatError(f"{path}: error history does not match the hierarchy "
                                   f"(missing {missing}, unknown {extra})")
        values = values.loc[list(labels)]
    logger.info(f"Read error history of {values.shape[0]} series x {values.shape[1]} time points from {path}")
    return ErrorSample(values.to_numpy().T, labels=list(values.index))


def read_history(path: PathLike) -> pd.DataFrame:
    """Series history in the error history layout, one row per series"""
    return _read_series_table(path)


def panel_frame(labels: Sequence[str], values: np.ndarray, columns: Optional[List[str]] = None) -> pd.DataFrame:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if columns is None:
        columns = [f"h{i}" for i in range(1, values.shape[1] + 1)]
    frame = pd.DataFrame(values, index=pd.Index(list(labels), name=SERIES_COLUMN), columns=columns)
    return frame


def write_panel(path: PathLike, labels: Sequence[str], values: np.ndarray, columns: Optional[List[str]] = None,
                digits: int = DEFAULT_DIGITS):
    """Write a series x horizon panel with the given significant digits"""
    panel_frame(labels, values, columns).to_csv(path, float_format=f"%.{digits}g")
    logger.info(f"Wrote {len(labels)} series to {path}")


def write_table(path: PathLike, table: pd.DataFrame, digits: int = DEFAULT_DIGITS):
    table.to_csv(path, float_format=f"%.{digits}g")
    logger.info(f"Wrote table {table.shape} to {path}")
