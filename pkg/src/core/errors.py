#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Exception hierarchy shared by the library and the command line
"""

from typing import Optional

import numpy as np


class ReconciliationError(ValueError):
    """Base class for all errors raised by this package; a ValueError for callers that catch those"""


class HierarchyError(ReconciliationError):
    """Malformed hierarchy definition (cycles, duplicates, unknown dimensions)"""


class InvalidBasisError(ReconciliationError):
    """A candidate basis is malformed or its rows of S are singular"""


class EstimationError(ReconciliationError):
    """The error history cannot support the requested weight estimator"""


class SolverError(ReconciliationError):
    """A least-squares or quadratic programming solve failed"""

    def __init__(self, message: str, best_iterate: Optional[np.ndarray] = None,
                 kkt_residual: Optional[float] = None):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.kkt_residual = kkt_residual


class ForecastModelError(ReconciliationError):
    """A base forecasting model cannot be fitted to the given series"""


class InputFormatError(ReconciliationError):
    """An input file cannot be parsed or does not line up with the hierarchy"""


class ConfigurationError(ReconciliationError):
    """Invalid run or simulation configuration"""


class InfeasibleConstraintsError(SolverError):
    """No point satisfies the linear inequality constraints"""
