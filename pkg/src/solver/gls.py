#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Generalized least squares through Cholesky whitening
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from src.core.errors import SolverError
from src.hierarchy.structure import numerical_rank

logger = logging.getLogger(__name__)

NORMAL_EQUATION_TOLERANCE = 1e-8


@dataclass
class GlsProblem:
    """
    Minimize (target - design x)' weight^-1 (target - design x)

    weight is the error covariance; it is only ever used through its
    Cholesky factor. target may hold several right-hand sides as columns.
    """

    design: np.ndarray
    target: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        self.target = np.asarray(self.target, dtype=float)
        self.weight = np.asarray(self.weight, dtype=float)
        p = self.design.shape[0]
        if self.target.shape[0] != p:
            raise SolverError(f"Target has {self.target.shape[0]} rows, design has {p}")
        if self.weight.shape != (p, p):
            raise SolverError(f"Weight of shape {self.weight.shape} for a design with {p} rows")

    @property
    def q(self) -> int:
        return self.design.shape[1]

    def cholesky_factor(self) -> np.ndarray:
        try:
            return scipy.linalg.cholesky(self.weight, lower=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SolverError(f"Weight matrix is not positive definite: {e}") from e

    def whitened(self) -> Tuple[np.ndarray, np.ndarray]:
        """Design and target premultiplied by L^-1, where weight = L L'"""
        factor = self.cholesky_factor()
        design = scipy.linalg.solve_triangular(factor, self.design, lower=True)
        target = scipy.linalg.solve_triangular(factor, self.target, lower=True)
        return design, target

    def objective(self, x: np.ndarray) -> float:
        design, target = self.whitened()
        residual = target - design @ np.asarray(x, dtype=float)
        return float(np.sum(residual ** 2))

    def normal_residual(self, x: np.ndarray) -> float:
        """Relative infinity norm of design' weight^-1 (target - design x)"""
        design, target = self.whitened()
        gradient = design.T @ (target - design @ np.asarray(x, dtype=float))
        scale = max(np.max(np.abs(design.T @ target), initial=0.0), np.finfo(float).tiny)
        return float(np.max(np.abs(gradient), initial=0.0) / scale)


def solve_gls(p: GlsProblem) -> np.ndarray:
    """Solve the GLS problem by QR on the whitened system"""
    if p.q == 0:
        return np.zeros((0,) + p.target.shape[1:])

    design, target = p.whitened()
    rank = numerical_rank(design)
    if rank < p.q:
        raise SolverError(f"Rank-deficient design: rank {rank} < {p.q} columns")

    q_factor, r_factor = scipy.linalg.qr(design, mode="economic")
    x = scipy.linalg.solve_triangular(r_factor, q_factor.T @ target, lower=False)
    logger.debug(f"GLS solved: design {p.design.shape}, {1 if x.ndim == 1 else x.shape[1]} right-hand side(s)")
    return x


def gls_operator(design: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """The q x p matrix (X' W^-1 X)^-1 X' W^-1 mapping a target to its GLS solution"""
    design = np.atleast_2d(np.asarray(design, dtype=float))
    return solve_gls(GlsProblem(design, np.eye(design.shape[0]), weight))
