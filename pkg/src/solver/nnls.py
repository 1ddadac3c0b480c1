#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Constrained GLS: bounds by an active-set solver, general inequalities through it, and exhaustive oracles
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.core.errors import InfeasibleConstraintsError, SolverError
from src.hierarchy.structure import numerical_rank
from src.solver.gls import GlsProblem, solve_gls

logger = logging.getLogger(__name__)

KKT_TOLERANCE = 1e-8
ORACLE_MAX_BOUNDED = 12


@dataclass
class QpSolution:
    """Solution of a bound-constrained GLS problem"""

    x: np.ndarray
    active_set: Tuple[int, ...]
    kkt_residual: float
    iterations: int
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _as_mask(bound_mask: Sequence[bool], q: int) -> np.ndarray:
    mask = np.asarray(bound_mask, dtype=bool)
    if mask.shape != (q,):
        raise SolverError(f"Bound mask of shape {mask.shape} for {q} variables")
    return mask


def _dual_scale(design: np.ndarray, target: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(design.T @ target), initial=0.0)))


def kkt_residual(design: np.ndarray, target: np.ndarray, x: np.ndarray, bound_mask: np.ndarray) -> float:
    """
    Largest relative violation of the KKT conditions on a whitened problem

    Covers stationarity on free and strictly positive bounded coordinates,
    primal feasibility, multiplier sign and complementarity.
    """
    gradient = design.T @ (design @ x - target)
    scale = _dual_scale(design, target)
    x_scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))

    free = ~bound_mask
    violations = [0.0]
    if free.any():
        violations.append(np.max(np.abs(gradient[free])) / scale)
    if bound_mask.any():
        xb, gb = x[bound_mask], gradient[bound_mask]
        violations.append(np.max(np.maximum(0.0, -xb)) / x_scale)
        violations.append(np.max(np.maximum(0.0, -gb)) / scale)
        violations.append(np.max(np.abs(xb * gb)) / (scale * x_scale))
    return float(max(violations))


def _restricted_solve(design: np.ndarray, target: np.ndarray, passive: np.ndarray) -> np.ndarray:
    """Least squares over the passive columns by a Cholesky factorization of their Gram matrix"""
    z = np.zeros(design.shape[1])
    columns = np.flatnonzero(passive)
    if columns.size == 0:
        return z
    block = design[:, columns]
    try:
        factor = scipy.linalg.cho_factor(block.T @ block, lower=True)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"Rank-deficient design on the passive set {columns.tolist()}") from e
    z[columns] = scipy.linalg.cho_solve(factor, block.T @ target)
    return z


def solve_nnls(p: GlsProblem, bound_mask: Sequence[bool], max_iterations: Optional[int] = None) -> QpSolution:
    """
    Lawson-Hanson active-set method on the whitened problem

    Coordinates outside bound_mask are always passive (free). A bounded
    coordinate enters the passive set when its dual is positive, the
    smallest such index first, and leaves when a step along the passive
    solution drives it to zero.
    """
    if p.target.ndim != 1:
        raise SolverError("solve_nnls takes a single right-hand side")
    q = p.q
    mask = _as_mask(bound_mask, q)
    if max_iterations is None:
        max_iterations = 100 * max(q, 1)

    design, target = p.whitened()
    scale = _dual_scale(design, target)
    tolerance = 1e-12 * scale

    passive = ~mask
    x = _restricted_solve(design, target, passive)
    iterations = 0
    skipped = set()

    while True:
        dual = design.T @ (target - design @ x)
        entering = [j for j in np.flatnonzero(mask & ~passive) if dual[j] > tolerance and j not in skipped]
        if not entering:
            break

        iterations += 1
        if iterations > max_iterations:
            residual = kkt_residual(design, target, x, mask)
            raise SolverError(f"Active-set iteration cap {max_iterations} exceeded", best_iterate=x.copy(),
                              kkt_residual=residual)

        j = entering[0]
        passive[j] = True
        while True:
            z = _restricted_solve(design, target, passive)
            blocking = passive & mask & (z <= 0.0)
            if not blocking.any():
                if not np.array_equal(z, x):
                    skipped.clear()
                x = z
                break

            candidates = np.flatnonzero(blocking)
            gap = x[candidates] - z[candidates]
            steps = np.divide(x[candidates], gap, out=np.zeros_like(gap), where=gap > 0.0)
            alpha = float(np.min(steps))
            x = x + alpha * (z - x)
            x_scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
            leaving = passive & mask & (x <= 1e-12 * x_scale)
            if alpha == 0.0 and leaving[j] and np.count_nonzero(leaving) == 1:
                # entering index cannot move off its bound
                skipped.add(j)
            x[leaving] = 0.0
            passive[leaving] = False

            iterations += 1
            if iterations > max_iterations:
                residual = kkt_residual(design, target, x, mask)
                raise SolverError(f"Active-set iteration cap {max_iterations} exceeded", best_iterate=x.copy(),
                                  kkt_residual=residual)

    x[mask & (x < 0.0)] = 0.0
    residual = kkt_residual(design, target, x, mask)
    active = tuple(int(i) for i in np.flatnonzero(mask & ~passive))
    multipliers = 2.0 * design.T @ (design @ x - target)
    if residual > KKT_TOLERANCE:
        logger.warning(f"NNLS finished with KKT residual {residual:.3e}")
    logger.debug(f"NNLS converged in {iterations} pivots, {len(active)} active bounds")
    return QpSolution(x=x, active_set=active, kkt_residual=residual, iterations=iterations,
                      multipliers=multipliers)


def _pattern_solution(design: np.ndarray, target: np.ndarray, mask: np.ndarray,
                      pattern: Tuple[int, ...]) -> np.ndarray:
    passive = np.ones(design.shape[1], dtype=bool)
    passive[list(pattern)] = False
    return _restricted_solve(design, target, passive)


def kkt_patterns(p: GlsProblem, bound_mask: Sequence[bool]) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
    """Every active-set pattern whose equality-restricted solution satisfies the KKT conditions"""
    mask = _as_mask(bound_mask, p.q)
    bounded = [int(i) for i in np.flatnonzero(mask)]
    if len(bounded) > ORACLE_MAX_BOUNDED:
        raise SolverError(f"Oracle limited to {ORACLE_MAX_BOUNDED} bounded coordinates, got {len(bounded)}")

    design, target = p.whitened()
    satisfying = []
    for size in range(len(bounded) + 1):
        for pattern in itertools.combinations(bounded, size):
            x = _pattern_solution(design, target, mask, pattern)
            if kkt_residual(design, target, x, mask) <= KKT_TOLERANCE:
                satisfying.append((pattern, x))
    return satisfying


def oracle_enumerate(p: GlsProblem, bound_mask: Sequence[bool]) -> QpSolution:
    """Exhaustive search over all 2^k active-set patterns"""
    mask = _as_mask(bound_mask, p.q)
    if not mask.any():
        x = solve_gls(p)
        design, target = p.whitened()
        return QpSolution(x=x, active_set=(), kkt_residual=kkt_residual(design, target, x, mask), iterations=1,
                          multipliers=2.0 * design.T @ (design @ x - target))

    satisfying = kkt_patterns(p, mask)
    if not satisfying:
        raise SolverError("No active-set pattern satisfies the KKT conditions")

    pattern, x = satisfying[0]
    design, target = p.whitened()
    return QpSolution(
        x=x,
        active_set=tuple(pattern),
        kkt_residual=kkt_residual(design, target, x, mask),
        iterations=2 ** int(mask.sum()),
        multipliers=2.0 * design.T @ (design @ x - target),
    )


def _as_constraints(constraints: np.ndarray, lower: np.ndarray, q: int) -> Tuple[np.ndarray, np.ndarray]:
    constraints = np.asarray(constraints, dtype=float).reshape(-1, q)
    lower = np.asarray(lower, dtype=float).ravel()
    if lower.shape != (constraints.shape[0],):
        raise SolverError(f"{lower.size} lower bounds for {constraints.shape[0]} constraint rows")
    return constraints, lower


def inequality_kkt_residual(design: np.ndarray, target: np.ndarray, x: np.ndarray, constraints: np.ndarray,
                            lower: np.ndarray, multipliers: np.ndarray) -> float:
    """
    Largest relative KKT violation for min |design x - target|^2 / 2 subject to constraints x >= lower

    multipliers belong to the halved objective.
    """
    gradient = design.T @ (design @ x - target)
    scale = _dual_scale(design, target)
    values = constraints @ x
    slack = values - lower
    slack_scale = max(1.0, float(np.max(np.abs(lower), initial=0.0)), float(np.max(np.abs(values), initial=0.0)))

    violations = [float(np.max(np.abs(gradient - constraints.T @ multipliers), initial=0.0)) / scale]
    if slack.size:
        violations.append(float(np.max(np.maximum(0.0, -slack))) / slack_scale)
        violations.append(float(np.max(np.maximum(0.0, -multipliers))) / scale)
        violations.append(float(np.max(np.abs(multipliers * slack))) / (scale * slack_scale))
    return max(violations)


def solve_inequality_gls(p: GlsProblem, constraints: np.ndarray, lower: np.ndarray,
                         max_iterations: Optional[int] = None) -> QpSolution:
    """
    GLS subject to the linear inequalities constraints x >= lower

    With design = Q R the substitution y = R x - Q' target turns the problem
    into finding the shortest y with (constraints R^-1) y >= h, and that in
    turn is a non-negative least-squares problem in the constraint
    multipliers. active_set lists the constraint rows carrying a positive
    multiplier. Raises InfeasibleConstraintsError when no x satisfies the rows.
    """
    if p.target.ndim != 1:
        raise SolverError("solve_inequality_gls takes a single right-hand side")
    q = p.q
    constraints, lower = _as_constraints(constraints, lower, q)
    m = constraints.shape[0]

    design, target = p.whitened()
    rank = numerical_rank(design)
    if rank < q:
        raise SolverError(f"Rank-deficient design: rank {rank} < {q} columns")
    q_factor, r_factor = scipy.linalg.qr(design, mode="economic")
    x_free = scipy.linalg.solve_triangular(r_factor, q_factor.T @ target, lower=False)

    values = constraints @ x_free
    tolerance = 1e-12 * max(1.0, float(np.max(np.abs(lower), initial=0.0)),
                            float(np.max(np.abs(values), initial=0.0)))
    if np.all(values - lower >= -tolerance):
        multipliers = np.zeros(m)
        residual = inequality_kkt_residual(design, target, x_free, constraints, lower, multipliers)
        return QpSolution(x=x_free, active_set=(), kkt_residual=residual, iterations=0, multipliers=multipliers)

    # rows of constraints R^-1, then the offsets the shortest y has to clear
    g = scipy.linalg.solve_triangular(r_factor, constraints.T, trans="T", lower=False)
    h = lower - values
    stacked = np.vstack([g, h[None, :]])
    unit = np.zeros(q + 1)
    unit[-1] = 1.0
    if max_iterations is None:
        max_iterations = 100 * max(m, 1)
    dual = solve_nnls(GlsProblem(stacked, unit, np.eye(q + 1)), np.ones(m, dtype=bool), max_iterations)

    # equals |stacked u - unit|^2 at the optimum; zero only when the rows cannot all hold
    denominator = 1.0 - float(h @ dual.x)
    if denominator <= 1e-10:
        raise InfeasibleConstraintsError(f"{m} inequality constraints admit no solution")

    halved = dual.x / denominator
    x = x_free + scipy.linalg.solve_triangular(r_factor, g @ halved, lower=False)
    residual = inequality_kkt_residual(design, target, x, constraints, lower, halved)
    if residual > KKT_TOLERANCE:
        logger.warning(f"Inequality-constrained GLS finished with KKT residual {residual:.3e}")
    active = tuple(int(i) for i in np.flatnonzero(dual.x > 0.0))
    logger.debug(f"Inequality-constrained GLS: {m} rows, {len(active)} active, {dual.iterations} pivots")
    return QpSolution(x=x, active_set=active, kkt_residual=residual, iterations=dual.iterations,
                      multipliers=2.0 * halved)


def _equality_solution(design: np.ndarray, target: np.ndarray, rows: np.ndarray,
                       values: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Least squares with rows x = values held as equalities, or None for dependent rows"""
    q, k = design.shape[1], rows.shape[0]
    if k and numerical_rank(rows) < k:
        return None
    system = np.block([[design.T @ design, rows.T], [rows, np.zeros((k, k))]])
    try:
        solution = scipy.linalg.solve(system, np.concatenate([design.T @ target, values]))
    except np.linalg.LinAlgError:
        return None
    return solution[:q], -solution[q:]


def oracle_inequality(p: GlsProblem, constraints: np.ndarray, lower: np.ndarray) -> QpSolution:
    """Exhaustive search over subsets of constraint rows held as equalities"""
    q = p.q
    constraints, lower = _as_constraints(constraints, lower, q)
    m = constraints.shape[0]
    if m > ORACLE_MAX_BOUNDED:
        raise SolverError(f"Oracle limited to {ORACLE_MAX_BOUNDED} constraint rows, got {m}")

    design, target = p.whitened()
    patterns = 0
    for size in range(min(m, q) + 1):
        for pattern in itertools.combinations(range(m), size):
            patterns += 1
            rows = list(pattern)
            solved = _equality_solution(design, target, constraints[rows], lower[rows])
            if solved is None:
                continue
            x, pattern_multipliers = solved
            multipliers = np.zeros(m)
            multipliers[rows] = pattern_multipliers
            residual = inequality_kkt_residual(design, target, x, constraints, lower, multipliers)
            if residual <= KKT_TOLERANCE:
                return QpSolution(x=x, active_set=tuple(pattern), kkt_residual=residual, iterations=patterns,
                                  multipliers=2.0 * multipliers)
    raise SolverError("No subset of constraint rows satisfies the KKT conditions")
