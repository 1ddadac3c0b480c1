#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Reconciliation mappings y~ = S G y^: unconstrained, immutable and non-negative
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import InfeasibleConstraintsError, InputFormatError, ReconciliationError
from src.estimation.covariance import WeightMatrix, restrict_to_mutable
from src.hierarchy.structure import Hierarchy, partition, rebase
from src.solver.gls import GlsProblem, gls_operator, solve_gls
from src.solver.nnls import solve_inequality_gls

logger = logging.getLogger(__name__)


@dataclass
class ForecastPanel:
    """Base forecasts, one row per series and one column per horizon"""

    base: np.ndarray
    labels: List[str]

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        if base.ndim == 1:
            base = base[:, None]
        if base.ndim != 2:
            raise InputFormatError(f"Base forecasts must be an n x H matrix, got shape {base.shape}")
        if base.shape[0] != len(self.labels):
            raise InputFormatError(f"{len(self.labels)} labels for {base.shape[0]} forecast rows")
        if len(set(self.labels)) != len(self.labels):
            raise InputFormatError("Duplicate series labels in forecast panel")
        if not np.all(np.isfinite(base)):
            raise InputFormatError("Base forecasts contain non-finite entries")
        self.base = base
        self.labels = list(self.labels)

    @property
    def horizon(self) -> int:
        return self.base.shape[1]

    def aligned_to(self, h: Hierarchy) -> "ForecastPanel":
        """Rows reordered to the hierarchy's label order"""
        if self.labels == list(h.labels):
            return self
        missing = [label for label in h.labels if label not in self.labels]
        extra = [label for label in self.labels if label not in h.labels]
        if missing or extra:
            raise InputFormatError(f"Forecast labels do not match the hierarchy (missing {missing}, unknown {extra})")
        position = {label: i for i, label in enumerate(self.labels)}
        order = [position[label] for label in h.labels]
        return ForecastPanel(self.base[order], list(h.labels))


@dataclass
class ReconciliationResult:
    """Reconciled forecasts with the realized mapping and diagnostics"""

    reconciled: np.ndarray
    labels: List[str]
    g_matrix: Optional[np.ndarray]
    basis_indices: Tuple[int, ...]
    coherence_residual: float
    immutability_residual: float = 0.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def warnings(self) -> List[str]:
        return self.diagnostics.setdefault("warnings", [])

    def as_panel(self) -> ForecastPanel:
        return ForecastPanel(self.reconciled.copy(), list(self.labels))


def _check_weight(h: Hierarchy, wm: WeightMatrix):
    if wm.w.shape != (h.n, h.n):
        raise ReconciliationError(f"Weight matrix of shape {wm.w.shape} for a hierarchy of {h.n} series")


def _solve_columns(design: np.ndarray, targets: np.ndarray, weight: np.ndarray, constraints: np.ndarray,
                   lowers: np.ndarray, labels: Sequence[str], fallback_rows: Optional[Sequence[int]] = None
                   ) -> Tuple[np.ndarray, List[List[str]], List[int]]:
    """
    Per-horizon solve subject to constraints x >= lowers[:, t]; labels name the constraint rows

    When a horizon is infeasible and fallback_rows is given, only those rows
    are kept for it; such horizons are returned as the third element.
    """
    solutions = np.zeros((design.shape[1], targets.shape[1]))
    active_sets: List[List[str]] = []
    relaxed: List[int] = []
    for t in range(targets.shape[1]):
        problem = GlsProblem(design, targets[:, t], weight)
        try:
            solution = solve_inequality_gls(problem, constraints, lowers[:, t])
            rows = list(range(constraints.shape[0]))
        except InfeasibleConstraintsError:
            if fallback_rows is None:
                raise
            rows = list(fallback_rows)
            solution = solve_inequality_gls(problem, constraints[rows], lowers[rows, t])
            relaxed.append(t)
        solutions[:, t] = solution.x
        active_sets.append([labels[rows[i]] for i in solution.active_set])
    return solutions, active_sets, relaxed


def reconcile_unconstrained(h: Hierarchy, wm: WeightMatrix, panel: ForecastPanel,
                            nonneg: bool = False) -> ReconciliationResult:
    """
    Standard reconciliation minimizing (y^ - S b)' W^-1 (y^ - S b)

    With nonneg every reconciled series S b is bounded below by zero and
    the problem is solved per horizon; the realized G is then reported only
    when no constraint is active at any horizon.
    """
    _check_weight(h, wm)
    panel = panel.aligned_to(h)
    s = h.s_matrix
    diagnostics: Dict[str, Any] = {
        "method": "unconstrained",
        "weights": wm.kind,
        "basis": h.basis_labels,
        "nonneg": nonneg,
        "warnings": list(wm.diagnostics.get("warnings", [])),
    }

    g_matrix = gls_operator(s, wm.w)
    if nonneg:
        basis, active_sets, _ = _solve_columns(s, panel.base, wm.w, s, np.zeros_like(panel.base), list(h.labels))
        diagnostics["active_sets"] = active_sets
        if any(active_sets):
            g_matrix = None
    else:
        basis = g_matrix @ panel.base

    reconciled = s @ basis
    result = ReconciliationResult(
        reconciled=reconciled,
        labels=list(h.labels),
        g_matrix=g_matrix,
        basis_indices=h.basis_indices,
        coherence_residual=h.coherence_residual(reconciled),
        diagnostics=diagnostics,
    )
    if g_matrix is not None:
        diagnostics["g_s_residual"] = g_matrix_check(result, h)
    logger.info(f"Unconstrained reconciliation ({wm.kind}) of {panel.horizon} horizon(s), "
                f"coherence residual {result.coherence_residual:.3e}")
    return result


def reconcile_immutable(h: Hierarchy, immutable: Sequence[str], wm: WeightMatrix, panel: ForecastPanel,
                        nonneg: bool = False, preferred_order: Optional[Sequence[int]] = None) -> ReconciliationResult:
    """
    Reconcile while holding the immutable series at their base forecasts

    The hierarchy is re-expressed on a basis (v, u) holding the immutable
    series u last. Determined series w then satisfy w = S1 v + S2 u, so the
    mutable part reduces to a GLS problem in v with design [S1; I] and
    target (w^ - S2 u^, v^). With nonneg, v and the determined series
    S1 v + S2 u^ are bounded below by zero; a horizon whose immutable
    forecasts admit no non-negative completion keeps only the bound on v.
    preferred_order is handed to partition to steer basis completion.
    """
    _check_weight(h, wm)
    panel = panel.aligned_to(h)
    selection = partition(h, immutable, preferred_order=preferred_order)

    determined = list(selection.determined)
    mutable_basis = list(selection.mutable_basis)
    immutable_basis = list(selection.immutable_basis)
    n_det, n_free, k = len(determined), len(mutable_basis), selection.k

    base = panel.base
    w_hat, v_hat, u_hat = base[determined], base[mutable_basis], base[immutable_basis]
    weight = restrict_to_mutable(wm, selection).w

    diagnostics: Dict[str, Any] = {
        "method": "immutable",
        "weights": wm.kind,
        "basis": [h.labels[i] for i in selection.basis],
        "determined": [h.labels[i] for i in determined],
        "immutable": [h.labels[i] for i in immutable_basis],
        "nonneg": nonneg,
        "warnings": list(wm.diagnostics.get("warnings", [])),
    }

    if nonneg and np.any(u_hat < 0.0):
        negatives = sorted({h.labels[immutable_basis[i]] for i in np.argwhere(u_hat < 0.0)[:, 0]})
        message = f"negative immutable base forecasts kept unchanged: {negatives}"
        logger.warning(message)
        diagnostics["warnings"].append(message)

    design = np.vstack([selection.s1, np.eye(n_free)])
    target = np.vstack([w_hat - selection.s2 @ u_hat, v_hat])

    g_free = gls_operator(design, weight) if n_free else np.zeros((0, n_det))
    if nonneg and n_free:
        # rows: determined series then the mutable basis, each >= 0
        lowers = np.vstack([-selection.s2 @ u_hat, np.zeros((n_free, base.shape[1]))])
        row_labels = [h.labels[i] for i in determined + mutable_basis]
        v_tilde, active_sets, relaxed = _solve_columns(design, target, weight, design, lowers, row_labels,
                                                       fallback_rows=range(n_det, n_det + n_free))
        diagnostics["active_sets"] = active_sets
        if relaxed:
            message = (f"immutable base forecasts admit no non-negative completion at horizon(s) "
                       f"{[t + 1 for t in relaxed]}; only the mutable basis is bounded there")
            logger.warning(message)
            diagnostics["warnings"].append(message)
        bound_active = any(active_sets)
    else:
        v_tilde = g_free @ target if n_free else np.zeros((0, base.shape[1]))
        bound_active = False

    reconciled = np.empty_like(base)
    reconciled[mutable_basis] = v_tilde
    reconciled[immutable_basis] = u_hat
    reconciled[determined] = selection.s1 @ v_tilde + selection.s2 @ u_hat

    g_matrix = None
    if not bound_active:
        g_matrix = np.zeros((h.m, h.n))
        g_matrix[:n_free, determined] = g_free[:, :n_det]
        g_matrix[:n_free, mutable_basis] = g_free[:, n_det:]
        g_matrix[:n_free, immutable_basis] = -g_free[:, :n_det] @ selection.s2
        g_matrix[n_free:, immutable_basis] = np.eye(k)

    result = ReconciliationResult(
        reconciled=reconciled,
        labels=list(h.labels),
        g_matrix=g_matrix,
        basis_indices=selection.basis,
        coherence_residual=h.coherence_residual(reconciled),
        immutability_residual=float(np.max(np.abs(reconciled[immutable_basis] - u_hat), initial=0.0)),
        diagnostics=diagnostics,
    )
    if g_matrix is not None:
        diagnostics["g_s_residual"] = g_matrix_check(result, h)
    logger.info(f"Immutable reconciliation ({wm.kind}, k={k}) of {panel.horizon} horizon(s), "
                f"coherence residual {result.coherence_residual:.3e}")
    return result


def reconcile(h: Hierarchy, wm: WeightMatrix, panel: ForecastPanel, immutable: Optional[Sequence[str]] = None,
              nonneg: bool = False) -> ReconciliationResult:
    """Immutable reconciliation when any series is held fixed, standard reconciliation otherwise"""
    if immutable:
        return reconcile_immutable(h, immutable, wm, panel, nonneg=nonneg)
    return reconcile_unconstrained(h, wm, panel, nonneg=nonneg)


def g_matrix_check(result: ReconciliationResult, h: Hierarchy) -> float:
    """Max-abs residual of G S - I, with S expressed on the basis the mapping was built for"""
    if result.g_matrix is None:
        raise ReconciliationError("No realized mapping: non-negativity bounds are active")
    if tuple(result.basis_indices) == tuple(h.basis_indices):
        s = h.s_matrix
    else:
        s = rebase(h, result.basis_indices).s_matrix
    return float(np.max(np.abs(result.g_matrix @ s - np.eye(h.m)), initial=0.0))


def stacked_solution(h: Hierarchy, wm: WeightMatrix, panel: ForecastPanel) -> np.ndarray:
    """All series from a direct GLS solve on S, without forming G"""
    panel = panel.aligned_to(h)
    return h.s_matrix @ solve_gls(GlsProblem(h.s_matrix, panel.base, wm.w))
