#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Hierarchy structure: summing matrices, basis checks, re-basing and partitioning
"""

import logging
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import HierarchyError, InvalidBasisError

logger = logging.getLogger(__name__)

# sigma_min / sigma_max below this ratio means singular
RANK_TOLERANCE = 1e-10
STRUCTURE_TOLERANCE = 1e-12


def _singular_ratio(rows: np.ndarray) -> float:
    """Ratio of smallest to largest singular value (0.0 for an all-zero block)"""
    if rows.size == 0:
        return 1.0
    sv = np.linalg.svd(rows, compute_uv=False)
    if sv[0] == 0.0:
        return 0.0
    return float(sv[-1] / sv[0])


def numerical_rank(rows: np.ndarray) -> int:
    """Rank of a block of S rows under the package-wide singular value ratio"""
    if rows.size == 0:
        return 0
    sv = np.linalg.svd(np.atleast_2d(rows), compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_TOLERANCE * sv[0]))


def _snap_integers(matrix: np.ndarray) -> np.ndarray:
    """Round entries that are integers up to floating noise"""
    rounded = np.round(matrix)
    close = np.abs(matrix - rounded) < STRUCTURE_TOLERANCE
    return np.where(close, rounded, matrix)


@dataclass(frozen=True)
class Hierarchy:
    """A set of labelled series y = S b with a designated basis b"""

    labels: Tuple[str, ...]
    s_matrix: np.ndarray
    basis_indices: Tuple[int, ...]
    bottom_indices: Tuple[int, ...] = ()
    levels: Tuple[str, ...] = ()

    def __post_init__(self):
        s = np.array(self.s_matrix, dtype=float)
        if s.ndim != 2:
            raise HierarchyError(f"S must be a matrix, got shape {s.shape}")
        n, m = s.shape
        if len(self.labels) != n:
            raise HierarchyError(f"{len(self.labels)} labels for an S with {n} rows")
        if len(set(self.labels)) != n:
            raise HierarchyError("Duplicate series labels")
        if len(self.basis_indices) != m or m > n:
            raise HierarchyError(f"Basis of size {len(self.basis_indices)} for an S with {m} columns")

        basis_rows = s[list(self.basis_indices)]
        # each basis row is a unit vector and each column is hit once
        if (np.max(np.abs(np.abs(basis_rows).sum(axis=1) - 1.0)) > STRUCTURE_TOLERANCE
                or np.max(np.abs(np.abs(basis_rows).sum(axis=0) - 1.0)) > STRUCTURE_TOLERANCE
                or np.max(np.abs(basis_rows.max(axis=1) - 1.0)) > STRUCTURE_TOLERANCE):
            raise HierarchyError("Rows of S at the basis indices are not a permutation of the identity")
        if numerical_rank(s) != m:
            raise HierarchyError("S does not have full column rank")

        s.setflags(write=False)
        object.__setattr__(self, "s_matrix", s)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "basis_indices", tuple(int(i) for i in self.basis_indices))
        bottom = self.bottom_indices or self.basis_indices
        object.__setattr__(self, "bottom_indices", tuple(int(i) for i in bottom))
        object.__setattr__(self, "levels", tuple(self.levels) if self.levels else ("",) * n)

    @property
    def n(self) -> int:
        return self.s_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.s_matrix.shape[1]

    @property
    def basis_labels(self) -> List[str]:
        return [self.labels[i] for i in self.basis_indices]

    @property
    def determined_indices(self) -> List[int]:
        basis = set(self.basis_indices)
        return [i for i in range(self.n) if i not in basis]

    @cached_property
    def constraint_matrix(self) -> np.ndarray:
        """A with A y = 0 exactly for every coherent y"""
        determined = self.determined_indices
        basis = list(self.basis_indices)
        a = np.zeros((len(determined), self.n))
        a[np.arange(len(determined)), determined] = 1.0
        permutation = self.s_matrix[basis]
        a[:, basis] = -self.s_matrix[determined] @ permutation.T
        a.setflags(write=False)
        return a

    @cached_property
    def bottom_s_matrix(self) -> np.ndarray:
        """S expressed in the bottom-level basis of the original construction"""
        if tuple(self.bottom_indices) == tuple(self.basis_indices):
            return self.s_matrix
        rows = self.s_matrix[list(self.bottom_indices)]
        return _snap_integers(np.linalg.solve(rows.T, self.s_matrix.T).T)

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise HierarchyError(f"Unknown series label: {label}") from None

    def indices_of(self, labels: Iterable[str]) -> List[int]:
        return [self.index_of(label) for label in labels]

    def level_groups(self) -> "OrderedDict[str, List[int]]":
        """Series indices per level name, levels in order of first appearance"""
        groups: "OrderedDict[str, List[int]]" = OrderedDict()
        for i, level in enumerate(self.levels):
            groups.setdefault(level, []).append(i)
        return groups

    def aggregate(self, basis_values: np.ndarray) -> np.ndarray:
        """All series from basis values (m or m x T)"""
        return self.s_matrix @ np.asarray(basis_values, dtype=float)

    def coherence_residual(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        if self.constraint_matrix.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.constraint_matrix @ values)))


@dataclass(frozen=True)
class BasisSelection:
    """Series split into determined (w), mutable basis (v) and immutable basis (u)"""

    determined: Tuple[int, ...]
    mutable_basis: Tuple[int, ...]
    immutable_basis: Tuple[int, ...]
    s1: np.ndarray
    s2: np.ndarray
    hierarchy: Hierarchy

    @property
    def k(self) -> int:
        return len(self.immutable_basis)

    @property
    def basis(self) -> Tuple[int, ...]:
        return self.mutable_basis + self.immutable_basis

    @property
    def order(self) -> Tuple[int, ...]:
        """Row order (w, v, u)"""
        return self.determined + self.mutable_basis + self.immutable_basis

    @property
    def mutable(self) -> Tuple[int, ...]:
        """Row order (w, v) of the mutable series"""
        return self.determined + self.mutable_basis

    def stacked_s(self) -> np.ndarray:
        """The hierarchy's S with rows stacked (w, v, u)"""
        return self.hierarchy.s_matrix[list(self.order)]


@dataclass
class BasisCheck:
    """Outcome of check_basis"""

    valid: bool
    reason: str = ""
    singular_ratio: float = 1.0
    witness: Dict[str, float] = field(default_factory=dict)

    def describe_witness(self) -> str:
        """Render the dependency among candidate series as a signed combination"""
        terms = []
        for label, coef in self.witness.items():
            sign = "-" if coef < 0 else "+"
            magnitude = abs(coef)
            text = label if abs(magnitude - 1.0) < 1e-9 else f"{magnitude:.6g}*{label}"
            terms.append(f"{sign} {text}")
        if not terms:
            return ""
        joined = " ".join(terms)
        return (joined[2:] if joined.startswith("+ ") else joined) + " = 0"


def _left_null_witness(rows: np.ndarray, labels: Sequence[str]) -> Dict[str, float]:
    u, _, _ = np.linalg.svd(rows)
    vector = u[:, -1]
    vector = vector / np.max(np.abs(vector))
    vector[np.abs(vector) < 1e-9] = 0.0
    if vector[np.flatnonzero(vector)[0]] < 0:
        vector = -vector
    return {label: float(c) for label, c in zip(labels, vector) if c != 0.0}


def build_from_edges(edges: Iterable[Tuple[str, str]], nodes: Optional[Iterable[str]] = None) -> Hierarchy:
    """
    Build a tree hierarchy from parent-child pairs

    Rows follow breadth-first order from the root; leaves form the default
    basis, and each internal row indicates its descendant leaves.
    """
    parent_of: Dict[str, str] = {}
    children: "OrderedDict[str, List[str]]" = OrderedDict()

    for label in nodes or ():
        children.setdefault(label, [])

    for parent, child in edges:
        if "," in parent or "," in child:
            raise HierarchyError(f"Labels may not contain commas: {parent!r}, {child!r}")
        if parent == child:
            raise HierarchyError(f"Cycle detected at {parent}")
        if child in parent_of:
            raise HierarchyError(f"Duplicate label: {child} has parents {parent_of[child]} and {parent}")
        parent_of[child] = parent
        children.setdefault(parent, []).append(child)
        children.setdefault(child, [])

    if not children:
        raise HierarchyError("Empty hierarchy: no edges and no nodes")

    roots = [label for label in children if label not in parent_of]
    if not roots:
        raise HierarchyError("Cycle detected: every series has a parent")
    if len(roots) > 1:
        raise HierarchyError(f"Disconnected hierarchy: multiple roots {roots}")

    order: List[str] = []
    depth: Dict[str, int] = {roots[0]: 0}
    queue = deque([roots[0]])
    while queue:
        label = queue.popleft()
        order.append(label)
        for child in children[label]:
            depth[child] = depth[label] + 1
            queue.append(child)

    if len(order) != len(children):
        stranded = [label for label in children if label not in depth]
        raise HierarchyError(f"Cycle detected among {stranded}")

    leaves = [label for label in order if not children[label]]
    leaf_column = {label: j for j, label in enumerate(leaves)}
    index = {label: i for i, label in enumerate(order)}

    s = np.zeros((len(order), len(leaves)))
    for label in reversed(order):
        row = index[label]
        if label in leaf_column:
            s[row, leaf_column[label]] = 1.0
        else:
            for child in children[label]:
                s[row] += s[index[child]]

    basis = tuple(index[label] for label in leaves)
    hierarchy = Hierarchy(
        labels=tuple(order),
        s_matrix=s,
        basis_indices=basis,
        bottom_indices=basis,
        levels=tuple(str(depth[label]) for label in order),
    )
    logger.debug(f"Built hierarchy with n={hierarchy.n}, m={hierarchy.m} from edges")
    return hierarchy


def _validate_candidate(h: Hierarchy, candidate: Sequence[int]) -> List[int]:
    candidate = [int(i) for i in candidate]
    if len(candidate) != h.m:
        raise InvalidBasisError(f"Wrong cardinality: a basis needs {h.m} series, got {len(candidate)}")
    if len(set(candidate)) != len(candidate):
        raise InvalidBasisError(f"Repeated index in candidate basis {candidate}")
    for i in candidate:
        if not 0 <= i < h.n:
            raise InvalidBasisError(f"Index {i} out of range for {h.n} series")
    return candidate


def check_basis(h: Hierarchy, candidate: Sequence[int]) -> BasisCheck:
    """A candidate basis is valid when the rows of S it selects are invertible"""
    candidate = _validate_candidate(h, candidate)
    rows = h.s_matrix[candidate]
    ratio = _singular_ratio(rows)
    if ratio >= RANK_TOLERANCE:
        return BasisCheck(valid=True, singular_ratio=ratio)

    labels = [h.labels[i] for i in candidate]
    deficiency = h.m - numerical_rank(rows)
    witness = _left_null_witness(rows, labels)
    return BasisCheck(
        valid=False,
        reason=f"S rows at the candidate basis are singular (rank deficiency {deficiency})",
        singular_ratio=ratio,
        witness=witness,
    )


def rebase(h: Hierarchy, new_basis: Sequence[int]) -> Hierarchy:
    """Re-express the hierarchy as y = S* b* with S* = S S_j^-1"""
    outcome = check_basis(h, new_basis)
    if not outcome.valid:
        raise InvalidBasisError(f"Invalid basis: {outcome.reason}; {outcome.describe_witness()}")

    new_basis = [int(i) for i in new_basis]
    rows = h.s_matrix[new_basis]
    s_star = _snap_integers(np.linalg.solve(rows.T, h.s_matrix.T).T)
    s_star[new_basis] = np.eye(h.m)
    return Hierarchy(
        labels=h.labels,
        s_matrix=s_star,
        basis_indices=tuple(new_basis),
        bottom_indices=h.bottom_indices,
        levels=h.levels,
    )


def partition(h: Hierarchy, immutable: Sequence[str],
              preferred_order: Optional[Sequence[int]] = None) -> BasisSelection:
    """
    Choose a valid basis holding every immutable series and split S into S1, S2

    Completion is greedy: starting from the immutable rows, series are
    added when they raise the rank of the candidate block, scanning bottom
    series first and then every other series in label order (or the given
    preferred order). Immutable series take the last k basis positions.
    """
    immutable_idx = h.indices_of(immutable)
    if len(set(immutable_idx)) != len(immutable_idx):
        raise InvalidBasisError(f"Repeated immutable series in {list(immutable)}")
    immutable_idx = sorted(immutable_idx)
    k = len(immutable_idx)

    if k > h.m:
        raise InvalidBasisError(f"{k} immutable series exceed the basis size {h.m}")
    if k and numerical_rank(h.s_matrix[immutable_idx]) < k:
        witness = _left_null_witness(h.s_matrix[immutable_idx], [h.labels[i] for i in immutable_idx])
        rendered = BasisCheck(valid=False, witness=witness).describe_witness()
        raise InvalidBasisError(f"No valid basis contains the immutable set: {rendered}")

    if preferred_order is None:
        bottom = list(h.bottom_indices)
        preferred_order = bottom + [i for i in range(h.n) if i not in set(bottom)]

    chosen = list(immutable_idx)
    rank = k
    for idx in preferred_order:
        if rank == h.m:
            break
        if idx in chosen:
            continue
        trial = numerical_rank(h.s_matrix[chosen + [idx]])
        if trial > rank:
            chosen.append(idx)
            rank = trial

    if rank < h.m:
        raise InvalidBasisError(f"Basis completion stalled at rank {rank} of {h.m}")

    mutable_idx = sorted(i for i in chosen if i not in set(immutable_idx))
    basis = mutable_idx + immutable_idx
    rebased = rebase(h, basis)
    determined = [i for i in range(h.n) if i not in set(basis)]

    block = rebased.s_matrix[determined]
    split = h.m - k
    selection = BasisSelection(
        determined=tuple(determined),
        mutable_basis=tuple(mutable_idx),
        immutable_basis=tuple(immutable_idx),
        s1=block[:, :split].copy(),
        s2=block[:, split:].copy(),
        hierarchy=rebased,
    )
    logger.info(f"Partitioned hierarchy: basis={rebased.basis_labels}, k={k}")
    return selection
