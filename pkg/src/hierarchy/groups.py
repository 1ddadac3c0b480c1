#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Grouped hierarchies built from categorical attributes
"""

import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.core.errors import HierarchyError
from src.hierarchy.structure import Hierarchy

logger = logging.getLogger(__name__)

TOTAL_LABEL = "Total"
BOTTOM_LEVEL = "Bottom"
KEY_SEPARATOR = "/"


@dataclass
class GroupSpec:
    """Attribute dimensions, the bottom series keys and the aggregate levels to build"""

    dimensions: "OrderedDict[str, List[str]]"
    bottom_keys: List[Tuple[str, ...]] = field(default_factory=list)
    aggregates: List[Tuple[str, ...]] = field(default_factory=list)

    @classmethod
    def full_cross(cls, dimensions: Dict[str, Sequence[str]],
                   aggregates: Sequence[Sequence[str]]) -> "GroupSpec":
        """Spec whose bottom level is every combination of dimension values"""
        dims = OrderedDict((name, list(values)) for name, values in dimensions.items())
        keys = [tuple(combo) for combo in itertools.product(*dims.values())]
        return cls(dimensions=dims, bottom_keys=keys, aggregates=[tuple(a) for a in aggregates])

    def validate(self):
        """Raise HierarchyError when keys or aggregates do not fit the dimensions"""
        if not self.dimensions:
            raise HierarchyError("Group spec has no dimensions")
        if not self.bottom_keys:
            raise HierarchyError("Empty bottom set")

        names = list(self.dimensions)
        for name, values in self.dimensions.items():
            if not values:
                raise HierarchyError(f"Dimension {name} has no values")
            if len(set(values)) != len(values):
                raise HierarchyError(f"Dimension {name} lists a value twice")

        for key in self.bottom_keys:
            if len(key) != len(names):
                raise HierarchyError(f"Bottom key {key} does not assign one value per dimension {names}")
            for name, value in zip(names, key):
                if value not in self.dimensions[name]:
                    raise HierarchyError(f"Bottom key {key}: {value!r} is not a value of {name}")

        if len(set(self.bottom_keys)) != len(self.bottom_keys):
            raise HierarchyError("Duplicate bottom keys")

        for aggregate in self.aggregates:
            for name in aggregate:
                if name not in self.dimensions:
                    raise HierarchyError(f"Aggregate {aggregate} references unknown dimension {name}")
            if len(set(aggregate)) != len(aggregate):
                raise HierarchyError(f"Aggregate {aggregate} repeats a dimension")


def _level_name(dims: Sequence[str]) -> str:
    if not dims:
        return TOTAL_LABEL
    return "×".join(dims)


def build_from_groups(spec: GroupSpec) -> Hierarchy:
    """
    Build a grouped hierarchy with the full bottom cross as basis

    Rows are Total (when the empty aggregate is listed), then each requested
    aggregate level in the order given, then the bottom series. Aggregate
    labels join the attribute values with '/'.
    """
    spec.validate()
    names = list(spec.dimensions)
    keys = list(spec.bottom_keys)
    key_array = np.array(keys, dtype=object).reshape(len(keys), len(names))

    labels: List[str] = []
    levels: List[str] = []
    rows: List[np.ndarray] = []

    aggregates = [tuple(a) for a in spec.aggregates]
    if () in aggregates:
        aggregates = [()] + [a for a in aggregates if a != ()]

    seen_levels = set()
    for aggregate in aggregates:
        # dimension order, not listing order
        dims = tuple(name for name in names if name in aggregate)
        if dims in seen_levels:
            logger.warning(f"Aggregate {'+'.join(aggregate)} listed twice, skipping")
            continue
        seen_levels.add(dims)

        if len(dims) == len(names):
            logger.warning(f"Aggregate {'+'.join(dims)} equals the bottom level, skipping")
            continue

        if not dims:
            labels.append(TOTAL_LABEL)
            levels.append(TOTAL_LABEL)
            rows.append(np.ones(len(keys)))
            continue

        columns = [names.index(d) for d in dims]
        for combo in itertools.product(*(spec.dimensions[d] for d in dims)):
            match = np.all(key_array[:, columns] == np.array(combo, dtype=object), axis=1)
            if not match.any():
                logger.warning(f"No bottom series matches {dict(zip(dims, combo))}, row skipped")
                continue
            labels.append(KEY_SEPARATOR.join(combo))
            levels.append(_level_name(dims))
            rows.append(match.astype(float))

    first_bottom = len(labels)
    labels.extend(KEY_SEPARATOR.join(key) for key in keys)
    levels.extend([BOTTOM_LEVEL] * len(keys))
    rows.extend(np.eye(len(keys)))

    if len(set(labels)) != len(labels):
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        raise HierarchyError(f"Duplicate labels in grouped hierarchy: {duplicates}")

    basis = tuple(range(first_bottom, len(labels)))
    hierarchy = Hierarchy(
        labels=tuple(labels),
        s_matrix=np.vstack(rows),
        basis_indices=basis,
        bottom_indices=basis,
        levels=tuple(levels),
    )
    logger.info(f"Built grouped hierarchy: {hierarchy.n} series over {hierarchy.m} bottom series")
    return hierarchy
