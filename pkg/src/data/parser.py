#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Hierarchy specification file parser
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import List, Optional, Tuple, Union

from src.core.errors import InputFormatError
from src.hierarchy.groups import GroupSpec, build_from_groups
from src.hierarchy.structure import Hierarchy, build_from_edges

logger = logging.getLogger(__name__)


class HierarchyFileParser:
    """Parses hierarchy files: an [edges] list or a [dimensions]/[bottom]/[aggregates] group spec"""

    # Sections
    SECTION_EDGES = "edges"
    SECTION_DIMENSIONS = "dimensions"
    SECTION_BOTTOM = "bottom"
    SECTION_AGGREGATES = "aggregates"
    SECTIONS = (SECTION_EDGES, SECTION_DIMENSIONS, SECTION_BOTTOM, SECTION_AGGREGATES)

    def __init__(self, encoding: str = "utf-8"):
        """Initialize the parser"""
        self.encoding = encoding
        self.reset()

    def reset(self):
        """Clear everything collected from a previous file"""
        self.edges: List[Tuple[str, str]] = []
        self.nodes: List[str] = []
        self.dimensions: "OrderedDict[str, List[str]]" = OrderedDict()
        self.bottom: List[Tuple[str, ...]] = []
        self.aggregates: List[Tuple[str, ...]] = []
        self.seen_sections = set()

    def parse_file(self, path: Union[str, Path]) -> Hierarchy:
        """Read and build the hierarchy described by a file"""
        path = Path(path)
        try:
            text = path.read_text(encoding=self.encoding)
        except (OSError, UnicodeDecodeError) as e:
            raise InputFormatError(f"Cannot read hierarchy file {path}: {e}") from e
        logger.info(f"Parsing hierarchy file {path}")
        return self.parse_text(text)

    def parse_text(self, text: str) -> Hierarchy:
        """Build a hierarchy from the text of a hierarchy file"""
        self.reset()
        # trailing blank lines never mean Total
        lines = text.replace("\r\n", "\n").replace("\r", "\n").rstrip("\n").split("\n")

        section: Optional[str] = None
        for number, raw in enumerate(lines, start=1):
            line = raw.strip()
            if line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip().lower()
                if section not in self.SECTIONS:
                    raise InputFormatError(f"Line {number}: unknown section [{section}]")
                self.seen_sections.add(section)
                continue
            if section is None:
                if line:
                    raise InputFormatError(f"Line {number}: content before any section header")
                continue

            if section == self.SECTION_EDGES:
                self._process_edge(line, number)
            elif section == self.SECTION_DIMENSIONS:
                self._process_dimension(line, number)
            elif section == self.SECTION_BOTTOM:
                self._process_bottom(line, number)
            else:
                self._process_aggregate(line, number)

        return self._build()

    def _process_edge(self, line: str, number: int):
        """parent,child or a lone label"""
        if not line:
            return
        parts = [part.strip() for part in line.split(",")]
        if len(parts) == 1 and parts[0]:
            self.nodes.append(parts[0])
        elif len(parts) == 2 and all(parts):
            self.edges.append((parts[0], parts[1]))
        else:
            raise InputFormatError(f"Line {number}: expected 'parent,child', got {line!r}")

    def _process_dimension(self, line: str, number: int):
        """name:value1|value2|..."""
        if not line:
            return
        name, sep, values = line.partition(":")
        name = name.strip()
        if not sep or not name:
            raise InputFormatError(f"Line {number}: expected 'name:value1|value2', got {line!r}")
        if name in self.dimensions:
            raise InputFormatError(f"Line {number}: dimension {name} defined twice")
        parsed = [value.strip() for value in values.split("|")]
        if not all(parsed) or any("," in value for value in parsed):
            raise InputFormatError(f"Line {number}: empty value or comma in dimension {name}")
        self.dimensions[name] = parsed

    def _process_bottom(self, line: str, number: int):
        """Comma-separated attribute values, one per dimension"""
        if not line:
            return
        self.bottom.append(tuple(value.strip() for value in line.split(",")))

    def _process_aggregate(self, line: str, number: int):
        """'+'-joined dimension names; an empty line is the Total"""
        if not line:
            self.aggregates.append(())
            return
        names = tuple(name.strip() for name in line.split("+"))
        if not all(names):
            raise InputFormatError(f"Line {number}: malformed aggregate {line!r}")
        self.aggregates.append(names)

    def _build(self) -> Hierarchy:
        has_edges = self.SECTION_EDGES in self.seen_sections
        has_groups = bool(self.seen_sections & {self.SECTION_DIMENSIONS, self.SECTION_BOTTOM,
                                                self.SECTION_AGGREGATES})
        if has_edges and has_groups:
            raise InputFormatError("A hierarchy file holds either [edges] or a group spec, not both")

        if has_edges:
            logger.debug(f"Edge hierarchy: {len(self.edges)} edges, {len(self.nodes)} lone nodes")
            return build_from_edges(self.edges, nodes=self.nodes)

        if has_groups:
            if self.SECTION_DIMENSIONS not in self.seen_sections:
                raise InputFormatError("Group spec without a [dimensions] section")
            spec = GroupSpec(dimensions=self.dimensions, bottom_keys=self.bottom, aggregates=self.aggregates)
            return build_from_groups(spec)

        raise InputFormatError("Hierarchy file has no [edges] or [dimensions] section")


def load_hierarchy(path: Union[str, Path]) -> Hierarchy:
    return HierarchyFileParser().parse_file(path)
