#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Run logs and diagnostics files
"""

import json
import logging
import math
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Convert numpy values and non-finite floats into plain JSON types"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


class RunLog:
    """Collects per-replication or per-run records and writes them as JSON"""

    def __init__(self, command: str, deterministic: bool = False):
        """Initialize the run log; deterministic logs carry no wall-clock fields"""
        self.deterministic = deterministic
        self.current_run: Dict[str, Any] = {"command": command}
        if not deterministic:
            self.current_run.update(
                run_id=int(time.time()),
                created=datetime.now().isoformat(),
            )
        self.records: List[Dict[str, Any]] = []

    def add_record(self, record: Dict[str, Any]):
        """Append one record, tagged with the run's command"""
        entry = {"command": self.current_run["command"]}
        if not self.deterministic:
            entry["logged"] = datetime.now().isoformat()
        entry.update(record)
        self.records.append(entry)

    def write_jsonl(self, path: Union[str, Path]) -> bool:
        """Write one JSON object per line"""
        try:
            with open(path, 'w', encoding='utf-8') as f:
                for record in self.records:
                    f.write(json.dumps(to_jsonable(record), sort_keys=True) + "\n")
            logger.info(f"Run log with {len(self.records)} record(s) written to {path}")
            return True
        except OSError as e:
            logger.error(f"Error writing run log: {e}")
            return False

    def write_diagnostics(self, path: Union[str, Path], diagnostics: Dict[str, Any]) -> bool:
        """Write a diagnostics JSON document merged with the run header"""
        document = dict(self.current_run)
        if not self.deterministic:
            document["finished"] = datetime.now().isoformat()
        document.update(diagnostics)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(to_jsonable(document), f, indent=4, sort_keys=True)
            logger.info(f"Diagnostics written to {path}")
            return True
        except OSError as e:
            logger.error(f"Error writing diagnostics: {e}")
            return False

    @staticmethod
    def load_jsonl(path: Union[str, Path]) -> List[Dict[str, Any]]:
        """Read a run log back"""
        with open(path, 'r', encoding='utf-8') as f:
            return [json.loads(line) for line in f if line.strip()]
