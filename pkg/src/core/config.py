#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Persistent settings: reconciliation defaults, simulation sizes and logging
"""

import copy
import json
import logging
import os
import shutil
import threading
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.estimation.covariance import WEIGHT_KINDS

logger = logging.getLogger(__name__)

CONFIG_DIR_ENV = "RECON_CONFIG_DIR"
DEFAULT_DIR_NAME = ".immutable_reconcile"
CONFIG_FILE_NAME = "config.json"

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# section -> key -> constraints; "default" is required everywhere
SCHEMA: Dict[str, Dict[str, Dict[str, Any]]] = {
    "reconcile": {
        "default_weights": {"type": "string", "enum": list(WEIGHT_KINDS), "default": "ols"},
        "nonneg": {"type": "boolean", "default": False},
        "significant_digits": {"type": "integer", "min": 6, "max": 17, "default": 12},
    },
    "simulation": {
        "replications": {"type": "integer", "min": 1, "max": 100000, "default": 100},
        "seed": {"type": "integer", "default": 2022},
        "plan": {"type": "string", "enum": ["ets", "ets_arima", "misspecified_bottom"], "default": "ets_arima"},
        "workers": {"type": "integer", "min": 1, "max": 64, "default": 1},
        "horizon": {"type": "integer", "min": 1, "max": 120, "default": 24},
        "t_total": {"type": "integer", "min": 50, "max": 100000, "default": 324},
    },
    "logging": {
        "log_to_file": {"type": "boolean", "default": False},
        "log_level": {"type": "string", "enum": ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                      "default": "INFO"},
        "log_format": {"type": "string", "default": LOG_FORMAT},
    },
}

_TYPES = {
    "string": (str,),
    "boolean": (bool,),
    "integer": (int,),
    "number": (int, float),
}


def conforms(value: Any, rule: Dict[str, Any]) -> bool:
    """True when value satisfies one schema rule"""
    expected = _TYPES[rule["type"]]
    # True is an int, but never a count
    if isinstance(value, bool) and rule["type"] != "boolean":
        return False
    if not isinstance(value, expected):
        return False
    if "enum" in rule and value not in rule["enum"]:
        return False
    if "min" in rule and value < rule["min"]:
        return False
    return "max" not in rule or value <= rule["max"]


def schema_defaults(schema: Dict[str, Dict[str, Dict[str, Any]]] = SCHEMA) -> Dict[str, Dict[str, Any]]:
    return {section: {key: rule["default"] for key, rule in rules.items()} for section, rules in schema.items()}


class Config:
    """Settings stored as JSON, checked against SCHEMA on every read and write"""

    def __init__(self, config_dir: Optional[Union[str, Path]] = None):
        if config_dir is None:
            config_dir = os.environ.get(CONFIG_DIR_ENV) or Path.home() / DEFAULT_DIR_NAME
        self.config_dir = Path(config_dir)
        self.config_file = self.config_dir / CONFIG_FILE_NAME
        self.config_lock = threading.RLock()
        self.schema = SCHEMA
        self.default_config = schema_defaults(self.schema)
        self.config = self.load()
        self.validate()

    def load(self) -> Dict[str, Any]:
        """Stored settings over the defaults; defaults alone when the file is absent or unreadable"""
        with self.config_lock:
            if not self.config_file.exists():
                logger.debug(f"No settings at {self.config_file}, using defaults")
                return copy.deepcopy(self.default_config)
            try:
                stored = json.loads(self.config_file.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                logger.error(f"Settings file {self.config_file} is not valid JSON ({e}), using defaults")
                return copy.deepcopy(self.default_config)
            except OSError as e:
                logger.error(f"Cannot read settings file {self.config_file}: {e}")
                return copy.deepcopy(self.default_config)
            if not isinstance(stored, dict):
                logger.error(f"Settings file {self.config_file} does not hold an object, using defaults")
                return copy.deepcopy(self.default_config)
            logger.info(f"Settings loaded from {self.config_file}")
            return self._overlay(self.default_config, stored)

    def save(self) -> bool:
        """Write the settings, keeping the previous file as config.json.bak"""
        with self.config_lock:
            self.validate()
            try:
                self.config_dir.mkdir(parents=True, exist_ok=True)
                if self.config_file.exists():
                    shutil.copy2(self.config_file, self.config_file.with_suffix(".json.bak"))
                pending = self.config_file.with_suffix(".json.tmp")
                pending.write_text(json.dumps(self.config, indent=4, sort_keys=True), encoding="utf-8")
                os.replace(pending, self.config_file)
            except OSError as e:
                logger.error(f"Cannot save settings to {self.config_file}: {e}")
                return False
            logger.info(f"Settings saved to {self.config_file}")
            return True

    def get(self, section: str, key: str, default: Any = None) -> Any:
        with self.config_lock:
            rule = self.schema.get(section, {}).get(key)
            if rule is None:
                logger.warning(f"Unknown setting {section}.{key}")
                return default
            value = self.config.get(section, {}).get(key, rule["default"])
            if not conforms(value, rule):
                logger.warning(f"Setting {section}.{key}={value!r} is out of range, using {rule['default']!r}")
                return rule["default"]
            return value

    def set(self, section: str, key: str, value: Any) -> bool:
        """Store a value in memory; save() persists it"""
        with self.config_lock:
            rule = self.schema.get(section, {}).get(key)
            if rule is None:
                logger.warning(f"Refusing unknown setting {section}.{key}")
                return False
            if not conforms(value, rule):
                logger.warning(f"Refusing {section}.{key}={value!r}")
                return False
            self.config.setdefault(section, {})[key] = value
            logger.debug(f"{section}.{key} set to {value!r}")
            return True

    def _overlay(self, base: Dict[str, Any], stored: Dict[str, Any]) -> Dict[str, Any]:
        merged = copy.deepcopy(base)
        for key, value in stored.items():
            if isinstance(merged.get(key), dict) and isinstance(value, dict):
                merged[key] = self._overlay(merged[key], value)
            else:
                merged[key] = value
        return merged

    def validate(self) -> bool:
        """Put defaults in place of missing or out-of-range values; True when nothing needed fixing"""
        with self.config_lock:
            repaired = []
            for section, rules in self.schema.items():
                values = self.config.setdefault(section, {})
                for key, rule in rules.items():
                    if key in values and conforms(values[key], rule):
                        continue
                    repaired.append(f"{section}.{key}")
                    values[key] = rule["default"]
            if repaired:
                logger.warning(f"Restored defaults for {', '.join(repaired)}")
            return not repaired

    def reset_to_defaults(self) -> bool:
        with self.config_lock:
            self.config = copy.deepcopy(self.default_config)
            logger.info("Settings reset to defaults")
            return self.save()

    def get_section(self, section: str) -> Dict[str, Any]:
        """Every key of one section, validated"""
        with self.config_lock:
            if section not in self.schema:
                logger.warning(f"Unknown settings section {section}")
                return {}
            return {key: self.get(section, key) for key in self.schema[section]}
