#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Main entry point for the application
"""

import logging
import os
import sys
from pathlib import Path

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

LOG_ENV = "RECON_LOG"
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

logger = logging.getLogger(__name__)


def configure_logging(config) -> int:
    """Set up logging from RECON_LOG, falling back to the configured level"""
    section = config.get_section("logging")
    requested = os.environ.get(LOG_ENV, "").strip().lower()
    level = LOG_LEVELS.get(requested, getattr(logging, section["log_level"], logging.INFO))

    handlers = [logging.StreamHandler()]
    if section["log_to_file"]:
        config.config_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(config.config_dir / 'app.log', mode='a'))

    logging.basicConfig(level=level, format=section["log_format"], handlers=handlers, force=True)
    if requested and requested not in LOG_LEVELS:
        logger.warning(f"Unknown {LOG_ENV} value {requested!r}, using {section['log_level']}")
    return level


def handle_exception(exc_type, exc_value, exc_traceback):
    """Log uncaught exceptions"""
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    logger.error("Uncaught exception", exc_info=(exc_type, exc_value, exc_traceback))


def main(argv=None) -> int:
    """Main entry point for the application"""
    sys.excepthook = handle_exception
    try:
        # Import here so the path setup above applies
        from src.core.app import Application
        from src.core.config import Config

        config = Config()
        configure_logging(config)
        return Application(config).run(sys.argv[1:] if argv is None else argv)
    except Exception as e:
        logger.exception(f"Unhandled exception: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
