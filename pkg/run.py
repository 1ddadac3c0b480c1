#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Immutable Forecast Reconciliation
Launcher: runs the command-line interface inside a project virtual environment

    ./run.py reconcile --hierarchy ... --forecasts ...
    ./run.py --direct simulate --replications 10
"""

import platform
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent
VENV_DIR = ROOT / "venv"
REQUIREMENTS = ROOT / "requirements.txt"
ENTRY_POINT = ROOT / "src" / "main.py"
DIRECT_FLAG = "--direct"


def interpreter_in(venv_dir: Path) -> Path:
    if platform.system() == "Windows":
        return venv_dir / "Scripts" / "python.exe"
    return venv_dir / "bin" / "python"


def fail(message: str):
    print(message, file=sys.stderr)
    sys.exit(1)


def prepare_venv(venv_dir: Path) -> Path:
    """Create the environment and install requirements on first use"""
    python = interpreter_in(venv_dir)
    if python.exists():
        return python

    try:
        import venv
    except ImportError:
        hint = " (Debian/Ubuntu: sudo apt install python3-venv)" if platform.system() == "Linux" else ""
        fail(f"The venv module is missing{hint}; rerun with {DIRECT_FLAG} to use this interpreter")

    print(f"Creating virtual environment in {venv_dir}", file=sys.stderr)
    try:
        venv.create(venv_dir, with_pip=True)
    except (OSError, subprocess.CalledProcessError) as e:
        fail(f"Could not create {venv_dir}: {e}")

    if REQUIREMENTS.exists():
        try:
            subprocess.check_call([str(python), "-m", "pip", "install", "-q", "-r", str(REQUIREMENTS)])
        except (OSError, subprocess.CalledProcessError) as e:
            fail(f"Installing {REQUIREMENTS.name} failed ({e}); try: {python} -m pip install -r {REQUIREMENTS}")
    return python


def launch(python, args) -> int:
    """Run the CLI with the given interpreter and return its exit code"""
    return subprocess.call([str(python), str(ENTRY_POINT), *args], cwd=ROOT)


def main():
    args = sys.argv[1:]
    direct = DIRECT_FLAG in args
    args = [arg for arg in args if arg != DIRECT_FLAG]
    python = sys.executable if direct else prepare_venv(VENV_DIR)
    sys.exit(launch(python, args))


if __name__ == "__main__":
    main()
