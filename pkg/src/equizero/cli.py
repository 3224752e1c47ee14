"""Command line entry point: ``equizero run|validate|version``."""

from __future__ import annotations

import argparse
import json
import sys

from equizero import __version__
from equizero.errors import ConfigError, EquizeroError
from equizero.runner import StageError, load_config, run, validate


def _emit(obj, stream=None):
    (stream or sys.stdout).write(json.dumps(obj, sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="equizero", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config")
    p_val = sub.add_parser("validate", help="check a config file without running it")
    p_val.add_argument("config")
    sub.add_parser("version", help="print the tool version")
    args = parser.parse_args(argv)

    if args.command == "version":
        print(__version__)
        return 0

    try:
        raw = load_config(args.config)
    except (OSError, ValueError) as e:
        _emit({"error": "config", "message": str(e)}, sys.stderr)
        return 2

    if args.command == "validate":
        violations = validate(raw)
        _emit({"valid": not violations, "violations": violations})
        return 0 if not violations else 2

    try:
        manifest = run(raw)
    except ConfigError as e:
        _emit({"error": "validation", "violations": e.violations}, sys.stderr)
        return 2
    except StageError as e:
        _emit({"error": type(e.cause).__name__, "stage": e.stage, "message": str(e.cause)}, sys.stderr)
        return 1
    except EquizeroError as e:
        _emit({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        return 1
    _emit({"ok": True, "outputs": [o["path"] for o in manifest.outputs], "summary": manifest.summary})
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
