"""Command line entry point: ``qclbm run <config.json>`` or ``qclbm run --preset NAME``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import MODES, PRESETS, config_from_dict, parse_config, preset
from .errors import QCLBMError
from .runner import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qclbm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config or a preset")
    r.add_argument("config", nargs="?", help="path to the JSON run configuration")
    r.add_argument("--preset", choices=sorted(PRESETS), help="use a built-in configuration")
    r.add_argument("--print-config", action="store_true", help="print the resolved configuration as JSON and exit")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", type=int, help="threads for the Carleman operator apply")
    r.add_argument("--max-bytes", type=int, help="abort if the Carleman state needs more memory than this")
    r.add_argument("--n-steps", type=int, help="override the number of time steps")
    r.add_argument("-q", "--quiet", action="store_true")
    return parser


def _resolve(args) -> dict:
    if (args.config is None) == (args.preset is None):
        raise QCLBMError("give exactly one of a config path or --preset")
    if args.preset:
        raw = preset(args.preset)
    else:
        raw = json.loads(json.dumps(parse_config(args.config).to_dict()))
        raw = {k: v for k, v in raw.items() if v is not None}
        raw.pop("n_steps" if "t_end" in raw else "t_end", None)
    overrides = {"mode": args.mode, "output_dir": args.out, "workers": args.workers, "max_bytes": args.max_bytes}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.n_steps is not None:
        raw.pop("t_end", None)
        raw["n_steps"] = args.n_steps
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        raw = _resolve(args)
        if args.print_config:
            print(json.dumps(raw, indent=2))
            return 0
        return run(config_from_dict(raw))
    except QCLBMError as exc:
        print(f"qclbm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
