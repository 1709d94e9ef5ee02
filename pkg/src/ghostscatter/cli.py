"""Command-line entry point.

Commands
--------
``run --config PATH [--frames N] [--seed S] [--shards K] [--out DIR]``
    Run one experiment and write its outputs and manifest.
``sweep --config PATH --param SECTION.KEY --values CSV [--out DIR]``
    One run per value plus ``summary.csv``.
``presets --list`` / ``presets --show NAME``
    List the embedded presets or print one.

``--config`` accepts a file path or ``preset:NAME``. Exit codes: 0 success,
2 configuration error, 3 runtime failure. ``GHOSTSCATTER_OUTPUT_DIR`` sets the
default output root.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, override, parse_config, preset_names, preset_text
from .experiment import ENV_OUTPUT_DIR, run_experiment, sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _read_config(spec: str) -> tuple[str, Path | None]:
    if spec.startswith("preset:"):
        name = spec.split(":", 1)[1]
        preset_text(name)  # validates the name
        return f"[experiment]\npreset = {name}\n", None
    p = Path(spec)
    try:
        return p.read_text(), p.parent
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None


def _apply(text: str, args) -> str:
    for attr, key in (("frames", "frames"), ("seed", "seed"), ("shards", "shards"),
                      ("workers", "workers")):
        v = getattr(args, attr, None)
        if v is not None:
            text = override(text, "experiment", key, v)
    return text


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ghostscatter",
                                 description="Ghost imaging through scattering media.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True, help="config file or preset:NAME")
    run.add_argument("--frames", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--shards", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help=f"output directory (default from ${ENV_OUTPUT_DIR})")

    sw = sub.add_parser("sweep", help="run one experiment per parameter value")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", required=True, help="SECTION.KEY, e.g. layers.L1")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--frames", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--shards", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--out")

    pr = sub.add_parser("presets", help="list or show embedded presets")
    g = pr.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true")
    g.add_argument("--show", metavar="NAME")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "presets":
            if args.list:
                for name in preset_names():
                    print(name)
            else:
                print(preset_text(args.show), end="")
            return EXIT_OK

        text, base = _read_config(args.config)
        text = _apply(text, args)
        if args.command == "run":
            cfg = parse_config(text, base)
            for w in cfg.warnings:
                print(f"warning: {w}", file=sys.stderr)
            res = run_experiment(cfg, args.out)
            print(json.dumps({"output": str(res.out_dir), "summary": res.manifest.summary},
                             default=str))
            return EXIT_OK

        values = [v.strip() for v in args.values.split(",") if v.strip()]
        parse_config(text, base)  # surface config errors before any run
        out = args.out or os.path.join(os.environ.get(ENV_OUTPUT_DIR, "ghostscatter-runs"),
                                       f"sweep-{args.param}")
        _, rows = sweep(text, args.param, values, out)
        for r in rows:
            print(json.dumps(r, default=str))
        return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_RUNTIME
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any failure during the run
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
