"""Command-line front end.

Exit codes: 0 ok, 1 usage error (including an unknown preset), 2 invalid
configuration, 3 runtime failure (for example an unwritable output path).
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import yaml

from .engine import run_scenario
from .model import (ConfigurationError, ScenarioConfig, apply_override, dump_yaml, from_dict,
                    load_config, to_dict, validate)
from .presets import PRESET_NAMES, preset

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("nocqos")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_set(item: str):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects key=value, got {item!r}")
    return key.strip(), yaml.safe_load(raw)


def build_config(preset_name: Optional[str], config_path: Optional[str], args) -> ScenarioConfig:
    """Resolve a preset or config file, then apply flag overrides on top."""
    if preset_name:
        try:
            cfg = preset(preset_name)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    elif config_path:
        try:
            cfg = load_config(config_path)
        except OSError as exc:
            raise UsageError(f"cannot read config {config_path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config {config_path} is not valid YAML: {exc}") from None
    else:
        raise UsageError("give --preset, --config or --all")

    data = to_dict(cfg)
    scalar_flags = (("seed", "rng_seed"), ("warmup", "warmup_cycles"),
                    ("cycles", "measure_cycles"), ("window", "window_cycles"))
    for flag, key in scalar_flags:
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    for item in getattr(args, "set", None) or []:
        key, value = _parse_set(item)
        apply_override(data, key, value)
    return from_dict(data)


def _run_one(cfg: ScenarioConfig, out_dir: Optional[Path]) -> str:
    report = run_scenario(cfg)
    if out_dir is not None:
        report.write(out_dir)
    return report.summary_text()


def cmd_run(args) -> int:
    if args.all:
        names = list(PRESET_NAMES)
        configs = [build_config(n, None, args) for n in names]
        if args.out is None:
            raise UsageError("--all needs --out")
        dirs = [Path(args.out) / n for n in names]
    else:
        configs = [build_config(args.preset, args.config, args)]
        dirs = [Path(args.out) if args.out else None]

    for cfg in configs:
        problems = validate(cfg)
        if problems:
            raise ConfigurationError(problems)
    # fail on an unwritable output path before spending time on the runs
    for d in dirs:
        if d is not None:
            d.mkdir(parents=True, exist_ok=True)

    if args.jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_run_one, configs, dirs))
    else:
        summaries = [_run_one(cfg, d) for cfg, d in zip(configs, dirs)]
    for text, d in zip(summaries, dirs):
        print(text)
        if d is not None:
            print(f"  reports written to {d}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = build_config(args.preset, args.config, args)
    problems = validate(cfg)
    if problems:
        raise ConfigurationError(problems)
    print(f"{cfg.name}: ok")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in PRESET_NAMES:
        cfg = preset(name)
        print(f"{name:15s} scheme={cfg.arbitration_scheme}")
    return EXIT_OK


def cmd_dump(args) -> int:
    cfg = build_config(args.preset, args.config, args)
    sys.stdout.write(dump_yaml(cfg))
    return EXIT_OK


def _add_selection(p, allow_all=False):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", help=f"one of: {', '.join(PRESET_NAMES)}")
    src.add_argument("--config", help="YAML scenario file")
    if allow_all:
        src.add_argument("--all", action="store_true", help="run every preset (batch mode)")
    p.add_argument("--seed", type=int, help="master RNG seed (rng_seed)")
    p.add_argument("--warmup", type=int, help="warm-up cycles (warmup_cycles)")
    p.add_argument("--cycles", type=int, help="measured cycles (measure_cycles)")
    p.add_argument("--window", type=int, help="bandwidth window in cycles (window_cycles)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config value by dotted key, e.g. threads.CPU.pos_limit=16")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nocqos", description="Cycle-level NoC QoS arbitration simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a preset, a config file or all presets")
    _add_selection(p, allow_all=True)
    p.add_argument("--out", help="directory for CSV reports (one subdirectory per preset with --all)")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs in batch mode")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    _add_selection(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("list-presets", help="list the built-in presets")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("dump-preset", help="print a preset (with overrides) as YAML")
    _add_selection(p)
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        for msg in exc.violations:
            print(f"invalid config: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
