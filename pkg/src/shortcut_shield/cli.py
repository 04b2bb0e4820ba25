"""Command-line entry point.

Subcommands read one JSON experiment config (``--config``) and write CSV and
JSON artifacts into ``--out`` (default: the config's ``out_dir``)::

    shortcut-shield simulate --config cfg.json   # training samples as CSV
    shortcut-shield sweep    --config cfg.json   # sweep.json
    shortcut-shield select   --config cfg.json   # selection.json
    shortcut-shield evaluate --config cfg.json   # results.csv
    shortcut-shield all      --config cfg.json   # all of the above, resumable
    shortcut-shield theory   --config cfg.json   # theory/<check>.json

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 a strict
theory check failed. Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigurationError
from .experiment import (
    ExperimentConfig,
    default_jobs,
    run_evaluate,
    run_experiment,
    run_select,
    run_sweep,
)
from .simulator import sample_dataset
from .theory import TheorySettings, run_theory

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_STRICT = 0, 2, 3, 4
COMMANDS = ("simulate", "sweep", "select", "evaluate", "theory", "all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shortcut-shield", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed-override", type=int, default=None, help="run this single seed")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes (default: SHORTCUT_SHIELD_JOBS or 1)")
    parser.add_argument("--out", default=None, help="output directory (default: the config's out_dir)")
    return parser


def load_config(path, seed_override=None, out=None):
    """Parse a config file into ``(ExperimentConfig, theory section dict)``."""
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    theory = data.get("theory") or {}
    if seed_override is not None:
        data["seeds"] = [seed_override]
        theory = {**theory, "seeds": [seed_override]}
    if out is not None:
        data["out_dir"] = str(out)
    return ExperimentConfig.from_dict(data), theory


def _simulate(config: ExperimentConfig) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "spec.json").write_text(config.spec.to_json())
    for seed in config.seeds:
        sample_dataset(config.spec, config.n_train, seed).to_csv(out / f"train_seed{seed}.csv")


def _theory(config: ExperimentConfig, section: dict) -> bool:
    settings = TheorySettings.from_dict(section)
    out = Path(config.out_dir) / "theory"
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    for rep in run_theory(config.spec, settings, config.train):
        (out / f"{rep.name}.json").write_text(rep.to_json())
        print(f"{rep.name}: {'satisfied' if rep.satisfied else 'NOT satisfied'}"
              f"{'' if rep.strict else ' (diagnostic)'}")
        if rep.strict and not rep.satisfied:
            ok = False
    return ok


def _error(code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, theory = load_config(args.config, args.seed_override, args.out)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigurationError("--jobs must be >= 1")
    except (ConfigurationError, ValueError, TypeError, KeyError) as exc:
        return _error(EXIT_CONFIG, exc)
    try:
        cmd = args.command
        if cmd == "simulate":
            _simulate(config)
        elif cmd == "sweep":
            run_sweep(config)
        elif cmd == "select":
            run_select(config)
        elif cmd == "evaluate":
            run_evaluate(config)
        elif cmd == "all":
            run_experiment(config, args.jobs if args.jobs is not None else default_jobs())
        elif cmd == "theory":
            if not _theory(config, theory):
                return EXIT_STRICT
    except ConfigurationError as exc:
        return _error(EXIT_CONFIG, exc)
    except Exception as exc:  # any module failure is a runtime error for the caller
        return _error(EXIT_RUNTIME, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
