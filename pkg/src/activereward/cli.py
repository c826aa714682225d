"""Command-line entry point.

Subcommands: run (benchmark loop), compare (strategies on paired seeds),
replay (verify a transcript), serve (live session HTTP API).

Exit codes: 0 ok, 2 config error, 3 runtime error, 4 replay divergence.
"""
from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, ReplayDivergenceError, TranscriptError
from .harness import compare_strategies, load_config, replay_transcript, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_DIVERGENCE = 4


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config)
    print(f"metrics: {result.metrics_path}")
    for seed, path in result.transcript_paths.items():
        print(f"transcript[{seed}]: {path}")
    for seed, message in result.failures.items():
        print(f"seed {seed} failed: {message}", file=sys.stderr)
    if result.failures and not result.transcript_paths:
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_compare(args) -> int:
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    config = load_config(args.config)
    result = compare_strategies(config, strategies)
    print(f"summary: {result.summary_path}")
    final = max(step for (_, step) in result.medians)
    for name in dict.fromkeys(strategies + ["random"]):
        med = result.medians.get((name, final))
        win = result.win_rates.get((name, final))
        print(f"{name}: median alignment {med:.4f}, win rate vs random {win:.2f}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    config = load_config(args.config)
    summary = replay_transcript(config, args.transcript)
    print(f"steps: {summary.steps}")
    print(f"dataset size: {summary.dataset_size}")
    print(f"belief generation: {summary.belief_generation}")
    print(f"spread: {summary.spread!r}")
    if summary.alignment is not None:
        print(f"alignment: {summary.alignment!r}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import json

    import uvicorn

    from .service import create_app

    default_doc = None
    if args.config:
        with open(args.config) as fh:
            default_doc = json.load(fh)
    app = create_app(storage_dir=args.state_dir, default_config=default_doc)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activereward",
                                     description="Active reward learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the benchmark loop for every seed")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(fn=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare strategies on paired seeds")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--strategies", required=True,
                       help="comma-separated strategy names")
    p_cmp.set_defaults(fn=_cmd_compare)

    p_rep = sub.add_parser("replay", help="re-run and verify a transcript")
    p_rep.add_argument("--transcript", required=True)
    p_rep.add_argument("--config", required=True)
    p_rep.set_defaults(fn=_cmd_replay)

    p_srv = sub.add_parser("serve", help="serve the live session API")
    p_srv.add_argument("--config", required=False, default=None,
                       help="default session config for clients that omit one")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--state-dir", default="sessions")
    p_srv.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplayDivergenceError as exc:
        print(f"replay divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except TranscriptError as exc:
        print(f"transcript error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
