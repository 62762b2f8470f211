"""Command-line front end: ``tune``, ``resume``, ``report`` and ``simulate``.

Exit codes: 0 success, 1 usage or config error, 2 objective abort, 3 I/O
error, 130 interrupted (after a final checkpoint).  Log verbosity comes
from ``SPSATUNE_LOG`` (``DEBUG``, ``INFO``, ``WARNING``...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
from pathlib import Path
from typing import Sequence

from . import mrsim
from .checkpoint import atomic_write_text, read_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .errors import (
    CheckpointError,
    CheckpointWriteError,
    ConfigError,
    FingerprintMismatch,
    ObjectiveAbort,
    SpsaError,
)
from .objectives import make_objective
from .space import ParameterSpace, map_to_system
from .spsa import RunResult, TunerState, run
from .trace import TraceWriter, read_trace, truncate_trace

logger = logging.getLogger("spsatune")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_IO, EXIT_INTERRUPTED = 0, 1, 2, 3, 130

SPARK = "▁▂▃▄▅▆▇█"


def _print(args, *msg):
    if not getattr(args, "quiet", False):
        print(*msg)


def _config(args, path) -> RunConfig:
    return load_config(path, seed_override=args.seed_override,
                       max_iterations_override=args.max_iterations_override)


def _checkpointer(cfg: RunConfig):
    if cfg.checkpoint_path is None:
        return None

    def save(state: TunerState):
        save_checkpoint(state, cfg.checkpoint_path, cfg.space, cfg.options)

    return save


def _emergency_dump(cfg: RunConfig, state: TunerState | None) -> None:
    if state is None:
        return
    target = Path(str(cfg.checkpoint_path or "spsatune-checkpoint.json") + ".emergency")
    try:
        save_checkpoint(state, target, cfg.space, cfg.options)
        logger.error("emergency checkpoint written to %s", target)
    except OSError:
        fallback = Path(os.environ.get("TMPDIR", "/tmp")) / target.name
        try:
            save_checkpoint(state, fallback, cfg.space, cfg.options)
            logger.error("emergency checkpoint written to %s", fallback)
        except OSError:
            logger.exception("emergency checkpoint failed; state is lost")


def _point(theta, space: ParameterSpace) -> dict:
    cfg = map_to_system(theta, space)
    return {
        "theta": [float(x) for x in theta],
        "config": {s.name: (v if isinstance(v, int) else float(v)) for s, v in zip(space, cfg.values)},
        "rendered": {s.name: s.format_value(v) for s, v in zip(space, cfg.values)},
    }


def write_summary(cfg: RunConfig, result: RunResult, rows: list[dict]) -> dict:
    state = result.state
    summary = {
        "status": result.status.value,
        "iterations": state.iteration,
        "eval_count": state.eval_count,
        "initial_value": rows[0]["f_base"] if rows else None,
        "best_value": state.best_value if rows else None,
        "final": _point(state.theta, cfg.space),
        "best": _point(state.best_theta, cfg.space),
        "space_fingerprint": cfg.space.fingerprint(),
    }
    if cfg.summary_path is not None:
        atomic_write_text(cfg.summary_path, json.dumps(summary, indent=2) + "\n")
    return summary


def _execute(args, cfg: RunConfig, state: TunerState | None, truncate: bool) -> int:
    objective = make_objective(cfg.objective, cfg.space)
    writer = TraceWriter(cfg.trace_path, truncate=truncate) if cfg.trace_path else None
    try:
        result = run(cfg.space, objective, cfg.options, state=state, theta0=cfg.initial_point,
                     sink=writer, checkpoint=_checkpointer(cfg))
    except ObjectiveAbort as exc:
        logger.error("%s", exc)
        print(f"error: objective aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except CheckpointWriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _emergency_dump(cfg, exc.state)
        return EXIT_IO
    except KeyboardInterrupt:
        print("interrupted; checkpoint saved" if cfg.checkpoint_path else "interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    finally:
        if writer is not None:
            writer.close()
    rows = read_trace(cfg.trace_path) if cfg.trace_path and cfg.trace_path.exists() else \
        [r.to_dict() for r in result.trace]
    summary = write_summary(cfg, result, rows)
    _print(args, f"{summary['status']} after {summary['iterations']} iterations, "
                 f"{summary['eval_count']} evaluations")
    if rows:
        _print(args, f"initial {summary['initial_value']:.6g}  best {summary['best_value']:.6g}")
    _print(args, "final configuration:")
    for name, value in summary["final"]["rendered"].items():
        _print(args, f"  {name} = {value}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = _config(args, args.config)
    return _execute(args, cfg, None, truncate=True)


def cmd_resume(args) -> int:
    cfg = _config(args, args.config)
    ckpt = read_checkpoint(args.checkpoint)
    expected = cfg.space.fingerprint()
    if ckpt.fingerprint != expected:
        raise FingerprintMismatch(expected, str(ckpt.fingerprint))
    state = ckpt.state
    if cfg.trace_path is not None:
        truncate_trace(cfg.trace_path, state.iteration)
    return _execute(args, cfg, state, truncate=False)


def sparkline(values: Sequence[float]) -> str:
    lo, hi = min(values), max(values)
    if hi == lo:
        return SPARK[0] * len(values)
    return "".join(SPARK[round((v - lo) / (hi - lo) * (len(SPARK) - 1))] for v in values)


def summarize_trace(rows: list[dict]) -> dict:
    if not rows:
        raise ValueError("trace is empty")
    values = [r["f_base"] for r in rows]
    initial, best = values[0], min(values)
    improvement = (1.0 - best / initial) * 100.0 if initial else 0.0
    return {
        "iterations": len(rows),
        "initial": initial,
        "best": best,
        "best_iteration": rows[values.index(best)]["iteration"],
        "improvement_percent": improvement,
        "eval_count": rows[-1]["eval_count_cumulative"],
    }


def cmd_report(args) -> int:
    rows = read_trace(args.trace)
    if not rows:
        print(f"error: trace {args.trace} is empty", file=sys.stderr)
        return EXIT_CONFIG
    s = summarize_trace(rows)
    print(f"iterations: {s['iterations']}")
    print(f"initial f: {s['initial']:.6g}")
    print(f"best f: {s['best']:.6g} (iteration {s['best_iteration']})")
    print(f"improvement: {s['improvement_percent']:.1f}%")
    print(f"evaluations: {s['eval_count']}")
    if args.sparkline:
        print(sparkline([r["f_base"] for r in rows]))
    if args.data_out:
        lines = [f"{r['iteration']} {r['f_base']!r}" for r in rows]
        atomic_write_text(args.data_out, "# iteration f_base\n" + "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args, args.config)
    profile = mrsim.reference_profile()
    if cfg.objective.profile is not None:
        profile = mrsim.JobProfile.from_dict({**profile.to_dict(), **cfg.objective.profile})
    values = cfg.space.default_config().as_dict()
    if cfg.initial_point is not None:
        values = map_to_system(cfg.initial_point, cfg.space).as_dict()
    for item in args.set or []:
        name, sep, raw = item.partition("=")
        if not sep or name not in values:
            print(f"error: --set expects NAME=VALUE with a known parameter, got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        spec = cfg.space[name]
        if spec.kind == "boolean":
            value = raw.lower() in ("1", "true", "yes")
        elif spec.kind == "categorical":
            value = spec.categories.index(raw) if raw in spec.categories else int(raw)
        elif spec.kind == "integer":
            value = int(raw)
        else:
            value = float(raw)
        values[name] = value
    breakdown = mrsim.simulate(profile, values)
    for key, value in breakdown.to_dict().items():
        print(f"{key:>18}: {value:12.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    def add_globals(p, suppress: bool):
        default = argparse.SUPPRESS if suppress else None
        p.add_argument("--seed-override", type=int, default=default, help="replace engine.seed")
        p.add_argument("--max-iterations-override", type=int, default=default,
                       help="replace engine.max_iterations")
        p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False,
                       help="suppress progress output")

    parser = argparse.ArgumentParser(prog="spsatune", description="SPSA configuration tuner")
    add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="run a tuning job from a config file")
    p.add_argument("config")
    add_globals(p, suppress=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("resume", help="continue a run from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("config")
    add_globals(p, suppress=True)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("report", help="summarize a trace file")
    p.add_argument("trace")
    p.add_argument("--sparkline", action="store_true", help="print a text sparkline of f")
    p.add_argument("--data-out", help="write 'iteration f_base' columns for plotting")
    add_globals(p, suppress=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="evaluate the MapReduce cost model once")
    p.add_argument("config")
    p.add_argument("--set", action="append", metavar="NAME=VALUE", help="override one parameter")
    add_globals(p, suppress=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=os.environ.get("SPSATUNE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    previous = signal.getsignal(signal.SIGTERM)
    try:
        signal.signal(signal.SIGTERM, _raise_interrupt)
    except ValueError:  # not the main thread
        previous = None
    try:
        return args.func(args)
    except (ConfigError, FingerprintMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SpsaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if previous is not None:
            signal.signal(signal.SIGTERM, previous)


if __name__ == "__main__":
    sys.exit(main())
