"""Operator CLI: generate data, train, evaluate, replay, serve.

Every subcommand prints a single JSON document to stdout (human logs go to
stderr) and uses the exit-code convention 0 = success, 1 = usage,
2 = data error, 3 = runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .chat import LlmEndpointConfig, LlmError
from .dataset import DatasetError, LabeledWindow, load_recording, segment_recording
from .model import (
    ArchConfig,
    ModelError,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    evaluate_loso,
    load_model,
    save_model,
    train,
)
from .monitor import MonitorError, StressMonitor
from .synth import ScenarioSpec, generate, scripted_day

log = logging.getLogger("emllm")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


def _emit(doc: dict) -> None:
    json.dump(doc, sys.stdout)
    sys.stdout.write("\n")
    sys.stdout.flush()


def _parse_filters(text: str) -> tuple[int, int, int]:
    parts = tuple(int(p) for p in text.split(","))
    if len(parts) != 3:
        raise _UsageError("--filters expects three comma-separated integers")
    return parts


def _discover_recordings(paths: list[str]) -> list[Path]:
    found: list[Path] = []
    for p in paths:
        path = Path(p)
        if (path / "meta.json").is_file():
            found.append(path)
            continue
        if path.is_dir():
            children = sorted(c for c in path.iterdir() if (c / "meta.json").is_file())
            if children:
                found.extend(children)
                continue
        raise DatasetError(f"no recording found at {path}")
    return found


def _load_windows(paths: list[str], window_s: float, shift_s: float) -> list[LabeledWindow]:
    windows: list[LabeledWindow] = []
    for rec_dir in _discover_recordings(paths):
        rec = load_recording(rec_dir)
        wins = segment_recording(rec, window_s, shift_s)
        log.info("loaded %s: %d windows", rec_dir, len(wins))
        windows.extend(wins)
    if not windows:
        raise DatasetError("no labeled windows produced from the given data")
    return windows


def cmd_synth(args) -> int:
    out_root = Path(args.out)
    specs: list[ScenarioSpec] = []
    if args.spec:
        raw = json.loads(Path(args.spec).read_text())
        for entry in raw:
            specs.append(
                ScenarioSpec(
                    subject_id=str(entry["subject_id"]),
                    duration_s=float(entry["duration_s"]),
                    intervals=tuple(
                        (float(s), float(e), int(c)) for s, e, c in entry["intervals"]
                    ),
                    seed=int(entry["seed"]),
                    eda_shift=float(entry.get("eda_shift", 1.5)),
                    bvp_freq_shift=float(entry.get("bvp_freq_shift", 0.3)),
                    temp_shift=float(entry.get("temp_shift", -0.3)),
                )
            )
    else:
        for i in range(args.subjects):
            specs.append(
                scripted_day(
                    subject_id=f"s{i + 1:02d}",
                    duration_s=args.duration,
                    seed=args.seed + i,
                    stress_intervals=args.stress_intervals,
                )
            )
    dirs = []
    for spec in specs:
        dirs.append(str(generate(spec, out_root / spec.subject_id)))
    _emit({"datasets": dirs})
    return EXIT_OK


def cmd_train(args) -> int:
    windows = _load_windows(args.data, args.window, args.shift)
    rates = {
        name: len(windows[0].per_channel[name]) / args.window for name in windows[0].per_channel
    }
    arch = ArchConfig.from_rates(
        rates, filters=_parse_filters(args.filters), hidden_units=args.hidden
    )
    cfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        seed=args.seed,
        patience=args.patience,
        normalize=not args.no_normalize,
    )
    result = train(windows, arch, cfg)
    save_model(result.params, args.out)
    report = result.val_report.to_dict() if result.val_report else {"split": "validation"}
    _emit(
        {
            **report,
            "model_path": str(args.out),
            "epochs_run": len(result.history),
            "n_train": result.n_train,
            "n_val": result.n_val,
            "val_subjects": list(result.val_subjects),
            "history": result.history,
        }
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    params = load_model(args.model)
    windows = _load_windows(args.data, params.window_s, args.shift)
    if args.loso:
        cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
        result = evaluate_loso(windows, params.arch, cfg)
        _emit(
            {
                "folds": {sid: rep.to_dict() for sid, rep in result.per_subject.items()},
                "pooled": result.pooled.to_dict(),
            }
        )
    else:
        report = evaluate(params, windows, split="eval")
        _emit(report.to_dict())
    return EXIT_OK


def cmd_replay(args) -> int:
    params = load_model(args.model)
    rec = load_recording(args.data)
    monitor = StressMonitor(params, shift_s=args.shift)
    t0 = min(ch.t0_s for ch in rec.channels)
    end = max(ch.end_s for ch in rec.channels)
    cursor = t0
    while cursor < end:
        stop = cursor + args.chunk
        for ch in rec.channels:
            lo = int(round((cursor - ch.t0_s) * ch.rate_hz))
            hi = min(int(round((stop - ch.t0_s) * ch.rate_hz)), len(ch.samples))
            if hi > lo:
                times = [ch.t0_s + k / ch.rate_hz for k in range(lo, hi)]
                monitor.push_samples(ch.name, list(zip(times, ch.samples[lo:hi])))
        monitor.tick()
        cursor = stop
    _emit(monitor.summary().to_dict())
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import ServerConfig, serve_api

    if not args.model:
        raise _UsageError("serve needs --model (or EMLLM_MODEL_PATH)")
    host, _, port = args.bind.rpartition(":")
    config = ServerConfig(
        model_path=args.model,
        data_dir=args.data_dir,
        llm=LlmEndpointConfig(
            base_url=args.llm_url,
            model=args.llm_model,
            api_key=os.environ.get("EMLLM_LLM_KEY") or None,
            timeout_s=args.llm_timeout,
        ),
        shift_s=args.shift,
        static_dir=args.static_dir,
    )
    load_model(args.model)  # fail fast before binding the port
    serve_api(config, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib  # py3.11+
        except ImportError as exc:
            raise _UsageError("TOML config requires Python 3.11+; use JSON") from exc
        return tomllib.loads(text)
    return json.loads(text)


def _apply_config(subs: dict[str, argparse.ArgumentParser], path: str) -> None:
    """Config sections mirror subcommand flags; explicit flags still win."""
    try:
        doc = _load_config_file(path)
    except (OSError, ValueError) as exc:
        raise _UsageError(f"cannot read config file {path}: {exc}") from None
    for section, values in doc.items():
        if section not in subs:
            raise _UsageError(f"config section [{section}] is not a subcommand")
        sp = subs[section]
        valid = {a.dest for a in sp._actions}
        for key, value in values.items():
            dest = key.replace("-", "_")
            if dest not in valid:
                raise _UsageError(f"config key {key!r} unknown for subcommand {section}")
            sp.set_defaults(**{dest: value})


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="emllm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--config",
        help="JSON/TOML file whose sections provide per-subcommand flag defaults",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    p = subs["synth"] = sub.add_parser("synth", help="generate synthetic recordings")
    p.add_argument("--spec", help="JSON file with a list of scenario specs")
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--duration", type=float, default=3600.0, help="seconds per subject")
    p.add_argument("--stress-intervals", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = subs["train"] = sub.add_parser("train", help="train a stress model")
    p.add_argument("--data", nargs="+", required=True, help="recording dirs or a parent dir")
    p.add_argument("--window", type=float, default=60.0)
    p.add_argument("--shift", type=float, default=5.0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--filters", default="16,32,64")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = subs["eval"] = sub.add_parser("eval", help="evaluate a model, optionally leave-one-subject-out")
    p.add_argument("--model", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--shift", type=float, default=5.0)
    p.add_argument("--loso", action="store_true")
    p.add_argument("--epochs", type=int, default=30, help="per-fold training epochs with --loso")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = subs["replay"] = sub.add_parser("replay", help="stream a recording through the monitor")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--shift", type=float, default=5.0)
    p.add_argument("--chunk", type=float, default=60.0, help="push granularity in seconds")
    p.set_defaults(func=cmd_replay)

    p = subs["serve"] = sub.add_parser("serve", help="run the chat + monitoring HTTP service")
    p.add_argument("--model", default=os.environ.get("EMLLM_MODEL_PATH"))
    p.add_argument("--bind", default=os.environ.get("EMLLM_BIND_ADDR", "127.0.0.1:8000"))
    p.add_argument("--llm-url", default=os.environ.get("EMLLM_LLM_URL", "http://127.0.0.1:9000"))
    p.add_argument("--llm-model", default=os.environ.get("EMLLM_LLM_MODEL", "default"))
    p.add_argument("--llm-timeout", type=float, default=60.0)
    p.add_argument("--data-dir", default=os.environ.get("EMLLM_DATA_DIR", "./sessions"))
    p.add_argument("--shift", type=float, default=5.0)
    p.add_argument("--static-dir", default=None, help="serve a built web UI from this dir")
    p.set_defaults(func=cmd_serve)
    return parser, subs


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser, subs = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(subs, known.config)
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ModelError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, TrainingDiverged):
            print(f"runtime error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (MonitorError, LlmError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
