"""Command line entry point: ``deepgg {dataset,train,sample,eval,plotdata}``.

Every value is resolved as flag > environment (``DEEPGG_<FLAG>``) >
config file (``--config``, flat JSON with a ``version`` field) > default.
Each command writes its outputs plus a ``manifest.json`` into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .generators import ModelSpec
from .graph import Graph, read_graphs, write_graphs
from .model import HyperParams, sample_graph
from .sequences import is_sequence_file, read_sequences, replay, write_sequences
from .stats import GraphSetStats, compare_report, write_histograms
from .training import (
    DatasetSpec,
    TrainConfig,
    build_dataset,
    file_sha256,
    load_checkpoint,
    seed_stream,
    train,
    utc_now,
    write_json,
)

CONFIG_VERSION = 1
ENV_PREFIX = "DEEPGG_"

# argparse dest -> flat config key
CONFIG_KEYS = {
    "model": "model", "n": "n", "p": "p", "m": "m", "k": "k", "variant": "variant", "count": "count",
    "seed": "seed", "lr": "eta", "epochs": "nu_epochs", "rounds": "nu_rounds",
    "h_v": "h_v", "h_e": "h_e", "h_g": "h_g", "h_r": "h_r", "h_msg": "h_msg",
    "min_v": "nu_min", "max_v": "nu_max", "enable_remove": "enable_remove",
    "clip_norm": "clip_norm", "checkpoint_every": "checkpoint_every",
    "sample_count": "sample_count", "data": "data", "ckpt": "ckpt",
    "generated": "generated", "reference": "reference", "out": "out",
}


class CLIError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise CLIError("usage", message)


def _add_seed_out(p):
    p.add_argument("--seed", type=int, default=0, help="global seed, expanded into per-purpose streams")
    p.add_argument("--out", default=".", help="output run directory")
    p.add_argument("--config", default=None, help="JSON config file with flat keys and a version field")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="deepgg", description="Deep graph generators from construction sequences.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dataset", help="sample construction sequences from a random graph model",
                       formatter_class=fmt)
    p.add_argument("--model", choices=["er", "ba", "ws"], default="ba", help="probabilistic graph model")
    p.add_argument("--n", type=int, default=50, help="vertices per graph")
    p.add_argument("--p", type=float, default=0.2, help="edge (ER) or rewiring (WS) probability")
    p.add_argument("--m", type=int, default=3, help="BA attachment count")
    p.add_argument("--k", type=int, default=10, help="WS ring degree")
    p.add_argument("--variant", choices=["process", "bfs", "dfs"], default="dfs", help="sequence variant")
    p.add_argument("--count", type=int, default=1000, help="number of graphs")
    _add_seed_out(p)

    p = sub.add_parser("train", help="train a model on a sequence file", formatter_class=fmt)
    p.add_argument("--data", default=None, help="sequence file (required)")
    p.add_argument("--epochs", type=int, default=8, help="number of epochs (nu_epochs)")
    p.add_argument("--lr", type=float, default=1e-4, help="SGD learning rate (eta)")
    p.add_argument("--rounds", type=int, default=2, help="propagation rounds (nu_rounds)")
    p.add_argument("--h-v", type=int, default=16, help="vertex embedding size")
    p.add_argument("--h-e", type=int, default=16, help="edge embedding size")
    p.add_argument("--h-g", type=int, default=32, help="graph embedding size")
    p.add_argument("--h-r", type=int, default=7, help="reduced vertex embedding size")
    p.add_argument("--h-msg", type=int, default=32, help="message size")
    p.add_argument("--enable-remove", type=_parse_bool, default=False, help="learn the remove-node state")
    p.add_argument("--clip-norm", type=float, default=None, help="global gradient norm clip (off by default)")
    p.add_argument("--checkpoint-every", type=int, default=None, help="extra checkpoint every N epochs")
    _add_seed_out(p)

    p = sub.add_parser("sample", help="sample graphs from a checkpoint", formatter_class=fmt)
    p.add_argument("--ckpt", default=None, help="checkpoint file (required)")
    p.add_argument("--count", dest="sample_count", type=int, default=200, help="number of graphs")
    p.add_argument("--min-v", type=int, default=None, help="minimum vertex count (nu_min)")
    p.add_argument("--max-v", type=int, default=150, help="hard maximum vertex count (nu_max)")
    _add_seed_out(p)

    p = sub.add_parser("eval", help="compare generated graphs against a reference set", formatter_class=fmt)
    p.add_argument("--generated", default=None, help="graph (JSON lines) or sequence file (required)")
    p.add_argument("--reference", default=None, help="graph (JSON lines) or sequence file (required)")
    _add_seed_out(p)

    p = sub.add_parser("plotdata", help="histogram CSVs for graph or sequence files", formatter_class=fmt)
    p.add_argument("inputs", nargs="+", help="graph or sequence files")
    _add_seed_out(p)
    return parser


def _parse_bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


def _explicit_dests(parser: argparse.ArgumentParser, argv: list[str], command: str) -> set[str]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    seen = set()
    for action in sub._actions:
        if any(tok == opt or tok.startswith(opt + "=") for opt in action.option_strings for tok in argv):
            seen.add(action.dest)
    return seen


def resolve(argv: list[str] | None = None, environ=None) -> argparse.Namespace:
    """Parse ``argv`` and fill unset flags from environment and config file."""
    argv = list(sys.argv[1:] if argv is None else argv)
    environ = os.environ if environ is None else environ
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    actions = {a.dest: a for a in sub._actions if a.option_strings and a.dest in CONFIG_KEYS}
    explicit = _explicit_dests(parser, argv, args.command)

    config = {}
    if args.config is None:
        args.config = environ.get(ENV_PREFIX + "CONFIG")
    if args.config:
        config = _load_config(args.config)
    unknown = set(config) - set(CONFIG_KEYS.values()) - {"version"}
    if unknown:
        raise CLIError("config", f"unknown config keys: {sorted(unknown)}")

    for dest, action in actions.items():
        if dest in explicit:
            continue
        env = environ.get(ENV_PREFIX + dest.upper())
        key = CONFIG_KEYS[dest]
        if env is not None:
            raw = env
        elif key in config:
            raw = config[key]
        else:
            continue
        try:
            value = action.type(raw) if action.type is not None and raw is not None else raw
        except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
            raise CLIError("config", f"bad value for {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise CLIError("config", f"{key} must be one of {list(action.choices)}, got {value!r}")
        setattr(args, dest, value)
    return args


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise CLIError("missing-input", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CLIError("config", f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise CLIError("config", "config file must hold a JSON object")
    if config.get("version") != CONFIG_VERSION:
        raise CLIError("config", f"config version must be {CONFIG_VERSION}, got {config.get('version')!r}")
    return config


def _require(args, *names):
    for name in names:
        value = getattr(args, name)
        if value is None:
            raise CLIError("missing-input", f"--{name.replace('_', '-')} is required")
        if not Path(value).is_file():
            raise CLIError("missing-input", f"file not found: {value}")


def _load_graphs(path) -> tuple[list[Graph], list[int] | None]:
    if is_sequence_file(path):
        seqs = read_sequences(path)
        return [replay(s) for s in seqs], [s.token_length for s in seqs]
    return read_graphs(path), None


def _manifest(out: Path, args, **extra) -> None:
    settings = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    write_json(out / "manifest.json", dict(command=args.command, settings=settings,
                                           created_utc=utc_now(), version=__version__, **extra))


def cmd_dataset(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        model = ModelSpec(args.model, args.n, p=args.p if args.model in ("er", "ws") else None,
                          m=args.m if args.model == "ba" else None, k=args.k if args.model == "ws" else None)
        spec = DatasetSpec(model, count=args.count, variant=args.variant, seed=args.seed)
    except ValueError as exc:
        raise CLIError("config", str(exc)) from None
    build_dataset(spec, out / "sequences.txt", out / "manifest.json")
    return [out / "sequences.txt", out / "manifest.json"]


def cmd_train(args) -> list[Path]:
    _require(args, "data")
    out = Path(args.out)
    try:
        hyper = HyperParams(h_v=args.h_v, h_e=args.h_e, h_g=args.h_g, h_r=args.h_r, h_msg=args.h_msg,
                            nu_rounds=args.rounds, enable_remove=args.enable_remove)
        config = TrainConfig(eta=args.lr, nu_epochs=args.epochs, data=args.data, seed=args.seed,
                             clip_norm=args.clip_norm, checkpoint_every=args.checkpoint_every)
    except ValueError as exc:
        raise CLIError("config", str(exc)) from None
    provenance = {"dataset_sha256": file_sha256(args.data), "eta": config.eta, "nu_epochs": config.nu_epochs}
    result = train(config, hyper=hyper, out_dir=out, provenance=provenance)
    _manifest(out, args, epoch_mean_loss=result.epoch_means())
    return [out / "checkpoint.json", out / "loss.csv"]


def cmd_sample(args) -> list[Path]:
    _require(args, "ckpt")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params, _ = load_checkpoint(args.ckpt)
    try:
        hyper = HyperParams(**dict(params.hyper.to_dict(), nu_min=args.min_v, nu_max=args.max_v))
    except ValueError as exc:
        raise CLIError("config", str(exc)) from None
    rng = seed_stream(args.seed, "sampling")
    frozen = params.frozen()
    graphs, seqs = [], []
    for _ in range(args.sample_count):
        g, s = sample_graph(frozen, rng, hyper)
        graphs.append(g)
        seqs.append(s)
    write_graphs(out / "graphs.jsonl", graphs)
    write_sequences(out / "sequences.txt", seqs)
    _manifest(out, args, checkpoint_sha256=file_sha256(args.ckpt))
    return [out / "graphs.jsonl", out / "sequences.txt"]


def cmd_eval(args) -> list[Path]:
    _require(args, "generated", "reference")
    gen, gen_len = _load_graphs(args.generated)
    ref, ref_len = _load_graphs(args.reference)
    if not gen or not ref:
        raise CLIError("missing-input", "generated and reference sets must be nonempty")
    report = compare_report(gen, ref, gen_len, ref_len)
    written = report.write(args.out)
    _manifest(Path(args.out), args)
    return written


def cmd_plotdata(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for path in args.inputs:
        if not Path(path).is_file():
            raise CLIError("missing-input", f"file not found: {path}")
        graphs, lengths = _load_graphs(path)
        written += write_histograms(out, Path(path).stem, GraphSetStats.of(graphs, lengths))
    _manifest(out, args)
    return written


COMMANDS = {"dataset": cmd_dataset, "train": cmd_train, "sample": cmd_sample,
            "eval": cmd_eval, "plotdata": cmd_plotdata}


def main(argv: list[str] | None = None) -> int:
    try:
        args = resolve(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        for path in COMMANDS[args.command](args):
            print(path)
    except CLIError as exc:
        print(f"error code={exc.code} message={json.dumps(str(exc))}", file=sys.stderr)
        return 2 if exc.code == "usage" else 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error code={type(exc).__name__} message={json.dumps(str(exc))}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
