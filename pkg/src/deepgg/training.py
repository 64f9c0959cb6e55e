"""Datasets, the SGD training loop and checkpoints."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .autodiff import NonFiniteError, backward, clip_grad_norm, sgd_step
from .generators import ModelSpec
from .model import HyperParams, ModelParams, count_decisions, teacher_forced_loss
from .sequences import ConstructionSequence, extract_traversal, read_sequences, replay, validate, write_sequences

log = logging.getLogger(__name__)

VARIANTS = ("process", "bfs", "dfs")
CHECKPOINT_FORMAT = "deepgg-checkpoint"
CHECKPOINT_VERSION = 1
LOSS_COLUMNS = ("epoch", "step", "loss", "n_v_final", "wall_ms")


def seed_stream(seed: int, purpose: str) -> np.random.Generator:
    """Independent generator for one purpose ("dataset", "init", "shuffle", ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(purpose.encode())]))


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_json(path: str | Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- datasets ----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    model: ModelSpec
    count: int = 1000
    variant: str = "process"
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def manifest(self) -> dict:
        return {"kind": self.model.kind, "params": self.model.params(), "count": self.count,
                "variant": self.variant, "seed": self.seed}


def generate_sequences(spec: DatasetSpec) -> list[ConstructionSequence]:
    rng = seed_stream(spec.seed, "dataset")
    seqs = []
    for _ in range(spec.count):
        g, seq = spec.model.sample(rng)
        if spec.variant != "process":
            seq = extract_traversal(g, spec.variant, rng)
        seqs.append(seq)
    return seqs


def build_dataset(spec: DatasetSpec, path: str | Path, manifest_path: str | Path | None = None
                  ) -> list[ConstructionSequence]:
    """Sample ``spec.count`` sequences into ``path`` and write a manifest beside it."""
    path = Path(path)
    seqs = generate_sequences(spec)
    write_sequences(path, seqs)
    manifest = dict(spec.manifest(), sequences=path.name, sequences_sha256=file_sha256(path),
                    created_utc=utc_now())
    write_json(manifest_path or path.with_name(path.stem + ".manifest.json"), manifest)
    return seqs


# -- checkpoints -------------------------------------------------------------

class CheckpointError(ValueError):
    pass


def save_checkpoint(params: ModelParams, path: str | Path, seed: int | None = None,
                    provenance: dict | None = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hyper": params.hyper.to_dict(),
        "params": {name: {"shape": list(a.shape), "data": a.ravel().tolist()}
                   for name, a in params.arrays().items()},
        "seed": seed,
        "provenance": provenance or {},
    }
    write_json(path, doc)


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    """Returns the parameters and the raw document (seed, provenance, ...)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}")
    try:
        hyper = HyperParams(**doc["hyper"])
        arrays = {n: np.array(e["data"], dtype=np.float64).reshape(e["shape"]) for n, e in doc["params"].items()}
        params = ModelParams.from_arrays(hyper, arrays)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from None
    return params, doc


# -- training ----------------------------------------------------------------

class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    eta: float = 1e-4
    nu_epochs: int = 8
    data: str | None = None
    seed: int = 0
    clip_norm: float | None = None
    checkpoint_every: int | None = None

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be >= 0")
        if self.nu_epochs < 1:
            raise ValueError("nu_epochs must be >= 1")


@dataclass
class StepRecord:
    epoch: int
    step: int
    loss: float
    n_v_final: int
    wall_ms: float


@dataclass
class TrainResult:
    params: ModelParams
    records: list[StepRecord] = field(default_factory=list)

    def epoch_means(self) -> list[float]:
        by_epoch: dict[int, list[float]] = {}
        for r in self.records:
            by_epoch.setdefault(r.epoch, []).append(r.loss)
        return [float(np.mean(by_epoch[e])) for e in sorted(by_epoch)]


def write_loss_csv(path: str | Path, records: list[StepRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOSS_COLUMNS)
        for r in records:
            w.writerow([r.epoch, r.step, repr(r.loss), r.n_v_final, f"{r.wall_ms:.3f}"])


def train(config: TrainConfig, sequences: list[ConstructionSequence] | None = None,
          params: ModelParams | None = None, hyper: HyperParams | None = None,
          out_dir: str | Path | None = None, provenance: dict | None = None) -> TrainResult:
    """Per-sequence SGD on the teacher-forced loss.

    Sequences come from ``sequences`` or ``config.data``. Parameters are
    initialised from the ``init`` seed stream unless given. With ``out_dir``
    the loss curve (``loss.csv``) and ``checkpoint.json`` are written there.
    """
    if sequences is None:
        if config.data is None:
            raise ValueError("no training data given")
        sequences = read_sequences(config.data)
    source = config.data or "<memory>"
    for i, seq in enumerate(sequences):
        report = validate(seq)
        if not report:
            raise TrainingError(f"{source}:{i + 2}: invalid sequence at op {report.index}: {report.reason}")
    if not sequences:
        raise TrainingError(f"{source}: no sequences")
    if params is None:
        params = ModelParams.initialize(hyper or HyperParams(), seed_stream(config.seed, "init"))
    n_v_final = [replay(s).n_v for s in sequences]
    shuffle = seed_stream(config.seed, "shuffle")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    result = TrainResult(params)
    step = 0
    for epoch in range(1, config.nu_epochs + 1):
        for i in shuffle.permutation(len(sequences)):
            t0 = time.perf_counter()
            try:
                loss = teacher_forced_loss(params, sequences[i])
                backward(loss)
            except NonFiniteError as exc:
                raise TrainingError(f"non-finite value at epoch {epoch}, step {step}, "
                                    f"sequence {i} ({source}:{i + 2}): {exc}") from exc
            if config.clip_norm is not None:
                clip_grad_norm(params.parameters(), config.clip_norm)
            sgd_step(params.parameters(), config.eta)
            result.records.append(StepRecord(epoch, step, loss.item(), n_v_final[i],
                                             (time.perf_counter() - t0) * 1e3))
            step += 1
        log.info("epoch %d mean loss %.4f", epoch, result.epoch_means()[-1])
        if out is not None and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            save_checkpoint(params, out / f"checkpoint_epoch{epoch}.json", config.seed, provenance)
    if out is not None:
        write_loss_csv(out / "loss.csv", result.records)
        save_checkpoint(params, out / "checkpoint.json", config.seed, provenance)
    return result


def mean_decision_loss(params: ModelParams, seqs: list[ConstructionSequence]) -> float:
    """Loss per supervised decision, averaged over ``seqs``."""
    return float(np.mean([teacher_forced_loss(params, s).item() / count_decisions(s) for s in seqs]))
