"""Graph property distributions and two-sample comparisons."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path
from scipy.special import kolmogorov

from .graph import Graph, connected_components

EULER_GAMMA = 0.57721566490153286
REPORT_VERSION = 1


def degree_histogram(graphs: Iterable[Graph]) -> dict[int, int]:
    """Pooled degree counts over all vertices of all graphs."""
    counts: Counter[int] = Counter()
    for g in graphs:
        counts.update(g.degrees())
    return dict(sorted(counts.items()))


def degree_sample(graphs: Iterable[Graph]) -> np.ndarray:
    return np.array([d for g in graphs for d in g.degrees()], dtype=float)


def _largest_component(g: Graph) -> list[int]:
    comps = connected_components(g)
    return sorted(max(comps, key=len)) if comps else []


def average_path_length(g: Graph) -> float:
    """Mean shortest-path length over vertex pairs of the largest component.

    Returns 0.0 when that component has fewer than two vertices.
    """
    verts = _largest_component(g)
    n = len(verts)
    if n < 2:
        return 0.0
    pos = {v: i for i, v in enumerate(verts)}
    rows, cols = [], []
    for s, t in g.edges():
        if s in pos and t in pos:
            rows += [pos[s], pos[t]]
            cols += [pos[t], pos[s]]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    dist = shortest_path(adj, method="D", unweighted=True, directed=False)
    total = int(round(dist.sum()))  # integer distances; every pair counted twice
    return total / (n * (n - 1))


def clustering_coefficient(g: Graph) -> float:
    """Mean local clustering; vertices of degree < 2 contribute 0."""
    if g.n_v == 0:
        return 0.0
    adj = g._adj
    local = []
    for v in range(g.n_v):
        nb = adj[v]
        d = len(nb)
        if d < 2:
            local.append(0.0)
            continue
        links = sum(len(adj[u] & nb) for u in nb) // 2
        local.append(links / (d * (d - 1) / 2))
    return math.fsum(local) / g.n_v


class DomainError(ValueError):
    pass


def analytic_avg_path_er(n: float, p: float) -> float:
    """Closed-form average path length of G(n, p) (Fronczak et al.)."""
    denom = math.log(p * n) if p * n > 0 else -math.inf
    if denom <= 0:
        raise DomainError(f"ln(p*n) must be positive, got p*n={p * n}")
    return (math.log(n) - EULER_GAMMA) / denom + 0.5


def analytic_avg_path_ba(n: float, m: float) -> float:
    """Closed-form average path length of a Barabási-Albert graph (Fronczak et al.)."""
    if n <= 1 or m <= 0:
        raise DomainError(f"need n > 1 and m > 0, got n={n}, m={m}")
    denom = math.log(math.log(n)) + math.log(m / 2)
    if denom <= 0:
        raise DomainError(f"ln ln n + ln(m/2) must be positive, got {denom}")
    return (math.log(n) - math.log(m / 2) - 1 - EULER_GAMMA) / denom + 1.5


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    ``D`` is the largest gap between the empirical CDFs; the p-value is the
    Kolmogorov survival function at ``sqrt(n_a n_b / (n_a + n_b)) * D``.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise ValueError("both samples must be nonempty")
    pts = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pts, side="right") / na
    cdf_b = np.searchsorted(b, pts, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = math.sqrt(na * nb / (na + nb))
    p = float(np.clip(kolmogorov(en * d), 0.0, 1.0))
    return KSResult(d, p)


def _summary(x: Sequence[float]) -> dict:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return {"count": 0, "mean": None, "std": None, "min": None, "max": None}
    return {"count": int(len(x)), "mean": float(x.mean()), "std": float(x.std()),
            "min": float(x.min()), "max": float(x.max())}


def sequence_token_length(g: Graph) -> int:
    """Token length of any N/E-only construction sequence of ``g``."""
    return g.n_v + 3 * g.n_e


@dataclass
class GraphSetStats:
    n_graphs: int
    degree_histogram: dict[int, int]
    avg_path_length: list[float]
    connected: list[bool]
    clustering: list[float]
    sequence_lengths: list[int]

    @classmethod
    def of(cls, graphs: Sequence[Graph], sequence_lengths: Sequence[int] | None = None) -> "GraphSetStats":
        return cls(
            n_graphs=len(graphs),
            degree_histogram=degree_histogram(graphs),
            avg_path_length=[average_path_length(g) for g in graphs],
            connected=[len(connected_components(g)) == 1 for g in graphs],
            clustering=[clustering_coefficient(g) for g in graphs],
            sequence_lengths=list(sequence_lengths) if sequence_lengths is not None
            else [sequence_token_length(g) for g in graphs],
        )

    def degree_values(self) -> np.ndarray:
        return np.repeat(list(self.degree_histogram), list(self.degree_histogram.values())).astype(float)

    def summary(self) -> dict:
        apl = np.asarray(self.avg_path_length)
        conn = np.asarray(self.connected, dtype=bool)
        return {
            "n_graphs": self.n_graphs,
            "degree": _summary(self.degree_values()),
            "avg_path_length_all": _summary(apl),
            "avg_path_length_connected": _summary(apl[conn]) if len(apl) else _summary([]),
            "clustering": _summary(self.clustering),
            "sequence_length": _summary(self.sequence_lengths),
        }


@dataclass
class StatsReport:
    generated: GraphSetStats
    reference: GraphSetStats
    ks: dict[str, KSResult | None] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def side(s: GraphSetStats) -> dict:
            d = asdict(s)
            d["degree_histogram"] = {str(k): v for k, v in s.degree_histogram.items()}
            d["sequence_length_histogram"] = {str(k): v for k, v in sorted(Counter(s.sequence_lengths).items())}
            d["summary"] = s.summary()
            return d

        return {
            "version": REPORT_VERSION,
            "generated": side(self.generated),
            "reference": side(self.reference),
            "ks": {k: asdict(v) if v is not None else None for k, v in self.ks.items()},
        }

    def write(self, out_dir: str | Path) -> list[Path]:
        """``report.json`` plus one per-graph CSV and histogram CSVs per side."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "report.json"]
        with open(written[0], "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        for name, s in (("generated", self.generated), ("reference", self.reference)):
            path = out / f"{name}_graphs.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["graph", "avg_path_length", "connected", "clustering", "sequence_length"])
                for i, row in enumerate(zip(s.avg_path_length, s.connected, s.clustering, s.sequence_lengths)):
                    w.writerow([i, repr(row[0]), int(row[1]), repr(row[2]), row[3]])
            written.append(path)
            written.extend(write_histograms(out, name, s))
        return written


def write_histogram_csv(path: str | Path, hist: dict) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "count"])
        for k, v in hist.items():
            w.writerow([k, v])
    return Path(path)


def binned(values: Iterable[float], width: float) -> dict[str, int]:
    """Histogram keyed by the lower bin edge, formatted for plotting."""
    counts = Counter(math.floor(v / width + 1e-9) for v in values)
    digits = max(0, -math.floor(math.log10(width))) if width < 1 else 0
    return {f"{k * width:.{digits}f}": c for k, c in sorted(counts.items())}


def write_histograms(out_dir: Path, prefix: str, s: GraphSetStats) -> list[Path]:
    return [
        write_histogram_csv(out_dir / f"{prefix}_degree_hist.csv", s.degree_histogram),
        write_histogram_csv(out_dir / f"{prefix}_path_length_hist.csv", binned(s.avg_path_length, 0.05)),
        write_histogram_csv(out_dir / f"{prefix}_clustering_hist.csv", binned(s.clustering, 0.02)),
        write_histogram_csv(out_dir / f"{prefix}_sequence_length_hist.csv",
                            dict(sorted(Counter(s.sequence_lengths).items()))),
    ]


def compare_report(generated: Sequence[Graph], reference: Sequence[Graph],
                   generated_lengths: Sequence[int] | None = None,
                   reference_lengths: Sequence[int] | None = None) -> StatsReport:
    """Statistics of both graph sets plus KS tests of generated against reference."""
    if not generated or not reference:
        raise ValueError("both graph sets must be nonempty")
    gen = GraphSetStats.of(generated, generated_lengths)
    ref = GraphSetStats.of(reference, reference_lengths)
    pairs = {
        "degree": (gen.degree_values(), ref.degree_values()),
        "avg_path_length": (gen.avg_path_length, ref.avg_path_length),
        "clustering": (gen.clustering, ref.clustering),
        "sequence_length": (gen.sequence_lengths, ref.sequence_lengths),
    }
    # a set of empty graphs has no degrees to compare
    ks = {k: ks_two_sample(a, b) if len(a) and len(b) else None for k, (a, b) in pairs.items()}
    return StatsReport(gen, ref, ks)
