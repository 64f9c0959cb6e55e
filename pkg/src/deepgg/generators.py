"""Erdős-Rényi, Barabási-Albert and Watts-Strogatz samplers.

Every sampler returns the graph together with its *process* construction
sequence, i.e. the operations the model's own algorithm performs. Replaying
the sequence reproduces the graph index for index.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .graph import Graph
from .sequences import N, AddEdge, ConstructionSequence

MODEL_KINDS = ("er", "ba", "ws")


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one probabilistic graph model.

    ``p`` is used by ER and WS, ``m`` by BA, ``k`` by WS.
    """

    kind: str
    n: int
    p: float | None = None
    m: int | None = None
    k: int | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if kind == "er":
            _check_er(self.n, self.p)
        elif kind == "ba":
            _check_ba(self.n, self.m)
        else:
            _check_ws(self.n, self.k, self.p)

    def sample(self, rng: np.random.Generator) -> tuple[Graph, ConstructionSequence]:
        if self.kind == "er":
            return generate_er(self.n, self.p, rng)
        if self.kind == "ba":
            return generate_ba(self.n, self.m, rng)
        return generate_ws(self.n, self.k, self.p, rng)

    def params(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None and k != "kind"}


def _check_er(n, p):
    if n is None or n < 0:
        raise ValueError(f"ER needs n >= 0, got {n}")
    if p is None or not 0.0 <= p <= 1.0:
        raise ValueError(f"ER needs 0 <= p <= 1, got {p}")


def _check_ba(n, m):
    if n is None or m is None or not 1 <= m < n:
        raise ValueError(f"BA needs 1 <= m < n, got n={n}, m={m}")


def _check_ws(n, k, p):
    if n is None or k is None or k % 2 or not 2 <= k < n:
        raise ValueError(f"WS needs even k with 2 <= k < n, got n={n}, k={k}")
    if p is None or not 0.0 <= p <= 1.0:
        raise ValueError(f"WS needs 0 <= p <= 1, got {p}")


def _emit(n: int, edges: list[tuple[int, int]]) -> tuple[Graph, ConstructionSequence]:
    ops = [N] * n + [AddEdge(s, t) for s, t in edges]
    return Graph(n, edges), ConstructionSequence(ops)


def generate_er(n: int, p: float, rng: np.random.Generator) -> tuple[Graph, ConstructionSequence]:
    """G(n, p): ``n`` vertices, then each pair ``i < j`` in lexicographic
    order gets the edge ``E j i`` with probability ``p``."""
    _check_er(n, p)
    edges = []
    if n > 1:
        coins = rng.random(n * (n - 1) // 2)
        c = 0
        for i in range(n):
            for j in range(i + 1, n):
                if coins[c] < p:
                    edges.append((j, i))
                c += 1
    return _emit(n, edges)


def generate_ba(n: int, m: int, rng: np.random.Generator) -> tuple[Graph, ConstructionSequence]:
    _check_ba(n, m)
    ops = [N] * m
    g = Graph(m)
    targets = list(range(m))
    repeated: list[int] = []
    cs = m
    while cs < n:
        ops.append(N)
        g.add_vertex()
        for ct in targets:
            ops.append(AddEdge(cs, ct))
            g.add_edge(cs, ct)
        repeated.extend(targets)
        repeated.extend([cs] * m)
        targets = _random_subset(repeated, m, rng)
        cs += 1
    return g, ConstructionSequence(ops)


def _random_subset(seq: list[int], m: int, rng: np.random.Generator) -> list[int]:
    # m distinct draws from a multiset; repetition makes the draw degree-proportional
    chosen: dict[int, None] = {}
    while len(chosen) < m:
        chosen[seq[rng.integers(len(seq))]] = None
    return list(chosen)


def generate_ws(n: int, k: int, p: float, rng: np.random.Generator) -> tuple[Graph, ConstructionSequence]:
    """Ring lattice with ``k/2`` clockwise neighbours per vertex, rewired.

    Lattice edges are scanned neighbour offset first, then vertex. Each one
    ``(i, i+j)`` is replaced with probability ``p`` by ``(i, u)`` with ``u``
    uniform over the vertices not adjacent to ``i``. The emitted sequence
    lists the final edges in scan order, so it only uses ``N`` and ``E``.
    """
    _check_ws(n, k, p)
    adj = [set() for _ in range(n)]
    slots = []
    for j in range(1, k // 2 + 1):
        for i in range(n):
            t = (i + j) % n
            adj[i].add(t)
            adj[t].add(i)
            slots.append((i, t))
    for idx, (i, t) in enumerate(slots):
        if rng.random() >= p:
            continue
        free = [u for u in range(n) if u != i and u not in adj[i]]
        if not free:
            continue
        u = free[rng.integers(len(free))]
        adj[i].discard(t)
        adj[t].discard(i)
        adj[i].add(u)
        adj[u].add(i)
        slots[idx] = (i, u)
    return _emit(n, slots)
