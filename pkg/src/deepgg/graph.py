"""Undirected simple graphs with contiguous vertex indices."""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    """Base class for invalid graph mutations."""


class VertexIndexError(GraphError, IndexError):
    pass


class SelfLoopError(GraphError):
    pass


class DuplicateEdgeError(GraphError):
    pass


class Graph:
    """Undirected simple graph on vertices ``0 .. n_v - 1``.

    Removing a vertex shifts every higher index down by one, so the index
    space stays contiguous after any sequence of mutations.
    """

    __slots__ = ("_adj", "_n_e")

    def __init__(self, n_v: int = 0, edges: Iterable[tuple[int, int]] = ()):
        self._adj: list[set[int]] = [set() for _ in range(n_v)]
        self._n_e = 0
        for s, t in edges:
            self.add_edge(s, t)

    @property
    def n_v(self) -> int:
        return len(self._adj)

    @property
    def n_e(self) -> int:
        return self._n_e

    def __len__(self) -> int:
        return len(self._adj)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._adj == other._adj

    def __repr__(self) -> str:
        return f"Graph(n_v={self.n_v}, n_e={self.n_e})"

    def copy(self) -> "Graph":
        g = Graph()
        g._adj = [set(a) for a in self._adj]
        g._n_e = self._n_e
        return g

    def _check_index(self, v: int) -> None:
        if not 0 <= v < len(self._adj):
            raise VertexIndexError(f"vertex {v} out of range for graph with {len(self._adj)} vertices")

    def add_vertex(self) -> int:
        self._adj.append(set())
        return len(self._adj) - 1

    def add_edge(self, s: int, t: int) -> None:
        self._check_index(s)
        self._check_index(t)
        if s == t:
            raise SelfLoopError(f"self-loop at vertex {s}")
        if t in self._adj[s]:
            raise DuplicateEdgeError(f"edge {{{s}, {t}}} already present")
        self._adj[s].add(t)
        self._adj[t].add(s)
        self._n_e += 1

    def remove_vertex(self, v: int) -> None:
        """Delete ``v`` with its incident edges and compact the indices above it."""
        self._check_index(v)
        self._n_e -= len(self._adj[v])
        del self._adj[v]
        self._adj = [{u - 1 if u > v else u for u in nbrs if u != v} for nbrs in self._adj]

    def has_edge(self, s: int, t: int) -> bool:
        return 0 <= s < len(self._adj) and t in self._adj[s]

    def degree(self, v: int) -> int:
        self._check_index(v)
        return len(self._adj[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self._adj]

    def neighbors(self, v: int) -> list[int]:
        self._check_index(v)
        return sorted(self._adj[v])

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(s, t)`` with ``s < t``, sorted lexicographically."""
        return [(s, t) for s, nbrs in enumerate(self._adj) for t in sorted(nbrs) if s < t]

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_v, self.n_v))
        for s, t in self.edges():
            a[s, t] = a[t, s] = 1.0
        return a

    def validate(self) -> None:
        """Raise :class:`GraphError` if any structural invariant is broken."""
        n = len(self._adj)
        count = 0
        for v, nbrs in enumerate(self._adj):
            for u in nbrs:
                if not 0 <= u < n:
                    raise GraphError(f"neighbor {u} of {v} out of range")
                if u == v:
                    raise GraphError(f"self-loop at {v}")
                if v not in self._adj[u]:
                    raise GraphError(f"asymmetric adjacency between {v} and {u}")
            count += len(nbrs)
        if count != 2 * self._n_e:
            raise GraphError(f"degree sum {count} != 2 * n_e ({self._n_e})")

    def to_dict(self) -> dict:
        return {"n": self.n_v, "edges": [list(e) for e in self.edges()]}

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls(int(d["n"]), (tuple(e) for e in d["edges"]))


def connected_components(g: Graph) -> list[set[int]]:
    """Vertex sets of the connected components, ordered by smallest member."""
    seen = [False] * g.n_v
    components = []
    for root in range(g.n_v):
        if seen[root]:
            continue
        seen[root] = True
        comp = {root}
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for u in g._adj[v]:
                if not seen[u]:
                    seen[u] = True
                    comp.add(u)
                    queue.append(u)
        components.append(comp)
    return components


def _refine_colors(graphs: list[Graph]) -> list[list[int]]:
    # joint 1-WL colour refinement so colour ids are comparable across graphs
    colors = [[len(a) for a in g._adj] for g in graphs]
    n_classes = len({c for cs in colors for c in cs})
    while True:
        palette: dict[tuple, int] = {}
        new = []
        for g, cs in zip(graphs, colors):
            new.append([
                palette.setdefault((cs[v], tuple(sorted(cs[u] for u in g._adj[v]))), len(palette))
                for v in range(g.n_v)
            ])
        colors = new
        if len(palette) == n_classes:
            return colors
        n_classes = len(palette)


def are_isomorphic(g1: Graph, g2: Graph) -> bool:
    """Exact isomorphism test by backtracking over colour-refined vertex classes.

    Meant for small graphs (a few hundred vertices at most); worst-case
    exponential.
    """
    if g1.n_v != g2.n_v or g1.n_e != g2.n_e:
        return False
    if sorted(g1.degrees()) != sorted(g2.degrees()):
        return False
    c1, c2 = _refine_colors([g1, g2])
    if sorted(c1) != sorted(c2):
        return False
    n = g1.n_v
    if n == 0:
        return True

    by_color: dict[int, list[int]] = {}
    for w in range(n):
        by_color.setdefault(c2[w], []).append(w)

    # visit rare colours first, then grow along edges so adjacency checks bite early
    order: list[int] = []
    placed = [False] * n
    class_size = {c: len(ws) for c, ws in by_color.items()}
    remaining = sorted(range(n), key=lambda v: (class_size[c1[v]], v))
    for start in remaining:
        if placed[start]:
            continue
        placed[start] = True
        order.append(start)
        frontier = [start]
        while frontier:
            nxt = []
            for v in frontier:
                for u in sorted(g1._adj[v], key=lambda u: (class_size[c1[u]], u)):
                    if not placed[u]:
                        placed[u] = True
                        order.append(u)
                        nxt.append(u)
            frontier = nxt

    mapping = [-1] * n
    used = [False] * n
    adj1, adj2 = g1._adj, g2._adj

    def extend(i: int) -> bool:
        if i == n:
            return True
        v = order[i]
        mapped_nbrs = [mapping[u] for u in adj1[v] if mapping[u] >= 0]
        for w in by_color[c1[v]]:
            if used[w]:
                continue
            if any(x not in adj2[w] for x in mapped_nbrs):
                continue
            # mapped non-neighbours of v must map to non-neighbours of w
            if sum(1 for x in adj2[w] if used[x]) != len(mapped_nbrs):
                continue
            mapping[v] = w
            used[w] = True
            if extend(i + 1):
                return True
            mapping[v] = -1
            used[w] = False
        return False

    return extend(0)


def write_graphs(path: str | Path, graphs: Iterable[Graph]) -> None:
    """Write graphs as JSON lines: ``{"n": <int>, "edges": [[s, t], ...]}``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_dict(), separators=(", ", ": ")) + "\n")


def read_graphs(path: str | Path) -> list[Graph]:
    graphs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                graphs.append(Graph.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad graph record: {exc}") from exc
    return graphs

