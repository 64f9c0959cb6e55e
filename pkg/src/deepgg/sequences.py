"""Construction sequences: the N / E / R operation grammar.

A construction sequence is an ordered list of graph operations applied to
the empty graph. ``N`` adds a vertex, ``E s t`` adds the undirected edge
``{s, t}``, ``R v`` removes vertex ``v`` (higher indices shift down).

Text format, one sequence per line after a ``#conseq v1`` header::

    #conseq v1
    N N E 1 0
    N N N E 2 0 R 1
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

from .graph import Graph, GraphError

FILE_HEADER = "#conseq v1"


class AddNode(NamedTuple):
    def tokens(self) -> list[str]:
        return ["N"]


class AddEdge(NamedTuple):
    src: int
    tgt: int

    def tokens(self) -> list[str]:
        return ["E", str(self.src), str(self.tgt)]


class RemoveNode(NamedTuple):
    v: int

    def tokens(self) -> list[str]:
        return ["R", str(self.v)]


SequenceOp = Union[AddNode, AddEdge, RemoveNode]

N = AddNode()


class InvalidSequence(ValueError):
    """Replaying a sequence hit an invalid graph operation."""

    def __init__(self, index: int, op: SequenceOp | None, reason: str):
        self.index = index
        self.op = op
        self.reason = reason
        super().__init__(f"op {index} ({' '.join(op.tokens()) if op else '?'}): {reason}")


class SequenceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ConstructionSequence:
    ops: tuple[SequenceOp, ...] = ()

    def __init__(self, ops: Iterable[SequenceOp] = ()):
        object.__setattr__(self, "ops", tuple(ops))

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[SequenceOp]:
        return iter(self.ops)

    def __getitem__(self, i):
        return self.ops[i]

    def __add__(self, other: "ConstructionSequence") -> "ConstructionSequence":
        return ConstructionSequence(self.ops + tuple(other))

    def tokens(self) -> list[str]:
        return [tok for op in self.ops for tok in op.tokens()]

    @property
    def token_length(self) -> int:
        return sum(1 if isinstance(op, AddNode) else 3 if isinstance(op, AddEdge) else 2
                   for op in self.ops)

    def counts(self) -> dict[str, int]:
        c = {"N": 0, "E": 0, "R": 0}
        for op in self.ops:
            c[op.tokens()[0]] += 1
        return c

    def to_line(self) -> str:
        return " ".join(self.tokens())

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "ConstructionSequence":
        ops: list[SequenceOp] = []
        i = 0
        while i < len(tokens):
            tag = tokens[i]
            try:
                if tag == "N":
                    ops.append(N)
                    i += 1
                elif tag == "E":
                    ops.append(AddEdge(_natural(tokens[i + 1]), _natural(tokens[i + 2])))
                    i += 3
                elif tag == "R":
                    ops.append(RemoveNode(_natural(tokens[i + 1])))
                    i += 2
                else:
                    raise SequenceFormatError(f"unknown operation label {tag!r} at token {i}")
            except IndexError:
                raise SequenceFormatError(f"operation {tag!r} at token {i} is missing parameters") from None
        return cls(ops)

    @classmethod
    def parse(cls, line: str) -> "ConstructionSequence":
        return cls.from_tokens(line.split())

    def __str__(self) -> str:
        return "[" + self.to_line() + "]"


def _natural(tok: str) -> int:
    if not tok.isdigit():
        raise SequenceFormatError(f"expected a natural number, got {tok!r}")
    return int(tok)


def apply_op(g: Graph, op: SequenceOp) -> None:
    if isinstance(op, AddNode):
        g.add_vertex()
    elif isinstance(op, AddEdge):
        g.add_edge(op.src, op.tgt)
    elif isinstance(op, RemoveNode):
        g.remove_vertex(op.v)
    else:
        raise TypeError(f"not a sequence operation: {op!r}")


def replay(seq: Iterable[SequenceOp]) -> Graph:
    """Apply ``seq`` to the empty graph.

    Raises :class:`InvalidSequence` naming the first offending operation.
    """
    g = Graph()
    for i, op in enumerate(seq):
        try:
            apply_op(g, op)
        except GraphError as exc:
            raise InvalidSequence(i, op, str(exc)) from exc
    return g


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    index: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def validate(seq: Iterable[SequenceOp]) -> ValidationReport:
    try:
        replay(seq)
    except InvalidSequence as exc:
        return ValidationReport(False, exc.index, exc.reason)
    return ValidationReport(True)


def extract_traversal(g: Graph, mode: str, rng: np.random.Generator) -> ConstructionSequence:
    """Construction sequence of ``g`` by breadth- or depth-first discovery.

    Vertex labels are shuffled uniformly at random first; after that the
    traversal is deterministic: roots and neighbours are taken in ascending
    shuffled-label order, and every component is visited. A vertex emits
    ``N`` when discovered, followed by one ``E`` to each previously
    discovered neighbour (ascending discovery index).
    """
    if mode not in ("bfs", "dfs"):
        raise ValueError(f"mode must be 'bfs' or 'dfs', got {mode!r}")
    n = g.n_v
    perm = rng.permutation(n)  # old label -> new label
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    nbrs = [sorted(int(perm[u]) for u in g._adj[int(inv[v])]) for v in range(n)]

    order = [-1] * n  # new label -> discovery index
    ops: list[SequenceOp] = []
    found = 0

    def discover(v: int) -> None:
        nonlocal found
        idx = found
        found += 1
        order[v] = idx
        ops.append(N)
        for u in sorted(int(order[w]) for w in nbrs[v] if order[w] >= 0):
            ops.append(AddEdge(idx, u))

    for root in range(n):
        if order[root] >= 0:
            continue
        discover(root)
        if mode == "bfs":
            queue = [root]
            head = 0
            while head < len(queue):
                v = queue[head]
                head += 1
                for u in nbrs[v]:
                    if order[u] < 0:
                        discover(u)
                        queue.append(u)
        else:
            stack = [(root, iter(nbrs[root]))]
            while stack:
                v, it = stack[-1]
                for u in it:
                    if order[u] < 0:
                        discover(u)
                        stack.append((u, iter(nbrs[u])))
                        break
                else:
                    stack.pop()
    return ConstructionSequence(ops)


def write_sequences(path: str | Path, seqs: Iterable[ConstructionSequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(FILE_HEADER + "\n")
        for seq in seqs:
            fh.write(seq.to_line() + "\n")


def read_sequences(path: str | Path) -> list[ConstructionSequence]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != FILE_HEADER:
        raise SequenceFormatError(f"{path}:1: missing {FILE_HEADER!r} header")
    seqs = []
    for lineno, line in enumerate(lines[1:], 2):
        try:
            seqs.append(ConstructionSequence.parse(line))
        except SequenceFormatError as exc:
            raise SequenceFormatError(f"{path}:{lineno}: {exc}") from None
    return seqs


def is_sequence_file(path: str | Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().rstrip("\n") == FILE_HEADER
