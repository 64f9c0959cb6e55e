"""The DeepGG deep state machine.

The machine's memory is the graph built so far together with a vertex
embedding per vertex, an edge embedding per edge and a graph embedding.
Two states, ``add_node`` and ``add_edge`` (plus ``remove_node`` when
enabled), each own a categorical head over the global action set; the
chosen action is executed and names the next state. Adding an edge asks
two more heads for a source and then a target vertex.

After every executed operation the vertex embeddings go through
``nu_rounds`` rounds of GRU message passing and the graph embedding is
refreshed from a sigmoid-reduced vertex embedding, one normalised graph
convolution and a mean over vertices.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import Graph
from .sequences import AddEdge, AddNode, ConstructionSequence, RemoveNode, SequenceOp, validate

# global action set; index into every transition head
A_NODE, A_EDGE, A_STOP, A_REMOVE = 0, 1, 2, 3
ACTION_NAMES = ("add_node", "add_edge", "stop", "remove_node")

S_NODE, S_EDGE, S_REMOVE = "add_node", "add_edge", "remove_node"
_STATE_OF_ACTION = {A_NODE: S_NODE, A_EDGE: S_EDGE, A_REMOVE: S_REMOVE}


@dataclass
class HyperParams:
    h_v: int = 16
    h_e: int = 16
    h_g: int = 32
    h_r: int = 7
    h_msg: int = 32
    nu_rounds: int = 2
    nu_max: int = 150
    nu_min: int | None = None
    enable_remove: bool = False

    def __post_init__(self):
        for name in ("h_v", "h_e", "h_g", "h_r", "h_msg"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.nu_rounds < 0:
            raise ValueError("nu_rounds must be >= 0")
        if self.nu_max < 1:
            raise ValueError("nu_max must be >= 1")
        if self.nu_min is not None and not 0 <= self.nu_min <= self.nu_max:
            raise ValueError(f"need 0 <= nu_min <= nu_max, got {self.nu_min} > {self.nu_max}")

    @property
    def n_actions(self) -> int:
        return 4 if self.enable_remove else 3

    @property
    def states(self) -> tuple[str, ...]:
        return (S_NODE, S_EDGE, S_REMOVE) if self.enable_remove else (S_NODE, S_EDGE)

    @property
    def choice_heads(self) -> tuple[str, ...]:
        return ("source", "target", "remove") if self.enable_remove else ("source", "target")

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(hp: HyperParams) -> dict[str, tuple[int, ...]]:
    shapes = {
        "init_v.W": (hp.h_v, hp.h_g), "init_v.b": (hp.h_v,),
        "init_e.W": (hp.h_e, 2 * hp.h_v), "init_e.b": (hp.h_e,),
        "message.W": (hp.h_msg, 2 * hp.h_v + hp.h_e), "message.b": (hp.h_msg,),
    }
    for gate in "zrh":
        shapes[f"gru.W_{gate}"] = (hp.h_v, hp.h_msg)
        shapes[f"gru.U_{gate}"] = (hp.h_v, hp.h_v)
        shapes[f"gru.b_{gate}"] = (hp.h_v,)
    shapes["reduc.W"] = (hp.h_r, hp.h_v)
    shapes["reduc.b"] = (hp.h_r,)
    shapes["conv.W"] = (hp.h_r, hp.h_g)
    for state in hp.states:
        shapes[f"transition.{state}.W"] = (hp.n_actions, hp.h_g)
        shapes[f"transition.{state}.b"] = (hp.n_actions,)
    for head in hp.choice_heads:
        shapes[f"choice.{head}.W"] = (1, hp.h_g + 2 * hp.h_v)
        shapes[f"choice.{head}.b"] = (1,)
    return shapes


def _fan_in(name: str, shapes: dict) -> int:
    if name == "conv.W":  # applied as H @ W, so inputs run along axis 0
        return shapes[name][0]
    prefix, last = name.rsplit(".", 1)
    if last.startswith("b"):
        name = f"{prefix}.W{last[1:]}"  # bias takes its weight's fan-in
    return shapes[name][1]


@dataclass
class ModelParams:
    """All learnable tensors of one model, keyed by ``<submodule>.<name>``."""

    hyper: HyperParams
    tensors: dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def initialize(cls, hyper: HyperParams, rng: np.random.Generator) -> "ModelParams":
        shapes = param_shapes(hyper)
        tensors = {}
        for name, shape in shapes.items():
            bound = 1.0 / math.sqrt(_fan_in(name, shapes))
            tensors[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)
        return cls(hyper, tensors)

    @classmethod
    def zeros(cls, hyper: HyperParams) -> "ModelParams":
        return cls(hyper, {n: Tensor(np.zeros(s), requires_grad=True) for n, s in param_shapes(hyper).items()})

    @classmethod
    def from_arrays(cls, hyper: HyperParams, arrays: dict[str, np.ndarray],
                    requires_grad: bool = True) -> "ModelParams":
        shapes = param_shapes(hyper)
        if set(arrays) != set(shapes):
            missing = sorted(set(shapes) - set(arrays))
            extra = sorted(set(arrays) - set(shapes))
            raise ValueError(f"parameter names do not match hyperparameters (missing={missing}, extra={extra})")
        tensors = {}
        for name, shape in shapes.items():
            a = np.array(arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            tensors[name] = Tensor(a, requires_grad=requires_grad)
        return cls(hyper, tensors)

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: t.value for n, t in self.tensors.items()}

    def frozen(self) -> "ModelParams":
        """Snapshot without gradient tracking, for inference."""
        return ModelParams.from_arrays(self.hyper, {n: a.copy() for n, a in self.arrays().items()},
                                       requires_grad=False)

    def parameters(self) -> list[Tensor]:
        return list(self.tensors.values())

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def group(self, prefix: str) -> dict[str, Tensor]:
        p = prefix + "."
        return {n[len(p):]: t for n, t in self.tensors.items() if n.startswith(p)}

    def n_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())


class Memory:
    """Graph under construction plus its embeddings.

    ``h_v`` stacks one row per vertex, ``h_e`` one row per entry of
    ``edges`` (insertion order), ``h_g`` is the graph embedding.
    """

    def __init__(self, hyper: HyperParams):
        self.hyper = hyper
        self.graph = Graph()
        self.edges: list[tuple[int, int]] = []
        self.h_v: Tensor | None = None
        self.h_e: Tensor | None = None
        self.h_g: Tensor = Tensor(np.zeros(hyper.h_g))
        self.last_added: int | None = None

    @property
    def n_v(self) -> int:
        return self.graph.n_v

    def add_vertex(self, h: Tensor) -> int:
        v = self.graph.add_vertex()
        row = ad.reshape(h, (1, self.hyper.h_v))
        self.h_v = row if self.h_v is None else ad.concat([self.h_v, row], axis=0)
        self.last_added = v
        return v

    def add_edge(self, s: int, t: int, h: Tensor) -> None:
        self.graph.add_edge(s, t)
        self.edges.append((s, t))
        row = ad.reshape(h, (1, self.hyper.h_e))
        self.h_e = row if self.h_e is None else ad.concat([self.h_e, row], axis=0)

    def remove_vertex(self, v: int) -> None:
        self.graph.remove_vertex(v)
        keep_v = [u for u in range(self.graph.n_v + 1) if u != v]
        self.h_v = ad.take_rows(self.h_v, keep_v) if keep_v else None
        keep_e = [i for i, (s, t) in enumerate(self.edges) if v not in (s, t)]
        self.edges = [(s - (s > v), t - (t > v)) for s, t in (self.edges[i] for i in keep_e)]
        self.h_e = ad.take_rows(self.h_e, keep_e) if keep_e else None
        if self.last_added == v:
            self.last_added = None
        elif self.last_added is not None and self.last_added > v:
            self.last_added -= 1

    def normalized_adjacency(self) -> np.ndarray:
        n = self.n_v
        a = np.eye(n)
        for s, t in self.edges:
            a[s, t] = a[t, s] = 1.0
        d = 1.0 / np.sqrt(a.sum(axis=1))
        return a * d[:, None] * d[None, :]


def init_vertex_embedding(params: ModelParams, h_g: Tensor) -> Tensor:
    return ad.sigmoid(ad.affine(params["init_v.W"], h_g, params["init_v.b"]))


def init_edge_embedding(params: ModelParams, h_s: Tensor, h_t: Tensor) -> Tensor:
    return ad.sigmoid(ad.affine(params["init_e.W"], ad.concat([h_s, h_t]), params["init_e.b"]))


def propagate(params: ModelParams, memory: Memory, rounds: int) -> None:
    """Synchronous message passing: ``rounds`` GRU updates of every vertex.

    Each undirected edge carries a message in both directions; the message
    into ``v`` from ``u`` is a linear map of ``h_u ++ h_v ++ h_uv`` and a
    vertex's GRU input is the sum of its incoming messages.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    n = memory.n_v
    if n == 0 or rounds == 0:
        return
    gru = params.group("gru")
    if memory.edges:
        e = np.asarray(memory.edges)
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        eidx = np.tile(np.arange(len(e)), 2)
        h_e = ad.take_rows(memory.h_e, eidx)
    h = memory.h_v
    for _ in range(rounds):
        if memory.edges:
            x = ad.concat([ad.take_rows(h, src), ad.take_rows(h, dst), h_e], axis=1)
            msg = ad.affine(params["message.W"], x, params["message.b"])
            agg = ad.segment_sum(msg, dst, n)
        else:
            agg = Tensor(np.zeros((n, memory.hyper.h_msg)))
        h = ad.gru_cell(agg, h, gru)
    memory.h_v = h


def readout_graph(params: ModelParams, memory: Memory) -> Tensor:
    if memory.n_v == 0:
        return Tensor(np.zeros(memory.hyper.h_g))
    reduced = ad.sigmoid(ad.affine(params["reduc.W"], memory.h_v, params["reduc.b"]))
    conv = ad.sigmoid(ad.matmul(ad.matmul(Tensor(memory.normalized_adjacency()), reduced), params["conv.W"]))
    return ad.mean_rows(conv)


def transition_logits(params: ModelParams, state: str, h_g: Tensor) -> Tensor:
    return ad.affine(params[f"transition.{state}.W"], h_g, params[f"transition.{state}.b"])


def _context(memory: Memory, vertex: int | None) -> Tensor:
    if vertex is None:
        return Tensor(np.zeros(memory.hyper.h_v))
    return ad.take(memory.h_v, vertex)


def vertex_choice_logits(params: ModelParams, head: str, memory: Memory,
                         context_vertex: int | None = None) -> Tensor:
    """One score per vertex from ``h_g ++ h_v ++ h_context``.

    The source (and remove) heads use the most recently added vertex as
    context, the target head the chosen source. Pass ``context_vertex``
    explicitly to override.
    """
    n = memory.n_v
    if n == 0:
        raise ValueError("cannot choose a vertex from an empty graph")
    if head == "target" and context_vertex is None:
        raise ValueError("target head needs the chosen source as context")
    ctx_v = memory.last_added if head != "target" and context_vertex is None else context_vertex
    x = ad.concat([ad.tile_rows(memory.h_g, n), memory.h_v, ad.tile_rows(_context(memory, ctx_v), n)], axis=1)
    scores = ad.affine(params[f"choice.{head}.W"], x, params[f"choice.{head}.b"])
    return ad.reshape(scores, (n,))


def _normalized_choice_loss(logits: Tensor, target: int, n_v: int, mask=None) -> Tensor | None:
    # a choice among one vertex carries no information; ln(1) = 0 would divide by zero
    if n_v <= 1:
        return None
    ce = ad.softmax_cross_entropy(logits, target, mask)
    return ce * (1.0 / math.log(n_v))


def action_of(op: SequenceOp) -> int:
    if isinstance(op, AddNode):
        return A_NODE
    if isinstance(op, AddEdge):
        return A_EDGE
    if isinstance(op, RemoveNode):
        return A_REMOVE
    raise TypeError(f"not a sequence operation: {op!r}")


def _refresh(params: ModelParams, memory: Memory) -> None:
    propagate(params, memory, memory.hyper.nu_rounds)
    memory.h_g = readout_graph(params, memory)


def execute(params: ModelParams, memory: Memory, op: SequenceOp) -> None:
    """Apply ``op`` to memory, initialise new embeddings and refresh."""
    if isinstance(op, AddNode):
        memory.add_vertex(init_vertex_embedding(params, memory.h_g))
    elif isinstance(op, AddEdge):
        h_e = init_edge_embedding(params, ad.take(memory.h_v, op.src), ad.take(memory.h_v, op.tgt))
        memory.add_edge(op.src, op.tgt, h_e)
    else:
        memory.remove_vertex(op.v)
    _refresh(params, memory)


def count_decisions(seq: ConstructionSequence) -> int:
    """Number of categorical decisions supervised by :func:`teacher_forced_loss`."""
    c = seq.counts()
    return len(seq) + 1 + 2 * c["E"] + c["R"]


def teacher_forced_loss(params: ModelParams, seq: ConstructionSequence) -> Tensor:
    """Summed cross-entropy of every decision along ``seq``.

    Vertex-choice terms are divided by ``ln(n_v)``, the number of vertices
    at that moment; the target head hides the chosen source.
    """
    hp = params.hyper
    report = validate(seq)
    if not report:
        raise ValueError(f"invalid sequence at op {report.index}: {report.reason}")
    memory = Memory(hp)
    state = S_NODE
    terms: list[Tensor] = []
    for i, op in enumerate(seq):
        action = action_of(op)
        if action == A_REMOVE and not hp.enable_remove:
            raise ValueError(f"op {i}: remove operation but the remove state is disabled")
        terms.append(ad.softmax_cross_entropy(transition_logits(params, state, memory.h_g), action))
        n = memory.n_v
        if action == A_EDGE:
            if n < 2:
                raise ValueError(f"op {i}: edge needs at least two vertices")
            src = _normalized_choice_loss(vertex_choice_logits(params, "source", memory), op.src, n)
            mask = np.zeros(n, dtype=bool)
            mask[op.src] = True
            tgt_logits = vertex_choice_logits(params, "target", memory, context_vertex=op.src)
            tgt = _normalized_choice_loss(tgt_logits, op.tgt, n, mask) if n > 2 else None
            terms.extend(t for t in (src, tgt) if t is not None)
        elif action == A_REMOVE:
            rem = _normalized_choice_loss(vertex_choice_logits(params, "remove", memory), op.v, n)
            if rem is not None:
                terms.append(rem)
        execute(params, memory, op)
        state = _STATE_OF_ACTION[action]
    terms.append(ad.softmax_cross_entropy(transition_logits(params, state, memory.h_g), A_STOP))
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def _draw(rng: np.random.Generator, logits: Tensor, mask: np.ndarray | None) -> int:
    p = ad.masked_softmax(logits.value, mask)
    return int(rng.choice(len(p), p=p / p.sum()))


def sample_graph(params: ModelParams, rng: np.random.Generator, hyper: HyperParams | None = None,
                 max_steps: int | None = None) -> tuple[Graph, ConstructionSequence]:
    """Ancestral sampling of one graph.

    Masking rules: ``stop`` while fewer than ``nu_min`` vertices exist,
    ``add_edge`` while fewer than two vertices exist or none can take a new
    edge, ``add_node`` once ``nu_max`` vertices exist, ``remove_node`` on
    the empty graph. The target head hides the source and its neighbours;
    if nothing is left the step is re-decided without ``add_edge``.
    ``max_steps`` bounds the number of executed operations.
    """
    hp = hyper or params.hyper
    if any(t.requires_grad for t in params.parameters()):
        params = params.frozen()
    nu_min = hp.nu_min or 0
    nu_max = hp.nu_max
    if max_steps is None:
        max_steps = nu_max * (nu_max + 1) // 2 + 4 * nu_max
    memory = Memory(params.hyper)
    state = S_NODE
    ops: list[SequenceOp] = []
    g = memory.graph
    while len(ops) < max_steps:
        n = g.n_v
        mask = np.zeros(params.hyper.n_actions, dtype=bool)
        mask[A_STOP] = n < nu_min
        mask[A_NODE] = n >= nu_max
        mask[A_EDGE] = n < 2 or g.n_e == n * (n - 1) // 2
        if params.hyper.enable_remove:
            mask[A_REMOVE] = n == 0
        logits = transition_logits(params, state, memory.h_g)
        while True:
            action = _draw(rng, logits, mask)
            if action != A_EDGE:
                break
            src = _draw(rng, vertex_choice_logits(params, "source", memory), None)
            tmask = np.zeros(n, dtype=bool)
            tmask[src] = True
            tmask[g.neighbors(src)] = True
            if not tmask.all():
                tgt = _draw(rng, vertex_choice_logits(params, "target", memory, context_vertex=src), tmask)
                break
            mask[A_EDGE] = True
        if action == A_STOP:
            break
        if action == A_NODE:
            op = AddNode()
        elif action == A_EDGE:
            op = AddEdge(src, tgt)
        else:
            op = RemoveNode(_draw(rng, vertex_choice_logits(params, "remove", memory), None))
        execute(params, memory, op)
        ops.append(op)
        state = _STATE_OF_ACTION[action]
    return memory.graph.copy(), ConstructionSequence(ops)
