import itertools

import numpy as np
import pytest

from deepgg.autodiff import backward
from deepgg.graph import Graph


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(rng, n, p):
    g = Graph(n)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                g.add_edge(i, j)
    return g


def brute_isomorphic(g1, g2):
    """Exhaustive permutation search; only for tiny graphs."""
    if g1.n_v != g2.n_v or g1.n_e != g2.n_e:
        return False
    e2 = set(g2.edges())
    for perm in itertools.permutations(range(g1.n_v)):
        if all(tuple(sorted((perm[s], perm[t]))) in e2 for s, t in g1.edges()):
            return True
    return False


def floyd_warshall_apl(g):
    """Average path length over the largest component, from all-pairs Floyd-Warshall."""
    n = g.n_v
    inf = float("inf")
    d = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for s, t in g.edges():
        d[s][t] = d[t][s] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    comps = {}
    for i in range(n):
        key = frozenset(j for j in range(n) if d[i][j] < inf)
        comps[key] = True
    if not comps:
        return 0.0
    best = max(comps, key=lambda c: (len(c), -min(c)))
    if len(best) < 2:
        return 0.0
    total = sum(d[i][j] for i in best for j in best if i != j)
    return total / (len(best) * (len(best) - 1))


def grad_check(f, tensors, rng, h=1e-5, n_coords=12, n_dirs=2):
    """Relative error of analytic vs central-difference gradients of scalar ``f()``.

    Checks a random subset of coordinates (as one vector) plus a few random
    directional derivatives; returns the worst relative error.
    """
    for t in tensors:
        t.grad = None
    loss = f()
    backward(loss)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros(t.shape) for t in tensors]
    for t in tensors:
        t.grad = None

    def fval():
        return f().item()

    coords = [(i, idx) for i, t in enumerate(tensors) for idx in np.ndindex(t.shape)]
    pick = rng.choice(len(coords), size=min(n_coords, len(coords)), replace=False)
    num, ana = [], []
    for c in pick:
        i, idx = coords[c]
        v = tensors[i].value
        old = v[idx]
        v[idx] = old + h
        fp = fval()
        v[idx] = old - h
        fm = fval()
        v[idx] = old
        num.append((fp - fm) / (2 * h))
        ana.append(analytic[i][idx])
    num, ana = np.array(num), np.array(ana)
    worst = _rel(ana, num)

    for _ in range(n_dirs):
        dirs = [rng.standard_normal(t.shape) for t in tensors]
        for t, d in zip(tensors, dirs):
            t.value += h * d
        fp = fval()
        for t, d in zip(tensors, dirs):
            t.value -= 2 * h * d
        fm = fval()
        for t, d in zip(tensors, dirs):
            t.value += h * d
        num_d = (fp - fm) / (2 * h)
        ana_d = sum(float((a * d).sum()) for a, d in zip(analytic, dirs))
        worst = max(worst, _rel(np.array([ana_d]), np.array([num_d])))
    return worst


def _rel(a, n):
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < 1e-10:
        return float(np.linalg.norm(a - n))
    return float(np.linalg.norm(a - n) / scale)


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion, then assert it."""
    def record(number: int, title: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
