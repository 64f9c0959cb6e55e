# # Construction sequences
#
# A graph can be written down as the list of operations that builds it
# from nothing: `N` adds a vertex, `E s t` joins two existing vertices and
# `R v` deletes one (later vertices shift down by one). This script builds
# a few sequences by hand, replays them and extracts traversal orders from
# an existing graph.

import numpy as np

from deepgg import ConstructionSequence, Graph, are_isomorphic, extract_traversal, replay, validate

# A path on three vertices, then the same path with its first vertex removed.

path = ConstructionSequence.parse("N N E 0 1 N E 2 1")
print(path, "->", replay(path).edges())

shrunk = ConstructionSequence.parse("N N E 0 1 N E 2 1 R 0")
print(shrunk, "->", replay(shrunk).edges())  # vertex 2 became vertex 1

# Validation points at the first bad operation instead of raising.

report = validate(ConstructionSequence.parse("N N E 0 1 E 1 0"))
print("valid:", bool(report), "| op", report.index, "|", report.reason)

# ## Traversal variants
#
# Any graph has many construction sequences. BFS and DFS variants relabel
# the vertices at random and then emit each edge when its second endpoint
# is discovered. Different orders, same graph up to isomorphism.

rng = np.random.default_rng(0)
g = Graph(6, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 5)])
for mode in ("bfs", "dfs"):
    seq = extract_traversal(g, mode, rng)
    print(f"{mode}: {seq}")
    print("   isomorphic to g:", are_isomorphic(replay(seq), g),
          "| tokens:", seq.token_length, "= n_v + 3 n_e =", g.n_v + 3 * g.n_e)
