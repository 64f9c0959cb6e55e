# # Random graph models and their path lengths
#
# Erdős–Rényi, Barabási–Albert and Watts–Strogatz graphs each record their
# own generative process as a construction sequence. Here we draw a few
# hundred of each and compare the mean shortest-path length with the
# closed-form approximations.

import time

import numpy as np

from deepgg import generate_ba, generate_er, generate_ws
from deepgg.stats import (
    analytic_avg_path_ba,
    analytic_avg_path_er,
    average_path_length,
    clustering_coefficient,
    degree_sample,
)

rng = np.random.default_rng(1)
N_GRAPHS = 300

t0 = time.perf_counter()
er = [generate_er(50, 0.2, rng)[0] for _ in range(N_GRAPHS)]
ba = [generate_ba(50, 3, rng)[0] for _ in range(N_GRAPHS)]
ws = [generate_ws(50, 10, 0.2, rng)[0] for _ in range(N_GRAPHS)]
print(f"drew {3 * N_GRAPHS} graphs in {time.perf_counter() - t0:.1f}s")

# Average path length is measured on the largest connected component.

for name, graphs, analytic in (("ER(50, 0.2)", er, analytic_avg_path_er(50, 0.2)),
                               ("BA(50, 3)", ba, analytic_avg_path_ba(50, 3)),
                               ("WS(50, 10, 0.2)", ws, None)):
    apl = np.mean([average_path_length(g) for g in graphs])
    cc = np.mean([clustering_coefficient(g) for g in graphs])
    deg = degree_sample(graphs)
    line = f"{name:16s} path length {apl:.3f}"
    if analytic is not None:
        line += f" (analytic {analytic:.3f})"
    print(f"{line} | clustering {cc:.3f} | mean degree {deg.mean():.2f}, max {int(deg.max())}")

# The BA sequence shows preferential attachment directly: early vertices
# collect most of the edges.

_, seq = generate_ba(10, 2, rng)
print("BA(10, 2) process sequence:", seq)
