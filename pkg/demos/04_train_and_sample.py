# # Training a small generator and sampling from it
#
# Fifty Barabási–Albert trees (m = 1, 12 vertices) in DFS order make a
# desk-sized training set. Each SGD step uses one whole sequence; the loss
# is the summed cross-entropy of every decision the state machine takes.

import time

import numpy as np

from deepgg import HyperParams, ModelSpec, sample_graph
from deepgg.stats import compare_report
from deepgg.sequences import replay
from deepgg.training import DatasetSpec, TrainConfig, generate_sequences, mean_decision_loss, train

seqs = generate_sequences(DatasetSpec(ModelSpec("ba", 12, m=1), count=50, variant="dfs", seed=0))
print("example:", seqs[0])

t0 = time.perf_counter()
result = train(TrainConfig(eta=1e-4, nu_epochs=8, seed=0), seqs)
means = result.epoch_means()
print(f"8 epochs in {time.perf_counter() - t0:.1f}s; mean loss per epoch:")
print("  " + " ".join(f"{m:.2f}" for m in means))
print(f"per-decision CE after training: {mean_decision_loss(result.params, seqs):.3f}")

# Sampling draws every decision from the model. `nu_min` forbids stopping
# too early and `nu_max` caps the vertex count.

rng = np.random.default_rng(1)
hp = HyperParams(nu_min=5, nu_max=40)
frozen = result.params.frozen()
samples = [sample_graph(frozen, rng, hp) for _ in range(100)]
graphs = [g for g, _ in samples]
assert all(replay(s) == g for g, s in samples)
sizes = [g.n_v for g in graphs]
print(f"100 samples: n_v from {min(sizes)} to {max(sizes)}, mean edges {np.mean([g.n_e for g in graphs]):.1f}")

# After only eight epochs at the default learning rate the samples are far
# from the training trees; the KS tests say so.

report = compare_report(graphs, [replay(s) for s in seqs])
for key, ks in report.ks.items():
    print(f"KS {key:16s} D={ks.statistic:.3f} p={ks.pvalue:.2g}")
