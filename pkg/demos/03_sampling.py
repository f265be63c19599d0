"""Representative sampling: embed maps to 2-D, cluster, keep central members.

The embedding is PCA (the neighborhood/min-distance knobs of the manifold
method this pipeline mirrors are recorded in the config for fidelity);
clustering is seeded k-means++ with Lloyd refinement; each cluster then
contributes its most central members, dropping outliers.
"""

import numpy as np

from neurnkit import EmbedConfig, build_neural_reps, embed, kmeans, sample_central
from neurnkit.synth import gen_kernel_bank, gen_neurons, gen_stimuli

SEED = 11

bank = gen_kernel_bank(SEED)
stimuli = gen_stimuli(100, 28, SEED, bank=bank)
neurons = gen_neurons(stimuli, bank, SEED, n_excitatory=200, n_inhibitory=200)
reps = build_neural_reps(neurons, stimuli, mode="peak")
print(f"{len(reps)} maps of {reps.maps.shape[1]}x{reps.maps.shape[2]}")

flat = reps.maps.reshape(len(reps), -1)
embedded = embed(flat, EmbedConfig(method="pca", out_dims=2))
print("embedded to", embedded.shape, "| variance along axes:",
      np.round(embedded.var(axis=0), 2))

clustering = kmeans(embedded, k=10, seed=SEED)
sizes = np.bincount(clustering.assignments, minlength=10)
print("cluster sizes:", sizes.tolist())
print("final inertia: %.1f after %d Lloyd iterations"
      % (clustering.inertia, len(clustering.inertia_history)))

sampled = sample_central(reps, clustering, embedded, per_cluster=20)
print(f"sampled {len(sampled)} central maps "
      f"(sum of min(20, cluster size) = {int(np.minimum(sizes, 20).sum())})")
kept = {}
for record in sampled.meta:
    kept[record["cell_class"]] = kept.get(record["cell_class"], 0) + 1
print("kept per cell class:", kept)
if "cluster_shortfall" in sampled.info:
    print("shortfalls:", sampled.info["cluster_shortfall"])
