"""Build neural and artificial representations from synthetic data.

A neuron's 2-D representation weights every stimulus by that neuron's
response and sums: with peak responses v and flattened stimuli rows FS,
the map is v @ FS reshaped back to the stimulus grid.  Artificial feature
representations are just the channels of a convolution kernel tensor.
"""

import numpy as np

from neurnkit import build_neural_reps, extract_feature_reps
from neurnkit.synth import gen_kernel_bank, gen_neurons, gen_stimuli

SEED = 7

bank = gen_kernel_bank(SEED)
stimuli = gen_stimuli(count=100, side=28, seed=SEED, bank=bank)
neurons = gen_neurons(stimuli, bank, SEED, n_excitatory=50, n_inhibitory=50)

print(f"stimuli:  {stimuli.count} images of {stimuli.side}x{stimuli.side}")
print(f"neurons:  {len(neurons)} "
      f"({sum(n.cell_class == 'excitatory' for n in neurons)} excitatory)")

neural = build_neural_reps(neurons, stimuli, mode="peak")
print(f"neural representations: {neural.maps.shape}")
print("first record:", neural.meta[0])

features = extract_feature_reps(bank, {"model": "bank", "layer": "conv1", "neurn_flag": False})
print(f"feature representations: {features.maps.shape} "
      f"({bank.data.shape[0]} filters x {bank.data.shape[1]} channel)")
print("first record:", features.meta[0])

# Peak-mode maps are rank-1 recombinations of the stimuli: an excitatory
# neuron's map correlates with the bank kernel it was tuned to.
from neurnkit.tensorio import Image, resize_bilinear

kernel_big = resize_bilinear(Image(bank.data[0, 0]), 28, 28).data[0]
exc_map = neural.maps[0]


def ncc(a, b):
    a = (a - a.mean()) / a.std()
    b = (b - b.mean()) / b.std()
    return float((a * b).mean())


print("correlation of first excitatory map with its kernel: %.3f" % ncc(exc_map, kernel_big))
inh_map = neural.maps[-1]
print("correlation of an inhibitory map with that kernel:   %.3f" % ncc(inh_map, kernel_big))
