import numpy as np
import pytest

from neurnkit import synth
from neurnkit.errors import UsageError


def test_stimuli_plain_shape_and_range():
    stimuli = synth.gen_stimuli(20, 8, seed=1)
    assert stimuli.count == 20
    assert stimuli.flattened.shape == (20, 64)
    assert stimuli.flattened.min() >= 0.0 and stimuli.flattened.max() <= 1.0


def test_stimuli_with_bank_are_seeded():
    bank = synth.gen_kernel_bank(seed=2)
    a = synth.gen_stimuli(15, 12, seed=3, bank=bank)
    b = synth.gen_stimuli(15, 12, seed=3, bank=bank)
    c = synth.gen_stimuli(15, 12, seed=4, bank=bank)
    assert np.array_equal(a.flattened, b.flattened)
    assert not np.array_equal(a.flattened, c.flattened)


def test_kernel_bank_shape():
    bank = synth.gen_kernel_bank(seed=5, n_filters=7, side=11)
    assert bank.data.shape == (7, 1, 11, 11)
    # distinct filters
    flat = bank.data.reshape(7, -1)
    for i in range(7):
        for j in range(i + 1, 7):
            assert np.max(np.abs(flat[i] - flat[j])) > 1e-3


def test_neurons_tagging_and_counts():
    bank = synth.gen_kernel_bank(seed=6)
    stimuli = synth.gen_stimuli(30, 10, seed=6, bank=bank)
    neurons = synth.gen_neurons(stimuli, bank, seed=6, n_excitatory=12, n_inhibitory=8,
                                trace_len=9)
    assert len(neurons) == 20
    exc = [n for n in neurons if n.cell_class == "excitatory"]
    inh = [n for n in neurons if n.cell_class == "inhibitory"]
    assert len(exc) == 12 and len(inh) == 8
    assert {n.genotype for n in exc} <= set(synth.EXC_GENOTYPES)
    assert {n.genotype for n in inh} <= set(synth.INH_GENOTYPES)
    assert all(n.traces.shape == (30, 9) for n in neurons)
    assert all(n.region in synth.REGIONS for n in neurons)
    ids = [n.neuron_id for n in neurons]
    assert len(set(ids)) == len(ids)


def test_neurons_peak_encodes_response():
    bank = synth.gen_kernel_bank(seed=7)
    stimuli = synth.gen_stimuli(25, 10, seed=7, bank=bank)
    (neuron, *_) = synth.gen_neurons(stimuli, bank, seed=7, n_excitatory=1, n_inhibitory=1,
                                     trace_len=12)
    peaks = neuron.traces.max(axis=1)
    assert np.all(peaks > 0)
    # responses vary across stimuli (the neuron is selective)
    assert peaks.std() > 0.1


def test_inhibitory_patterns_orthogonal_to_excitatory():
    bank = synth.gen_kernel_bank(seed=8)
    exc = synth._exc_patterns(bank, 14)
    inh = synth._inh_patterns(14, 8, exc)
    overlaps = np.abs(np.array(exc) @ np.array(inh).T)
    assert overlaps.max() < 1e-10


def test_digit_domain_balanced_and_seeded():
    ds = synth.gen_digit_domain("d", 100, 12, seed=9)
    assert ds.images.shape == (100, 12, 12)
    assert np.bincount(ds.labels, minlength=10).tolist() == [10] * 10
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
    again = synth.gen_digit_domain("d", 100, 12, seed=9)
    assert np.array_equal(ds.images, again.images)


def test_digit_domain_styles_differ():
    clean = synth.gen_digit_domain("d", 40, 12, seed=10, style="clean")
    bold = synth.gen_digit_domain("d", 40, 12, seed=10, style="bold")
    assert not np.array_equal(clean.images, bold.images)


def test_contrast_pairs_share_shapes():
    ds = synth.gen_digit_domain("d", 200, 12, seed=11, contrast_pairs=True)
    # classes c and c+5 have matching shapes; ink level separates them
    full = ds.images[ds.labels < 5]
    half = ds.images[ds.labels >= 5]
    assert full.mean() > half.mean() * 1.5


def test_digit_domain_rejects_unknown_style():
    with pytest.raises(UsageError):
        synth.gen_digit_domain("d", 20, 8, seed=0, style="fancy")
