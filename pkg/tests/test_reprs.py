import numpy as np
import pytest

from neurnkit.errors import DataFormatError, UsageError
from neurnkit.reprs import (
    RepresentationSet,
    StimulusSet,
    TrialTraces,
    build_neural_rep,
    build_neural_reps,
    extract_feature_reps,
    ingest_neuron_dir,
    load_rep_set,
    save_rep_set,
)
from neurnkit.tensorio import Tensor, save_ntf

from oracles import matmul_oracle


def neuron(traces, neuron_id="n0", cell_class="excitatory", genotype="Emx1", region="VISp"):
    return TrialTraces(neuron_id, cell_class, genotype, region, traces)


def test_single_stimulus_identity_weighting():
    stimuli = StimulusSet(side=2, flattened=np.array([[0.1, 0.2, 0.3, 0.4]]))
    rep = build_neural_rep(neuron(np.array([[1.0]])), stimuli, mode="peak")
    assert len(rep) == 1
    assert np.max(np.abs(rep.maps[0] - [[0.1, 0.2], [0.3, 0.4]])) < 1e-15
    assert rep.meta[0]["genotype"] == "Emx1"


def test_two_stimuli_forced_product():
    stimuli = StimulusSet(side=2, flattened=np.array([[1.0, 0, 0, 0], [0, 0, 0, 1.0]]))
    traces = np.array([[0.5, 2.0], [3.0, 1.0]])  # peaks 2 and 3
    rep = build_neural_rep(neuron(traces), stimuli, mode="peak")
    assert np.max(np.abs(rep.maps[0] - [[2.0, 0.0], [0.0, 3.0]])) < 1e-15


def test_full_mode_matches_matmul_oracle():
    rng = np.random.default_rng(6)
    traces = rng.standard_normal((4, 5))
    stimuli = StimulusSet(side=3, flattened=rng.uniform(0, 1, (4, 9)))
    rep = build_neural_rep(neuron(traces), stimuli, mode="full")
    assert len(rep) == 5
    expected = matmul_oracle(traces.T, stimuli.flattened)
    assert np.max(np.abs(rep.maps.reshape(5, 9) - expected)) < 1e-12
    assert [m["trace_index"] for m in rep.meta] == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("mode,reduce", [("peak", np.max), ("mean", np.mean)])
def test_reduced_modes_commute_with_full(mode, reduce):
    rng = np.random.default_rng(7)
    traces = rng.standard_normal((6, 8))
    stimuli = StimulusSet(side=3, flattened=rng.uniform(0, 1, (6, 9)))
    direct = build_neural_rep(neuron(traces), stimuli, mode=mode)
    reduced = reduce(traces, axis=1)[:, None]
    via_full = build_neural_rep(neuron(reduced), stimuli, mode="full")
    assert np.max(np.abs(direct.maps - via_full.maps)) < 1e-12


def test_count_mismatch_rejected():
    stimuli = StimulusSet(side=2, flattened=np.zeros((3, 4)))
    with pytest.raises(UsageError, match="traces"):
        build_neural_rep(neuron(np.zeros((2, 5))), stimuli)


def test_build_many_preserves_order_and_threads_agree():
    rng = np.random.default_rng(8)
    stimuli = StimulusSet(side=2, flattened=rng.uniform(0, 1, (3, 4)))
    neurons = [neuron(rng.standard_normal((3, 4)), neuron_id=f"n{i}") for i in range(5)]
    seq = build_neural_reps(neurons, stimuli, threads=1)
    par = build_neural_reps(neurons, stimuli, threads=4)
    assert [m["neuron_id"] for m in seq.meta] == [f"n{i}" for i in range(5)]
    assert np.array_equal(seq.maps, par.maps)


def test_extract_feature_reps_shape_and_indexing():
    rng = np.random.default_rng(9)
    kernels = Tensor(rng.standard_normal((2, 3, 5, 5)))
    reps = extract_feature_reps(kernels, {"model": "net", "layer": "conv1", "neurn_flag": False})
    assert len(reps) == 6
    assert reps.maps.shape == (6, 5, 5)
    assert np.array_equal(reps.maps[1 * 3 + 2], kernels.data[1, 2])
    assert reps.meta[5] == {
        "model": "net", "layer": "conv1", "neurn_flag": False, "filter": 1, "channel": 2,
    }
    # pure reindexing: concatenation reproduces the payload exactly
    assert np.array_equal(reps.maps.reshape(kernels.data.shape), kernels.data)


def test_extract_feature_reps_rank_check():
    with pytest.raises(UsageError, match="rank 4"):
        extract_feature_reps(Tensor(np.zeros((2, 3, 4))), {})


def test_extract_round_trips_through_ntf(tmp_path):
    rng = np.random.default_rng(10)
    kernels = Tensor(rng.standard_normal((2, 2, 3, 3)))
    path = tmp_path / "k.ntf"
    save_ntf(kernels, path)
    from neurnkit.tensorio import load_ntf

    reps = extract_feature_reps(load_ntf(path), {"model": "m", "layer": "l", "neurn_flag": True})
    assert np.array_equal(reps.maps.reshape(2, 2, 3, 3), kernels.data)


def write_neuron_file(path, neuron_id, **overrides):
    meta = {
        "neuron_id": neuron_id,
        "cell_class": "excitatory",
        "genotype": "Emx1",
        "region": "VISp",
    }
    meta.update(overrides)
    save_ntf(Tensor(np.ones((2, 3)), meta), path)


def test_ingest_empty_dir(tmp_path):
    assert ingest_neuron_dir(tmp_path) == []


def test_ingest_sorted_by_id(tmp_path):
    write_neuron_file(tmp_path / "b.ntf", "zz")
    write_neuron_file(tmp_path / "a.ntf", "aa")
    neurons = ingest_neuron_dir(tmp_path)
    assert [n.neuron_id for n in neurons] == ["aa", "zz"]
    assert neurons[0].traces.shape == (2, 3)


def test_ingest_missing_meta_key(tmp_path):
    path = tmp_path / "bad.ntf"
    save_ntf(Tensor(np.ones((2, 3)), {"neuron_id": "x", "cell_class": "excitatory",
                                      "genotype": "Emx1"}), path)
    with pytest.raises(DataFormatError, match="region"):
        ingest_neuron_dir(tmp_path)


def test_rep_set_sidecar_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    reps = RepresentationSet(
        rng.standard_normal((3, 4, 4)),
        [{"neuron_id": f"n{i}", "cell_class": "excitatory"} for i in range(3)],
        {"mode": "peak"},
    )
    path = tmp_path / "reps.ntf"
    save_rep_set(reps, path)
    loaded = load_rep_set(path)
    assert np.array_equal(loaded.maps, reps.maps)
    assert loaded.meta == reps.meta
    assert loaded.info == reps.info


def test_rep_set_sidecar_mismatch(tmp_path):
    reps = RepresentationSet(np.zeros((2, 2, 2)), [{"a": 1}, {"a": 2}])
    path = tmp_path / "reps.ntf"
    save_rep_set(reps, path)
    sidecar = path.with_name("reps.ntf.meta.json")
    sidecar.write_text('{"meta": [{"a": 1}]}')
    with pytest.raises(DataFormatError, match="meta.json"):
        load_rep_set(path)


def test_stimulus_range_enforced():
    with pytest.raises(UsageError, match=r"\[0, 1\]"):
        StimulusSet(side=1, flattened=np.array([[1.5]]))


def test_representation_set_take():
    reps = RepresentationSet(np.arange(12.0).reshape(3, 2, 2), [{"i": 0}, {"i": 1}, {"i": 2}])
    sub = reps.take([2, 0])
    assert [m["i"] for m in sub.meta] == [2, 0]
    assert np.array_equal(sub.maps[0], reps.maps[2])
