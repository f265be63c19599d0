import numpy as np
import pytest

from neurnkit.errors import UsageError
from neurnkit.reprs import RepresentationSet
from neurnkit.rsa import (
    RmseMatrix,
    aggregate,
    compare_sets,
    neurn_scatter,
    read_matrix_csv,
    rmse,
    write_matrix_csv,
    write_scatter_csv,
    write_summaries_csv,
)
from neurnkit.tensorio import Image, resize_bilinear

from oracles import rmse_oracle


def test_rmse_identical_maps():
    a = np.random.default_rng(0).standard_normal((4, 6))
    assert rmse(a, a.copy()) == 0.0


def test_rmse_zeros_vs_ones():
    for shape in [(1, 1), (3, 7), (10, 2)]:
        assert rmse(np.zeros(shape), np.ones(shape)) == 1.0


def test_rmse_matches_direct_oracle():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((7, 5))
    b = rng.standard_normal((7, 5))
    assert abs(rmse(a, b) - rmse_oracle(a, b)) < 1e-14


def test_rmse_symmetry_exact():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.standard_normal((5, 5))
        b = rng.standard_normal((5, 5))
        assert rmse(a, b) == rmse(b, a)


def test_rmse_triangle_bound():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b, c = (rng.standard_normal((4, 4)) for _ in range(3))
        assert rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12


def test_rmse_shape_mismatch():
    with pytest.raises(UsageError):
        rmse(np.zeros((2, 2)), np.zeros((2, 3)))


def _reps(arrays, **meta_base):
    return RepresentationSet(
        np.array(arrays), [dict(meta_base, i=i) for i in range(len(arrays))]
    )


def test_compare_sets_self_zero_diagonal():
    rng = np.random.default_rng(4)
    reps = _reps([rng.uniform(0, 1, (4, 4)) for _ in range(3)], kind="n")
    matrix = compare_sets(reps, reps, common_side=4, normalize=True)
    assert np.max(np.abs(np.diag(matrix.values))) < 1e-12


def test_compare_sets_shape_contract():
    rng = np.random.default_rng(5)
    f = _reps([rng.uniform(0, 1, (3, 3))], kind="f")
    n = _reps([rng.uniform(0, 1, (3, 3)) for _ in range(3)], kind="n")
    matrix = compare_sets(f, n, common_side=3)
    assert matrix.values.shape == (1, 3)


def test_compare_sets_matches_composed_oracles():
    rng = np.random.default_rng(6)
    small = rng.uniform(0, 1, (2, 2))
    large = rng.uniform(0, 1, (4, 4))
    f = RepresentationSet(small[None], [{"m": 0}])
    n = RepresentationSet(large[None], [{"m": 1}])
    matrix = compare_sets(f, n, common_side=4, normalize=False)
    a = resize_bilinear(Image(small), 4, 4).data[0]
    b = resize_bilinear(Image(large), 4, 4).data[0]
    assert abs(matrix.values[0, 0] - rmse_oracle(a, b)) < 1e-12


def test_compare_sets_normalize_kills_scale():
    rng = np.random.default_rng(7)
    base = rng.uniform(0, 1, (5, 5))
    f = RepresentationSet(base[None], [{"m": 0}])
    n = RepresentationSet((3.0 * base + 0.5)[None], [{"m": 1}])
    matrix = compare_sets(f, n, common_side=5, normalize=True)
    assert matrix.values[0, 0] < 1e-12


def test_compare_sets_constant_map_normalizes_to_zeros():
    f = RepresentationSet(np.full((1, 3, 3), 0.7), [{"m": 0}])
    n = RepresentationSet(np.zeros((1, 3, 3)), [{"m": 1}])
    matrix = compare_sets(f, n, common_side=3, normalize=True)
    assert matrix.values[0, 0] == 0.0


def test_compare_sets_permutation_equivariant():
    rng = np.random.default_rng(8)
    f_maps = [rng.uniform(0, 1, (3, 3)) for _ in range(4)]
    n_maps = [rng.uniform(0, 1, (3, 3)) for _ in range(5)]
    f = _reps(f_maps, kind="f")
    n = _reps(n_maps, kind="n")
    base = compare_sets(f, n, common_side=3)
    perm_f = [2, 0, 3, 1]
    perm_n = [4, 2, 0, 1, 3]
    shuffled = compare_sets(f.take(perm_f), n.take(perm_n), common_side=3)
    assert np.array_equal(shuffled.values, base.values[np.ix_(perm_f, perm_n)])


def test_compare_sets_threads_do_not_change_values():
    rng = np.random.default_rng(9)
    f = _reps([rng.uniform(0, 1, (4, 4)) for _ in range(6)], kind="f")
    n = _reps([rng.uniform(0, 1, (4, 4)) for _ in range(7)], kind="n")
    assert np.array_equal(
        compare_sets(f, n, common_side=4, threads=1).values,
        compare_sets(f, n, common_side=4, threads=4).values,
    )


def _matrix():
    rows = [{"model": "a"}, {"model": "b"}]
    cols = [
        {"neuron_id": "n0", "cell_class": "excitatory", "genotype": "Emx1"},
        {"neuron_id": "n1", "cell_class": "excitatory", "genotype": "Rbp4"},
        {"neuron_id": "n2", "cell_class": "inhibitory", "genotype": "Sst"},
    ]
    values = np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]])
    return RmseMatrix(rows=rows, cols=cols, values=values)


def test_aggregate_single_group_is_matrix_mean():
    m = _matrix()
    for rec in m.cols:
        rec["all"] = "yes"
    (summary,) = aggregate(m, "all")
    assert abs(summary.mean_rmse - m.values.mean()) < 1e-15
    assert summary.count == 6


def test_aggregate_by_column_key():
    m = _matrix()
    summaries = {s.group: s for s in aggregate(m, "cell_class")}
    exc = m.values[:, [0, 1]]
    assert abs(summaries["excitatory"].mean_rmse - exc.mean()) < 1e-15
    assert abs(summaries["excitatory"].std_rmse - exc.std()) < 1e-15
    assert summaries["excitatory"].count == 4
    assert summaries["inhibitory"].count == 2


def test_aggregate_by_row_key():
    m = _matrix()
    summaries = aggregate(m, "model")
    assert [s.group for s in summaries] == ["a", "b"]
    assert abs(summaries[0].mean_rmse - m.values[0].mean()) < 1e-15


def test_aggregate_equal_groups_identical_summaries():
    rows = [{"model": "m"}]
    cols = [{"g": "x"}, {"g": "y"}]
    m = RmseMatrix(rows=rows, cols=cols, values=np.array([[0.25, 0.25]]))
    a, b = aggregate(m, "g")
    assert (a.mean_rmse, a.std_rmse, a.count) == (b.mean_rmse, b.std_rmse, b.count)


def test_aggregate_unknown_key():
    with pytest.raises(UsageError, match="nope"):
        aggregate(_matrix(), "nope")


def test_aggregate_construction_guaranteed_ordering():
    # excitatory-tagged maps equal the feature maps exactly; inhibitory maps
    # are shuffled pixels of the same values
    rng = np.random.default_rng(10)
    f_maps = [rng.uniform(0, 1, (4, 4)) for _ in range(3)]
    n_maps, n_meta = [], []
    for i, fm in enumerate(f_maps):
        n_maps.append(fm.copy())
        n_meta.append({"cell_class": "excitatory", "i": i})
    for i, fm in enumerate(f_maps):
        n_maps.append(rng.permutation(fm.ravel()).reshape(4, 4))
        n_meta.append({"cell_class": "inhibitory", "i": 3 + i})
    features = _reps(f_maps, kind="f")
    neurals = RepresentationSet(np.array(n_maps), n_meta)
    matrix = compare_sets(features, neurals, common_side=4)
    summaries = {s.group: s.mean_rmse for s in aggregate(matrix, "cell_class")}
    assert summaries["excitatory"] < summaries["inhibitory"]


def test_scatter_identical_matrices_on_diagonal():
    m = _matrix()
    pairs = neurn_scatter(m, m, "genotype")
    assert len(pairs) == 3
    assert all(not p["below_diagonal"] for p in pairs)
    assert all(p["plain_mean_rmse"] == p["neurn_mean_rmse"] for p in pairs)


def test_scatter_lower_matrix_below_diagonal():
    m_plain = _matrix()
    m_neurn = RmseMatrix(
        rows=m_plain.rows, cols=m_plain.cols, values=m_plain.values - 0.05
    )
    pairs = neurn_scatter(m_neurn, m_plain, "cell_class")
    assert all(p["below_diagonal"] for p in pairs)


def test_scatter_mismatched_columns_rejected():
    m = _matrix()
    other = RmseMatrix(rows=m.rows, cols=list(reversed(m.cols)), values=m.values)
    with pytest.raises(UsageError, match="columns"):
        neurn_scatter(m, other, "genotype")


def test_matrix_csv_round_trip(tmp_path):
    m = _matrix()
    path = tmp_path / "m.csv"
    write_matrix_csv(m, path)
    loaded = read_matrix_csv(path)
    assert loaded.rows == m.rows
    assert loaded.cols == m.cols
    assert np.array_equal(loaded.values, m.values)


def test_csv_writers_are_deterministic(tmp_path):
    m = _matrix()
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_matrix_csv(m, a)
    write_matrix_csv(m, b)
    assert a.read_bytes() == b.read_bytes()
    sa, sb = tmp_path / "sa.csv", tmp_path / "sb.csv"
    write_summaries_csv(aggregate(m, "cell_class"), sa)
    write_summaries_csv(aggregate(m, "cell_class"), sb)
    assert sa.read_bytes() == sb.read_bytes()
    pa, pb = tmp_path / "pa.csv", tmp_path / "pb.csv"
    write_scatter_csv(neurn_scatter(m, m, "genotype"), pa)
    write_scatter_csv(neurn_scatter(m, m, "genotype"), pb)
    assert pa.read_bytes() == pb.read_bytes()
