import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import silhouette_bruteforce
from plasmodet.cluster import (
    FeaturePoint,
    FilterConfig,
    InfeasibleClustering,
    UndefinedSilhouette,
    filter_false_positives,
    kmeans,
    select_k,
    silhouette,
)


def blobs(rng, centres, n, spread):
    return np.vstack([rng.normal(c, spread, size=(n, 2)) for c in centres])


def same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return all(len(set(b[a == v])) == 1 for v in np.unique(a)) and len(np.unique(a)) == len(np.unique(b))


def to_points(x):
    return [FeaturePoint(float(h), float(e), i) for i, (h, e) in enumerate(x)]


def test_kmeans_k_distinct_points():
    x = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.1]])
    asg = kmeans(x, 3)
    assert sorted(asg.labels.tolist()) == [0, 1, 2] and asg.inertia == 0


def test_kmeans_recovers_two_groups(rng):
    x = blobs(rng, [(0.2, 0.1), (0.8, 0.9)], 20, 0.02)
    asg = kmeans(x, 2, seed=0)
    assert same_partition(asg.labels, [0] * 20 + [1] * 20)
    again = kmeans(x, 2, seed=0)
    np.testing.assert_array_equal(asg.labels, again.labels)


def test_kmeans_infeasible():
    with pytest.raises(InfeasibleClustering):
        kmeans(np.array([[0.5, 0.5]] * 4), 2)


def test_silhouette_tight_pairs():
    x = np.array([[0.1, 0.1], [0.1005, 0.1005], [0.9, 0.9], [0.9005, 0.8995]])
    assert silhouette(x, [0, 0, 1, 1]) > 0.99


def test_silhouette_identical_points_is_zero():
    assert silhouette(np.full((4, 2), 0.3), [0, 0, 1, 1]) == 0.0


def test_silhouette_single_cluster_undefined():
    with pytest.raises(UndefinedSilhouette):
        silhouette(np.random.default_rng(0).random((5, 2)), [1] * 5)


def test_silhouette_matches_definition():
    rng = np.random.default_rng(8)
    for trial in range(120):
        n = int(rng.integers(3, 25))
        k = int(rng.integers(2, min(n, 5) + 1))
        labels = rng.integers(0, k, n)
        labels[:2] = [0, 1]  # at least two clusters
        x = rng.random((n, 2)) if trial % 4 else np.round(rng.random((n, 2)), 1)
        assert abs(silhouette(x, labels) - silhouette_bruteforce(x, labels)) <= 1e-9


def test_select_k_two_and_three(rng):
    two = blobs(rng, [(0.2, 0.1), (0.8, 0.9)], 15, 0.02)
    three = blobs(rng, [(0.2, 0.1), (0.8, 0.9), (0.2, 0.9)], 15, 0.02)
    assert select_k(two).k == 2
    assert select_k(three).k == 3


def test_select_k_collinear_equidistant():
    asg = select_k(np.array([[0.1, 0.5], [0.5, 0.5], [0.9, 0.5]]))
    assert asg.k in (2, 3) and asg.mean_silhouette is not None


def test_filter_keeps_low_cluster(rng):
    x = blobs(rng, [(0.2, 0.1), (0.8, 0.9)], 10, 0.02)
    kept, rep = filter_false_positives(to_points(x))
    assert [p.roi_id for p in kept] == list(range(10))
    assert rep.rule == "cluster" and rep.k == 2 and rep.silhouette >= 0.5
    assert (rep.kept, rep.dropped) == (10, 10)


def test_filter_keeps_all_when_silhouette_low(rng):
    x = np.clip(blobs(rng, [(0.45, 0.45), (0.55, 0.55)], 10, 0.4), 0.01, 1.0)
    assert select_k(x).mean_silhouette < 0.5
    kept, rep = filter_false_positives(to_points(x))
    assert len(kept) == 20 and rep.rule == "low-silhouette"


def test_filter_two_rois():
    close = [FeaturePoint(0.50, 0.50, 0), FeaturePoint(0.53, 0.50, 1)]
    assert len(filter_false_positives(close)[0]) == 2
    far = [FeaturePoint(0.9, 0.9, 0), FeaturePoint(0.3, 0.2, 1)]
    kept, rep = filter_false_positives(far)
    assert [p.roi_id for p in kept] == [1] and rep.rule == "pair-distance"


def test_filter_zero_one_and_infeasible():
    assert filter_false_positives([])[0] == []
    one = [FeaturePoint(0.5, 0.5, 0)]
    assert filter_false_positives(one)[0] == one
    same = [FeaturePoint(0.5, 0.5, i) for i in range(4)]
    kept, rep = filter_false_positives(same)
    assert kept == same and rep.rule == "infeasible"


point_sets = st.lists(
    st.tuples(st.floats(0.01, 1.0), st.floats(0.01, 1.0)), min_size=0, max_size=14
)


@given(point_sets)
@settings(max_examples=60, deadline=None)
def test_filter_never_grows_and_respects_silhouette(xs):
    pts = to_points(xs)
    kept, rep = filter_false_positives(pts)
    assert len(kept) <= len(pts)
    assert set(p.roi_id for p in kept) <= set(p.roi_id for p in pts)
    assert rep.kept + rep.dropped == len(pts)
    if rep.silhouette is not None and rep.silhouette < FilterConfig().silhouette_min:
        assert len(kept) == len(pts)


def test_filter_decision_invariant_to_input_order(rng):
    x = blobs(rng, [(0.2, 0.1), (0.8, 0.9), (0.3, 0.8)], 6, 0.02)
    pts = to_points(x)
    ref = {p.roi_id for p in filter_false_positives(pts)[0]}
    for seed in range(5):
        perm = np.random.default_rng(seed).permutation(len(pts))
        shuffled = [pts[i] for i in perm]
        assert {p.roi_id for p in filter_false_positives(shuffled)[0]} == ref
