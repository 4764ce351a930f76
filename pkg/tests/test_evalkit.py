import pytest
from hypothesis import given
from hypothesis import strategies as st

from plasmodet.evalkit import (
    ConfusionCounts,
    UndefinedMetricError,
    match_boxes,
    metrics_report,
    ppv,
    sensitivity,
)

boxes = st.tuples(st.integers(0, 200), st.integers(0, 200), st.integers(1, 60), st.integers(1, 60))


def test_identical_box():
    assert match_boxes([((10, 10, 20, 20), 0.9)], [(10, 10, 20, 20)]).counts == ConfusionCounts(1, 0, 0)


def test_disjoint_box():
    assert match_boxes([((100, 100, 20, 20), 0.9)], [(10, 10, 20, 20)]).counts == ConfusionCounts(0, 1, 1)


def test_one_to_one():
    res = match_boxes([((12, 12, 10, 10), 0.6), ((8, 8, 20, 20), 0.9)], [(5, 5, 30, 30)])
    assert res.counts == ConfusionCounts(1, 1, 0)
    assert res.detection_matched == [False, True]  # higher confidence wins


def test_nearest_gt_when_centre_in_two():
    res = match_boxes([((20, 20, 10, 10), 0.9)], [(0, 0, 40, 40), (18, 18, 14, 14)])
    assert res.gt_matched == [False, True]


def test_counts_64_15_2():
    c = ConfusionCounts(tp=64, fp=15, fn=2)
    assert abs(ppv(c) - 81.0) <= 0.05
    assert abs(sensitivity(c) - 96.97) <= 0.05
    assert c.tn is None


def test_metric_examples():
    assert ppv(ConfusionCounts(0, 5, 0)) == 0.0
    assert sensitivity(ConfusionCounts(10, 0, 0)) == 100.0
    with pytest.raises(UndefinedMetricError):
        ppv(ConfusionCounts(0, 0, 3))
    with pytest.raises(UndefinedMetricError):
        sensitivity(ConfusionCounts(0, 4, 0))


def test_report_nulls_and_aggregate():
    rep = metrics_report([("a", ConfusionCounts(0, 0, 3)), ("b", ConfusionCounts(2, 1, 0))])
    assert rep["per_image"][0]["ppv"] is None
    assert rep["aggregate"] == {"tp": 2, "fp": 1, "fn": 3, "ppv": pytest.approx(200 / 3), "sensitivity": 40.0}


@given(st.lists(st.tuples(boxes, st.floats(0, 1)), max_size=12), st.lists(boxes, max_size=12))
def test_count_invariants(dets, gts):
    c = match_boxes(dets, gts).counts
    assert c.tp + c.fn == len(gts)
    assert c.tp + c.fp == len(dets)


@given(st.lists(boxes, max_size=10, unique=True), st.lists(boxes, max_size=10), st.randoms())
def test_matching_order_invariant(det_boxes, gts, rnd):
    dets = [(b, (i + 1) / 100) for i, b in enumerate(det_boxes)]  # distinct confidences
    shuffled = dets[:]
    rnd.shuffle(shuffled)
    assert match_boxes(dets, gts).counts == match_boxes(shuffled, gts).counts


@given(st.integers(1, 500), st.integers(0, 500), st.integers(0, 500), st.integers(2, 50))
def test_metrics_scale_invariant(tp, fp, fn, n):
    c, big = ConfusionCounts(tp, fp, fn), ConfusionCounts(n * tp, n * fp, n * fn)
    assert ppv(big) == pytest.approx(ppv(c))
    assert sensitivity(big) == pytest.approx(sensitivity(c))
