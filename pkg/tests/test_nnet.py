import math
import struct

import numpy as np
import pytest

from oracles import conv_naive, fd_gradient_check
from plasmodet.nnet import (
    DEFAULT_ARCH,
    Adam,
    AugmentConfig,
    CorruptModelError,
    ModelParams,
    TrainConfig,
    TrainingAborted,
    augment,
    backward_and_step,
    forward,
    init_params,
    load_params,
    predict_proba,
    save_params,
    train,
)
from plasmodet.nnet.augment import affine_patch
from plasmodet.nnet.layers import (
    conv2d_forward,
    cross_entropy,
    dropout_forward,
    maxpool2x2_forward,
    softmax,
)
from plasmodet.nnet.train import to_batch
from plasmodet.synth import synth_patch_corpus


def test_conv_matches_naive_loops(rng):
    x = rng.normal(size=(8, 8, 3))
    k = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out, _ = conv2d_forward(x[None], k, b)
    np.testing.assert_allclose(out[0], conv_naive(x, k, b), rtol=0, atol=1e-10)


def test_conv_identity_and_all_ones(rng):
    x = rng.random((6, 5, 1))
    out, _ = conv2d_forward(x[None], np.ones((1, 1, 1, 1)), np.zeros(1))
    np.testing.assert_array_equal(out[0], x)
    out, _ = conv2d_forward(np.full((1, 5, 5, 1), 0.25), np.ones((1, 3, 3, 1)), np.zeros(1))
    np.testing.assert_allclose(out, 9 * 0.25)


def test_conv_shape_mismatch():
    with pytest.raises(ValueError):
        conv2d_forward(np.zeros((1, 5, 5, 2)), np.zeros((1, 3, 3, 3)), np.zeros(1))


def test_maxpool_truncates_odd_edge():
    x = np.arange(25, dtype=float).reshape(1, 5, 5, 1)
    out, _ = maxpool2x2_forward(x)
    np.testing.assert_array_equal(out[0, :, :, 0], [[6, 8], [16, 18]])


def test_softmax_properties(rng):
    np.testing.assert_array_equal(softmax(np.zeros((1, 2))), [[0.5, 0.5]])
    z = rng.normal(0, 30, size=(50, 2))
    p = softmax(z)
    assert np.all((p > 0) & (p < 1)) or np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-6)
    np.testing.assert_array_equal(softmax(z + 123.0).argmax(axis=1), p.argmax(axis=1))


def test_dropout():
    x = np.ones(100_000)
    out, _ = dropout_forward(x, 0.0, True, np.random.default_rng(0))
    np.testing.assert_array_equal(out, x)
    out, _ = dropout_forward(x, 0.5, False, None)
    np.testing.assert_array_equal(out, x)
    out, _ = dropout_forward(x, 0.5, True, np.random.default_rng(0))
    assert 0.98 <= out.mean() <= 1.02
    assert set(np.unique(out)) == {0.0, 2.0}


def test_zero_weights_give_even_split():
    probs, acts = forward(ModelParams.zeros(), np.random.default_rng(0).random((100, 100, 3)))
    np.testing.assert_array_equal(probs, [0.5, 0.5])
    assert acts["conv1"].shape == (96, 96, 16)
    assert acts["pool1"].shape == (48, 48, 16)
    assert acts["conv2"].shape == (44, 44, 32)
    assert acts["pool2"].shape == (22, 22, 32)


def test_architecture_arithmetic():
    assert DEFAULT_ARCH.spatial_sizes() == [100, 96, 48, 44, 22]
    assert DEFAULT_ARCH.flat_size == 22 * 22 * 32 == 15488


def test_forward_rejects_wrong_shape():
    with pytest.raises(ValueError):
        forward(ModelParams.zeros(), np.zeros((64, 64, 3)))


def test_probs_sum_to_one_and_inference_deterministic():
    params = init_params(seed=1)
    x = np.random.default_rng(2).random((100, 100, 100, 3)).astype(np.float32)
    p = predict_proba(params, x)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-6)
    np.testing.assert_array_equal(predict_proba(params, x), p)


def test_init_seeded():
    a, b, c = init_params(seed=4), init_params(seed=4), init_params(seed=5)
    for name, arr in a.arrays().items():
        np.testing.assert_array_equal(arr, b.arrays()[name])
    assert not np.array_equal(a.conv1_w, c.conv1_w)
    fan_in = 5 * 5 * 3
    assert abs(a.conv1_w.std() - math.sqrt(2 / fan_in)) < 0.03


def test_gradients_match_finite_differences():
    errors = fd_gradient_check()
    assert set(errors) == set(DEFAULT_ARCH.shapes())
    assert max(errors.values()) < 1e-4, errors


def test_ln2_loss():
    assert cross_entropy(np.array([[0.5, 0.5]]), np.array([[0, 1]])) == pytest.approx(math.log(2))


def test_adam_zero_gradient_is_noop():
    params = init_params(seed=0)
    before = params.copy()
    Adam(params).step(params, {k: np.zeros_like(v) for k, v in params.arrays().items()})
    for name, arr in params.arrays().items():
        np.testing.assert_array_equal(arr, before.arrays()[name])


def test_training_step_reduces_loss_on_a_batch():
    images, labels = synth_patch_corpus(0, 8)
    x, onehot = to_batch(images), np.eye(2, dtype=np.float32)[labels]
    params = init_params(seed=0)
    opt = Adam(params)
    losses = [backward_and_step(params, opt, x, onehot, np.random.default_rng(i), 0.0)[1] for i in range(20)]
    # the first Adam steps overshoot; judge the trend, not single steps
    assert np.mean(losses[-5:]) < np.mean(losses[:5])


def test_nan_loss_aborts():
    params = init_params(seed=0)
    params.fc2_b[:] = np.nan
    with pytest.raises(TrainingAborted, match="non-finite"):
        backward_and_step(params, Adam(params), np.zeros((1, 100, 100, 3), np.float32),
                          np.array([[1, 0]], np.float32), np.random.default_rng(0))


def test_empty_batch_rejected():
    params = init_params(seed=0)
    with pytest.raises(ValueError):
        backward_and_step(params, Adam(params), np.zeros((0, 100, 100, 3), np.float32),
                          np.zeros((0, 2), np.float32), np.random.default_rng(0))


def test_affine_identity(rng):
    img = rng.integers(0, 256, size=(100, 100, 3), dtype=np.uint8)
    np.testing.assert_array_equal(affine_patch(img, 0, 0, 0, 1.0), img)


def test_augment_counts_and_determinism(rng):
    images = rng.integers(0, 256, size=(330, 24, 24, 3), dtype=np.uint8)
    labels = np.array([1] * 148 + [0] * 182)
    cfg = AugmentConfig(target_per_class=500, rng_seed=3)
    out, out_labels = augment(images, labels, cfg)
    assert out.shape == (1000, 24, 24, 3)
    assert np.bincount(out_labels).tolist() == [500, 500]
    again, again_labels = augment(images, labels, cfg)
    np.testing.assert_array_equal(out, again)
    np.testing.assert_array_equal(out_labels, again_labels)


def test_augment_rejects_empty_class():
    with pytest.raises(ValueError):
        augment(np.zeros((3, 8, 8, 3), np.uint8), np.zeros(3, int), AugmentConfig(target_per_class=5))


def test_train_zero_epochs():
    images, labels = synth_patch_corpus(0, 4)
    params, history = train(images, labels, TrainConfig(epochs=0, rng_seed=2))
    assert history == []
    np.testing.assert_array_equal(params.fc1_w, init_params(seed=2).fc1_w)


def test_training_loss_non_increasing_within_band():
    images, labels = synth_patch_corpus(5, 60)
    x, onehot = to_batch(images), np.eye(2)[labels]
    losses = []

    def on_epoch(epoch, params):
        losses.append(cross_entropy(predict_proba(params, x).astype(np.float64), onehot))

    train(images, labels, TrainConfig(epochs=4, validation_count=20, rng_seed=0),
          AugmentConfig(target_per_class=60, rng_seed=0), on_epoch=on_epoch)
    assert len(losses) == 4
    for a, b in zip(losses, losses[1:]):
        assert b <= a * 1.05, losses


def test_save_load_roundtrip(tmp_path):
    params = init_params(seed=9)
    save_params(tmp_path / "w.bin", params)
    loaded = load_params(tmp_path / "w.bin")
    for name, arr in params.arrays().items():
        assert loaded.arrays()[name].tobytes() == arr.tobytes()


def test_truncated_and_wrong_version(tmp_path):
    path = tmp_path / "w.bin"
    save_params(path, ModelParams.zeros())
    raw = path.read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-10])
    with pytest.raises(CorruptModelError, match="truncated"):
        load_params(tmp_path / "short.bin")
    (tmp_path / "v.bin").write_bytes(raw[:8] + struct.pack("<H", 7) + raw[10:])
    with pytest.raises(CorruptModelError, match="version 7, expected 1"):
        load_params(tmp_path / "v.bin")
    (tmp_path / "m.bin").write_bytes(b"NOTMODEL" + raw[8:])
    with pytest.raises(CorruptModelError, match="magic"):
        load_params(tmp_path / "m.bin")
