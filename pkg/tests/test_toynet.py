import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from oracles import conv2d_same
from struct2func.netspec import ShapeMismatch, build_architecture, count_parameters, small_config
from struct2func.toynet import (
    build_model, export_weights, forward, glorot_uniform_init, gradient_check, make_blobs, softmax,
    swish, toy_train)


@pytest.fixture(scope="module")
def small():
    return build_architecture(small_config())


def test_small_graph_is_tiny(small):
    assert count_parameters(small).total <= 1000
    assert sum(p.numel() for p in build_model(small).parameters()) == count_parameters(small).total


def test_zero_weights_uniform(small):
    zeros = {k: np.zeros_like(v) for k, v in glorot_uniform_init(small, 0).items()}
    X, _ = make_blobs(small, n=3, seed=0)
    np.testing.assert_allclose(forward(small, X, zeros), np.full((3, 3), 1 / 3), atol=1e-12)


@settings(max_examples=25)
@given(st.lists(st.floats(-500, 500), min_size=2, max_size=6))
def test_softmax_sums_to_one(logits):
    p = softmax(np.array(logits))
    assert abs(p.sum() - 1) < 1e-9 and (p >= 0).all()


def test_forward_probabilities(small):
    X, _ = make_blobs(small, n=5, seed=3)
    p = forward(small, X, glorot_uniform_init(small, 7))
    assert p.shape == (5, 3)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-9)
    single = forward(small, X[0], glorot_uniform_init(small, 7))
    np.testing.assert_allclose(single, p[0], atol=1e-6)


def test_shape_mismatch(small):
    with pytest.raises(ShapeMismatch):
        forward(small, np.zeros((2, 8, 8, 3)), glorot_uniform_init(small, 0))
    bad = glorot_uniform_init(small, 0)
    bad["D3.weight"] = np.zeros((3, 99), np.float32)
    with pytest.raises(ShapeMismatch):
        build_model(small, bad)


def test_conv_matches_direct_loop(small, rng):
    model = build_model(small, glorot_uniform_init(small, 1), dtype=torch.float64)
    conv = model.trunk["L1"].b3
    x = rng.normal(size=(conv.in_channels, 4, 4))
    with torch.no_grad():
        got = conv(torch.as_tensor(x)[None])[0].numpy()
    expect = conv2d_same(x, conv.weight.detach().numpy(), conv.bias.detach().numpy())
    np.testing.assert_allclose(got, expect, atol=1e-6)


def test_swish():
    x = torch.tensor([-2.0, 0.0, 3.0], dtype=torch.float64)
    np.testing.assert_allclose(swish(x).numpy(), x.numpy() / (1 + np.exp(-x.numpy())))


def test_seeded_init(small):
    a, b = glorot_uniform_init(small, 4), glorot_uniform_init(small, 4)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    w = a["D1.weight"]
    r = np.sqrt(6 / (w.shape[0] + w.shape[1]))
    assert np.abs(w).max() <= r and not a["D1.bias"].any()


def test_weights_export_round_trip(small):
    w = glorot_uniform_init(small, 2)
    back = export_weights(build_model(small, w))
    assert all(np.array_equal(back[k], w[k]) for k in w)


def test_gradient_check(small):
    X, y = make_blobs(small, n=6, seed=1)
    assert gradient_check(small, X, y, seed=3) < 1e-4


@pytest.fixture(scope="module")
def data(small):
    return make_blobs(small, n=24, seed=5)


class TestTraining:
    def test_nonincreasing_and_deterministic(self, small, data):
        a = toy_train(small, *data, epochs=15, seed=2)
        b = toy_train(small, *data, epochs=15, seed=2)
        assert a.loss_trace == b.loss_trace
        assert all(y <= x for x, y in zip(a.loss_trace, a.loss_trace[1:]))
        assert a.loss_trace[-1] < a.loss_trace[0]

    def test_zero_learning_rate(self, small, data):
        r = toy_train(small, *data, lr=0.0, epochs=5)
        assert len(set(r.loss_trace)) == 1
