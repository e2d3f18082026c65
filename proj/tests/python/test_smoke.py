"""Smoke tests for the python module against numpy references."""

import math
import os

import numpy as np
import pytest

import gswan


def test_softmax_matches_numpy():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 7))
    for tau in (0.5, 1.0, 2.0):
        got = gswan.softmax(x, tau=tau, axis=1)
        z = x / tau
        ref = np.exp(z - z.max(axis=1, keepdims=True))
        ref /= ref.sum(axis=1, keepdims=True)
        np.testing.assert_allclose(got, ref, atol=1e-12)
        np.testing.assert_allclose(got.sum(axis=1), 1.0, atol=1e-12)


def test_activations_match_formulas():
    x = np.linspace(-4, 4, 41)
    mish = gswan.activation(x, "mish")
    np.testing.assert_allclose(mish, x * np.tanh(np.log1p(np.exp(x))), atol=1e-12)
    sig = gswan.activation(x, "sigmoid")
    np.testing.assert_allclose(sig, 1 / (1 + np.exp(-x)), atol=1e-12)
    assert gswan.activation(np.array([0.0]), "mish")[0] == 0.0
    assert abs(gswan.activation(np.array([1.0]), "mish")[0] - 0.86509839) < 1e-7


def test_gradient_of_sigmoid_sum():
    x = np.zeros(5)
    g = gswan.gradient_of_sum(x, "sigmoid")
    np.testing.assert_allclose(g, 0.25, atol=1e-12)


def test_conv1d_matches_numpy():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2, 3, 2, 12))
    w = rng.normal(size=(4, 3, 1, 2))
    dilation = 2
    got = gswan.conv1d_dilated(x, w, dilation)
    lo = 12 - dilation * (w.shape[3] - 1)
    ref = np.zeros((2, 4, 2, lo))
    for j in range(w.shape[3]):
        ref += np.einsum("bins,oi->bons", x[:, :, :, dilation * j : dilation * j + lo], w[:, :, 0, j])
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_matmul_matches_numpy():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 3, 4))
    b = rng.normal(size=(2, 4, 5))
    np.testing.assert_allclose(gswan.matmul_batched(a, b), a @ b, atol=1e-12)


def test_metrics_match_numpy():
    rng = np.random.default_rng(4)
    y = rng.uniform(1, 50, size=1000)
    h = rng.uniform(1, 50, size=1000)
    m = gswan.compute_metrics(y, h)
    np.testing.assert_allclose(m["mae"], np.abs(y - h).mean(), atol=1e-12)
    np.testing.assert_allclose(m["rmse"], np.sqrt(((y - h) ** 2).mean()), atol=1e-12)
    np.testing.assert_allclose(m["mape"], 100 * np.abs((y - h) / y).mean(), atol=1e-9)

    zeros = gswan.compute_metrics(np.zeros(3), np.ones(3))
    assert zeros["mape"] is None


def test_rbf_adjacency():
    a, sigma = gswan.rbf_adjacency([(0, 1, 1.0), (1, 2, 3.0)], 3)
    assert sigma == pytest.approx(1.0)
    assert a[0, 1] == pytest.approx(math.exp(-1.0))
    assert a[0, 0] == 1.0
    assert a[2, 1] == 0.0


def test_adjacency_similarity():
    a = np.random.default_rng(5).uniform(size=(4, 4))
    assert gswan.adjacency_similarity(a, a) == pytest.approx(1.0)
    assert gswan.adjacency_similarity(np.zeros((4, 4)), a) is None


def test_probe_recovers_planted_map():
    rng = np.random.default_rng(6)
    e1 = rng.normal(size=(50, 3))
    e2 = rng.normal(size=(50, 3))
    w = rng.normal(size=6)
    feats = np.concatenate([e1, e2], axis=1)
    coords = np.stack([feats @ w + 0.3, feats @ w[::-1] - 1.0], axis=1)
    res = gswan.probe_embeddings(e1, e2, coords, kernels=False)
    assert res["r2"] > 0.999


def test_pipeline_end_to_end(tmp_path):
    data = str(tmp_path / "data")
    out = str(tmp_path / "run")
    os.makedirs(out, exist_ok=True)
    rc = gswan.run(["generate", "--sensors", "4", "--days", "3", "--seed", "3",
                    "--noise-std", "1.0", "--phase-spread", "45", "--out", data])
    assert rc == 0
    result = gswan.train_model(data, out, epochs=2, hidden=4, heads=1, embed_dim=3, batch=64, seed=1)
    assert not result["diverged"]
    assert math.isfinite(result["best_val_mae"])
    assert len(result["train_loss"]) == 2

    report = gswan.evaluate_checkpoint(out + "/checkpoint_best.json", data, split="test")
    for series in ("model", "ha", "persistence"):
        assert math.isfinite(report[series]["average"]["mae"])
    assert len(report["model"]["per_step"]) == 12

    pred = gswan.forecast(out + "/checkpoint_best.json", data, split="test", window=0)
    assert pred.shape == (12, 4)
    assert np.isfinite(pred).all()
