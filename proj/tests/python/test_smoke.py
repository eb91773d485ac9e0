import numpy as np
import pytest

import deepfa


def blobs(n_per=40, seed=0):
    rng = np.random.default_rng(seed)
    centres = np.array([[0.0, 0.0, 0.0], [8.0, 0.0, 0.0], [0.0, 8.0, 0.0]])
    x = np.concatenate([c + rng.normal(size=(n_per, 3)) for c in centres])
    y = np.repeat(np.arange(3), n_per)
    return x, y


def test_split_partitions_every_row():
    y = np.repeat(np.arange(10), 500)
    membership, counts = deepfa.split(y, 0.01, 0.30, 0)
    assert tuple(counts) == (50, 3450, 1500)
    assert membership.shape == (5000,)
    assert set(np.unique(membership)) <= {0, 1, 2}


def test_split_rejects_bad_fraction():
    with pytest.raises(deepfa.DeepfaError):
        deepfa.split(np.array([0, 1, 0, 1]), 0.0)


def test_tsne_shapes_and_determinism():
    x, _ = blobs(20)
    y1, loss1 = deepfa.tsne_embed(x, perplexity=5.0, iterations=300, seed=3)
    y2, loss2 = deepfa.tsne_embed(x, perplexity=5.0, iterations=300, seed=3)
    assert y1.shape == (60, 2)
    assert len(loss1) == 301
    np.testing.assert_array_equal(y1, y2)
    np.testing.assert_array_equal(loss1, loss2)
    assert loss1[-1] < loss1[250]


def test_propagate_line():
    pts = np.array([[0.0], [1.0], [3.0]])
    out = deepfa.propagate(pts, [0, 2], [0, 1], 2)
    assert list(out["assigned_label"]) == [0, 0, 1]
    assert out["confidence"][1] == pytest.approx(1.0 / 3.0)
    costs = deepfa.minimax_costs(pts, [0, 2], [0, 1], 2)
    np.testing.assert_array_equal(np.asarray(costs), out["class_costs"])


def test_metrics():
    assert deepfa.accuracy(np.array([0, 1, 1]), np.array([0, 1, 0])) == pytest.approx(2 / 3)
    assert deepfa.cohens_kappa(np.array([0, 1]), np.array([1, 0])) == pytest.approx(-1.0)


def test_run_experiment_loop():
    x, y = blobs(60, seed=5)
    cfg = {"partitions": 1, "iterations": 1,
           "extractor": {"hidden_width": 16, "epochs": 30, "batch_size": 8},
           "tsne": {"iterations": 300, "perplexity": 10}}
    res = deepfa.run_experiment(x, y, "deepfa-loop", 0.05, cfg)
    assert res["error"] is None
    assert len(res["iterations"]) == 2
    assert res["iterations"][0]["accuracy"][0] > 0.8


def test_render_scatter_is_svg():
    svg = deepfa.render_scatter(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([0.0, 1.0]))
    assert svg.lstrip().startswith("<")
    assert "svg" in svg
