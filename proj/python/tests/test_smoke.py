import math

import numpy as np
import pytest

import cit


def two_blocks(seed=0):
    g = cit.sbm_graph([60, 60], p_same=0.05, p_cross=0.005, feature_dim=8, seed=seed)
    return cit.split_nodes(g, train_per_class=10, seed=seed)


def quick_config(epochs=30):
    c = cit.CitConfig()
    c.epochs = epochs
    c.patience = epochs
    c.hidden_dim = 16
    return c


def test_version():
    assert cit.__version__ == "0.1.0"


def test_graph_basics():
    g = two_blocks()
    assert g.num_nodes == 120
    assert g.num_classes == 2
    assert g.features.shape == (120, 8)
    assert sum(g.train_mask) == 20
    assert all(i < j for i, j in g.edges())
    denser = cit.perturb_add_edges(g, 0.5, seed=1)
    assert denser.num_edges == g.num_edges + g.num_edges // 2


def test_graph_from_arrays_validates():
    g = cit.graph_from_arrays(3, [(0, 1), (1, 2)], np.eye(3), [0, 1, 0])
    assert g.num_edges == 2
    with pytest.raises(cit.ValidationError):
        cit.graph_from_arrays(3, [(0, 5)], np.eye(3), [0, 1, 0])


def test_loss_worked_cases():
    triangles = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    split = np.array([[1, 0]] * 3 + [[0, 1]] * 3, dtype=float)
    assert cit.mincut_loss(split, 6, triangles) == pytest.approx(-1.0, abs=1e-12)
    collapsed = np.array([[1, 0]] * 6, dtype=float)
    assert cit.ortho_loss(collapsed) == pytest.approx(math.sqrt(2 - math.sqrt(2)), abs=1e-12)


def test_transfer_one_dimensional_example():
    z = np.array([-1.0, 1.0, 8.0, 12.0])
    s = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
    stats = cit.cluster_stats(s, z)
    assert stats["centers"][:, 0].tolist() == [0.0, 10.0]
    out = cit.transfer(z, s, [1], [1])
    assert out[1, 0] == 12.0
    assert out[[0, 2, 3], 0].tolist() == [-1.0, 8.0, 12.0]


def test_training_and_baseline_equivalence():
    g = two_blocks(1)
    off = quick_config()
    off.p = 0.0
    off.alpha_c = 0.0
    off.alpha_o = 0.0
    a = cit.train(g, off)
    b = cit.train(g, quick_config().baseline())
    assert a.record_ndjson() == b.record_ndjson()
    assert len(a.epochs) == 30
    assert 0.0 <= a.test["accuracy"] <= 1.0
    assert a.predict_logits(g).shape == (120, 2)
    assert len(a.clusters(g)) == 120


def test_bad_config_raises_validation_error():
    c = quick_config()
    c.p = 2.0
    with pytest.raises(cit.ValidationError, match="cit.p"):
        cit.train(two_blocks(), c)


def test_metrics():
    assert cit.accuracy([0, 1, 1], [0, 1, 0]) == pytest.approx(2 / 3)
    assert cit.macro_f1([0, 0, 0, 0], [0, 1, 0, 1], 2) == pytest.approx(1 / 3)
    assert cit.roc_auc([0.1, 0.4, 0.5, 0.8], [0, 1, 0, 1]) == 0.75
    line = np.array([0.0, 1.0, 10.0, 11.0])
    assert cit.silhouette(line, [0, 0, 1, 1]) == pytest.approx(0.89975, abs=1e-5)
    r = cit.paired_t_test([0.5, 0.7, 0.4, 0.6, 0.8], [0.0] * 5)
    assert r["t"] == pytest.approx(8.485, abs=1e-3)
    assert cit.t_critical(0.05, 4) == pytest.approx(2.776, abs=1e-3)


def test_theory_full_transfer():
    w = cit.random_world(1, 3)
    r = cit.theory_transfer_check(w, 1.0)
    assert r["skew_gap"] == pytest.approx(0.0, abs=1e-14)
    assert r["cov_post"][0] == pytest.approx(w.mu_D[0] * (w.pi_0 - w.pi_1), abs=1e-12)
    assert cit.fisher_stats(w)["var"][0] > 0


def test_gradient_suite_passes():
    entries = cit.gradient_suite()
    assert len(entries) >= 22
    assert all(e["passed"] for e in entries)


def test_run_experiment(tmp_path):
    spec = """cit-spec 1
kind = single_train
seeds = 0, 1
data.sbm.block_sizes = 40, 40
data.sbm.feature_dim = 8
data.split.train_per_class = 5
cit.epochs = 10
cit.hidden_dim = 8
"""
    first = cit.run_experiment(spec, tmp_path / "a")
    second = cit.run_experiment(spec, tmp_path / "b")
    assert first["summary_csv"] == second["summary_csv"]
    assert (tmp_path / "a" / "resolved-config.txt").read_text() == cit.resolve_spec(spec)
    with pytest.raises(cit.ParseError):
        cit.run_experiment("kind = sweep\n", tmp_path / "c")


def test_preset_config_round_trips():
    text = cit.preset_config()
    assert text.startswith("cit-spec 1\n")
    assert cit.resolve_spec(text) == text
