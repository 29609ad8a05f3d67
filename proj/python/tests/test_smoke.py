import json
import math

import numpy as np
import pytest

import sfwc


def test_lmo_matches_brute_force():
    rng = np.random.default_rng(0)
    for kind, shape, k in [("k_support", (8,), 3), ("k_sparse_polytope", (6,), 2), ("spectral_k_support", (4, 5), 2)]:
        region = getattr(sfwc.FeasibleRegion, kind)(list(shape), k, 1.5)
        g = rng.normal(size=shape)
        v = sfwc.lmo(region, g)
        assert v.shape == shape
        assert float(np.sum(v * g)) == pytest.approx(sfwc.brute_force_lmo_value(region, g), abs=1e-10)
        assert sfwc.gauge(region, v) <= 1.5 * (1 + 1e-9)


def test_k_support_norm_limits():
    x = np.array([3.0, -4.0, 0.0, 1.0])
    assert sfwc.k_support_norm(x, 1) == pytest.approx(8.0)
    assert sfwc.k_support_norm(x, 4) == pytest.approx(np.linalg.norm(x))


def test_svd_against_numpy():
    a = np.random.default_rng(1).normal(size=(50, 80))
    _, sigma, _ = sfwc.svd_topk(a, 5)
    ref = np.linalg.svd(a, compute_uv=False)[:5]
    np.testing.assert_allclose(sigma, ref, rtol=1e-6)


def test_theorem_constants():
    eta, batch = sfwc.theorem_schedule(1.0, 1.0, 1.0, 1.0, 2.0, 100)
    assert batch == 100
    assert eta == pytest.approx(math.sqrt(1.0 / 200.0))
    assert sfwc.theorem_bound(1.0, 1.0, 1.0, 1.0, 2.0, 100) == pytest.approx(0.27678, abs=1e-5)


def test_budget_accounting():
    assert sfwc.budget_count(0.7, 10400) == 7280
    assert sfwc.rank_for_reduction(8, 36, 25.0 / 36.0) == 2


def test_config_errors_raise():
    with pytest.raises(sfwc.Error, match="ConfigError"):
        sfwc.parse_config({"id": "x", "optimizer": {"method": "adam"}})
    with pytest.raises(sfwc.Error, match="unknown key"):
        sfwc.parse_config({"id": "x", "region": {"kind": "k_support"}, "bogus": 1})


def test_grid_expansion_order():
    cells = sfwc.expand_grid({"id": "g", "grid": {"b": [1, 2], "a": [10, 20]}})
    assert [c[0] for c in cells] == ["g-g000", "g-g001", "g-g002", "g-g003"]
    assert [(c[1]["a"], c[1]["b"]) for c in cells] == [(10, 1), (10, 2), (20, 1), (20, 2)]


def test_tiny_experiment_round_trip(tmp_path):
    config = {
        "id": "tiny",
        "dataset": {"kind": "two_moons", "n_train": 64, "n_test": 64, "noise": 0.1},
        "model": {"kind": "mlp", "hidden": [8]},
        "optimizer": {"method": "sfw", "eta0": 0.5},
        "region": {"kind": "k_support", "k_fraction": 0.2, "w": 5},
        "compression": {"targets": [0, 0.5, 0.9]},
        "run": {"epochs": 2, "batch_size": 16, "seeds": [0, 1], "trace": True},
    }
    cell_dir, summaries = sfwc.run_experiment(config, str(tmp_path))
    assert [s["seed"] for s in summaries] == [0, 1]
    assert all(s["feasible"] for s in summaries)
    lines = (cell_dir / "tradeoff.csv").read_text().splitlines()
    assert lines[0] == "method,config_id,seed,target,achieved,metric_pre,metric_post"
    assert len(lines) == 1 + 2 * 3
    metrics = (cell_dir / "metrics_seed0.csv").read_text().splitlines()
    assert metrics[0] == "epoch,train_loss,train_acc,test_acc,grad_norm_mean,eff_lr_mean,wall_s"
    tensors = sfwc.read_snapshot(str(cell_dir / "snapshot_seed0.bin"), str(cell_dir / "snapshot_seed0.json"))
    manifest = json.loads((cell_dir / "snapshot_seed0.json").read_text())
    assert [t["name"] for t in manifest["tensors"]] == list(tensors)
    assert tensors["0.dense.weight"].shape == (8, 2)

    again, _ = sfwc.run_experiment(config, str(tmp_path / "again"))
    assert (again / "tradeoff.csv").read_bytes() == (cell_dir / "tradeoff.csv").read_bytes()

    selection = sfwc.select(str(tmp_path))
    assert selection["methods"][0]["unfiltered"]["config_id"] == "tiny"
