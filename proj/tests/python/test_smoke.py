import math

import pytest

import fabco


def tiny_config():
    cfg = fabco.default_config()
    cfg["robot_data"]["n_trajectories"] = 40
    cfg["idm_train"]["epochs"] = 3
    cfg["fdm_train"]["epochs"] = 3
    cfg["policy_train"]["epochs"] = 3
    cfg["n_demos"] = 5
    cfg["n_eval_rollouts"] = 4
    cfg["seeds"] = [5]
    return cfg


@pytest.fixture(scope="module")
def models():
    return fabco.train_dynamics(tiny_config(), seed=5)


def test_feasibility_formula():
    for sigma in (0.05, 0.15, 0.5):
        for e in (0.0, 0.01, 0.3):
            expected = math.exp(-e / (2 * sigma * sigma))
            assert abs(fabco.feasibility_from_error(e, sigma) - expected) < 1e-12
    assert fabco.feasibility_from_error(0.0, 0.15) == 1.0


def test_welch_matches_reference():
    r = fabco.welch_t_test([1, 2, 3, 4, 5], [2, 4, 6, 8, 10])
    assert r["t"] == pytest.approx(-1.8973665961010275, rel=1e-12)
    assert r["p_value"] == pytest.approx(0.10753119493062718, rel=1e-9)


def test_config_round_trip():
    cfg = fabco.default_config()
    assert cfg["sigma_w"] == 0.15
    assert fabco.config_hash(cfg) == fabco.config_hash(None)
    cfg["sigma_w"] = 0.2
    assert fabco.config_hash(cfg) != fabco.config_hash(None)
    with pytest.raises(Exception):
        fabco.config_hash({"no_such_field": 1})


def test_trajectories():
    t = fabco.generate_random_trajectory(3, 5, 20)
    assert len(t["states"]) == 20
    assert len(t["actions"]) == 19
    assert t == fabco.generate_random_trajectory(3, 5, 20)
    demo = fabco.synth_demo(1.0, seed=4)
    assert demo["actions"] == []
    assert fabco.task_success(demo)


def test_models_and_profile(models, tmp_path):
    pose = [0.5, 0.5, 0.5]
    nxt = models.predict_pose(pose, [0.0, 0.0, 0.0])
    assert len(nxt) == 3
    assert len(models.predict_action(pose, nxt)) == 3
    slow = fabco.feasibility_profile(models, fabco.synth_demo(1.0, seed=1))
    fast = fabco.feasibility_profile(models, fabco.synth_demo(3.0, seed=1))
    assert all(0.0 < w <= 1.0 for w in slow["weights"])
    assert slow["mean"] > fast["mean"]
    models.save(str(tmp_path))
    again = fabco.DynModels.load(str(tmp_path))
    assert again.predict_pose(pose, [0.1, 0.2, 0.3]) == models.predict_pose(
        pose, [0.1, 0.2, 0.3])


def test_train_and_evaluate_policy(models):
    cfg = tiny_config()
    policy = fabco.train_policy(models, "bco", cfg, seed=5)
    report = fabco.evaluate_policy(policy, cfg, n_rollouts=3, seed=1)
    assert report["n_rollouts"] == 3
    assert 0 <= report["successes"] <= 3
    with pytest.raises(Exception):
        fabco.train_policy(models, "no_such_variant", cfg)


def test_ablation_report(tmp_path):
    a = fabco.run_ablation(tiny_config(), tmp_path / "a")
    b = fabco.run_ablation(tiny_config(), tmp_path / "b")
    assert a == b
    assert len(a["seeds"][0]["variants"]) == 4
    assert (tmp_path / "a" / "report.txt").read_text() == (
        tmp_path / "b" / "report.txt").read_text()
