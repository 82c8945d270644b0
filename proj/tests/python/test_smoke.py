import csv
import json
import math
import os
import shutil
import subprocess

import pytest

import madql


def cli():
    path = os.environ.get("MADQL_CLI") or shutil.which("madql")
    if not path:
        pytest.skip("madql CLI not found (set MADQL_CLI)")
    return path


SMALL = [
    "/hyper/real_episodes=2",
    "/hyper/sim_episodes=2",
    "/hyper/baseline_episodes=3",
    "/hyper/dqn/hidden=[16,16]",
    "/hyper/channel/max_epochs=20",
    "/hyper/pso/particles=30",
    "/hyper/pso/iterations=10",
]


def small(seed=3):
    return madql.apply_overrides(madql.default_scenario(seed), SMALL)


def test_default_scenario_mission():
    cfg = json.loads(madql.default_scenario(1))
    assert cfg["mission"]["start"] == [100, 100, 60]
    assert cfg["mission"]["end"] == [300, 400, 60]
    assert sum(n["anchor"] for n in cfg["nodes"]) == 2
    assert madql.default_scenario(1) == madql.default_scenario(1)
    assert madql.load_scenario(madql.default_scenario(1)) == cfg


def test_config_errors_name_the_field():
    with pytest.raises(madql.ConfigError, match="mission.end"):
        madql.validate_config(madql.apply_overrides(madql.default_scenario(1), ["/mission/end=[900,400,60]"]))
    with pytest.raises(ValueError):
        madql.validate_config("{")


def test_primitives():
    cfg = madql.default_scenario(1)
    uav, node = (100.0, 100.0, 60.0), (100.0, 0.0)
    beta, alpha = (-35.0, 2.3) if madql.is_los(cfg, uav, node) else (-40.0, 3.3)
    expected = beta - 10 * alpha * math.log10(math.hypot(100.0, 60.0))
    assert madql.true_gain_db(cfg, uav, node) == pytest.approx(expected, rel=1e-12)
    assert madql.epsilon(0) == 1.0
    assert madql.epsilon(100) == pytest.approx(0.1 + 0.9 * math.exp(-2.0))
    snr = 0.1 * 10 ** (-80 / 10) / 7.943282347242822e-13
    assert madql.throughput(-80.0) == pytest.approx(math.log2(1 + snr) / 6, rel=1e-14)


def test_pso_minimize_quadratic():
    pos, score, history = madql.pso_minimize(lambda p: (p[0] - 120) ** 2 + (p[1] - 300) ** 2, 500, 500, seed=2)
    assert math.hypot(pos[0] - 120, pos[1] - 300) < 1.0
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert score == history[-1]


def test_train_and_evaluate():
    cfg = small()
    ma = madql.train(cfg, "model-aided")
    assert len(ma["rows"]) == 2 * (1 + 2)
    assert [r["t"] for r in ma["rows"]] == list(range(6))
    assert ma["channel_net"] is not None
    assert len(ma["localization"]) == 2 * 4
    again = madql.train(cfg, "model-aided")
    assert again["rows"] == ma["rows"]

    bl = madql.train(cfg, "baseline")
    assert all(r["episode_kind"] == "real" for r in bl["rows"])
    assert bl["channel_net"] is None
    ev = madql.evaluate(cfg, bl["q_network"], episodes=3)
    assert ev["violations"] == 0
    assert ev["std_collected"] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        madql.train(cfg, "sarsa")


def run(*args):
    return subprocess.run([cli(), *args], capture_output=True, text=True)


def test_cli_end_to_end(tmp_path):
    overrides = []
    for o in SMALL:
        overrides += ["--set", o]
    scenario = tmp_path / "scenario.json"
    r = run("gen-scenario", "--seed", "3", "--out", str(scenario), *overrides)
    assert r.returncode == 0, r.stderr
    again = tmp_path / "again.json"
    run("gen-scenario", "--seed", "3", "--out", str(again), *overrides)
    assert scenario.read_bytes() == again.read_bytes()

    bad = run("gen-scenario", "--seed", "3", "--out", str(tmp_path / "bad.json"), "--set", "/mission/end=[900,400,60]")
    assert bad.returncode == 2
    assert "mission.end" in bad.stderr

    assert run("train", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")).returncode == 2

    ma = tmp_path / "ma"
    r = run("train", "--config", str(scenario), "--algo", "model-aided", "--out", str(ma))
    assert r.returncode == 0, r.stderr
    for name in ("learning_curve.csv", "localization.csv", "checkpoints/q_network.json", "config.json"):
        assert (ma / name).exists(), name

    bl = tmp_path / "bl"
    assert run("train", "--config", str(scenario), "--algo", "baseline", "--out", str(bl)).returncode == 0
    assert not (bl / "localization.csv").exists()

    ev = tmp_path / "eval"
    r = run("evaluate", "--config", str(scenario), "--checkpoint", str(ma / "checkpoints" / "q_network.json"),
            "--episodes", "3", "--out", str(ev))
    assert r.returncode == 0, r.stderr

    r = run("export-plots", "--run", str(ma))
    assert r.returncode == 0, r.stderr
    with open(ma / "plot_curve.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2
    overlay = json.loads((ma / "plot_overlay.json").read_text())
    for node in overlay["nodes"]:
        assert ("est_x" in node) == (not node["anchor"])

    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("export-plots", "--run", str(empty)).returncode != 0
