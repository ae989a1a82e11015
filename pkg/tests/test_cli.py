import json

import numpy as np
import pytest

from semidiscrete.cli import main, preset
from semidiscrete.cost import CenterSet, CostSpec, leg_matrix
from semidiscrete.measures import DiscreteMeasure


def _run(tmp_path, command, cfg=None, extra=(), name="out"):
    args = [command, "--out", str(tmp_path / name)]
    if cfg is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        args += ["--config", str(path)]
    code = main(args + list(extra))
    return code, tmp_path / name


SMALL = {
    "mu": {"dim": 1, "points": [[0.0], [0.4]], "weights": [0.3, 0.7]},
    "nu": {"dim": 1, "points": [[1.0], [0.8]], "weights": [0.5, 0.5]},
    "cost": {"sigma": 2.0, "scale": "auto"},
}


def test_solve_single_center(tmp_path):
    cfg = dict(SMALL, centers={"explicit": [[0.5]]}, oracle=True)
    code, out = _run(tmp_path, "solve", cfg)
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    mu = DiscreteMeasure(np.array([[0.0], [0.4]]), np.array([0.3, 0.7]))
    nu = DiscreteMeasure(np.array([[1.0], [0.8]]), np.array([0.5, 0.5]))
    Z = CenterSet([[0.5]])
    expect = (mu.weights @ leg_matrix(mu.points, Z, CostSpec())[:, 0]
              + nu.weights @ leg_matrix(nu.points, Z, CostSpec())[:, 0])
    assert rep["value"] == pytest.approx(expect, abs=1e-15)
    assert rep["gap"]["gap"] >= -1e-9
    for f in ("partition_source.csv", "partition_target.csv", "plan.csv", "manifest.json"):
        assert (out / f).is_file()
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 0 and len(man["config_sha256"]) == 64
    assert {"numpy", "scipy", "semidiscrete"} <= set(man["versions"])


def test_missing_input_file(tmp_path, capsys):
    cfg = {"mu": {"path": str(tmp_path / "missing.json")}, "m": 2}
    code, _ = _run(tmp_path, "solve", cfg)
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ValidationError"


def test_missing_config_and_bad_preset(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert main(["solve", "--preset", "moon", "--out", str(tmp_path)]) == 2
    lines = [json.loads(l) for l in capsys.readouterr().err.splitlines()]
    assert [l["error"] for l in lines] == ["ValidationError", "ValidationError"]


def test_deterministic_outputs(tmp_path):
    cfg = {"mu": {"random": {"n": 30, "d": 2}}, "nu": {"random": {"n": 25, "d": 2}},
           "m": 4, "centers": {"kmeans++": True}, "refine": {"rounds": 5}}
    _, a = _run(tmp_path, "refine", cfg, ["--seed", "7"], name="a")
    _, b = _run(tmp_path, "refine", cfg, ["--seed", "7"], name="b")
    for f in sorted(p.name for p in a.iterdir()):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    traj = json.loads((a / "trajectory.json").read_text())
    v = traj["values"]
    assert all(y <= x + 1e-9 for x, y in zip(v, v[1:]))


def test_preset_square_grid(tmp_path):
    code, out = _run(tmp_path, "refine", None, ["--preset", "paper-square@0.2"])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert len(rep["centers"]) == 10
    for side in ("source", "target", "pullback"):
        assert (out / f"figure_{side}.svg").is_file()
    assert 0 <= rep["pullback_disagreement"] <= 1
    assert preset("paper-square")["nu"]["pushforward"]["lambda"] == 0.2


def test_hedonic_exact_render(tmp_path):
    cfg = dict(SMALL, centers={"explicit": [[0.5], [3.0]]})
    code, out = _run(tmp_path, "hedonic", cfg, name="h")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["value"] <= 0.0
    code, out = _run(tmp_path, "exact", dict(SMALL), name="e")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    # 1-D quadratic cost: the sorted (monotone) coupling is optimal
    assert rep["exact_value"] == pytest.approx(0.3 * 0.64 + 0.2 * 0.16 + 0.5 * 0.36, abs=1e-15)
    code, out = _run(tmp_path, "render", None, ["--preset", "paper-square@0"], name="r")
    assert code == 0
    assert (out / "figure_source.svg").read_text() == (out / "figure_pullback.svg").read_text()


def test_render_rejects_one_dimensional(tmp_path, capsys):
    cfg = dict(SMALL, centers={"explicit": [[0.5]]})
    code, _ = _run(tmp_path, "render", cfg)
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "DimensionError"


def test_asymptotics_command(tmp_path):
    cfg = {"mu": {"grid": {"d": 1, "k": 30}}, "asymptotics": {"m_list": [2, 4], "rounds": 10,
                                                              "seeds": [0]}}
    code, out = _run(tmp_path, "asymptotics", cfg)
    assert code == 0
    assert (out / "sweep.csv").read_text().splitlines()[0] == "m,gap,slope_running"
