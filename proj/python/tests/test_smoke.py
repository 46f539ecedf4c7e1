import json
import os
from pathlib import Path

import numpy as np
import pytest

import reachmap

DATA = Path(os.environ.get("REACHMAP_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def arm_model():
    space, X, y = reachmap.sample(str(DATA / "arm2.json"), "ik", 1500, seed=7)
    return space, X, y, reachmap.train_svm(space, X, y, gamma=30.0, offset=0.1)


def test_encode_se2():
    np.testing.assert_allclose(reachmap.encode("SE2", [1.0, 2.0, np.pi / 2]), [1.0, 2.0, 0.0, 1.0], atol=1e-15)


def test_train_and_evaluate(arm_model):
    space, X, y, model = arm_model
    assert space == "R2"
    assert X.shape == (1500, 2)
    assert model.kind == "svm"
    assert model.offset == pytest.approx(0.1)
    gspace, GX, Gy = reachmap.oracle_grid(str(DATA / "arm2.json"), per_axis=40)
    report = reachmap.compute_iou(model, gspace, GX, Gy)
    assert report["iou"] > 0.9
    assert report["tp"] + report["fp"] + report["fn"] + report["tn"] == 1600
    lowered = reachmap.compute_iou(model, gspace, GX, Gy, offset=-5.0)
    assert lowered["tp"] + lowered["fp"] == 0


def test_gradient_matches_differences(arm_model):
    model = arm_model[3]
    x = np.array([1.2, 1.0])
    h = 1e-6
    fd = [(model.value(x + h * e) - model.value(x - h * e)) / (2 * h) for e in np.eye(2)]
    np.testing.assert_allclose(model.gradient(x), fd, rtol=1e-5, atol=1e-8)
    np.testing.assert_array_equal(model.values(np.array([x, x])), [model.value(x)] * 2)


def test_model_round_trip(arm_model, tmp_path):
    model = arm_model[3]
    path = tmp_path / "m.json"
    model.save(str(path))
    again = reachmap.load_model(str(path))
    x = np.array([0.7, 1.1])
    assert again.value(x) == model.value(x)


def test_qp():
    out = reachmap.solve_qp(np.eye(1), np.array([-2.0]), A=np.array([[-1.0]]), b=np.array([-1.0]))
    assert out["status"] == "optimal"
    assert out["z"][0] == pytest.approx(1.0)
    assert out["row_multipliers"][0] == pytest.approx(1.0)


def test_errors_are_typed():
    with pytest.raises(reachmap.ReachmapError, match="^io: "):
        reachmap.load_model("/nonexistent/model.json")
    with pytest.raises(reachmap.ReachmapError, match="dimension_mismatch"):
        reachmap.train_svm("R2", np.zeros((3, 4)), np.ones(3))


def test_plan_and_cli(arm_model, tmp_path):
    model = arm_model[3]
    model.save(str(tmp_path / "arm.json"))
    problem = {"kind": "basic", "models": {"map": "arm.json"}, "target": [0.8, 1.2]}
    (tmp_path / "basic.json").write_text(json.dumps(problem))
    result = reachmap.plan(str(tmp_path / "basic.json"))
    assert result["converged"]
    assert min(result["constraint_values"]) >= -1e-6

    code, out, err = reachmap.run_cli(["plan", "--problem", str(tmp_path / "basic.json"),
                                       "--out", str(tmp_path / "p.csv")])
    assert code == 0, err
    assert (tmp_path / "p.csv.manifest.json").exists()
    code, _, err = reachmap.run_cli(["plan", "--bogus"])
    assert code == 2
