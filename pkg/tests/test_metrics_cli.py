import json

import numpy as np
import pytest
from click.testing import CliRunner

from pgvar.cli import main
from pgvar.errors import DimensionMismatchError, UndefinedNormalizationError
from pgvar.metrics import evaluate, rnmse
from pgvar.signal import load_sequence


class TestRnmse:
    def test_hand_cases(self, rng):
        x = rng.normal(size=(5, 4))
        assert rnmse(x, x) == 0.0
        assert rnmse(np.zeros_like(x), x) == 1.0
        assert rnmse([[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]) == np.sqrt(0.5)

    def test_invariances(self, rng):
        x, p = rng.normal(size=(2, 6, 3))
        assert rnmse(-7.5 * p, -7.5 * x) == pytest.approx(rnmse(p, x), rel=1e-14)
        e = rng.normal(size=x.shape)
        r1, r2 = rnmse(x + 1e-6 * e, x), rnmse(x + 2e-6 * e, x)
        assert r2 == pytest.approx(2 * r1, rel=1e-9)
        assert r1 == pytest.approx(1e-6 * np.linalg.norm(e) / np.linalg.norm(x), rel=1e-9)

    def test_errors(self):
        with pytest.raises(UndefinedNormalizationError):
            rnmse(np.ones((2, 2)), np.zeros((2, 2)))
        with pytest.raises(DimensionMismatchError):
            rnmse(np.ones((2, 2)), np.ones((2, 3)))

    def test_report(self, rng):
        truth = rng.normal(size=(4, 6))
        pred = truth + 0.1 * rng.normal(size=(4, 6))
        rep = evaluate(pred, truth, 3, 2)
        assert rep.rnmse == rnmse(pred, truth) and rep.n_steps == 4
        for t in range(4):
            assert rep.per_step_rnmse[t] == pytest.approx(rnmse(pred[t:t + 1], truth[t:t + 1]), rel=1e-14)
        for f in range(2):
            assert rep.per_feature_rnmse[f] == pytest.approx(rnmse(pred[:, f::2], truth[:, f::2]), rel=1e-14)
        np.testing.assert_allclose(rep.per_node_mse, ((pred - truth) ** 2).reshape(4, 3, 2).sum(2).mean(0))
        d = rep.to_dict()
        assert d["tau"] == 4 and len(d["per_node_mse"]) == 3


def invoke(*args):
    res = CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res.output


@pytest.fixture(scope="module")
def mesh(tmp_path_factory):
    out = tmp_path_factory.mktemp("mesh")
    invoke("synth", "--kind", "mesh", "--out", out, "--n-nodes", 30, "--n-steps", 80, "--seed", 2)
    return out


class TestCli:
    def test_synth_files(self, mesh):
        seq = load_sequence(mesh / "sequence.csv", n_features=3)
        assert (seq.n_nodes, seq.n_steps) == (30, 80)
        assert (mesh / "points.csv").exists() and (mesh / "graph.csv").exists()

    def test_fit_predict_evaluate(self, mesh, tmp_path):
        out = invoke("fit", "--data", mesh / "sequence.csv", "--n-features", 3, "--points", mesh / "points.csv",
                     "--family", "PGVAR", "--P", "1,2", "--K", "0,1", "--out", tmp_path / "m.json",
                     "--report", tmp_path / "r.json")
        rep = json.loads((tmp_path / "r.json").read_text())
        assert f"P={rep['selected']['P']}" in out
        invoke("predict", "--model", tmp_path / "m.json", "--data", mesh / "sequence.csv",
               "--start", 60, "--out", tmp_path / "pred.csv", "--space", "preprocessed")
        pred, t = load_sequence(tmp_path / "pred.csv", n_features=3, return_times=True)
        assert t.tolist() == list(range(60, 80))
        invoke("predict", "--model", tmp_path / "m.json", "--data", mesh / "sequence.csv",
               "--start", 60, "--out", tmp_path / "pred_orig.csv")
        invoke("evaluate", "--pred", tmp_path / "pred_orig.csv", "--truth", mesh / "sequence.csv",
               "--n-features", 3, "--out", tmp_path / "ev.json")
        ev = json.loads((tmp_path / "ev.json").read_text())
        assert ev["tau"] == 20 and 0 < ev["rnmse"] < 1

    def test_synth_process(self, tmp_path):
        invoke("synth", "--kind", "process", "--out", tmp_path, "--n-nodes", 8, "--n-steps", 50)
        seq = load_sequence(tmp_path / "sequence.csv", n_features=3)
        assert seq.n_steps == 50
        assert json.loads((tmp_path / "spec.json").read_text())["family"] == "PGVAR"

    def test_experiment_and_overrides(self, mesh, tmp_path):
        cfg = {"data": {"kind": "files", "sequence": str(mesh / "sequence.csv"),
                        "points": str(mesh / "points.csv"), "n_features": 3},
               "families": {"GVAR": {"P_grid": [1], "K_grid": [1]}, "PGVAR": {"P_grid": [1], "K_grid": [1]}}}
        (tmp_path / "c.json").write_text(json.dumps(cfg))
        invoke("experiment", tmp_path / "c.json", "--out", tmp_path / "run", "--family", "PGVAR",
               "--in-fraction", 0.6, "--in-fraction", 0.8, "--knn", 5, "--product", "strong")
        rows = (tmp_path / "run" / "comparison.csv").read_text().splitlines()
        assert rows[0] == "in_fraction,family,test_rnmse"
        assert [r.split(",")[:2] for r in rows[1:]] == [["0.6", "PGVAR"], ["0.8", "PGVAR"]]
        assert (tmp_path / "run" / "reports" / "PGVAR_in60.json").exists()
        saved = json.loads((tmp_path / "run" / "config.json").read_text())
        assert saved["product"] == "strong" and saved["graph"]["knn"] == 5

    def test_default_sweep_has_five_rows_per_family(self, mesh, tmp_path):
        cfg = {"data": {"kind": "files", "sequence": str(mesh / "sequence.csv"),
                        "points": str(mesh / "points.csv"), "n_features": 3},
               "families": {"GVAR": {"P_grid": [1], "K_grid": [0]}, "PGVAR": {"P_grid": [1], "K_grid": [0]}}}
        (tmp_path / "c.json").write_text(json.dumps(cfg))
        invoke("experiment", tmp_path / "c.json", "--out", tmp_path / "run")
        rows = (tmp_path / "run" / "comparison.csv").read_text().splitlines()[1:]
        for fam in ("GVAR", "PGVAR"):
            assert [r.split(",")[0] for r in rows if r.split(",")[1] == fam] == ["0.5", "0.6", "0.7", "0.8", "0.9"]

    def test_errors_are_clean(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,v0\n0,1\n0,2\n")
        res = CliRunner().invoke(main, ["fit", "--data", str(bad), "--points", str(bad), "--out", str(tmp_path / "m.json")])
        assert res.exit_code != 0 and "Error" in res.output
        assert "Traceback" not in res.output
