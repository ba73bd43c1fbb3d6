"""CLI subcommands (thin client) and the HTTP service they drive."""

import json
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

from topodistill.cli import main
from topodistill.datatypes import RunConfig, config_to_dict
from topodistill.fileio import read_image
from topodistill.manifest import ARTIFACT_VERSION
from topodistill.service.app import app


def small_config_dict(seed=0):
    cfg = RunConfig(budget_B=4, residual_blocks_k=1, n_c=6, refresh_T=2,
                    learn_rate=0.01, ipc=3, pi_grid=8, sigma_pi=0.1, seed=seed)
    return config_to_dict(cfg)


def write_toy_manifest(tmp_path, seed=0, mode="drc+pta"):
    data_path = str(tmp_path / "toy.csv")
    rc = main(["gen-toy", "two-ring", data_path, "--n-per-class", "8",
               "--seed", str(seed), "--side", "6"])
    assert rc == 0
    manifest = {
        "config": small_config_dict(seed),
        "feature_map": {"kind": "pixel-identity"},
        "dataset_path": data_path,
        "mode": mode,
        "artifact_version": ARTIFACT_VERSION,
    }
    path = str(tmp_path / "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def unit_square_csv(tmp_path):
    path = str(tmp_path / "square.csv")
    with open(path, "w") as fh:
        fh.write("x0,x1\n0,0\n1,0\n1,1\n0,1\n")
    return path


class TestCli:
    def test_gen_toy_writes_ingestable_csv(self, tmp_path):
        out = str(tmp_path / "toy.csv")
        assert main(["gen-toy", "two-ring", out, "--n-per-class", "4",
                     "--seed", "1", "--side", "5"]) == 0
        from topodistill.fileio import ingest_dataset
        data = ingest_dataset(out)
        assert len(data.images) == 8

    def test_distill_writes_artifacts(self, tmp_path):
        manifest = write_toy_manifest(tmp_path)
        out = str(tmp_path / "run")
        assert main(["distill", manifest, "--out", out]) == 0
        for name in ("diagnostics.json", "losses.csv", "manifest.json",
                     "syn_c0_000.pgm", "diagram_0.csv", "betti_1.csv"):
            assert os.path.exists(os.path.join(out, name)), name

    def test_distill_replay_is_byte_identical(self, tmp_path):
        manifest = write_toy_manifest(tmp_path, seed=2)
        out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        assert main(["distill", manifest, "--out", out1]) == 0
        assert main(["distill", manifest, "--out", out2]) == 0
        names = ["losses.csv"] + [f"syn_c{c}_{s:03d}.pgm"
                                  for c in range(2) for s in range(3)]
        for name in names:
            a = open(os.path.join(out1, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b, name

    def test_ph_emits_root_two_loop(self, tmp_path):
        csv = unit_square_csv(tmp_path)
        out = str(tmp_path / "ph")
        assert main(["ph", csv, "--k", "3", "--eps-max", "2.0", "--out", out]) == 0
        rows = open(os.path.join(out, "diagram.csv")).read().splitlines()
        loops = [r for r in rows if r.startswith("1,")]
        assert len(loops) == 1
        _, birth, death, capped = loops[0].split(",")
        assert float(birth) == pytest.approx(1.0, abs=1e-9)
        assert float(death) == pytest.approx(np.sqrt(2.0), abs=1e-9)
        assert capped == "0"
        for name in ("edges.csv", "betti.csv", "pi_0.csv", "pi_1.csv"):
            assert os.path.exists(os.path.join(out, name))

    def test_retrieve_prints_decision(self, tmp_path, capsys):
        manifest = write_toy_manifest(tmp_path, seed=3)
        assert main(["retrieve", manifest, "--class", "1", "--image", "0"]) == 0
        text = capsys.readouterr().out
        assert "chose pool index" in text
        # one score line per pool candidate (8 real images in class 1)
        assert text.count("score=") == 8

    def test_analyze_recomputes_kappa(self, tmp_path, capsys):
        manifest = write_toy_manifest(tmp_path, seed=4)
        out = str(tmp_path / "run")
        assert main(["distill", manifest, "--out", out]) == 0
        capsys.readouterr()
        assert main(["analyze", out]) == 0
        text = capsys.readouterr().out
        payload = json.loads(text)
        recorded = json.load(open(os.path.join(out, "diagnostics.json")))
        assert payload["kappa_recorded"] == pytest.approx(recorded["kappa_per_class"])
        assert payload["kappa_recomputed"] == pytest.approx(recorded["kappa_per_class"])
        assert payload["contraction_ratios"] == pytest.approx(recorded["contraction_ratios"])

    def test_verify_quick_exits_zero(self, capsys):
        assert main(["verify", "--quick"]) == 0
        text = capsys.readouterr().out
        assert "PASS" in text
        assert "FAIL" not in text

    def test_missing_manifest_exits_one(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.json")
        assert main(["distill", missing]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["distilll"])
        assert exc.value.code == 2

    def test_analyze_missing_dir_exits_one(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "ghost")]) == 1
        assert "error" in capsys.readouterr().err


class TestService:
    @pytest.fixture()
    def client(self):
        return TestClient(app)

    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["version"] == ARTIFACT_VERSION

    def test_distill_endpoint(self, client, tmp_path):
        manifest_path = write_toy_manifest(tmp_path, seed=5)
        manifest = json.load(open(manifest_path))
        out = str(tmp_path / "run")
        resp = client.post("/distill", json={"manifest": manifest, "out_dir": out})
        assert resp.status_code == 200
        body = resp.json()
        assert body["mode"] == "drc+pta"
        assert body["total_steps"] == 4
        assert len(body["kappa_per_class"]) == 2
        assert "losses.csv" in body["files"]
        assert os.path.exists(os.path.join(out, "losses.csv"))

    def test_ph_endpoint(self, client, tmp_path):
        csv = unit_square_csv(tmp_path)
        out = str(tmp_path / "ph")
        resp = client.post("/ph", json={"points_csv": csv, "k": 3,
                                        "eps_max": 2.0, "out_dir": out})
        assert resp.status_code == 200
        body = resp.json()
        assert body["h1_count"] == 1
        bar = body["h1_bars"][0]
        assert bar[0] == pytest.approx(1.0)
        assert bar[1] == pytest.approx(np.sqrt(2.0))

    def test_retrieve_endpoint(self, client, tmp_path):
        manifest = json.load(open(write_toy_manifest(tmp_path, seed=6)))
        resp = client.post("/retrieve", json={"manifest": manifest,
                                              "class_id": 0, "image_index": 1})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["candidates"]) == 8
        scores = [c["score"] for c in body["candidates"]]
        assert body["chosen_score"] == pytest.approx(min(scores))
        chosen = body["candidates"][body["chosen_index"]]
        assert body["chosen_source"] == chosen["source_image"]

    def test_analyze_endpoint(self, client, tmp_path):
        manifest_path = write_toy_manifest(tmp_path, seed=7)
        out = str(tmp_path / "run")
        assert main(["distill", manifest_path, "--out", out]) == 0
        resp = client.post("/analyze", json={"run_dir": out})
        assert resp.status_code == 200
        body = resp.json()
        recorded = json.load(open(os.path.join(out, "diagnostics.json")))
        assert body["kappa_recorded"] == pytest.approx(recorded["kappa_per_class"])
        assert body["kappa_recomputed"] == pytest.approx(recorded["kappa_per_class"])

    def test_gen_toy_endpoint(self, client, tmp_path):
        out = str(tmp_path / "blobs.csv")
        resp = client.post("/gen-toy", json={"kind": "gaussian-blobs",
                                             "out_path": out, "n_per_class": 4,
                                             "seed": 0, "side": 6})
        assert resp.status_code == 200
        body = resp.json()
        # blob generator defaults to three classes
        assert body["image_count"] == 12
        assert body["class_count"] == 3
        assert os.path.exists(out)

    def test_bad_manifest_is_client_error(self, client, tmp_path):
        manifest = json.load(open(write_toy_manifest(tmp_path, seed=8)))
        manifest["mode"] = "warp"
        resp = client.post("/distill", json={"manifest": manifest,
                                             "out_dir": str(tmp_path / "x")})
        assert resp.status_code == 400
        body = resp.json()
        assert "error" in body and "message" in body

    def test_validation_error_shape(self, client):
        resp = client.post("/retrieve", json={"manifest": {}, "class_id": -1,
                                              "image_index": 0})
        assert resp.status_code in (400, 422)
