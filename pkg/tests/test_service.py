"""HTTP service: the full pipeline end to end, plus error mapping."""

import csv
import json

import numpy as np
import pytest
from starlette.testclient import TestClient

from partmap import formats
from partmap.service import create_app


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


def post_ok(client, path, payload):
    response = client.post(path, json=payload)
    assert response.status_code == 200, response.text
    return response.json()


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


class TestPipelineEndToEnd:
    def test_full_flow(self, client, feature_world, tmp_path):
        train_fmap, train_labels, _, _ = feature_world.write_labeled("train", per_class=10)
        test_fmap, test_labels, test_ids, test_truth = feature_world.write_labeled(
            "test", per_class=6
        )
        bg_fmap = feature_world.write_background("bg")

        dict_path = tmp_path / "dict.json"
        body = post_ok(
            client,
            "/dictionary/build",
            {
                "features_path": str(train_fmap),
                "labels_path": str(train_labels),
                "out_path": str(dict_path),
                "k_per_class": 3,
                "seed": 5,
            },
        )
        assert body["parts"] == 9
        assert body["classes"] == 3

        bmap_path = tmp_path / "train.bmap"
        body = post_ok(
            client,
            "/encode",
            {
                "features_path": str(train_fmap),
                "model_path": str(dict_path),
                "out_path": str(bmap_path),
            },
        )
        assert body["maps"] == 30
        assert 0.0 < body["mean_active_fraction"] < 1.0
        assert len(formats.read_detection_maps(bmap_path)) == 30

        model_path = tmp_path / "model.json"
        body = post_ok(
            client,
            "/train",
            {
                "features_path": str(train_fmap),
                "labels_path": str(train_labels),
                "dict_path": str(dict_path),
                "out_path": str(model_path),
                "mixtures": 2,
                "iters": 5,
                "seed": 3,
                "bg_features": [["noise", str(bg_fmap)]],
            },
        )
        assert body["classes"] == 3
        assert body["backgrounds"] == ["noise"]
        # alternating ML must not degrade its own objective
        for history in body["objectives"].values():
            assert all(b >= a - 1e-6 for a, b in zip(history, history[1:]))

        pred_path = tmp_path / "pred.csv"
        body = post_ok(
            client,
            "/classify",
            {
                "features_path": str(test_fmap),
                "model_path": str(model_path),
                "out_path": str(pred_path),
                "ids_path": str(test_labels),
            },
        )
        predictions = body["predictions"]
        assert [p["source_id"] for p in predictions] == test_ids
        accuracy = np.mean([p["label"] == t for p, t in zip(predictions, test_truth)])
        assert accuracy == 1.0  # clean, well-separated features

        report = post_ok(
            client,
            "/evaluate",
            {"pred_path": str(pred_path), "labels_path": str(test_labels)},
        )
        assert report["per_condition"]["all"]["accuracy"] == 1.0
        assert report["n_items"] == 18

        explain_body = post_ok(
            client,
            "/explain",
            {
                "features_path": str(test_fmap),
                "model_path": str(model_path),
                "index": 0,
                "out_prefix": str(tmp_path / "exp"),
            },
        )
        heatmap = (tmp_path / "exp.pgm").read_bytes()
        assert heatmap.startswith(b"P5\n4 4\n255\n")
        assert len(heatmap) == len(b"P5\n4 4\n255\n") + 16
        with open(tmp_path / "exp_parts.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["row", "col", "part_index", "part_class", "fg_score"]
        assert len(rows) == 6  # header + top 5
        assert explain_body["visible_fraction"] > 0.5

    def test_fuse_and_eval_with_conditions(self, client, feature_world, tmp_path):
        # compositional predictions: all correct; external: confidently wrong on
        # class 0, confident-correct on class 1, unconfident on class 2
        test_fmap, test_labels, ids, truth = feature_world.write_labeled("t", per_class=2)
        comp_path = tmp_path / "comp.csv"
        with open(comp_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_id", "predicted_label"])
            for source_id, label in zip(ids, truth):
                writer.writerow([source_id, label])
        probs_path = tmp_path / "probs.csv"
        rows = []
        for source_id, label in zip(ids, truth):
            if label == 0:
                row = [0.0, 0.9, 0.1]  # confident and wrong
            elif label == 1:
                row = [0.05, 0.9, 0.05]  # confident and right
            else:
                row = [0.34, 0.33, 0.33]  # unconfident
            rows.append((source_id, row))
        formats.write_probabilities([r[0] for r in rows], np.array([r[1] for r in rows]), probs_path)

        fused_path = tmp_path / "fused.csv"
        body = post_ok(
            client,
            "/fuse",
            {
                "dcnn_probs_path": str(probs_path),
                "comp_pred_path": str(comp_path),
                "out_path": str(fused_path),
                "tau": 0.6,
            },
        )
        assert body["n_items"] == 6
        assert body["branch_usage"]["external"] == pytest.approx(4 / 6)
        assert body["branch_usage"]["compositional"] == pytest.approx(2 / 6)

        conditions_path = tmp_path / "cond.csv"
        formats.write_conditions({i: ("even" if n % 2 else "odd") for n, i in enumerate(ids)}, conditions_path)
        report = post_ok(
            client,
            "/evaluate",
            {
                "pred_path": str(fused_path),
                "labels_path": str(test_labels),
                "conditions_path": str(conditions_path),
                "out_path": str(tmp_path / "report.json"),
            },
        )
        # gate sends class-0 items to the wrong external label; the rest are right
        assert report["branch_usage"]["external"] == pytest.approx(4 / 6)
        assert report["mean_accuracy"] == pytest.approx(
            np.mean([v["accuracy"] for v in report["per_condition"].values()])
        )
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved["n_items"] == 6

    def test_synth_endpoint(self, client, tmp_path):
        spec = {
            "height": 2,
            "width": 2,
            "parts": 3,
            "seed": 1,
            "classes": [{"modes": [[[0.9, 0.05, 0.05]] * 4]}],
            "background": [0.3, 0.3, 0.3],
            "draws": [{"class": 0, "n": 4}],
        }
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        body = post_ok(
            client,
            "/synth",
            {
                "spec_path": str(spec_path),
                "out_path": str(tmp_path / "maps.bmap"),
                "labels_out": str(tmp_path / "labels.csv"),
            },
        )
        assert body["maps"] == 4
        assert len(formats.read_detection_maps(tmp_path / "maps.bmap")) == 4
        labeled = formats.read_labels(tmp_path / "labels.csv")
        assert len(labeled) == 4


class TestErrorMapping:
    def test_missing_file_is_404(self, client, tmp_path):
        response = client.post(
            "/encode",
            json={
                "features_path": str(tmp_path / "absent.fmap"),
                "model_path": str(tmp_path / "absent.json"),
                "out_path": str(tmp_path / "out.bmap"),
            },
        )
        assert response.status_code == 404

    def test_domain_error_is_400(self, client, tmp_path):
        bad = tmp_path / "bad.fmap"
        bad.write_bytes(b"NOPE" + bytes(20))
        model = tmp_path / "bad.json"
        model.write_text("{}")
        response = client.post(
            "/encode",
            json={
                "features_path": str(bad),
                "model_path": str(model),
                "out_path": str(tmp_path / "out.bmap"),
            },
        )
        assert response.status_code == 400
        assert "detail" in response.json()

    def test_parameter_validation_is_422(self, client):
        response = client.post(
            "/classify",
            json={
                "features_path": "x",
                "model_path": "y",
                "prior": 1.7,
            },
        )
        assert response.status_code == 422
