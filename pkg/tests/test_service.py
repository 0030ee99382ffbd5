import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cellscope import TrainConfig
from cellscope.corrupt import CorruptionConfig, corrupt_table
from cellscope.models import fit_pca, train_dae
from cellscope.schema import encode, fit_encoder, infer_schema
from cellscope.service import create_app
from cellscope.synth import make_synthetic_table


@pytest.fixture(scope="module")
def served():
    table = make_synthetic_table(n_rows=400, seed=101)
    schema = fit_encoder(table, infer_schema(table))
    x = encode(table, schema)
    model = train_dae(
        x, schema, CorruptionConfig(seed=101), "plain",
        TrainConfig(max_epochs=60, batch_size=128, seed=101),
        widths=(25, 32, 8, 32, 25),
    )
    dirty = corrupt_table(table, schema, CorruptionConfig(row_fraction=0.05, seed=102))
    app = create_app(model, dirty.table)
    client = TestClient(app)
    deadline = time.time() + 30
    while time.time() < deadline:
        if client.get("/meta").status_code != 503:
            break
        time.sleep(0.05)
    return client, model, dirty


class TestEndpoints:
    def test_meta(self, served):
        client, model, dirty = served
        doc = client.get("/meta").json()
        assert doc["model_kind"] == "dae"
        assert doc["n_rows"] == dirty.table.n_rows
        assert [a["name"] for a in doc["schema"]["attributes"]] == dirty.table.names

    def test_anomalies_sorted_and_sized(self, served):
        client, _, _ = served
        doc = client.get("/anomalies", params={"k": 10}).json()
        rows = doc["rows"]
        assert len(rows) == 10
        scores = [r["score"] for r in rows]
        assert scores == sorted(scores, reverse=True)

    def test_anomalies_k_zero_empty(self, served):
        client, _, _ = served
        assert client.get("/anomalies", params={"k": 0}).json()["rows"] == []

    def test_explain_payload_contract(self, served):
        client, _, dirty = served
        row = int(np.nonzero(dirty.row_flags)[0][0])
        doc = client.get(f"/explain/{row}").json()
        assert doc["row"] == row
        assert len(doc["neighbors"]) == 5
        assert row not in doc["neighbors"]
        assert doc["row_score"] == pytest.approx(
            sum(c["confidence"] for c in doc["cells"]), abs=1e-9
        )
        assert all(0.0 <= c["confidence"] <= 1.0 for c in doc["cells"])
        assert len(doc["latent_xy"]) == 2

    def test_explain_clean_row_scores_low(self, served):
        client, _, dirty = served
        clean_row = int(np.nonzero(~dirty.row_flags)[0][0])
        corrupted_row = int(np.nonzero(dirty.row_flags)[0][0])
        clean = client.get(f"/explain/{clean_row}").json()["row_score"]
        dirty_score = client.get(f"/explain/{corrupted_row}").json()["row_score"]
        assert clean < dirty_score

    def test_explain_unknown_row_404(self, served):
        client, _, _ = served
        assert client.get("/explain/40000").status_code == 404

    def test_rows_endpoint(self, served):
        client, _, dirty = served
        doc = client.get("/rows/3").json()
        assert doc["row"] == 3
        assert set(doc["values"]) == set(dirty.table.names)
        assert client.get("/rows/40000").status_code == 404

    def test_latent_map_size(self, served):
        client, _, dirty = served
        points = client.get("/latent").json()["points"]
        assert len(points) == dirty.table.n_rows
        assert {"row", "x", "y", "score"} <= set(points[0])

    def test_top_anomalies_match_latent_scores(self, served):
        client, _, _ = served
        k = 5
        top = client.get("/anomalies", params={"k": k}).json()["rows"]
        points = {p["row"]: p["score"] for p in client.get("/latent").json()["points"]}
        for entry in top:
            assert points[entry["row"]] == pytest.approx(entry["score"], abs=1e-12)

    def test_service_is_read_only_and_stable(self, served):
        client, _, _ = served
        a = client.get("/explain/7").json()
        for _ in range(3):
            client.get("/anomalies", params={"k": 3})
            client.get("/latent")
        b = client.get("/explain/7").json()
        assert a == b


class TestNonNetworkCheckpoints:
    def test_pca_checkpoint_serves_scores_but_409_on_explain(self):
        table = make_synthetic_table(n_rows=120, seed=103)
        schema = fit_encoder(table, infer_schema(table))
        model = fit_pca(encode(table, schema), schema)
        client = TestClient(create_app(model, table, defer_build=False))
        assert client.get("/meta").json()["model_kind"] == "pca"
        assert client.get("/anomalies", params={"k": 3}).status_code == 200
        assert client.get("/explain/0").status_code == 409
        assert client.get("/latent").status_code == 409


class TestSchemaMismatch:
    def test_mismatched_data_answers_409(self):
        table = make_synthetic_table(n_rows=120, seed=104)
        schema = fit_encoder(table, infer_schema(table))
        model = fit_pca(encode(table, schema), schema)
        other = make_synthetic_table(n_rows=50, n_categorical=2, n_numeric=1, seed=9)
        client = TestClient(create_app(model, other, defer_build=False))
        assert client.get("/meta").status_code == 409


class TestDashboardMount:
    def test_static_frontend_served_without_shadowing_api(self, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>dash</body></html>")
        table = make_synthetic_table(n_rows=80, seed=105)
        schema = fit_encoder(table, infer_schema(table))
        model = fit_pca(encode(table, schema), schema)
        client = TestClient(
            create_app(model, table, defer_build=False, frontend_dir=str(tmp_path))
        )
        assert "dash" in client.get("/").text
        assert client.get("/meta").status_code == 200
