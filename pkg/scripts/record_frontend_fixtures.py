#!/usr/bin/env python3
"""Record dashboard fixtures from a real service instance.

Trains a small deterministic model on synthetic data, corrupts a slice,
spins the API up in-process and captures the JSON payloads the frontend
contract tests replay. Re-run after changing the API surface:

    python scripts/record_frontend_fixtures.py [frontend/fixtures]
"""

import json
import sys
import time
from pathlib import Path

from fastapi.testclient import TestClient

from cellscope import TrainConfig
from cellscope.corrupt import CorruptionConfig, corrupt_table
from cellscope.models import train_dae
from cellscope.schema import encode, fit_encoder, infer_schema
from cellscope.service import create_app
from cellscope.synth import make_synthetic_table


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("frontend/fixtures")
    out_dir.mkdir(parents=True, exist_ok=True)

    table = make_synthetic_table(n_rows=400, seed=7)
    schema = fit_encoder(table, infer_schema(table))
    model = train_dae(
        encode(table, schema), schema, CorruptionConfig(seed=7), "plain",
        TrainConfig(max_epochs=80, batch_size=128, seed=7),
        widths=(25, 32, 8, 32, 25),
    )
    dirty = corrupt_table(table, schema, CorruptionConfig(row_fraction=0.08, seed=8))
    client = TestClient(create_app(model, dirty.table))
    for _ in range(200):
        if client.get("/meta").status_code != 503:
            break
        time.sleep(0.05)

    def dump(name: str, payload) -> None:
        path = out_dir / name
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {path}")

    dump("meta.json", client.get("/meta").json())
    anomalies = client.get("/anomalies", params={"k": 10}).json()
    dump("anomalies.json", anomalies)
    dump("latent.json", client.get("/latent").json())

    top_row = anomalies["rows"][0]["row"]
    explanation = client.get(f"/explain/{top_row}").json()
    dump("explain.json", explanation)
    neighbor_rows = [client.get(f"/rows/{i}").json() for i in explanation["neighbors"]]
    dump("neighbor_rows.json", neighbor_rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
