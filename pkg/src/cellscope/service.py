"""Read-only HTTP API serving explanations, top-K lists and the latent map.

The session state (encoded dataset, reconstructions, latent index, 2-D
map) is derived once from a checkpoint + CSV pair in a background thread;
endpoints answer 503 until it is ready and never mutate anything
afterwards, so request handling needs no locking.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from . import metrics, models
from .explain import (
    LatentIndex,
    LatentMap,
    build_latent_index,
    explain,
    latent_map,
    top_k,
)
from .errors import SchemaMismatchError
from .schema import RawTable, encode

EXPLAIN_CACHE_SIZE = 1024


@dataclass
class SessionState:
    model: models.TrainedModel
    table: RawTable
    encoded: np.ndarray
    scores: np.ndarray
    index: LatentIndex
    latent_map: LatentMap | None


def build_session(model: models.TrainedModel, table: RawTable) -> SessionState:
    if table.names != model.schema.names:
        raise SchemaMismatchError(
            f"data columns {table.names} do not match checkpoint schema {model.schema.names}"
        )
    encoded = encode(table, model.schema)
    scores = metrics.cell_scores(model, encoded).sum(axis=1)
    if model.is_network:
        index = build_latent_index(model, encoded)
        lmap = latent_map(model, encoded)
    else:
        index = LatentIndex(latents=np.zeros((table.n_rows, 1)))
        lmap = None
    return SessionState(
        model=model, table=table, encoded=encoded, scores=scores, index=index, latent_map=lmap
    )


def create_app(
    model: models.TrainedModel,
    table: RawTable,
    defer_build: bool = True,
    frontend_dir: str | None = None,
) -> FastAPI:
    """Assemble the API; with ``defer_build`` the session is built in a
    background thread and endpoints return 503 until it is ready.
    ``frontend_dir`` optionally mounts the built dashboard at /."""
    app = FastAPI(title="cellscope", version="0.1.0")
    holder: dict = {"state": None, "error": None}

    def _build():
        try:
            holder["state"] = build_session(model, table)
        except Exception as exc:  # surfaced as 409/500 by _state()
            holder["error"] = exc

    if defer_build:
        thread = threading.Thread(target=_build, daemon=True)
        app.state.build_thread = thread
        thread.start()
    else:
        _build()

    def _state() -> SessionState:
        if holder["error"] is not None:
            if isinstance(holder["error"], SchemaMismatchError):
                raise HTTPException(status_code=409, detail=str(holder["error"]))
            raise HTTPException(status_code=500, detail=str(holder["error"]))
        if holder["state"] is None:
            raise HTTPException(status_code=503, detail="index build in progress")
        return holder["state"]

    @lru_cache(maxsize=EXPLAIN_CACHE_SIZE)
    def _explanation(row: int) -> dict:
        state = _state()
        exp = explain(
            state.model, state.table.row(row), state.index, row_id=row
        )
        doc = exp.to_dict(state.model.schema)
        if state.latent_map is not None:
            xy = state.latent_map.project(exp.latent)[0]
            doc["latent_xy"] = [float(xy[0]), float(xy[1])]
        return doc

    @app.get("/meta")
    def meta():
        state = _state()
        return {
            "schema": state.model.schema.to_dict(),
            "model_kind": state.model.kind.value,
            "provenance": _json_safe(state.model.provenance),
            "n_rows": state.table.n_rows,
        }

    @app.get("/anomalies")
    def anomalies(k: int = 20):
        state = _state()
        if k < 0:
            raise HTTPException(status_code=422, detail="k must be >= 0")
        top = top_k(state.scores, min(k, state.table.n_rows))
        return {
            "k": int(k),
            "rows": [
                {"row": int(i), "score": float(state.scores[i])} for i in top
            ],
        }

    @app.get("/explain/{row}")
    def explain_row(row: int):
        state = _state()
        if not 0 <= row < state.table.n_rows:
            raise HTTPException(status_code=404, detail=f"row {row} out of range")
        if not state.model.is_network:
            raise HTTPException(
                status_code=409, detail="explanations require a network model checkpoint"
            )
        return JSONResponse(_explanation(row))

    @app.get("/latent")
    def latent():
        state = _state()
        if state.latent_map is None:
            raise HTTPException(
                status_code=409, detail="latent map requires a network model checkpoint"
            )
        coords = state.latent_map.coordinates
        return {
            "points": [
                {
                    "row": i,
                    "x": float(coords[i, 0]),
                    "y": float(coords[i, 1]),
                    "score": float(state.scores[i]),
                }
                for i in range(coords.shape[0])
            ]
        }

    @app.get("/rows/{row}")
    def get_row(row: int):
        state = _state()
        if not 0 <= row < state.table.n_rows:
            raise HTTPException(status_code=404, detail=f"row {row} out of range")
        values = {
            name: _json_safe(value)
            for name, value in zip(state.table.names, state.table.row(row))
        }
        return {"row": row, "values": values, "score": float(state.scores[row])}

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="dashboard")

    return app


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def serve(
    model: models.TrainedModel,
    table: RawTable,
    host: str,
    port: int,
    frontend_dir: str | None = None,
) -> None:
    import uvicorn

    app = create_app(model, table, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
