"""HTTP service for cluster review and map regeneration.

Serves cluster summaries, ranked representative images and the current
grid map; accepts label-map submissions and atomically regenerates the
map under a lock. The label map persists to the working directory, so
restarts pick up the latest reviewed state.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from .data import load_images, load_manifest
from .mapping import GridSpec, LabelMap, apply_label_map, build_grid_map, grid_to_geojson, representatives
from .model import load_checkpoint
from .train import AssignmentMatrix, predict


class ReviewState:
    """Mutable service state: assignments are fixed, the label map evolves."""

    def __init__(self, records, assign: AssignmentMatrix, workdir: Path, cell_size: float):
        self.records = records
        self.assign = assign
        self.workdir = workdir
        self.cell_size = cell_size
        self.lock = threading.Lock()
        self.labelmap: LabelMap | None = None
        self.labelmap_version = 0
        self.geojson: dict | None = None
        existing = workdir / "labelmap.json"
        if existing.exists():
            self.set_labelmap(LabelMap.load(existing))

    def set_labelmap(self, labelmap: LabelMap) -> None:
        labelmap.validate_total(self.assign.probs.shape[1])
        categories, cat_probs = apply_label_map(self.assign, labelmap)
        spec = GridSpec.covering(self.records, self.cell_size)
        grid = build_grid_map(self.records, cat_probs, categories, spec)
        doc = grid_to_geojson(grid)
        with self.lock:
            self.labelmap = labelmap
            self.geojson = doc
            self.labelmap_version += 1
            labelmap.save(self.workdir / "labelmap.json")


def create_app(
    checkpoint_dir,
    manifest_path,
    workdir,
    cell_size: float = 100.0,
    default_top_n: int = 12,
    ui_dir=None,
) -> FastAPI:
    """Build the app; ``ui_dir`` optionally mounts the built web UI at /."""
    manifest_path = Path(manifest_path)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)

    records = load_manifest(manifest_path)
    if not records:
        raise ValueError("manifest holds no records")
    model, metadata = load_checkpoint(checkpoint_dir)
    images = load_images(records, manifest_path.parent)
    assign = predict(model, records, images)
    state = ReviewState(records, assign, workdir, cell_size)
    image_root = manifest_path.parent
    record_by_id = {r.id: r for r in records}

    app = FastAPI(title="streetclust review service")
    app.state.review = state

    @app.get("/api/status")
    def status():
        return {
            "checkpoint": str(Path(checkpoint_dir)),
            "m": int(assign.probs.shape[1]),
            "labelmap_version": state.labelmap_version,
        }

    @app.get("/api/clusters")
    def clusters():
        labels = assign.labels
        out = []
        for cluster in range(assign.probs.shape[1]):
            out.append(
                {
                    "cluster_id": cluster,
                    "size": int((labels == cluster).sum()),
                    "top_confidence": float(assign.probs[:, cluster].max()),
                }
            )
        return out

    @app.get("/api/representatives/{cluster_id}")
    def cluster_representatives(cluster_id: int, n: int = default_top_n):
        if not 0 <= cluster_id < assign.probs.shape[1]:
            raise HTTPException(status_code=404, detail=f"no cluster {cluster_id}")
        if n < 1:
            raise HTTPException(status_code=400, detail="n must be >= 1")
        ranked = representatives(assign, top_n=n)[cluster_id]
        return [
            {
                "record_id": rid,
                "confidence": conf,
                "image_url": f"/api/images/{rid}",
            }
            for rid, conf in ranked
        ]

    @app.get("/api/images/{record_id}")
    def image(record_id: str):
        rec = record_by_id.get(record_id)
        if rec is None:
            raise HTTPException(status_code=404, detail=f"no record {record_id}")
        path = image_root / rec.image_ref
        if not path.exists():
            raise HTTPException(status_code=404, detail="image file missing")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.post("/api/labelmap", status_code=204)
    async def post_labelmap(request: Request):
        try:
            payload = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be JSON") from None
        try:
            labelmap = LabelMap.from_dict(payload)
            state.set_labelmap(labelmap)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return Response(status_code=204)

    @app.get("/api/map.geojson")
    def map_geojson():
        with state.lock:
            doc = state.geojson
        if doc is None:
            raise HTTPException(status_code=404, detail="no label map submitted yet")
        return doc

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        ui_dir = Path(ui_dir)
        if not (ui_dir / "index.html").exists():
            raise ValueError(f"{ui_dir} does not look like a built UI (no index.html)")
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
