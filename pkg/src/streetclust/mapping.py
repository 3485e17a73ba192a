"""Cluster review and map products: representatives, label maps, grid maps.

After (over-)clustering, a reviewer maps cluster ids onto named
categories (many-to-one). Applying that map converts per-record cluster
probabilities into category probabilities, which are then accumulated on
a regular grid; each occupied cell takes the category with the highest
cumulative probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .train import AssignmentMatrix

_HEX_DEFAULTS = (
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231",
    "#911eb4", "#46f0f0", "#f032e6", "#bcf60c", "#fabebe",
)


@dataclass
class LabelMap:
    """Total many-to-one map from cluster ids to category names."""

    assignments: dict[int, str]
    palette: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.assignments:
            raise ValueError("label map must assign at least one cluster")
        for i, name in enumerate(self.categories()):
            self.palette.setdefault(name, _HEX_DEFAULTS[i % len(_HEX_DEFAULTS)])

    def categories(self) -> list[str]:
        return sorted(set(self.assignments.values()))

    def validate_total(self, n_clusters: int) -> None:
        missing = [c for c in range(n_clusters) if c not in self.assignments]
        if missing:
            raise ValueError(f"label map misses cluster ids {missing}")

    def save(self, path) -> None:
        payload = {
            "assignments": {str(k): v for k, v in sorted(self.assignments.items())},
            "palette": dict(sorted(self.palette.items())),
        }
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LabelMap":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: dict) -> "LabelMap":
        if "assignments" not in payload or not isinstance(payload["assignments"], dict):
            raise ValueError("label map document needs an 'assignments' object")
        assignments = {int(k): str(v) for k, v in payload["assignments"].items()}
        palette = {str(k): str(v) for k, v in payload.get("palette", {}).items()}
        return cls(assignments, palette)


def representatives(assign: AssignmentMatrix, top_n: int) -> dict[int, list[tuple[str, float]]]:
    """Per cluster: the top_n records by that cluster's probability.

    Sorted descending, distance ties broken by ascending record id. A
    cluster nobody argmax-selects still reports its highest-probability
    records. top_n larger than the dataset returns the full ranking.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    ids = np.array(assign.record_ids)
    out: dict[int, list[tuple[str, float]]] = {}
    for cluster in range(assign.probs.shape[1]):
        col = assign.probs[:, cluster]
        order = np.lexsort((ids, -col))[:top_n]
        out[cluster] = [(str(ids[i]), float(col[i])) for i in order]
    return out


def apply_label_map(assign: AssignmentMatrix, label_map: LabelMap) -> tuple[list[str], np.ndarray]:
    """Sum cluster probabilities into category probabilities per record.

    Returns (categories, probs) where probs is N x C aligned with the
    sorted category names; per-record mass is conserved.
    """
    n_clusters = assign.probs.shape[1]
    label_map.validate_total(n_clusters)
    categories = label_map.categories()
    cat_index = {name: i for i, name in enumerate(categories)}
    out = np.zeros((assign.probs.shape[0], len(categories)), dtype=np.float64)
    for cluster in range(n_clusters):
        out[:, cat_index[label_map.assignments[cluster]]] += assign.probs[:, cluster]
    return categories, out


@dataclass(frozen=True)
class GridSpec:
    """Regular grid in projected meters; origin snapped to the cell size."""

    origin_x: float
    origin_y: float
    cell_size: float
    cols: int
    rows: int

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid must have at least one cell")

    @classmethod
    def covering(cls, records, cell_size: float = 100.0) -> "GridSpec":
        xs = [r.proj.x for r in records]
        ys = [r.proj.y for r in records]
        if not xs:
            raise ValueError("cannot size a grid for zero records")
        origin_x = math.floor(min(xs) / cell_size) * cell_size
        origin_y = math.floor(min(ys) / cell_size) * cell_size
        cols = int(math.floor((max(xs) - origin_x) / cell_size)) + 1
        rows = int(math.floor((max(ys) - origin_y) / cell_size)) + 1
        return cls(origin_x, origin_y, cell_size, cols, rows)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        col = math.floor((x - self.origin_x) / self.cell_size)
        row = math.floor((y - self.origin_y) / self.cell_size)
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            raise ValueError(f"point ({x}, {y}) falls outside the grid")
        return row, col


@dataclass
class GridMap:
    """Per-cell cumulative category probabilities and image counts."""

    spec: GridSpec
    categories: list[str]
    sums: np.ndarray  # rows x cols x C
    counts: np.ndarray  # rows x cols

    def cell_category(self, row: int, col: int) -> str | None:
        if self.counts[row, col] == 0:
            return None  # NODATA
        return self.categories[int(self.sums[row, col].argmax())]


def build_grid_map(records, category_probs: np.ndarray, categories: list[str], spec: GridSpec) -> GridMap:
    """Bin each record's category probability vector into its grid cell.

    Cells are half-open intervals [x, x+size) x [y, y+size), so boundary
    points bin uniquely; the result does not depend on record order.
    Argmax ties resolve to the lower category index.
    """
    if len(records) != len(category_probs):
        raise ValueError("records and probability rows are misaligned")
    sums = np.zeros((spec.rows, spec.cols, len(categories)), dtype=np.float64)
    counts = np.zeros((spec.rows, spec.cols), dtype=np.int64)
    for rec, probs in zip(records, category_probs):
        row, col = spec.cell_of(rec.proj.x, rec.proj.y)
        sums[row, col] += probs
        counts[row, col] += 1
    return GridMap(spec, list(categories), sums, counts)


def grid_to_geojson(grid: GridMap) -> dict:
    """Occupied cells as a FeatureCollection of EPSG:3857 polygons.

    Each feature carries {category, confidence, n_images}; NODATA cells
    are omitted. Confidence is the winning category's share of the cell's
    total accumulated probability.
    """
    features = []
    size = grid.spec.cell_size
    for row in range(grid.spec.rows):
        for col in range(grid.spec.cols):
            if grid.counts[row, col] == 0:
                continue
            x0 = grid.spec.origin_x + col * size
            y0 = grid.spec.origin_y + row * size
            cell = grid.sums[row, col]
            total = float(cell.sum())
            features.append(
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [
                            [
                                [x0, y0],
                                [x0 + size, y0],
                                [x0 + size, y0 + size],
                                [x0, y0 + size],
                                [x0, y0],
                            ]
                        ],
                    },
                    "properties": {
                        "category": grid.cell_category(row, col),
                        "confidence": float(cell.max() / total) if total > 0 else 0.0,
                        "n_images": int(grid.counts[row, col]),
                    },
                }
            )
    return {"type": "FeatureCollection", "features": features}


def render_grid_png(grid: GridMap, palette: dict[str, str], path, scale: int = 8) -> None:
    """Optional raster render of the grid with palette colors."""

    def hex_to_rgb(code: str) -> tuple[int, int, int]:
        code = code.lstrip("#")
        return tuple(int(code[i : i + 2], 16) for i in (0, 2, 4))

    img = np.zeros((grid.spec.rows, grid.spec.cols, 3), dtype=np.uint8)
    for row in range(grid.spec.rows):
        for col in range(grid.spec.cols):
            category = grid.cell_category(row, col)
            if category is not None:
                img[row, col] = hex_to_rgb(palette.get(category, "#808080"))
    img = np.kron(img[::-1], np.ones((scale, scale, 1), dtype=np.uint8))  # north up
    Image.fromarray(img).save(path)
