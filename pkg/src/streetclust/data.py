"""Dataset records, manifest IO, synthetic city generation and augmentation.

The synthetic city stands in for a real street-level capture: sample
points sit on a jittered grid, contiguous zones determine the ground
truth category, and each sample renders to a small procedural image whose
dominant texture/palette encodes its category. A configurable fraction of
images gets a large occluding shape drawn in *another* category's style,
mimicking the dynamic clutter (vehicles, construction, ...) that makes
single-image clustering unreliable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .geo import GeoPoint, ProjectedPoint, project, unproject


def derive_seed(*parts) -> int:
    """Stable 128-bit seed from arbitrary hashable parts.

    Used to key every random stream in the pipeline, so results never
    depend on execution order or worker scheduling.
    """
    digest = hashlib.sha256(repr(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def derive_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


@dataclass(frozen=True)
class GeoImageRecord:
    """One geotagged image sample."""

    id: str
    image_ref: str
    geo: GeoPoint
    proj: ProjectedPoint
    truth_label: str | None = None


# ------------------------------------------------------------------ manifest


def load_manifest(path) -> list[GeoImageRecord]:
    """Read a JSON Lines manifest into records with projected coordinates.

    Each line holds {"id", "image_path", "lon", "lat"} and optionally
    "label". Any malformed line fails with its line number; duplicate ids
    are rejected.
    """
    path = Path(path)
    records: list[GeoImageRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ValueError(f"{path}: line {lineno}: expected a JSON object")
            for key in ("id", "image_path", "lon", "lat"):
                if key not in obj:
                    raise ValueError(f"{path}: line {lineno}: missing field {key!r}")
            rid = str(obj["id"])
            if rid in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate id {rid!r}")
            seen.add(rid)
            try:
                geo = GeoPoint(float(obj["lon"]), float(obj["lat"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            label = obj.get("label")
            records.append(
                GeoImageRecord(
                    id=rid,
                    image_ref=str(obj["image_path"]),
                    geo=geo,
                    proj=project(geo),
                    truth_label=None if label is None else str(label),
                )
            )
    return records


def save_manifest(records: list[GeoImageRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "id": rec.id,
                "image_path": rec.image_ref,
                "lon": rec.geo.lon,
                "lat": rec.geo.lat,
            }
            if rec.truth_label is not None:
                obj["label"] = rec.truth_label
            fh.write(json.dumps(obj) + "\n")


def manifest_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_images(records: list[GeoImageRecord], root) -> np.ndarray:
    """Decode every record's image into one float32 array in [0, 1]."""
    root = Path(root)
    images = []
    for rec in records:
        with Image.open(root / rec.image_ref) as img:
            images.append(np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0)
    return np.stack(images)


# ------------------------------------------------------------ synthetic city


@dataclass
class SyntheticCitySpec:
    """Parameters of the procedural benchmark city."""

    extent: float = 3000.0
    n_zones: int = 5
    n_categories: int = 5
    image_size: int = 32
    samples_per_zone: int = 400
    distractor_prob: float = 0.4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_zones < 1:
            raise ValueError("need at least one zone")
        if not 1 <= self.n_categories <= self.n_zones:
            raise ValueError("need 1 <= n_categories <= n_zones")
        if not 0.0 <= self.distractor_prob <= 1.0:
            raise ValueError("distractor_prob must lie in [0, 1]")
        if self.extent <= 0 or self.image_size < 8 or self.samples_per_zone < 1:
            raise ValueError("invalid extent/image_size/samples_per_zone")

    def zone_category(self, zone: int) -> int:
        return zone % self.n_categories

    def category_name(self, category: int) -> str:
        return f"c{category}"


def _place_zone_seeds(spec: SyntheticCitySpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform zone seeds with a minimum pairwise separation (relaxed if needed)."""
    min_sep = 0.45 * spec.extent / math.sqrt(spec.n_zones)
    while True:
        seeds: list[np.ndarray] = []
        for _ in range(20_000):
            cand = rng.uniform(0.0, spec.extent, size=2)
            if all(np.hypot(*(cand - s)) >= min_sep for s in seeds):
                seeds.append(cand)
                if len(seeds) == spec.n_zones:
                    return np.array(seeds)
        min_sep *= 0.7


def generate_city(spec: SyntheticCitySpec, zone_seeds=None) -> list[GeoImageRecord]:
    """Lay out sample points and truth labels for a synthetic city.

    Zone seeds partition the extent by the nearest-seed rule; candidate
    points come from a jittered grid, and each zone keeps exactly
    ``samples_per_zone`` members (nearest the zone seed first, topping up
    with in-zone rejection samples when the grid undersupplies a zone).
    Local (x, y) meters map onto EPSG:3857 centered at lon/lat (0, 0), so
    planar distances are true meters up to Mercator distortion.

    ``zone_seeds`` overrides the random seed placement with an explicit
    n_zones x 2 array of local coordinates.
    """
    rng = derive_rng("city", spec.seed)
    if zone_seeds is None:
        seeds = _place_zone_seeds(spec, rng)
    else:
        seeds = np.asarray(zone_seeds, dtype=np.float64)
        if seeds.shape != (spec.n_zones, 2):
            raise ValueError("zone_seeds must be n_zones x 2")

    total = spec.n_zones * spec.samples_per_zone
    grid_n = math.ceil(math.sqrt(total * 1.6))
    step = spec.extent / grid_n
    centers = (np.arange(grid_n) + 0.5) * step
    gx, gy = np.meshgrid(centers, centers)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    pts = pts + rng.uniform(-0.35 * step, 0.35 * step, size=pts.shape)

    def nearest_zone(p: np.ndarray) -> np.ndarray:
        d = np.hypot(p[:, None, 0] - seeds[None, :, 0], p[:, None, 1] - seeds[None, :, 1])
        return d.argmin(axis=1)

    zone_of = nearest_zone(pts)
    chosen: list[tuple[float, float, int]] = []
    for z in range(spec.n_zones):
        members = pts[zone_of == z]
        dist = np.hypot(members[:, 0] - seeds[z, 0], members[:, 1] - seeds[z, 1])
        order = np.argsort(dist, kind="stable")
        members = members[order][: spec.samples_per_zone]
        need = spec.samples_per_zone - len(members)
        extra: list[np.ndarray] = []
        attempts = 0
        while need > 0:
            attempts += 1
            if attempts > 1000:
                raise RuntimeError(f"could not fill zone {z}; zone region too small")
            batch = rng.uniform(0.0, spec.extent, size=(max(64, 4 * need), 2))
            batch = batch[nearest_zone(batch) == z][:need]
            extra.extend(batch)
            need = spec.samples_per_zone - len(members) - len(extra)
        rows = list(members) + extra
        chosen.extend((float(x), float(y), z) for x, y in rows)

    # Row-major output order keeps the manifest stable and readable.
    chosen.sort(key=lambda t: (t[1], t[0]))

    half = spec.extent / 2.0
    records = []
    for i, (x, y, z) in enumerate(chosen):
        rid = f"svi_{i:05d}"
        geo = unproject(ProjectedPoint(x - half, y - half))
        records.append(
            GeoImageRecord(
                id=rid,
                image_ref=f"images/{rid}.png",
                geo=geo,
                proj=project(geo),
                truth_label=spec.category_name(spec.zone_category(z)),
            )
        )
    return records


# ------------------------------------------------------------------ imagery

_PATTERNS = ("h_stripes", "v_stripes", "checker", "diag_stripes", "dots")


def _category_palette(category: int, n_categories: int) -> tuple[np.ndarray, np.ndarray]:
    """Two well-separated RGB colors (background, foreground) per category."""
    hue = (category / max(n_categories, 1)) % 1.0
    back = _hsv_to_rgb(np.array([[[hue, 0.55, 0.90]]], dtype=np.float32))[0, 0]
    fore = _hsv_to_rgb(np.array([[[hue, 0.90, 0.45]]], dtype=np.float32))[0, 0]
    return back, fore


def _texture(category: int, n_categories: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Category-specific striped/checkered texture with random phase."""
    back, fore = _category_palette(category, n_categories)
    pattern = _PATTERNS[category % len(_PATTERNS)]
    period = 4 + category % 5 + int(rng.integers(0, 2))
    phase_x = float(rng.uniform(0, period))
    phase_y = float(rng.uniform(0, period))
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    if pattern == "h_stripes":
        mask = ((yy + phase_y) // (period / 2)) % 2 == 0
    elif pattern == "v_stripes":
        mask = ((xx + phase_x) // (period / 2)) % 2 == 0
    elif pattern == "checker":
        mask = (((yy + phase_y) // period) + ((xx + phase_x) // period)) % 2 == 0
    elif pattern == "diag_stripes":
        mask = ((xx + yy + phase_x) // (period / 2)) % 2 == 0
    else:  # dots
        cy = (yy + phase_y) % period - period / 2
        cx = (xx + phase_x) % period - period / 2
        mask = cy**2 + cx**2 <= (period / 3.2) ** 2
    img = np.where(mask[..., None], fore[None, None, :], back[None, None, :])
    return img.astype(np.float32)


def _stamp_shape(
    img: np.ndarray, patch: np.ndarray, rng: np.random.Generator, frac: float
) -> tuple[np.ndarray, float]:
    """Composite ``patch`` over ``img`` through a disk or box covering ~frac of the area."""
    size = img.shape[0]
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
    if rng.uniform() < 0.5:
        radius = math.sqrt(frac * size * size / math.pi)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    else:
        half_h = math.sqrt(frac) * size / 2 * rng.uniform(0.8, 1.25)
        half_w = frac * size * size / 4 / half_h
        mask = (np.abs(yy - cy) <= half_h) & (np.abs(xx - cx) <= half_w)
    out = np.where(mask[..., None], patch, img)
    return out, float(mask.mean())


def render_image(
    category: int,
    n_categories: int,
    seed: int,
    distractor_prob: float,
    size: int = 32,
    return_info: bool = False,
):
    """Render one synthetic sample as a uint8 H x W x 3 image.

    The base texture encodes the category; a couple of small shapes add
    per-image variation. With probability ``distractor_prob`` a large
    occluder drawn in a *different* category's texture is stamped on top.
    """
    if not 0 <= category < n_categories:
        raise ValueError(f"category {category} outside [0, {n_categories})")
    rng = np.random.default_rng(seed)
    img = _texture(category, n_categories, size, rng)

    back, fore = _category_palette(category, n_categories)
    for _ in range(int(rng.integers(2, 5))):
        shade = np.clip(back * rng.uniform(0.55, 1.3), 0.0, 1.0).astype(np.float32)
        img, _ = _stamp_shape(img, np.broadcast_to(shade, img.shape), rng, frac=float(rng.uniform(0.01, 0.04)))

    info = {"distractor": False, "occluder_category": None, "occluder_fraction": 0.0}
    if n_categories > 1 and rng.uniform() < distractor_prob:
        other = int(rng.choice([c for c in range(n_categories) if c != category]))
        occluder = _texture(other, n_categories, size, rng)
        img, covered = _stamp_shape(img, occluder, rng, frac=float(rng.uniform(0.45, 0.70)))
        info = {"distractor": True, "occluder_category": other, "occluder_fraction": covered}

    img = img + rng.normal(0.0, 0.015, size=img.shape).astype(np.float32)
    out = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if return_info:
        return out, info
    return out


def render_city_images(spec: SyntheticCitySpec, records: list[GeoImageRecord]) -> np.ndarray:
    """All record images as one float32 array in [0, 1], no disk round trip."""
    categories = {spec.category_name(c): c for c in range(spec.n_categories)}
    out = np.empty((len(records), spec.image_size, spec.image_size, 3), dtype=np.float32)
    for i, rec in enumerate(records):
        img = render_image(
            categories[rec.truth_label],
            spec.n_categories,
            derive_seed("image", spec.seed, rec.id),
            spec.distractor_prob,
            spec.image_size,
        )
        out[i] = img.astype(np.float32) / 255.0
    return out


def materialize_city(spec: SyntheticCitySpec, out_dir) -> list[GeoImageRecord]:
    """Generate a city and write its manifest plus PNG images under out_dir."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    records = generate_city(spec)
    categories = {spec.category_name(c): c for c in range(spec.n_categories)}
    for rec in records:
        img = render_image(
            categories[rec.truth_label],
            spec.n_categories,
            derive_seed("image", spec.seed, rec.id),
            spec.distractor_prob,
            spec.image_size,
        )
        Image.fromarray(img).save(out_dir / rec.image_ref)
    save_manifest(records, out_dir / "manifest.jsonl")
    return records


# -------------------------------------------------------------- augmentation


@dataclass
class AugmentationPolicy:
    """Stochastic view transform; every draw comes from one keyed stream."""

    crop_scale: tuple[float, float] = (0.2, 1.0)
    crop_ratio: tuple[float, float] = (0.75, 4.0 / 3.0)
    jitter_prob: float = 0.8
    jitter_strength: float = 0.4
    hue_strength: float = 0.1
    grayscale_prob: float = 0.2
    flip_prob: float = 0.5
    blur_prob: float = 0.5
    blur_sigma: tuple[float, float] = (0.1, 2.0)

    @classmethod
    def identity(cls) -> "AugmentationPolicy":
        return cls(
            crop_scale=(1.0, 1.0),
            crop_ratio=(1.0, 1.0),
            jitter_prob=0.0,
            grayscale_prob=0.0,
            flip_prob=0.0,
            blur_prob=0.0,
        )


def augment(image: np.ndarray, policy: AugmentationPolicy, seed_parts: tuple) -> np.ndarray:
    """Apply the stochastic view pipeline to one float image in [0, 1].

    Order: resized crop, color jitter, grayscale, horizontal flip,
    Gaussian blur. Identical ``seed_parts`` give bitwise-identical output
    regardless of where or when the call runs.
    """
    rng = derive_rng("augment", *seed_parts)
    img = np.asarray(image, dtype=np.float32)
    h, w = img.shape[:2]

    img = _random_resized_crop(img, policy, rng)

    if policy.jitter_prob > 0 and rng.uniform() < policy.jitter_prob:
        img = _color_jitter(img, policy, rng)
    if policy.grayscale_prob > 0 and rng.uniform() < policy.grayscale_prob:
        img = np.repeat(_luma(img)[..., None], 3, axis=2)
    if policy.flip_prob > 0 and rng.uniform() < policy.flip_prob:
        img = img[:, ::-1, :]
    if policy.blur_prob > 0 and rng.uniform() < policy.blur_prob:
        sigma = float(rng.uniform(*policy.blur_sigma))
        img = gaussian_filter(img, sigma=(sigma, sigma, 0.0), mode="nearest")

    out = np.clip(img, 0.0, 1.0).astype(np.float32)
    assert out.shape == (h, w, image.shape[2])
    return np.ascontiguousarray(out)


def _random_resized_crop(img: np.ndarray, policy: AugmentationPolicy, rng: np.random.Generator) -> np.ndarray:
    h, w = img.shape[:2]
    area = h * w
    crop_h, crop_w = h, w
    for _ in range(10):
        scale = rng.uniform(*policy.crop_scale)
        log_ratio = rng.uniform(math.log(policy.crop_ratio[0]), math.log(policy.crop_ratio[1]))
        ratio = math.exp(log_ratio)
        cand_w = int(round(math.sqrt(area * scale * ratio)))
        cand_h = int(round(math.sqrt(area * scale / ratio)))
        if 0 < cand_w <= w and 0 < cand_h <= h:
            crop_h, crop_w = cand_h, cand_w
            break
    top = int(rng.integers(0, h - crop_h + 1))
    left = int(rng.integers(0, w - crop_w + 1))
    crop = img[top : top + crop_h, left : left + crop_w]
    return _resize_bilinear(crop, h, w)


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img
    ys = (np.arange(out_h, dtype=np.float32) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float32) + 0.5) * (w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0).astype(np.float32)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0).astype(np.float32)[None, :, None]
    row0 = img[y0][:, x0] * (1.0 - wx) + img[y0][:, x1] * wx
    row1 = img[y1][:, x0] * (1.0 - wx) + img[y1][:, x1] * wx
    return row0 * (1.0 - wy) + row1 * wy


def _luma(img: np.ndarray) -> np.ndarray:
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


_RGB_TO_YIQ = np.array(
    [[0.299, 0.587, 0.114], [0.596, -0.274, -0.322], [0.211, -0.523, 0.312]],
    dtype=np.float32,
)
_YIQ_TO_RGB = np.array(
    [[1.0, 0.956, 0.621], [1.0, -0.272, -0.647], [1.0, -1.106, 1.703]],
    dtype=np.float32,
)


def _hue_rotation_matrix(shift: float) -> np.ndarray:
    # Hue jitter as a chroma-plane rotation in YIQ: one 3x3 matrix.
    theta = 2.0 * math.pi * shift
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]], dtype=np.float32)
    return _YIQ_TO_RGB @ rot @ _RGB_TO_YIQ


def _color_jitter(img: np.ndarray, policy: AugmentationPolicy, rng: np.random.Generator) -> np.ndarray:
    s = policy.jitter_strength
    brightness, contrast, saturation = rng.uniform(max(0.0, 1.0 - s), 1.0 + s, size=3)
    img = img * brightness
    gray_mean = _luma(img).mean()
    img = (img - gray_mean) * contrast + gray_mean
    gray = _luma(img)[..., None]
    img = gray + (img - gray) * saturation
    if policy.hue_strength > 0:
        shift = rng.uniform(-policy.hue_strength, policy.hue_strength)
        img = img @ _hue_rotation_matrix(float(shift)).T
    return np.clip(img, 0.0, 1.0)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6
    choices = np.stack(
        [
            np.stack([v, t, p], axis=-1),
            np.stack([q, v, p], axis=-1),
            np.stack([p, v, t], axis=-1),
            np.stack([p, q, v], axis=-1),
            np.stack([t, p, v], axis=-1),
            np.stack([v, p, q], axis=-1),
        ],
        axis=0,
    )
    return np.take_along_axis(choices, i[None, ..., None].repeat(3, -1), axis=0)[0].astype(np.float32)
