"""Hierarchical multi-view augmentation: deterministic raster transforms.

Each view is produced by applying exactly one transform to the original
image (transforms are never composed).  The default plan emits, in order:
center crops at 120/170/200 px, rotations at 45/90/180/270/315 degrees,
one color-jittered sample, and the horizontal reflection — ten views.

Crops, rotations and jitter are "natural" views; the reflection is the
"geometric" view.  Query images are never augmented.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from PIL import Image

from .exceptions import CropTooLargeError
from .model import LabeledEmbedding, Modality

TOY_DIM = 192  # 8 x 8 cells x 3 channels

VIEW_CROP = "crop"
VIEW_ROTATION = "rotation"
VIEW_JITTER = "jitter"
VIEW_REFLECTION = "reflection"

# ITU-R 601 luma weights, the common grayscale convention in vision toolkits.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class Raster:
    """8-bit RGB image, pixels stored row-major as a (h, w, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
            raise ValueError(f"pixels must be (h, w, 3) uint8, got {arr.shape} {arr.dtype}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must have positive dimensions")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


def load_raster(path) -> Raster:
    """Decode an image file (PNG for CLI-driven extraction) into a Raster."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return Raster(np.asarray(rgb, dtype=np.uint8))


def encode_png(img: Raster) -> bytes:
    """Encode a Raster as PNG bytes for transport to a provider."""
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


@dataclass(frozen=True)
class JitterSpec:
    """Color jitter magnitudes; factors are drawn uniformly around identity."""

    brightness: float = 0.5
    contrast: float = 0.5
    saturation: float = 0.5
    hue: float = 0.2

    def __post_init__(self):
        for name in ("brightness", "contrast", "saturation"):
            mag = getattr(self, name)
            if not 0.0 <= mag <= 1.0:
                raise ValueError(f"{name} magnitude must be in [0, 1]")
        if not 0.0 <= self.hue <= 0.5:
            raise ValueError("hue magnitude must be in [0, 0.5]")


@dataclass(frozen=True)
class ViewPlan:
    """The transform schedule applied to every support image."""

    crop_sizes: tuple[int, ...] = (120, 170, 200)
    rotation_degrees: tuple[float, ...] = (45.0, 90.0, 180.0, 270.0, 315.0)
    jitter: JitterSpec = field(default_factory=JitterSpec)
    jitter_samples: int = 1
    include_reflection: bool = True

    def __post_init__(self):
        object.__setattr__(self, "crop_sizes", tuple(int(s) for s in self.crop_sizes))
        object.__setattr__(
            self, "rotation_degrees", tuple(float(d) for d in self.rotation_degrees)
        )
        for size in self.crop_sizes:
            if size < 1:
                raise ValueError("crop sizes must be positive")
        for deg in self.rotation_degrees:
            if not 0.0 < deg < 360.0:
                raise ValueError("rotation degrees must lie in (0, 360)")
        if self.jitter_samples < 0:
            raise ValueError("jitter_samples must be non-negative")

    def n_views(self) -> int:
        return (
            len(self.crop_sizes)
            + len(self.rotation_degrees)
            + self.jitter_samples
            + (1 if self.include_reflection else 0)
        )


class View(NamedTuple):
    view_id: int
    kind: str
    raster: Raster


def modality_for_view(kind: str) -> Modality:
    if kind == VIEW_REFLECTION:
        return Modality.VISUAL_GEOMETRIC
    return Modality.VISUAL_NATURAL


# -- transforms --------------------------------------------------------------

def center_crop(img: Raster, size: int) -> Raster:
    """Square center crop; top-left source offset is (floor((w-s)/2), floor((h-s)/2))."""
    if size > min(img.width, img.height):
        raise CropTooLargeError(
            f"crop {size} exceeds image {img.width}x{img.height}"
        )
    if size < 1:
        raise ValueError("crop size must be positive")
    x0 = (img.width - size) // 2
    y0 = (img.height - size) // 2
    return Raster(img.pixels[y0 : y0 + size, x0 : x0 + size])


def rotate(img: Raster, degrees: float) -> Raster:
    """Counter-clockwise rotation about the image center.

    Multiples of 90 degrees are exact pixel permutations (dims swap for
    90/270).  Other angles keep the input dims, sample bilinearly and fill
    out-of-frame pixels with black.
    """
    degrees = float(degrees)
    if not 0.0 < degrees < 360.0:
        raise ValueError("degrees must lie in (0, 360)")
    if degrees % 90.0 == 0.0:
        return Raster(np.rot90(img.pixels, k=int(degrees // 90)))
    return Raster(_rotate_bilinear(img.pixels, degrees))


def _rotate_bilinear(pixels: np.ndarray, degrees: float) -> np.ndarray:
    h, w = pixels.shape[:2]
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0

    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx
    dy = ys - cy
    # Inverse map: rotate output coordinates back into the source frame.
    # In y-down image coordinates a visually counter-clockwise rotation by
    # theta sends source p to R(-theta) p, so sources are found at R(theta).
    src_x = cos_t * dx - sin_t * dy + cx
    src_y = sin_t * dx + cos_t * dy + cy

    inside = (src_x >= 0) & (src_x <= w - 1) & (src_y >= 0) & (src_y <= h - 1)
    x0 = np.clip(np.floor(src_x), 0, w - 1).astype(np.int64)
    y0 = np.clip(np.floor(src_y), 0, h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(src_x - x0, 0.0, 1.0)[..., None]
    fy = np.clip(src_y - y0, 0.0, 1.0)[..., None]

    img = pixels.astype(np.float64)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    out = top * (1 - fy) + bottom * fy
    out[~inside] = 0.0
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def horizontal_flip(img: Raster) -> Raster:
    """Mirror left-right; an exact pixel permutation and an involution."""
    return Raster(img.pixels[:, ::-1, :])


def color_jitter(img: Raster, jitter: JitterSpec, rng: np.random.Generator) -> Raster:
    """One stochastic photometric sample, applied brightness->contrast->saturation->hue.

    Factors are drawn uniformly: brightness/contrast/saturation in
    [1-mag, 1+mag], hue shift in [-mag, +mag] turns of the hue circle.
    Each stage clamps channels to [0, 255]; stages whose factor equals the
    identity are skipped, so zero magnitudes reproduce the input exactly.
    """
    b = float(rng.uniform(1.0 - jitter.brightness, 1.0 + jitter.brightness))
    c = float(rng.uniform(1.0 - jitter.contrast, 1.0 + jitter.contrast))
    s = float(rng.uniform(1.0 - jitter.saturation, 1.0 + jitter.saturation))
    h = float(rng.uniform(-jitter.hue, jitter.hue))

    arr = img.pixels.astype(np.float64)
    if b != 1.0:
        arr = np.clip(arr * b, 0.0, 255.0)
    if c != 1.0:
        mean = float((arr @ _LUMA).mean())
        arr = np.clip(mean + c * (arr - mean), 0.0, 255.0)
    if s != 1.0:
        gray = (arr @ _LUMA)[..., None]
        arr = np.clip(gray + s * (arr - gray), 0.0, 255.0)
    if h != 0.0:
        hsv = _rgb_to_hsv(arr / 255.0)
        hsv[..., 0] = (hsv[..., 0] + h) % 1.0
        arr = np.clip(_hsv_to_rgb(hsv) * 255.0, 0.0, 255.0)
    return Raster(np.clip(np.rint(arr), 0, 255).astype(np.uint8))


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta == 0.0, 1.0, delta)

    hue = np.zeros_like(maxc)
    hue = np.where(maxc == b, 4.0 + (r - g) / safe, hue)
    hue = np.where(maxc == g, 2.0 + (b - r) / safe, hue)
    hue = np.where(maxc == r, ((g - b) / safe) % 6.0, hue)
    hue = np.where(delta == 0.0, 0.0, hue) / 6.0

    sat = np.where(maxc == 0.0, 0.0, delta / np.where(maxc == 0.0, 1.0, maxc))
    return np.stack([hue, sat, maxc], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.int64) % 6

    r = np.select([i == 0, i == 1, i == 2, i == 3, i == 4, i == 5], [v, q, p, p, t, v])
    g = np.select([i == 0, i == 1, i == 2, i == 3, i == 4, i == 5], [t, v, v, q, p, p])
    b = np.select([i == 0, i == 1, i == 2, i == 3, i == 4, i == 5], [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


# -- view assembly -----------------------------------------------------------

def generate_views(
    img: Raster, plan: ViewPlan, rng: np.random.Generator
) -> list[View]:
    """All planned views of one image, in deterministic order.

    Emits one raster per crop size, one per rotation, ``jitter_samples``
    jittered rasters, then the reflection if enabled; view ids are assigned
    sequentially from 1 (0 is reserved for the raw image).  Each transform
    sees the original image, never another view's output.
    """
    views: list[View] = []
    next_id = 1
    for size in plan.crop_sizes:
        views.append(View(next_id, VIEW_CROP, center_crop(img, size)))
        next_id += 1
    for deg in plan.rotation_degrees:
        views.append(View(next_id, VIEW_ROTATION, rotate(img, deg)))
        next_id += 1
    for _ in range(plan.jitter_samples):
        views.append(View(next_id, VIEW_JITTER, color_jitter(img, plan.jitter, rng)))
        next_id += 1
    if plan.include_reflection:
        views.append(View(next_id, VIEW_REFLECTION, horizontal_flip(img)))
        next_id += 1
    return views


def embed_views(
    views: Sequence[View], encoder, *, class_id: int, item_id: int
) -> list[LabeledEmbedding]:
    """Encode views into labeled embeddings with the matching modality tags."""
    if not views:
        raise ValueError("views must be nonempty")
    vectors = encoder.encode_images([v.raster for v in views])
    if len(vectors) != len(views):
        raise ValueError("encoder returned a different number of vectors than views")
    return [
        LabeledEmbedding(
            class_id=class_id,
            item_id=item_id,
            view_id=view.view_id,
            modality=modality_for_view(view.kind),
            vector=vec,
        )
        for view, vec in zip(views, vectors)
    ]


# -- offline test-double encoder ---------------------------------------------

def _axis_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic overlap weights for exact area-average resampling."""
    weights = np.zeros((n_out, n_in))
    step = n_in / n_out
    for j in range(n_out):
        lo = j * step
        hi = (j + 1) * step
        for i in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            overlap = min(hi, i + 1) - max(lo, i)
            if overlap > 0:
                weights[j, i] = overlap / step
    return weights


def toy_encode(img: Raster, dim: int = TOY_DIM) -> np.ndarray:
    """Deterministic offline stand-in for a pretrained image encoder.

    Area-averages the image to 8x8x3, scales to [0, 1] and flattens
    (192 values), then zero-pads up to ``dim`` if a larger width is
    configured.  Identical images always map to identical vectors.
    """
    if dim < TOY_DIM:
        raise ValueError(f"toy encoder dim must be at least {TOY_DIM}")
    arr = img.pixels.astype(np.float64) / 255.0
    rows = _axis_weights(img.height, 8)
    cols = _axis_weights(img.width, 8)
    cells = np.stack([rows @ arr[:, :, c] @ cols.T for c in range(3)], axis=-1)
    flat = cells.ravel()
    if dim == TOY_DIM:
        return flat
    return np.concatenate([flat, np.zeros(dim - TOY_DIM)])


class ToyImageEncoder:
    """Batch interface over toy_encode; mirrors the provider client's shape."""

    def __init__(self, dim: int = TOY_DIM):
        self.dim = dim

    def encode_images(self, rasters: Sequence[Raster]) -> list[np.ndarray]:
        return [toy_encode(r, self.dim) for r in rasters]


class ProviderImageEncoder:
    """Adapter sending rasters to a live provider as PNG bytes."""

    def __init__(self, client):
        self._client = client

    def encode_images(self, rasters: Sequence[Raster]) -> list[np.ndarray]:
        return self._client.embed_images([encode_png(r) for r in rasters])
