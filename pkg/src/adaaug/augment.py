"""The 14-transform augmentation space with a continuous magnitude in [0,1].

Images are uint8 arrays shaped (C, H, W), C in {1, 3}, in pixel space
(augmentation happens before normalization). Every transform is a pure
function of (op, direction, m, image): m=0 returns the input bit-exactly,
m=1 applies the op at its maximum strength. Geometric ops resample
bilinearly with zero (black) fill; enhancement ops interpolate away from a
degenerate image with factor 1 + 0.9*m; auto-contrast and equalize compute
the full transform and convex-blend it in with weight m.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError

MAX_ROTATE_DEG = 30.0
MAX_TRANSLATE_PX = 10
MAX_SHEAR = 0.3
MAX_ENHANCE = 1.9
SOLARIZE_SPAN = 256.0
MAX_POSTERIZE_BITS = 4

# ITU-R 601 luma weights, used for the gray degenerates of color/contrast.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class AugmentOp:
    kind: str
    s_max: float | None
    symmetric: bool


OPS = (
    AugmentOp("identity", None, False),
    AugmentOp("auto-contrast", None, False),
    AugmentOp("equalize", None, False),
    AugmentOp("color", MAX_ENHANCE, False),
    AugmentOp("contrast", MAX_ENHANCE, False),
    AugmentOp("brightness", MAX_ENHANCE, False),
    AugmentOp("sharpness", MAX_ENHANCE, False),
    AugmentOp("rotation", MAX_ROTATE_DEG, True),
    AugmentOp("translate-x", float(MAX_TRANSLATE_PX), True),
    AugmentOp("translate-y", float(MAX_TRANSLATE_PX), True),
    AugmentOp("shear-x", MAX_SHEAR, True),
    AugmentOp("shear-y", MAX_SHEAR, True),
    AugmentOp("solarize", SOLARIZE_SPAN, False),
    AugmentOp("posterize", float(MAX_POSTERIZE_BITS), False),
)

_BY_KIND = {op.kind: op for op in OPS}


def op_by_kind(kind: str) -> AugmentOp:
    try:
        return _BY_KIND[kind]
    except KeyError:
        raise ContractError(f"unknown augmentation kind {kind!r}") from None


def sample_operation(rng) -> tuple[AugmentOp, int]:
    """Draw (op, direction) uniformly; one such pair serves a whole batch.

    The direction draw always happens so the rng stream advances at a fixed
    rate per call; non-symmetric ops simply ignore it.
    """
    op = OPS[int(rng.integers(0, len(OPS)))]
    direction = 1 if rng.random() < 0.5 else -1
    return op, direction


def _check_magnitude(m: float) -> float:
    m = float(m)
    if not 0.0 <= m <= 1.0 or math.isnan(m):
        raise ContractError(f"magnitude must be in [0,1], got {m}")
    return m


def magnitude_to_strength(op: AugmentOp, direction: int, m: float):
    """Map magnitude to the parameter the transform actually consumes."""
    m = _check_magnitude(m)
    sign = 1 if direction >= 0 else -1
    kind = op.kind
    if kind == "rotation":
        return sign * MAX_ROTATE_DEG * m
    if kind in ("translate-x", "translate-y"):
        return sign * int(round(MAX_TRANSLATE_PX * m))
    if kind in ("shear-x", "shear-y"):
        return sign * MAX_SHEAR * m
    if kind in ("color", "contrast", "brightness", "sharpness"):
        return 1.0 + (MAX_ENHANCE - 1.0) * m
    if kind == "solarize":
        return SOLARIZE_SPAN * (1.0 - m)
    if kind == "posterize":
        return 8 - int(round(MAX_POSTERIZE_BITS * m))
    if kind in ("identity", "auto-contrast", "equalize"):
        return m  # blend weight (ignored by identity)
    raise ContractError(f"unknown augmentation kind {kind!r}")


def apply(op: AugmentOp, direction: int, m: float, image: np.ndarray) -> np.ndarray:
    """Return e(m, image); always a fresh array, input never mutated."""
    m = _check_magnitude(m)
    if image.dtype != np.uint8 or image.ndim != 3:
        raise ContractError(
            f"image must be uint8 (C,H,W), got {image.dtype} {image.shape}"
        )
    if m == 0.0 or op.kind == "identity":
        return image.copy()
    strength = magnitude_to_strength(op, direction, m)
    kind = op.kind
    if kind == "rotation":
        return _rotate(image, math.radians(strength))
    if kind == "translate-x":
        return _translate(image, strength, 0)
    if kind == "translate-y":
        return _translate(image, 0, strength)
    if kind == "shear-x":
        return _shear(image, strength, axis=0)
    if kind == "shear-y":
        return _shear(image, strength, axis=1)
    if kind == "color":
        return _enhance(image, strength, _degenerate_gray)
    if kind == "contrast":
        return _enhance(image, strength, _degenerate_flat)
    if kind == "brightness":
        return _enhance(image, strength, _degenerate_black)
    if kind == "sharpness":
        return _enhance(image, strength, _degenerate_smooth)
    if kind == "solarize":
        return _solarize(image, strength)
    if kind == "posterize":
        return _posterize(image, strength)
    if kind == "auto-contrast":
        return _blend(image, _auto_contrast(image), m)
    if kind == "equalize":
        return _blend(image, _equalize(image), m)
    raise ContractError(f"unknown augmentation kind {kind!r}")


# ------------------------------------------------------------------ geometric


@functools.lru_cache(maxsize=8)
def _grid(h: int, w: int):
    ys, xs = np.mgrid[0:h, 0:w]
    return ys.astype(np.float64), xs.astype(np.float64)


def _resample(image: np.ndarray, src_y: np.ndarray, src_x: np.ndarray) -> np.ndarray:
    """Bilinear gather at fractional source coords; out-of-bounds reads 0."""
    c, h, w = image.shape
    img = image.astype(np.float64)
    y0 = np.floor(src_y)
    x0 = np.floor(src_x)
    fy = src_y - y0
    fx = src_x - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    acc = np.zeros((c, h, w))
    for dy, dx, wgt in (
        (0, 0, (1 - fy) * (1 - fx)),
        (0, 1, (1 - fy) * fx),
        (1, 0, fy * (1 - fx)),
        (1, 1, fy * fx),
    ):
        yy = y0 + dy
        xx = x0 + dx
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        yc = np.clip(yy, 0, h - 1)
        xc = np.clip(xx, 0, w - 1)
        acc += wgt * inside * img[:, yc, xc]
    return _to_u8(acc)


def _rotate(image: np.ndarray, theta: float) -> np.ndarray:
    _, h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = _grid(h, w)
    dy, dx = ys - cy, xs - cx
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    src_x = cos_t * dx + sin_t * dy + cx
    src_y = -sin_t * dx + cos_t * dy + cy
    return _resample(image, src_y, src_x)


def _translate(image: np.ndarray, tx: int, ty: int) -> np.ndarray:
    _, h, w = image.shape
    ys, xs = _grid(h, w)
    return _resample(image, ys - ty, xs - tx)


def _shear(image: np.ndarray, s: float, axis: int) -> np.ndarray:
    _, h, w = image.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys, xs = _grid(h, w)
    if axis == 0:  # shear-x: rows slide horizontally with y
        return _resample(image, ys, xs - s * (ys - cy))
    return _resample(image, ys - s * (xs - cx), xs)


# ---------------------------------------------------------------- enhancement


def _degenerate_black(img: np.ndarray) -> np.ndarray:
    return np.zeros_like(img)


def _gray_values(img: np.ndarray) -> np.ndarray:
    if img.shape[0] == 1:
        return img[0]
    return np.tensordot(_LUMA, img, axes=([0], [0]))


def _degenerate_gray(img: np.ndarray) -> np.ndarray:
    return np.broadcast_to(_gray_values(img), img.shape)


def _degenerate_flat(img: np.ndarray) -> np.ndarray:
    return np.full_like(img, _gray_values(img).mean())


def _degenerate_smooth(img: np.ndarray) -> np.ndarray:
    # 3x3 smoothing of the interior; the one-pixel border keeps the original.
    c, h, w = img.shape
    out = img.copy()
    if h < 3 or w < 3:
        return out
    kernel = np.array([[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]]) / 13.0
    acc = np.zeros((c, h - 2, w - 2))
    for dy in range(3):
        for dx in range(3):
            acc += kernel[dy, dx] * img[:, dy : dy + h - 2, dx : dx + w - 2]
    out[:, 1 : h - 1, 1 : w - 1] = acc
    return out


def _enhance(image: np.ndarray, factor: float, degenerate_fn) -> np.ndarray:
    img = image.astype(np.float64)
    degen = degenerate_fn(img)
    return _to_u8(degen + factor * (img - degen))


# --------------------------------------------------------------- pixel-valued


def _solarize(image: np.ndarray, threshold: float) -> np.ndarray:
    return np.where(image >= threshold, 255 - image.astype(np.int16), image).astype(np.uint8)


def _posterize(image: np.ndarray, bits: int) -> np.ndarray:
    if bits >= 8:
        return image.copy()
    mask = np.uint8(0xFF & (0xFF << (8 - bits)))
    return image & mask


def _auto_contrast(image: np.ndarray) -> np.ndarray:
    out = np.empty_like(image)
    for c in range(image.shape[0]):
        ch = image[c]
        lo, hi = int(ch.min()), int(ch.max())
        if hi > lo:
            out[c] = _to_u8((ch.astype(np.float64) - lo) * (255.0 / (hi - lo)))
        else:
            out[c] = ch
    return out


def _equalize(image: np.ndarray) -> np.ndarray:
    out = np.empty_like(image)
    for c in range(image.shape[0]):
        ch = image[c]
        hist = np.bincount(ch.reshape(-1), minlength=256)
        cdf = hist.cumsum()
        lowest = cdf[np.flatnonzero(hist)[0]]
        span = cdf[-1] - lowest
        if span == 0:  # flat channel
            out[c] = ch
            continue
        lut = np.rint((cdf - lowest) * (255.0 / span)).astype(np.uint8)
        out[c] = lut[ch]
    return out


def _blend(original: np.ndarray, transformed: np.ndarray, weight: float) -> np.ndarray:
    mixed = (1.0 - weight) * original.astype(np.float64) + weight * transformed.astype(
        np.float64
    )
    return _to_u8(mixed)


def _to_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)
