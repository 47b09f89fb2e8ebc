"""Procedural 28x28 digit images in MNIST IDX layout.

A stand-in for environments without dataset access: each class renders from a
fixed stroke skeleton with per-sample jitter (affine pose, stroke wobble,
thickness, contrast, pixel noise), so a classifier sees a real generalization
problem while the files round-trip through the ordinary IDX loader.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

SIZE = 28


def _line(a, b, n=40):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) * np.asarray(a) + t * np.asarray(b)


def _qbez(a, c, b, n=60):
    t = np.linspace(0.0, 1.0, n)[:, None]
    a, c, b = (np.asarray(p) for p in (a, c, b))
    return (1 - t) ** 2 * a + 2 * t * (1 - t) * c + t**2 * b


def _arc(center, rx, ry, a0, a1, n=90):
    t = np.linspace(a0, a1, n)
    cx, cy = center
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


_TAU = 2 * math.pi

# Unit square, x right, y down. One list of point sequences per class.
_STROKES = {
    0: [_arc((0.5, 0.5), 0.26, 0.36, 0, _TAU, 140)],
    1: [_line((0.40, 0.26), (0.55, 0.13)), _line((0.55, 0.13), (0.55, 0.87))],
    2: [
        _arc((0.5, 0.33), 0.235, 0.195, math.pi, _TAU),
        _qbez((0.735, 0.33), (0.68, 0.62), (0.27, 0.84)),
        _line((0.27, 0.84), (0.75, 0.84)),
    ],
    3: [
        _arc((0.45, 0.32), 0.22, 0.19, math.pi + 0.68, 2.5 * math.pi),
        _arc((0.44, 0.66), 0.24, 0.21, 1.5 * math.pi, 2.79 * math.pi),
    ],
    4: [
        _line((0.52, 0.13), (0.20, 0.60)),
        _line((0.20, 0.60), (0.82, 0.60)),
        _line((0.60, 0.34), (0.60, 0.88)),
    ],
    5: [
        _line((0.72, 0.14), (0.30, 0.14)),
        _line((0.30, 0.14), (0.27, 0.47)),
        _arc((0.47, 0.65), 0.235, 0.21, 1.23 * math.pi, 2.82 * math.pi),
    ],
    6: [
        _qbez((0.66, 0.12), (0.35, 0.20), (0.28, 0.55)),
        _arc((0.47, 0.64), 0.20, 0.22, 0, _TAU, 120),
    ],
    7: [
        _line((0.24, 0.14), (0.76, 0.14)),
        _line((0.76, 0.14), (0.42, 0.86)),
        _line((0.35, 0.50), (0.65, 0.50), 24),
    ],
    8: [
        _arc((0.5, 0.31), 0.19, 0.17, 0, _TAU, 110),
        _arc((0.5, 0.67), 0.22, 0.20, 0, _TAU, 120),
    ],
    9: [
        _arc((0.52, 0.36), 0.20, 0.20, 0, _TAU, 110),
        _qbez((0.72, 0.36), (0.70, 0.65), (0.55, 0.87)),
    ],
}


def _jitter_affine(rng):
    angle = rng.normal(0.0, 0.10)  # radians, ~6 deg std
    shear = rng.normal(0.0, 0.07)
    scale_x = math.exp(rng.normal(0.0, 0.07))
    scale_y = math.exp(rng.normal(0.0, 0.07))
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    lin = np.array(
        [
            [scale_x * cos_a, scale_x * (shear * cos_a - sin_a)],
            [scale_y * sin_a, scale_y * (shear * sin_a + cos_a)],
        ]
    )
    shift = rng.normal(0.0, 0.035, size=2)
    return lin, shift


def render_digit(digit: int, rng) -> np.ndarray:
    """One jittered (28, 28) uint8 image of the given class."""
    lin, shift = _jitter_affine(rng)
    canvas = np.zeros((SIZE, SIZE))
    for stroke in _STROKES[digit]:
        pts = stroke + rng.normal(0.0, 0.012, size=(1, 2))  # whole-stroke offset
        wobble = np.linspace(
            rng.normal(0.0, 0.018, size=2), rng.normal(0.0, 0.018, size=2), len(pts)
        )
        pts = (pts + wobble - 0.5) @ lin.T + 0.5 + shift
        px = pts[:, 0] * (SIZE - 4) + 1.5
        py = pts[:, 1] * (SIZE - 4) + 1.5
        x0 = np.floor(px).astype(np.int64)
        y0 = np.floor(py).astype(np.int64)
        fx, fy = px - x0, py - y0
        for dy, dx, wgt in (
            (0, 0, (1 - fy) * (1 - fx)),
            (0, 1, (1 - fy) * fx),
            (1, 0, fy * (1 - fx)),
            (1, 1, fy * fx),
        ):
            yy, xx = y0 + dy, x0 + dx
            ok = (yy >= 0) & (yy < SIZE) & (xx >= 0) & (xx < SIZE)
            np.maximum.at(canvas, (yy[ok], xx[ok]), wgt[ok])
    # Thickness and softness: a few binomial-kernel passes.
    passes = int(rng.integers(1, 4))
    for _ in range(passes):
        canvas = _blur3(canvas)
    peak = canvas.max()
    if peak > 0:
        canvas = canvas / peak
    canvas = canvas ** float(rng.uniform(0.55, 1.1))
    amplitude = rng.uniform(160.0, 255.0)
    noisy = amplitude * canvas + rng.normal(0.0, rng.uniform(4.0, 14.0), canvas.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def _blur3(img: np.ndarray) -> np.ndarray:
    # Separable [1,2,1]/4 in both axes, zero boundary.
    pad = np.pad(img, 1)
    horiz = (pad[:, :-2] + 2 * pad[:, 1:-1] + pad[:, 2:]) / 4.0
    return (horiz[:-2] + 2 * horiz[1:-1] + horiz[2:]) / 4.0


def make_images(count: int, seed: int):
    """Balanced class mix; returns (images (N,1,28,28) u8, labels (N,) i64)."""
    rng = np.random.default_rng(seed)
    reps = -(-count // 10)
    labels = rng.permutation(np.tile(np.arange(10, dtype=np.int64), reps))[:count]
    images = np.empty((count, 1, SIZE, SIZE), dtype=np.uint8)
    for i, lab in enumerate(labels):
        images[i, 0] = render_digit(int(lab), rng)
    return images, labels


def write_idx_files(root, images: np.ndarray, labels: np.ndarray, split: str):
    """Write (images, labels) as the standard IDX pair for the given split."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stem = "train" if split == "train" else "t10k"
    n, _, h, w = images.shape
    img_path = root / f"{stem}-images-idx3-ubyte"
    img_path.write_bytes(struct.pack(">IIII", 0x00000803, n, h, w) + images.tobytes())
    lab_path = root / f"{stem}-labels-idx1-ubyte"
    lab_path.write_bytes(
        struct.pack(">II", 0x00000801, n) + labels.astype(np.uint8).tobytes()
    )


def generate_dataset(root, n_train: int, n_test: int, seed: int = 0):
    """Write a full train/test IDX directory; returns the root path."""
    train_images, train_labels = make_images(n_train, seed)
    test_images, test_labels = make_images(n_test, seed + 1)
    write_idx_files(root, train_images, train_labels, "train")
    write_idx_files(root, test_images, test_labels, "test")
    return Path(root)
