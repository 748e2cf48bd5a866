"""Deterministic synthetic cohorts with three families of abnormality.

Normal patches are a smooth texture (a base level plus a few low-frequency
plane waves) with additive Gaussian noise. Abnormal patches start from a
freshly drawn normal patch and are corrupted according to the cohort kind:

``structural``
    a bright disk (+0.5) of radius in [side/8, side/4] at a random position;
``artifact``
    one of: Gaussian noise (sigma 0.3), a 5x5 box blur, contrast compression
    toward 0.5 by a factor 0.4, or a black square of side/4;
``density``
    a random permutation of the patch's own pixels, which keeps the intensity
    histogram and destroys the spatial correlation.

All draws come from a single :class:`~adkit._rng.Xoshiro256` stream consumed
in manifest order, so identical arguments give byte-identical files.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path

import numpy as np

from .._rng import Xoshiro256
from ..exceptions import ManifestError
from .manifest import Dataset, ManifestRecord, write_manifest
from .patch import Patch, write_patch

NOISE_SIGMA = 0.05
N_WAVES = 3
WAVE_CYCLES = (0.5, 1.5)  # cycles per patch width
WAVE_AMPLITUDE = (0.1, 0.1)
BASE_LEVEL = (0.45, 0.55)
PATIENT_SIZE = 10

ARTIFACTS = ("noise", "blur", "contrast", "occlusion")


class CohortKind(str, Enum):
    structural = "structural"
    artifact = "artifact"
    density = "density"


def normal_texture(rng: Xoshiro256, side: int) -> np.ndarray:
    """One normal patch as a clipped float image of shape ``(side, side)``."""
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    img = np.full((side, side), rng.uniform(*BASE_LEVEL))
    for _ in range(N_WAVES):
        cycles = rng.uniform(*WAVE_CYCLES)
        angle = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(*WAVE_AMPLITUDE)
        proj = xx * np.cos(angle) + yy * np.sin(angle)
        img = img + amp * np.sin(2.0 * np.pi * cycles * proj / side + phase)
    img = img + NOISE_SIGMA * rng.normal(side * side).reshape(side, side)
    return np.clip(img, 0.0, 1.0)


def add_disk(img: np.ndarray, rng: Xoshiro256) -> np.ndarray:
    side = img.shape[0]
    radius = rng.uniform(side / 8.0, side / 4.0)
    cy = rng.uniform(0.0, side - 1.0)
    cx = rng.uniform(0.0, side - 1.0)
    yy, xx = np.mgrid[0:side, 0:side]
    inside = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    out = img.copy()
    out[inside] += 0.5
    return np.clip(out, 0.0, 1.0)


def box_blur(img: np.ndarray, size: int = 5) -> np.ndarray:
    """Mean filter with edge replication, summed in fixed row-major offset order."""
    r = size // 2
    padded = np.pad(img, r, mode="edge")
    h, w = img.shape
    acc = np.zeros_like(img)
    for dy in range(size):
        for dx in range(size):
            acc = acc + padded[dy : dy + h, dx : dx + w]
    return acc / (size * size)


def apply_artifact(img: np.ndarray, rng: Xoshiro256) -> tuple[np.ndarray, str]:
    side = img.shape[0]
    name = ARTIFACTS[rng.integers(len(ARTIFACTS))]
    if name == "noise":
        out = img + 0.3 * rng.normal(side * side).reshape(side, side)
    elif name == "blur":
        out = box_blur(img, 5)
    elif name == "contrast":
        out = 0.5 + 0.4 * (img - 0.5)
    else:
        sq = side // 4
        y0 = rng.integers(side - sq + 1)
        x0 = rng.integers(side - sq + 1)
        out = img.copy()
        out[y0 : y0 + sq, x0 : x0 + sq] = 0.0
    return np.clip(out, 0.0, 1.0), name


def permute_pixels(img: np.ndarray, rng: Xoshiro256) -> np.ndarray:
    flat = img.ravel()
    return flat[rng.permutation(flat.size)].reshape(img.shape)


def corrupt(kind: CohortKind, img: np.ndarray, rng: Xoshiro256) -> np.ndarray:
    kind = CohortKind(kind)
    if kind is CohortKind.structural:
        return add_disk(img, rng)
    if kind is CohortKind.artifact:
        return apply_artifact(img, rng)[0]
    return permute_pixels(img, rng)


def generate_synthetic_cohort(
    kind,
    n_train: int,
    n_val_normal: int,
    n_val_abnormal: int,
    n_test_normal: int,
    n_test_abnormal: int,
    side: int,
    seed: int,
    out_dir,
    name: str | None = None,
) -> Dataset:
    """Write a cohort's PGM patches and ``manifest.csv`` under ``out_dir``.

    Patches are quantized to 8 bits before the density permutation is taken,
    so permuted abnormal patches carry exactly their source histogram.
    """
    kind = CohortKind(kind)
    if side < 16:
        raise ValueError(f"side must be >= 16, got {side}")
    counts = (n_train, n_val_normal, n_val_abnormal, n_test_normal, n_test_abnormal)
    if any(int(c) < 0 for c in counts):
        raise ManifestError("sample counts must be nonnegative")
    if n_test_normal <= 0 or n_test_abnormal <= 0:
        raise ManifestError("test split needs both normal and abnormal samples (AUC undefined)")
    if n_train <= 0:
        raise ManifestError("n_train must be positive")

    out_dir = Path(out_dir)
    (out_dir / "patches").mkdir(parents=True, exist_ok=True)
    rng = Xoshiro256(seed)
    groups = [
        ("train", "normal", n_train),
        ("val", "normal", n_val_normal),
        ("val", "abnormal", n_val_abnormal),
        ("test", "normal", n_test_normal),
        ("test", "abnormal", n_test_abnormal),
    ]
    records = []
    patient = -1
    for split, label, count in groups:
        for i in range(int(count)):
            if i % PATIENT_SIZE == 0:
                patient += 1
            img = _quantize(normal_texture(rng, side))
            if label == "abnormal":
                img = _quantize(corrupt(kind, img, rng))
            rel = f"patches/{split}_{label}_{i:05d}.pgm"
            write_patch(Patch.from_array(img), out_dir / rel)
            records.append(ManifestRecord(rel, label, f"{kind.value}-p{patient:04d}", split))
    dataset = Dataset(records, name=name or kind.value, root=out_dir)
    write_manifest(dataset, out_dir / "manifest.csv")
    return dataset


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.floor(img * 255.0 + 0.5) / 255.0
