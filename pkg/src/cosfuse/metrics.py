"""Fusion quality metrics and restoration utilities.

Two source images A and B and a fused image F are compared with:

* ``q_mi``: information preservation. Pixels are quantized to 256 bins and
  mutual information is estimated from joint histograms. The score is
  I(A;F)/(H(A)+H(F)) + I(B;F)/(H(B)+H(F)), which sits in [0, 1] and equals
  1 when F reproduces identical sources.
* ``q_abf``: edge transfer. Sobel strength and orientation maps are compared
  per pixel through sigmoid preservation curves; the per-pixel scores are
  normalized so that perfect strength and orientation agreement scores
  exactly 1, then averaged with edge-strength weights.

Plain MSE/PSNR helpers are included for ground-truth comparisons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "JointHistogram",
    "EdgeMap",
    "mse",
    "psnr",
    "entropy",
    "joint_histogram",
    "mutual_information",
    "q_mi",
    "q_abf",
    "edge_map",
    "metric_report_lines",
]

PSNR_CAP_DB = 150.0


@dataclass
class JointHistogram:
    """256x256 joint pixel counts plus marginals (row 0: first image)."""

    bins: np.ndarray
    marginals: np.ndarray
    total: int


@dataclass
class EdgeMap:
    """Sobel edge strength and orientation (radians in (-pi/2, pi/2])."""

    strength: np.ndarray
    orientation: np.ndarray


def _check_pair(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("images must be 2-d arrays")
    if A.shape != B.shape:
        raise ValueError(f"image shapes differ: {A.shape} vs {B.shape}")
    return A, B


def mse(A, B):
    """Mean squared pixel difference."""
    A, B = _check_pair(A, B)
    return float(np.mean((A - B) ** 2))


def psnr(A, B):
    """Peak signal-to-noise ratio in dB against a 255 peak, capped at 150."""
    err = mse(A, B)
    if err < 1e-12:
        return PSNR_CAP_DB
    return 10.0 * math.log10(255.0 ** 2 / err)


def _quantize(A):
    return np.clip(np.rint(A), 0, 255).astype(np.int64)


def _entropy_from_counts(counts, total):
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def entropy(A):
    """Shannon entropy in bits of the 256-bin quantized pixel distribution."""
    A = np.asarray(A, dtype=np.float64)
    q = _quantize(A).ravel()
    counts = np.bincount(q, minlength=256)
    return _entropy_from_counts(counts, q.size)


def joint_histogram(A, B):
    """Joint 256x256 histogram of two quantized images."""
    A, B = _check_pair(A, B)
    a = _quantize(A).ravel()
    b = _quantize(B).ravel()
    bins = np.bincount(a * 256 + b, minlength=256 * 256).reshape(256, 256)
    marginals = np.stack([bins.sum(axis=1), bins.sum(axis=0)])
    return JointHistogram(bins=bins, marginals=marginals, total=int(a.size))


def mutual_information(A, B):
    """Mutual information in bits: H(A) + H(B) - H(A, B)."""
    jh = joint_histogram(A, B)
    h_a = _entropy_from_counts(jh.marginals[0], jh.total)
    h_b = _entropy_from_counts(jh.marginals[1], jh.total)
    h_ab = _entropy_from_counts(jh.bins.ravel(), jh.total)
    return h_a + h_b - h_ab


def q_mi(A, B, F):
    """Normalized mutual-information fusion score in [0, 1]."""
    h_a, h_b, h_f = entropy(A), entropy(B), entropy(F)
    if h_a + h_f == 0.0 or h_b + h_f == 0.0:
        warnings.warn("q_mi is degenerate for zero-entropy inputs; returning 0")
        return 0.0
    return (mutual_information(A, F) / (h_a + h_f)
            + mutual_information(B, F) / (h_b + h_f))


_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])


def _conv3x3(image, kernel):
    padded = np.pad(image, 1, mode="symmetric")
    H, W = image.shape
    out = np.zeros_like(image)
    for di in range(3):
        for dj in range(3):
            out += kernel[di, dj] * padded[di:di + H, dj:dj + W]
    return out


def edge_map(A):
    """Sobel edge strength and line orientation of an image."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or min(A.shape) < 3:
        raise ValueError("edge maps need a 2-d image of at least 3x3 pixels")
    gx = _conv3x3(A, _SOBEL_X)
    gy = _conv3x3(A, _SOBEL_Y)
    strength = np.hypot(gx, gy)
    orientation = np.arctan2(gy, gx)
    # Fold to line orientation in (-pi/2, pi/2].
    orientation = np.where(orientation > np.pi / 2, orientation - np.pi, orientation)
    orientation = np.where(orientation <= -np.pi / 2, orientation + np.pi, orientation)
    return EdgeMap(strength=strength, orientation=orientation)


def q_abf(A, B, F, gamma_g=0.9994, kappa_g=-15.0, sigma_g=0.5,
          gamma_a=0.9879, kappa_a=-22.0, sigma_a=0.8, weight_exponent=1.0):
    """Edge-transfer fusion score in [0, 1].

    Per source image and pixel, the strength factor uses the weaker-to-
    stronger edge strength ratio and the orientation factor the normalized
    orientation agreement; both pass through sigmoids and the product is
    scaled by its value at perfect agreement so an exact copy scores 1.
    Pixels where both edges vanish count as perfectly preserved with zero
    weight.
    """
    A, F = _check_pair(A, F)
    B, F = _check_pair(B, F)
    e_a, e_b, e_f = edge_map(A), edge_map(B), edge_map(F)

    def sig_g(x):
        return gamma_g / (1.0 + np.exp(kappa_g * (x - sigma_g)))

    def sig_a(x):
        return gamma_a / (1.0 + np.exp(kappa_a * (x - sigma_a)))

    perfect = sig_g(1.0) * sig_a(1.0)

    def preservation(e_x):
        lo = np.minimum(e_x.strength, e_f.strength)
        hi = np.maximum(e_x.strength, e_f.strength)
        ratio = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 1.0)
        agree = 1.0 - 2.0 * np.abs(e_x.orientation - e_f.orientation) / np.pi
        return sig_g(ratio) * sig_a(agree) / perfect

    w_a = e_a.strength ** weight_exponent
    w_b = e_b.strength ** weight_exponent
    denom = float((w_a + w_b).sum())
    if denom == 0.0:
        return 1.0  # no edges anywhere: transfer is vacuously perfect
    score = float((preservation(e_a) * w_a + preservation(e_b) * w_b).sum())
    return score / denom


def metric_report_lines(values):
    """Format metric values as the standard key=value report lines."""
    lines = []
    for key in ("q_mi", "q_abf", "psnr_db", "mse"):
        if key in values and values[key] is not None:
            lines.append(f"{key}={values[key]:.12g}")
    return lines
