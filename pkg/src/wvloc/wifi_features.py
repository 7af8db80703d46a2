"""Image-form WiFi features: amplitude/phase spectrum, AP correlation, standardized RSSI.

The temporal-spatial spectrum is the 2-D DFT of the M×K RSSI block: rows
carry the per-sample spatial profile across access points, columns the
temporal variation of a single access point. Together with the AP
correlation matrix and the standardized block itself, the features form
four equal-sized channels scaled like image pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import RssiBlock, _freeze

MISSING_SENTINEL = -100.0   # dBm stand-in for an AP absent from a scan
ZERO_VAR_TOL = 1e-9


@dataclass(frozen=True)
class SpectrumFeature:
    """Unitary 2-D DFT of a standardized RSSI block, split into amplitude and phase."""

    complex_spectrum: np.ndarray  # (M, K) complex
    amplitude: np.ndarray         # (M, K) >= 0
    phase: np.ndarray             # (M, K) in (-pi, pi]

    def __post_init__(self):
        spec = np.asarray(self.complex_spectrum, dtype=complex)
        spec.setflags(write=False)
        object.__setattr__(self, "complex_spectrum", spec)
        object.__setattr__(self, "amplitude", _freeze(self.amplitude))
        object.__setattr__(self, "phase", _freeze(self.phase))


@dataclass(frozen=True)
class CorrelationFeature:
    """K×K access-point correlation matrix, symmetric with entries in [-1, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("correlation matrix must be exactly symmetric")
        if np.abs(m).max() > 1.0 + 1e-9:
            raise ValueError("correlation entries must lie in [-1, 1]")


@dataclass(frozen=True)
class WifiFeatureSet:
    """The four D×D WiFi channels (amp, phase, corr, rssi), each scaled to [0, 1]."""

    amp: np.ndarray
    phase: np.ndarray
    corr: np.ndarray
    rssi: np.ndarray

    def __post_init__(self):
        for name in ("amp", "phase", "corr", "rssi"):
            arr = _freeze(getattr(self, name))
            object.__setattr__(self, name, arr)
        shapes = {getattr(self, n).shape for n in ("amp", "phase", "corr", "rssi")}
        if len(shapes) != 1:
            raise ValueError(f"channels disagree on dimensions: {shapes}")
        d = self.amp.shape
        if len(d) != 2 or d[0] != d[1]:
            raise ValueError("channels must be square matrices")

    @property
    def size(self) -> int:
        return self.amp.shape[0]

    def stack(self) -> np.ndarray:
        """Channels as a (4, D, D) array ordered (amp, phase, corr, rssi)."""
        return np.stack([self.amp, self.phase, self.corr, self.rssi])


def preprocess_rssi(raw: RssiBlock) -> RssiBlock:
    """Standardize each AP column to mean 0 and (population) std 1.

    Columns with near-zero variance (e.g. an AP never heard, all sentinel)
    become all-zero sentinel columns instead of dividing by ~0.
    """
    if raw.standardized:
        raise ValueError("block is already standardized")
    values = raw.values
    if values.shape[0] < 2:
        raise ValueError("insufficient samples: standardization needs M >= 2")
    mu = values.mean(axis=0)
    sd = values.std(axis=0)
    out = np.zeros_like(values)
    keep = sd >= ZERO_VAR_TOL
    out[:, keep] = (values[:, keep] - mu[keep]) / sd[keep]
    return RssiBlock(out, raw.ap_ids, standardized=True)


@lru_cache(maxsize=32)
def dft_matrix(n: int) -> np.ndarray:
    """Unitary n×n DFT matrix: entry (a, b) = omega^(a*b) / sqrt(n), omega = exp(-2*pi*j/n)."""
    idx = np.arange(n)
    exponents = np.outer(idx, idx) % n   # omega^(ab) = omega^(ab mod n)
    mat = np.exp(-2j * np.pi / n * exponents) / np.sqrt(n)
    mat.setflags(write=False)
    return mat


def dft_2d_values(values: np.ndarray) -> np.ndarray:
    """Complex spectrum F_M^T @ S @ F_K of a plain M×K matrix."""
    m, k = values.shape
    return dft_matrix(m).T @ values @ dft_matrix(k)


def dft_2d(s: RssiBlock) -> SpectrumFeature:
    """Temporal-spatial spectrum of a standardized block, with amplitude and phase."""
    if not s.standardized:
        raise ValueError("dft_2d expects a standardized block")
    spec = dft_2d_values(s.values)
    return SpectrumFeature(spec, np.abs(spec), np.angle(spec))


def correlation(s: RssiBlock) -> CorrelationFeature:
    """Access-point correlation matrix S^T S / M of a standardized block."""
    if not s.standardized:
        raise ValueError("correlation expects a standardized block")
    m = s.shape[0]
    r = s.values.T @ s.values / m
    r = (r + r.T) / 2.0          # exact symmetry despite BLAS rounding
    r = np.clip(r, -1.0, 1.0)
    return CorrelationFeature(r)


def _pad_square(mat: np.ndarray, d: int) -> np.ndarray:
    """Zero-pad a matrix to d×d by appending bottom rows / right columns."""
    rows, cols = mat.shape
    return np.pad(mat, ((0, d - rows), (0, d - cols)))


def _minmax_scale(mat: np.ndarray) -> np.ndarray:
    lo, hi = mat.min(), mat.max()
    if hi - lo < 1e-12:
        return np.full_like(mat, 0.5)
    return (mat - lo) / (hi - lo)


def to_feature_set(spec: SpectrumFeature, corr: CorrelationFeature,
                   s: RssiBlock) -> WifiFeatureSet:
    """Harmonize the features to four square [0, 1] channels of size D = max(M, K).

    amp/corr/rssi are min-max scaled per channel (constant channels map to
    all-0.5); phase uses the fixed linear map from (-pi, pi] so its padded
    zeros land on 0.5 like a neutral gray.
    """
    m, k = s.shape
    d = max(m, k)
    amp = _minmax_scale(_pad_square(spec.amplitude, d))
    phase = (_pad_square(spec.phase, d) + np.pi) / (2.0 * np.pi)
    corr_ch = _minmax_scale(_pad_square(corr.matrix, d))
    rssi = _minmax_scale(_pad_square(s.values, d))
    return WifiFeatureSet(amp, phase, corr_ch, rssi)


def wifi_channels(raw: RssiBlock) -> WifiFeatureSet:
    """Full raw-block-to-channels pipeline: standardize, transform, harmonize."""
    s = preprocess_rssi(raw)
    return to_feature_set(dft_2d(s), correlation(s), s)


def resize_nearest(mat: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor resize of a square matrix to size×size."""
    d = mat.shape[0]
    if d == size:
        return mat
    idx = (np.arange(size) * d) // size
    return mat[np.ix_(idx, idx)]


def resize_feature_set(fs: WifiFeatureSet, size: int) -> WifiFeatureSet:
    """Resize all four channels so WiFi features match the camera image geometry."""
    if fs.size == size:
        return fs
    return WifiFeatureSet(*(resize_nearest(getattr(fs, n), size)
                            for n in ("amp", "phase", "corr", "rssi")))
