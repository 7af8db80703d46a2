"""Double-layer soft fusion and the threshold-style baselines it is compared against.

First layer: channel stacking feeds one joint classifier. Second layer:
the three likelihood vectors are combined by element-wise product and a
three-way element-wise median, both renormalized. No candidate cell is
ever excluded outright, which is the point: thresholded baselines
(distance circle, probability mass, Top-K) do exclude candidates and pay
for it in the error tail.
"""

from __future__ import annotations

import numpy as np

from .model import CellGrid, ImageGroup, LikelihoodVector, label_to_centre
from .wifi_features import WifiFeatureSet

PRODUCT_UNDERFLOW = 1e-300


def stack_joint_channels(wifi: WifiFeatureSet, images: ImageGroup) -> np.ndarray:
    """(4+S, D, D) joint input ordered (amp, phase, corr, rssi, img_0..img_{S-1})."""
    h, w = images.image_size
    if wifi.size != h or h != w:
        raise ValueError(f"wifi channels {wifi.size}x{wifi.size} vs images {h}x{w}")
    return np.concatenate([wifi.stack(), images.images])


def _normalized(raw: np.ndarray, source: str, flagged: bool = False) -> LikelihoodVector:
    total = raw.sum()
    if total < PRODUCT_UNDERFLOW:
        uniform = np.full(raw.size, 1.0 / raw.size)
        return LikelihoodVector(uniform, source, flagged=True)
    return LikelihoodVector(raw / total, source, flagged=flagged)


def hadamard_fuse(p_w: LikelihoodVector, p_v: LikelihoodVector,
                  p_wv: LikelihoodVector) -> LikelihoodVector:
    """Element-wise product of the three likelihoods, renormalized.

    If the raw product underflows to effectively zero mass, the evidence
    is degenerate: fall back to the uniform vector and flag the sample.
    """
    if not (len(p_w) == len(p_v) == len(p_wv)):
        raise ValueError("likelihood vectors disagree on length")
    return _normalized(p_w.probs * p_v.probs * p_wv.probs, "hadamard")


def median_fuse(p_w: LikelihoodVector, p_v: LikelihoodVector,
                p_wvm: LikelihoodVector) -> LikelihoodVector:
    """Element-wise median across the three vectors, renormalized."""
    if not (len(p_w) == len(p_v) == len(p_wvm)):
        raise ValueError("likelihood vectors disagree on length")
    med = np.median(np.stack([p_w.probs, p_v.probs, p_wvm.probs]), axis=0)
    return _normalized(med, "final")


def double_layer_fuse(p_w: LikelihoodVector, p_v: LikelihoodVector,
                      p_wv: LikelihoodVector) -> LikelihoodVector:
    """Second-layer decision fusion: Hadamard product then median filtering."""
    p_wvm = hadamard_fuse(p_w, p_v, p_wv)
    final = median_fuse(p_w, p_v, p_wvm)
    if p_wvm.flagged and not final.flagged:
        final = LikelihoodVector(final.probs, final.source, flagged=True)
    return final


def decide(p: LikelihoodVector, grid: CellGrid) -> tuple[int, float, float]:
    """Most likely cell (ties to the smaller index) and its centre coordinates."""
    if len(p) != grid.n_cells:
        raise ValueError(f"vector length {len(p)} vs {grid.n_cells} cells")
    label = int(np.argmax(p.probs))
    x, y = label_to_centre(grid, label)
    return label, x, y


def distance_threshold_fuse(p_w: LikelihoodVector, p_v: LikelihoodVector,
                            grid: CellGrid, d: float) -> LikelihoodVector:
    """Baseline: keep only visual candidates within d meters of the WiFi fix.

    If the circle empties the vector (possible for non-softmax inputs),
    the unfiltered visual vector is returned flagged.
    """
    if d <= 0:
        raise ValueError("distance threshold must be positive")
    _, cx, cy = decide(p_w, grid)
    dist = np.hypot(grid.centres[:, 0] - cx, grid.centres[:, 1] - cy)
    kept = np.where(dist <= d, p_v.probs, 0.0)
    if kept.sum() < PRODUCT_UNDERFLOW:
        return LikelihoodVector(p_v.probs, "final", flagged=True)
    return _normalized(kept, "final")


def _candidate_filter(p_primary: LikelihoodVector, p_secondary: LikelihoodVector,
                      candidates: np.ndarray) -> LikelihoodVector:
    kept = np.zeros(len(p_secondary))
    kept[candidates] = p_secondary.probs[candidates]
    if kept.sum() < PRODUCT_UNDERFLOW:
        return LikelihoodVector(p_secondary.probs, "final", flagged=True)
    return _normalized(kept, "final")


def probability_threshold_fuse(p_primary: LikelihoodVector, p_secondary: LikelihoodVector,
                               gamma: float) -> LikelihoodVector:
    """Baseline: candidate set is the smallest prefix of primary mass reaching gamma."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    if len(p_primary) != len(p_secondary):
        raise ValueError("likelihood vectors disagree on length")
    order = np.argsort(-p_primary.probs, kind="stable")
    csum = np.cumsum(p_primary.probs[order])
    cutoff = int(np.searchsorted(csum, gamma - 1e-12))
    cutoff = min(cutoff, len(p_primary) - 1)
    return _candidate_filter(p_primary, p_secondary, order[:cutoff + 1])


def topk_fuse(p_primary: LikelihoodVector, p_secondary: LikelihoodVector,
              k: int) -> LikelihoodVector:
    """Baseline: candidate set is the k most likely primary cells."""
    if not 1 <= k <= len(p_primary):
        raise ValueError(f"k must lie in [1, {len(p_primary)}]")
    if len(p_primary) != len(p_secondary):
        raise ValueError("likelihood vectors disagree on length")
    order = np.argsort(-p_primary.probs, kind="stable")
    return _candidate_filter(p_primary, p_secondary, order[:k])
