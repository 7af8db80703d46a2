"""Glue between datasets, classifiers, and fusion: the offline localization loop.

One localization request is a 10-sample RSSI block plus 4 views; the
pipeline turns it into channel stacks, runs the trained classifiers, and
fuses the likelihood vectors according to the selected mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fusion import (
    decide,
    distance_threshold_fuse,
    double_layer_fuse,
    hadamard_fuse,
    probability_threshold_fuse,
    stack_joint_channels,
    topk_fuse,
)
from .model import CellGrid, LikelihoodVector, Sample
from .network import NetworkConfig, TrainedModel, build_network, predict_batch, train
from .wifi_features import resize_feature_set, wifi_channels

FUSION_MODES = ("wifi", "visual", "joint", "hadamard", "double-layer",
                "dist-thresh", "prob-thresh", "topk")

MODE_MODELS = {
    "wifi": ("wifi",),
    "visual": ("visual",),
    "joint": ("joint",),
    "hadamard": ("wifi", "visual", "joint"),
    "double-layer": ("wifi", "visual", "joint"),
    "dist-thresh": ("wifi", "visual"),
    "prob-thresh": ("wifi", "visual"),
    "topk": ("wifi", "visual"),
}


@dataclass(frozen=True)
class BaselineParams:
    """Knobs for the threshold-style baseline fusions."""

    distance_threshold_d: float = 4.0
    probability_threshold_gamma: float = 0.9
    top_k: int = 5

    def __post_init__(self):
        if self.distance_threshold_d <= 0:
            raise ValueError("distance_threshold_d must be positive")
        if not 0.0 < self.probability_threshold_gamma <= 1.0:
            raise ValueError("probability_threshold_gamma must lie in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be a positive integer")


@dataclass(frozen=True)
class EstimateRow:
    index: int
    truth_x: float
    truth_y: float
    est_x: float
    est_y: float
    est_label: int
    flags: str = ""


def build_input(sample: Sample, which: str, size: int) -> np.ndarray:
    """Channel stack (C, size, size) for one sample and classifier kind.

    WiFi channels are produced at D = max(M, K) and resized to `size`;
    the wifi-only classifier usually runs at native D, the joint stack at
    the camera image size.
    """
    if which == "visual":
        return sample.images.images
    fs = resize_feature_set(wifi_channels(sample.rssi), size)
    if which == "wifi":
        return fs.stack()
    if which == "joint":
        return stack_joint_channels(fs, sample.images)
    raise ValueError(f"unknown classifier kind {which!r}")


def build_inputs(samples, which: str, size: int) -> np.ndarray:
    return np.stack([build_input(s, which, size) for s in samples])


def input_channels_for(which: str, s: int) -> int:
    return {"wifi": 4, "visual": s, "joint": 4 + s}[which]


def default_conv_layers(size: int) -> tuple:
    """LeNet-style stack sized to the input: stride-2 first conv for large
    inputs, 3x3 kernels once 5x5 stacks stop fitting."""
    if size >= 32:
        return ((6, 5, 2), (16, 5, 1))
    if size >= 16:
        return ((6, 5, 1), (16, 5, 1))
    return ((6, 3, 1), (16, 3, 1))


# Training settings that work at desk scale. The wifi net runs at the native
# feature size and needs many cheap epochs; the image-sized nets start slow
# (damped output init) and want the hotter learning rate.
DEFAULT_TRAIN_PARAMS = {
    "wifi": dict(epochs=150, learning_rate=0.2, batch_size=32),
    "visual": dict(epochs=60, learning_rate=0.15, batch_size=32),
    "joint": dict(epochs=60, learning_rate=0.15, batch_size=32),
}


def train_classifier(samples, which: str, n_cells: int, image_size: int,
                     s: int, input_size: int | None = None,
                     **config_overrides) -> TrainedModel:
    """Train one of f_w / f_v / f_wv on a sample list."""
    size = input_size or image_size
    config_overrides.setdefault("conv_layers", default_conv_layers(size))
    config = NetworkConfig(
        input_channels=input_channels_for(which, s),
        input_size=size,
        num_classes=n_cells,
        source={"wifi": "wifi", "visual": "visual", "joint": "joint"}[which],
        **config_overrides,
    )
    x = build_inputs(samples, which, size)
    labeled = list(zip(x, (s.cell_label for s in samples)))
    return train(build_network(config), labeled, config)


def training_accuracy(model: TrainedModel, samples, which: str) -> float:
    x = build_inputs(samples, which, model.config.input_size)
    y = np.array([s.cell_label for s in samples])
    return float((predict_batch(model, x).argmax(axis=1) == y).mean())


def model_likelihoods(models: dict, samples) -> dict[str, np.ndarray]:
    """(B, N) softmax matrix per available classifier, batched per model."""
    out = {}
    for which, model in models.items():
        x = build_inputs(samples, which, model.config.input_size)
        out[which] = predict_batch(model, x)
    return out


def _fuse_one(mode: str, vecs: dict[str, LikelihoodVector], grid: CellGrid,
              params: BaselineParams) -> LikelihoodVector:
    if mode in ("wifi", "visual", "joint"):
        return vecs[mode]
    if mode == "hadamard":
        return hadamard_fuse(vecs["wifi"], vecs["visual"], vecs["joint"])
    if mode == "double-layer":
        return double_layer_fuse(vecs["wifi"], vecs["visual"], vecs["joint"])
    if mode == "dist-thresh":
        return distance_threshold_fuse(vecs["wifi"], vecs["visual"], grid,
                                       params.distance_threshold_d)
    if mode == "prob-thresh":
        return probability_threshold_fuse(vecs["wifi"], vecs["visual"],
                                          params.probability_threshold_gamma)
    if mode == "topk":
        return topk_fuse(vecs["wifi"], vecs["visual"], params.top_k)
    raise ValueError(f"unknown fusion mode {mode!r}")


def localize_from_probs(probs: dict, samples, grid: CellGrid, mode: str,
                        params: BaselineParams = BaselineParams()) -> list[EstimateRow]:
    """Fuse precomputed per-model (B, N) likelihood matrices for one mode."""
    if mode not in FUSION_MODES:
        raise ValueError(f"unknown fusion mode {mode!r}")
    needed = MODE_MODELS[mode]
    missing = [w for w in needed if w not in probs]
    if missing:
        raise ValueError(f"fusion mode {mode!r} requires the {missing[0]} model checkpoint")
    if mode == "topk" and params.top_k > grid.n_cells:
        raise ValueError(f"top_k {params.top_k} exceeds the {grid.n_cells}-cell grid")
    rows = []
    for i, sample in enumerate(samples):
        vecs = {w: LikelihoodVector(probs[w][i] / probs[w][i].sum(), w)
                for w in needed}
        fused = _fuse_one(mode, vecs, grid, params)
        label, x, y = decide(fused, grid)
        rows.append(EstimateRow(i, sample.true_x, sample.true_y, x, y, label,
                                "fallback" if fused.flagged else ""))
    return rows


def localize_samples(samples, grid: CellGrid, models: dict, mode: str,
                     params: BaselineParams = BaselineParams()) -> list[EstimateRow]:
    """Run the chosen fusion mode over a sample list."""
    if mode not in FUSION_MODES:
        raise ValueError(f"unknown fusion mode {mode!r}")
    needed = MODE_MODELS[mode]
    missing = [w for w in needed if w not in models]
    if missing:
        raise ValueError(f"fusion mode {mode!r} requires the {missing[0]} model checkpoint")
    probs = model_likelihoods({w: models[w] for w in needed}, samples)
    return localize_from_probs(probs, samples, grid, mode, params)


# --- estimates CSV ----------------------------------------------------------

ESTIMATES_HEADER = "index,truth_x,truth_y,est_x,est_y,est_label,flags"


def write_estimates(rows, path):
    lines = [ESTIMATES_HEADER]
    for r in rows:
        lines.append(f"{r.index},{r.truth_x:.6f},{r.truth_y:.6f},"
                     f"{r.est_x:.6f},{r.est_y:.6f},{r.est_label},{r.flags}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_estimates(path) -> list[EstimateRow]:
    rows = []
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty estimates file")
    if lines[0] != ESTIMATES_HEADER:
        raise ValueError(f"{path}: line 1: bad header (expected {ESTIMATES_HEADER!r})")
    if len(lines) == 1:
        raise ValueError(f"{path}: no estimate rows")
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 7:
            raise ValueError(f"{path}: line {lineno}: expected 7 fields, got {len(parts)}")
        try:
            rows.append(EstimateRow(int(parts[0]), float(parts[1]), float(parts[2]),
                                    float(parts[3]), float(parts[4]), int(parts[5]),
                                    parts[6]))
        except ValueError as exc:
            raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return rows


def estimates_arrays(rows):
    """(truths, estimates) as (n, 2) arrays."""
    truths = np.array([[r.truth_x, r.truth_y] for r in rows])
    estimates = np.array([[r.est_x, r.est_y] for r in rows])
    return truths, estimates
