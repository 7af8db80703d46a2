"""Default desk-scale benchmark: config, end-to-end runner, aggregate checks.

The benchmark world is a 5x5 grid of 2 m cells (10x10 m map), 8 access
points around the perimeter, and 4 visually aliased cell pairs, one of
them far apart. WiFi carries position through AP audibility (censoring)
patterns, so it is coarse but bounded; vision is sharp except between
aliased twins, where it fails catastrophically. Fusion should keep the
sharpness and kill the catastrophes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import DriftConfig, GeneratorConfig, generate_dataset, load_samples
from .evaluate import EvalReport, compute_metrics
from .pipeline import (
    DEFAULT_TRAIN_PARAMS,
    BaselineParams,
    estimates_arrays,
    localize_from_probs,
    model_likelihoods,
    train_classifier,
    training_accuracy,
)
from .simulate import ApConfig, CollectionPlan, SceneConfig

GRID_ROWS = 5
GRID_COLS = 5
CELL_SIZE_M = 2.0

# row-major labels on the 5x5 grid; pair (6, 9) spans 6 m (3 cell widths),
# the rest 4 m, so visual stays sharp overall but fails big when it fails
ALIASING_PAIRS = ((6, 9), (1, 11), (13, 23), (5, 7))

# Each AP's censoring radius (where mean RSSI hits the -95 dBm sensitivity)
# is set via tx = -95 + 10*eta*log10(r). Diversified radii partition the map
# into audibility-mask regions, which is what carries position through the
# column standardization of the WiFi features.
_AP_SPOTS = [
    ("ap_sw", (0.0, 0.0), 11.0),
    ("ap_se", (10.0, 0.0), 7.3),
    ("ap_ne", (10.0, 10.0), 11.0),
    ("ap_nw", (0.0, 10.0), 7.3),
    ("ap_s", (5.0, 0.0), 4.8),
    ("ap_e", (10.0, 5.0), 6.0),
    ("ap_n", (5.0, 10.0), 4.8),
    ("ap_w", (0.0, 5.0), 6.0),
]

SHADOWING_SIGMA_DB = 1.5
PATH_LOSS_EXPONENT = 2.2

# desk-scale collection: 12 RSSI groups and 40 photos per position
PLAN = CollectionPlan(rssi_per_position=120, photos_per_position=40,
                      rssi_group_size=10, photos_per_group=4, rotation_step_deg=9.0)

WIFI_NATIVE_SIZE = 10    # max(M, K) on this benchmark

TRAIN_PARAMS = {
    "wifi": dict(input_size=WIFI_NATIVE_SIZE, **DEFAULT_TRAIN_PARAMS["wifi"]),
    "visual": dict(DEFAULT_TRAIN_PARAMS["visual"]),
    "joint": dict(DEFAULT_TRAIN_PARAMS["joint"]),
}

BENCHMARK_MODES = ("wifi", "visual", "joint", "hadamard", "double-layer")
GAMMA_SMALL = 0.5
GAMMA_LARGE = 0.99


def default_benchmark_config(seed: int = 0) -> GeneratorConfig:
    """The shipped default benchmark world at a given seed.

    The seed drives both the collection noise and the texture family, so
    different seeds are genuinely different environments with the same
    geometry, AP placement, and aliasing structure.
    """
    n_cells = GRID_ROWS * GRID_COLS
    return GeneratorConfig(
        seed=seed,
        grid_rows=GRID_ROWS, grid_cols=GRID_COLS,
        cell_width=CELL_SIZE_M, cell_height=CELL_SIZE_M, origin=(0.0, 0.0),
        aps=tuple(ApConfig(name, pos,
                           -95.0 + 10.0 * PATH_LOSS_EXPONENT * math.log10(radius),
                           PATH_LOSS_EXPONENT, SHADOWING_SIGMA_DB)
                  for name, pos, radius in _AP_SPOTS),
        scene=SceneConfig.build(n_cells, ALIASING_PAIRS, base_seed=1000 + seed,
                                noise_sigma=0.05, image_size=58,
                                heading_step_deg=PLAN.rotation_step_deg),
        plan=PLAN,
        drift=DriftConfig(),
        association="diagonal",
    )


@dataclass
class BenchmarkRun:
    seed: int
    reports: dict                     # mode -> EvalReport
    rows: dict                        # mode -> list[EstimateRow]
    train_accuracy: dict              # which -> float
    true_labels: list = field(default_factory=list)   # per test sample, in row order
    cell_width: float = CELL_SIZE_M
    map_diameter: float = 0.0
    aliasing_pairs: tuple = ALIASING_PAIRS


def run_benchmark(seed: int, work_dir, extra_modes: dict | None = None,
                  progress=None) -> BenchmarkRun:
    """Generate, train, localize, and evaluate one benchmark seed.

    extra_modes maps a report label to (fusion_mode, BaselineParams) for
    baseline variants beyond the five stock modes.
    """
    def say(msg):
        if progress:
            progress(f"[seed {seed}] {msg}")

    work = Path(work_dir)
    cfg_train = default_benchmark_config(seed)
    cfg_test = replace(cfg_train, seed=seed + 500)
    say("generating train/test datasets")
    train_dir = generate_dataset(cfg_train, work / f"train_{seed}")
    test_dir = generate_dataset(cfg_test, work / f"test_{seed}")
    train_samples, grid, manifest = load_samples(train_dir)
    test_samples, _, _ = load_samples(test_dir)
    image_size = manifest["image_size"]
    s = manifest["s"]

    models = {}
    train_acc = {}
    for which in ("wifi", "visual", "joint"):
        say(f"training the {which} classifier")
        models[which] = train_classifier(
            train_samples, which, grid.n_cells, image_size, s,
            seed=seed, **TRAIN_PARAMS[which])
        train_acc[which] = training_accuracy(models[which], train_samples, which)
        say(f"{which} train accuracy {train_acc[which]:.3f}")

    probs = model_likelihoods(models, test_samples)
    mode_specs = {mode: (mode, BaselineParams()) for mode in BENCHMARK_MODES}
    mode_specs.update(extra_modes or {})
    reports, rows_by_mode = {}, {}
    for label, (mode, params) in mode_specs.items():
        rows = localize_from_probs(probs, test_samples, grid, mode, params)
        truths, estimates = estimates_arrays(rows)
        reports[label] = compute_metrics(estimates, truths, label)
        rows_by_mode[label] = rows
    say("localization done")
    return BenchmarkRun(seed, reports, rows_by_mode, train_acc,
                        [smp.cell_label for smp in test_samples],
                        CELL_SIZE_M, grid.diameter(), ALIASING_PAIRS)


def standard_extra_modes(n_cells: int = GRID_ROWS * GRID_COLS) -> dict:
    """The baseline variants the acceptance comparison needs."""
    return {
        f"prob-thresh-{GAMMA_SMALL}": ("prob-thresh",
                                       BaselineParams(probability_threshold_gamma=GAMMA_SMALL)),
        f"prob-thresh-{GAMMA_LARGE}": ("prob-thresh",
                                       BaselineParams(probability_threshold_gamma=GAMMA_LARGE)),
        "top-1": ("topk", BaselineParams(top_k=1)),
        "dist-thresh-4m": ("dist-thresh", BaselineParams(distance_threshold_d=4.0)),
    }


def aliasing_confusion(run: BenchmarkRun, mode: str = "visual"):
    """(twin-confusion rate on aliased cells, misclassification rate elsewhere)."""
    twin_of = {}
    for a, b in run.aliasing_pairs:
        twin_of[a] = b
        twin_of[b] = a
    aliased_total = aliased_twin_errors = 0
    plain_total = plain_errors = 0
    for row, true_label in zip(run.rows[mode], run.true_labels):
        if true_label in twin_of:
            aliased_total += 1
            if row.est_label == twin_of[true_label]:
                aliased_twin_errors += 1
        else:
            plain_total += 1
            if row.est_label != true_label:
                plain_errors += 1
    return (aliased_twin_errors / max(aliased_total, 1),
            plain_errors / max(plain_total, 1))
