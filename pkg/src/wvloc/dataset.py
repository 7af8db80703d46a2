"""Dataset directory format and the generator configuration that produces it.

Layout:
    manifest.json                  grid geometry, protocol sizes, seed, AP list
    cells/<label>/rssi_<g>.csv     M rows x K columns, raw dBm, no header
    cells/<label>/img_<g>_<s>.pgm  binary 8-bit PGM views, one file per group slot

Generation is bit-deterministic: a (config, seed) pair always produces a
byte-identical directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import CellGrid, ImageGroup, RssiBlock, Sample, label_to_centre
from .simulate import (
    ApConfig,
    CollectionPlan,
    SceneConfig,
    associate,
    collect_position,
    derive_rng,
    group_rssi,
    photo_group_indices,
)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DriftConfig:
    """Optional test-time environment perturbation (the '3 months later' knob)."""

    enabled: bool = False
    ap_power_offset_db: float = 0.0
    texture_brightness_offset: float = 0.0


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int
    grid_rows: int
    grid_cols: int
    cell_width: float
    cell_height: float
    origin: tuple[float, float]
    aps: tuple[ApConfig, ...]
    scene: SceneConfig
    plan: CollectionPlan
    drift: DriftConfig = DriftConfig()
    association: str = "diagonal"

    def __post_init__(self):
        if self.association not in ("diagonal", "full"):
            raise ValueError(f"association must be diagonal or full, got {self.association!r}")
        if len(self.aps) < 2:
            raise ValueError("need at least 2 access points")
        n = self.grid_rows * self.grid_cols
        if len(self.scene.texture_seeds) != n:
            raise ValueError(f"scene has {len(self.scene.texture_seeds)} texture seeds for {n} cells")

    def build_grid(self) -> CellGrid:
        return CellGrid.regular(self.grid_rows, self.grid_cols,
                                self.cell_width, self.cell_height, self.origin)

    def effective_aps(self) -> tuple[ApConfig, ...]:
        """AP list with drift applied when enabled."""
        if not self.drift.enabled or self.drift.ap_power_offset_db == 0.0:
            return self.aps
        return tuple(ApConfig(ap.id, ap.position,
                              ap.tx_power_dbm + self.drift.ap_power_offset_db,
                              ap.path_loss_exponent, ap.shadowing_sigma_db)
                     for ap in self.aps)

    def effective_scene(self) -> SceneConfig:
        if not self.drift.enabled or self.drift.texture_brightness_offset == 0.0:
            return self.scene
        return SceneConfig(self.scene.texture_seeds, self.scene.aliasing_pairs,
                           self.scene.noise_sigma, self.scene.image_size,
                           self.scene.heading_step_deg,
                           self.drift.texture_brightness_offset)

    @property
    def ap_ids(self) -> tuple[str, ...]:
        return tuple(ap.id for ap in self.aps)


def config_to_dict(cfg: GeneratorConfig) -> dict:
    return {
        "seed": cfg.seed,
        "association": cfg.association,
        "grid": {"rows": cfg.grid_rows, "cols": cfg.grid_cols,
                 "cell_width": cfg.cell_width, "cell_height": cfg.cell_height,
                 "origin": list(cfg.origin)},
        "aps": [{"id": ap.id, "position": list(ap.position),
                 "tx_power_dbm": ap.tx_power_dbm,
                 "path_loss_exponent": ap.path_loss_exponent,
                 "shadowing_sigma_db": ap.shadowing_sigma_db} for ap in cfg.aps],
        "scene": {"texture_seeds": list(cfg.scene.texture_seeds),
                  "aliasing_pairs": [list(p) for p in cfg.scene.aliasing_pairs],
                  "noise_sigma": cfg.scene.noise_sigma,
                  "image_size": cfg.scene.image_size,
                  "heading_step_deg": cfg.scene.heading_step_deg},
        "plan": {"rssi_per_position": cfg.plan.rssi_per_position,
                 "photos_per_position": cfg.plan.photos_per_position,
                 "rssi_group_size": cfg.plan.rssi_group_size,
                 "photos_per_group": cfg.plan.photos_per_group,
                 "rotation_step_deg": cfg.plan.rotation_step_deg},
        "drift": {"enabled": cfg.drift.enabled,
                  "ap_power_offset_db": cfg.drift.ap_power_offset_db,
                  "texture_brightness_offset": cfg.drift.texture_brightness_offset},
    }


def config_from_dict(d: dict) -> GeneratorConfig:
    try:
        grid = d["grid"]
        scene_d = d["scene"]
        plan_d = d["plan"]
        aps = tuple(ApConfig(a["id"], tuple(a["position"]), a["tx_power_dbm"],
                             a.get("path_loss_exponent", 2.2),
                             a.get("shadowing_sigma_db", 0.0)) for a in d["aps"])
        scene = SceneConfig(tuple(scene_d["texture_seeds"]),
                            tuple(tuple(p) for p in scene_d.get("aliasing_pairs", [])),
                            scene_d.get("noise_sigma", 0.05),
                            scene_d.get("image_size", 58),
                            scene_d.get("heading_step_deg",
                                        plan_d.get("rotation_step_deg", 3.6)))
        plan = CollectionPlan(plan_d["rssi_per_position"], plan_d["photos_per_position"],
                              plan_d["rssi_group_size"], plan_d["photos_per_group"],
                              plan_d["rotation_step_deg"])
        drift_d = d.get("drift", {})
        drift = DriftConfig(drift_d.get("enabled", False),
                            drift_d.get("ap_power_offset_db", 0.0),
                            drift_d.get("texture_brightness_offset", 0.0))
        return GeneratorConfig(int(d["seed"]), grid["rows"], grid["cols"],
                               grid["cell_width"], grid["cell_height"],
                               tuple(grid.get("origin", (0.0, 0.0))),
                               aps, scene, plan, drift,
                               d.get("association", "diagonal"))
    except KeyError as exc:
        raise ValueError(f"generator config missing field {exc.args[0]!r}") from exc


def load_generator_config(path) -> GeneratorConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


def save_generator_config(cfg: GeneratorConfig, path):
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


# --- PGM --------------------------------------------------------------------

def write_pgm(path, img: np.ndarray):
    """Binary 8-bit PGM; pixels quantized from [0, 1]."""
    data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:   # magic, width, height, maxval
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return data.reshape(h, w).astype(float) / maxval


# --- dataset directory -------------------------------------------------------

def cell_dir(root, label: int) -> Path:
    return Path(root) / "cells" / str(label)


def generate_dataset(cfg: GeneratorConfig, out_dir) -> Path:
    """Write the full dataset directory for a generator config."""
    out = Path(out_dir)
    grid = cfg.build_grid()
    aps = cfg.effective_aps()
    scene = cfg.effective_scene()
    plan = cfg.plan
    m = plan.rssi_group_size
    for label in range(grid.n_cells):
        rng = derive_rng(cfg.seed, label)
        rssi_pool, photos, _ = collect_position(label, plan, aps, scene, grid, rng)
        cdir = cell_dir(out, label)
        cdir.mkdir(parents=True, exist_ok=True)
        for g in range(plan.n_rssi_groups):
            np.savetxt(cdir / f"rssi_{g}.csv", rssi_pool[g * m:(g + 1) * m],
                       fmt="%.6f", delimiter=",")
        for g, idx in enumerate(photo_group_indices(photos.shape[0], plan.photos_per_group)):
            for s, p in enumerate(idx):
                write_pgm(cdir / f"img_{g}_{s}.pgm", photos[p])
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_cells": grid.n_cells,
        "m": plan.rssi_group_size,
        "k": len(aps),
        "s": plan.photos_per_group,
        "n_rssi_groups": plan.n_rssi_groups,
        "n_photo_groups": plan.n_photo_groups,
        "image_size": scene.image_size,
        "seed": cfg.seed,
        "ap_ids": list(cfg.ap_ids),
        "grid": {
            "cells": [{"label": i,
                       "centre": [float(grid.centres[i, 0]), float(grid.centres[i, 1])],
                       "half_size": [float(grid.half_sizes[i, 0]), float(grid.half_sizes[i, 1])]}
                      for i in range(grid.n_cells)],
        },
        "generator_config": config_to_dict(cfg),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"{dataset_dir}: no manifest.json (not a dataset directory)")
    return json.loads(path.read_text())


def grid_from_manifest(manifest: dict) -> CellGrid:
    cells = manifest["grid"]["cells"]
    centres = np.array([c["centre"] for c in cells])
    half = np.array([c["half_size"] for c in cells])
    return CellGrid(centres, half)


def _group_headings(manifest: dict, g: int) -> tuple[float, ...]:
    cfg = manifest["generator_config"]["plan"]
    spacing = cfg["photos_per_position"] // cfg["photos_per_group"]
    step = cfg["rotation_step_deg"]
    return tuple(((g + i * spacing) % cfg["photos_per_position"]) * step
                 for i in range(cfg["photos_per_group"]))


def load_cell_groups(dataset_dir, manifest: dict, label: int):
    """(rssi_groups, image_groups) stored for one cell."""
    cdir = cell_dir(dataset_dir, label)
    ap_ids = tuple(manifest["ap_ids"])
    rssi_groups = []
    for g in range(manifest["n_rssi_groups"]):
        values = np.loadtxt(cdir / f"rssi_{g}.csv", delimiter=",", ndmin=2)
        rssi_groups.append(RssiBlock(values, ap_ids))
    image_groups = []
    for g in range(manifest["n_photo_groups"]):
        imgs = np.stack([read_pgm(cdir / f"img_{g}_{s}.pgm")
                         for s in range(manifest["s"])])
        image_groups.append(ImageGroup(imgs, _group_headings(manifest, g)))
    return rssi_groups, image_groups


def load_samples(dataset_dir, mode: str | None = None) -> tuple[list[Sample], CellGrid, dict]:
    """All samples in a dataset under the given (or configured) association mode."""
    manifest = load_manifest(dataset_dir)
    mode = mode or manifest["generator_config"]["association"]
    grid = grid_from_manifest(manifest)
    samples = []
    for label in range(manifest["n_cells"]):
        rssi_groups, image_groups = load_cell_groups(dataset_dir, manifest, label)
        samples.extend(associate(rssi_groups, image_groups, mode, label,
                                 label_to_centre(grid, label)))
    return samples, grid, manifest


def validate_dataset(dataset_dir) -> list[str]:
    """Structural consistency check; returns a list of problems (empty = valid)."""
    problems = []
    try:
        manifest = load_manifest(dataset_dir)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        return [str(exc)]
    try:
        grid = grid_from_manifest(manifest)
    except (KeyError, ValueError) as exc:
        return [f"bad grid in manifest: {exc}"]
    if manifest.get("format_version") != FORMAT_VERSION:
        problems.append(f"unsupported format_version {manifest.get('format_version')}")
    m, k, s = manifest["m"], manifest["k"], manifest["s"]
    size = manifest["image_size"]
    for label in range(manifest["n_cells"]):
        cdir = cell_dir(dataset_dir, label)
        if not cdir.is_dir():
            problems.append(f"missing cell directory {cdir}")
            continue
        for g in range(manifest["n_rssi_groups"]):
            path = cdir / f"rssi_{g}.csv"
            if not path.exists():
                problems.append(f"missing {path}")
                continue
            values = np.loadtxt(path, delimiter=",", ndmin=2)
            if values.shape != (m, k):
                problems.append(f"{path}: shape {values.shape}, expected {(m, k)}")
            elif not np.all(np.isfinite(values)):
                problems.append(f"{path}: non-finite RSSI values")
        for g in range(manifest["n_photo_groups"]):
            for snum in range(s):
                path = cdir / f"img_{g}_{snum}.pgm"
                if not path.exists():
                    problems.append(f"missing {path}")
                    continue
                img = read_pgm(path)
                if img.shape != (size, size):
                    problems.append(f"{path}: shape {img.shape}, expected {(size, size)}")
    if len(grid.centres) != manifest["n_cells"]:
        problems.append("grid cell count disagrees with n_cells")
    return problems
