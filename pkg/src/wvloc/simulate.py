"""Deterministic desk-scale WiFi-Visual data simulator.

RSSI follows a log-distance path-loss model with lognormal shadowing;
readings below the receiver sensitivity are censored to a missing-value
sentinel. Camera views are procedural low-frequency textures keyed by
(cell texture seed, quantized heading), so two cells sharing a texture
seed are visually indistinguishable: the engineered aliasing that makes
visual-only localization fail catastrophically between distant cells.

All randomness flows through numpy Generators seeded from
(dataset seed, cell label, stream), so datasets regenerate identically
regardless of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CellGrid, ImageGroup, RssiBlock, Sample, label_to_centre, point_to_label
from .wifi_features import MISSING_SENTINEL

SENSITIVITY_DBM = -95.0   # readings below this are censored to MISSING_SENTINEL
MIN_DISTANCE_M = 0.1      # path-loss distance clamp

STREAM_RSSI = 0
STREAM_PHOTO = 1
STREAM_TRAJECTORY = 2


@dataclass(frozen=True)
class ApConfig:
    id: str
    position: tuple[float, float]
    tx_power_dbm: float
    path_loss_exponent: float = 2.2
    shadowing_sigma_db: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        if not 1.5 <= self.path_loss_exponent <= 6.0:
            raise ValueError(f"path_loss_exponent {self.path_loss_exponent} outside [1.5, 6]")
        if not 0.0 <= self.shadowing_sigma_db <= 12.0:
            raise ValueError(f"shadowing_sigma_db {self.shadowing_sigma_db} outside [0, 12]")


@dataclass(frozen=True)
class SceneConfig:
    """Per-cell texture seeds; aliasing pairs share one seed."""

    texture_seeds: tuple[int, ...]            # index = cell label
    aliasing_pairs: tuple[tuple[int, int], ...] = ()
    noise_sigma: float = 0.05
    image_size: int = 58
    heading_step_deg: float = 3.6             # texture angular resolution
    brightness_offset: float = 0.0            # environment-drift knob

    def __post_init__(self):
        object.__setattr__(self, "texture_seeds", tuple(int(s) for s in self.texture_seeds))
        object.__setattr__(self, "aliasing_pairs",
                           tuple((int(a), int(b)) for a, b in self.aliasing_pairs))
        for a, b in self.aliasing_pairs:
            if a == b:
                raise ValueError("aliasing pair must name two distinct cells")
            if self.texture_seeds[a] != self.texture_seeds[b]:
                raise ValueError(f"aliased cells {a} and {b} must share a texture seed")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @classmethod
    def build(cls, n_cells: int, aliasing_pairs=(), base_seed: int = 0, **kw) -> "SceneConfig":
        """Distinct seed per cell, then collapse each aliasing pair onto one seed."""
        seeds = [base_seed * 100003 + label for label in range(n_cells)]
        for a, b in aliasing_pairs:
            seeds[b] = seeds[a]
        return cls(tuple(seeds), tuple(aliasing_pairs), **kw)

    @property
    def aliased_labels(self) -> frozenset:
        return frozenset(l for pair in self.aliasing_pairs for l in pair)


@dataclass(frozen=True)
class CollectionPlan:
    """The per-position collection protocol: sample counts, grouping, rotation."""

    rssi_per_position: int = 1000
    photos_per_position: int = 100
    rssi_group_size: int = 10      # M
    photos_per_group: int = 4      # S
    rotation_step_deg: float = 3.6

    def __post_init__(self):
        if self.rssi_per_position % self.rssi_group_size != 0:
            raise ValueError("rssi_per_position must be divisible by rssi_group_size")
        if self.photos_per_position % self.photos_per_group != 0:
            raise ValueError("photos_per_group must divide photos_per_position")
        if abs(self.photos_per_position * self.rotation_step_deg - 360.0) > 1e-6:
            raise ValueError("photos_per_position * rotation_step_deg must cover 360 degrees")

    @property
    def n_rssi_groups(self) -> int:
        return self.rssi_per_position // self.rssi_group_size

    @property
    def n_photo_groups(self) -> int:
        # every rotational offset starts a group, so groups overlap (wrap around)
        return self.photos_per_position


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, keys)])


# --- WiFi propagation -------------------------------------------------------

def simulate_rssi(pos, aps, rng) -> np.ndarray:
    """One K-vector of RSSI dBm at pos: log-distance path loss + shadowing + censoring."""
    x, y = pos
    out = np.empty(len(aps))
    for i, ap in enumerate(aps):
        dist = max(np.hypot(x - ap.position[0], y - ap.position[1]), MIN_DISTANCE_M)
        rssi = ap.tx_power_dbm - 10.0 * ap.path_loss_exponent * np.log10(dist)
        if ap.shadowing_sigma_db > 0:
            rssi += rng.normal(0.0, ap.shadowing_sigma_db)
        out[i] = rssi if rssi >= SENSITIVITY_DBM else MISSING_SENTINEL
    return out


# --- camera views ------------------------------------------------------------

def _texture(seed: int, heading_q: int, size: int) -> np.ndarray:
    """Smooth procedural texture: low-frequency random Fourier synthesis in [0, 1]."""
    rng = derive_rng(seed, heading_q)
    band = 6
    coef = np.zeros((size, size), dtype=complex)
    coef[:band, :band] = rng.normal(size=(band, band)) + 1j * rng.normal(size=(band, band))
    img = np.fft.ifft2(coef).real
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def render_view(pos, heading: float, scene: SceneConfig, grid: CellGrid,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Grayscale view at pos/heading: the cell texture plus optional pixel noise."""
    label = point_to_label(grid, pos[0], pos[1])
    n_steps = int(round(360.0 / scene.heading_step_deg))
    heading_q = int(round(heading / scene.heading_step_deg)) % n_steps
    img = _texture(scene.texture_seeds[label], heading_q, scene.image_size)
    if scene.brightness_offset:
        img = img + scene.brightness_offset
    if rng is not None and scene.noise_sigma > 0:
        img = img + rng.normal(0.0, scene.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0)


# --- collection protocol -----------------------------------------------------

def collect_position(label: int, plan: CollectionPlan, aps, scene: SceneConfig,
                     grid: CellGrid, rng: np.random.Generator):
    """Raw pools for one position: (R, K) RSSI and (P, H, W) photos with headings."""
    pos = label_to_centre(grid, label)
    rssi = np.stack([simulate_rssi(pos, aps, rng) for _ in range(plan.rssi_per_position)])
    headings = np.arange(plan.photos_per_position) * plan.rotation_step_deg
    photos = np.stack([render_view(pos, h, scene, grid, rng) for h in headings])
    return rssi, photos, headings


def group_rssi(pool: np.ndarray, ap_ids, group_size: int) -> list[RssiBlock]:
    """Consecutive disjoint chunks of group_size rows."""
    n_groups = pool.shape[0] // group_size
    return [RssiBlock(pool[g * group_size:(g + 1) * group_size], ap_ids)
            for g in range(n_groups)]


def photo_group_indices(n_photos: int, group_size: int) -> np.ndarray:
    """(n_photos, group_size) photo indices: group g holds uniformly spaced
    shots starting at rotational offset g, wrapping around the full circle."""
    spacing = n_photos // group_size
    g = np.arange(n_photos)[:, None]
    i = np.arange(group_size)[None, :]
    return (g + i * spacing) % n_photos


def group_photos(photos: np.ndarray, headings: np.ndarray,
                 group_size: int) -> list[ImageGroup]:
    groups = []
    for idx in photo_group_indices(photos.shape[0], group_size):
        groups.append(ImageGroup(photos[idx], tuple(headings[idx])))
    return groups


def associate(rssi_groups, photo_groups, mode: str, cell_label: int,
              true_pos: tuple[float, float]) -> list[Sample]:
    """Pair WiFi groups with photo groups: 'full' = all combinations, 'diagonal' = index-matched."""
    x, y = true_pos
    if mode == "full":
        pairs = [(r, p) for r in rssi_groups for p in photo_groups]
    elif mode == "diagonal":
        pairs = list(zip(rssi_groups, photo_groups))
    else:
        raise ValueError(f"unknown association mode {mode!r}")
    return [Sample(cell_label, r, p, x, y) for r, p in pairs]


# --- trajectories ------------------------------------------------------------

def generate_trajectory(grid: CellGrid, waypoints, step: float):
    """Piecewise-linear path sampled every `step` meters; returns (x, y, label) triples."""
    if step <= 0:
        raise ValueError("step must be positive")
    waypoints = [(float(x), float(y)) for x, y in waypoints]
    if not waypoints:
        raise ValueError("need at least one waypoint")
    for x, y in waypoints:
        point_to_label(grid, x, y)   # raises OutOfMapError if outside
    pts = [waypoints[0]]
    carry = step
    for (x0, y0), (x1, y1) in zip(waypoints, waypoints[1:]):
        seg = np.hypot(x1 - x0, y1 - y0)
        if seg == 0:
            continue
        t = carry
        while t <= seg + 1e-9:
            frac = t / seg
            pts.append((x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)))
            t += step
        carry = t - seg
    return [(x, y, point_to_label(grid, x, y)) for x, y in pts]


def simulate_request(pos, heading_offset_q: int, plan: CollectionPlan, aps,
                     scene: SceneConfig, grid: CellGrid, rng) -> tuple[RssiBlock, ImageGroup]:
    """One localization request: M RSSI samples and S uniformly spaced views."""
    ap_ids = tuple(ap.id for ap in aps)
    rssi = RssiBlock(np.stack([simulate_rssi(pos, aps, rng)
                               for _ in range(plan.rssi_group_size)]), ap_ids)
    angle_gap = 360.0 / plan.photos_per_group
    headings = tuple(heading_offset_q * plan.rotation_step_deg + i * angle_gap
                     for i in range(plan.photos_per_group))
    images = ImageGroup(np.stack([render_view(pos, h, scene, grid, rng)
                                  for h in headings]), headings)
    return rssi, images
