"""Localization metrics (RMSE / MAE / STD), CDF curves, and comparison artifacts.

Metric definitions follow the benchmark conventions used throughout:
RMSE is the root of the mean squared Euclidean error; MAE is the mean of
|dx| + |dy| (coordinate-wise L1, NOT mean Euclidean error -- beware when
comparing against other toolkits); STD is the standard deviation of the
per-point Euclidean errors around their mean.

Plot artifacts are hand-emitted SVG: textual, diffable, byte-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CDF_LEVELS = np.round(np.arange(0.0, 8.01, 0.1), 10)

_MAE_NOTE = ("# MAE is coordinate-wise L1: mean(|dx| + |dy|); "
             "it is not the mean Euclidean error")

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22")


@dataclass(frozen=True)
class EvalReport:
    mode_label: str
    per_point_errors: np.ndarray            # Euclidean error per test point
    rmse: float
    mae: float
    std: float
    cdf: tuple                               # ((level, fraction), ...)

    def __post_init__(self):
        errors = np.asarray(self.per_point_errors, dtype=float)
        errors.setflags(write=False)
        object.__setattr__(self, "per_point_errors", errors)
        object.__setattr__(self, "cdf", tuple((float(l), float(f)) for l, f in self.cdf))
        if self.rmse < 0 or self.std < 0 or np.any(errors < 0):
            raise ValueError("errors and spread metrics must be non-negative")
        fracs = [f for _, f in self.cdf]
        if fracs and (np.any(np.diff(fracs) < 0) or fracs[0] < 0 or fracs[-1] > 1):
            raise ValueError("CDF must be non-decreasing within [0, 1]")


def compute_cdf(errors, levels) -> list[tuple[float, float]]:
    """Fraction of errors <= level, per level (levels sorted ascending)."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("empty error list")
    return [(float(lv), float(np.mean(errors <= lv))) for lv in levels]


def compute_metrics(estimates, truths, mode_label: str = "",
                    levels=DEFAULT_CDF_LEVELS) -> EvalReport:
    """Full evaluation report for matched (n, 2) estimate/truth arrays."""
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.size == 0:
        raise ValueError("empty estimate set")
    if estimates.shape != truths.shape or estimates.ndim != 2 or estimates.shape[1] != 2:
        raise ValueError(f"shape mismatch: {estimates.shape} vs {truths.shape}")
    delta = estimates - truths
    errors = np.hypot(delta[:, 0], delta[:, 1])
    rmse = float(np.sqrt(np.mean(np.sum(delta ** 2, axis=1))))
    mae = float(np.mean(np.abs(delta).sum(axis=1)))
    std = float(np.sqrt(np.mean((errors - errors.mean()) ** 2)))
    return EvalReport(mode_label, errors, rmse, mae, std,
                      tuple(compute_cdf(errors, levels)))


def percentile_error(report: EvalReport, q: float) -> float:
    """q-th percentile of the per-point Euclidean errors."""
    return float(np.percentile(report.per_point_errors, q))


# --- CSV artifacts ----------------------------------------------------------

def report_table_csv(reports) -> str:
    """Mode metrics table, rows sorted by RMSE ascending."""
    lines = [_MAE_NOTE, "mode,rmse_m,mae_m,std_m"]
    for r in sorted(reports, key=lambda r: (r.rmse, r.mode_label)):
        lines.append(f"{r.mode_label},{r.rmse:.6f},{r.mae:.6f},{r.std:.6f}")
    return "\n".join(lines) + "\n"


def cdf_table_csv(reports) -> str:
    reports = list(reports)
    header = "level_m," + ",".join(r.mode_label for r in reports)
    levels = [l for l, _ in reports[0].cdf]
    for r in reports:
        if [l for l, _ in r.cdf] != levels:
            raise ValueError("reports disagree on CDF levels")
    lines = [header]
    for i, lv in enumerate(levels):
        lines.append(f"{lv:.3f}," + ",".join(f"{r.cdf[i][1]:.6f}" for r in reports))
    return "\n".join(lines) + "\n"


# --- SVG emission -----------------------------------------------------------

def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def _text(x, y, s, size=11, anchor="middle", color="#000"):
    return (f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{color}">{s}</text>\n')


def _polyline(points, color, width=1.5, dash=""):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>\n'


def comparison_svg(reports) -> str:
    """Two panels: grouped metric bars (RMSE/MAE/STD) and the CDF overlay."""
    reports = list(reports)
    w, h = 880, 360
    out = [_svg_header(w, h)]
    # left panel: grouped bars
    x0, y0, pw, ph = 50, 30, 360, 270
    metrics = [("RMSE", [r.rmse for r in reports]),
               ("MAE", [r.mae for r in reports]),
               ("STD", [r.std for r in reports])]
    top = max(max(vals) for _, vals in metrics) or 1.0
    n = len(reports)
    group_w = pw / 3.0
    bar_w = group_w / (n + 1)
    out.append(f'<line x1="{x0}" y1="{y0 + ph}" x2="{x0 + pw}" y2="{y0 + ph}" stroke="#000"/>\n')
    out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 + ph}" stroke="#000"/>\n')
    for gi, (name, vals) in enumerate(metrics):
        gx = x0 + gi * group_w
        for i, v in enumerate(vals):
            bh = ph * v / (1.1 * top)
            bx = gx + (i + 0.5) * bar_w
            out.append(f'<rect x="{bx:.2f}" y="{y0 + ph - bh:.2f}" width="{bar_w * 0.9:.2f}" '
                       f'height="{bh:.2f}" fill="{_PALETTE[i % len(_PALETTE)]}"/>\n')
            out.append(_text(bx + bar_w * 0.45, y0 + ph - bh - 3, f"{v:.2f}", size=8))
        out.append(_text(gx + group_w / 2, y0 + ph + 16, name))
    out.append(_text(x0 - 35, y0 + ph / 2, "m", size=10, anchor="start"))
    # right panel: CDF overlay
    cx0, cy0, cw, ch = 480, 30, 360, 270
    out.append(f'<line x1="{cx0}" y1="{cy0 + ch}" x2="{cx0 + cw}" y2="{cy0 + ch}" stroke="#000"/>\n')
    out.append(f'<line x1="{cx0}" y1="{cy0}" x2="{cx0}" y2="{cy0 + ch}" stroke="#000"/>\n')
    max_level = max(l for r in reports for l, _ in r.cdf) or 1.0
    for i, r in enumerate(reports):
        pts = [(cx0 + cw * l / max_level, cy0 + ch * (1.0 - f)) for l, f in r.cdf]
        out.append(_polyline(pts, _PALETTE[i % len(_PALETTE)]))
        out.append(_text(cx0 + cw - 6, cy0 + 14 + 13 * i, r.mode_label, size=10,
                         anchor="end", color=_PALETTE[i % len(_PALETTE)]))
    for frac in (0.0, 0.5, 0.9, 1.0):
        y = cy0 + ch * (1.0 - frac)
        out.append(_text(cx0 - 6, y + 3, f"{frac:.1f}", size=9, anchor="end"))
        out.append(f'<line x1="{cx0}" y1="{y:.1f}" x2="{cx0 + cw}" y2="{y:.1f}" '
                   f'stroke="#ddd" stroke-width="0.5"/>\n')
    for lv in range(int(max_level) + 1):
        x = cx0 + cw * lv / max_level
        out.append(_text(x, cy0 + ch + 14, str(lv), size=9))
    out.append(_text(cx0 + cw / 2, cy0 + ch + 30, "error (m)", size=10))
    out.append(_text(cx0 + cw / 2, 18, "CDF of localization error", size=12))
    out.append(_text(x0 + pw / 2, 18, "RMSE / MAE / STD by mode", size=12))
    out.append("</svg>\n")
    return "".join(out)


def trajectory_svg(truths, estimates_by_mode, bounds) -> str:
    """Ground-truth polyline plus per-mode estimated points."""
    truths = np.asarray(truths, dtype=float)
    xmin, ymin, xmax, ymax = bounds
    w, h = 520, 520
    pad = 40

    def to_px(p):
        x = pad + (w - 2 * pad) * (p[0] - xmin) / max(xmax - xmin, 1e-9)
        y = h - pad - (h - 2 * pad) * (p[1] - ymin) / max(ymax - ymin, 1e-9)
        return x, y

    out = [_svg_header(w, h)]
    out.append(f'<rect x="{pad}" y="{pad}" width="{w - 2 * pad}" height="{h - 2 * pad}" '
               f'fill="none" stroke="#999"/>\n')
    out.append(_polyline([to_px(p) for p in truths], "#000", width=2.0))
    out.append(_text(w / 2, 20, "ground truth (line) vs estimates (points)", size=12))
    for i, (mode, est) in enumerate(sorted(estimates_by_mode.items())):
        color = _PALETTE[i % len(_PALETTE)]
        for p in np.asarray(est, dtype=float):
            x, y = to_px(p)
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}" '
                       f'fill-opacity="0.6"/>\n')
        out.append(_text(w - pad - 4, pad + 14 + 13 * i, mode, size=10,
                         anchor="end", color=color))
    out.append("</svg>\n")
    return "".join(out)


@dataclass(frozen=True)
class ComparisonArtifact:
    report_csv: str
    cdf_csv: str
    comparison_svg: str


def compare_modes(reports) -> ComparisonArtifact:
    """Comparison bundle across >= 2 evaluation reports."""
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("comparison needs at least 2 reports")
    return ComparisonArtifact(report_table_csv(reports), cdf_table_csv(reports),
                              comparison_svg(reports))
