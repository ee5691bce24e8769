"""PSNR / SSIM scoring and report aggregation.

PSNR is computed on all channels jointly with a single MSE; identical images
are capped at 100 dB so aggregates stay finite. SSIM follows the standard
single-scale estimator: luma input, 11x11 Gaussian window with sigma 1.5,
K1 = 0.01, K2 = 0.03, L = 255, averaged over the valid interior only (no
padding is invented at the borders).

Report CSV layout: header ``sequence,frame_index,skip_position,psnr_db,ssim``
with 6-decimal values, followed by ``# mean,<psnr>,<ssim>`` and
``# std,<psnr>,<ssim>`` comment rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .images import to_luma

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two 8-bit images."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(DYNAMIC_RANGE * DYNAMIC_RANGE / mse))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable Gaussian filtering, cropped to the valid interior."""
    r = len(kernel) // 2
    out = correlate1d(img, kernel, axis=0, mode="nearest")
    out = correlate1d(out, kernel, axis=1, mode="nearest")
    return out[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity between two 8-bit images."""
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    x = to_luma(a)
    y = to_luma(b)
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)

    mu_x = _windowed_mean(x, kernel)
    mu_y = _windowed_mean(y, kernel)
    var_x = _windowed_mean(x * x, kernel) - mu_x * mu_x
    var_y = _windowed_mean(y * y, kernel) - mu_y * mu_y
    cov = _windowed_mean(x * y, kernel) - mu_x * mu_y

    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class MetricRecord:
    """Scores for one reconstructed frame."""

    sequence: str
    frame_index: int
    skip_position: int
    psnr_db: float
    ssim: float


@dataclass(frozen=True)
class MetricReport:
    records: list[MetricRecord]
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float
    position_psnr: dict[int, float] = field(default_factory=dict)


def aggregate(records) -> MetricReport:
    """Mean and population standard deviation of both metrics, plus
    per-skip-position PSNR averages."""
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    p = np.array([r.psnr_db for r in records], dtype=np.float64)
    s = np.array([r.ssim for r in records], dtype=np.float64)

    positions = sorted({r.skip_position for r in records})
    position_psnr = {
        pos: float(np.mean([r.psnr_db for r in records if r.skip_position == pos]))
        for pos in positions
    }
    return MetricReport(
        records=records,
        psnr_mean=float(p.mean()),
        psnr_std=float(p.std()),
        ssim_mean=float(s.mean()),
        ssim_std=float(s.std()),
        position_psnr=position_psnr,
    )


def write_report_csv(report: MetricReport, path) -> None:
    with open(path, "w") as f:
        f.write("sequence,frame_index,skip_position,psnr_db,ssim\n")
        for r in report.records:
            f.write(
                f"{r.sequence},{r.frame_index},{r.skip_position},{r.psnr_db:.6f},{r.ssim:.6f}\n"
            )
        f.write(f"# mean,{report.psnr_mean:.6f},{report.ssim_mean:.6f}\n")
        f.write(f"# std,{report.psnr_std:.6f},{report.ssim_std:.6f}\n")


def format_summary(report: MetricReport, label: str) -> str:
    """One mean +/- std row in the benchmark-table layout."""
    return (
        f"{label:<24} PSNR {report.psnr_mean:6.2f}+/-{report.psnr_std:.2f}  "
        f"SSIM {report.ssim_mean:.3f}+/-{report.ssim_std:.3f}"
    )
