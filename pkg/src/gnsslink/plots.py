"""Figure rendering for CLI reports. All functions save PNG files."""
from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .analysis import Histogram, IntervalStats, PeriodOccupancy
from .ccr_array import TemporalProfile


def save_residual_histogram(hist: Histogram, window_ps: float, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(hist.centers_ps, hist.counts, width=hist.bin_width_ps, color="#1f77b4")
    ax.axvspan(-window_ps / 2, window_ps / 2, color="orange", alpha=0.25,
               label=f"signal window ({window_ps:.0f} ps)")
    ax.set_xlabel("residual (ps)")
    ax.set_ylabel("counts per bin")
    ax.set_title("Residuals, selected intervals")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_interval_rates(stats: list[IntervalStats], threshold_hz: float, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    t = np.array([s.k * s.tau_s for s in stats])
    r = np.array([s.r_det_hz for s in stats])
    sel = np.array([s.selected for s in stats])
    ax.plot(t, r, "o-", color="#1f77b4", ms=4, label="detection rate")
    if np.any(~sel):
        ax.plot(t[~sel], r[~sel], "x", color="red", ms=8, label="discarded")
    ax.axhline(threshold_hz, color="gray", ls="--", lw=1,
               label=f"threshold {threshold_hz:.0f} Hz")
    ax.set_xlabel("elapsed time (s)")
    ax.set_ylabel("$R_{det}$ (Hz)")
    ax.set_title("Per-interval detection rate")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_period_occupancy(occ: PeriodOccupancy, path) -> None:
    closed, open_out, open_in = occ.rates_hz()
    centers = occ.centers_ms
    width = occ.bin_edges_ms[1] - occ.bin_edges_ms[0]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(centers, closed, width=width, color="#ff7f0e", label="shutter closed")
    ax.bar(centers, open_out, width=width, bottom=closed, color="#2ca02c",
           label="open, before returns")
    ax.bar(centers, open_in, width=width, bottom=closed + open_out,
           color="#1f77b4", label="open, return window")
    ax.set_xlabel("time in protocol period (ms)")
    ax.set_ylabel("detection rate (Hz)")
    ax.set_title("Occupancy of the protocol period")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_temporal_profiles(
    profiles: dict[float, TemporalProfile], peaks: dict[float, float], path
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for deg, prof in sorted(profiles.items()):
        label = f"{deg:g} deg (peak-to-peak {peaks[deg]:.0f} ps)"
        ax.plot(prof.centers_ps, prof.densities, label=label)
    ax.set_xlabel("delay (ps)")
    ax.set_ylabel("density (1/ps)")
    ax.set_title("Array impulse response vs incidence angle")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_budget_vs_range(curves: dict[str, tuple[np.ndarray, np.ndarray]], path) -> None:
    """Down-link loss curves per model: ``{model: (range_m, loss_db)}``."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for model, (r_m, loss_db) in curves.items():
        ax.plot(r_m / 1e6, loss_db, label=model)
    ax.set_xlabel("slant range (1000 km)")
    ax.set_ylabel("down-link loss (dB)")
    ax.set_title("Down-link loss vs slant range")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_projection(baseline: dict, projected: dict, path) -> None:
    """Bar chart comparing baseline and projected rate/SNR."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    for ax, key, unit in zip(axes, ("r_det_hz", "snr"), ("Hz", "")):
        vals = [baseline[key], projected[key]]
        ax.bar(["baseline", "projected"], vals, color=["#999999", "#1f77b4"])
        ax.set_yscale("log")
        label = "detection rate (Hz)" if key == "r_det_hz" else "SNR"
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
