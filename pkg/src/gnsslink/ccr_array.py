"""Temporal signature of a flat retroreflector array under oblique incidence.

Each corner cube returns the pulse unchanged but delayed by the two-way
projection of its position onto the line of sight, so a tilted array smears
a short pulse into a satellite-specific shape. For a ring layout the delay
distribution piles up at both extremes and the return becomes bimodal.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .units import SPEED_OF_LIGHT_M_PER_S, GaussianPulse

#: conversion of a one-way path difference in meters to a two-way delay in ps
_TWO_WAY_PS_PER_M = 2.0e12 / SPEED_OF_LIGHT_M_PER_S


def lobe_displacement(wavelength_m: float, ccr_diameter_m: float) -> float:
    """Angular offset of the six TIR diffraction lobes: ``1.4 * lambda / D``."""
    if wavelength_m <= 0.0:
        raise ValueError(f"wavelength must be > 0, got {wavelength_m}")
    if ccr_diameter_m <= 0.0:
        raise ValueError(f"CCR diameter must be > 0, got {ccr_diameter_m}")
    return 1.4 * wavelength_m / ccr_diameter_m


def velocity_aberration_check(
    lobe_rad: float, aberration_rad: float, tolerance_rad: float
) -> tuple[bool, float]:
    """Whether the receiver sits on a lateral lobe, and the angular gap.

    Returns ``(ok, gap)`` where ``ok`` means the lobe displacement matches
    the velocity aberration within ``tolerance_rad``.
    """
    if lobe_rad < 0.0 or aberration_rad < 0.0 or tolerance_rad < 0.0:
        raise ValueError("angles must be >= 0")
    gap = abs(lobe_rad - aberration_rad)
    return gap <= tolerance_rad, gap


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """CCR center positions (x, y) in meters in the array plane."""

    positions_m: np.ndarray
    shape: str = "ring"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions_m, dtype=float))
        if pos.size == 0:
            raise ValueError("array geometry needs at least one CCR position")
        if pos.shape[1] != 2:
            raise ValueError(f"positions must be (N, 2), got {pos.shape}")
        object.__setattr__(self, "positions_m", pos)

    @property
    def count(self) -> int:
        return self.positions_m.shape[0]

    @property
    def outer_diameter_m(self) -> float:
        return 2.0 * float(np.max(np.hypot(*self.positions_m.T)))


def ring_geometry(count: int, diameter_m: float) -> ArrayGeometry:
    """CCR centers equally spaced on a circle of the given diameter."""
    if count <= 0:
        raise ValueError("count must be positive")
    if diameter_m <= 0.0:
        raise ValueError("diameter must be positive")
    phi = 2.0 * math.pi * np.arange(count) / count
    r = diameter_m / 2.0
    return ArrayGeometry(np.column_stack([r * np.cos(phi), r * np.sin(phi)]), "ring")


def rectangle_geometry(columns: int, rows: int, width_m: float, height_m: float) -> ArrayGeometry:
    """CCR centers on a centered ``columns x rows`` grid."""
    if columns <= 0 or rows <= 0:
        raise ValueError("grid dimensions must be positive")
    x = np.linspace(-width_m / 2.0, width_m / 2.0, columns)
    y = np.linspace(-height_m / 2.0, height_m / 2.0, rows)
    xx, yy = np.meshgrid(x, y)
    return ArrayGeometry(np.column_stack([xx.ravel(), yy.ravel()]), "rectangle")


def disk_geometry(count: int, diameter_m: float) -> ArrayGeometry:
    """CCR centers filling a disk via a sunflower (golden-angle) layout."""
    if count <= 0:
        raise ValueError("count must be positive")
    k = np.arange(1, count + 1)
    r = diameter_m / 2.0 * np.sqrt((k - 0.5) / count)
    phi = k * math.pi * (3.0 - math.sqrt(5.0))
    return ArrayGeometry(np.column_stack([r * np.cos(phi), r * np.sin(phi)]), "disk")


def geometry_from_csv(path) -> ArrayGeometry:
    """Load CCR positions from a CSV with ``x_m,y_m`` columns."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r.get("x_m")]
    if not rows:
        raise ValueError(f"no positions found in {path}")
    try:
        pos = np.array([[float(r["x_m"]), float(r["y_m"])] for r in rows])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: expected columns x_m,y_m") from exc
    return ArrayGeometry(pos, "custom")


def ccr_time_offsets(
    geometry: ArrayGeometry,
    incidence_rad: float,
    azimuth_rad: float | None = None,
    recenter: bool = True,
) -> np.ndarray:
    """Per-CCR two-way delays in picoseconds for a tilted array.

    The delay of a CCR at position ``p`` is ``2 (p . u) sin(incidence) / c``
    with ``u`` the in-plane unit vector of the projected line of sight at
    ``azimuth_rad``. ``azimuth_rad=None`` picks the azimuth that maximizes
    the spread. By default offsets are re-centered to zero mean.
    """
    if not 0.0 <= incidence_rad < math.pi / 2.0:
        raise ValueError(f"incidence must be in [0, pi/2), got {incidence_rad}")
    if azimuth_rad is None:
        azimuth_rad = spread_maximizing_azimuth(geometry)
    u = np.array([math.cos(azimuth_rad), math.sin(azimuth_rad)])
    proj = geometry.positions_m @ u
    offsets = proj * math.sin(incidence_rad) * _TWO_WAY_PS_PER_M
    if recenter:
        offsets = offsets - offsets.mean()
    return offsets


def spread_maximizing_azimuth(geometry: ArrayGeometry) -> float:
    """Azimuth giving the widest projected spread of CCR positions."""
    candidates = np.arctan2(geometry.positions_m[:, 1], geometry.positions_m[:, 0])
    candidates = np.concatenate([candidates, np.linspace(0.0, math.pi, 181)])
    best_az, best_spread = 0.0, -1.0
    for az in candidates:
        proj = geometry.positions_m @ np.array([math.cos(az), math.sin(az)])
        spread = float(proj.max() - proj.min())
        if spread > best_spread + 1e-15:
            best_az, best_spread = float(az), spread
    return best_az


def offset_span_ps(
    geometry: ArrayGeometry, incidence_rad: float, azimuth_rad: float | None = None
) -> float:
    """Full extent (max - min) of the per-CCR delays; scales as sin(incidence)."""
    offsets = ccr_time_offsets(geometry, incidence_rad, azimuth_rad)
    return float(offsets.max() - offsets.min())


@dataclass(frozen=True, eq=False)
class TemporalProfile:
    """Binned normalized temporal density (1/ps).

    ``origin_ps`` is the center of the first bin; the density integrates
    to one over the covered span.
    """

    bin_width_ps: float
    origin_ps: float
    densities: np.ndarray

    def __post_init__(self):
        dens = np.asarray(self.densities, dtype=float)
        if dens.size == 0:
            raise ValueError("profile needs at least one bin")
        if np.any(dens < 0.0):
            raise ValueError("densities must be non-negative")
        object.__setattr__(self, "densities", dens)

    @property
    def centers_ps(self) -> np.ndarray:
        return self.origin_ps + self.bin_width_ps * np.arange(self.densities.size)

    @property
    def integral(self) -> float:
        return float(self.densities.sum() * self.bin_width_ps)

    def cdf(self) -> tuple[np.ndarray, np.ndarray]:
        """Right-edge CDF samples, for distribution comparisons."""
        edges = self.centers_ps + self.bin_width_ps / 2.0
        return edges, np.cumsum(self.densities) * self.bin_width_ps


def array_impulse_response(
    geometry: ArrayGeometry,
    incidence_rad: float,
    pulse: GaussianPulse,
    bin_width_ps: float = 5.0,
    azimuth_rad: float | None = None,
    uniform_floor: float = 0.0,
    pad_sigmas: float = 5.0,
) -> TemporalProfile:
    """Return-pulse shape: equal-weight sum of one Gaussian per CCR.

    Each CCR contributes the transmitted pulse shape shifted by its delay;
    shape changes inside a single CCR are neglected. ``uniform_floor`` adds
    a flat background fraction (of the total area) before normalization,
    for comparison against measured histograms.
    """
    if bin_width_ps <= 0.0 or bin_width_ps > pulse.fwhm_ps / 4.0:
        raise ValueError(
            f"bin width must be in (0, fwhm/4 = {pulse.fwhm_ps / 4.0} ps]"
        )
    if not 0.0 <= uniform_floor < 1.0:
        raise ValueError("uniform_floor must be in [0, 1)")
    offsets = ccr_time_offsets(geometry, incidence_rad, azimuth_rad)
    sigma = pulse.sigma_ps
    lo = offsets.min() - pad_sigmas * sigma
    hi = offsets.max() + pad_sigmas * sigma
    n_bins = int(math.ceil((hi - lo) / bin_width_ps)) + 1
    centers = lo + bin_width_ps * np.arange(n_bins)
    dens = np.exp(
        -0.5 * ((centers[:, None] - offsets[None, :]) / sigma) ** 2
    ).sum(axis=1)
    dens /= dens.sum() * bin_width_ps
    if uniform_floor > 0.0:
        dens = (1.0 - uniform_floor) * dens + uniform_floor / (n_bins * bin_width_ps)
        dens /= dens.sum() * bin_width_ps
    return TemporalProfile(bin_width_ps, float(centers[0]), dens)


def _local_maxima(values: np.ndarray) -> list[int]:
    """Indices of 3-point local maxima (ties resolved to the left sample)."""
    idx = []
    for i in range(1, len(values) - 1):
        left, mid, right = values[i - 1], values[i], values[i + 1]
        if mid >= left and mid >= right and (mid > left or mid > right):
            idx.append(i)
    return idx


def peak_to_peak(
    profile: TemporalProfile,
    min_separation_ps: float = 150.0,
    smooth_bins: int = 3,
) -> float:
    """Distance between the two highest local maxima of a profile.

    Densities are boxcar-smoothed over ``smooth_bins`` bins first; maxima
    closer than ``min_separation_ps`` to the highest peak are treated as
    the same peak. Returns 0 for a unimodal profile.
    """
    dens = profile.densities
    if smooth_bins > 1 and dens.size >= smooth_bins:
        kernel = np.ones(smooth_bins) / smooth_bins
        dens = np.convolve(dens, kernel, mode="same")
    maxima = _local_maxima(dens)
    if not maxima:
        return 0.0
    centers = profile.centers_ps
    maxima.sort(key=lambda i: dens[i], reverse=True)
    top = maxima[0]
    for i in maxima[1:]:
        if abs(centers[i] - centers[top]) >= min_separation_ps:
            return float(abs(centers[i] - centers[top]))
    return 0.0
