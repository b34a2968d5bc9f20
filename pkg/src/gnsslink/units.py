"""Shared units, dB bookkeeping and pulse-shape primitives.

Conventions used throughout the package:

* times are integer picoseconds (the tagger resolution), durations that
  enter rate arithmetic are floats in seconds,
* distances are meters, rates are hertz,
* losses are positive dB, transmittances are fractions in (0, 1],
* Gaussian widths are quoted as FWHM, matching detector datasheets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_M_PER_S = 299792458.0

PS_PER_S = 1_000_000_000_000
PS_PER_MS = 1_000_000_000
PS_PER_NS = 1_000

#: sigma = FWHM / (2 * sqrt(2 * ln 2))
FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def db_from_transmittance(t):
    """Loss in dB for a transmittance ``t`` in (0, 1]: ``-10*log10(t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t > 1.0):
        raise ValueError(f"transmittance must be in (0, 1], got {t}")
    out = -10.0 * np.log10(t)
    return float(out) if out.ndim == 0 else out


def transmittance_from_db(loss_db):
    """Transmittance ``10**(-l/10)`` for a non-negative loss in dB."""
    loss_db = np.asarray(loss_db, dtype=float)
    if np.any(loss_db < 0.0):
        raise ValueError(f"loss must be >= 0 dB, got {loss_db}")
    out = 10.0 ** (-loss_db / 10.0)
    return float(out) if out.ndim == 0 else out


def fwhm_to_sigma(fwhm):
    """Gaussian standard deviation for a given full width at half maximum."""
    fwhm = np.asarray(fwhm, dtype=float)
    if np.any(fwhm <= 0.0):
        raise ValueError(f"FWHM must be > 0, got {fwhm}")
    out = fwhm / FWHM_PER_SIGMA
    return float(out) if out.ndim == 0 else out


def sigma_to_fwhm(sigma):
    """Inverse of :func:`fwhm_to_sigma`."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0.0):
        raise ValueError(f"sigma must be > 0, got {sigma}")
    out = sigma * FWHM_PER_SIGMA
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussianPulse:
    """Normalized Gaussian pulse parameterized by FWHM in picoseconds."""

    fwhm_ps: float
    center_ps: float = 0.0

    def __post_init__(self):
        if self.fwhm_ps <= 0.0:
            raise ValueError(f"fwhm_ps must be > 0, got {self.fwhm_ps}")

    @property
    def sigma_ps(self) -> float:
        return self.fwhm_ps / FWHM_PER_SIGMA

    def density(self, t_ps):
        """Probability density (1/ps) evaluated at ``t_ps``."""
        sig = self.sigma_ps
        t = np.asarray(t_ps, dtype=float)
        return np.exp(-0.5 * ((t - self.center_ps) / sig) ** 2) / (
            sig * math.sqrt(2.0 * math.pi)
        )
