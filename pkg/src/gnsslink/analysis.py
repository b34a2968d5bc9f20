"""Detection statistics for time-tag streams.

Pipeline: wrap detection times into residuals against the expected pulse
arrivals, histogram them, count in-window and background events per
acquisition interval, subtract the background, normalize by the protocol
duty cycle, filter low-rate intervals and summarize the pass.

The signal-to-noise ratio is defined as the ratio of background-subtracted
to background counts inside the analysis window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .budget import LinkBudget, estimate_mu_sat
from .channel import ExpectedArrivals, ProtocolSchedule, TagStream
from .units import PS_PER_MS, PS_PER_S


@dataclass(frozen=True)
class AnalysisParams:
    """Knobs of the detection-statistics pipeline."""

    tau_s: float = 5.0
    window_ps: float = 400.0
    duty_cycle: float = 0.3
    threshold_hz: float = 30.0
    bin_width_ps: float = 100.0
    exclusion_ps: float = 1000.0

    def __post_init__(self):
        if self.tau_s <= 0.0:
            raise ValueError("tau must be > 0")
        if self.window_ps <= 0.0 or self.exclusion_ps <= 0.0:
            raise ValueError("window and exclusion must be > 0")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError("duty cycle out of range")
        if self.bin_width_ps <= 0.0:
            raise ValueError("bin width must be > 0")


@dataclass(eq=False)
class ResidualSet:
    """Wrapped residuals with the absolute times they came from."""

    residual_ps: np.ndarray
    time_ps: np.ndarray
    pulse_period_ps: int
    channel: int | None = None

    def __post_init__(self):
        self.residual_ps = np.asarray(self.residual_ps, dtype=float)
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        half = self.pulse_period_ps / 2.0
        if np.any(self.residual_ps > half) or np.any(self.residual_ps <= -half):
            raise ValueError("residuals outside (-P/2, +P/2]")

    def __len__(self) -> int:
        return self.residual_ps.size


def residuals(
    tags: TagStream, arrivals: ExpectedArrivals, channel: int | None = None
) -> ResidualSet:
    """Residuals of all tags in the usable return region of one channel."""
    stream = tags if channel is None else tags.for_channel(channel)
    resid, valid, _ = arrivals.match(stream.time_ps)
    return ResidualSet(
        resid[valid],
        stream.time_ps[valid],
        arrivals.transmitter.pulse_period_ps,
        channel,
    )


def windowed_counts(
    residual_ps: np.ndarray,
    pulse_period_ps: float,
    window_ps: float,
    exclusion_ps: float,
) -> tuple[int, float, int]:
    """In-window total and scaled background estimate.

    Counts tags with ``|r| <= w/2``; the background density is estimated
    from tags farther than ``exclusion_ps`` from the reference and scaled
    to the window width. Returns ``(n_tot_w, n_bkg_w, n_out)``.
    """
    if window_ps >= 2.0 * exclusion_ps:
        raise ValueError("window must be smaller than twice the exclusion")
    if exclusion_ps >= pulse_period_ps / 2.0:
        raise ValueError("exclusion must be smaller than half the pulse period")
    r = np.abs(np.asarray(residual_ps, dtype=float))
    n_tot = int(np.sum(r <= window_ps / 2.0))
    n_out = int(np.sum(r > exclusion_ps))
    n_bkg = n_out * window_ps / (pulse_period_ps - 2.0 * exclusion_ps)
    return n_tot, n_bkg, n_out


@dataclass
class IntervalStats:
    """Detection statistics of one acquisition interval."""

    k: int
    tau_s: float
    duty_cycle: float
    n_tot_w: int
    n_bkg_w: float
    n_out: int
    n_det: float
    r_det_hz: float
    bkg_rate_w_hz: float
    snr: float
    selected: bool = False


def _safe_ratio(num: float, den: float) -> float:
    if den > 0.0:
        return num / den
    return math.inf if num > 0.0 else 0.0


def interval_stats(
    rset: ResidualSet,
    params: AnalysisParams,
    duration_s: float | None = None,
) -> list[IntervalStats]:
    """Per-interval windowed counts, background subtraction and rates.

    Negative background-subtracted counts are reported as-is so that the
    rate filter behaves statistically. ``duration_s`` fixes the number of
    intervals; otherwise it is taken from the last tag.
    """
    tau_ps = round(params.tau_s * PS_PER_S)
    if duration_s is not None:
        n_intervals = max(1, math.ceil(duration_s * PS_PER_S / tau_ps))
    elif len(rset):
        n_intervals = int(rset.time_ps.max() // tau_ps) + 1
    else:
        n_intervals = 0
    k_of = rset.time_ps // tau_ps
    out = []
    for k in range(n_intervals):
        r_k = rset.residual_ps[k_of == k]
        n_tot, n_bkg, n_out = windowed_counts(
            r_k, rset.pulse_period_ps, params.window_ps, params.exclusion_ps
        )
        n_det = n_tot - n_bkg
        denom = params.tau_s * params.duty_cycle
        out.append(
            IntervalStats(
                k=k,
                tau_s=params.tau_s,
                duty_cycle=params.duty_cycle,
                n_tot_w=n_tot,
                n_bkg_w=n_bkg,
                n_out=n_out,
                n_det=n_det,
                r_det_hz=n_det / denom,
                bkg_rate_w_hz=n_bkg / denom,
                snr=_safe_ratio(n_det, n_bkg),
            )
        )
    return out


def filter_intervals(
    stats: list[IntervalStats], threshold_hz: float
) -> list[IntervalStats]:
    """Keep intervals with ``r_det >= threshold``; flags them as selected."""
    kept = []
    for s in stats:
        s.selected = s.r_det_hz >= threshold_hz
        if s.selected:
            kept.append(s)
    return kept


@dataclass(eq=False)
class Histogram:
    """Residual histogram with a bin edge pinned at zero."""

    bin_width_ps: float
    edges_ps: np.ndarray
    counts: np.ndarray

    @property
    def centers_ps(self) -> np.ndarray:
        return (self.edges_ps[:-1] + self.edges_ps[1:]) / 2.0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_residuals(
        cls, residual_ps: np.ndarray, pulse_period_ps: float, bin_width_ps: float
    ) -> "Histogram":
        half_bins = math.ceil(pulse_period_ps / 2.0 / bin_width_ps)
        edges = bin_width_ps * np.arange(-half_bins, half_bins + 1)
        # numpy closes the last bin, which matches the (-P/2, +P/2] wrap
        counts, _ = np.histogram(residual_ps, bins=edges)
        return cls(bin_width_ps, edges, counts)


def integrated_histogram(
    rset: ResidualSet,
    stats: list[IntervalStats],
    params: AnalysisParams,
) -> Histogram:
    """Histogram of residuals belonging to the selected intervals only."""
    tau_ps = round(params.tau_s * PS_PER_S)
    selected_ks = {s.k for s in stats if s.selected}
    mask = np.isin(rset.time_ps // tau_ps, sorted(selected_ks))
    return Histogram.from_residuals(
        rset.residual_ps[mask], rset.pulse_period_ps, params.bin_width_ps
    )


@dataclass(frozen=True)
class PassSummary:
    """Aggregate of the selected intervals of one pass and one channel.

    Rates and the SNR are ratios of summed counts over the selected
    intervals; one-sigma statistical errors are propagated from Poisson
    counting. ``no_signal`` marks an empty selection.
    """

    r_det_hz: float
    snr: float
    mu_sat: float
    n_selected: int
    n_intervals: int
    n_det: float
    n_bkg: float
    no_signal: bool
    sigma_r_det_hz: float = 0.0
    sigma_snr: float = 0.0
    sigma_mu_sat: float = 0.0
    channel: int | None = None

    def as_dict(self) -> dict:
        return {
            "channel": self.channel,
            "no_signal": self.no_signal,
            "r_det_hz": self.r_det_hz,
            "sigma_r_det_hz": self.sigma_r_det_hz,
            "snr": self.snr,
            "sigma_snr": self.sigma_snr,
            "mu_sat": self.mu_sat,
            "sigma_mu_sat": self.sigma_mu_sat,
            "n_selected_intervals": self.n_selected,
            "n_intervals": self.n_intervals,
            "n_det": self.n_det,
            "n_bkg": self.n_bkg,
        }


def estimate_pass_summary(
    stats: list[IntervalStats],
    link: LinkBudget,
    rep_rate_hz: float,
    channel: int | None = None,
) -> PassSummary:
    """Summarize selected intervals and invert the link budget for mu_sat."""
    selected = [s for s in stats if s.selected]
    n_intervals = len(stats)
    if not selected:
        return PassSummary(
            r_det_hz=0.0, snr=0.0, mu_sat=0.0,
            n_selected=0, n_intervals=n_intervals,
            n_det=0.0, n_bkg=0.0, no_signal=True, channel=channel,
        )
    n_det = sum(s.n_det for s in selected)
    n_bkg = sum(s.n_bkg_w for s in selected)
    n_tot = sum(s.n_tot_w for s in selected)
    n_out = sum(s.n_out for s in selected)
    scale = n_bkg / n_out if n_out else 0.0
    live = sum(s.tau_s * s.duty_cycle for s in selected)
    r_det = n_det / live
    var_bkg = scale**2 * n_out
    var_det = n_tot + var_bkg
    sigma_r = math.sqrt(var_det) / live
    snr = _safe_ratio(n_det, n_bkg)
    if n_det > 0.0 and n_bkg > 0.0 and math.isfinite(snr):
        # cov(n_det, n_bkg) = -var(n_bkg) since n_det = n_tot - n_bkg
        sigma_snr = snr * math.sqrt(
            var_det / n_det**2 + var_bkg / n_bkg**2 + 2.0 * var_bkg / (n_det * n_bkg)
        )
    else:
        sigma_snr = 0.0
    mu = estimate_mu_sat(max(r_det, 0.0), rep_rate_hz, link.t_down, link.t_rx)
    sigma_mu = sigma_r / (rep_rate_hz * link.t_down * link.t_rx)
    return PassSummary(
        r_det_hz=r_det,
        snr=snr,
        mu_sat=mu,
        n_selected=len(selected),
        n_intervals=n_intervals,
        n_det=n_det,
        n_bkg=n_bkg,
        no_signal=False,
        sigma_r_det_hz=sigma_r,
        sigma_snr=sigma_snr,
        sigma_mu_sat=sigma_mu,
        channel=channel,
    )


@dataclass(eq=False)
class PeriodOccupancy:
    """Stacked occupancy of the protocol period by shutter/return state."""

    bin_edges_ms: np.ndarray
    closed: np.ndarray
    open_outside: np.ndarray
    open_inside: np.ndarray
    n_periods: int = 0

    @property
    def centers_ms(self) -> np.ndarray:
        return (self.bin_edges_ms[:-1] + self.bin_edges_ms[1:]) / 2.0

    def rates_hz(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Counts converted to rates given the number of periods covered."""
        bin_s = (self.bin_edges_ms[1] - self.bin_edges_ms[0]) / 1e3
        norm = max(self.n_periods, 1) * bin_s
        return self.closed / norm, self.open_outside / norm, self.open_inside / norm


def period_occupancy(
    tags: TagStream,
    schedule: ProtocolSchedule,
    arrivals: ExpectedArrivals,
    duration_s: float | None = None,
    bin_ms: float = 1.0,
    channel: int | None = None,
) -> PeriodOccupancy:
    """Histogram of tags over the protocol period, split by shutter state.

    Classes: receive shutter closed, open but outside the usable return
    region, and open inside it (where retroreflected pulses can land).
    """
    stream = tags if channel is None else tags.for_channel(channel)
    t = stream.time_ps
    period_ms = schedule.period_ms
    edges = np.arange(0.0, period_ms + bin_ms / 2.0, bin_ms)
    rel_ms = (t % schedule.period_ps) / PS_PER_MS
    in_rx = schedule.in_rx_window(t)
    _, valid, _ = arrivals.match(t)
    masks = (~in_rx, in_rx & ~valid, in_rx & valid)
    hists = [np.histogram(rel_ms[m], bins=edges)[0] for m in masks]
    if duration_s is None:
        duration_s = float(t.max()) / PS_PER_S if t.size else 0.0
    n_periods = max(1, math.ceil(duration_s * PS_PER_S / schedule.period_ps))
    return PeriodOccupancy(edges, *hists, n_periods=n_periods)


def analyze_channel(
    tags: TagStream,
    arrivals: ExpectedArrivals,
    params: AnalysisParams,
    link: LinkBudget,
    rep_rate_hz: float,
    channel: int,
    duration_s: float | None = None,
) -> tuple[ResidualSet, list[IntervalStats], Histogram, PassSummary]:
    """Full pipeline for one channel; returns all intermediate products."""
    rset = residuals(tags, arrivals, channel)
    stats = interval_stats(rset, params, duration_s)
    filter_intervals(stats, params.threshold_hz)
    hist = integrated_histogram(rset, stats, params)
    summary = estimate_pass_summary(stats, link, rep_rate_hz, channel)
    return rset, stats, hist, summary
