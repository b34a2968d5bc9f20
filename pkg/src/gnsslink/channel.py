"""Two-way protocol schedule and synthetic time-tag stream generation.

The communication protocol alternates a transmit phase and a receive phase
inside a fixed period so that the retroreflected pulse train, arriving one
round-trip time later, is observed with the transmitter shuttered. The
simulator reproduces that timing and generates signal detections plus the
three background processes that populate real acquisitions: detector dark
counts (shutter-independent), sunlight/albedo (while the receive shutter is
open) and the decaying fluorescence tail excited by the bright ranging pulse.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .units import (
    PS_PER_MS,
    PS_PER_S,
    SPEED_OF_LIGHT_M_PER_S,
    fwhm_to_sigma,
)

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Scenario

TRUTH_LABELS = ("signal", "dark", "fluorescence", "albedo")
TRUTH_CODES = {label: i for i, label in enumerate(TRUTH_LABELS)}

GNSS_RANGE_BAND_M = (19_000e3, 26_000e3)


@dataclass(frozen=True)
class TransmitterSpec:
    """Pulsed source: repetition rate and pulse width."""

    rep_rate_hz: float = 100e6
    pulse_fwhm_ps: float = 100.0

    def __post_init__(self):
        if self.rep_rate_hz <= 0.0:
            raise ValueError("rep rate must be > 0")
        if self.pulse_fwhm_ps <= 0.0:
            raise ValueError("pulse FWHM must be > 0")
        period = 1e12 / self.rep_rate_hz
        if abs(period - round(period)) > 1e-6:
            raise ValueError(
                f"pulse period {period} ps is not an integer number of ps"
            )

    @property
    def pulse_period_ps(self) -> int:
        return round(1e12 / self.rep_rate_hz)


@dataclass(frozen=True)
class ProtocolSchedule:
    """Shutter timing of one protocol period (milliseconds).

    ``duty_cycle`` is the nominal usable fraction of the period quoted for
    rate normalization; the geometric value for a given round-trip time is
    computed by :func:`effective_duty_cycle`.
    """

    period_ms: float = 200.0
    tx_window_ms: tuple[float, float] = (0.0, 100.0)
    rx_window_ms: tuple[float, float] = (105.0, 180.0)
    slr_fire_ms: float = 100.0
    duty_cycle: float = 0.3

    def __post_init__(self):
        tx0, tx1 = self.tx_window_ms
        rx0, rx1 = self.rx_window_ms
        if not (0.0 <= tx0 < tx1 <= self.period_ms):
            raise ValueError(f"invalid tx window: {self.tx_window_ms}")
        if not (0.0 <= rx0 < rx1 <= self.period_ms):
            raise ValueError(f"invalid rx window: {self.rx_window_ms}")
        if max(tx0, rx0) < min(tx1, rx1):
            raise ValueError("tx and rx windows must be disjoint")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError(f"duty cycle out of range: {self.duty_cycle}")
        if not 0.0 <= self.slr_fire_ms <= self.period_ms:
            raise ValueError(f"SLR fire time outside period: {self.slr_fire_ms}")

    @property
    def period_ps(self) -> int:
        return round(self.period_ms * PS_PER_MS)

    @property
    def tx_window_ps(self) -> tuple[int, int]:
        return (
            round(self.tx_window_ms[0] * PS_PER_MS),
            round(self.tx_window_ms[1] * PS_PER_MS),
        )

    @property
    def rx_window_ps(self) -> tuple[int, int]:
        return (
            round(self.rx_window_ms[0] * PS_PER_MS),
            round(self.rx_window_ms[1] * PS_PER_MS),
        )

    @property
    def slr_fire_ps(self) -> int:
        return round(self.slr_fire_ms * PS_PER_MS)

    def in_tx_window(self, t_ps):
        """Vectorized test: is the (absolute) time inside an open tx shutter."""
        tx0, tx1 = self.tx_window_ps
        rel = np.asarray(t_ps) % self.period_ps
        return (rel >= tx0) & (rel < tx1)

    def in_rx_window(self, t_ps):
        """Vectorized test: is the (absolute) time inside an open rx shutter."""
        rx0, rx1 = self.rx_window_ps
        rel = np.asarray(t_ps) % self.period_ps
        return (rel >= rx0) & (rel < rx1)


def _overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def effective_duty_cycle(schedule: ProtocolSchedule, rtt_ps: float) -> float:
    """Fraction of the period in which transmitted pulses return observable.

    The return of the tx window, shifted by the round-trip time, is
    intersected (wrap-aware) with the open rx window.
    """
    period = schedule.period_ps
    if not 0.0 < rtt_ps < period:
        raise ValueError(f"round-trip time must be in (0, period), got {rtt_ps} ps")
    tx0, tx1 = schedule.tx_window_ps
    rx0, rx1 = schedule.rx_window_ps
    start = (tx0 + rtt_ps) % period
    length = tx1 - tx0
    total = _overlap(start, min(start + length, period), rx0, rx1)
    if start + length > period:
        total += _overlap(0.0, start + length - period, rx0, rx1)
    return total / period


@dataclass(eq=False)
class RangeProfile:
    """Slant range versus elapsed time, linearly interpolated."""

    t_ps: np.ndarray
    range_m: np.ndarray

    def __post_init__(self):
        self.t_ps = np.asarray(self.t_ps, dtype=np.int64)
        self.range_m = np.asarray(self.range_m, dtype=float)
        if self.t_ps.size < 2:
            raise ValueError("range profile needs at least 2 samples")
        if self.t_ps.size != self.range_m.size:
            raise ValueError("time and range arrays must have equal length")
        if np.any(np.diff(self.t_ps) <= 0):
            raise ValueError("profile times must be strictly increasing")
        lo, hi = GNSS_RANGE_BAND_M
        if np.any(self.range_m < lo) or np.any(self.range_m > hi):
            raise ValueError(
                f"slant ranges must lie within [{lo / 1e3:.0f}, {hi / 1e3:.0f}] km"
            )

    @classmethod
    def constant(cls, range_m: float, duration_s: float = 36000.0) -> "RangeProfile":
        t = np.array([0, round(duration_s * PS_PER_S)], dtype=np.int64)
        return cls(t, np.array([range_m, range_m]))

    @classmethod
    def from_csv(cls, path) -> "RangeProfile":
        data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
        if data.dtype.names is None or not {"t_s", "range_m"} <= set(data.dtype.names):
            raise ValueError(f"{path}: expected columns t_s,range_m")
        t = np.atleast_1d(data["t_s"]) * PS_PER_S
        return cls(t.astype(np.int64), np.atleast_1d(data["range_m"]))

    @property
    def mean_range_m(self) -> float:
        return float(self.range_m.mean())

    def range_at(self, t_ps):
        return np.interp(np.asarray(t_ps, dtype=float), self.t_ps, self.range_m)

    def rtt_ps_at(self, t_ps):
        """Two-way light time (float ps) at the given elapsed time(s)."""
        return self.range_at(t_ps) * (2.0e12 / SPEED_OF_LIGHT_M_PER_S)


def expected_arrival(
    pulse_index: int, profile: RangeProfile, schedule: ProtocolSchedule,
    transmitter: TransmitterSpec,
) -> int:
    """Expected arrival time (ps) of the pulse with the given global index.

    The pulse fires at ``index * pulse_period``; raises if that instant is
    not inside an open tx window.
    """
    if pulse_index < 0:
        raise ValueError("pulse index must be >= 0")
    t_emit = pulse_index * transmitter.pulse_period_ps
    if not bool(schedule.in_tx_window(t_emit)):
        raise ValueError(f"pulse {pulse_index} does not fall in a tx window")
    return t_emit + round(float(profile.rtt_ps_at(t_emit)))


class ExpectedArrivals:
    """Reference-time model matching detections to transmitted pulses."""

    def __init__(
        self,
        profile: RangeProfile,
        schedule: ProtocolSchedule,
        transmitter: TransmitterSpec,
    ):
        self.profile = profile
        self.schedule = schedule
        self.transmitter = transmitter

    def t_ref(self, pulse_index: int) -> int:
        return expected_arrival(
            pulse_index, self.profile, self.schedule, self.transmitter
        )

    def match(self, t_ps) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Match detection times to the nearest expected pulse arrival.

        Returns ``(residual_ps, valid, pulse_index)``. Residuals are wrapped
        to ``(-P/2, +P/2]`` with ``P`` the pulse period; ``valid`` marks tags
        whose matched pulse was actually transmitted and whose arrival falls
        in an open rx window (i.e. tags inside the usable return region).
        """
        t = np.atleast_1d(np.asarray(t_ps, dtype=np.float64))
        if t.size == 0:
            empty = np.array([])
            return empty, np.array([], dtype=bool), np.array([], dtype=np.int64)
        rtt = self.profile.rtt_ps_at(t)
        for _ in range(2):
            rtt = self.profile.rtt_ps_at(np.maximum(t - rtt, 0.0))
        d = t - rtt
        pp = float(self.transmitter.pulse_period_ps)
        idx = np.round(d / pp)
        resid = d - idx * pp
        resid[resid <= -pp / 2.0] += pp  # wrap convention: (-P/2, +P/2]
        t_emit = (idx * pp).astype(np.int64)
        valid = (
            (idx >= 0)
            & self.schedule.in_tx_window(t_emit)
            & self.schedule.in_rx_window(np.asarray(t, dtype=np.int64))
        )
        return resid, valid, idx.astype(np.int64)


@dataclass(frozen=True)
class NoiseModel:
    """Background rates as seen by one detection channel.

    ``dark_hz`` is present over the whole period (detector-intrinsic plus
    room-light leakage); albedo only while the receive shutter is open.
    ``fluorescence_hz`` is the average rate inside the usable return region;
    the underlying process decays exponentially from each ranging-pulse fire
    time with the configured half-life.
    """

    dark_hz: float = 700.0
    fluorescence_hz: float = 195.0
    albedo_hz: float = 1900.0
    fluorescence_half_life_ms: float = 5.0
    filter_band_nm: float = 3.0

    def __post_init__(self):
        for name in ("dark_hz", "fluorescence_hz", "albedo_hz"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if self.fluorescence_half_life_ms <= 0.0:
            raise ValueError("fluorescence half-life must be > 0")
        if self.filter_band_nm <= 0.0:
            raise ValueError("filter band must be > 0")

    @property
    def total_hz(self) -> float:
        return self.dark_hz + self.fluorescence_hz + self.albedo_hz


@dataclass(eq=False)
class TagStream:
    """Ordered detection events with optional simulation truth labels."""

    time_ps: np.ndarray
    channel: np.ndarray
    truth: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        self.channel = np.asarray(self.channel, dtype=np.int16)
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=np.int8)
        for ch in np.unique(self.channel):
            t = self.time_ps[self.channel == ch]
            if np.any(np.diff(t) <= 0):
                raise ValueError(f"times not strictly increasing on channel {ch}")

    def __len__(self) -> int:
        return self.time_ps.size

    @property
    def channels(self) -> np.ndarray:
        return np.unique(self.channel)

    def for_channel(self, channel: int) -> "TagStream":
        mask = self.channel == channel
        return TagStream(
            self.time_ps[mask],
            self.channel[mask],
            None if self.truth is None else self.truth[mask],
            self.metadata,
        )

    def counts_by_truth(self) -> dict[str, int]:
        if self.truth is None:
            return {}
        return {
            label: int(np.sum(self.truth == code))
            for label, code in TRUTH_CODES.items()
        }

    def to_csv(self, path, include_truth: bool = True) -> None:
        """Write ``time_ps,channel[,truth]`` rows with a provenance header."""
        scenario_hash = self.metadata.get("scenario_hash", "unknown")
        seed = self.metadata.get("seed", "unknown")
        with_truth = include_truth and self.truth is not None
        with open(path, "w", newline="") as fh:
            fh.write("# gnsslink tag stream\n")
            fh.write(f"# scenario_hash={scenario_hash} seed={seed}\n")
            fh.write("time_ps,channel,truth\n" if with_truth else "time_ps,channel\n")
            if with_truth:
                for t, ch, tr in zip(self.time_ps, self.channel, self.truth):
                    fh.write(f"{t},{ch},{TRUTH_LABELS[tr]}\n")
            else:
                for t, ch in zip(self.time_ps, self.channel):
                    fh.write(f"{t},{ch}\n")

    def write_metadata(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "TagStream":
        times, channels, truths = [], [], []
        header = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if header is None:
                    header = line.split(",")
                    if header[:2] != ["time_ps", "channel"]:
                        raise ValueError(
                            f"{path}: expected a time_ps,channel[,truth] header"
                        )
                    continue
                parts = line.split(",")
                try:
                    times.append(int(parts[0]))
                    channels.append(int(parts[1]))
                except (ValueError, IndexError) as exc:
                    raise ValueError(f"{path}: malformed row {line!r}") from exc
                if len(header) > 2 and len(parts) > 2:
                    try:
                        truths.append(TRUTH_CODES[parts[2]])
                    except KeyError as exc:
                        raise ValueError(
                            f"{path}: unknown truth label {parts[2]!r}"
                        ) from exc
        if header is None:
            raise ValueError(f"{path}: empty tag file")
        if truths and len(truths) != len(times):
            raise ValueError(f"{path}: truth column present only on some rows")
        truth = np.array(truths, dtype=np.int8) if truths else None
        return cls(
            np.array(times, dtype=np.int64),
            np.array(channels, dtype=np.int16),
            truth,
        )


def _strictly_increasing(t: np.ndarray) -> np.ndarray:
    """Minimal +1 ps bumps making a sorted int array strictly increasing."""
    if t.size <= 1:
        return t
    n = np.arange(t.size, dtype=np.int64)
    return np.maximum.accumulate(t - n) + n


def _class_rng(seed: int, channel: int, truth_code: int) -> np.random.Generator:
    # one generator per (channel, truth class) so class streams are
    # independently reproducible
    return np.random.default_rng(np.random.SeedSequence([seed, channel, truth_code]))


def _fluorescence_amplitude(
    noise: NoiseModel, schedule: ProtocolSchedule, rtt_mid_ps: float
) -> tuple[float, float, float, float]:
    """Peak rate and gated-window integrals for the fluorescence process.

    Returns ``(amplitude_hz, decay_per_ps, gate0_ps, gate1_ps)`` where the
    amplitude is calibrated so the average rate over the usable return
    region equals the configured in-region rate.
    """
    rx0, rx1 = schedule.rx_window_ps
    fire = schedule.slr_fire_ps
    lam = math.log(2.0) / (noise.fluorescence_half_life_ms * PS_PER_MS)
    gate0 = float(max(rx0, fire))
    gate1 = float(rx1)
    tx0, _ = schedule.tx_window_ps
    sig0 = min(max((tx0 + rtt_mid_ps) % schedule.period_ps, gate0), gate1)
    if gate1 <= sig0 or noise.fluorescence_hz == 0.0:
        return 0.0, lam, gate0, gate1
    integral = (
        math.exp(-lam * (sig0 - fire)) - math.exp(-lam * (gate1 - fire))
    ) / lam
    amplitude = noise.fluorescence_hz * (gate1 - sig0) / integral
    return amplitude, lam, gate0, gate1


def simulate_pass(scenario: "Scenario", duration_s: float, seed: int) -> TagStream:
    """Generate a synthetic tag stream for one pass.

    For every transmitted pulse whose return falls inside the open receive
    window, a detection occurs with the per-pulse Poisson probability of the
    link budget; its time is the expected arrival plus a draw from the array
    impulse response plus Gaussian detector jitter, quantized to 1 ps.
    Backgrounds are Poisson processes as described by :class:`NoiseModel`.
    Fixed seeds give identical streams; each (channel, truth class) pair
    uses an independent generator.
    """
    if duration_s <= 0.0:
        raise ValueError(f"duration must be > 0, got {duration_s}")
    sched = scenario.schedule
    tx_spec = scenario.transmitter
    profile = scenario.range_profile
    t_total = round(duration_s * PS_PER_S)
    period = sched.period_ps
    n_periods = math.ceil(t_total / period)
    tx0, tx1 = sched.tx_window_ps
    rx0, rx1 = sched.rx_window_ps
    pp = tx_spec.pulse_period_ps
    pulses_per_window = (tx1 - tx0) // pp

    from .ccr_array import ccr_time_offsets  # local import to avoid cycles

    offsets = ccr_time_offsets(
        scenario.geometry, scenario.incidence_rad, scenario.azimuth_rad
    )
    sigma_pulse = fwhm_to_sigma(tx_spec.pulse_fwhm_ps)

    times, chans, truths = [], [], []

    def _append(t: np.ndarray, channel: int, code: int):
        t = t[(t >= 0) & (t < t_total)]
        times.append(t.astype(np.int64))
        chans.append(np.full(t.size, channel, dtype=np.int16))
        truths.append(np.full(t.size, code, dtype=np.int8))

    for rx in scenario.receivers:
        link = scenario.budget_for_channel(rx.channel)
        noise = scenario.noise_for_channel(rx.channel)
        sigma_jit = fwhm_to_sigma(rx.jitter_fwhm_ps)

        # --- signal -----------------------------------------------------
        p_det = link.detection_probability(scenario.mu_sat)
        rng = _class_rng(seed, rx.channel, TRUTH_CODES["signal"])
        counts = rng.binomial(pulses_per_window, p_det, size=n_periods)
        total = int(counts.sum())
        period_idx = np.repeat(np.arange(n_periods, dtype=np.int64), counts)
        k = rng.integers(0, pulses_per_window, size=total, dtype=np.int64)
        # first-photon semantics: at most one detection per pulse
        key = np.unique(period_idx * pulses_per_window + k)
        period_idx, k = key // pulses_per_window, key % pulses_per_window
        emit_rel = tx0 + k * pp
        emit_abs = period_idx * period + emit_rel
        in_run = emit_abs < t_total
        period_idx, emit_rel, emit_abs = (
            period_idx[in_run], emit_rel[in_run], emit_abs[in_run],
        )
        ref_rel = emit_rel + profile.rtt_ps_at(emit_abs)
        arr_mod = ref_rel % period
        observable = (arr_mod >= rx0) & (arr_mod < rx1)
        period_idx, ref_rel = period_idx[observable], ref_rel[observable]
        n_sig = ref_rel.size
        det_rel = (
            ref_rel
            + offsets[rng.integers(0, offsets.size, size=n_sig)]
            + rng.normal(0.0, sigma_pulse, size=n_sig)
            + rng.normal(0.0, sigma_jit, size=n_sig)
        )
        det_mod = det_rel % period
        inside = (det_mod >= rx0) & (det_mod < rx1)
        t_sig = period_idx[inside] * period + np.round(det_rel[inside]).astype(
            np.int64
        )
        _append(t_sig, rx.channel, TRUTH_CODES["signal"])

        # --- dark counts (whole period; the detector does not see the
        # shutter) ---------------------------------------------------------
        rng = _class_rng(seed, rx.channel, TRUTH_CODES["dark"])
        n_dark = rng.poisson(noise.dark_hz * duration_s)
        _append(
            rng.integers(0, t_total, size=n_dark, dtype=np.int64),
            rx.channel,
            TRUTH_CODES["dark"],
        )

        # --- albedo (open rx shutter only) --------------------------------
        rng = _class_rng(seed, rx.channel, TRUTH_CODES["albedo"])
        open_s = (rx1 - rx0) / PS_PER_S
        n_alb = rng.poisson(noise.albedo_hz * open_s * n_periods)
        t_alb = (
            rng.integers(0, n_periods, size=n_alb, dtype=np.int64) * period
            + rng.integers(rx0, rx1, size=n_alb, dtype=np.int64)
        )
        _append(t_alb, rx.channel, TRUTH_CODES["albedo"])

        # --- fluorescence tail of the ranging pulse ------------------------
        rng = _class_rng(seed, rx.channel, TRUTH_CODES["fluorescence"])
        rtt_mid = float(profile.rtt_ps_at(t_total // 2))
        amp, lam, gate0, gate1 = _fluorescence_amplitude(noise, sched, rtt_mid)
        if amp > 0.0:
            fire = sched.slr_fire_ps
            ea = math.exp(-lam * (gate0 - fire))
            eb = math.exp(-lam * (gate1 - fire))
            per_period = amp * (ea - eb) / lam / PS_PER_S
            n_fluo = rng.poisson(per_period * n_periods)
            u = rng.random(n_fluo)
            rel = fire - np.log(ea - u * (ea - eb)) / lam
            t_fluo = (
                rng.integers(0, n_periods, size=n_fluo, dtype=np.int64) * period
                + np.round(rel).astype(np.int64)
            )
            _append(t_fluo, rx.channel, TRUTH_CODES["fluorescence"])

    time_all = np.concatenate(times)
    chan_all = np.concatenate(chans)
    truth_all = np.concatenate(truths)
    order = np.lexsort((truth_all, chan_all, time_all))
    time_all, chan_all, truth_all = time_all[order], chan_all[order], truth_all[order]
    for ch in np.unique(chan_all):
        mask = chan_all == ch
        time_all[mask] = _strictly_increasing(time_all[mask])
    order = np.lexsort((chan_all, time_all))
    time_all, chan_all, truth_all = time_all[order], chan_all[order], truth_all[order]

    stream = TagStream(time_all, chan_all, truth_all)
    stream.metadata = {
        "scenario_name": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "seed": seed,
        "duration_s": duration_s,
        "n_events": int(len(stream)),
        "counts_by_truth": stream.counts_by_truth(),
        "channels": [int(c) for c in stream.channels],
    }
    return stream
