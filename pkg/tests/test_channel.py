import json
import math

import numpy as np
import pytest
from scipy import stats

from gnsslink.budget import signal_rate_hz
from gnsslink.ccr_array import array_impulse_response, ring_geometry
from gnsslink.channel import (
    ExpectedArrivals,
    NoiseModel,
    ProtocolSchedule,
    RangeProfile,
    TagStream,
    TransmitterSpec,
    effective_duty_cycle,
    expected_arrival,
    simulate_pass,
)
from gnsslink.units import PS_PER_MS, PS_PER_S, SPEED_OF_LIGHT_M_PER_S, GaussianPulse

from conftest import make_scenario


class TestSchedule:
    def test_defaults_valid(self):
        s = ProtocolSchedule()
        assert s.period_ps == 200 * PS_PER_MS
        assert s.rx_window_ps == (105 * PS_PER_MS, 180 * PS_PER_MS)

    def test_overlapping_windows_rejected(self):
        with pytest.raises(ValueError):
            ProtocolSchedule(tx_window_ms=(0.0, 110.0), rx_window_ms=(105.0, 180.0))

    def test_duty_cycle_bounds(self):
        with pytest.raises(ValueError):
            ProtocolSchedule(duty_cycle=0.0)

    def test_window_membership(self):
        s = ProtocolSchedule()
        assert bool(s.in_tx_window(50 * PS_PER_MS))
        assert not bool(s.in_tx_window(150 * PS_PER_MS))
        assert bool(s.in_rx_window(350 * PS_PER_MS))  # second period
        assert not bool(s.in_rx_window(95 * PS_PER_MS))


class TestEffectiveDutyCycle:
    def test_gnss_round_trip(self):
        # returns land in [130, 230]; the shutter closes at 180
        assert effective_duty_cycle(
            ProtocolSchedule(), 130 * PS_PER_MS
        ) == pytest.approx(0.25, rel=1e-12)

    def test_late_return_misses_shutter(self):
        assert effective_duty_cycle(ProtocolSchedule(), 180 * PS_PER_MS) == 0.0

    def test_fully_captured_return(self):
        s = ProtocolSchedule(rx_window_ms=(100.0, 200.0))
        assert effective_duty_cycle(s, 100 * PS_PER_MS) == pytest.approx(0.5)

    def test_wrap_around(self):
        s = ProtocolSchedule(tx_window_ms=(0.0, 100.0), rx_window_ms=(105.0, 180.0))
        # rtt of 150 ms: returns on [150, 250] -> [150, 200] + [0, 50]
        assert effective_duty_cycle(s, 150 * PS_PER_MS) == pytest.approx(0.15)

    def test_rtt_out_of_range(self):
        with pytest.raises(ValueError):
            effective_duty_cycle(ProtocolSchedule(), 200 * PS_PER_MS)


class TestRangeProfile:
    def test_constant_round_trip_time(self):
        prof = RangeProfile.constant(19_500e3)
        rtt_s = 2.0 * 19_500e3 / SPEED_OF_LIGHT_M_PER_S
        assert float(prof.rtt_ps_at(0)) == pytest.approx(rtt_s * 1e12, rel=1e-12)
        assert rtt_s * 1e3 == pytest.approx(130.0900, abs=1e-4)

    def test_second_range(self):
        prof = RangeProfile.constant(20_200e3)
        rtt_ms = float(prof.rtt_ps_at(0)) / PS_PER_MS
        assert rtt_ms == pytest.approx(134.7599, abs=1e-4)

    def test_interpolation(self):
        prof = RangeProfile(
            np.array([0, 100 * PS_PER_S]), np.array([19_500e3, 20_500e3])
        )
        assert prof.range_at(50 * PS_PER_S) == pytest.approx(20_000e3)

    def test_gnss_band_enforced(self):
        with pytest.raises(ValueError):
            RangeProfile.constant(18_000e3)
        with pytest.raises(ValueError):
            RangeProfile.constant(27_000e3)

    def test_csv_loader(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("t_s,range_m\n0.0,19500000.0\n300.0,19520000.0\n")
        prof = RangeProfile.from_csv(path)
        assert prof.mean_range_m == pytest.approx(19_510e3)

    def test_csv_bad_columns(self, tmp_path):
        path = tmp_path / "profile.csv"
        path.write_text("time,meters\n0,19500000\n")
        with pytest.raises(ValueError):
            RangeProfile.from_csv(path)


class TestExpectedArrival:
    PROF = RangeProfile.constant(19_500e3)
    SCHED = ProtocolSchedule()
    TX = TransmitterSpec()

    def test_first_pulse(self):
        t_ref = expected_arrival(0, self.PROF, self.SCHED, self.TX)
        assert t_ref == round(2.0 * 19_500e3 / SPEED_OF_LIGHT_M_PER_S * 1e12)

    def test_spacing_is_pulse_period(self):
        t4 = expected_arrival(4, self.PROF, self.SCHED, self.TX)
        t5 = expected_arrival(5, self.PROF, self.SCHED, self.TX)
        assert t5 - t4 == self.TX.pulse_period_ps

    def test_index_in_receive_phase_rejected(self):
        # pulse 10^7 would fire at 100 ms, just after the tx shutter closes
        with pytest.raises(ValueError):
            expected_arrival(10_000_000, self.PROF, self.SCHED, self.TX)

    def test_match_wraps_to_zero(self):
        arrivals = ExpectedArrivals(self.PROF, self.SCHED, self.TX)
        t_ref = arrivals.t_ref(12345)
        pp = self.TX.pulse_period_ps
        resid, valid, idx = arrivals.match(
            np.array([t_ref, t_ref + pp, t_ref + 3, t_ref - pp // 2 + 1])
        )
        assert np.all(valid)
        # t_ref is quantized to 1 ps, so residuals match within half a tick
        assert resid[0] == pytest.approx(0.0, abs=0.5)
        assert resid[1] == pytest.approx(0.0, abs=0.5)  # matched to next pulse
        assert idx[1] == 12346
        assert resid[2] == pytest.approx(3.0, abs=0.5)
        assert resid[3] == pytest.approx(-pp / 2 + 1, abs=0.5)

    def test_match_outside_return_region_invalid(self):
        arrivals = ExpectedArrivals(self.PROF, self.SCHED, self.TX)
        # 50 ms: shutter closed; 110 ms: open but before the first return
        _, valid, _ = arrivals.match(np.array([50 * PS_PER_MS, 110 * PS_PER_MS]))
        assert not valid[0] and not valid[1]


class TestTransmitter:
    def test_period(self):
        assert TransmitterSpec(1e8).pulse_period_ps == 10_000
        assert TransmitterSpec(1e9).pulse_period_ps == 1_000

    def test_non_integral_period_rejected(self):
        with pytest.raises(ValueError):
            TransmitterSpec(3e8)


class TestTagStream:
    def test_strictly_increasing_enforced(self):
        with pytest.raises(ValueError):
            TagStream(np.array([10, 10]), np.array([0, 0]))

    def test_csv_round_trip(self, tmp_path):
        stream = TagStream(
            np.array([100, 200, 350]),
            np.array([0, 1, 0]),
            np.array([0, 1, 3]),
            {"scenario_hash": "cafe", "seed": 5},
        )
        path = tmp_path / "tags.csv"
        stream.to_csv(path)
        back = TagStream.from_csv(path)
        assert np.array_equal(back.time_ps, stream.time_ps)
        assert np.array_equal(back.channel, stream.channel)
        assert np.array_equal(back.truth, stream.truth)

    def test_csv_without_truth(self, tmp_path):
        stream = TagStream(np.array([100, 200]), np.array([0, 0]), np.array([0, 1]))
        path = tmp_path / "tags.csv"
        stream.to_csv(path, include_truth=False)
        back = TagStream.from_csv(path)
        assert back.truth is None
        assert len(back) == 2

    def test_malformed_csv_rejected(self, tmp_path):
        path = tmp_path / "tags.csv"
        path.write_text("time_ps,channel\n12,zero\n")
        with pytest.raises(ValueError):
            TagStream.from_csv(path)


@pytest.fixture(scope="module")
def baseline_stream(baseline_scenario):
    return simulate_pass(baseline_scenario, 60.0, seed=11)


class TestSimulatePass:
    def test_zero_duration_rejected(self, baseline_scenario):
        with pytest.raises(ValueError):
            simulate_pass(baseline_scenario, 0.0, seed=1)

    def test_deterministic_for_fixed_seed(self, baseline_scenario):
        a = simulate_pass(baseline_scenario, 5.0, seed=3)
        b = simulate_pass(baseline_scenario, 5.0, seed=3)
        assert np.array_equal(a.time_ps, b.time_ps)
        assert np.array_equal(a.channel, b.channel)
        assert np.array_equal(a.truth, b.truth)
        c = simulate_pass(baseline_scenario, 5.0, seed=4)
        assert not np.array_equal(a.time_ps, c.time_ps)

    def test_byte_identical_csv(self, baseline_scenario, tmp_path):
        a = simulate_pass(baseline_scenario, 5.0, seed=3)
        b = simulate_pass(baseline_scenario, 5.0, seed=3)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        a.to_csv(pa)
        b.to_csv(pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_class_rates_converge(self, baseline_scenario, baseline_stream):
        sc = baseline_scenario
        duration = 60.0
        counts = baseline_stream.counts_by_truth()
        link = sc.budget_for_channel(0)
        rtt = float(sc.range_profile.rtt_ps_at(0))
        duty = effective_duty_cycle(sc.schedule, rtt)
        expected_signal = (
            signal_rate_hz(sc.mu_sat, sc.transmitter.rep_rate_hz, link.t_down, link.t_rx)
            * duty
            * duration
        )
        assert abs(counts["signal"] - expected_signal) <= 3.0 * math.sqrt(
            expected_signal
        )
        expected_dark = sc.noise.dark_hz * duration
        assert abs(counts["dark"] - expected_dark) <= 3.0 * math.sqrt(expected_dark)
        rx0, rx1 = sc.schedule.rx_window_ps
        open_frac = (rx1 - rx0) / sc.schedule.period_ps
        expected_albedo = sc.noise.albedo_hz * open_frac * duration
        assert abs(counts["albedo"] - expected_albedo) <= 3.0 * math.sqrt(
            expected_albedo
        )
        # fluorescence calibration: in-region average equals the configured rate
        lam = math.log(2.0) / (sc.noise.fluorescence_half_life_ms * PS_PER_MS)
        fire = sc.schedule.slr_fire_ps
        sig0 = (sc.schedule.tx_window_ps[0] + rtt) % sc.schedule.period_ps
        integral = (
            math.exp(-lam * (sig0 - fire)) - math.exp(-lam * (rx1 - fire))
        ) / lam
        amplitude = sc.noise.fluorescence_hz * (rx1 - sig0) / integral
        gate_int = (
            math.exp(-lam * (rx0 - fire)) - math.exp(-lam * (rx1 - fire))
        ) / lam
        expected_fluo = amplitude * gate_int / PS_PER_S * (duration * 5)
        assert abs(counts["fluorescence"] - expected_fluo) <= 3.0 * math.sqrt(
            expected_fluo
        )

    def test_optical_events_respect_shutter(self, baseline_scenario, baseline_stream):
        sched = baseline_scenario.schedule
        optical = baseline_stream.truth != 1  # everything except dark counts
        assert np.all(sched.in_rx_window(baseline_stream.time_ps[optical]))
        # dark counts do reach the closed-shutter region
        dark_t = baseline_stream.time_ps[baseline_stream.truth == 1]
        assert np.any(~sched.in_rx_window(dark_t))

    def test_no_source_means_no_signal(self, baseline_doc):
        baseline_doc["mu_sat"] = 1e-30
        sc = make_scenario(baseline_doc)
        stream = simulate_pass(sc, 10.0, seed=2)
        assert stream.counts_by_truth()["signal"] == 0
        assert len(stream) > 0

    def test_at_most_one_detection_per_pulse(self, baseline_scenario, baseline_stream):
        sc = baseline_scenario
        arrivals = ExpectedArrivals(sc.range_profile, sc.schedule, sc.transmitter)
        sig_t = baseline_stream.time_ps[baseline_stream.truth == 0]
        _, valid, idx = arrivals.match(sig_t)
        assert np.unique(idx[valid]).size == idx[valid].size

    def test_signal_residuals_match_impulse_response(self, baseline_doc):
        # noise off, source brightness up: a clean sample of the return shape
        baseline_doc["mu_sat"] = 296.0
        for key in ("dark_hz", "fluorescence_hz", "albedo_hz"):
            baseline_doc["noise"][key] = 0.0
        sc = make_scenario(baseline_doc)
        stream = simulate_pass(sc, 300.0, seed=17)
        n = len(stream)
        assert n > 80_000
        arrivals = ExpectedArrivals(sc.range_profile, sc.schedule, sc.transmitter)
        resid, valid, _ = arrivals.match(stream.time_ps)
        assert np.all(valid)
        # analytic shape: impulse response convolved with the detector jitter
        fwhm_eff = math.hypot(
            sc.transmitter.pulse_fwhm_ps, sc.receivers[0].jitter_fwhm_ps
        )
        prof = array_impulse_response(
            sc.geometry,
            sc.incidence_rad,
            GaussianPulse(fwhm_eff),
            bin_width_ps=1.0,
            azimuth_rad=sc.azimuth_rad,
            pad_sigmas=8.0,
        )
        edges, cdf = prof.cdf()
        result = stats.kstest(
            resid, lambda x: np.interp(x, edges, cdf, left=0.0, right=1.0)
        )
        assert result.statistic < 0.02
