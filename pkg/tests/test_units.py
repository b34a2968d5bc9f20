import math

import numpy as np
import pytest

from gnsslink.units import (
    GaussianPulse,
    db_from_transmittance,
    fwhm_to_sigma,
    sigma_to_fwhm,
    transmittance_from_db,
)


class TestDbConversion:
    def test_identity_case(self):
        assert db_from_transmittance(1.0) == 0.0
        assert transmittance_from_db(0.0) == 1.0

    def test_table_loss_value(self):
        # 62.1 dB corresponds to t = 10^-6.21
        assert db_from_transmittance(10**-6.21) == pytest.approx(62.1, abs=1e-9)

    def test_half_transmittance(self):
        assert db_from_transmittance(0.5) == pytest.approx(
            3.0102999566398116, rel=1e-12
        )

    def test_three_db(self):
        assert transmittance_from_db(3.0) == pytest.approx(
            0.5011872336272722, rel=1e-12
        )

    def test_receiver_loss_value(self):
        assert transmittance_from_db(11.8) == pytest.approx(
            0.06606934480075961, rel=1e-12
        )

    @pytest.mark.parametrize("bad", [0.0, -0.5, 1.0001])
    def test_domain_errors(self, bad):
        with pytest.raises(ValueError):
            db_from_transmittance(bad)

    def test_negative_loss_rejected(self):
        with pytest.raises(ValueError):
            transmittance_from_db(-0.1)

    def test_round_trip_identity(self):
        # full-scale sweep of the property, vectorized
        rng = np.random.default_rng(20240831)
        t = rng.uniform(1e-12, 1.0, 1_000_000)
        back = transmittance_from_db(db_from_transmittance(t))
        assert np.max(np.abs(back - t) / t) < 1e-12

    def test_db_additive_where_transmittance_multiplicative(self):
        rng = np.random.default_rng(7)
        t1 = rng.uniform(1e-6, 1.0, 10_000)
        t2 = rng.uniform(1e-6, 1.0, 10_000)
        lhs = db_from_transmittance(t1 * t2)
        rhs = db_from_transmittance(t1) + db_from_transmittance(t2)
        assert np.max(np.abs(lhs - rhs)) < 1e-9


class TestGaussianWidths:
    def test_100ps_pulse(self):
        assert fwhm_to_sigma(100.0) == pytest.approx(42.46609001440095, rel=1e-12)

    def test_40ps_jitter(self):
        assert fwhm_to_sigma(40.0) == pytest.approx(16.98643600576038, rel=1e-12)

    def test_definitional_inverse(self):
        assert fwhm_to_sigma(2.0 * math.sqrt(2.0 * math.log(2.0))) == pytest.approx(
            1.0, rel=1e-12
        )
        assert sigma_to_fwhm(fwhm_to_sigma(123.4)) == pytest.approx(123.4, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            fwhm_to_sigma(0.0)
        with pytest.raises(ValueError):
            sigma_to_fwhm(-1.0)


class TestGaussianPulse:
    def test_density_integrates_to_one(self):
        pulse = GaussianPulse(fwhm_ps=100.0, center_ps=30.0)
        t = np.linspace(-500.0, 600.0, 20001)
        integral = np.trapezoid(pulse.density(t), t)
        assert integral == pytest.approx(1.0, abs=1e-9)

    def test_sigma_property(self):
        assert GaussianPulse(100.0).sigma_ps == pytest.approx(42.46609001440095)

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            GaussianPulse(0.0)
