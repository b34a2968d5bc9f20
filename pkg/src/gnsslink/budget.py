"""Down-link and receiver transmittance models, and the upgraded-link projection.

Two independent diffraction models are provided for the satellite-to-ground
leg of a retroreflected link:

* ``ffdp``: far-field diffraction pattern of a single uncoated (TIR)
  corner cube. The back-reflected pattern has a reduced central peak
  (factor 0.264 relative to a filled circular aperture of the same area)
  and six lateral lobes at roughly 30% of that peak; a ground station
  sitting on a lateral lobe therefore collects

      t_diff = 0.264 * 0.3 * A_ccr * A_tel / (lambda^2 * R^2)

* ``cross_section``: top-hat approximation of the reflected lobe with
  solid angle derived from the array optical cross-section ``Sigma``:

      t_diff = Sigma / (4 * pi * rho * A_rra) * A_tel / R^2

Both scale exactly as 1/R^2 and agree at GNSS ranges when ``Sigma`` is
chosen consistently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .units import db_from_transmittance, transmittance_from_db

TIR_CENTRAL_PEAK_FACTOR = 0.264
LATERAL_LOBE_FACTOR = 0.3

#: below this optical depth the per-pulse detection probability is linearized
_POISSON_LINEAR_THRESHOLD = 1e-3


@dataclass(frozen=True)
class CcrSpec:
    """Single corner-cube retroreflector."""

    diameter_m: float
    reflectivity: float = 0.93
    coated: bool = False

    def __post_init__(self):
        if not 0.0 < self.diameter_m < 0.2:
            raise ValueError(f"CCR diameter out of range: {self.diameter_m} m")
        if not 0.0 < self.reflectivity <= 1.0:
            raise ValueError(f"reflectivity out of range: {self.reflectivity}")

    @property
    def area_sqm(self) -> float:
        return math.pi * (self.diameter_m / 2.0) ** 2


@dataclass(frozen=True)
class CcrArraySpec:
    """Optical constants of a retroreflector array.

    ``effective_area_sqm`` defaults to ``count`` times the single-CCR area.
    ``cross_section_sqm`` is the steradian-normalized optical cross-section
    used by the top-hat model; it is satellite-specific and must be supplied
    to evaluate that model.
    """

    ccr: CcrSpec
    count: int
    shape: str = "ring"
    outer_diameter_m: float | None = None
    inner_diameter_m: float | None = None
    width_m: float | None = None
    height_m: float | None = None
    effective_area_sqm: float | None = None
    cross_section_sqm: float | None = None

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError(f"CCR count must be positive, got {self.count}")
        if self.shape not in ("ring", "rectangle", "disk"):
            raise ValueError(f"unknown array shape: {self.shape!r}")
        if self.effective_area_sqm is None:
            object.__setattr__(
                self, "effective_area_sqm", self.count * self.ccr.area_sqm
            )
        if self.effective_area_sqm > self.count * self.ccr.area_sqm * (1 + 1e-9):
            raise ValueError(
                "effective area exceeds the summed CCR aperture area"
            )
        if self.cross_section_sqm is not None and self.cross_section_sqm <= 0.0:
            raise ValueError("cross-section must be positive")

    @property
    def top_hat_solid_angle_sr(self) -> float:
        """Solid angle of the equivalent top-hat reflection lobe."""
        if self.cross_section_sqm is None:
            raise ValueError("array cross-section not specified")
        return (
            4.0
            * math.pi
            * self.ccr.reflectivity
            * self.effective_area_sqm
            / self.cross_section_sqm
        )


@dataclass(frozen=True)
class Telescope:
    aperture_m: float

    def __post_init__(self):
        if self.aperture_m <= 0.0:
            raise ValueError(f"aperture must be > 0, got {self.aperture_m}")

    @property
    def area_sqm(self) -> float:
        return math.pi * (self.aperture_m / 2.0) ** 2


@dataclass(frozen=True)
class ReceiverSpec:
    """One detection channel behind the shared telescope."""

    channel: int = 0
    optics_loss_db: float = 8.8
    efficiency: float = 0.5
    dark_rate_hz: float = 400.0
    jitter_fwhm_ps: float = 40.0

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise ValueError(f"efficiency out of range: {self.efficiency}")
        if self.optics_loss_db < 0.0:
            raise ValueError("optics loss must be >= 0 dB")
        if self.dark_rate_hz < 0.0:
            raise ValueError("dark rate must be >= 0")
        if self.jitter_fwhm_ps <= 0.0:
            raise ValueError("jitter FWHM must be > 0")


def receiver_transmittance(rx: ReceiverSpec) -> float:
    """Receiver transmittance: optics loss times detector quantum efficiency."""
    return transmittance_from_db(rx.optics_loss_db) * rx.efficiency


def diffraction_ffdp(
    ccr: CcrSpec, telescope: Telescope, wavelength_m: float, slant_range_m: float
) -> float:
    """Lateral-lobe diffraction transmittance of a single TIR corner cube.

    Clamped to 1 since the far-field expression diverges at short range.
    """
    if slant_range_m <= 0.0:
        raise ValueError(f"slant range must be > 0, got {slant_range_m}")
    if wavelength_m <= 0.0:
        raise ValueError(f"wavelength must be > 0, got {wavelength_m}")
    t = (
        TIR_CENTRAL_PEAK_FACTOR
        * LATERAL_LOBE_FACTOR
        * ccr.area_sqm
        * telescope.area_sqm
        / (wavelength_m**2 * slant_range_m**2)
    )
    return min(t, 1.0)


def diffraction_cross_section(
    array: CcrArraySpec, telescope: Telescope, slant_range_m: float
) -> float:
    """Top-hat diffraction transmittance from the array cross-section."""
    if slant_range_m <= 0.0:
        raise ValueError(f"slant range must be > 0, got {slant_range_m}")
    omega = array.top_hat_solid_angle_sr  # raises if Sigma missing
    if omega <= 0.0:
        raise ValueError("degenerate top-hat solid angle")
    return min(telescope.area_sqm / (omega * slant_range_m**2), 1.0)


def matched_cross_section(
    t_diff: float,
    array: CcrArraySpec,
    telescope: Telescope,
    slant_range_m: float,
) -> float:
    """Cross-section that makes the top-hat model reproduce ``t_diff``."""
    return (
        t_diff
        * 4.0
        * math.pi
        * array.ccr.reflectivity
        * array.effective_area_sqm
        * slant_range_m**2
        / telescope.area_sqm
    )


@dataclass(frozen=True)
class LinkBudget:
    """Down-link plus receiver transmittance decomposition."""

    model: str
    t_diff: float
    t_a: float
    t_rx: float
    t_down: float = field(init=False)
    l_down_db: float = field(init=False)

    def __post_init__(self):
        t_down = self.t_diff * self.t_a
        object.__setattr__(self, "t_down", t_down)
        object.__setattr__(self, "l_down_db", db_from_transmittance(t_down))

    @property
    def l_rx_db(self) -> float:
        return db_from_transmittance(self.t_rx)

    def detection_probability(self, mu_sat: float) -> float:
        """Per-pulse detection probability for ``mu_sat`` photons at reflection.

        Poisson statistics give ``1 - exp(-mu * t_down * t_rx)``; at the
        optical depths of interest the linearized form is used.
        """
        depth = mu_sat * self.t_down * self.t_rx
        if depth < _POISSON_LINEAR_THRESHOLD:
            return depth
        return 1.0 - math.exp(-depth)


def downlink_budget(
    model: str,
    slant_range_m: float,
    telescope: Telescope,
    receiver: ReceiverSpec,
    atmosphere_loss_db: float = 0.4,
    wavelength_m: float | None = None,
    ccr: CcrSpec | None = None,
    array: CcrArraySpec | None = None,
) -> LinkBudget:
    """Assemble a :class:`LinkBudget` for the chosen diffraction model.

    ``model`` is ``"ffdp"`` (needs ``ccr`` and ``wavelength_m``) or
    ``"cross_section"`` (needs ``array`` with a cross-section).
    """
    if atmosphere_loss_db < 0.0:
        raise ValueError("atmospheric loss must be >= 0 dB")
    if model == "ffdp":
        if ccr is None or wavelength_m is None:
            raise ValueError("ffdp model needs a CCR spec and a wavelength")
        t_diff = diffraction_ffdp(ccr, telescope, wavelength_m, slant_range_m)
    elif model == "cross_section":
        if array is None:
            raise ValueError("cross_section model needs an array spec")
        t_diff = diffraction_cross_section(array, telescope, slant_range_m)
    else:
        raise ValueError(f"unknown link model: {model!r}")
    return LinkBudget(
        model=model,
        t_diff=t_diff,
        t_a=transmittance_from_db(atmosphere_loss_db),
        t_rx=receiver_transmittance(receiver),
    )


def budget_from_losses(downlink_loss_db: float, receiver: ReceiverSpec) -> LinkBudget:
    """Budget pinned to an explicitly known down-link loss (e.g. measured)."""
    return LinkBudget(
        model="fixed",
        t_diff=transmittance_from_db(downlink_loss_db),
        t_a=1.0,
        t_rx=receiver_transmittance(receiver),
    )


def estimate_mu_sat(
    r_det_hz: float, rep_rate_hz: float, t_down: float, t_rx: float
) -> float:
    """Mean photons per pulse at the satellite from the detection rate.

    Inverts ``R_det = mu * nu_tx * t_down * t_rx``.
    """
    if r_det_hz < 0.0:
        raise ValueError("detection rate must be >= 0")
    denom = rep_rate_hz * t_down * t_rx
    if denom <= 0.0:
        raise ValueError("rep rate and transmittances must be > 0")
    return r_det_hz / denom


def signal_rate_hz(
    mu_sat: float, rep_rate_hz: float, t_down: float, t_rx: float
) -> float:
    """Forward duty-cycle-corrected signal rate ``mu * nu_tx * t_down * t_rx``."""
    return mu_sat * rep_rate_hz * t_down * t_rx


def in_window_background_hz(
    background_hz: float, window_ps: float, period_ps: float
) -> float:
    """Background rate falling inside a window of ``window_ps`` per pulse period."""
    if not 0.0 < window_ps <= period_ps:
        raise ValueError(
            f"window ({window_ps} ps) must be in (0, period = {period_ps} ps]"
        )
    return background_hz * window_ps / period_ps


def expected_snr(
    signal_hz: float, background_hz: float, window_ps: float, period_ps: float
) -> float:
    """Signal-to-background count ratio inside the analysis window."""
    return signal_hz / in_window_background_hz(background_hz, window_ps, period_ps)


@dataclass(frozen=True)
class NoiseBaseline:
    """Measured signal/background decomposition of a reference pass."""

    r_det_hz: float
    mu_sat: float
    dark_hz: float
    fluorescence_hz: float
    albedo_hz: float
    window_ps: float
    rep_rate_hz: float
    filter_band_nm: float = 3.0

    def __post_init__(self):
        for name in ("r_det_hz", "mu_sat", "window_ps", "rep_rate_hz", "filter_band_nm"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        for name in ("dark_hz", "fluorescence_hz", "albedo_hz"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def period_ps(self) -> float:
        return 1e12 / self.rep_rate_hz

    @property
    def background_hz(self) -> float:
        return self.dark_hz + self.fluorescence_hz + self.albedo_hz

    @property
    def snr(self) -> float:
        return expected_snr(
            self.r_det_hz, self.background_hz, self.window_ps, self.period_ps
        )


@dataclass(frozen=True)
class UpgradePlan:
    """Transmitter/receiver upgrades applied on top of a measured baseline.

    ``diffraction_gain_db`` is a positive gain (a narrower down-going beam);
    ``bs_removal_signal_factor`` is the signal enhancement from removing
    tracking beam-splitters, which also scales the albedo background.
    """

    source_mu: float
    diffraction_gain_db: float
    bs_removal_signal_factor: float
    filter_band_nm: float
    dark_rate_hz: float
    window_ps: float
    rep_rate_hz: float
    fluorescence_removed: bool = True
    albedo_scale: float = 1.0
    tx_divergence_semi_angle_rad: float = 10e-6

    def __post_init__(self):
        for name in (
            "source_mu",
            "bs_removal_signal_factor",
            "filter_band_nm",
            "window_ps",
            "rep_rate_hz",
            "albedo_scale",
            "tx_divergence_semi_angle_rad",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.dark_rate_hz < 0.0:
            raise ValueError("dark_rate_hz must be >= 0")
        if self.window_ps > 1e12 / self.rep_rate_hz:
            raise ValueError(
                "analysis window larger than the pulse period of the plan"
            )


@dataclass(frozen=True)
class Projection:
    """Projected performance of the upgraded link."""

    r_det_hz: float
    snr: float
    signal_factor: float
    dark_hz: float
    fluorescence_hz: float
    albedo_hz: float
    window_ps: float
    period_ps: float

    @property
    def background_hz(self) -> float:
        return self.dark_hz + self.fluorescence_hz + self.albedo_hz

    @property
    def in_window_background_hz(self) -> float:
        return in_window_background_hz(
            self.background_hz, self.window_ps, self.period_ps
        )


def project_upgraded_link(baseline: NoiseBaseline, plan: UpgradePlan) -> Projection:
    """Scale a measured baseline through an upgrade plan.

    Signal chain: source brightness ratio, diffraction gain, beam-splitter
    removal, repetition-rate ratio. Background chain: detector dark rate is
    taken from the plan (intrinsic to the detector), fluorescence is zeroed
    when the ranging pulse is removed, albedo scales with the filter-band
    ratio and with the beam-splitter removal factor.
    """
    signal_factor = (
        (plan.source_mu / baseline.mu_sat)
        * 10.0 ** (plan.diffraction_gain_db / 10.0)
        * plan.bs_removal_signal_factor
        * (plan.rep_rate_hz / baseline.rep_rate_hz)
    )
    r_proj = baseline.r_det_hz * signal_factor
    fluo = 0.0 if plan.fluorescence_removed else baseline.fluorescence_hz
    albedo = (
        baseline.albedo_hz
        * (plan.filter_band_nm / baseline.filter_band_nm)
        * plan.bs_removal_signal_factor
        * plan.albedo_scale
    )
    period_ps = 1e12 / plan.rep_rate_hz
    proj = Projection(
        r_det_hz=r_proj,
        snr=0.0,
        signal_factor=signal_factor,
        dark_hz=plan.dark_rate_hz,
        fluorescence_hz=fluo,
        albedo_hz=albedo,
        window_ps=plan.window_ps,
        period_ps=period_ps,
    )
    snr = r_proj / proj.in_window_background_hz
    return replace(proj, snr=snr)
