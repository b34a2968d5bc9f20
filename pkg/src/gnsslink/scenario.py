"""Scenario files: one JSON document describing a full pass.

Keys carry explicit units (``slant_range_km``, ``window_ps``, ...) because
unit mix-ups dominate bug reports in this domain. Referenced CSV files
(range profile, array geometry) are resolved relative to the scenario file.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .budget import (
    CcrArraySpec,
    CcrSpec,
    LinkBudget,
    ReceiverSpec,
    Telescope,
    budget_from_losses,
    downlink_budget,
)
from .analysis import AnalysisParams
from .ccr_array import (
    ArrayGeometry,
    disk_geometry,
    geometry_from_csv,
    rectangle_geometry,
    ring_geometry,
)
from .channel import NoiseModel, ProtocolSchedule, RangeProfile, TransmitterSpec

LINK_MODELS = ("ffdp", "cross_section")


class ScenarioError(Exception):
    """Configuration problem; the message names the offending key."""


def _get(d: dict, key: str, ctx: str, required: bool = True, default=None):
    if key not in d:
        if required:
            raise ScenarioError(f"scenario missing key '{ctx}{key}'")
        return default
    return d[key]


def _num(d: dict, key: str, ctx: str, required: bool = True, default=None):
    val = _get(d, key, ctx, required, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(f"scenario key '{ctx}{key}' must be a number")
    return float(val)


@dataclass(eq=False)
class Scenario:
    """Validated, unit-normalized view of one scenario file."""

    name: str
    wavelength_m: float
    telescope: Telescope
    atmosphere_loss_db: float
    mu_sat: float
    range_profile: RangeProfile
    ccr: CcrSpec
    array_spec: CcrArraySpec
    geometry: ArrayGeometry
    incidence_rad: float
    transmitter: TransmitterSpec
    receivers: list[ReceiverSpec]
    schedule: ProtocolSchedule
    noise: NoiseModel
    analysis: AnalysisParams
    azimuth_rad: float | None = None
    downlink_loss_db: float | None = None
    noise_overrides: dict[int, NoiseModel] = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def scenario_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def receiver(self, channel: int) -> ReceiverSpec:
        for rx in self.receivers:
            if rx.channel == channel:
                return rx
        raise ScenarioError(f"scenario has no receiver for channel {channel}")

    def noise_for_channel(self, channel: int) -> NoiseModel:
        return self.noise_overrides.get(channel, self.noise)

    def budget_for_channel(
        self, channel: int = 0, model: str | None = None
    ) -> LinkBudget:
        """Link budget for one channel.

        Without an explicit ``model``, an explicitly configured down-link
        loss takes precedence (e.g. a measured value); otherwise the single
        corner-cube diffraction model is evaluated at the mean slant range.
        """
        rx = self.receiver(channel)
        if model is None and self.downlink_loss_db is not None:
            return budget_from_losses(self.downlink_loss_db, rx)
        return downlink_budget(
            model or "ffdp",
            self.range_profile.mean_range_m,
            self.telescope,
            rx,
            atmosphere_loss_db=self.atmosphere_loss_db,
            wavelength_m=self.wavelength_m,
            ccr=self.ccr,
            array=self.array_spec,
        )


def _build_geometry(sat: dict, ccr: CcrSpec, base_dir: Path) -> ArrayGeometry:
    csv_ref = _get(sat, "geometry_csv", "satellite.", required=False)
    if csv_ref:
        path = base_dir / csv_ref
        if not path.exists():
            raise ScenarioError(f"satellite.geometry_csv file not found: {path}")
        return geometry_from_csv(path)
    shape = _get(sat, "array_shape", "satellite.")
    count = int(_num(sat, "array_count", "satellite."))
    try:
        if shape == "ring":
            return ring_geometry(count, _num(sat, "array_outer_diameter_m", "satellite."))
        if shape == "disk":
            return disk_geometry(count, _num(sat, "array_outer_diameter_m", "satellite."))
        if shape == "rectangle":
            width = _num(sat, "array_width_m", "satellite.")
            height = _num(sat, "array_height_m", "satellite.")
            columns = int(round(math.sqrt(count * width / height))) or 1
            rows = max(1, round(count / columns))
            return rectangle_geometry(columns, rows, width, height)
    except ValueError as exc:
        raise ScenarioError(f"satellite array geometry invalid: {exc}") from exc
    raise ScenarioError(f"satellite.array_shape unknown: {shape!r}")


def scenario_from_dict(doc: dict, base_dir: Path | str = ".") -> Scenario:
    """Validate a scenario document and build the runtime objects."""
    base_dir = Path(base_dir)
    try:
        name = _get(doc, "name", "")
        wavelength_m = _num(doc, "wavelength_nm", "") * 1e-9
        telescope = Telescope(_num(doc, "telescope_aperture_m", ""))
        atmosphere = _num(doc, "atmosphere_loss_db", "", required=False, default=0.4)
        mu_sat = _num(doc, "mu_sat", "")
        downlink_db = _num(doc, "downlink_loss_db", "", required=False)

        profile_csv = _get(doc, "range_profile_csv", "", required=False)
        if profile_csv:
            path = base_dir / profile_csv
            if not path.exists():
                raise ScenarioError(f"range_profile_csv file not found: {path}")
            profile = RangeProfile.from_csv(path)
        else:
            profile = RangeProfile.constant(_num(doc, "slant_range_km", "") * 1e3)

        sat = _get(doc, "satellite", "")
        ccr = CcrSpec(
            diameter_m=_num(sat, "ccr_diameter_mm", "satellite.") * 1e-3,
            reflectivity=_num(sat, "ccr_reflectivity", "satellite.", False, 0.93),
            coated=bool(_get(sat, "ccr_coated", "satellite.", False, False)),
        )
        geometry = _build_geometry(sat, ccr, base_dir)
        array_spec = CcrArraySpec(
            ccr=ccr,
            count=geometry.count,
            shape=_get(sat, "array_shape", "satellite.", False, geometry.shape),
            outer_diameter_m=_num(sat, "array_outer_diameter_m", "satellite.", False),
            inner_diameter_m=_num(sat, "array_inner_diameter_m", "satellite.", False),
            width_m=_num(sat, "array_width_m", "satellite.", False),
            height_m=_num(sat, "array_height_m", "satellite.", False),
            effective_area_sqm=_num(sat, "array_effective_area_sqm", "satellite.", False),
            cross_section_sqm=_num(sat, "array_cross_section_sqm", "satellite.", False),
        )
        incidence_rad = math.radians(_num(sat, "incidence_deg", "satellite.", False, 0.0))
        azimuth_deg = _num(sat, "azimuth_deg", "satellite.", False)
        azimuth_rad = None if azimuth_deg is None else math.radians(azimuth_deg)

        tx = _get(doc, "transmitter", "")
        transmitter = TransmitterSpec(
            rep_rate_hz=_num(tx, "rep_rate_hz", "transmitter."),
            pulse_fwhm_ps=_num(tx, "pulse_fwhm_ps", "transmitter."),
        )

        rx_docs = _get(doc, "receivers", "")
        if not isinstance(rx_docs, list) or not rx_docs:
            raise ScenarioError("scenario key 'receivers' must be a non-empty list")
        receivers, overrides = [], {}
        for i, rd in enumerate(rx_docs):
            ctx = f"receivers[{i}]."
            channel = int(_num(rd, "channel", ctx, False, i))
            receivers.append(
                ReceiverSpec(
                    channel=channel,
                    optics_loss_db=_num(rd, "optics_loss_db", ctx),
                    efficiency=_num(rd, "efficiency", ctx),
                    dark_rate_hz=_num(rd, "dark_rate_hz", ctx, False, 400.0),
                    jitter_fwhm_ps=_num(rd, "jitter_fwhm_ps", ctx, False, 40.0),
                )
            )
            if "noise" in rd:
                overrides[channel] = _noise_model(rd["noise"], ctx + "noise.")
        if len({r.channel for r in receivers}) != len(receivers):
            raise ScenarioError("receivers must have distinct channel ids")

        sched_doc = _get(doc, "protocol", "")
        schedule = ProtocolSchedule(
            period_ms=_num(sched_doc, "period_ms", "protocol."),
            tx_window_ms=tuple(_get(sched_doc, "tx_window_ms", "protocol.")),
            rx_window_ms=tuple(_get(sched_doc, "rx_window_ms", "protocol.")),
            slr_fire_ms=_num(sched_doc, "slr_fire_ms", "protocol.", False, 100.0),
            duty_cycle=_num(sched_doc, "duty_cycle", "protocol.", False, 0.3),
        )

        noise = _noise_model(_get(doc, "noise", ""), "noise.")

        an = _get(doc, "analysis", "", required=False, default={})
        analysis = AnalysisParams(
            tau_s=_num(an, "tau_s", "analysis.", False, 5.0),
            window_ps=_num(an, "window_ps", "analysis.", False, 400.0),
            duty_cycle=_num(an, "duty_cycle", "analysis.", False, schedule.duty_cycle),
            threshold_hz=_num(an, "threshold_hz", "analysis.", False, 30.0),
            bin_width_ps=_num(an, "bin_width_ps", "analysis.", False, 100.0),
            exclusion_ps=_num(an, "exclusion_ps", "analysis.", False, 1000.0),
        )
    except ScenarioError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc

    return Scenario(
        name=str(name),
        wavelength_m=wavelength_m,
        telescope=telescope,
        atmosphere_loss_db=atmosphere,
        mu_sat=mu_sat,
        range_profile=profile,
        ccr=ccr,
        array_spec=array_spec,
        geometry=geometry,
        incidence_rad=incidence_rad,
        azimuth_rad=azimuth_rad,
        transmitter=transmitter,
        receivers=receivers,
        schedule=schedule,
        noise=noise,
        analysis=analysis,
        downlink_loss_db=downlink_db,
        noise_overrides=overrides,
        raw=doc,
    )


def _noise_model(doc: dict, ctx: str) -> NoiseModel:
    return NoiseModel(
        dark_hz=_num(doc, "dark_hz", ctx),
        fluorescence_hz=_num(doc, "fluorescence_hz", ctx),
        albedo_hz=_num(doc, "albedo_hz", ctx),
        fluorescence_half_life_ms=_num(
            doc, "fluorescence_half_life_ms", ctx, False, 5.0
        ),
        filter_band_nm=_num(doc, "filter_band_nm", ctx, False, 3.0),
    )


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"scenario file {path} must contain a JSON object")
    return scenario_from_dict(doc, path.parent)


def baseline_from_scenario(scenario: Scenario, channel: int = 0) -> "NoiseBaseline":
    """Measured-pass baseline for the upgraded-link projection."""
    from .budget import NoiseBaseline, signal_rate_hz

    link = scenario.budget_for_channel(channel)
    noise = scenario.noise_for_channel(channel)
    return NoiseBaseline(
        r_det_hz=signal_rate_hz(
            scenario.mu_sat, scenario.transmitter.rep_rate_hz, link.t_down, link.t_rx
        ),
        mu_sat=scenario.mu_sat,
        dark_hz=noise.dark_hz,
        fluorescence_hz=noise.fluorescence_hz,
        albedo_hz=noise.albedo_hz,
        window_ps=scenario.analysis.window_ps,
        rep_rate_hz=scenario.transmitter.rep_rate_hz,
        filter_band_nm=noise.filter_band_nm,
    )


def load_upgrade_plan(path) -> "UpgradePlan":
    """Load an upgrade-plan JSON file."""
    from .budget import UpgradePlan

    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"plan file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"plan file {path} is not valid JSON: {exc}") from exc
    try:
        return UpgradePlan(
            source_mu=_num(doc, "source_mu", "plan."),
            diffraction_gain_db=_num(doc, "diffraction_gain_db", "plan."),
            bs_removal_signal_factor=_num(doc, "bs_removal_signal_factor", "plan."),
            filter_band_nm=_num(doc, "filter_band_nm", "plan."),
            dark_rate_hz=_num(doc, "dark_rate_hz", "plan."),
            window_ps=_num(doc, "window_ps", "plan."),
            rep_rate_hz=_num(doc, "rep_rate_hz", "plan."),
            fluorescence_removed=bool(
                _get(doc, "fluorescence_removed", "plan.", False, True)
            ),
            albedo_scale=_num(doc, "albedo_scale", "plan.", False, 1.0),
            tx_divergence_semi_angle_rad=_num(
                doc, "tx_divergence_semi_angle_urad", "plan.", False, 10.0
            )
            * 1e-6,
        )
    except ValueError as exc:
        raise ScenarioError(f"invalid plan: {exc}") from exc
