"""Desk-scale simulator and analysis toolkit for single-photon exchange
between GNSS-altitude satellites and an optical ground station."""

from .units import (
    GaussianPulse,
    db_from_transmittance,
    fwhm_to_sigma,
    transmittance_from_db,
)
from .budget import (
    CcrArraySpec,
    CcrSpec,
    LinkBudget,
    NoiseBaseline,
    Projection,
    ReceiverSpec,
    Telescope,
    UpgradePlan,
    diffraction_cross_section,
    diffraction_ffdp,
    downlink_budget,
    estimate_mu_sat,
    expected_snr,
    project_upgraded_link,
    receiver_transmittance,
)
from .ccr_array import (
    ArrayGeometry,
    TemporalProfile,
    array_impulse_response,
    ccr_time_offsets,
    lobe_displacement,
    peak_to_peak,
    ring_geometry,
    velocity_aberration_check,
)
from .channel import (
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
from .analysis import (
    AnalysisParams,
    Histogram,
    IntervalStats,
    PassSummary,
    estimate_pass_summary,
    filter_intervals,
    interval_stats,
    period_occupancy,
    residuals,
    windowed_counts,
)
from .scenario import Scenario, ScenarioError, load_scenario, load_upgrade_plan

__version__ = "0.1.0"
