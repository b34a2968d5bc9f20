"""Command-line front end.

Subcommands: ``budget``, ``simulate``, ``analyze``, ``response``,
``project``. All outputs are CSV/JSON files with a provenance comment
header plus rendered PNG figures; exit codes are 0 (success), 2
(usage/configuration error) and 3 (data error).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import plots
from .analysis import analyze_channel, period_occupancy
from .budget import downlink_budget, project_upgraded_link
from .ccr_array import array_impulse_response, peak_to_peak
from .channel import ExpectedArrivals, TagStream, simulate_pass
from .scenario import (
    LINK_MODELS,
    Scenario,
    ScenarioError,
    baseline_from_scenario,
    load_scenario,
    load_upgrade_plan,
)
from .units import GaussianPulse

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class DataError(Exception):
    """Problem with an input data file (as opposed to configuration)."""


def _provenance(scenario: Scenario, seed) -> str:
    return f"# scenario_hash={scenario.scenario_hash} seed={seed}\n"


def _write_csv(path: Path, header: str, rows, scenario: Scenario, seed) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_provenance(scenario, seed))
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _outdir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# budget


def cmd_budget(args) -> int:
    scenario = load_scenario(args.scenario)
    r_mean = scenario.range_profile.mean_range_m
    print(f"Scenario {scenario.name} (hash {scenario.scenario_hash})")
    print(
        f"  wavelength {scenario.wavelength_m * 1e9:.1f} nm,"
        f" telescope {scenario.telescope.aperture_m:.2f} m,"
        f" mean slant range {r_mean / 1e3:.0f} km,"
        f" atmosphere {scenario.atmosphere_loss_db:.2f} dB"
    )
    models = LINK_MODELS if args.model == "both" else (args.model,)
    results = {}
    for model in models:
        try:
            link = scenario.budget_for_channel(scenario.receivers[0].channel, model)
        except ValueError as exc:
            print(f"  model {model}: not evaluated ({exc})")
            continue
        results[model] = link
        print(f"  model {model}:")
        print(f"    t_diff = {link.t_diff:.4e}")
        print(f"    t_down = {link.t_down:.4e}  (l_down = {link.l_down_db:.2f} dB)")
    if scenario.downlink_loss_db is not None:
        print(f"  configured down-link loss override: {scenario.downlink_loss_db:.2f} dB")
    for rx in scenario.receivers:
        link = scenario.budget_for_channel(rx.channel, next(iter(results), "ffdp"))
        print(
            f"  receiver channel {rx.channel}: t_rx = {link.t_rx:.4e}"
            f"  (l_rx = {link.l_rx_db:.2f} dB)"
        )

    out = _outdir(args)
    if out is not None:
        doc = {
            "scenario": scenario.name,
            "scenario_hash": scenario.scenario_hash,
            "mean_slant_range_m": r_mean,
            "models": {
                m: {
                    "t_diff": link.t_diff,
                    "t_down": link.t_down,
                    "l_down_db": link.l_down_db,
                }
                for m, link in results.items()
            },
            "downlink_loss_db_override": scenario.downlink_loss_db,
            "receivers": {
                rx.channel: {
                    "t_rx": scenario.budget_for_channel(rx.channel).t_rx,
                    "l_rx_db": scenario.budget_for_channel(rx.channel).l_rx_db,
                }
                for rx in scenario.receivers
            },
        }
        with open(out / "budget.json", "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        if not results:
            print(f"  wrote {out}/budget.json (no evaluable model curves)")
            return EXIT_OK
        ranges = np.linspace(19000e3, 26000e3, 141)
        curves, rows = {}, []
        for model in results:
            loss = np.array(
                [
                    downlink_budget(
                        model,
                        r,
                        scenario.telescope,
                        scenario.receivers[0],
                        atmosphere_loss_db=scenario.atmosphere_loss_db,
                        wavelength_m=scenario.wavelength_m,
                        ccr=scenario.ccr,
                        array=scenario.array_spec,
                    ).l_down_db
                    for r in ranges
                ]
            )
            curves[model] = (ranges, loss)
        for i, r in enumerate(ranges):
            rows.append([r] + [curves[m][1][i] for m in curves])
        _write_csv(
            out / "loss_vs_range.csv",
            "range_m," + ",".join(f"l_down_db_{m}" for m in curves),
            rows,
            scenario,
            seed="none",
        )
        plots.save_budget_vs_range(curves, out / "budget.png")
        print(f"  wrote {out}/budget.json, loss_vs_range.csv, budget.png")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    if args.duration_s <= 0.0:
        raise ScenarioError(f"--duration-s must be > 0, got {args.duration_s}")
    scenario = load_scenario(args.scenario)
    stream = simulate_pass(scenario, args.duration_s, args.seed)
    out = _outdir(args)
    tags_path = out / "tags.csv"
    stream.to_csv(tags_path, include_truth=not args.no_truth)
    stream.write_metadata(out / "tags_meta.json")
    counts = stream.metadata["counts_by_truth"]
    print(f"Simulated {args.duration_s:g} s of {scenario.name} (seed {args.seed})")
    print(f"  events: {len(stream)}  by class: {counts}")
    print(f"  wrote {tags_path} and tags_meta.json")
    return EXIT_OK


# --------------------------------------------------------------------------
# analyze


def _load_tags(path: Path) -> TagStream:
    if not path.exists():
        raise DataError(f"tag file not found: {path}")
    try:
        stream = TagStream.from_csv(path)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    meta_path = path.with_name(path.stem + "_meta.json")
    if meta_path.exists():
        try:
            stream.metadata = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed metadata sidecar {meta_path}: {exc}") from exc
    return stream


def cmd_analyze(args) -> int:
    scenario = load_scenario(args.scenario)
    tags = _load_tags(Path(args.tags))
    seed = tags.metadata.get("seed", "unknown")
    duration = tags.metadata.get("duration_s")
    arrivals = ExpectedArrivals(
        scenario.range_profile, scenario.schedule, scenario.transmitter
    )
    out = _outdir(args)
    params = scenario.analysis
    report = {
        "scenario": scenario.name,
        "scenario_hash": scenario.scenario_hash,
        "seed": seed,
        "parameters": {
            "tau_s": params.tau_s,
            "window_ps": params.window_ps,
            "duty_cycle": params.duty_cycle,
            "threshold_hz": params.threshold_hz,
            "bin_width_ps": params.bin_width_ps,
            "exclusion_ps": params.exclusion_ps,
        },
        "channels": [],
    }
    for rx in scenario.receivers:
        if rx.channel not in tags.channels:
            continue
        link = scenario.budget_for_channel(rx.channel)
        rset, stats, hist, summary = analyze_channel(
            tags,
            arrivals,
            params,
            link,
            scenario.transmitter.rep_rate_hz,
            rx.channel,
            duration,
        )
        report["channels"].append(summary.as_dict())
        label = (
            "no signal"
            if summary.no_signal
            else f"R_det = {summary.r_det_hz:.1f} Hz, SNR = {summary.snr:.2f},"
            f" mu_sat = {summary.mu_sat:.1f}"
        )
        print(f"channel {rx.channel}: {label} "
              f"({summary.n_selected}/{summary.n_intervals} intervals kept)")
        _write_csv(
            out / f"intervals_ch{rx.channel}.csv",
            "k,t_start_s,tau_s,n_tot_w,n_bkg_w,n_det,r_det_hz,bkg_rate_w_hz,snr,selected",
            [
                [
                    s.k,
                    s.k * s.tau_s,
                    s.tau_s,
                    s.n_tot_w,
                    s.n_bkg_w,
                    s.n_det,
                    s.r_det_hz,
                    s.bkg_rate_w_hz,
                    s.snr if math.isfinite(s.snr) else -1.0,
                    s.selected,
                ]
                for s in stats
            ],
            scenario,
            seed,
        )
        _write_csv(
            out / f"histogram_ch{rx.channel}.csv",
            "bin_left_ps,bin_right_ps,count",
            [
                [hist.edges_ps[i], hist.edges_ps[i + 1], int(hist.counts[i])]
                for i in range(hist.counts.size)
            ],
            scenario,
            seed,
        )
        if not args.no_plots:
            plots.save_residual_histogram(
                hist, params.window_ps, out / f"residuals_ch{rx.channel}.png"
            )
            plots.save_interval_rates(
                stats, params.threshold_hz, out / f"interval_rates_ch{rx.channel}.png"
            )
            occ = period_occupancy(
                tags, scenario.schedule, arrivals, duration, channel=rx.channel
            )
            plots.save_period_occupancy(
                occ, out / f"period_occupancy_ch{rx.channel}.png"
            )
    if not report["channels"]:
        raise DataError("tag file contains no events for configured channels")
    with open(out / "summary.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"wrote analysis products to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# response


def cmd_response(args) -> int:
    scenario = load_scenario(args.scenario)
    pulse = GaussianPulse(scenario.transmitter.pulse_fwhm_ps)
    out = _outdir(args)
    bin_ps = min(pulse.fwhm_ps / 4.0, 5.0)
    profiles, peaks, rows = {}, {}, []
    for deg in args.incidence_deg:
        prof = array_impulse_response(
            scenario.geometry,
            math.radians(deg),
            pulse,
            bin_width_ps=bin_ps,
            azimuth_rad=scenario.azimuth_rad,
        )
        pp = peak_to_peak(prof)
        profiles[deg], peaks[deg] = prof, pp
        rows.append([deg, pp])
        print(f"incidence {deg:g} deg: peak-to-peak {pp:.0f} ps")
        _write_csv(
            out / f"response_{deg:g}deg.csv",
            "time_ps,density_per_ps",
            [[t, d] for t, d in zip(prof.centers_ps, prof.densities)],
            scenario,
            seed="none",
        )
    _write_csv(
        out / "peak_to_peak.csv",
        "incidence_deg,peak_to_peak_ps",
        rows,
        scenario,
        seed="none",
    )
    if not args.no_plots:
        plots.save_temporal_profiles(profiles, peaks, out / "response.png")
    print(f"wrote response products to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# project


def cmd_project(args) -> int:
    scenario = load_scenario(args.scenario)
    plan = load_upgrade_plan(args.plan)
    try:
        baseline = baseline_from_scenario(scenario, args.channel)
        projection = project_upgraded_link(baseline, plan)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    base_doc = {
        "r_det_hz": baseline.r_det_hz,
        "snr": baseline.snr,
        "mu_sat": baseline.mu_sat,
        "background_hz": baseline.background_hz,
    }
    proj_doc = {
        "r_det_hz": projection.r_det_hz,
        "snr": projection.snr,
        "signal_factor": projection.signal_factor,
        "dark_hz": projection.dark_hz,
        "fluorescence_hz": projection.fluorescence_hz,
        "albedo_hz": projection.albedo_hz,
        "in_window_background_hz": projection.in_window_background_hz,
    }
    print(
        f"baseline:  R_det = {baseline.r_det_hz:8.1f} Hz   SNR = {baseline.snr:8.2f}"
    )
    print(
        f"projected: R_det = {projection.r_det_hz:8.1f} Hz   SNR = {projection.snr:8.2f}"
        f"   (signal x{projection.signal_factor:.0f})"
    )
    out = _outdir(args)
    if out is not None:
        with open(out / "projection.json", "w") as fh:
            json.dump(
                {
                    "scenario": scenario.name,
                    "scenario_hash": scenario.scenario_hash,
                    "baseline": base_doc,
                    "projected": proj_doc,
                },
                fh,
                indent=2,
            )
            fh.write("\n")
        plots.save_projection(base_doc, proj_doc, out / "projection.png")
        print(f"wrote projection products to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnsslink",
        description="Single-photon GNSS down-link budgets, simulation and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("budget", help="evaluate the down-link budget models")
    p.add_argument("--scenario", required=True)
    p.add_argument(
        "--model",
        choices=["ffdp", "cross-section", "both"],
        default="both",
        help="diffraction model to evaluate",
    )
    p.add_argument("--out", help="directory for budget.json/CSV/figure")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("simulate", help="generate a synthetic tag stream")
    p.add_argument("--scenario", required=True)
    p.add_argument("--duration-s", type=float, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--no-truth", action="store_true", help="omit the truth column"
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="run the detection-statistics pipeline")
    p.add_argument("--scenario", required=True)
    p.add_argument("--tags", required=True, help="tag CSV file")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("response", help="array temporal impulse response")
    p.add_argument("--scenario", required=True)
    p.add_argument(
        "--incidence-deg", type=float, nargs="+", default=[5.0, 9.0]
    )
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_response)

    p = sub.add_parser("project", help="project an upgraded link")
    p.add_argument("--scenario", required=True)
    p.add_argument("--plan", required=True, help="upgrade plan JSON")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--out", help="directory for projection.json/figure")
    p.set_defaults(func=cmd_project)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "model", None) == "cross-section":
        args.model = "cross_section"
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
