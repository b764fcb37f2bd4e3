import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from cli.config import (
    DEFAULT_OUT_DIR,
    OUT_DIR_ENV,
    ConfigError,
    RunManifest,
    format_validation_error,
    load_manifest,
)
from leo_orbit.doppler import LeoPassProfile, doppler_rate, doppler_shift
from leo_orbit.geometry import OrbitGeometry, visibility_half_window
from lora_phy.estimators import EstimatorKind, recommended_midamble_interval
from lora_phy.export import write_iq
from lora_phy.models import BasebandSignal, FrameLayout, ModemConfig
from lora_phy.modem import payload_symbol_count
from ser_sim import export, plots
from ser_sim.runner import received_frame
from ser_sim.scenario import ScenarioConfig
from ser_sim.sweep import SweepSpec, grid_cells, run_sweep, scenario_at

logging.basicConfig(
    level=os.getenv("LORA_DTS_LOG_LEVEL", "INFO"),
    format="%(asctime)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_EMIT_CHOICES = ("csv", "json", "svg")
# axes that split curves or panels rather than forming the x axis
_GROUPING_AXES = ("estimator", "sf", "ldro")


def _comma_list(choices=None):
    def parse(value):
        items = [item.strip() for item in value.split(",") if item.strip()]
        if choices is not None:
            unknown = [item for item in items if item not in choices]
            if unknown:
                raise argparse.ArgumentTypeError(
                    f"invalid choice(s) {unknown}, choose from {list(choices)}"
                )
        return items

    return parse


def _default_out_dir():
    return os.getenv(OUT_DIR_ENV, DEFAULT_OUT_DIR)


def _add_run_arguments(parser):
    parser.add_argument(
        "--config",
        type=str,
        required=True,
        help="TOML run configuration, or the name of a bundled preset",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Override the master seed"
    )
    parser.add_argument(
        "--out-dir",
        type=str,
        default=None,
        help=f"Result directory (default: config, then ${OUT_DIR_ENV}, then ./{DEFAULT_OUT_DIR})",
    )
    parser.add_argument(
        "--emit",
        type=_comma_list(_EMIT_CHOICES),
        default=None,
        help="Comma-separated outputs among csv,json,svg",
    )
    parser.add_argument(
        "--estimators",
        type=_comma_list([k.value for k in EstimatorKind]),
        default=None,
        help="Comma-separated estimators, replaces the configured estimator axis",
    )
    parser.add_argument(
        "--trials", type=int, default=None, help="Override frames per grid cell"
    )
    parser.add_argument(
        "--workers", type=int, default=None, help="Grid cells evaluated concurrently"
    )
    parser.add_argument(
        "--dump-estimates",
        action="store_true",
        default=False,
        help="Write estimator reports of the first trials as JSON lines",
    )
    parser.add_argument(
        "--dump-frame",
        type=str,
        default=None,
        metavar="PATH",
        help="Write the first received frame of the first cell as raw I/Q",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lora-dts",
        description="LoRa direct-to-satellite Doppler estimation simulator",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    profile = subparsers.add_parser(
        "doppler-profile", help="Doppler shift and rate over an overhead pass"
    )
    profile.add_argument("--altitude-km", type=float, default=550.0, help="Orbit height")
    profile.add_argument("--carrier-mhz", type=float, default=868.0, help="Carrier F_C")
    profile.add_argument(
        "--t-min", type=float, default=None, help="First time, default -window"
    )
    profile.add_argument(
        "--t-max", type=float, default=None, help="Last time, default +window"
    )
    profile.add_argument("--step", type=float, default=1.0, help="Time step in seconds")
    profile.add_argument("--out-dir", type=str, default=None, help="Result directory")
    profile.add_argument(
        "--emit",
        type=_comma_list(("csv", "svg")),
        default=["csv"],
        help="Comma-separated outputs among csv,svg",
    )

    simulate = subparsers.add_parser(
        "simulate", help="SER against Es/N0 for a set of estimators"
    )
    _add_run_arguments(simulate)

    sweep = subparsers.add_parser("sweep", help="SER over arbitrary scenario axes")
    _add_run_arguments(sweep)
    sweep.add_argument(
        "--x-axis", type=str, default=None, help="Swept axis used as the plot x axis"
    )

    advisor = subparsers.add_parser(
        "midamble-advisor", help="Recommended midamble spacing for a Doppler rate"
    )
    advisor.add_argument("--sf", type=int, default=10, help="Spreading factor")
    advisor.add_argument("--bandwidth-hz", type=float, default=125e3, help="Bandwidth")
    advisor.add_argument("--ldro", action="store_true", default=False, help="Enable LDRO")
    advisor.add_argument("--k", type=float, default=0.1, help="Tolerated fraction of R_s")
    size = advisor.add_mutually_exclusive_group(required=True)
    size.add_argument("--n-sym", type=int, help="Payload chirps")
    size.add_argument("--payload-bits", type=int, help="Payload size in bits")
    advisor.add_argument("--cr", type=int, default=1, help="Code rate parity bits")
    rate = advisor.add_mutually_exclusive_group(required=True)
    rate.add_argument("--xi", type=float, help="Doppler rate in Hz/s")
    rate.add_argument("--t-start", type=float, help="Read the rate from an overhead pass")
    advisor.add_argument("--altitude-km", type=float, default=550.0, help="Orbit height")
    advisor.add_argument("--carrier-mhz", type=float, default=868.0, help="Carrier F_C")
    advisor.add_argument(
        "--emit", choices=("text", "json"), default="text", help="Output format"
    )
    return parser


def profile_table(
    profile: LeoPassProfile, t_min: float, t_max: float, step: float
) -> pd.DataFrame:
    """Rows (t, shift, rate) from t_min to t_max inclusive."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if t_max < t_min:
        raise ValueError(f"t-max {t_max} is before t-min {t_min}")
    n_rows = int(np.floor((t_max - t_min) / step + 1e-9)) + 1
    t = t_min + step * np.arange(n_rows)
    return pd.DataFrame(
        {
            "t_s": t,
            "doppler_shift_hz": doppler_shift(profile, t),
            "doppler_rate_hz_per_s": doppler_rate(profile, t),
        }
    )


def cmd_doppler_profile(args) -> int:
    geometry = OrbitGeometry(
        altitude_m=args.altitude_km * 1e3, carrier_hz=args.carrier_mhz * 1e6
    )
    profile = LeoPassProfile(geometry=geometry)
    half = np.floor(visibility_half_window(geometry))
    t_min = -half if args.t_min is None else args.t_min
    t_max = half if args.t_max is None else args.t_max
    table = profile_table(profile, t_min, t_max, args.step)

    out_dir = os.path.expanduser(args.out_dir or _default_out_dir())
    os.makedirs(out_dir, exist_ok=True)
    if "csv" in args.emit:
        filepath = os.path.join(out_dir, "doppler_profile.csv")
        table.to_csv(filepath, index=False, encoding="utf-8", lineterminator="\n")
        logger.info(f"Written {len(table)} profile rows to {filepath}")
    if "svg" in args.emit:
        plots.plot_doppler_profile(table, os.path.join(out_dir, "doppler_profile.svg"))
    return EXIT_OK


def _sweep_spec(manifest: RunManifest, args) -> SweepSpec:
    scenario = manifest.scenario_data()
    if args.seed is not None:
        scenario["master_seed"] = args.seed
    if args.trials is not None:
        scenario["trials"] = args.trials
    axes = dict(manifest.sweep)
    if args.estimators:
        axes["estimator"] = args.estimators
    # a swept noise axis supplies the noise level of the base scenario
    for noise_axis in ("esn0_db", "snr_db"):
        if noise_axis in axes and not any(
            k in scenario for k in ("esn0_db", "snr_db", "noiseless")
        ):
            scenario[noise_axis] = axes[noise_axis][0]
    return SweepSpec(
        base=ScenarioConfig.model_validate(scenario),
        axes=axes,
        workers=args.workers or manifest.workers,
        keep_reports=manifest.output.dump_trials
        if (args.dump_estimates or manifest.output.dump_estimates)
        else 0,
    )


def dump_first_frame(spec: SweepSpec, filepath: str) -> BasebandSignal:
    """Received waveform of trial 0 in the first grid cell, before compensation."""
    scenario = scenario_at(spec.base, grid_cells(spec)[0])
    _, rx = received_frame(scenario, 0)
    os.makedirs(os.path.dirname(filepath) or ".", exist_ok=True)
    write_iq(rx, filepath)
    return rx


def _run(args) -> int:
    manifest = load_manifest(args.config)
    try:
        spec = _sweep_spec(manifest, args)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e, args.config)) from e
    if args.command == "simulate" and not {"esn0_db", "snr_db"} & set(spec.axes):
        raise ConfigError(f"{args.config}: simulate needs an esn0_db or snr_db sweep axis")

    out_dir = os.path.expanduser(args.out_dir) if args.out_dir else manifest.resolved_out_dir()
    emit = args.emit or manifest.output.emit
    os.makedirs(out_dir, exist_ok=True)

    if args.dump_frame:
        dump_first_frame(spec, os.path.expanduser(args.dump_frame))
    result = run_sweep(spec)
    stem = os.path.join(out_dir, manifest.name)
    if "csv" in emit:
        export.write_results_csv(result.table, f"{stem}.csv")
    if "json" in emit:
        export.write_results_json(
            result.table,
            f"{stem}.json",
            metadata={"config": manifest.name, "wall_time_s": result.wall_time_s},
        )
    if result.reports:
        export.write_estimates_jsonl(result.reports, f"{stem}_estimates.jsonl")
    if "svg" in emit:
        if args.command == "simulate":
            plots.plot_ser_vs_esn0(result.table, f"{stem}.svg")
        else:
            x_axis = getattr(args, "x_axis", None) or next(
                (a for a in spec.axes if a not in _GROUPING_AXES), None
            )
            if x_axis == "application":
                x_axis = "payload_bits"
            if x_axis is None:
                logger.warning("No non-grouping axis to plot against, skipping SVG")
            else:
                plots.plot_ser_vs_axis(result.table, x_axis, f"{stem}.svg")
    return EXIT_OK


def cmd_simulate(args) -> int:
    return _run(args)


def cmd_sweep(args) -> int:
    return _run(args)


def cmd_midamble_advisor(args) -> int:
    cfg = ModemConfig(sf=args.sf, bandwidth_hz=args.bandwidth_hz, ldro=args.ldro)
    n_sym = args.n_sym
    if n_sym is None:
        n_sym = payload_symbol_count(cfg, args.payload_bits, args.cr)
    xi = args.xi
    geometry = None
    if xi is None:
        geometry = OrbitGeometry(
            altitude_m=args.altitude_km * 1e3, carrier_hz=args.carrier_mhz * 1e6
        )
        xi = doppler_rate(LeoPassProfile(geometry=geometry), args.t_start)
    advice = recommended_midamble_interval(cfg, args.k, xi, n_sym)
    if args.emit == "json":
        print(advice.model_dump_json(indent=2))
        return EXIT_OK
    if not advice.needed:
        print(f"Doppler rate is zero: no midambles needed for {n_sym} chirps")
    else:
        layout = FrameLayout(n_up=0, n_dw=0, n_data=n_sym, n_int=advice.n_int)
        print(
            f"xi = {xi:.2f} Hz/s, T_point,mid = {advice.interval_s:.4f} s, "
            f"n* = {advice.n_star}, n_int = {advice.n_int}"
        )
        print(
            f"n* counts the preamble estimate: the frame carries "
            f"{layout.n_midambles} midamble(s) over {n_sym} data chirps"
        )
    if geometry is not None:
        print(
            f"Pass rate at t = {args.t_start:g} s from the spherical model; at zenith "
            f"it is {geometry.zenith_doppler_rate_hz_per_s:.2f} Hz/s against "
            f"{geometry.straight_line_zenith_rate_hz_per_s:.2f} Hz/s for a "
            f"straight-line v^2/h track"
        )
    return EXIT_OK


_COMMANDS = {
    "doppler-profile": cmd_doppler_profile,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "midamble-advisor": cmd_midamble_advisor,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except ValidationError as e:
        logger.error(format_validation_error(e, "arguments"))
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
