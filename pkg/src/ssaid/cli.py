"""Command-line entry point: detection, simulation, baselines, and scans.

Every command writes a run manifest holding the full resolved parameter set;
``ssaid replay manifest.json`` re-executes the run and reproduces the result
files byte for byte.  Exit codes: 0 success, 2 input/usage error, 3
internal error.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .baseline import AicConfig, delta_aic_series, threshold_detect
from .bench import (
    ExperimentConfig,
    SnlReport,
    calibrate_threshold_const,
    convergence_diagnostics,
    run_sweep,
    sensitivity_sweep,
)
from .core import DetectionResult, TimeSeries
from .gps import GpsParseError, read_series
from .isolate_detect import IdConfig
from .pipeline import SsaidConfig, SsaidResult, ssaid_detect, ssaid_detect_sliding
from .simulate import (
    NoiseSpec,
    SseSignalSpec,
    add_noise,
    generate_sse_like,
    sse_benchmark_spec,
    two_sse_equal_spec,
    two_sse_unequal_spec,
)
from .ssa import SsaConfig

PRESETS = {
    "desk": {"m": 20, "l": 20, "q": 30},
    # m None = 100 clipped to what the embedding window allows.
    "full": {"m": None, "l": 80, "q": 50},
    # Accepted alias for the production-scale preset.
    "paper": {"m": None, "l": 80, "q": 50},
}

SIGNALS = {
    "sse": sse_benchmark_spec,
    "two-sse-unequal": two_sse_unequal_spec,
    "two-sse-equal": two_sse_equal_spec,
}

_DETECT_DEFAULTS: dict[str, Any] = {
    "component": "east",
    "seed": 0,
    "preset": "full",
    "m": None,
    "l": None,
    "q": None,
    "v": 3.0,
    "noise_max_factor": 2.0,
    "ssa_window": None,
    "threshold_const": IdConfig.threshold_const,
    "expansion_step": IdConfig.expansion_step,
    "min_gap": IdConfig.min_gap,
    "jobs": 1,
    "segment_len": 80,
}


def _utc_now() -> str:
    return (
        datetime.datetime.now(datetime.timezone.utc)
        .replace(microsecond=0)
        .isoformat()
        .replace("+00:00", "Z")
    )


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, params: dict) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "created_utc": _utc_now(),
        "params": params,
    }
    _write_json(out_dir / "manifest.json", manifest)


def _merge_params(defaults: dict, config_file: Optional[str], args: argparse.Namespace) -> dict:
    """Resolution order: defaults < preset < config file < explicit flags."""
    params = dict(defaults)
    preset = getattr(args, "preset", None) or params.get("preset")
    if preset:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}")
        params["preset"] = preset
        params.update(PRESETS[preset])
    if config_file:
        with open(config_file, "r", encoding="utf-8") as fh:
            tree = yaml.safe_load(fh) or {}
        if not isinstance(tree, dict):
            raise ValueError("config file must hold a mapping")
        flat = dict(tree)
        for section in ("ssaid", "id", "baseline"):
            sub = flat.pop(section, {}) or {}
            if not isinstance(sub, dict):
                raise ValueError(f"config section {section!r} must be a mapping")
            flat.update(sub)
        for key, value in flat.items():
            if key == "preset":
                raise ValueError("preset is a command-line flag, not a config key")
            if key not in params and key not in ("input", "zeta", "noise"):
                raise ValueError(f"unknown config key {key!r}")
            params[key] = value
    for key in params:
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
    for key in ("input", "zeta", "noise"):
        if getattr(args, key, None) is not None:
            params[key] = getattr(args, key)
    return params


def _ssaid_config(params: dict) -> SsaidConfig:
    return SsaidConfig(
        ssa=SsaConfig(num_components=params["m"], window=params.get("ssa_window")),
        noise_levels=int(params["l"]),
        realizations=int(params["q"]),
        rmse_threshold=float(params["v"]),
        noise_max_factor=float(params["noise_max_factor"]),
        seed=int(params["seed"]),
        id=_id_config(params),
        n_jobs=int(params["jobs"]),
    )


def _id_config(params: dict) -> IdConfig:
    return IdConfig(
        threshold_const=float(params["threshold_const"]),
        expansion_step=int(params["expansion_step"]),
        min_gap=int(params["min_gap"]),
    )


def _write_changepoints(path: Path, series: TimeSeries, det: DetectionResult, component: str) -> None:
    lines = ["index,time,component"]
    for loc in det.locations:
        lines.append("%d,%.6f,%s" % (loc, series.time_at(loc), component))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _group_record(g, in_snl_keys: set) -> dict:
    return {
        "k": g.k,
        "s": g.s,
        "a_s": g.a_s,
        "h_mode": g.h_mode,
        "r2": g.r2,
        "kappa": g.kappa,
        "omega3": g.omega3,
        "locations": list(g.locations),
        "degenerate": g.degenerate,
        "in_snl": (g.k, g.s) in in_snl_keys,
    }


def _write_ssaid_diagnostics(
    path: Path, series: TimeSeries, res: SsaidResult, component: str,
    notes: Optional[list[str]] = None,
) -> None:
    in_snl_keys = {(g.k, g.s) for g in res.in_snl_groups}
    obj = {
        "component": component,
        "input_notes": list(notes or []),
        "result": {
            "count": res.detection.count,
            "locations": list(res.detection.locations),
            "times": [series.time_at(i) for i in res.detection.locations],
        },
        "groups": [_group_record(g, in_snl_keys) for g in res.all_groups],
        "n_in_snl": len(res.in_snl_groups),
        "warnings": list(res.warnings),
    }
    _write_json(path, obj)


def _run_detect(params: dict, out_dir: Path, sliding: bool) -> int:
    series, component, notes = read_series(params["input"], params["component"])
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    cfg = _ssaid_config(params)
    if sliding:
        res = ssaid_detect_sliding(series, cfg, int(params["segment_len"]))
    else:
        res = ssaid_detect(series, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_changepoints(out_dir / "changepoints.csv", series, res.detection, component)
    _write_ssaid_diagnostics(out_dir / "diagnostics.json", series, res, component, notes)
    _write_manifest(out_dir, "detect-sliding" if sliding else "detect", params)
    print(f"{res.detection.count} change-points -> {out_dir / 'changepoints.csv'}")
    return 0


def _run_simulate(params: dict, out_path: Path) -> int:
    spec = SseSignalSpec(
        length_days=int(params["length"]),
        n_events=int(params["events"]),
        event_duration=float(params["duration"]),
        recurrence=float(params["recurrence"]),
        inter_event_slope=float(params["slope"]),
        event_amplitudes=params.get("amplitude"),
        ramp_shape=params["ramp"],
    )
    signal, truth = generate_sse_like(spec)
    noisy = add_noise(signal, NoiseSpec(float(params["noise"]), seed=int(params["seed"])))

    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["t,value"]
    for i, v in enumerate(noisy.values):
        lines.append("%.6f,%.10g" % (noisy.time_at(i), v))
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    truth_path = out_path.with_suffix(".truth.csv")
    tlines = ["index,time"]
    for loc in truth.locations:
        tlines.append("%d,%.6f" % (loc, signal.time_at(loc)))
    truth_path.write_text("\n".join(tlines) + "\n", encoding="utf-8")

    manifest_path = out_path.with_suffix(".manifest.json")
    _write_json(
        manifest_path,
        {
            "command": "simulate",
            "tool_version": __version__,
            "created_utc": _utc_now(),
            "params": params,
        },
    )
    print(f"wrote {out_path} ({len(noisy)} samples, {truth.count} change-points)")
    return 0


def _run_baseline(params: dict, out_dir: Path) -> int:
    series, component, notes = read_series(params["input"], params["component"])
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    cfg = AicConfig(window_days=int(params["window"]), threshold=float(params["zeta"]))
    delta = delta_aic_series(series, cfg)
    det = threshold_detect(delta, cfg.threshold)

    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["index,time,delta_aic"]
    for i, d in enumerate(delta):
        if np.isfinite(d):
            lines.append("%d,%.6f,%.10g" % (i, series.time_at(i), d))
    (out_dir / "delta_aic.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_changepoints(out_dir / "changepoints.csv", series, det, component)
    _write_json(
        out_dir / "diagnostics.json",
        {
            "component": component,
            "window": cfg.window_days,
            "zeta": cfg.threshold,
            "result": {
                "count": det.count,
                "locations": list(det.locations),
                "times": [series.time_at(i) for i in det.locations],
            },
        },
    )
    _write_manifest(out_dir, "baseline", params)
    print(f"{det.count} change-points -> {out_dir / 'changepoints.csv'}")
    return 0


def _snl_report_dict(report: SnlReport) -> dict:
    return {
        "seeds_per_level": report.seeds_per_level,
        "snl_interval": list(report.snl_interval) if report.snl_interval else None,
        "per_level": {
            "%.10g" % level: {
                "r_sd": st.r_sd,
                "r1": st.r1,
                "mean_rmse_when_correct": st.mean_rmse_when_correct,
            }
            for level, st in report.per_level.items()
        },
    }


def _run_snl_scan(params: dict, out_dir: Path) -> int:
    report = run_sweep(_experiment_config(params))
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_trials_csv(out_dir / "trials.csv", report)
    _write_json(out_dir / "summary.json", _snl_report_dict(report))
    _write_manifest(out_dir, "snl-scan", params)
    snl = report.snl_interval
    print(f"snl interval: {snl if snl else 'none'} -> {out_dir / 'summary.json'}")
    return 0


def _experiment_config(params: dict) -> ExperimentConfig:
    levels = tuple(float(tok) for tok in str(params["levels"]).split(","))
    return ExperimentConfig(
        signal=SIGNALS[params["signal"]](),
        noise_grid=levels,
        seeds_per_level=int(params["seeds"]),
        detector=params["detector"],
        v=float(params["v"]),
        id_cfg=_id_config(params),
        ssaid_cfg=_ssaid_config(params),
        aic_cfg=AicConfig(window_days=int(params["window"]), threshold=float(params["zeta"])),
        zeta=float(params["zeta"]),
        segment_len=int(params["segment_len"]),
        master_seed=int(params["seed"]),
        n_jobs=int(params["jobs"]),
    )


def _write_trials_csv(path: Path, report: SnlReport) -> None:
    lines = ["level,seed,detected_count,rmse,success"]
    for t in report.trials:
        rmse_txt = "%.10g" % t.rmse if t.rmse is not None else ""
        lines.append(
            "%.10g,%d,%d,%s,%d" % (t.level, t.seed_index, t.detected_count, rmse_txt, t.success)
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_bench(params: dict, out_dir: Path) -> int:
    base = _experiment_config(params)
    values = [int(tok) for tok in str(params["values"]).split(",")]
    reports = sensitivity_sweep(params["param"], values, base)

    out_dir.mkdir(parents=True, exist_ok=True)
    for value, report in reports.items():
        _write_trials_csv(out_dir / f"trials-{params['param']}{value}.csv", report)
    summary = {
        "param": params["param"],
        "values": values,
        "reports": {str(v): _snl_report_dict(r) for v, r in reports.items()},
        "convergence": [
            {"from": a, "to": b, "max_r_sd_diff": diff}
            for a, b, diff in convergence_diagnostics(reports)
        ],
    }
    _write_json(out_dir / "summary.json", summary)
    _write_manifest(out_dir, "bench", params)
    for a, b, diff in convergence_diagnostics(reports):
        print("%s=%d vs %d: max r_sd difference %.3f" % (params["param"], a, b, diff))
    print(f"-> {out_dir / 'summary.json'}")
    return 0


def _run_calibrate(params: dict, out_dir: Path) -> int:
    grid = tuple(float(tok) for tok in str(params["c_grid"]).split(","))
    rates = calibrate_threshold_const(
        grid,
        n_series=int(params["n_series"]),
        length=int(params["length"]),
        master_seed=int(params["seed"]),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(
        out_dir / "calibration.json",
        {"false_positive_rate": {"%.10g" % c: r for c, r in rates.items()}},
    )
    _write_manifest(out_dir, "calibrate", params)
    for c, r in rates.items():
        print("C=%.3g  false-positive rate %.3f" % (c, r))
    return 0


_SIMULATE_DEFAULTS: dict[str, Any] = {
    "length": 365,
    "events": 5,
    "duration": 7.0,
    "recurrence": 74.0,
    "slope": 1.0,
    "amplitude": None,
    "ramp": "smooth-sigmoid",
    "noise": 0.0,
    "seed": 0,
}

_BASELINE_DEFAULTS: dict[str, Any] = {
    "component": "east",
    "window": 14,
    "zeta": -10.0,
}

_SCAN_DEFAULTS: dict[str, Any] = dict(
    _DETECT_DEFAULTS,
    signal="sse",
    detector="id-direct",
    levels="0.05,0.1,0.2,0.3,0.4,0.5",
    seeds=20,
    zeta=-10.0,
)
_SCAN_DEFAULTS["window"] = 14

_BENCH_DEFAULTS: dict[str, Any] = dict(_SCAN_DEFAULTS, detector="ssaid", param="Q", values="30,50")

_CALIBRATE_DEFAULTS: dict[str, Any] = {
    "c_grid": "1.0,1.1,1.2,1.3,1.4,1.5",
    "n_series": 200,
    "length": 365,
    "seed": 0,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssaid",
        description="Change-point detection for noisy series with unknown "
        "continuous piecewise structure.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_detector_knobs: bool = True) -> None:
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out-dir", default="ssaid-out", help="output directory")
        if with_detector_knobs:
            p.add_argument("--component", choices=("north", "east", "up"))
            p.add_argument("--preset", choices=tuple(PRESETS))
            p.add_argument("--m", type=int, help="number of SSA components")
            p.add_argument("--l", type=int, help="number of added-noise levels")
            p.add_argument("--q", type=int, help="realizations per group")
            p.add_argument("--v", type=float, help="location tolerance in samples")
            p.add_argument("--noise-max-factor", dest="noise_max_factor", type=float)
            p.add_argument("--ssa-window", dest="ssa_window", type=int)
            p.add_argument("--threshold-const", dest="threshold_const", type=float)
            p.add_argument("--expansion-step", dest="expansion_step", type=int)
            p.add_argument("--min-gap", dest="min_gap", type=int)
            p.add_argument("--jobs", type=int, help="parallel workers (1 = serial)")

    p_detect = sub.add_parser("detect", help="run the pipeline on a series file")
    p_detect.add_argument("--input", required=True)
    add_common(p_detect)

    p_slide = sub.add_parser("detect-sliding", help="windowed pipeline variant")
    p_slide.add_argument("--input", required=True)
    p_slide.add_argument("--segment-len", dest="segment_len", type=int)
    add_common(p_slide)

    p_sim = sub.add_parser("simulate", help="generate a ground-truthed noisy signal")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--length", type=int)
    p_sim.add_argument("--events", type=int)
    p_sim.add_argument("--duration", type=float)
    p_sim.add_argument("--recurrence", type=float)
    p_sim.add_argument("--slope", type=float)
    p_sim.add_argument("--amplitude", type=float)
    p_sim.add_argument("--ramp", choices=("smooth-sigmoid", "quadratic-ease", "linear"))
    p_sim.add_argument("--noise", type=float, help="white-noise level")
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--config", help="YAML config file")

    p_base = sub.add_parser("baseline", help="sliding-window AIC comparison method")
    p_base.add_argument("--input", required=True)
    p_base.add_argument("--window", type=int, help="window size in intervals (even)")
    p_base.add_argument("--zeta", type=float, help="detection threshold (negative)")
    p_base.add_argument("--component", choices=("north", "east", "up"))
    p_base.add_argument("--config", help="YAML config file")
    p_base.add_argument("--out-dir", default="ssaid-out")

    p_scan = sub.add_parser("snl-scan", help="success-rate sweep over noise levels")
    p_scan.add_argument("--signal", choices=tuple(SIGNALS))
    p_scan.add_argument("--detector", choices=("id-direct", "ssaid", "ssaid-sliding", "baseline"))
    p_scan.add_argument("--levels", help="comma-separated noise levels")
    p_scan.add_argument("--seeds", type=int, help="trials per level")
    p_scan.add_argument("--segment-len", dest="segment_len", type=int)
    p_scan.add_argument("--window", type=int)
    p_scan.add_argument("--zeta", type=float)
    add_common(p_scan)

    p_bench = sub.add_parser("bench", help="sensitivity sweep over an ensemble-size parameter")
    p_bench.add_argument("--param", choices=("Q", "L"))
    p_bench.add_argument("--values", help="comma-separated parameter values")
    p_bench.add_argument("--signal", choices=tuple(SIGNALS))
    p_bench.add_argument("--detector", choices=("ssaid", "ssaid-sliding"))
    p_bench.add_argument("--levels", help="comma-separated noise levels")
    p_bench.add_argument("--seeds", type=int, help="trials per level")
    p_bench.add_argument("--segment-len", dest="segment_len", type=int)
    p_bench.add_argument("--window", type=int)
    p_bench.add_argument("--zeta", type=float)
    add_common(p_bench)

    p_cal = sub.add_parser("calibrate", help="null false-positive rate vs threshold constant")
    p_cal.add_argument("--c-grid", dest="c_grid", help="comma-separated constants")
    p_cal.add_argument("--n-series", dest="n_series", type=int)
    p_cal.add_argument("--length", type=int)
    p_cal.add_argument("--seed", type=int)
    p_cal.add_argument("--config", help="YAML config file")
    p_cal.add_argument("--out-dir", default="ssaid-out")

    p_replay = sub.add_parser("replay", help="re-run a command from its manifest")
    p_replay.add_argument("manifest")
    p_replay.add_argument("--out-dir", default=None, help="defaults to the manifest's directory")

    return parser


def _dispatch(command: str, params: dict, out_dir: Path) -> int:
    if command == "detect":
        return _run_detect(params, out_dir, sliding=False)
    if command == "detect-sliding":
        return _run_detect(params, out_dir, sliding=True)
    if command == "simulate":
        return _run_simulate(params, Path(params["out"]))
    if command == "baseline":
        return _run_baseline(params, out_dir)
    if command == "snl-scan":
        return _run_snl_scan(params, out_dir)
    if command == "bench":
        return _run_bench(params, out_dir)
    if command == "calibrate":
        return _run_calibrate(params, out_dir)
    raise ValueError(f"unknown command {command!r}")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            command = manifest["command"]
            params = manifest["params"]
            out_dir = Path(args.out_dir) if args.out_dir else Path(args.manifest).parent
            return _dispatch(command, params, out_dir)

        defaults = {
            "detect": dict(_DETECT_DEFAULTS),
            "detect-sliding": dict(_DETECT_DEFAULTS),
            "simulate": dict(_SIMULATE_DEFAULTS),
            "baseline": dict(_BASELINE_DEFAULTS),
            "snl-scan": dict(_SCAN_DEFAULTS),
            "bench": dict(_BENCH_DEFAULTS),
            "calibrate": dict(_CALIBRATE_DEFAULTS),
        }[args.command]
        params = _merge_params(defaults, getattr(args, "config", None), args)
        if args.command == "simulate":
            params["out"] = args.out
        out_dir = Path(getattr(args, "out_dir", "ssaid-out") or "ssaid-out")
        return _dispatch(args.command, params, out_dir)
    except (ValueError, OSError, GpsParseError, KeyError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
