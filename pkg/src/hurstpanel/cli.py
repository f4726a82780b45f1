"""Command-line front end: one subcommand per report.

Every run validates its inputs before any output is written, emits the
delimited report (CSV + JSON) plus a rendered figure, and records the full
resolved configuration in a manifest.json. `rerun` replays a manifest into a
fresh output directory and reproduces the data outputs bit for bit.

Exit codes: 0 success, 2 validation error (bad arguments, malformed input,
incompatible configuration), 1 runtime error (degenerate data, failed fit).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import HurstPanelError, ValidationError
from .forecast import (
    ForecastConfig,
    fit_error_vs_hurst,
    run_study,
    slope_vs_lag,
    write_fits_json,
    write_records_csv,
    write_slope_curve_csv,
)
from .ghe import (
    GheConfig,
    panel_node_estimates,
    report_from_estimates,
    write_node_estimates_csv,
)
from .panel import load_panel, save_panel
from .rolling import RollingConfig, detect_shifts, group_shifts, rolling_ghe
from .spectral import FilterSpec, market_average_spectrum
from .synth import CascadeSpec, FbmSpec, SeasonalSpec, fbm_panel, gen_cascade, gen_seasonal, make_panel


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValidationError(f"cannot parse number list {text!r}") from exc


def _parse_lags(text: str) -> tuple[int, ...]:
    """Lag grids accept comma lists ('1,6,12') and ranges ('1..24')."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValidationError(f"cannot parse lag list {text!r}") from exc


def _parse_components(text: str) -> tuple[tuple[float, float], ...]:
    """Seasonal components as 'period:amplitude,period:amplitude'."""
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            period, amp = tok.split(":")
            out.append((float(period), float(amp)))
        except ValueError as exc:
            raise ValidationError(f"cannot parse component {tok!r} (want period:amp)") from exc
    return tuple(out)


def _write_manifest(outdir: Path, command: str, params: dict, outputs: list[str]) -> None:
    doc = {
        "command": command,
        "params": params,
        "outputs": sorted(outputs),
        "version": __version__,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _next_pow2(n: int) -> int:
    p = 64
    while p < n:
        p *= 2
    return p


# ---------------------------------------------------------------------------
# command implementations: compute first, write outputs last


def run_spectrum(params: dict, outdir: Path) -> list[str]:
    panel = load_panel(params["input"])
    report = market_average_spectrum(
        panel,
        peak_threshold=params["peaks_threshold"],
        threads=params["threads"],
    )
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = ["spectrum.csv", "spectrum.json"]
    report.write_csv(outdir / "spectrum.csv")
    report.write_json(outdir / "spectrum.json")
    if params["plot"]:
        from . import plots

        plots.plot_spectrum(report, outdir / "spectrum.png")
        outputs.append("spectrum.png")
    periods = ", ".join(f"{p:g}h" for p in sorted(report.peak_periods(), reverse=True))
    print(f"detected peak periods: {periods or '(none)'}")
    return outputs


def run_ghe(params: dict, outdir: Path) -> list[str]:
    panel = load_panel(params["input"])
    config = GheConfig(
        q_grid=tuple(params["q"]),
        tau_max=params["tau_max"],
        detrend=params["detrend"],
        tau_max_sweep=tuple(params["tau_max_sweep"]) if params["tau_max_sweep"] else None,
    )
    apply_cumsum = params["cumsum"]
    h, r2, ok = panel_node_estimates(panel, config, apply_cumsum, params["threads"])
    report = report_from_estimates(config.q_grid, h, ok, panel.n_nodes)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = ["nodes.csv", "multiscaling.csv", "multiscaling.json"]
    write_node_estimates_csv(
        outdir / "nodes.csv", [n.name for n in panel.nodes], config.q_grid, h, r2
    )
    report.write_csv(outdir / "multiscaling.csv")
    report.write_json(outdir / "multiscaling.json")
    if params["plot"]:
        from . import plots

        plots.plot_node_hists(h, config.q_grid, outdir / "nodes.png")
        plots.plot_multiscaling(report, outdir / "multiscaling.png")
        outputs += ["nodes.png", "multiscaling.png"]
    gap = "n/a" if report.concavity_gap is None else f"{report.concavity_gap:+.4f}"
    print(
        f"estimated {report.n_series - report.n_skipped}/{report.n_series} nodes; "
        f"mean H(1)-H(2) = {gap}"
    )
    return outputs


def run_rolling(params: dict, outdir: Path) -> list[str]:
    panel = load_panel(params["input"])
    config = RollingConfig(
        window=params["dh"],
        stride=params["stride"],
        ghe=GheConfig(q_grid=tuple(params["q"]), tau_max=params["tau_max"]),
        filtered=params["filtered"],
        filter_spec=FilterSpec(periods_hours=tuple(params["periods"]),
                               bin_halfwidth=params["halfwidth"]),
        keep_node_matrix=params["node_matrix"],
    )
    trace = rolling_ghe(panel, config, params["threads"])
    shifts = {
        f"{q:g}": detect_shifts(trace, q, params["shift_threshold"])
        for q in config.ghe.q_grid
    }
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = ["trace.csv", "trace.json", "shifts.json"]
    trace.write_csv(outdir / "trace.csv")
    trace.write_json(outdir / "trace.json")
    with open(outdir / "shifts.json", "w") as fh:
        json.dump(
            {
                "threshold": params["shift_threshold"],
                "shifts": {k: [[t, j] for t, j in v] for k, v in shifts.items()},
                "regions": {
                    k: group_shifts(v, max_gap=config.window) for k, v in shifts.items()
                },
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    if params["node_matrix"]:
        trace.write_node_matrix_csv(outdir / "node_matrix.csv", [n.name for n in panel.nodes])
        outputs.append("node_matrix.csv")
    if params["plot"]:
        from . import plots

        plots.plot_rolling(trace, outdir / "rolling.png")
        outputs.append("rolling.png")
    n_flagged = sum(len(v) for v in shifts.values())
    print(
        f"{len(trace.times)} trace points; {trace.n_degenerate} degenerate windows; "
        f"{n_flagged} shifts above {params['shift_threshold']}"
    )
    return outputs


def _forecast_config(params: dict) -> ForecastConfig:
    return ForecastConfig(
        window=params["dh"],
        lags=tuple(params["lags"]),
        ghe=GheConfig(q_grid=(1.0, 2.0), tau_max=params["tau_max"]),
        filtered=params["filtered"],
        filter_spec=FilterSpec(periods_hours=tuple(params["periods"]),
                               bin_halfwidth=params["halfwidth"]),
        squared_error=params["squared_error"],
    )


def run_forecast(params: dict, outdir: Path) -> list[str]:
    panel = load_panel(params["input"])
    config = _forecast_config(params)
    records = run_study(panel, config, params["threads"])
    label = "filtered" if config.filtered else "unfiltered"
    fits: dict = {"q1": {}, "q2": {}}
    curves = {}
    for q, key in ((1.0, "q1"), (2.0, "q2")):
        curve = []
        by_lag: dict[int, list] = {p: [] for p in config.lags}
        for rec in records:
            by_lag[rec.p].append(rec)
        for p in config.lags:
            try:
                fit = fit_error_vs_hurst(by_lag[p], q, squared=config.squared_error,
                                         binned=params["binned"])
            except HurstPanelError:
                fit = None
            curve.append((p, fit))
            if fit is not None:
                fits[key][f"p{p}"] = fit
        curves[key] = curve
    if not fits["q1"] and not fits["q2"]:
        print("no lag admitted a fit (all errors zero or degenerate)", file=sys.stderr)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = ["records.csv", "fits.json", "curve.csv"]
    write_records_csv(outdir / "records.csv", records)
    write_fits_json(outdir / "fits.json", {"label": label, **fits})
    write_slope_curve_csv(
        outdir / "curve.csv",
        {f"{label}_q1": curves["q1"], f"{label}_q2": curves["q2"]},
    )
    if params["plot"]:
        from . import plots

        first_lag_records = [r for r in records if r.p == config.lags[0]]
        for q, key in ((1.0, "q1"), (2.0, "q2")):
            fit = fits[key].get(f"p{config.lags[0]}")
            plots.plot_error_vs_hurst(
                first_lag_records, fit, q, outdir / f"error_h{q:g}.png"
            )
            outputs.append(f"error_h{q:g}.png")
        plots.plot_slope_curves(
            {f"{label} q=1": curves["q1"], f"{label} q=2": curves["q2"]},
            1.0,
            outdir / "curve.png",
        )
        outputs.append("curve.png")
    for key in ("q1", "q2"):
        for pk, fit in fits[key].items():
            print(f"{label} {key} {pk}: c={fit.c:+.4f} E0={fit.e0:.4g} "
                  f"r2={fit.r2:.3f} n={fit.n_points}")
    return outputs


def run_pipeline(params: dict, outdir: Path) -> list[str]:
    """Filtered versus unfiltered c(p) comparison in one run."""
    panel = load_panel(params["input"])
    base = _forecast_config({**params, "filtered": False})
    q = params["fit_q"]
    from dataclasses import replace

    unfiltered = slope_vs_lag(panel, base, q, params["threads"])
    filtered = slope_vs_lag(panel, replace(base, filtered=True), q, params["threads"])
    curves = {"unfiltered": unfiltered, "filtered": filtered}
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = ["curves.csv", "curves.json"]
    write_slope_curve_csv(outdir / "curves.csv", curves)
    write_fits_json(
        outdir / "curves.json",
        {
            "q": q,
            "unfiltered": {f"p{p}": f for p, f in unfiltered if f is not None},
            "filtered": {f"p{p}": f for p, f in filtered if f is not None},
        },
    )
    if params["plot"]:
        from . import plots

        plots.plot_slope_curves(curves, q, outdir / "curves.png")
        outputs.append("curves.png")
    for label, curve in curves.items():
        vals = ", ".join(f"c({p})={f.c:+.3f}" for p, f in curve if f is not None)
        print(f"{label}: {vals or '(no fits)'}")
    return outputs


def run_synth(params: dict, outdir: Path) -> list[str]:
    kind = params["kind"]
    n_nodes = params["nodes"]
    seed = params["seed"]
    if kind == "fbm":
        panel = fbm_panel(
            [params["hurst"]] * n_nodes,
            length=params["length"],
            seed=seed,
            output=params["output_kind"],
        )
    elif kind == "cascade":
        series = [
            gen_cascade(CascadeSpec(m0=params["m0"], depth=params["depth"], seed=seed + i))
            for i in range(n_nodes)
        ]
        panel = make_panel(series)
    elif kind == "seasonal":
        components = tuple((p, a) for p, a in params["components"])
        noise_len = _next_pow2(params["length"])
        series = []
        for i in range(n_nodes):
            noise = None
            if params["noise_hurst"] is not None:
                noise = FbmSpec(
                    hurst=params["noise_hurst"],
                    length=noise_len,
                    seed=seed + i,
                    output="increments",
                )
            series.append(
                gen_seasonal(SeasonalSpec(components=components, length=params["length"],
                                          noise=noise))
            )
        panel = make_panel(series)
    else:
        raise ValidationError(f"unknown synth kind {kind!r}")
    outdir.mkdir(parents=True, exist_ok=True)
    fname = f"panel.{params['format']}"
    save_panel(panel, outdir / fname, params["format"])
    print(f"wrote {panel.n_nodes} nodes x {panel.n_hours} hours to {outdir / fname}")
    return [fname]


COMMANDS = {
    "spectrum": run_spectrum,
    "ghe": run_ghe,
    "rolling": run_rolling,
    "forecast": run_forecast,
    "pipeline": run_pipeline,
    "synth": run_synth,
}


def run_rerun(params: dict, outdir: Path) -> list[str]:
    manifest_path = Path(params["manifest"])
    if not manifest_path.exists():
        raise ValidationError(f"no such manifest: {manifest_path}")
    with open(manifest_path) as fh:
        doc = json.load(fh)
    command = doc.get("command")
    if command not in COMMANDS:
        raise ValidationError(f"manifest names unknown command {command!r}")
    saved = dict(doc["params"])
    outputs = COMMANDS[command](saved, outdir)
    _write_manifest(outdir, command, saved, outputs)
    return outputs


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="panel file (csv or json)")
    p.add_argument("--output", "-o", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker cap for per-node fan-out (results are thread-count independent)")
    p.add_argument("--no-plot", dest="plot", action="store_false",
                   help="skip figure rendering")


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--filtered", action="store_true",
                   help="remove cyclic components before the analysis")
    p.add_argument("--periods", default="24,12,8,6",
                   help="periods (hours) to notch when filtering")
    p.add_argument("--halfwidth", type=int, default=0,
                   help="extra bins to zero on each side of a notch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hurstpanel",
        description="multi-scaling analysis of hourly price panels",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="market-average power spectrum with peak detection")
    _add_common(p)
    p.add_argument("--peaks-threshold", type=float, default=10.0,
                   help="peak = power above this multiple of the local median")

    p = sub.add_parser("ghe", help="whole-series Hurst exponents per node")
    _add_common(p)
    p.add_argument("--q", default="1,2", help="comma list of q moments")
    p.add_argument("--tau-max", type=int, default=456, help="largest lag in the fit (456 = 19 days)")
    p.add_argument("--no-cumsum", dest="cumsum", action="store_false",
                   help="estimate on raw values instead of the running sum")
    p.add_argument("--detrend", type=int, default=None,
                   help="coarse detrend window in samples")
    p.add_argument("--tau-max-sweep", default=None,
                   help="comma list of tau_max values to average over")

    p = sub.add_parser("rolling", help="moving-window Hurst dynamics")
    _add_common(p)
    _add_filter_flags(p)
    p.add_argument("--dh", type=int, default=50, help="window length in hours")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--q", default="1,2")
    p.add_argument("--tau-max", type=int, default=24)
    p.add_argument("--shift-threshold", type=float, default=0.1,
                   help="flag steps of the market mean larger than this")
    p.add_argument("--node-matrix", action="store_true",
                   help="also write the per-node H matrix")

    p = sub.add_parser("forecast", help="linear forecast study and error-vs-Hurst fits")
    _add_common(p)
    _add_filter_flags(p)
    p.add_argument("--dh", type=int, default=50, help="training window in hours")
    p.add_argument("--lags", default="1", help="forecast horizons: '1,6,12' or '1..24'")
    p.add_argument("--tau-max", type=int, default=25)
    p.add_argument("--squared-error", action="store_true",
                   help="regress squared error instead of absolute error")
    p.add_argument("--binned", action="store_true",
                   help="fit per-bin medians instead of the raw cloud")

    p = sub.add_parser("pipeline", help="filtered vs unfiltered c(p) comparison")
    _add_common(p)
    _add_filter_flags(p)
    p.add_argument("--dh", type=int, default=50)
    p.add_argument("--lags", default="1..24")
    p.add_argument("--tau-max", type=int, default=25)
    p.add_argument("--squared-error", action="store_true")
    p.add_argument("--binned", action="store_true")
    p.add_argument("--fit-q", type=float, default=1.0, choices=[1.0, 2.0],
                   help="which moment's H enters the fits")

    p = sub.add_parser("synth", help="generate oracle panels in the panel schema")
    synth_sub = p.add_subparsers(dest="kind", required=True)

    f = synth_sub.add_parser("fbm", help="fractional noise panel with known H")
    f.add_argument("--H", dest="hurst", type=float, required=True)
    f.add_argument("--T", dest="length", type=int, required=True,
                   help="length (power of two >= 64)")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--nodes", type=int, default=1)
    f.add_argument("--kind", dest="output_kind", choices=["path", "increments"],
                   default="increments")
    f.add_argument("--output", "-o", required=True)
    f.add_argument("--format", choices=["csv", "json"], default="csv")

    c = synth_sub.add_parser("cascade", help="binomial cascade panel")
    c.add_argument("--m0", type=float, required=True)
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--nodes", type=int, default=1)
    c.add_argument("--output", "-o", required=True)
    c.add_argument("--format", choices=["csv", "json"], default="csv")

    s = synth_sub.add_parser("seasonal", help="harmonics plus optional fractional noise")
    s.add_argument("--components", required=True,
                   help="period:amplitude pairs, e.g. '24:3,12:1.5,8:1'")
    s.add_argument("--T", dest="length", type=int, required=True)
    s.add_argument("--noise-H", dest="noise_hurst", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--nodes", type=int, default=1)
    s.add_argument("--output", "-o", required=True)
    s.add_argument("--format", choices=["csv", "json"], default="csv")

    p = sub.add_parser("rerun", help="replay a manifest into a new output directory")
    p.add_argument("manifest", help="path to a manifest.json from a previous run")
    p.add_argument("--output", "-o", required=True)

    return parser


def _params_from_args(args: argparse.Namespace) -> dict:
    """Resolve parsed flags into the JSON-safe params dict the runners use."""
    cmd = args.command
    if cmd == "spectrum":
        return {
            "input": args.input,
            "peaks_threshold": args.peaks_threshold,
            "threads": args.threads,
            "plot": args.plot,
        }
    if cmd == "ghe":
        return {
            "input": args.input,
            "q": list(_parse_floats(args.q)),
            "tau_max": args.tau_max,
            "cumsum": args.cumsum,
            "detrend": args.detrend,
            "tau_max_sweep": (
                [int(v) for v in _parse_floats(args.tau_max_sweep)]
                if args.tau_max_sweep
                else None
            ),
            "threads": args.threads,
            "plot": args.plot,
        }
    if cmd == "rolling":
        return {
            "input": args.input,
            "dh": args.dh,
            "stride": args.stride,
            "q": list(_parse_floats(args.q)),
            "tau_max": args.tau_max,
            "filtered": args.filtered,
            "periods": list(_parse_floats(args.periods)),
            "halfwidth": args.halfwidth,
            "shift_threshold": args.shift_threshold,
            "node_matrix": args.node_matrix,
            "threads": args.threads,
            "plot": args.plot,
        }
    if cmd in ("forecast", "pipeline"):
        params = {
            "input": args.input,
            "dh": args.dh,
            "lags": list(_parse_lags(args.lags)),
            "tau_max": args.tau_max,
            "filtered": getattr(args, "filtered", False),
            "periods": list(_parse_floats(args.periods)),
            "halfwidth": args.halfwidth,
            "squared_error": args.squared_error,
            "binned": args.binned,
            "threads": args.threads,
            "plot": args.plot,
        }
        if cmd == "pipeline":
            params["fit_q"] = args.fit_q
        return params
    if cmd == "synth":
        params = {"kind": args.kind, "seed": args.seed, "nodes": args.nodes,
                  "format": args.format}
        if args.kind == "fbm":
            params.update(hurst=args.hurst, length=args.length, output_kind=args.output_kind)
        elif args.kind == "cascade":
            params.update(m0=args.m0, depth=args.depth)
        else:
            params.update(
                components=[[p, a] for p, a in _parse_components(args.components)],
                length=args.length,
                noise_hurst=args.noise_hurst,
            )
        return params
    if cmd == "rerun":
        return {"manifest": args.manifest}
    raise ValidationError(f"unknown command {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = _params_from_args(args)
        outdir = Path(args.output)
        if args.command == "rerun":
            run_rerun(params, outdir)
        else:
            outputs = COMMANDS[args.command](params, outdir)
            _write_manifest(outdir, args.command, params, outputs)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HurstPanelError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
