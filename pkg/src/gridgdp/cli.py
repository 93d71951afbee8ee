"""Command-line interface.

Subcommands mirror the pipeline stages so partial reruns are possible:
``ingest``, ``fit``, ``impact``, ``gdp``, ``placebo``, ``report``, ``synth``
and ``run`` (all stages). Exit codes: 0 success, 1 partial failure,
2 invalid manifest or arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import load_config
from .diagnostics import diagnose, format_table, placebo_pre_outbreak, placebo_shift_year
from .errors import GridGdpError, ValidationError
from .estimation import COV_TYPES, estimate
from .gdp import format_gdp_report, gdp_impacts
from .impact import ESTIMATORS, ImpactModel, monte_carlo_ci, read_impact_table
from .ingest import read_daily_series, write_daily_series, write_gap_report
from .pipeline import (
    MODES,
    RunManifest,
    _write_csv,
    _write_json,
    country_seed,
    impact_metadata,
    load_country_series,
    run_pipeline,
    write_impact_tables,
)
from .prefilter import ShortRunModel, YearEffects
from .synth import fixture_specs, generate, write_dataset

logger = logging.getLogger("gridgdp")

EXIT_OK, EXIT_PARTIAL, EXIT_INVALID = 0, 1, 2


def _countries(text):
    return [c.strip() for c in text.split(",") if c.strip()]


def _common(p):
    p.add_argument("--manifest", help="YAML file with any of the options below; flags override it")
    p.add_argument("--data", dest="data_dir", help="directory with CC_load.csv, CC_temp.csv and config.yaml")
    p.add_argument("--config", help="country config YAML (default: DATA/config.yaml)")
    p.add_argument("--countries", type=_countries, help="comma-separated country codes")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--estimator", choices=ESTIMATORS)
    p.add_argument("--cov-type", dest="cov_type", choices=COV_TYPES)
    p.add_argument("--seed", type=int)
    p.add_argument("--draws", type=int, help="Monte Carlo draws (default 5000)")
    p.add_argument("--shock-date", dest="shock_date", help="YYYY-MM-DD (default 2020-03-03)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="countries processed in parallel")
    p.add_argument("--no-placebo2", dest="placebo2", action="store_const", const=False)


def build_parser():
    parser = argparse.ArgumentParser(prog="gridgdp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "all stages for every country"),
        ("ingest", "parse inputs and write the daily modeling series"),
        ("fit", "prefilter and fit the impact model"),
        ("impact", "Monte Carlo load impacts from a fitted model"),
        ("gdp", "GDP impacts and period aggregates from load impacts"),
        ("placebo", "both in-time placebo tests"),
        ("report", "diagnostics tables from fitted outputs"),
    ):
        _common(sub.add_parser(name, help=help_text))
    s = sub.add_parser("synth", help="write the synthetic fixture countries")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    return parser


def manifest_from_args(args):
    """Merge a manifest file with command-line flags into a validated :class:`RunManifest`."""
    opts = {}
    if args.manifest:
        try:
            loaded = yaml.safe_load(Path(args.manifest).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ValidationError(f"cannot read manifest: {exc}") from None
        if not isinstance(loaded, dict):
            raise ValidationError("manifest must be a mapping")
        opts.update(loaded)
    fields = ("data_dir", "config", "countries", "mode", "estimator", "cov_type", "seed", "draws",
              "shock_date", "out", "workers", "placebo2")
    for f in fields:
        v = getattr(args, f, None)
        if v is not None:
            opts[f] = v
    unknown = set(opts) - set(fields)
    if unknown:
        raise ValidationError(f"unknown manifest keys {sorted(unknown)}")
    for f in ("data_dir", "out"):
        if not opts.get(f):
            raise ValidationError(f"missing required option {f}")
    if not Path(opts["data_dir"]).is_dir():
        raise ValidationError(f"data directory {opts['data_dir']} does not exist")
    if isinstance(opts.get("countries"), str):
        opts["countries"] = _countries(opts["countries"])
    if not opts.get("countries"):
        path = Path(opts["config"]) if opts.get("config") else Path(opts["data_dir"]) / "config.yaml"
        opts["countries"] = sorted(load_config(path))
    try:
        manifest = RunManifest(**opts)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    manifest.configs = manifest.validate()
    return manifest


def _country_dir(manifest, cc):
    d = Path(manifest.out) / cc
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_fit(d):
    pre = json.loads((d / "prefilter.json").read_text())
    model = ImpactModel.from_dict(json.loads((d / "impact_model.json").read_text()))
    return ShortRunModel.from_dict(pre["short_run"]), YearEffects.from_dict(pre["year_effects"]), model


def _series(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    path = d / "daily_series.csv"
    if path.exists():
        return read_daily_series(path)
    series, gaps, _ = load_country_series(manifest.data_dir, cfg, manifest.mode)
    write_daily_series(series, path)
    (d / "gaps.csv").write_text(write_gap_report(gaps))
    return series


def _estimate(manifest, cfg, series):
    return estimate(series, manifest.shock_date, manifest.estimator, cfg.arma_order, manifest.cov_type)


def _stage_ingest(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    series, gaps, bridge = load_country_series(manifest.data_dir, cfg, manifest.mode)
    write_daily_series(series, d / "daily_series.csv")
    (d / "gaps.csv").write_text(write_gap_report(gaps))
    if bridge is not None:
        _write_json(vars(bridge), d / "temperature_bridge.json")


def _stage_fit(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    est = _estimate(manifest, cfg, _series(manifest, cfg))
    _write_json({"short_run": est.short_run.to_dict(), "year_effects": est.year_effects.to_dict()}, d / "prefilter.json")
    _write_json(est.model.to_dict(), d / "impact_model.json")
    return est


def _stage_impact(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    series = _series(manifest, cfg)
    if not (d / "impact_model.json").exists():
        _stage_fit(manifest, cfg)
    _, _, model = _load_fit(d)
    idx = series.index[series.index.year == manifest.shock_date.year]
    mc = monte_carlo_ci(model, idx, manifest.draws, country_seed(manifest.seed, cfg.country))
    write_impact_tables(mc, d, impact_metadata(cfg.country, model, manifest.seed, manifest.draws))
    np.save(d / "impact_draws.npy", mc.draws)
    return mc


def _stage_gdp(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    if not (d / "impact_draws.npy").exists():
        _stage_impact(manifest, cfg)
    daily, _ = read_impact_table(d / "impact_daily.csv")
    draws = np.load(d / "impact_draws.npy")
    series = _series(manifest, cfg)
    lockdown = series.loc[daily.index, "lockdown"].to_numpy(dtype=bool)
    g = gdp_impacts(daily.index, daily["impact_pct"].to_numpy(), draws, cfg.residential_share, lockdown)
    _write_csv(g.daily, d / "gdp_daily.csv")
    _write_csv(g.weekly, d / "gdp_weekly.csv")
    _write_csv(g.quarterly, d / "gdp_quarterly.csv")
    (d / "gdp_monthly.txt").write_text(format_gdp_report(g.monthly))


def _stage_placebo(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    series = _series(manifest, cfg)
    est = _estimate(manifest, cfg, series)
    p1 = placebo_pre_outbreak(est.model)
    order = est.model.order if manifest.estimator == "ml_arma" else None
    p2, _ = placebo_shift_year(
        series, manifest.shock_date, estimator=manifest.estimator, order=order, cov_type=manifest.cov_type
    )
    _write_json({"placebo1": p1.to_dict(), "placebo2": p2.to_dict()}, d / "placebo.json")


def _stage_report(manifest, cfg):
    d = _country_dir(manifest, cfg.country)
    est = _estimate(manifest, cfg, _series(manifest, cfg))
    report = diagnose(est, country=cfg.country, placebo2=manifest.placebo2, cov_type=manifest.cov_type)
    _write_json(report.to_dict(), d / "diagnostics.json")
    (d / "diagnostics.txt").write_text(format_table([report]))
    return report


STAGES = {
    "ingest": _stage_ingest,
    "fit": _stage_fit,
    "impact": _stage_impact,
    "gdp": _stage_gdp,
    "placebo": _stage_placebo,
    "report": _stage_report,
}


def _run_stage(manifest, name):
    failed = []
    reports = []
    for cc in manifest.countries:
        err = Path(manifest.out) / cc / "error.txt"
        try:
            result = STAGES[name](manifest, manifest.configs[cc])
            if name == "report":
                reports.append(result)
            if err.exists():
                err.unlink()
        except (GridGdpError, OSError, ValueError, KeyError) as exc:
            logger.error("%s: %s", cc, exc)
            err.parent.mkdir(parents=True, exist_ok=True)
            err.write_text(f"{type(exc).__name__}: {exc}\n")
            failed.append(cc)
    if reports:
        (Path(manifest.out) / "summary_diagnostics.txt").write_text(format_table(reports))
    return EXIT_PARTIAL if failed else EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")

    if args.command == "synth":
        for spec in fixture_specs(args.seed):
            write_dataset(generate(spec), args.out)
        print(f"wrote {len(fixture_specs(args.seed))} synthetic countries to {args.out}")
        return EXIT_OK

    try:
        manifest = manifest_from_args(args)
    except GridGdpError as exc:
        print(f"invalid manifest: {exc}", file=sys.stderr)
        return EXIT_INVALID
    Path(manifest.out).mkdir(parents=True, exist_ok=True)

    if args.command == "run":
        code, results = run_pipeline(manifest)
        for r in results:
            print(f"{r.country}\t{'ok' if r.ok else 'FAILED: ' + r.error}")
        return code
    return _run_stage(manifest, args.command)


if __name__ == "__main__":
    sys.exit(main())
