"""File-to-file driver: one country's inputs through every stage, and multi-country runs."""

from __future__ import annotations

import concurrent.futures as cf
import datetime as dt
import hashlib
import json
import logging
import platform
import traceback
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import load_config
from .diagnostics import diagnose, format_table
from .errors import GridGdpError, ValidationError
from .estimation import COV_TYPES, estimate
from .gdp import format_gdp_report, gdp_impacts
from .impact import ESTIMATORS, impact_table_text, monte_carlo_ci
from .ingest import (
    aggregate_daily,
    build_daily_series,
    fill_temperature,
    parse_load_file,
    parse_temperature_file,
    write_daily_series,
    write_gap_report,
)
from .kalman import BACKEND
from .prefilter import DEFAULT_SHOCK_DATE

logger = logging.getLogger(__name__)

MODES = ("weekdays", "all_days", "peak_only")
FLOAT_FORMAT = "%.10g"


@dataclass
class RunManifest:
    """What to run and where.

    Input files for country ``CC`` are ``{data_dir}/CC_load.csv`` and
    ``{data_dir}/CC_temp.csv``; an optional ``CC_temp_alt.csv`` fills
    temperature gaps through a bridging regression.
    """

    countries: list
    data_dir: str
    out: str
    config: str | None = None
    mode: str = "weekdays"
    estimator: str = "ml_arma"
    cov_type: str = "two_step"
    seed: int = 0
    draws: int = 5000
    shock_date: dt.date = DEFAULT_SHOCK_DATE
    placebo2: bool = True
    workers: int = 1

    def validate(self):
        if not self.countries:
            raise ValidationError("no countries requested")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.estimator not in ESTIMATORS:
            raise ValidationError(f"unknown estimator {self.estimator!r}")
        if self.cov_type not in COV_TYPES:
            raise ValidationError(f"unknown covariance type {self.cov_type!r}")
        if int(self.draws) < 1:
            raise ValidationError("draws must be positive")
        if int(self.workers) < 1:
            raise ValidationError("workers must be positive")
        self.shock_date = pd.Timestamp(self.shock_date).date()
        configs = load_config(self.config_path)
        unknown = [c for c in self.countries if c not in configs]
        if unknown:
            raise ValidationError(f"unknown countries {unknown}; configured: {sorted(configs)}")
        return configs

    @property
    def config_path(self):
        return Path(self.config) if self.config else Path(self.data_dir) / "config.yaml"

    def to_dict(self):
        d = asdict(self)
        d["shock_date"] = str(self.shock_date)
        return d


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def input_files(data_dir, country):
    data_dir = Path(data_dir)
    files = {"load": data_dir / f"{country}_load.csv", "temp": data_dir / f"{country}_temp.csv"}
    alt = data_dir / f"{country}_temp_alt.csv"
    if alt.exists():
        files["temp_alt"] = alt
    return files


def load_country_series(data_dir, config, mode="weekdays"):
    """Parse one country's files into the daily modeling frame.

    Returns ``(series, gaps, bridge)``. Temperatures imputed through the
    bridge are listed in ``gaps`` with reason ``temperature imputed`` even
    though those days are kept.
    """
    files = input_files(data_dir, config.country)
    for kind in ("load", "temp"):
        if not files[kind].exists():
            raise ValidationError(f"{config.country}: missing input file {files[kind]}")
    records = parse_load_file(files["load"].read_text(), config.country)
    temps = parse_temperature_file(files["temp"].read_text())
    bridge, imputed = None, []
    if "temp_alt" in files:
        alt = parse_temperature_file(files["temp_alt"].read_text())
        temps, bridge, imputed = fill_temperature(temps, alt)
    daily = aggregate_daily(records, "peak_hours" if mode == "peak_only" else "all_hours")
    series, gaps = build_daily_series(daily, temps, config.holidays, config, include_weekends=mode == "all_days")
    if imputed:
        kept = set(series.index.date)
        extra = pd.DataFrame([(d, "temperature imputed") for d in imputed if d in kept], columns=["date", "reason"])
        gaps = pd.concat([gaps, extra], ignore_index=True).sort_values(["date", "reason"], ignore_index=True)
    return series, gaps, bridge


def country_seed(seed, country):
    return [int(seed), zlib.crc32(country.encode())]


def _write_csv(frame, path, index=True):
    frame.to_csv(path, index=index, lineterminator="\n", float_format=FLOAT_FORMAT)


def impact_metadata(country, model, seed, draws):
    return {
        "country": country,
        "estimator": model.estimator,
        "order": f"{model.order[0]},{model.order[1]}",
        "cov_type": model.cov_type,
        "seed": seed,
        "draws": draws,
    }


def write_impact_tables(mc, directory, metadata):
    directory = Path(directory)
    (directory / "impact_daily.csv").write_text(impact_table_text(mc.daily, metadata, FLOAT_FORMAT))
    (directory / "impact_weekly.csv").write_text(impact_table_text(mc.weekly, metadata, FLOAT_FORMAT))


def _write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (dt.date, pd.Timestamp)):
        return str(o)
    raise TypeError(type(o))


@dataclass
class CountryResult:
    country: str
    ok: bool
    files: dict = field(default_factory=dict)
    error: str = ""
    table_row: tuple | None = None
    monthly: pd.DataFrame | None = None
    quarterly: pd.DataFrame | None = None


def run_country(manifest, config):
    """Run every stage for one country and write its outputs under ``out/CC``."""
    cc = config.country
    out = Path(manifest.out) / cc
    out.mkdir(parents=True, exist_ok=True)
    err_path = out / "error.txt"
    if err_path.exists():
        err_path.unlink()
    try:
        series, gaps, bridge = load_country_series(manifest.data_dir, config, manifest.mode)
        write_daily_series(series, out / "daily_series.csv")
        (out / "gaps.csv").write_text(write_gap_report(gaps))

        est = estimate(
            series,
            shock_date=manifest.shock_date,
            estimator=manifest.estimator,
            order=config.arma_order,
            cov_type=manifest.cov_type,
        )
        prefilter_report = {
            "short_run": est.short_run.to_dict(),
            "year_effects": est.year_effects.to_dict(),
            "temperature_bridge": None if bridge is None else asdict(bridge),
        }
        _write_json(prefilter_report, out / "prefilter.json")
        _write_json(est.model.to_dict(), out / "impact_model.json")

        shock_year = manifest.shock_date.year
        dates = est.adjusted.index[est.adjusted.index.year == shock_year]
        mc = monte_carlo_ci(est.model, dates, manifest.draws, country_seed(manifest.seed, cc))
        write_impact_tables(mc, out, impact_metadata(cc, est.model, manifest.seed, manifest.draws))

        report = diagnose(est, country=cc, placebo2=manifest.placebo2, cov_type=manifest.cov_type)
        _write_json(report.to_dict(), out / "diagnostics.json")
        (out / "diagnostics.txt").write_text(format_table([report]))

        lockdown = series.loc[dates, "lockdown"].to_numpy(dtype=bool)
        g = gdp_impacts(dates, mc.daily["impact_pct"].to_numpy(), mc.draws, config.residential_share, lockdown)
        _write_csv(g.daily, out / "gdp_daily.csv")
        _write_csv(g.weekly, out / "gdp_weekly.csv")
        _write_csv(g.quarterly, out / "gdp_quarterly.csv")
        (out / "gdp_monthly.txt").write_text(format_gdp_report(g.monthly))

        files = {p.name: _sha256(p) for p in sorted(out.iterdir())}
        return CountryResult(cc, True, files, "", report.row(), g.monthly, g.quarterly)
    except (GridGdpError, OSError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        logger.error("%s failed: %s", cc, exc)
        err_path.write_text(f"{type(exc).__name__}: {exc}\n\n{traceback.format_exc()}")
        return CountryResult(cc, False, {}, f"{type(exc).__name__}: {exc}")


def _versions():
    import scipy
    import yaml

    return {
        "gridgdp": __version__,
        "kernel": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pyyaml": yaml.__version__,
    }


def run_pipeline(manifest):
    """Run all countries in ``manifest``; returns ``(exit_code, results)``.

    Exit codes: 0 when every country succeeds, 1 when any fails.
    Manifest problems raise :class:`ValidationError` before any work starts.
    """
    configs = manifest.validate()
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [configs[c] for c in manifest.countries]
    if manifest.workers > 1 and len(jobs) > 1:
        with cf.ProcessPoolExecutor(max_workers=manifest.workers) as pool:
            results = list(pool.map(run_country, [manifest] * len(jobs), jobs))
    else:
        results = [run_country(manifest, cfg) for cfg in jobs]

    write_summary(out, results)
    digests = {}
    for c in manifest.countries:
        for kind, path in input_files(manifest.data_dir, c).items():
            digests[f"{c}/{kind}"] = _sha256(path) if path.exists() else None
    digests["config"] = _sha256(manifest.config_path)
    provenance = {
        "manifest": manifest.to_dict(),
        "versions": _versions(),
        "inputs_sha256": digests,
        "outputs_sha256": {r.country: r.files for r in results},
        "status": {r.country: "ok" if r.ok else r.error for r in results},
    }
    _write_json(provenance, out / "provenance.json")
    return (0 if all(r.ok for r in results) else 1), results


def write_summary(out, results):
    """Cross-country diagnostics table and monthly/quarterly GDP summaries."""
    ok = [r for r in results if r.ok]
    lines = format_table([]).splitlines()[:1] + ["\t".join(r.table_row) for r in ok]
    (Path(out) / "summary_diagnostics.txt").write_text("\n".join(lines) + "\n")
    for name, attr in (("summary_gdp_monthly.csv", "monthly"), ("summary_gdp_quarterly.csv", "quarterly")):
        frames = []
        for r in ok:
            f = getattr(r, attr).reset_index()
            f.insert(0, "country", r.country)
            frames.append(f)
        if frames:
            _write_csv(pd.concat(frames, ignore_index=True), Path(out) / name, index=False)
