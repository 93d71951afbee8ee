"""Synthetic electricity-load datasets with known ground truth.

Daily log load is built from a piecewise-linear temperature response,
weekday and holiday effects, yearly levels, a weekly seasonal profile, ARMA
noise and an optional shock on selected weeks of the final year. Hourly
loads spread each day over a fixed intraday profile so the files can go
through the normal ingest path.

Ground-truth impacts are computed here directly from the injected
log-impacts and never through the estimation modules.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from dateutil.easter import easter
from scipy import signal

from .config import CountryConfig, dump_config
from .errors import ValidationError

HOLIDAY_EFFECTS = {
    "generic": -0.12,
    "gap_to_sunday": -0.05,
    "gap_to_saturday": -0.06,
    "christmas": -0.20,
    "new_year": -0.18,
    "dec31": -0.08,
}
WEEKDAY_EFFECTS = {"Tue": 0.015, "Wed": 0.02, "Thu": 0.018, "Fri": -0.01, "Sat": -0.15, "Sun": -0.22}


def _weekly_profile():
    w = np.arange(1, 53)
    return tuple(0.03 * np.cos(2 * np.pi * (w - 2) / 52.0) - 0.025 * np.exp(-0.5 * ((w - 32) / 2.0) ** 2))


@dataclass(frozen=True)
class SynthSpec:
    """Everything needed to generate one synthetic country."""

    seed: int = 0
    country: str = "SYN"
    first_year: int = 2015
    end_date: dt.date = dt.date(2020, 8, 26)
    delta0: float = 9.0
    delta1: float = -0.01
    delta2: float = 0.02
    k: float = 16.0
    weekday_effects: dict = field(default_factory=lambda: dict(WEEKDAY_EFFECTS))
    holiday_effects: dict = field(default_factory=lambda: dict(HOLIDAY_EFFECTS))
    year_levels: dict = field(
        default_factory=lambda: {2015: 0.02, 2016: 0.01, 2017: 0.0, 2018: -0.01, 2019: -0.02, 2020: 0.0}
    )
    weekly_profile: tuple = field(default_factory=_weekly_profile)
    phi: tuple = (0.6,)
    theta: tuple = ()
    sigma: float = 0.01
    shock: tuple = tuple((w, -0.12) for w in range(12, 21))
    temp_mean: float = 11.0
    temp_amplitude: float = 9.0
    temp_noise: float = 2.5
    hourly_noise: float = 0.0
    resolution_minutes: int = 60
    residential_share: float = 30.0
    lockdown: tuple | None = (dt.date(2020, 3, 16), dt.date(2020, 4, 19))
    fit_order: tuple | None = None  # ARMA order written to the config; None selects by AIC

    @property
    def final_year(self):
        return self.end_date.year

    def validate(self):
        phi = np.asarray(self.phi, float)
        theta = np.asarray(self.theta, float)
        if len(phi) and np.any(np.abs(np.roots(np.r_[-phi[::-1], 1.0])) <= 1.0):
            raise ValidationError("AR coefficients are not stationary")
        if len(theta) and np.any(np.abs(np.roots(np.r_[theta[::-1], 1.0])) <= 1.0):
            raise ValidationError("MA coefficients are not invertible")
        if len(self.weekly_profile) != 52:
            raise ValidationError("weekly_profile needs 52 values")
        if self.resolution_minutes not in (15, 30, 60):
            raise ValidationError("resolution must be 15, 30 or 60 minutes")
        for week, _ in self.shock:
            if not 1 <= week <= 52:
                raise ValidationError(f"shock week {week} outside 1..52")


@dataclass
class SynthDataset:
    spec: SynthSpec
    hourly: pd.DataFrame  # timestamp, load_mw
    temperature: pd.Series
    config: CountryConfig
    daily: pd.DataFrame  # every calendar day: true log-load components
    truth: pd.DataFrame  # final-year dates: log_impact, load_impact_pct, gdp_impact_pct

    def weekly_truth(self):
        """True weekly load impact (%) for each final-year ISO week in the sample."""
        t = self.truth[self.truth.index.dayofweek < 5]
        iso = t.index.isocalendar()
        labels = [f"{y}-W{min(w, 52):02d}" for y, w in zip(iso["year"], iso["week"])]
        return t["load_impact_pct"].groupby(labels).mean()


def holiday_calendar(years):
    """Generic holidays plus derived gap days for a western-European style calendar."""
    generic = []
    for y in years:
        e = easter(y)
        generic += [
            e + dt.timedelta(days=1),  # Easter Monday
            e + dt.timedelta(days=39),  # Ascension (Thursday)
            e + dt.timedelta(days=50),  # Whit Monday
            dt.date(y, 5, 1),
            dt.date(y, 8, 15),
            dt.date(y, 11, 1),
            dt.date(y, 11, 11),
            dt.date(y, 12, 26),
        ]
    generic = sorted(set(generic))
    gen = set(generic)
    to_sunday, to_saturday = [], []
    for d in generic:
        prev, nxt = d - dt.timedelta(days=1), d + dt.timedelta(days=1)
        if d.weekday() == 1 and prev not in gen:
            to_sunday.append(prev)
        if d.weekday() == 3 and nxt not in gen:
            to_saturday.append(nxt)
    return {
        "generic": generic,
        "gap_to_sunday": to_sunday,
        "gap_to_saturday": to_saturday,
        "christmas": [],
        "new_year": [],
        "dec31": [],
    }


def _day_holiday(day, calendar):
    if day.month == 12 and day.day == 25:
        return "christmas"
    if day.month == 1 and day.day == 1:
        return "new_year"
    if day.month == 12 and day.day == 31:
        return "dec31"
    for kind in ("generic", "gap_to_sunday", "gap_to_saturday"):
        if day in calendar[kind]:
            return kind
    return "none"


def _arma_noise(rng, n, phi, theta, sigma, burn=500):
    e = rng.standard_normal(n + burn) * sigma
    u = signal.lfilter(np.r_[1.0, np.asarray(theta, float)], np.r_[1.0, -np.asarray(phi, float)], e)
    return u[burn:]


def generate(spec: SynthSpec) -> SynthDataset:
    """Generate a dataset; identical specs give bitwise identical output."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    days = pd.date_range(dt.date(spec.first_year, 1, 1), spec.end_date, freq="D")
    n = len(days)
    doy = days.dayofyear.to_numpy()
    temp = (
        spec.temp_mean
        - spec.temp_amplitude * np.cos(2 * np.pi * (doy - 15) / 365.25)
        + spec.temp_noise * rng.standard_normal(n)
    )
    temp = np.round(temp, 2)

    years = sorted(set(days.year))
    calendar = holiday_calendar(years)
    cal_sets = {k: set(v) for k, v in calendar.items()}
    holiday = np.array([_day_holiday(d.date(), cal_sets) for d in days], dtype=object)
    names = np.array(["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"], dtype=object)
    weekday = names[days.dayofweek]

    iso = days.isocalendar()
    iso_year = iso["year"].to_numpy(dtype=int)
    week = np.minimum(iso["week"].to_numpy(dtype=int), 52)

    short = (
        spec.delta0
        + spec.delta1 * temp
        + spec.delta2 * np.where(temp > spec.k, temp - spec.k, 0.0)
        + np.array([spec.weekday_effects.get(w, 0.0) for w in weekday])
        + np.array([spec.holiday_effects.get(h, 0.0) for h in holiday])
    )
    level = np.array([spec.year_levels.get(int(y), 0.0) for y in days.year])
    seasonal = np.asarray(spec.weekly_profile, float)[week - 1]

    shock_map = dict(spec.shock)
    in_final = iso_year == spec.final_year
    log_impact = np.where(in_final, [shock_map.get(int(w), 0.0) for w in week], 0.0)

    is_weekday = days.dayofweek < 5
    noise = np.empty(n)
    noise[is_weekday] = _arma_noise(rng, int(is_weekday.sum()), spec.phi, spec.theta, spec.sigma)
    marginal_sd = spec.sigma * np.sqrt(_arma_marginal_var(spec.phi, spec.theta))
    noise[~is_weekday] = marginal_sd * rng.standard_normal(int((~is_weekday).sum()))

    log_load = short + level + seasonal + noise + log_impact

    daily = pd.DataFrame(
        {
            "temp": temp,
            "weekday": weekday,
            "holiday_type": holiday,
            "short_run": short,
            "year_level": level,
            "weekly": seasonal,
            "noise": noise,
            "log_impact": log_impact,
            "log_load": log_load,
        },
        index=pd.DatetimeIndex(days, name="date"),
    )

    hourly = _hourly(rng, days, log_load, spec)

    lockdown = spec.lockdown
    cfg = CountryConfig(
        country=spec.country,
        residential_share=spec.residential_share,
        lockdown_start=lockdown[0] if lockdown else None,
        lockdown_end=lockdown[1] if lockdown else None,
        arma_order=spec.fit_order,
        capital_station=f"{spec.country}-capital",
        holidays=calendar,
    )

    final = daily[daily.index.year == spec.final_year]
    load_pct = 100.0 * np.expm1(final["log_impact"].to_numpy())
    r = spec.residential_share
    if lockdown:
        locked = (final.index >= pd.Timestamp(lockdown[0])) & (final.index <= pd.Timestamp(lockdown[1]))
    else:
        locked = np.zeros(len(final), dtype=bool)
    gdp_pct = np.where(locked, load_pct * 100.0 / (100.0 - 1.4 * r), load_pct * 100.0 / (100.0 - r))
    truth = pd.DataFrame(
        {"log_impact": final["log_impact"].to_numpy(), "load_impact_pct": load_pct, "gdp_impact_pct": gdp_pct,
         "lockdown": locked},
        index=final.index,
    )
    temperature = pd.Series(temp, index=daily.index, name="temp_c")
    return SynthDataset(spec, hourly, temperature, cfg, daily, truth)


def _arma_marginal_var(phi, theta):
    # psi-weight sum of squares, unit innovation variance
    impulse = np.zeros(2000)
    impulse[0] = 1.0
    psi = signal.lfilter(np.r_[1.0, np.asarray(theta, float)], np.r_[1.0, -np.asarray(phi, float)], impulse)
    return float(psi @ psi)


def _intraday_profile(steps_per_day):
    hours = (np.arange(steps_per_day) + 0.5) * 24.0 / steps_per_day
    prof = 1.0 + 0.18 * np.exp(-0.5 * ((hours - 12.5) / 3.5) ** 2) + 0.10 * np.exp(-0.5 * ((hours - 19.0) / 1.5) ** 2)
    return prof / prof.mean()


def _hourly(rng, days, log_load, spec):
    steps = 24 * 60 // spec.resolution_minutes
    prof = _intraday_profile(steps)
    level = np.exp(log_load)[:, None] * prof[None, :]
    if spec.hourly_noise > 0:
        level = level * np.exp(spec.hourly_noise * rng.standard_normal(level.shape))
    offsets = pd.to_timedelta(np.arange(steps) * spec.resolution_minutes, unit="min")
    stamps = (days.values[:, None] + offsets.values[None, :]).ravel()
    return pd.DataFrame({"timestamp": pd.DatetimeIndex(stamps), "load_mw": np.round(level.ravel(), 4)})


def write_dataset(dataset, directory, config_name="config.yaml"):
    """Write load/temperature files and a config in the ingest formats.

    Returns the paths written. Several datasets can share ``directory``; the
    config file is then merged.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cc = dataset.spec.country
    load_path = directory / f"{cc}_load.csv"
    temp_path = directory / f"{cc}_temp.csv"
    h = dataset.hourly
    pd.DataFrame(
        {"timestamp": h["timestamp"].dt.strftime("%Y-%m-%dT%H:%M"), "load_mw": h["load_mw"].map("{:.4f}".format)}
    ).to_csv(load_path, index=False, lineterminator="\n")
    t = dataset.temperature
    pd.DataFrame({"date": t.index.strftime("%Y-%m-%d"), "temp_c": t.map("{:.2f}".format).to_numpy()}).to_csv(
        temp_path, index=False, lineterminator="\n"
    )
    truth_path = directory / f"{cc}_truth.csv"
    tr = dataset.truth.reset_index()
    tr["date"] = tr["date"].dt.strftime("%Y-%m-%d")
    tr.to_csv(truth_path, index=False, lineterminator="\n", float_format="%.10g")
    cfg_path = directory / config_name
    configs = {}
    if cfg_path.exists():
        from .config import load_config

        configs = load_config(cfg_path)
    configs[cc] = dataset.config
    cfg_path.write_text(dump_config(configs))
    return {"load": load_path, "temp": temp_path, "truth": truth_path, "config": cfg_path}


def fixture_specs(seed=0):
    """A small fixed set of synthetic countries used by the CLI and acceptance runs."""
    base = SynthSpec(seed=seed)
    return [
        replace(base, country="SYA", seed=seed),
        replace(
            base,
            country="SYB",
            seed=seed + 1,
            phi=(0.5, -0.2, 0.1),
            shock=tuple((w, -0.2 + 0.01 * (w - 11)) for w in range(11, 27)),
            residential_share=25.0,
            lockdown=(dt.date(2020, 3, 18), dt.date(2020, 5, 11)),
            resolution_minutes=30,
        ),
        replace(base, country="SYC", seed=seed + 2, phi=(0.4,), theta=(0.3,), shock=(), lockdown=None),
    ]
