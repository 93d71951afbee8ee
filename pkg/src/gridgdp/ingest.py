"""Reading load and temperature files and building the daily modeling series."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .config import HOLIDAY_TYPES
from .errors import InsufficientDataError, ParseError, ValidationError

logger = logging.getLogger(__name__)

WEEKDAYS = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
PEAK_HOURS = (8, 18)
MAX_MISSING_FRACTION = 0.20
MIN_BRIDGE_OVERLAP = 30
BRIDGE_R2_THRESHOLD = 0.85

_MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "-"}


@dataclass(frozen=True)
class HourlyLoadRecord:
    country: str
    timestamp: dt.datetime
    load: float


@dataclass(frozen=True)
class DailyObservation:
    date: dt.date
    log_load: float
    temp: float
    weekday: str
    holiday_type: str
    lockdown: bool


@dataclass(frozen=True)
class TemperatureBridge:
    slope: float
    intercept: float
    r_squared: float
    accepted: bool
    n_overlap: int = 0
    slope_se: float = float("nan")


def _text(data):
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def _reader(text):
    first = text.split("\n", 1)[0]
    delimiter = "\t" if first.count("\t") > first.count(",") else ","
    return csv.reader(io.StringIO(text), delimiter=delimiter)


def _header(reader, required):
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise ValidationError("empty file") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise ParseError(f"missing column(s) {missing}", line=1)
    return [header.index(c) for c in required]


def _value(token, line, allow_negative=False):
    token = token.strip()
    if token.lower() in _MISSING_TOKENS:
        return np.nan
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line=line) from None
    if not allow_negative and value < 0:
        raise ParseError(f"negative load {value}", line=line)
    return value


def parse_load_file(data, country):
    """Parse a delimited load file into a frame of hourly (or sub-hourly) records.

    Columns ``timestamp`` (``YYYY-MM-DDTHH:MM`` local time, optionally with a
    UTC offset to disambiguate the repeated autumn DST hour) and ``load_mw``.
    Missing loads become NaN. Output is sorted; duplicate timestamps raise.
    """
    text = _text(data)
    if not text.strip():
        raise ValidationError("empty load file")
    reader = _reader(text)
    i_ts, i_load = _header(reader, ("timestamp", "load_mw"))
    rows = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(i_ts, i_load):
            raise ParseError("too few fields", line=line)
        raw = row[i_ts].strip()
        if "T" not in raw:
            raise ParseError(f"bad timestamp {raw!r}", line=line)
        try:
            stamp = dt.datetime.fromisoformat(raw)
        except ValueError:
            raise ParseError(f"bad timestamp {raw!r}", line=line) from None
        offset = stamp.utcoffset()
        local = stamp.replace(tzinfo=None)
        rows.append((local, offset.total_seconds() if offset is not None else np.nan,
                     _value(row[i_load], line), line))
    if not rows:
        raise ValidationError("load file has no records")
    frame = pd.DataFrame(rows, columns=["timestamp", "utc_offset", "load_mw", "line"])
    key = frame[["timestamp", "utc_offset"]].astype({"utc_offset": str})
    dup = key.duplicated(keep=False)
    if dup.any():
        first = frame.loc[dup, "timestamp"].iloc[0]
        raise ValidationError(f"{country}: duplicate timestamp {first:%Y-%m-%dT%H:%M}")
    # the repeated autumn hour sorts by its UTC instant: +02:00 comes before +01:00
    instant = frame["timestamp"] - pd.to_timedelta(frame["utc_offset"].fillna(0.0), unit="s")
    frame = frame.assign(_instant=instant).sort_values(["timestamp", "_instant"], kind="mergesort")
    frame = frame.drop(columns="_instant").reset_index(drop=True)
    frame.insert(0, "country", country)
    return frame[["country", "timestamp", "utc_offset", "load_mw"]]


def parse_temperature_file(data):
    """Parse ``date``/``temp_c`` columns into a float Series indexed by date."""
    text = _text(data)
    if not text.strip():
        raise ValidationError("empty temperature file")
    reader = _reader(text)
    i_date, i_temp = _header(reader, ("date", "temp_c"))
    dates, temps = [], []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            dates.append(dt.date.fromisoformat(row[i_date].strip()))
        except (ValueError, IndexError):
            raise ParseError(f"bad date in {row!r}", line=line) from None
        temps.append(_value(row[i_temp], line, allow_negative=True))
    series = pd.Series(temps, index=pd.DatetimeIndex(dates, name="date"), name="temp_c")
    if series.index.duplicated().any():
        raise ValidationError("duplicate date in temperature file")
    return series.sort_index()


def _resolution_minutes(stamps):
    diffs = np.diff(stamps.values.astype("datetime64[m]").astype(np.int64))
    diffs = diffs[diffs > 0]
    if len(diffs) == 0:
        return 60
    values, counts = np.unique(diffs, return_counts=True)
    return int(values[np.argmax(counts)])


def aggregate_daily(records, mode="all_hours"):
    """Daily mean load from hourly/half-hourly records.

    ``mode="peak_hours"`` keeps records with hour in [08:00, 18:00). Days
    missing more than 20% of the expected records get NaN.
    """
    if records is None or len(records) == 0:
        raise ValidationError("no load records to aggregate")
    if mode not in ("all_hours", "peak_hours"):
        raise ValidationError(f"unknown aggregation mode {mode!r}")
    frame = records[["timestamp", "load_mw"]]
    res = _resolution_minutes(frame["timestamp"])
    hours = frame["timestamp"].dt.hour
    if mode == "peak_hours":
        frame = frame[(hours >= PEAK_HOURS[0]) & (hours < PEAK_HOURS[1])]
        expected = (PEAK_HOURS[1] - PEAK_HOURS[0]) * 60 / res
    else:
        expected = 24 * 60 / res
    day = frame["timestamp"].dt.normalize()
    grouped = frame["load_mw"].groupby(day)
    out = pd.DataFrame({"mean_load": grouped.mean(), "n": grouped.count()})
    out.index.name = "date"
    out.loc[out["n"] < (1.0 - MAX_MISSING_FRACTION) * expected, "mean_load"] = np.nan
    return out["mean_load"]


def holiday_types(dates, holidays):
    """Holiday type of each date: fixed-date rules first, then explicit lists.

    Precedence: christmas / new_year / dec31, then generic, then gap days.
    """
    idx = pd.DatetimeIndex(dates)
    out = np.full(len(idx), "none", dtype=object)
    listed = {k: set(pd.DatetimeIndex(holidays.get(k, []))) for k in HOLIDAY_TYPES}
    for kind in ("gap_to_saturday", "gap_to_sunday", "generic"):
        out[idx.isin(listed[kind])] = kind
    out[idx.isin(listed["dec31"]) | ((idx.month == 12) & (idx.day == 31))] = "dec31"
    out[idx.isin(listed["new_year"]) | ((idx.month == 1) & (idx.day == 1))] = "new_year"
    out[idx.isin(listed["christmas"]) | ((idx.month == 12) & (idx.day == 25))] = "christmas"
    return out


def derive_gap_days(generic_holidays):
    """Gap days implied by a list of holidays.

    A Monday followed by a Tuesday holiday bridges to Sunday; a Friday after a
    Thursday holiday bridges to Saturday.
    """
    hol = {pd.Timestamp(d).date() for d in generic_holidays}
    to_sunday, to_saturday = [], []
    for d in sorted(hol):
        if d.weekday() == 1 and (d - dt.timedelta(days=1)) not in hol:
            to_sunday.append(d - dt.timedelta(days=1))
        elif d.weekday() == 3 and (d + dt.timedelta(days=1)) not in hol:
            to_saturday.append(d + dt.timedelta(days=1))
    return to_sunday, to_saturday


def build_daily_series(daily_load, temps, holidays, config, include_weekends=False):
    """Join daily load, temperature and calendar into the modeling frame.

    Returns ``(series, gaps)``. ``series`` has one row per kept day, indexed
    by date, with columns ``log_load, temp, weekday, holiday_type,
    lockdown``; ``gaps`` lists dropped days with the reason.
    """
    load = daily_load.copy()
    load.index = pd.DatetimeIndex(load.index).normalize()
    temp = temps.copy()
    temp.index = pd.DatetimeIndex(temp.index).normalize()
    if not len(load):
        raise ValidationError("no daily load values")
    if len(temp) and (temp.index.max() < load.index.min() or temp.index.min() > load.index.max()):
        raise ValidationError("load and temperature date ranges do not overlap")

    frame = pd.DataFrame({"mean_load": load})
    frame["temp"] = temp.reindex(frame.index)
    dow = frame.index.dayofweek
    if not include_weekends:
        frame = frame[dow < 5]
        dow = frame.index.dayofweek

    gaps = []
    bad_load = ~np.isfinite(frame["mean_load"]) | (frame["mean_load"] <= 0)
    for day in frame.index[bad_load]:
        gaps.append((day.date(), "load missing"))
    bad_temp = ~np.isfinite(frame["temp"]) & ~bad_load
    for day in frame.index[bad_temp]:
        gaps.append((day.date(), "temperature missing"))
    keep = ~(bad_load | bad_temp)
    frame = frame[keep]
    dow = frame.index.dayofweek

    out = pd.DataFrame(index=frame.index)
    out.index.name = "date"
    out["log_load"] = np.log(frame["mean_load"].to_numpy())
    out["temp"] = frame["temp"].to_numpy()
    out["weekday"] = np.asarray(WEEKDAYS, dtype=object)[dow]
    out["holiday_type"] = holiday_types(out.index, holidays)
    if config.lockdown_start is not None:
        lo, hi = pd.Timestamp(config.lockdown_start), pd.Timestamp(config.lockdown_end)
        out["lockdown"] = (out.index >= lo) & (out.index <= hi)
    else:
        out["lockdown"] = False
    gap_frame = pd.DataFrame(sorted(gaps), columns=["date", "reason"])
    if len(gap_frame):
        logger.info("%s: dropped %d days", config.country, len(gap_frame))
    return out, gap_frame


def observations(series):
    """Iterate over a daily frame as :class:`DailyObservation` records."""
    for day, row in series.iterrows():
        yield DailyObservation(
            date=day.date(),
            log_load=float(row["log_load"]),
            temp=float(row["temp"]),
            weekday=row["weekday"],
            holiday_type=row["holiday_type"],
            lockdown=bool(row["lockdown"]),
        )


def write_daily_series(series, path_or_buf=None):
    out = series.reset_index()
    out["date"] = out["date"].dt.strftime("%Y-%m-%d")
    return out.to_csv(path_or_buf, index=False, lineterminator="\n")


def read_daily_series(path_or_buf):
    frame = pd.read_csv(path_or_buf, parse_dates=["date"], float_precision="round_trip")
    frame["lockdown"] = frame["lockdown"].astype(bool)
    frame["weekday"] = frame["weekday"].astype(object)
    frame["holiday_type"] = frame["holiday_type"].astype(object)
    return frame.set_index("date")


def write_gap_report(gaps, path_or_buf=None):
    out = gaps.copy()
    out["date"] = pd.to_datetime(out["date"]).dt.strftime("%Y-%m-%d")
    return out.to_csv(path_or_buf, index=False, lineterminator="\n")


def bridge_temperature(primary, alternate):
    """Regress the primary temperature source on the alternate over shared dates."""
    joined = pd.concat({"p": primary, "a": alternate}, axis=1).dropna()
    n = len(joined)
    if n < MIN_BRIDGE_OVERLAP:
        raise InsufficientDataError(
            f"temperature sources overlap on {n} days; need {MIN_BRIDGE_OVERLAP}"
        )
    x = joined["a"].to_numpy()
    y = joined["p"].to_numpy()
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        return TemperatureBridge(0.0, float(y.mean()), 0.0, False, n)
    slope = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    se = np.sqrt(float(resid @ resid) / (n - 2) / sxx)
    return TemperatureBridge(slope, intercept, r2, r2 > BRIDGE_R2_THRESHOLD, n, float(se))


def impute_temperature(gaps, alternate, bridge):
    """Fill gap dates from the alternate source through an accepted bridge.

    Returns a frame indexed by date with ``temp`` and an ``imputed`` flag;
    gap dates the alternate source lacks are left out.
    """
    if not bridge.accepted:
        raise ValidationError(
            f"temperature bridge rejected (R^2 = {bridge.r_squared:.3f}); refusing to impute"
        )
    idx = pd.DatetimeIndex(gaps).normalize()
    alt = alternate.copy()
    alt.index = pd.DatetimeIndex(alt.index).normalize()
    values = alt.reindex(idx).dropna()
    out = pd.DataFrame(
        {"temp": bridge.intercept + bridge.slope * values.to_numpy(), "imputed": True},
        index=values.index,
    )
    out.index.name = "date"
    return out


def fill_temperature(primary, alternate):
    """Primary temperatures with gaps imputed from ``alternate`` when the bridge passes.

    Returns ``(filled_series, bridge, imputed_dates)``; ``bridge`` is None
    when no alternate is given.
    """
    if alternate is None or not len(alternate):
        return primary, None, []
    bridge = bridge_temperature(primary, alternate)
    span = pd.date_range(
        min(primary.index.min(), alternate.index.min()),
        max(primary.index.max(), alternate.index.max()),
        freq="D",
    )
    full = primary.reindex(span)
    gap_dates = full.index[full.isna()]
    if not bridge.accepted or not len(gap_dates):
        return primary, bridge, []
    imputed = impute_temperature(gap_dates, alternate, bridge)
    full.loc[imputed.index] = imputed["temp"]
    full.name = primary.name
    full.index.name = primary.index.name
    return full.dropna(), bridge, list(imputed.index.date)
