"""Per-country configuration and its YAML file format.

Schema::

    countries:
      BE:
        residential_share: 24.0        # percent of national load, r
        capital_station: Brussels
        lockdown: {start: 2020-03-18, end: 2020-05-11}   # omit for none
        arma_order: [3, 0]             # optional, bypasses order selection
        holidays:                      # explicit date lists per type
          generic: [2019-04-22, ...]
          gap_to_sunday: []
          gap_to_saturday: [2019-05-31]
          christmas: []                # 25 Dec is always christmas
          new_year: []                 # 1 Jan is always new_year
          dec31: []                    # 31 Dec is always dec31
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ValidationError

HOLIDAY_TYPES = ("generic", "gap_to_sunday", "gap_to_saturday", "christmas", "new_year", "dec31")

MAX_RESIDENTIAL_SHARE = 100.0 / 1.4


def _as_date(value):
    if value is None or isinstance(value, dt.date) and not isinstance(value, dt.datetime):
        return value
    if isinstance(value, dt.datetime):
        return value.date()
    return dt.date.fromisoformat(str(value))


@dataclass
class CountryConfig:
    country: str
    residential_share: float
    lockdown_start: dt.date | None = None
    lockdown_end: dt.date | None = None
    arma_order: tuple[int, int] | None = None
    capital_station: str = ""
    holidays: dict[str, list[dt.date]] = field(default_factory=dict)

    def __post_init__(self):
        r = float(self.residential_share)
        if not 0.0 <= r < MAX_RESIDENTIAL_SHARE:
            raise ValidationError(
                f"{self.country}: residential_share {r} outside [0, {MAX_RESIDENTIAL_SHARE:.4f})"
            )
        self.residential_share = r
        self.lockdown_start = _as_date(self.lockdown_start)
        self.lockdown_end = _as_date(self.lockdown_end)
        if (self.lockdown_start is None) != (self.lockdown_end is None):
            raise ValidationError(f"{self.country}: lockdown needs both start and end")
        if self.lockdown_start is not None and not self.lockdown_start < self.lockdown_end:
            raise ValidationError(f"{self.country}: lockdown_start must precede lockdown_end")
        if self.arma_order is not None:
            p, q = (int(v) for v in self.arma_order)
            if p < 0 or q < 0:
                raise ValidationError(f"{self.country}: negative ARMA order")
            self.arma_order = (p, q)
        unknown = set(self.holidays) - set(HOLIDAY_TYPES)
        if unknown:
            raise ValidationError(f"{self.country}: unknown holiday types {sorted(unknown)}")
        self.holidays = {
            k: sorted(_as_date(d) for d in self.holidays.get(k, []) or []) for k in HOLIDAY_TYPES
        }

    def in_lockdown(self, day):
        if self.lockdown_start is None:
            return False
        return self.lockdown_start <= day <= self.lockdown_end

    def to_dict(self):
        out = {"residential_share": self.residential_share, "capital_station": self.capital_station}
        if self.lockdown_start is not None:
            out["lockdown"] = {"start": self.lockdown_start, "end": self.lockdown_end}
        if self.arma_order is not None:
            out["arma_order"] = list(self.arma_order)
        out["holidays"] = {k: list(v) for k, v in self.holidays.items()}
        return out

    @classmethod
    def from_dict(cls, country, data):
        data = dict(data or {})
        lockdown = data.pop("lockdown", None) or {}
        try:
            return cls(
                country=country,
                residential_share=data.pop("residential_share"),
                lockdown_start=lockdown.get("start"),
                lockdown_end=lockdown.get("end"),
                arma_order=data.pop("arma_order", None),
                capital_station=data.pop("capital_station", "") or "",
                holidays=data.pop("holidays", {}) or {},
            )
        except KeyError as exc:
            raise ValidationError(f"{country}: missing config key {exc}") from None


def load_config(source):
    """Read a config file (path or YAML text) into ``{country: CountryConfig}``."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text()
    else:
        text = source
    raw = yaml.safe_load(text) or {}
    countries = raw.get("countries")
    if not isinstance(countries, dict):
        raise ValidationError("config must contain a 'countries' mapping")
    return {str(cc): CountryConfig.from_dict(str(cc), body) for cc, body in countries.items()}


def dump_config(configs):
    """Serialize ``{country: CountryConfig}`` (or a list of them) to YAML text."""
    if not isinstance(configs, dict):
        configs = {c.country: c for c in configs}
    body = {"countries": {cc: cfg.to_dict() for cc, cfg in sorted(configs.items())}}
    return yaml.safe_dump(body, sort_keys=False, default_flow_style=None)
