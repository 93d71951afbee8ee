import datetime as dt

import pytest

from gridgdp.config import CountryConfig, dump_config, load_config
from gridgdp.errors import ValidationError

TEXT = """
countries:
  BE:
    residential_share: 24.0
    capital_station: Brussels
    lockdown: {start: 2020-03-18, end: 2020-05-11}
    arma_order: [3, 0]
    holidays:
      generic: [2019-04-22]
      gap_to_saturday: [2019-05-31]
  SE:
    residential_share: 35
"""


def test_load_config():
    cfg = load_config(TEXT)
    be = cfg["BE"]
    assert be.arma_order == (3, 0)
    assert be.lockdown_start == dt.date(2020, 3, 18)
    assert be.holidays["generic"] == [dt.date(2019, 4, 22)]
    assert be.holidays["christmas"] == []
    assert cfg["SE"].lockdown_start is None
    assert not cfg["SE"].in_lockdown(dt.date(2020, 4, 1))
    assert be.in_lockdown(dt.date(2020, 5, 11))


def test_round_trip():
    cfg = load_config(TEXT)
    assert load_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize(
    "kwargs",
    [
        {"residential_share": 100 / 1.4},
        {"residential_share": -1},
        {"residential_share": 20, "lockdown_start": "2020-05-01", "lockdown_end": "2020-04-01"},
        {"residential_share": 20, "lockdown_start": "2020-05-01"},
        {"residential_share": 20, "arma_order": (-1, 0)},
        {"residential_share": 20, "holidays": {"easter": []}},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ValidationError):
        CountryConfig("XX", **kwargs)


def test_missing_key_and_bad_layout():
    with pytest.raises(ValidationError, match="residential_share"):
        load_config("countries:\n  XX: {capital_station: a}\n")
    with pytest.raises(ValidationError):
        load_config("foo: 1\n")
