import numpy as np
import pandas as pd
import pytest

from gridgdp import estimation, ingest, synth


def daily_frame(dataset, mode="weekdays"):
    daily = ingest.aggregate_daily(dataset.hourly, "peak_hours" if mode == "peak_only" else "all_hours")
    series, _ = ingest.build_daily_series(
        daily, dataset.temperature, dataset.config.holidays, dataset.config, include_weekends=mode == "all_days"
    )
    return series


@pytest.fixture(scope="session")
def dataset():
    return synth.generate(synth.SynthSpec(seed=11))


@pytest.fixture(scope="session")
def series(dataset):
    return daily_frame(dataset)


@pytest.fixture(scope="session")
def fitted(series):
    return estimation.estimate(series, order=(1, 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def hourly_text(days, values_by_hour, step_minutes=60):
    """Load file text for ``days`` with a per-slot load function."""
    lines = ["timestamp,load_mw"]
    for day in pd.date_range(days[0], days[-1], freq="D"):
        for slot in range(24 * 60 // step_minutes):
            stamp = day + pd.Timedelta(minutes=slot * step_minutes)
            lines.append(f"{stamp:%Y-%m-%dT%H:%M},{values_by_hour(stamp.hour)}")
    return "\n".join(lines) + "\n"
