"""Shared fixtures and hypothesis strategies.

Exactness note: several contracts promise bit-exact float behavior (charge
round trips, shift-invariant rewards). Those hold on any binary-friendly
grid but not for arbitrary decimals, so the strategies below generate
multiples of 1/64. Everything representable on that grid survives the
clamped +/- arithmetic with zero rounding, which lets the exact assertions
stay exact.
"""

from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import strategies as st

from rtp_arb import BatteryConfig, PriceSeries

START = datetime(2018, 1, 1, tzinfo=timezone.utc)

GRID = 64  # dyadic denominator for exact-arithmetic strategies


def make_series(prices, start=START) -> PriceSeries:
    return PriceSeries.from_prices(start, prices)


@pytest.fixture
def powerwall() -> BatteryConfig:
    return BatteryConfig()  # 13.5 kWh at 5 kW, 48-hour window


def dyadic(lo: float, hi: float):
    """Multiples of 1/GRID within [lo, hi]."""
    return st.integers(min_value=round(lo * GRID), max_value=round(hi * GRID)).map(
        lambda k: k / GRID
    )


def dyadic_prices(min_len: int = 2, max_len: int = 60):
    return st.lists(dyadic(-8.0, 16.0), min_size=min_len, max_size=max_len)


def dyadic_configs(window: int = 4):
    return st.tuples(dyadic(0.5, 20.0), dyadic(0.5, 20.0)).map(
        lambda wp: BatteryConfig(capacity_kwh=wp[0], rate_kw=wp[1], window_hours=window)
    )


def continuous_configs(window: int = 4):
    finite = st.floats(min_value=0.5, max_value=20.0, allow_nan=False)
    return st.tuples(finite, finite).map(
        lambda wp: BatteryConfig(capacity_kwh=wp[0], rate_kw=wp[1], window_hours=window)
    )


def continuous_prices(min_len: int = 2, max_len: int = 60):
    return st.lists(
        st.floats(min_value=-10.0, max_value=30.0, allow_nan=False),
        min_size=min_len,
        max_size=max_len,
    )


def action_codes(n: int):
    return st.lists(st.integers(min_value=0, max_value=2), min_size=n, max_size=n)


def rng_seeds():
    return st.integers(min_value=0, max_value=2**32 - 1)


def square_wave_series(days: int = 365, low: float = 2.0, high: float = 6.0) -> PriceSeries:
    """12 cheap hours then 12 dear hours, repeated; the learning surrogate."""
    day = np.concatenate([np.full(12, low), np.full(12, high)])
    return PriceSeries.from_prices(
        datetime(2021, 1, 1, tzinfo=timezone.utc), np.tile(day, days)
    )
