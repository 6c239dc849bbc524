from datetime import datetime, timezone

import numpy as np
import pytest

from debris_ews import RainSeries

T0 = datetime(2019, 5, 1, tzinfo=timezone.utc)


def series(values, station_id="S000", start=T0):
    return RainSeries(station_id, start, np.asarray(values, dtype=float))


@pytest.fixture
def mk_series():
    return series


def random_rain(rng, n, wet_prob=0.3, scale=6.0):
    """Spiky rainfall with plenty of dry spells and threshold crossings."""
    wet = rng.random(n) < wet_prob
    return np.where(wet, rng.gamma(1.5, scale, size=n), 0.0)
