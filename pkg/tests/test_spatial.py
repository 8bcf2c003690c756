import datetime as dt

import numpy as np
import pandas as pd
import pytest

from riskfactors.errors import EmptyRange, MixedFactorInput
from riskfactors.ingest.ingest import StationDay
from riskfactors.spatial.spatial import (
    CountyRef,
    county_environment,
    county_monthly_stats,
    haversine_km,
    interpolate_county_day,
    interpolate_county_series,
)

COUNTY = CountyRef(county_fips="06001", centroid_lat=0.0, centroid_lon=0.0)
KM_PER_DEGREE = 6371.0 * np.pi / 180.0
DAY = dt.date(2003, 6, 1)


def _reading(station_id, lat, lon, value, date=DAY, factor="pm25"):
    return StationDay(
        station_id=station_id,
        latitude=lat,
        longitude=lon,
        date=date,
        factor=factor,
        value=value,
    )


def _table(readings):
    return pd.DataFrame(
        {
            "station_id": [r.station_id for r in readings],
            "latitude": [r.latitude for r in readings],
            "longitude": [r.longitude for r in readings],
            "county_fips": [r.county_fips for r in readings],
            "date": pd.to_datetime([r.date for r in readings]),
            "factor": [r.factor for r in readings],
            "value": [r.value for r in readings],
        }
    )


def test_haversine_one_degree_on_the_equator():
    assert float(haversine_km(0.0, 0.0, 0.0, 1.0)) == pytest.approx(KM_PER_DEGREE)


def test_single_station_returns_its_value():
    assert interpolate_county_day([_reading("a", 1.0, 2.0, 42.0)], COUNTY) == 42.0


def test_equidistant_stations_average():
    readings = [_reading("a", 0.0, 1.0, 10.0), _reading("b", 0.0, -1.0, 20.0)]
    assert interpolate_county_day(readings, COUNTY) == pytest.approx(15.0)


def test_inverse_distance_weights():
    # 1 km and 3 km east of the centroid
    readings = [
        _reading("a", 0.0, 1.0 / KM_PER_DEGREE, 10.0),
        _reading("b", 0.0, 3.0 / KM_PER_DEGREE, 30.0),
    ]
    assert interpolate_county_day(readings, COUNTY) == pytest.approx(15.0, rel=1e-9)


def test_station_on_the_centroid_wins():
    readings = [_reading("a", 0.0, 0.0, 3.0), _reading("b", 0.0, 0.1, 100.0)]
    assert interpolate_county_day(readings, COUNTY) == 3.0


def test_only_k_nearest_stations_count():
    readings = [_reading("near", 0.0, 0.1, 10.0)]
    readings += [_reading(f"far{i}", 0.0, 5.0 + i, 1000.0) for i in range(3)]
    assert interpolate_county_day(readings, COUNTY, k=1) == 10.0


def test_no_readings_is_missing():
    assert interpolate_county_day([], COUNTY) is None


def test_mixed_inputs_rejected():
    with pytest.raises(MixedFactorInput):
        interpolate_county_day(
            [_reading("a", 0.0, 1.0, 1.0), _reading("b", 0.0, 2.0, 1.0, factor="o3")],
            COUNTY,
        )
    with pytest.raises(MixedFactorInput):
        interpolate_county_day(
            [
                _reading("a", 0.0, 1.0, 1.0),
                _reading("b", 0.0, 2.0, 1.0, date=dt.date(2003, 6, 2)),
            ],
            COUNTY,
        )


def test_interpolation_is_convex_and_linear():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        lats = rng.uniform(-2, 2, n)
        lons = rng.uniform(-2, 2, n)
        values = rng.uniform(-50, 50, n)
        readings = [
            _reading(f"s{i}", lats[i], lons[i], values[i]) for i in range(n)
        ]
        estimate = interpolate_county_day(readings, COUNTY)
        assert values.min() - 1e-9 <= estimate <= values.max() + 1e-9

        scaled = [
            _reading(f"s{i}", lats[i], lons[i], 2.0 * values[i] + 5.0) for i in range(n)
        ]
        assert interpolate_county_day(scaled, COUNTY) == pytest.approx(
            2.0 * estimate + 5.0, abs=1e-9
        )


def test_series_matches_day_by_day_rule():
    rng = np.random.default_rng(5)
    stations = [(f"s{i}", rng.uniform(-1, 1), rng.uniform(-1, 1)) for i in range(8)]
    readings = []
    for offset in range(20):
        date = DAY + dt.timedelta(days=offset)
        for station_id, lat, lon in stations:
            if rng.random() < 0.6:
                readings.append(_reading(station_id, lat, lon, rng.uniform(0, 40), date))
    series = interpolate_county_series(_table(readings), COUNTY, "pm25", k=3)

    by_day = {}
    for reading in readings:
        by_day.setdefault(reading.date, []).append(reading)
    assert len(series) == len(by_day)
    for date, day_readings in by_day.items():
        expected = interpolate_county_day(day_readings, COUNTY, k=3)
        assert series[pd.Timestamp(date)] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_monthly_stats_average_over_years():
    daily = {
        dt.date(2001, 6, 1): 10.0,
        dt.date(2001, 6, 2): 20.0,
        dt.date(2001, 6, 3): 30.0,
        dt.date(2002, 6, 1): 20.0,
        dt.date(2002, 6, 2): 40.0,
    }
    june = county_monthly_stats(daily, "pm25", years=(2001, 2002))[5]
    assert june.month == 6
    assert june.f_max == pytest.approx(35.0)
    assert june.f_mean == pytest.approx(25.0)
    assert june.f_min == pytest.approx(15.0)
    assert june.years_covered == (2001, 2002)


def test_monthly_stats_constant_series_and_missing_month():
    days = pd.date_range("2001-06-01", "2003-06-30", freq="D")
    series = pd.Series(7.0, index=days[days.month == 6])
    stats = county_monthly_stats(series, "o3", years=(2001, 2003))
    assert len(stats) == 12
    june = stats[5]
    assert june.f_max == june.f_mean == june.f_min == 7.0
    february = stats[1]
    assert february.f_max is None and february.f_mean is None and february.f_min is None


def test_monthly_stats_ignores_days_outside_years():
    daily = {dt.date(2000, 1, 5): 100.0, dt.date(2001, 1, 5): 4.0}
    january = county_monthly_stats(daily, "co", years=(2001, 2001))[0]
    assert january.f_max == 4.0
    assert january.years_covered == (2001,)


def test_monthly_stats_reject_inverted_range():
    with pytest.raises(EmptyRange):
        county_monthly_stats({}, "co", years=(2005, 2001))


def test_county_environment_covers_every_factor():
    readings = [_reading("a", 0.5, 0.5, 8.0), _reading("a", 0.5, 0.5, 0.03, factor="o3")]
    environment = county_environment(
        _table(readings), [COUNTY], years=(2003, 2003), factors=("pm25", "o3", "co")
    )
    stats = environment["06001"]
    assert set(stats) == {"pm25", "o3", "co"}
    assert stats["pm25"][5].f_mean == 8.0
    assert stats["o3"][5].f_max == 0.03
    assert all(month.f_mean is None for month in stats["co"])
