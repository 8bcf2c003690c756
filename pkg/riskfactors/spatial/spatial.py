import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from riskfactors.errors import DuplicateRecord, EmptyRange, MalformedRow, MixedFactorInput
from riskfactors.ingest.ingest import (
    ENVIRONMENTAL_FACTORS,
    StationDay,
    parse_fips,
    parse_float,
    read_table,
)

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0
EXACT_MATCH_KM = 0.001
DEFAULT_K = 5
DEFAULT_YEARS = (2001, 2014)
WEIGHT_TOLERANCE = 1e-12

COUNTY_COLUMNS = ("county_fips", "centroid_lat", "centroid_lon")


class CountyRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    county_fips: str = Field(pattern=r"^[0-9]{5}$")
    centroid_lat: float = Field(ge=-90, le=90)
    centroid_lon: float = Field(ge=-180, le=180)


class MonthlyStats(BaseModel):
    """Climatological statistics of one factor for one calendar month."""

    model_config = ConfigDict(frozen=True)

    factor: str
    month: int = Field(ge=1, le=12)
    f_max: Optional[float] = None
    f_mean: Optional[float] = None
    f_min: Optional[float] = None
    years_covered: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_order(self) -> "MonthlyStats":
        present = [v for v in (self.f_min, self.f_mean, self.f_max) if v is not None]
        if present and len(present) != 3:
            raise ValueError("statistics must be all present or all missing")
        if present and not self.f_min <= self.f_mean <= self.f_max:  # type: ignore[operator]
            raise ValueError("expected f_min <= f_mean <= f_max")
        return self


def parse_counties(path: Union[str, Path]) -> List[CountyRef]:
    frame = read_table(path, COUNTY_COLUMNS)
    counties: List[CountyRef] = []
    seen: set[str] = set()
    for row, record in enumerate(frame.to_dict("records")):
        fips = str(parse_fips(row, "county_fips", record["county_fips"]))
        lat = parse_float(row, "centroid_lat", record["centroid_lat"])
        lon = parse_float(row, "centroid_lon", record["centroid_lon"])
        if lat is None or abs(lat) > 90:
            raise MalformedRow(
                row, "centroid_lat", record["centroid_lat"], "latitude out of range"
            )
        if lon is None or abs(lon) > 180:
            raise MalformedRow(
                row, "centroid_lon", record["centroid_lon"], "longitude out of range"
            )
        if fips in seen:
            raise DuplicateRecord("county", fips)
        seen.add(fips)
        counties.append(CountyRef(county_fips=fips, centroid_lat=lat, centroid_lon=lon))
    log.info(f"Parsed {len(counties)} county centroids from {path}")
    return counties


def haversine_km(
    lat1: Union[float, np.ndarray],
    lon1: Union[float, np.ndarray],
    lat2: Union[float, np.ndarray],
    lon2: Union[float, np.ndarray],
) -> np.ndarray:
    """Great-circle distance in kilometres."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(lon2) - np.radians(lon1)
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return np.asarray(2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0))))


def _nearest_order(distances: np.ndarray, station_ids: Sequence[str]) -> np.ndarray:
    # distance first, station id breaks ties
    return np.lexsort((np.asarray(station_ids, dtype=object).astype(str), distances))


def interpolate_county_day(
    readings: Sequence[StationDay], county: CountyRef, k: int = DEFAULT_K
) -> Optional[float]:
    """
    Inverse-distance weighted value of one (date, factor) at a county centroid.

    Uses the ``k`` nearest stations by great-circle distance with weights
    proportional to 1/distance. A station within one metre of the centroid
    supplies its value unchanged.

    Returns:
        The interpolated value, or None when there are no readings.

    Raises:
        MixedFactorInput: readings span more than one date or factor.
    """
    if not readings:
        return None
    keys = {(r.date, r.factor) for r in readings}
    if len(keys) > 1:
        raise MixedFactorInput(str(sorted(keys)))
    distances = haversine_km(
        np.array([r.latitude for r in readings]),
        np.array([r.longitude for r in readings]),
        county.centroid_lat,
        county.centroid_lon,
    )
    values = np.array([r.value for r in readings], dtype=np.float64)
    order = _nearest_order(distances, [r.station_id for r in readings])[:k]
    distances, values = distances[order], values[order]
    if distances[0] <= EXACT_MATCH_KM:
        return float(values[0])
    inverse = 1.0 / distances
    weights = inverse / inverse.sum()
    assert abs(weights.sum() - 1.0) <= WEIGHT_TOLERANCE
    estimate = float((weights * values).sum())
    return float(np.clip(estimate, values.min(), values.max()))


@dataclass(frozen=True)
class StationGrid:
    """Readings of one factor pivoted to dates x stations."""

    factor: str
    dates: pd.DatetimeIndex
    station_ids: np.ndarray
    latitudes: np.ndarray
    longitudes: np.ndarray
    values: np.ndarray

    @classmethod
    def from_table(cls, table: pd.DataFrame, factor: str) -> "StationGrid":
        rows = table[table["factor"] == factor]
        stations = rows.drop_duplicates("station_id")[["station_id", "latitude", "longitude"]]
        grid = rows.pivot(index="date", columns="station_id", values="value")
        grid = grid.reindex(columns=stations["station_id"].to_numpy()).sort_index()
        return cls(
            factor=factor,
            dates=pd.DatetimeIndex(grid.index),
            station_ids=stations["station_id"].to_numpy(),
            latitudes=stations["latitude"].to_numpy(dtype=np.float64),
            longitudes=stations["longitude"].to_numpy(dtype=np.float64),
            values=grid.to_numpy(dtype=np.float64),
        )

    def interpolate(self, county: CountyRef, k: int = DEFAULT_K) -> pd.Series:
        """
        Daily IDW series at the county centroid.

        Applies the ``interpolate_county_day`` rule to every date at once: on
        each date only the stations that reported compete for the ``k``
        nearest slots.
        """
        if self.values.size == 0:
            return pd.Series(dtype=np.float64, name=self.factor)
        distances = haversine_km(
            self.latitudes, self.longitudes, county.centroid_lat, county.centroid_lon
        )
        order = _nearest_order(distances, self.station_ids.tolist())
        distances = distances[order]
        values = self.values[:, order]

        available = ~np.isnan(values)
        used = available & (np.cumsum(available, axis=1) <= k)
        exact = used & (distances <= EXACT_MATCH_KM)[np.newaxis, :]
        inverse = 1.0 / np.maximum(distances, EXACT_MATCH_KM)
        raw = np.where(used & ~exact, inverse[np.newaxis, :], 0.0)
        totals = raw.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            weights = raw / totals
        estimate = (weights * np.where(used, values, 0.0)).sum(axis=1)

        has_exact = exact.any(axis=1)
        weighted = used.any(axis=1) & ~has_exact
        if weighted.any():
            sums = weights[weighted].sum(axis=1)
            assert np.all(np.abs(sums - 1.0) <= WEIGHT_TOLERANCE)
        low = np.where(used, values, np.inf).min(axis=1)
        high = np.where(used, values, -np.inf).max(axis=1)
        estimate = np.where(weighted, np.clip(estimate, low, high), np.nan)
        first_exact = np.argmax(exact, axis=1)
        estimate = np.where(has_exact, values[np.arange(len(values)), first_exact], estimate)
        return pd.Series(estimate, index=self.dates, name=self.factor).dropna()


def interpolate_county_series(
    table: pd.DataFrame, county: CountyRef, factor: str, k: int = DEFAULT_K
) -> pd.Series:
    """Daily interpolated series of one factor at one county centroid."""
    return StationGrid.from_table(table, factor).interpolate(county, k)


def county_monthly_stats(
    daily: Union[pd.Series, Mapping[object, float]],
    factor: str,
    years: Tuple[int, int] = DEFAULT_YEARS,
) -> List[MonthlyStats]:
    """
    Per-month climatology of one county's daily series.

    For each month the daily maximum, mean and minimum are taken per year,
    then averaged across the years holding at least one day of data.

    Returns:
        Twelve entries, January first; months without data carry None.

    Raises:
        EmptyRange: ``years`` start after they end.
    """
    start, end = years
    if start > end:
        raise EmptyRange(start, end)
    series = daily if isinstance(daily, pd.Series) else pd.Series(dict(daily), dtype=np.float64)
    series = series.dropna()
    index = pd.DatetimeIndex(pd.to_datetime(series.index))
    in_range = (index.year >= start) & (index.year <= end)
    if not in_range.all():
        log.debug(f"{factor}: dropping {int((~in_range).sum())} days outside {start}-{end}")
    frame = pd.DataFrame(
        {
            "year": index.year[in_range],
            "month": index.month[in_range],
            "value": series.to_numpy(dtype=np.float64)[in_range],
        }
    )
    per_year = frame.groupby(["month", "year"])["value"].agg(["max", "mean", "min"])
    per_year["mean"] = per_year["mean"].clip(lower=per_year["min"], upper=per_year["max"])
    per_month = per_year.groupby(level="month").mean()

    stats: List[MonthlyStats] = []
    for month in range(1, 13):
        if month not in per_month.index:
            stats.append(MonthlyStats(factor=factor, month=month))
            continue
        f_max = float(per_month.at[month, "max"])
        f_min = float(per_month.at[month, "min"])
        f_mean = float(np.clip(per_month.at[month, "mean"], f_min, f_max))
        covered = tuple(int(y) for y in per_year.loc[month].index)
        stats.append(
            MonthlyStats(
                factor=factor,
                month=month,
                f_max=f_max,
                f_mean=f_mean,
                f_min=f_min,
                years_covered=covered,
            )
        )
    return stats


def county_environment(
    table: pd.DataFrame,
    counties: Sequence[CountyRef],
    years: Tuple[int, int] = DEFAULT_YEARS,
    k: int = DEFAULT_K,
    factors: Sequence[str] = ENVIRONMENTAL_FACTORS,
) -> Dict[str, Dict[str, List[MonthlyStats]]]:
    """Monthly statistics per county and factor, keyed ``[county_fips][factor]``."""
    if years[0] > years[1]:
        raise EmptyRange(*years)
    grids = [StationGrid.from_table(table, factor) for factor in factors]
    environment: Dict[str, Dict[str, List[MonthlyStats]]] = {}
    for county in counties:
        environment[county.county_fips] = {
            grid.factor: county_monthly_stats(grid.interpolate(county, k), grid.factor, years)
            for grid in grids
        }
    log.info(
        f"Interpolated {len(factors)} factors for {len(counties)} counties "
        f"({years[0]}-{years[1]}, k={k})"
    )
    return environment
