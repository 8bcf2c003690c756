import datetime as dt
import logging
import re
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Literal,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from riskfactors.errors import (
    CoordinateOutOfRange,
    DuplicatePersonId,
    DuplicateRecord,
    FlagOutOfRange,
    InsufficientNegatives,
    MalformedRow,
    MissingHeader,
    MissingInputFile,
    NonPositiveDuration,
    NoPositives,
    UnknownCategory,
    UnknownFactor,
    UnreadableTable,
)
from riskfactors.stage_lib import atomic_write

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

PROFILE_COLUMNS = (
    "person_id",
    "county_fips",
    "age_years",
    "gender",
    "race",
    "asthma",
    "smoker",
    "lives_with_smoker",
    "employment_status",
    "hours_work_per_week",
    "education_level",
    "income_bracket",
    "gas_stove",
    "heating_fuel",
    "cooking_fuel",
)
DIARY_COLUMNS = (
    "person_id",
    "date",
    "start_min",
    "duration_min",
    "activity_code",
    "location_code",
    "smoking_flag",
    "heavy_breathing_flag",
)
EMISSION_COLUMNS = ("county_fips", "category", "tonnes_per_year")
STATION_COLUMNS = (
    "station_id",
    "latitude",
    "longitude",
    "county_fips",
    "date",
    "factor",
    "value",
)

# Emission factor table: (group, factor). Plain names that repeat across
# groups are qualified with their group.
EMISSION_FACTOR_TABLE: Tuple[Tuple[str, str], ...] = (
    ("Mobile", "Aircraft"),
    ("Mobile", "Marine Vessels"),
    ("Mobile", "Locomotives"),
    ("Mobile", "Equipment"),
    ("Mobile", "Heavy Duty Vehicles"),
    ("Mobile", "Light Duty Vehicles"),
    ("Industrial", "Agricultural"),
    ("Industrial", "Mining"),
    ("Industrial", "Oil & Gas Production"),
    ("Industrial", "Storage & Transportation"),
    ("Industrial", "Industrial Other"),
    ("Dust", "Construction"),
    ("Dust", "Paved Road Dust"),
    ("Dust", "Unpaved Road Dust"),
    ("Fires", "Agricultural Field Burning"),
    ("Fires", "Prescribed Fires"),
    ("Fires", "Wildfires"),
    ("Fuel", "Biomass"),
    ("Fuel", "Coal"),
    ("Fuel", "Natural Gas"),
    ("Fuel", "Oil"),
    ("Fuel", "Residential Wood"),
    ("Fuel", "Fuel Other"),
    ("Miscellaneous", "Waste Disposal"),
    ("Miscellaneous", "Agriculture"),
    ("Miscellaneous", "Commercial Cooking"),
)
EMISSION_CATEGORIES: Tuple[str, ...] = tuple(name for _, name in EMISSION_FACTOR_TABLE)
_CATEGORY_LOOKUP = {name.casefold(): name for name in EMISSION_CATEGORIES}

ENVIRONMENTAL_FACTORS: Tuple[str, ...] = (
    "pm25",
    "so2",
    "no2",
    "o3",
    "co",
    "temperature",
    "pressure",
    "wind_speed",
)

_FIPS_PATTERN = re.compile(r"^[0-9]{5}$")
_DATE_PATTERN = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class Gender(str, Enum):
    male = "male"
    female = "female"
    unknown = "unknown"


class TriState(str, Enum):
    yes = "yes"
    no = "no"
    unknown = "unknown"


class PersonProfile(BaseModel):
    """One subject's demographic and household attributes plus asthma status."""

    model_config = ConfigDict(frozen=True)

    person_id: str = Field(min_length=1)
    county_fips: Optional[str] = Field(default=None, pattern=r"^[0-9]{5}$")
    age_years: int = Field(ge=0, le=130)
    gender: Gender = Gender.unknown
    race: Optional[str] = None
    asthma: TriState = TriState.unknown
    smoker: TriState = TriState.unknown
    lives_with_smoker: TriState = TriState.unknown
    employment_status: Optional[str] = None
    hours_work_per_week: Optional[float] = Field(default=None, ge=0)
    education_level: Optional[int] = None
    income_bracket: Optional[int] = None
    gas_stove: TriState = TriState.unknown
    heating_fuel: Optional[str] = None
    cooking_fuel: Optional[str] = None


class DiaryEntry(BaseModel):
    """One timed activity record. Entries crossing midnight belong to their start date."""

    model_config = ConfigDict(frozen=True)

    person_id: str = Field(min_length=1)
    date: dt.date
    start_min: int = Field(ge=0, le=1439)
    duration_min: int = Field(ge=1)
    activity_code: str
    location_code: str
    smoking_flag: Literal[0, 1] = 0
    heavy_breathing_flag: Literal[0, 1] = 0

    @model_validator(mode="after")
    def _check_span(self) -> "DiaryEntry":
        if self.start_min + self.duration_min > 1440 + 1439:
            raise ValueError("entry extends past the following day")
        return self


class EmissionRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    county_fips: str = Field(pattern=r"^[0-9]{5}$")
    category: str
    tonnes_per_year: float = Field(ge=0)

    @model_validator(mode="after")
    def _check_category(self) -> "EmissionRecord":
        if self.category not in EMISSION_CATEGORIES:
            raise ValueError(f"unknown emission category {self.category}")
        return self


class StationDay(BaseModel):
    """One daily reading of one factor at one monitoring station."""

    model_config = ConfigDict(frozen=True)

    station_id: str = Field(min_length=1)
    latitude: float = Field(ge=-90, le=90)
    longitude: float = Field(ge=-180, le=180)
    county_fips: Optional[str] = Field(default=None, pattern=r"^[0-9]{5}$")
    date: dt.date
    factor: str
    value: float


class CohortMember(BaseModel):
    model_config = ConfigDict(frozen=True)

    profile: PersonProfile
    label: Literal[1, -1]


class Cohort(BaseModel):
    """Balanced analysis cohort: every member has known asthma status and county."""

    model_config = ConfigDict(frozen=True)

    members: Tuple[CohortMember, ...]
    seed: int

    @model_validator(mode="after")
    def _check_balance(self) -> "Cohort":
        positives = sum(1 for m in self.members if m.label == 1)
        if positives * 2 != len(self.members):
            raise ValueError("cohort labels are not balanced")
        return self

    @property
    def person_ids(self) -> Tuple[str, ...]:
        return tuple(m.profile.person_id for m in self.members)

    @property
    def labels(self) -> np.ndarray:
        return np.array([m.label for m in self.members], dtype=np.int64)


def read_table(path: PathLike, schema: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise MissingInputFile(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise MissingHeader(path, [])
    except UnicodeDecodeError as e:
        raise UnreadableTable(path, f"not UTF-8 at byte {e.start}") from e
    except pd.errors.ParserError as e:
        raise UnreadableTable(path, str(e).strip()) from e
    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in schema if column not in frame.columns]
    if missing:
        raise MissingHeader(path, missing)
    extra = [column for column in frame.columns if column not in schema]
    if extra:
        log.warning(f"{path}: ignoring columns not in schema: {extra}")
    frame = frame[list(schema)].copy()
    for column in schema:
        frame[column] = frame[column].str.strip()
    log.debug(f"Read {len(frame)} rows from {path}")
    return frame


def _text(raw: str) -> Optional[str]:
    return raw if raw != "" else None


def _int(row: int, column: str, raw: str, nullable: bool = False) -> Optional[int]:
    if raw == "":
        if nullable:
            return None
        raise MalformedRow(row, column, raw, reason="value required")
    try:
        return int(raw)
    except ValueError:
        raise MalformedRow(row, column, raw, reason="expected an integer")


def parse_float(row: int, column: str, raw: str, nullable: bool = False) -> Optional[float]:
    if raw == "":
        if nullable:
            return None
        raise MalformedRow(row, column, raw, reason="value required")
    try:
        value = float(raw)
    except ValueError:
        raise MalformedRow(row, column, raw, reason="expected a number")
    if not np.isfinite(value):
        raise MalformedRow(row, column, raw, reason="expected a finite number")
    return value


_TRUE_TOKENS = {"1", "yes", "y", "true", "t"}
_FALSE_TOKENS = {"0", "no", "n", "false", "f"}


def _tristate(row: int, column: str, raw: str) -> TriState:
    token = raw.casefold()
    if token == "" or token == "unknown":
        return TriState.unknown
    if token in _TRUE_TOKENS:
        return TriState.yes
    if token in _FALSE_TOKENS:
        return TriState.no
    raise MalformedRow(row, column, raw, reason="expected 1, 0 or empty")


def _gender(row: int, raw: str) -> Gender:
    token = raw.casefold()
    if token in ("", "unknown", "u"):
        return Gender.unknown
    if token in ("f", "female"):
        return Gender.female
    if token in ("m", "male"):
        return Gender.male
    raise MalformedRow(row, "gender", raw, reason="expected M, F or empty")


def parse_fips(row: int, column: str, raw: str, nullable: bool = False) -> Optional[str]:
    if raw == "" and nullable:
        return None
    if not _FIPS_PATTERN.match(raw):
        raise MalformedRow(row, column, raw, reason="expected a 5-digit county code")
    return raw


def _date(row: int, column: str, raw: str) -> dt.date:
    if not _DATE_PATTERN.match(raw):
        raise MalformedRow(row, column, raw, reason="expected YYYY-MM-DD")
    try:
        return dt.date.fromisoformat(raw)
    except ValueError:
        raise MalformedRow(row, column, raw, reason="not a calendar date")


def _flag(row: int, column: str, raw: str) -> int:
    value = _int(row, column, raw)
    if value not in (0, 1):
        raise FlagOutOfRange(row, column, raw)
    return int(value)


def _build(row: int, model: Callable[..., Any], **fields: Any) -> Any:
    try:
        return model(**fields)
    except ValidationError as e:
        error = e.errors()[0]
        column = str(error["loc"][0]) if error["loc"] else "row"
        raise MalformedRow(row, column, str(fields.get(column)), reason=error["msg"])


def parse_profiles(path: PathLike) -> List[PersonProfile]:
    """
    Parse ``profiles.csv`` into profile records.

    Empty cells become explicit missing values (``None`` or ``unknown``),
    never zero.

    Raises:
        MissingHeader: the header lacks schema columns.
        MalformedRow: a cell cannot be converted (row index and column given).
        DuplicatePersonId: two rows share a person_id.
    """
    frame = read_table(path, PROFILE_COLUMNS)
    profiles: List[PersonProfile] = []
    seen: set[str] = set()
    for row, record in enumerate(frame.to_dict("records")):
        person_id = record["person_id"]
        if person_id == "":
            raise MalformedRow(row, "person_id", person_id, reason="value required")
        if person_id in seen:
            raise DuplicatePersonId(person_id)
        seen.add(person_id)
        age = _int(row, "age_years", record["age_years"])
        if age is None or not 0 <= age <= 130:
            raise MalformedRow(
                row, "age_years", record["age_years"], reason="age must be 0-130"
            )
        hours = parse_float(
            row, "hours_work_per_week", record["hours_work_per_week"], nullable=True
        )
        if hours is not None and hours < 0:
            raise MalformedRow(
                row,
                "hours_work_per_week",
                record["hours_work_per_week"],
                reason="negative hours",
            )
        profiles.append(
            _build(
                row,
                PersonProfile,
                person_id=person_id,
                county_fips=parse_fips(
                    row, "county_fips", record["county_fips"], nullable=True
                ),
                age_years=age,
                gender=_gender(row, record["gender"]),
                race=_text(record["race"]),
                asthma=_tristate(row, "asthma", record["asthma"]),
                smoker=_tristate(row, "smoker", record["smoker"]),
                lives_with_smoker=_tristate(
                    row, "lives_with_smoker", record["lives_with_smoker"]
                ),
                employment_status=_text(record["employment_status"]),
                hours_work_per_week=hours,
                education_level=_int(
                    row, "education_level", record["education_level"], nullable=True
                ),
                income_bracket=_int(
                    row, "income_bracket", record["income_bracket"], nullable=True
                ),
                gas_stove=_tristate(row, "gas_stove", record["gas_stove"]),
                heating_fuel=_text(record["heating_fuel"]),
                cooking_fuel=_text(record["cooking_fuel"]),
            )
        )
    log.info(f"Parsed {len(profiles)} profiles from {path}")
    return profiles


def parse_diaries(path: PathLike) -> List[DiaryEntry]:
    """
    Parse ``diaries.csv``.

    Raises:
        FlagOutOfRange: a smoking or heavy breathing flag is not 0/1.
        NonPositiveDuration: duration_min is below one minute.
        MalformedRow: any other unconvertible cell.
    """
    frame = read_table(path, DIARY_COLUMNS)
    entries: List[DiaryEntry] = []
    for row, record in enumerate(frame.to_dict("records")):
        if record["person_id"] == "":
            raise MalformedRow(row, "person_id", "", reason="value required")
        start = _int(row, "start_min", record["start_min"])
        if start is None or not 0 <= start <= 1439:
            raise MalformedRow(
                row, "start_min", record["start_min"], reason="start must be 0-1439"
            )
        duration = _int(row, "duration_min", record["duration_min"])
        if duration is None or duration < 1:
            raise NonPositiveDuration(row, record["duration_min"])
        if start + duration > 1440 + 1439:
            raise MalformedRow(
                row,
                "duration_min",
                record["duration_min"],
                reason="entry extends past the following day",
            )
        entries.append(
            _build(
                row,
                DiaryEntry,
                person_id=record["person_id"],
                date=_date(row, "date", record["date"]),
                start_min=start,
                duration_min=duration,
                activity_code=record["activity_code"],
                location_code=record["location_code"],
                smoking_flag=_flag(row, "smoking_flag", record["smoking_flag"]),
                heavy_breathing_flag=_flag(
                    row, "heavy_breathing_flag", record["heavy_breathing_flag"]
                ),
            )
        )
    log.info(f"Parsed {len(entries)} diary entries from {path}")
    return entries


def canonical_category(raw: str) -> Optional[str]:
    """Return the canonical emission factor name for a case-insensitive match."""
    return _CATEGORY_LOOKUP.get(" ".join(raw.split()).casefold())


def parse_emissions(path: PathLike) -> List[EmissionRecord]:
    frame = read_table(path, EMISSION_COLUMNS)
    records: List[EmissionRecord] = []
    seen: set[Tuple[str, str]] = set()
    for row, record in enumerate(frame.to_dict("records")):
        county = parse_fips(row, "county_fips", record["county_fips"])
        category = canonical_category(record["category"])
        if category is None:
            raise UnknownCategory(row, record["category"])
        tonnes = parse_float(row, "tonnes_per_year", record["tonnes_per_year"])
        if tonnes is None or tonnes < 0:
            raise MalformedRow(
                row,
                "tonnes_per_year",
                record["tonnes_per_year"],
                reason="must be non-negative",
            )
        key = (str(county), category)
        if key in seen:
            raise DuplicateRecord("emission record", key)
        seen.add(key)
        records.append(
            _build(
                row,
                EmissionRecord,
                county_fips=county,
                category=category,
                tonnes_per_year=tonnes,
            )
        )
    log.info(f"Parsed {len(records)} emission records from {path}")
    return records


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    coerced = pd.to_numeric(raw, errors="coerce")
    finite = np.isfinite(coerced.to_numpy(dtype=float, na_value=np.nan))
    bad = coerced.isna().to_numpy() | ~finite
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise MalformedRow(row, column, raw.iloc[row], reason="expected a finite number")
    # float() per cell keeps parsing exact (round-trip safe).
    return raw.astype(object).map(float).to_numpy(dtype=np.float64)


def parse_station_days(path: PathLike) -> pd.DataFrame:
    """
    Parse ``stations.csv`` into a validated station-day table.

    The table is the parsed form of the station readings: the interpolation
    code works on it column-wise, and ``station_days`` yields the same rows as
    ``StationDay`` records. It holds one row per (station_id, date, factor)
    in file order with columns
    ``station_id, latitude, longitude, county_fips, date, factor, value``;
    ``date`` is a datetime64 column and ``county_fips`` is None when empty.

    Raises:
        UnknownFactor, CoordinateOutOfRange, MalformedRow, DuplicateRecord
    """
    frame = read_table(path, STATION_COLUMNS)
    empty_ids = (frame["station_id"] == "").to_numpy()
    if empty_ids.any():
        raise MalformedRow(
            int(np.flatnonzero(empty_ids)[0]), "station_id", "", reason="value required"
        )
    latitude = _numeric_column(frame, "latitude")
    longitude = _numeric_column(frame, "longitude")
    bounds = (("latitude", latitude, 90.0), ("longitude", longitude, 180.0))
    for column, values, bound in bounds:
        outside = np.abs(values) > bound
        if outside.any():
            row = int(np.flatnonzero(outside)[0])
            raise CoordinateOutOfRange(row, column, frame[column].iloc[row])
    factor = frame["factor"].str.lower()
    unknown = ~factor.isin(ENVIRONMENTAL_FACTORS).to_numpy()
    if unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise UnknownFactor(row, frame["factor"].iloc[row])
    county = frame["county_fips"]
    bad_county = ((county != "") & ~county.str.fullmatch(r"[0-9]{5}")).to_numpy()
    if bad_county.any():
        row = int(np.flatnonzero(bad_county)[0])
        raise MalformedRow(
            row,
            "county_fips",
            county.iloc[row],
            reason="expected a 5-digit county code",
        )
    dates = pd.to_datetime(frame["date"], format="%Y-%m-%d", errors="coerce")
    bad_date = (dates.isna() | ~frame["date"].str.fullmatch(r"\d{4}-\d{2}-\d{2}")).to_numpy()
    if bad_date.any():
        row = int(np.flatnonzero(bad_date)[0])
        raise MalformedRow(row, "date", frame["date"].iloc[row], reason="expected YYYY-MM-DD")
    value = _numeric_column(frame, "value")
    table = pd.DataFrame(
        {
            "station_id": frame["station_id"].to_numpy(),
            "latitude": latitude,
            "longitude": longitude,
            "county_fips": np.where(county.to_numpy() == "", None, county.to_numpy()),
            "date": dates.to_numpy(),
            "factor": factor.to_numpy(),
            "value": value,
        }
    )
    duplicated = table.duplicated(["station_id", "date", "factor"]).to_numpy()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0])
        key = (
            table["station_id"].iloc[row],
            frame["date"].iloc[row],
            table["factor"].iloc[row],
        )
        raise DuplicateRecord("station reading", key)
    log.info(f"Parsed {len(table)} station-day readings from {path}")
    return table


def station_days(table: pd.DataFrame) -> Iterator[StationDay]:
    """Iterate a station-day table as validated records."""
    for record in table.itertuples(index=False):
        yield StationDay(
            station_id=record.station_id,
            latitude=record.latitude,
            longitude=record.longitude,
            county_fips=record.county_fips,
            date=pd.Timestamp(record.date).date(),
            factor=record.factor,
            value=record.value,
        )


def group_by_person_day(
    entries: Sequence[DiaryEntry],
) -> Dict[str, Dict[dt.date, Tuple[DiaryEntry, ...]]]:
    """Group diary entries into the per-person, per-day sets."""
    grouped: Dict[str, Dict[dt.date, List[DiaryEntry]]] = defaultdict(lambda: defaultdict(list))
    for entry in entries:
        grouped[entry.person_id][entry.date].append(entry)
    return {
        person_id: {day: tuple(items) for day, items in sorted(days.items())}
        for person_id, days in grouped.items()
    }


def balance_cohort(profiles: Sequence[PersonProfile], seed: int) -> Cohort:
    """
    Build the balanced analysis cohort.

    Every eligible asthmatic (known county, asthma=yes) is kept with label +1
    and an equal number of eligible non-asthmatics is drawn uniformly without
    replacement with label -1. Members keep their input order.

    Raises:
        NoPositives: no eligible profile reports asthma.
        InsufficientNegatives: fewer eligible negatives than positives.
    """
    eligible = [
        p for p in profiles if p.asthma is not TriState.unknown and p.county_fips is not None
    ]
    positives = [i for i, p in enumerate(eligible) if p.asthma is TriState.yes]
    negatives = [i for i, p in enumerate(eligible) if p.asthma is TriState.no]
    if not positives:
        raise NoPositives("no eligible profile reports asthma")
    if len(negatives) < len(positives):
        raise InsufficientNegatives(len(positives), len(negatives))
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(negatives), size=len(positives), replace=False)
    chosen = set(positives) | {negatives[int(i)] for i in picked}
    members = tuple(
        CohortMember(
            profile=eligible[i],
            label=1 if eligible[i].asthma is TriState.yes else -1,
        )
        for i in sorted(chosen)
    )
    log.info(
        f"Cohort: {len(positives)} positives, {len(positives)} sampled from "
        f"{len(negatives)} negatives ({len(profiles) - len(eligible)} ineligible)"
    )
    return Cohort(members=members, seed=seed)


def _format_number(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _format_int(value: Optional[int]) -> str:
    return "" if value is None else str(value)


def _format_tristate(value: TriState) -> str:
    return {TriState.yes: "1", TriState.no: "0", TriState.unknown: ""}[value]


def _write_rows(path: PathLike, columns: Sequence[str], rows: List[Dict[str, Any]]) -> None:
    frame = pd.DataFrame(rows, columns=list(columns), dtype=object)
    with atomic_write(Path(path)) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")


def write_profiles(profiles: Sequence[PersonProfile], path: PathLike) -> None:
    rows = [
        {
            "person_id": p.person_id,
            "county_fips": p.county_fips or "",
            "age_years": str(p.age_years),
            "gender": "" if p.gender is Gender.unknown else p.gender.value,
            "race": p.race or "",
            "asthma": _format_tristate(p.asthma),
            "smoker": _format_tristate(p.smoker),
            "lives_with_smoker": _format_tristate(p.lives_with_smoker),
            "employment_status": p.employment_status or "",
            "hours_work_per_week": _format_number(p.hours_work_per_week),
            "education_level": _format_int(p.education_level),
            "income_bracket": _format_int(p.income_bracket),
            "gas_stove": _format_tristate(p.gas_stove),
            "heating_fuel": p.heating_fuel or "",
            "cooking_fuel": p.cooking_fuel or "",
        }
        for p in profiles
    ]
    _write_rows(path, PROFILE_COLUMNS, rows)


def write_diaries(entries: Sequence[DiaryEntry], path: PathLike) -> None:
    rows = [
        {
            "person_id": e.person_id,
            "date": e.date.isoformat(),
            "start_min": str(e.start_min),
            "duration_min": str(e.duration_min),
            "activity_code": e.activity_code,
            "location_code": e.location_code,
            "smoking_flag": str(e.smoking_flag),
            "heavy_breathing_flag": str(e.heavy_breathing_flag),
        }
        for e in entries
    ]
    _write_rows(path, DIARY_COLUMNS, rows)


def write_emissions(records: Sequence[EmissionRecord], path: PathLike) -> None:
    rows = [
        {
            "county_fips": r.county_fips,
            "category": r.category,
            "tonnes_per_year": _format_number(r.tonnes_per_year),
        }
        for r in records
    ]
    _write_rows(path, EMISSION_COLUMNS, rows)


def write_station_days(table: pd.DataFrame, path: PathLike) -> None:
    out = pd.DataFrame(
        {
            "station_id": table["station_id"].astype(str),
            "latitude": [repr(float(v)) for v in table["latitude"]],
            "longitude": [repr(float(v)) for v in table["longitude"]],
            "county_fips": table["county_fips"].fillna(""),
            "date": pd.to_datetime(table["date"]).dt.strftime("%Y-%m-%d"),
            "factor": table["factor"].astype(str),
            "value": [repr(float(v)) for v in table["value"]],
        },
        columns=list(STATION_COLUMNS),
    )
    with atomic_write(Path(path)) as handle:
        out.to_csv(handle, index=False, lineterminator="\n")
