"""
Deterministic synthetic inputs with a planted logistic asthma signal.

The generator writes every input file the pipeline reads, then draws asthma
labels from a logistic model over a chosen set of feature columns. Those
columns are computed from the written files by the same extractors the
pipeline uses, so a correct pipeline can recover them.
"""

import datetime as dt
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import (
    BaseSettings,
    NoDecode,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)
from scipy.special import expit

from riskfactors.errors import ConfigError, MissingInputFile, UnknownPlantedFeature
from riskfactors.features.build import PipelineInputs, compute_person_vectors
from riskfactors.features.features import (
    ACTIVITY_COLUMNS,
    COOKING_VOCABULARY,
    EMISSION_COLUMNS,
    HEATING_VOCABULARY,
    POLLUTION_COLUMNS,
    RACE_VOCABULARY,
    CategoryMapping,
    profile_features,
)
from riskfactors.ingest.ingest import (
    EMISSION_CATEGORIES,
    ENVIRONMENTAL_FACTORS,
    DiaryEntry,
    EmissionRecord,
    Gender,
    PersonProfile,
    TriState,
    parse_emissions,
    parse_station_days,
    write_diaries,
    write_emissions,
    write_profiles,
    write_station_days,
)
from riskfactors.spatial.spatial import CountyRef, haversine_km, parse_counties
from riskfactors.stage_lib import atomic_write

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

DEFAULT_PLANTED: Tuple[Tuple[str, float], ...] = (
    ("FP_t_exercise", 1.2),
    ("FP_hours_work", 1.0),
    ("FP_smoker", 0.9),
    ("FP_lives_with_smoker", 0.8),
    ("FP_age", -1.0),
    ("FP_gender_female", 0.7),
    ("FE_Wildfires", 1.0),
    ("FE_Coal", 0.8),
    ("FA_pm25_max_m7", 1.0),
    ("FA_so2_mean_m7", 0.8),
)

GENERATED_FILES = (
    "counties.csv",
    "stations.csv",
    "emissions.csv",
    "category_map.csv",
    "diaries.csv",
    "profiles.csv",
    "ground_truth.csv",
)

# state FIPS prefix and bounding box of the generated counties
STATE_FIPS = "06"
LATITUDE_RANGE = (33.0, 41.0)
LONGITUDE_RANGE = (-123.0, -115.0)

# base level, seasonal amplitude and peak day of year of each positive factor
FACTOR_SHAPES: Dict[str, Tuple[float, float, int]] = {
    "pm25": (12.0, 0.3, 15),
    "so2": (3.0, 0.4, 20),
    "no2": (18.0, 0.25, 15),
    "o3": (40.0, 0.3, 190),
    "co": (0.6, 0.3, 15),
    "wind_speed": (3.5, 0.2, 80),
}
MISSING_READING_RATE = 0.03
MISSING_ANSWER_RATE = 0.03
UNKNOWN_LABEL_RATE = 0.02
EMISSION_REPORT_RATE = 0.8
DAY_MINUTES = 1440

# cumulative odds of cycling, running, gym exercise
EXERCISE_ODDS = (0.2, 0.5)
EXERCISE_KINDS = (("bicycle", "street"), ("run", "park"), ("exercise", "gym"))


def _parse_planted(text: str) -> Tuple[Tuple[str, float], ...]:
    planted: List[Tuple[str, float]] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, coefficient = item.rpartition(":")
        if not sep or not name.strip():
            raise ValueError(f"expected name:coefficient, got '{item}'")
        planted.append((name.strip(), float(coefficient)))
    return tuple(planted)


class SynthSpec(BaseSettings):
    """Size, signal and seed of a synthetic dataset, read from a KEY=VALUE file."""

    model_config = SettingsConfigDict(
        extra="forbid", case_sensitive=False, env_file_encoding="utf-8"
    )

    n_people: int = Field(default=2000, ge=20)
    n_counties: int = Field(default=30, ge=1, le=499)
    n_stations: int = Field(default=60, ge=1)
    year_start: int = 2001
    year_end: int = 2004
    planted: Annotated[Tuple[Tuple[str, float], ...], NoDecode] = DEFAULT_PLANTED
    noise_scale: float = Field(default=0.5, ge=0)
    max_diary_days: int = Field(default=3, ge=1, le=14)
    interpolation_k: int = Field(default=5, ge=1)
    seed: Optional[int] = None

    @field_validator("planted", mode="before")
    @classmethod
    def _split_planted(cls, value: Any) -> Any:
        if isinstance(value, str):
            return _parse_planted(value)
        return value

    @field_validator("planted")
    @classmethod
    def _check_planted(
        cls, value: Tuple[Tuple[str, float], ...]
    ) -> Tuple[Tuple[str, float], ...]:
        names = [name for name, _ in value]
        if len(set(names)) != len(names):
            raise ValueError("planted features must be distinct")
        for name, coefficient in value:
            if not math.isfinite(coefficient):
                raise ValueError(f"coefficient of {name} is not finite")
        return value

    @model_validator(mode="after")
    def _check_years(self) -> "SynthSpec":
        if self.year_start > self.year_end:
            raise ValueError(f"year range {self.year_start}-{self.year_end} is empty")
        return self

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, dotenv_settings

    @property
    def years(self) -> Tuple[int, int]:
        return self.year_start, self.year_end


def load_synth_spec(path: Optional[PathLike] = None, **overrides: Any) -> SynthSpec:
    """
    Read a spec file; keyword overrides win over the file.

    Raises:
        MissingInputFile: ``path`` does not exist.
        ConfigError: a key is unknown or a value is invalid.
    """
    if path is not None and not Path(path).is_file():
        raise MissingInputFile(path, role="synth spec")
    values = {key: value for key, value in overrides.items() if value is not None}
    try:
        return SynthSpec(_env_file=path, **values)  # type: ignore[call-arg]
    except ValidationError as e:
        raise ConfigError(f"Invalid synth spec {path or ''}: {e}") from e


class GroundTruth(BaseModel):
    model_config = ConfigDict(frozen=True)

    planted: Tuple[Tuple[str, float], ...]
    intercept: float
    positive_rate: float = Field(ge=0.0, le=1.0)
    n_people: int
    files: Tuple[Path, ...] = ()

    @property
    def features(self) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.planted)


def generated_columns() -> frozenset[str]:
    """Every raw feature column the extractors can produce."""
    personal = profile_features(PersonProfile(person_id="-", age_years=0))
    return frozenset((*personal, *ACTIVITY_COLUMNS, *EMISSION_COLUMNS, *POLLUTION_COLUMNS))


def write_ground_truth(planted: Tuple[Tuple[str, float], ...], path: PathLike) -> None:
    frame = pd.DataFrame(
        {
            "feature": [name for name, _ in planted],
            "coefficient": [repr(float(c)) for _, c in planted],
        },
        columns=["feature", "coefficient"],
    )
    with atomic_write(Path(path)) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")


def read_ground_truth(path: PathLike) -> Dict[str, float]:
    if not Path(path).is_file():
        raise MissingInputFile(path, role="ground truth")
    frame = pd.read_csv(path, dtype={"feature": str, "coefficient": float})
    return dict(zip(frame["feature"], frame["coefficient"].astype(float)))


def _counties(rng: np.random.Generator, n: int) -> List[CountyRef]:
    lats = np.round(rng.uniform(*LATITUDE_RANGE, size=n), 4)
    lons = np.round(rng.uniform(*LONGITUDE_RANGE, size=n), 4)
    return [
        CountyRef(
            county_fips=f"{STATE_FIPS}{2 * i + 1:03d}",
            centroid_lat=float(lats[i]),
            centroid_lon=float(lons[i]),
        )
        for i in range(n)
    ]


def _write_counties(counties: List[CountyRef], path: Path) -> None:
    frame = pd.DataFrame(
        {
            "county_fips": [c.county_fips for c in counties],
            "centroid_lat": [repr(c.centroid_lat) for c in counties],
            "centroid_lon": [repr(c.centroid_lon) for c in counties],
        }
    )
    with atomic_write(path) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")


def _station_table(
    rng: np.random.Generator,
    counties: List[CountyRef],
    n_stations: int,
    years: Tuple[int, int],
) -> pd.DataFrame:
    dates = pd.date_range(dt.date(years[0], 1, 1), dt.date(years[1], 12, 31), freq="D")
    doy = dates.dayofyear.to_numpy(dtype=np.float64)
    county_lat = np.array([c.centroid_lat for c in counties])
    county_lon = np.array([c.centroid_lon for c in counties])
    frames: List[pd.DataFrame] = []
    for s in range(n_stations):
        lat = round(float(rng.uniform(*LATITUDE_RANGE)), 4)
        lon = round(float(rng.uniform(*LONGITUDE_RANGE)), 4)
        nearest = int(np.argmin(haversine_km(lat, lon, county_lat, county_lon)))
        # north-south gradient plus station noise
        level = math.exp(0.15 * (lat - 37.0) + 0.3 * float(rng.normal()))
        for factor in ENVIRONMENTAL_FACTORS:
            if factor == "temperature":
                values = (
                    15.0
                    + 10.0 * np.cos(2 * np.pi * (doy - 200) / 365.25)
                    + rng.normal(0.0, 3.0)
                    + rng.normal(0.0, 3.0, size=len(dates))
                )
            elif factor == "pressure":
                values = 1013.0 + rng.normal(0.0, 4.0) + rng.normal(0.0, 5.0, size=len(dates))
            else:
                base, amplitude, peak = FACTOR_SHAPES[factor]
                seasonal = 1.0 + amplitude * np.cos(2 * np.pi * (doy - peak) / 365.25)
                values = base * level * seasonal * np.exp(rng.normal(0.0, 0.3, size=len(dates)))
            keep = rng.random(len(dates)) >= MISSING_READING_RATE
            frames.append(
                pd.DataFrame(
                    {
                        "station_id": f"S{s + 1:03d}",
                        "latitude": lat,
                        "longitude": lon,
                        "county_fips": counties[nearest].county_fips,
                        "date": dates[keep],
                        "factor": factor,
                        "value": np.round(values[keep], 3),
                    }
                )
            )
    return pd.concat(frames, ignore_index=True)


def _emissions(rng: np.random.Generator, counties: List[CountyRef]) -> List[EmissionRecord]:
    scale = {c: float(rng.uniform(1.0, 3.0)) for c in EMISSION_CATEGORIES}
    records: List[EmissionRecord] = []
    for county in counties:
        for category in EMISSION_CATEGORIES:
            if rng.random() >= EMISSION_REPORT_RATE:
                continue
            tonnes = round(10.0 ** (scale[category] + float(rng.normal(0.0, 0.5))), 1)
            records.append(
                EmissionRecord(
                    county_fips=county.county_fips, category=category, tonnes_per_year=tonnes
                )
            )
    return records


def _answered(rng: np.random.Generator, value: Any, rate: float = MISSING_ANSWER_RATE) -> Any:
    return None if rng.random() < rate else value


def _state(rng: np.random.Generator, flag: bool) -> TriState:
    if rng.random() < UNKNOWN_LABEL_RATE:
        return TriState.unknown
    return TriState.yes if flag else TriState.no


class _Person:
    """A generated profile plus the true behaviour its diary is drawn from."""

    def __init__(self, profile: PersonProfile, hours: float, smokes: bool, exercise: float):
        self.profile = profile
        self.hours = hours
        self.smokes = smokes
        self.exercise = exercise


def _person(rng: np.random.Generator, index: int, counties: List[CountyRef]) -> _Person:
    county = counties[int(rng.integers(len(counties)))].county_fips
    age = int(rng.integers(0, 91))
    roll = rng.random()
    gender = Gender.female if roll < 0.49 else Gender.male if roll < 0.98 else Gender.unknown
    if age < 18:
        employment = "student"
    elif age >= 65:
        employment = "retired" if rng.random() < 0.85 else "part_time"
    else:
        employment = str(
            rng.choice(
                ["full_time", "part_time", "unemployed", "homemaker", "student"],
                p=[0.55, 0.15, 0.1, 0.1, 0.1],
            )
        )
    if employment == "full_time":
        hours = float(rng.integers(35, 56))
    elif employment == "part_time":
        hours = float(rng.integers(10, 31))
    else:
        hours = 0.0
    smokes = age >= 16 and rng.random() < 0.22
    profile = PersonProfile(
        person_id=f"P{index + 1:05d}",
        county_fips=_answered(rng, county, 0.02),
        age_years=age,
        gender=gender,
        race=_answered(rng, str(rng.choice(RACE_VOCABULARY))),
        smoker=_state(rng, smokes),
        lives_with_smoker=_state(rng, rng.random() < 0.25),
        employment_status=_answered(rng, employment),
        hours_work_per_week=_answered(rng, hours),
        education_level=_answered(rng, int(rng.integers(1, 7))),
        income_bracket=_answered(rng, int(rng.integers(1, 11))),
        gas_stove=_state(rng, rng.random() < 0.5),
        heating_fuel=_answered(rng, str(rng.choice(HEATING_VOCABULARY))),
        cooking_fuel=_answered(rng, str(rng.choice(COOKING_VOCABULARY))),
    )
    exercise = float(rng.gamma(2.0, 15.0)) * (0.5 if age >= 65 else 1.0)
    return _Person(profile, hours, smokes, exercise)


def _day_plan(
    rng: np.random.Generator, person: _Person, weekday: bool
) -> List[Tuple[str, str, int, int, int]]:
    """(activity, location, minutes, smoking, heavy breathing) blocks of one day."""
    plan = [("sleep", "home", int(np.clip(rng.normal(480, 45), 300, 600)), 0, 0)]
    employment = person.profile.employment_status
    if weekday and person.hours > 0:
        mode = "car" if rng.random() < 0.7 else "bus"
        plan.append(("commute", mode, int(rng.integers(15, 46)), 0, 0))
        work = person.hours / 5.0 * 60.0 * float(rng.uniform(0.85, 1.15))
        plan.append(("work", "office", max(1, int(round(work))), 0, 0))
    elif weekday and employment == "student":
        plan.append(("commute", "bus", int(rng.integers(10, 31)), 0, 0))
        plan.append(("study", "school", int(rng.integers(300, 391)), 0, 0))
    minutes = int(rng.poisson(person.exercise))
    if minutes > 0:
        activity, location = EXERCISE_KINDS[int(np.searchsorted(EXERCISE_ODDS, rng.random()))]
        plan.append((activity, location, minutes, 0, 1))
    plan.append(("walk", "street", int(rng.integers(5, 41)), 0, 0))
    eat_at = "restaurant" if rng.random() < 0.25 else "home"
    plan.append(("eat", eat_at, int(rng.integers(30, 91)), 0, 0))
    if person.smokes:
        for _ in range(int(rng.integers(3, 9))):
            plan.append(("smoke", "yard", int(rng.integers(4, 11)), 1, 0))
    leisure = "socialize" if rng.random() < 0.5 else "read"
    plan.append((leisure, "30121", int(rng.integers(20, 121)), 0, 0))
    plan.append(("chores", "30120", int(rng.integers(10, 61)), 0, 0))

    # leave at least one minute for the evening block
    overflow = sum(block[2] for block in plan) - (DAY_MINUTES - 1)
    for i in sorted(range(len(plan)), key=lambda j: -plan[j][2]):
        if overflow <= 0:
            break
        cut = min(overflow, plan[i][2] - 1)
        plan[i] = (plan[i][0], plan[i][1], plan[i][2] - cut, plan[i][3], plan[i][4])
        overflow -= cut
    plan.append(("tv", "home", DAY_MINUTES - sum(block[2] for block in plan), 0, 0))
    return plan


def _diary(
    rng: np.random.Generator, person: _Person, spec: SynthSpec
) -> List[DiaryEntry]:
    n_days = int(rng.integers(1, spec.max_diary_days + 1))
    first = dt.date(spec.year_start, 1, 1)
    span = (dt.date(spec.year_end, 12, 31) - first).days - n_days + 1
    start = first + dt.timedelta(days=int(rng.integers(0, max(1, span + 1))))
    entries: List[DiaryEntry] = []
    for offset in range(n_days):
        day = start + dt.timedelta(days=offset)
        clock = 0
        for activity, location, minutes, smoking, breathing in _day_plan(
            rng, person, day.weekday() < 5
        ):
            entries.append(
                DiaryEntry(
                    person_id=person.profile.person_id,
                    date=day,
                    start_min=clock,
                    duration_min=minutes,
                    activity_code=activity,
                    location_code=location,
                    smoking_flag=smoking,
                    heavy_breathing_flag=breathing,
                )
            )
            clock += minutes
    return entries


def _label(asthmatic: bool, unknown: bool) -> TriState:
    if unknown:
        return TriState.unknown
    return TriState.yes if asthmatic else TriState.no


def _standardized(raw: np.ndarray) -> np.ndarray:
    """Median-impute then z-score each column."""
    X = raw.copy()
    for j in range(X.shape[1]):
        column = X[:, j]
        observed = column[~np.isnan(column)]
        column[np.isnan(column)] = float(np.median(observed)) if observed.size else 0.0
    std = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0)


def _intercept(linear: np.ndarray, target: float = 0.5, iterations: int = 200) -> float:
    """Bisection for the intercept giving a mean probability of ``target``."""
    lo, hi = -30.0, 30.0
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        if float(expit(mid + linear).mean()) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def generate(spec: SynthSpec, out_dir: PathLike, seed: Optional[int] = None) -> GroundTruth:
    """
    Write a synthetic dataset into ``out_dir``.

    ``seed`` overrides the spec's own seed; one of them is required. The same
    spec and seed always produce byte-identical files.

    Raises:
        UnknownPlantedFeature: a planted name is not a generated column.
        ConfigError: no seed was given.
    """
    seed = spec.seed if seed is None else seed
    if seed is None:
        raise ConfigError("A seed is required to generate synthetic data")
    known = generated_columns()
    for name, _ in spec.planted:
        if name not in known:
            raise UnknownPlantedFeature(name)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    county_rng, station_rng, emission_rng, people_rng, label_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)
    )
    log.info(
        f"Generating {spec.n_people} people, {spec.n_counties} counties, "
        f"{spec.n_stations} stations ({spec.year_start}-{spec.year_end}, seed {seed})"
    )

    counties = _counties(county_rng, spec.n_counties)
    _write_counties(counties, out / "counties.csv")
    write_station_days(
        _station_table(station_rng, counties, spec.n_stations, spec.years), out / "stations.csv"
    )
    write_emissions(_emissions(emission_rng, counties), out / "emissions.csv")
    mapping = CategoryMapping.load()
    mapping.write(out / "category_map.csv")

    people = [_person(people_rng, i, counties) for i in range(spec.n_people)]
    diaries = [entry for person in people for entry in _diary(people_rng, person, spec)]
    write_diaries(diaries, out / "diaries.csv")

    # environmental columns come from the files as written
    inputs = PipelineInputs(
        profiles=[p.profile for p in people],
        diaries=diaries,
        emissions=parse_emissions(out / "emissions.csv"),
        stations=parse_station_days(out / "stations.csv"),
        counties=parse_counties(out / "counties.csv"),
        mapping=mapping,
    )
    vectors = compute_person_vectors(inputs, inputs.profiles, spec.years, spec.interpolation_k)
    names = [name for name, _ in spec.planted]
    raw = np.array(
        [[vectors.row(p).get(name, math.nan) for name in names] for p in inputs.profiles],
        dtype=np.float64,
    ).reshape(len(people), len(names))
    coefficients = np.array([c for _, c in spec.planted], dtype=np.float64)
    linear = _standardized(raw) @ coefficients
    linear = linear + spec.noise_scale * label_rng.normal(size=len(people))
    intercept = _intercept(linear)
    asthmatic = label_rng.random(len(people)) < expit(intercept + linear)
    unknown = label_rng.random(len(people)) < UNKNOWN_LABEL_RATE

    profiles = [
        person.profile.model_copy(
            update={"asthma": _label(bool(asthmatic[i]), bool(unknown[i]))}
        )
        for i, person in enumerate(people)
    ]
    write_profiles(profiles, out / "profiles.csv")
    write_ground_truth(spec.planted, out / "ground_truth.csv")

    truth = GroundTruth(
        planted=spec.planted,
        intercept=intercept,
        positive_rate=float(asthmatic.mean()),
        n_people=len(people),
        files=tuple(out / name for name in GENERATED_FILES),
    )
    log.info(
        f"Planted {len(names)} features; intercept {intercept:.4f}, "
        f"positive rate {truth.positive_rate:.3f}"
    )
    return truth
