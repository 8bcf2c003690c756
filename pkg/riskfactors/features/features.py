import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from riskfactors.errors import (
    DataValidationError,
    EmptyDiary,
    MalformedArtifact,
    MalformedRow,
    MissingInputFile,
)
from riskfactors.ingest.ingest import (
    EMISSION_CATEGORIES,
    ENVIRONMENTAL_FACTORS,
    Cohort,
    DiaryEntry,
    EmissionRecord,
    Gender,
    PersonProfile,
    TriState,
    read_table,
)
from riskfactors.spatial.spatial import MonthlyStats
from riskfactors.stage_lib import atomic_write

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

LOCATION_CATEGORIES = ("work", "travel", "home", "indoor", "outdoor")
ACTIVITY_CATEGORIES = ("sleep", "work", "exercise", "walking", "cycling", "leisure")
STATISTICS = ("max", "mean", "min")
FAMILIES = ("P", "E", "A")
FAMILY_PREFIX = {"P": "FP_", "E": "FE_", "A": "FA_"}
MISSING_SUFFIX = "_missing"

DEFAULT_CATEGORY_MAP = Path(__file__).with_name("category_map.csv")

RACE_VOCABULARY = ("white", "black", "asian", "native", "pacific", "multiple", "other")
EMPLOYMENT_VOCABULARY = (
    "full_time",
    "part_time",
    "unemployed",
    "retired",
    "student",
    "homemaker",
)
HEATING_VOCABULARY = ("gas", "electric", "oil", "wood", "propane", "none")
COOKING_VOCABULARY = ("gas", "electric", "wood", "propane", "none")

CATEGORICAL_FIELDS: Tuple[Tuple[str, str, Tuple[str, ...]], ...] = (
    ("race", "FP_race", RACE_VOCABULARY),
    ("employment_status", "FP_employment", EMPLOYMENT_VOCABULARY),
    ("heating_fuel", "FP_heating", HEATING_VOCABULARY),
    ("cooking_fuel", "FP_cooking", COOKING_VOCABULARY),
)
TRISTATE_FIELDS: Tuple[Tuple[str, str], ...] = (
    ("smoker", "FP_smoker"),
    ("lives_with_smoker", "FP_lives_with_smoker"),
    ("gas_stove", "FP_gas_stove"),
)


def _slug(text: str) -> str:
    return re.sub(r"[^0-9A-Za-z]+", "_", text).strip("_")


def emission_column(category: str) -> str:
    return f"FE_{_slug(category)}"


def pollution_column(factor: str, stat: str, month: int) -> str:
    return f"FA_{factor}_{stat}_m{month}"


EMISSION_COLUMNS: Tuple[str, ...] = tuple(emission_column(c) for c in EMISSION_CATEGORIES)
POLLUTION_COLUMNS: Tuple[str, ...] = tuple(
    pollution_column(factor, stat, month)
    for factor in ENVIRONMENTAL_FACTORS
    for stat in STATISTICS
    for month in range(1, 13)
)


def family_of(column: str) -> str:
    for family, prefix in FAMILY_PREFIX.items():
        if column.startswith(prefix):
            return family
    raise ValueError(f"Column {column} has no family prefix")


def parse_families(text: Union[str, Iterable[str]]) -> Tuple[str, ...]:
    """Normalise a family selection such as ``"P,E,A"`` into canonical order."""
    raw = text.split(",") if isinstance(text, str) else list(text)
    chosen = {token.strip().upper() for token in raw if token.strip()}
    unknown = chosen - set(FAMILIES)
    if unknown or not chosen:
        raise ValueError(f"Unknown feature families {sorted(unknown) or text!r}")
    return tuple(f for f in FAMILIES if f in chosen)


class CategoryMapping(BaseModel):
    """Diary code to (non-exclusive) location and activity categories."""

    model_config = ConfigDict(frozen=True)

    location_map: Dict[str, FrozenSet[str]] = Field(default_factory=dict)
    activity_map: Dict[str, FrozenSet[str]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_categories(self) -> "CategoryMapping":
        for code, cats in self.location_map.items():
            if not cats <= set(LOCATION_CATEGORIES):
                raise ValueError(f"location code {code}: unknown categories {sorted(cats)}")
        for code, cats in self.activity_map.items():
            if not cats <= set(ACTIVITY_CATEGORIES):
                raise ValueError(f"activity code {code}: unknown categories {sorted(cats)}")
        return self

    def locations(self, code: str) -> FrozenSet[str]:
        return self.location_map.get(code, frozenset())

    def activities(self, code: str) -> FrozenSet[str]:
        return self.activity_map.get(code, frozenset())

    @classmethod
    def load(cls, path: Optional[PathLike] = None) -> "CategoryMapping":
        """
        Load a ``kind,code,categories`` table; categories are pipe separated.

        Without a path the shipped default mapping is used.
        """
        path = Path(path) if path is not None else DEFAULT_CATEGORY_MAP
        frame = read_table(path, ("kind", "code", "categories"))
        maps: Dict[str, Dict[str, FrozenSet[str]]] = {"location": {}, "activity": {}}
        allowed = {"location": LOCATION_CATEGORIES, "activity": ACTIVITY_CATEGORIES}
        for row, record in enumerate(frame.to_dict("records")):
            kind = record["kind"].lower()
            if kind not in maps:
                raise MalformedRow(row, "kind", record["kind"], "expected location or activity")
            cats = frozenset(
                c.strip().lower() for c in record["categories"].split("|") if c.strip()
            )
            if not cats <= set(allowed[kind]):
                raise MalformedRow(
                    row, "categories", record["categories"], f"unknown {kind} category"
                )
            maps[kind][record["code"]] = cats
        log.debug(
            f"Loaded {len(maps['location'])} location and {len(maps['activity'])} "
            f"activity codes from {path}"
        )
        return cls(location_map=maps["location"], activity_map=maps["activity"])

    def write(self, path: PathLike) -> None:
        rows = [
            {"kind": kind, "code": code, "categories": "|".join(sorted(cats))}
            for kind, mapping in (
                ("location", self.location_map),
                ("activity", self.activity_map),
            )
            for code, cats in mapping.items()
        ]
        frame = pd.DataFrame(rows, columns=["kind", "code", "categories"])
        with atomic_write(Path(path)) as handle:
            frame.to_csv(handle, index=False, lineterminator="\n")


class ActivityFeatures(BaseModel):
    """Daily averages derived from one person's activity diary."""

    model_config = ConfigDict(frozen=True)

    t_location: Dict[str, float]
    t_activity: Dict[str, float]
    t_hb: float = Field(ge=0)
    t_s: float = Field(ge=0)
    n_hb: float = Field(ge=0)
    n_s: float = Field(ge=0)
    n_days: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_non_negative(self) -> "ActivityFeatures":
        if any(v < 0 for v in (*self.t_location.values(), *self.t_activity.values())):
            raise ValueError("activity features must be non-negative")
        return self

    def as_columns(self) -> Dict[str, float]:
        columns = {f"FP_t_{cat}": self.t_activity[cat] for cat in ACTIVITY_CATEGORIES}
        columns.update({f"FP_t_at_{cat}": self.t_location[cat] for cat in LOCATION_CATEGORIES})
        columns.update(
            {"FP_t_hb": self.t_hb, "FP_t_s": self.t_s, "FP_n_hb": self.n_hb, "FP_n_s": self.n_s}
        )
        return columns


ACTIVITY_COLUMNS: Tuple[str, ...] = (
    *(f"FP_t_{cat}" for cat in ACTIVITY_CATEGORIES),
    *(f"FP_t_at_{cat}" for cat in LOCATION_CATEGORIES),
    "FP_t_hb",
    "FP_t_s",
    "FP_n_hb",
    "FP_n_s",
)


def activity_features(
    entries: Sequence[DiaryEntry], mapping: CategoryMapping
) -> ActivityFeatures:
    """
    Average daily minutes per location and activity category, plus heavy
    breathing and smoking time and counts.

    Each category total is summed per diary day and averaged over all of the
    person's diary days. An entry counts towards every category its code maps to.

    Raises:
        EmptyDiary: no entries were given.
    """
    if not entries:
        raise EmptyDiary()
    person_ids = {e.person_id for e in entries}
    if len(person_ids) > 1:
        raise DataValidationError(f"Diary entries of several people: {sorted(person_ids)}")

    location_minutes: Dict[str, int] = defaultdict(int)
    activity_minutes: Dict[str, int] = defaultdict(int)
    hb_minutes = smoking_minutes = hb_count = smoking_count = 0
    days = set()
    for entry in entries:
        days.add(entry.date)
        for cat in mapping.locations(entry.location_code):
            location_minutes[cat] += entry.duration_min
        for cat in mapping.activities(entry.activity_code):
            activity_minutes[cat] += entry.duration_min
        if entry.heavy_breathing_flag:
            hb_minutes += entry.duration_min
            hb_count += 1
        if entry.smoking_flag:
            smoking_minutes += entry.duration_min
            smoking_count += 1

    n_days = len(days)
    return ActivityFeatures(
        t_location={cat: location_minutes[cat] / n_days for cat in LOCATION_CATEGORIES},
        t_activity={cat: activity_minutes[cat] / n_days for cat in ACTIVITY_CATEGORIES},
        t_hb=hb_minutes / n_days,
        t_s=smoking_minutes / n_days,
        n_hb=hb_count / n_days,
        n_s=smoking_count / n_days,
        n_days=n_days,
    )


def _normalise_category(value: str) -> str:
    return _slug(value.lower())


def _one_hot(prefix: str, value: Optional[str], vocabulary: Sequence[str]) -> Dict[str, float]:
    columns = {f"{prefix}_{v}": 0.0 for v in vocabulary}
    columns[f"{prefix}_other"] = 0.0
    columns[f"{prefix}{MISSING_SUFFIX}"] = 0.0
    if value is None or value.strip() == "":
        columns[f"{prefix}{MISSING_SUFFIX}"] = 1.0
        return columns
    token = _normalise_category(value)
    key = f"{prefix}_{token}" if token in vocabulary else f"{prefix}_other"
    columns[key] = 1.0
    return columns


def profile_features(profile: PersonProfile) -> Dict[str, float]:
    """
    Numeric encoding of a profile.

    Categorical fields are one-hot with ``_other`` and ``_missing`` columns,
    tri-states become 0/1 plus a ``_missing`` column. Ordinal and numeric
    fields keep their value and are NaN when unanswered.
    """
    columns: Dict[str, float] = {"FP_age": float(profile.age_years)}
    columns.update(
        {
            "FP_gender_female": float(profile.gender is Gender.female),
            "FP_gender_male": float(profile.gender is Gender.male),
            "FP_gender_missing": float(profile.gender is Gender.unknown),
        }
    )
    for attribute, prefix, vocabulary in CATEGORICAL_FIELDS:
        columns.update(_one_hot(prefix, getattr(profile, attribute), vocabulary))
    for attribute, name in TRISTATE_FIELDS:
        state = getattr(profile, attribute)
        columns[name] = float(state is TriState.yes)
        columns[f"{name}{MISSING_SUFFIX}"] = float(state is TriState.unknown)

    def _number(value: Optional[float]) -> float:
        return math.nan if value is None else float(value)

    columns["FP_hours_work"] = _number(profile.hours_work_per_week)
    columns["FP_education_level"] = _number(profile.education_level)
    columns["FP_income_bracket"] = _number(profile.income_bracket)
    return columns


def emission_features(records: Iterable[EmissionRecord], county: str) -> Dict[str, float]:
    """One ``FE_`` column per emission factor; factors the county does not report are 0."""
    columns = {name: 0.0 for name in EMISSION_COLUMNS}
    for record in records:
        if record.county_fips == county:
            columns[emission_column(record.category)] = record.tonnes_per_year
    return columns


def pollution_features(
    stats: Mapping[str, Sequence[MonthlyStats]], county: str
) -> Dict[str, float]:
    """``FA_<factor>_<stat>_m<month>`` columns; months without data are NaN."""
    columns = {name: math.nan for name in POLLUTION_COLUMNS}
    for factor, months in stats.items():
        for entry in months:
            for stat, value in (
                ("max", entry.f_max),
                ("mean", entry.f_mean),
                ("min", entry.f_min),
            ):
                if value is not None:
                    columns[pollution_column(factor, stat, entry.month)] = value
    missing = sum(1 for v in columns.values() if math.isnan(v))
    if missing:
        log.debug(f"County {county}: {missing} pollution cells without data")
    return columns


def personal_vectors(
    profiles: Sequence[PersonProfile],
    diaries: Mapping[str, Sequence[DiaryEntry]],
    mapping: CategoryMapping,
) -> Dict[str, Dict[str, float]]:
    """FP vectors for every profile; people without a diary get NaN activity cells."""
    vectors: Dict[str, Dict[str, float]] = {}
    no_diary = 0
    for profile in profiles:
        columns = profile_features(profile)
        entries = diaries.get(profile.person_id, ())
        try:
            columns.update(activity_features(entries, mapping).as_columns())
        except EmptyDiary:
            no_diary += 1
            columns.update({name: math.nan for name in ACTIVITY_COLUMNS})
        vectors[profile.person_id] = columns
    if no_diary:
        log.warning(f"{no_diary} people have no diary entries; activity cells left missing")
    return vectors


def emission_vectors(records: Sequence[EmissionRecord]) -> Dict[str, Dict[str, float]]:
    """
    FE vectors for every county that reports at least one emission factor.

    Within a reporting county an absent factor is 0 tonnes. A county with no
    inventory records at all gets no vector: ``assemble_matrix`` records it as
    unmapped and imputes its FE cells, since an empty inventory says nothing
    about its emissions.
    """
    by_county: Dict[str, List[EmissionRecord]] = defaultdict(list)
    for record in records:
        by_county[record.county_fips].append(record)
    return {
        county: emission_features(items, county)
        for county, items in sorted(by_county.items())
    }


def pollution_vectors(
    environment: Mapping[str, Mapping[str, Sequence[MonthlyStats]]],
) -> Dict[str, Dict[str, float]]:
    return {
        county: pollution_features(stats, county)
        for county, stats in sorted(environment.items())
    }


@dataclass(frozen=True)
class FeatureMatrix:
    """
    Person by feature matrix with labels.

    ``values`` holds the imputed numbers; ``missing`` flags the cells that were
    imputed. Columns with at least one imputed cell have a ``<col>_missing``
    companion listed in ``indicator_columns``.
    """

    person_ids: Tuple[str, ...]
    column_names: Tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray
    labels: np.ndarray
    indicator_columns: Tuple[str, ...] = ()
    unmapped_counties: Tuple[str, ...] = ()
    _positions: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n, d = self.values.shape
        if len(self.column_names) != d or len(set(self.column_names)) != d:
            raise ValueError("column names must be unique and match the matrix width")
        if len(self.person_ids) != n or len(self.labels) != n:
            raise ValueError("row keys and labels must match the matrix height")
        object.__setattr__(self, "_positions", {c: i for i, c in enumerate(self.column_names)})

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.values.shape[0]), int(self.values.shape[1]))

    @property
    def family_index(self) -> Dict[str, str]:
        return {column: family_of(column) for column in self.column_names}

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self._positions[name]]

    def column_counts(self) -> Dict[str, int]:
        counts = {family: 0 for family in FAMILIES}
        for column in self.column_names:
            counts[family_of(column)] += 1
        counts["indicators"] = len(self.indicator_columns)
        return counts

    def raw_values(self) -> np.ndarray:
        """Values with imputed cells put back to NaN."""
        raw = self.values.copy()
        raw[self.missing] = np.nan
        return raw

    def restrict(self, families: Union[str, Iterable[str]]) -> "FeatureMatrix":
        """Keep only the column blocks of the given families."""
        chosen = parse_families(families)
        keep = [i for i, c in enumerate(self.column_names) if family_of(c) in chosen]
        names = tuple(self.column_names[i] for i in keep)
        return FeatureMatrix(
            person_ids=self.person_ids,
            column_names=names,
            values=self.values[:, keep],
            missing=self.missing[:, keep],
            labels=self.labels,
            indicator_columns=tuple(c for c in self.indicator_columns if c in set(names)),
            unmapped_counties=self.unmapped_counties,
        )

    def equals(self, other: "FeatureMatrix") -> bool:
        return (
            self.person_ids == other.person_ids
            and self.column_names == other.column_names
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.labels, other.labels)
        )


def _impute(
    person_ids: Sequence[str],
    columns: Sequence[str],
    raw: np.ndarray,
    labels: np.ndarray,
    unmapped: Sequence[str] = (),
) -> FeatureMatrix:
    missing = np.isnan(raw)
    values = raw.copy()
    indicator_names: List[str] = []
    indicator_values: List[np.ndarray] = []
    for j in np.flatnonzero(missing.any(axis=0)):
        observed = raw[~missing[:, j], j]
        median = float(np.median(observed)) if observed.size else 0.0
        values[missing[:, j], j] = median
        indicator_names.append(f"{columns[j]}{MISSING_SUFFIX}")
        indicator_values.append(missing[:, j].astype(np.float64))

    names = list(columns) + indicator_names
    if len(set(names)) != len(names):
        clash = sorted({n for n in names if names.count(n) > 1})
        raise DataValidationError(f"Indicator columns clash with feature columns: {clash}")
    n = len(person_ids)
    full = np.column_stack([values, *indicator_values]) if indicator_values else values
    mask = np.column_stack([missing, np.zeros((n, len(indicator_names)), dtype=bool)])

    # FP block, FE block, FA block, alphabetical within each block
    order = sorted(
        range(len(names)), key=lambda i: (FAMILIES.index(family_of(names[i])), names[i])
    )
    return FeatureMatrix(
        person_ids=tuple(person_ids),
        column_names=tuple(names[i] for i in order),
        values=np.ascontiguousarray(full[:, order]),
        missing=np.ascontiguousarray(mask[:, order]),
        labels=np.asarray(labels, dtype=np.int64),
        indicator_columns=tuple(sorted(indicator_names)),
        unmapped_counties=tuple(sorted(set(unmapped))),
    )


def assemble_matrix(
    cohort: Cohort,
    personal: Mapping[str, Mapping[str, float]],
    emissions: Mapping[str, Mapping[str, float]],
    pollution: Mapping[str, Mapping[str, float]],
    families: Union[str, Iterable[str]] = FAMILIES,
) -> FeatureMatrix:
    """
    Join the family vectors of every cohort member into one matrix.

    Environmental vectors are looked up by the member's county. A county
    without emission or pollution data is recorded as unmapped and its cells
    are imputed like any other missing cell.
    """
    chosen = parse_families(families)
    members = cohort.members
    if not members:
        raise DataValidationError("Cohort is empty")
    for member in members:
        if member.profile.person_id not in personal:
            raise DataValidationError(f"No personal features for {member.profile.person_id}")

    columns: List[str] = []
    if "P" in chosen:
        columns.extend(sorted({c for m in members for c in personal[m.profile.person_id]}))
    if "E" in chosen:
        columns.extend(EMISSION_COLUMNS)
    if "A" in chosen:
        columns.extend(POLLUTION_COLUMNS)
    index = {c: j for j, c in enumerate(columns)}

    raw = np.full((len(members), len(columns)), np.nan, dtype=np.float64)
    unmapped: set[str] = set()
    for i, member in enumerate(members):
        sources: List[Mapping[str, float]] = []
        if "P" in chosen:
            sources.append(personal[member.profile.person_id])
        county = str(member.profile.county_fips)
        for family, table in (("E", emissions), ("A", pollution)):
            if family not in chosen:
                continue
            if county in table:
                sources.append(table[county])
            else:
                unmapped.add(county)
        for source in sources:
            for name, value in source.items():
                raw[i, index[name]] = value

    if unmapped:
        log.warning(f"Counties without environmental data: {sorted(unmapped)}")
    return _impute(
        [m.profile.person_id for m in members],
        columns,
        raw,
        cohort.labels,
        sorted(unmapped),
    )


def _format_cell(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def write_feature_csv(matrix: FeatureMatrix, path: PathLike) -> None:
    """Write ``person_id,label,<columns>``; imputed cells are written empty."""
    raw = matrix.raw_values()
    body = {
        "person_id": list(matrix.person_ids),
        "label": [str(int(v)) for v in matrix.labels],
    }
    for j, name in enumerate(matrix.column_names):
        body[name] = [_format_cell(v) for v in raw[:, j]]
    frame = pd.DataFrame(body, columns=["person_id", "label", *matrix.column_names])
    with atomic_write(Path(path)) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")
    log.debug(f"Wrote {matrix.shape[0]}x{matrix.shape[1]} feature matrix to {path}")


def read_feature_csv(path: PathLike) -> FeatureMatrix:
    """
    Read a matrix written by ``write_feature_csv``.

    Empty cells are re-imputed with the column median, which reproduces the
    written matrix exactly.

    Raises:
        MissingInputFile: the file does not exist.
        MalformedArtifact: the file is not a feature table.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputFile(path, role="feature")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    header = list(frame.columns)
    if header[:2] != ["person_id", "label"] or len(header) < 3:
        raise MalformedArtifact(f"{path}: expected person_id,label,<features> header")
    features = header[2:]
    try:
        labels = frame["label"].astype(int).to_numpy()
        raw = frame[features].replace("", np.nan).astype(np.float64).to_numpy()
        for column in features:
            family_of(column)
    except ValueError as e:
        raise MalformedArtifact(f"{path}: {e}")
    if not set(np.unique(labels)) <= {1, -1}:
        raise MalformedArtifact(f"{path}: labels must be +1 or -1")

    position = {c: j for j, c in enumerate(features)}
    has_missing = np.isnan(raw).any(axis=0)
    indicators = {
        c
        for c in features
        if c.endswith(MISSING_SUFFIX)
        and c[: -len(MISSING_SUFFIX)] in position
        and has_missing[position[c[: -len(MISSING_SUFFIX)]]]
    }
    base = [c for c in features if c not in indicators]
    matrix = _impute(
        frame["person_id"].tolist(),
        base,
        raw[:, [position[c] for c in base]],
        labels,
    )
    if matrix.column_names != tuple(features):
        raise MalformedArtifact(f"{path}: column order does not match a written matrix")
    log.info(f"Read {matrix.shape[0]}x{matrix.shape[1]} feature matrix from {path}")
    return matrix
