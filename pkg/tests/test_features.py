import datetime as dt
import math

import numpy as np
import pytest

from riskfactors.errors import EmptyDiary
from riskfactors.features.build import build_feature_matrix
from riskfactors.features.features import (
    EMISSION_COLUMNS,
    POLLUTION_COLUMNS,
    CategoryMapping,
    activity_features,
    assemble_matrix,
    emission_features,
    emission_vectors,
    family_of,
    parse_families,
    pollution_features,
    profile_features,
    read_feature_csv,
    write_feature_csv,
)
from riskfactors.ingest.ingest import (
    Cohort,
    CohortMember,
    DiaryEntry,
    EmissionRecord,
    Gender,
    PersonProfile,
    TriState,
)
from riskfactors.spatial.spatial import MonthlyStats
from tests.conftest import SMALL_SEED, SMALL_YEARS

MAPPING = CategoryMapping(
    location_map={"home": frozenset({"home"}), "work": frozenset({"work"})},
    activity_map={"sleep": frozenset({"sleep"}), "work": frozenset({"work"})},
)


def _entry(day, activity, location, minutes, hb=0, smoking=0, start=0):
    return DiaryEntry(
        person_id="p1",
        date=dt.date(2001, 6, day),
        start_min=start,
        duration_min=minutes,
        activity_code=activity,
        location_code=location,
        heavy_breathing_flag=hb,
        smoking_flag=smoking,
    )


def _profile(person_id="p1", **fields):
    values = {"person_id": person_id, "county_fips": "06001", "age_years": 30}
    values.update(fields)
    return PersonProfile(**values)


def test_single_entry_day():
    features = activity_features([_entry(1, "sleep", "home", 480)], MAPPING)
    assert features.t_activity["sleep"] == 480
    assert features.t_location["home"] == 480
    assert features.t_activity["work"] == 0
    assert features.t_location["outdoor"] == 0
    assert features.n_hb == 0


def test_daily_averages_over_diary_days():
    entries = [
        _entry(1, "sleep", "home", 400),
        _entry(1, "work", "work", 200, hb=1, start=400),
        _entry(2, "sleep", "home", 500),
    ]
    features = activity_features(entries, MAPPING)
    assert features.n_days == 2
    assert features.t_activity["sleep"] == 450
    assert features.t_activity["work"] == 100
    assert features.t_location["home"] == 450
    assert features.t_location["work"] == 100
    assert features.t_hb == 100
    assert features.n_hb == 0.5
    assert features.t_s == 0 and features.n_s == 0


def test_overlapping_location_categories_count_twice():
    mapping = CategoryMapping.load()
    features = activity_features([_entry(1, "sleep", "30121", 60)], mapping)
    assert features.t_location["home"] == 60
    assert features.t_location["indoor"] == 60


def test_unmapped_codes_add_nothing():
    features = activity_features([_entry(1, "juggling", "moon", 90, smoking=1)], MAPPING)
    assert sum(features.t_activity.values()) == 0
    assert sum(features.t_location.values()) == 0
    assert features.t_s == 90 and features.n_s == 1


def test_doubling_durations_doubles_time_features():
    entries = [_entry(1, "sleep", "home", 300, hb=1), _entry(2, "work", "work", 120)]
    doubled = [e.model_copy(update={"duration_min": 2 * e.duration_min}) for e in entries]
    base, twice = activity_features(entries, MAPPING), activity_features(doubled, MAPPING)
    for name, value in base.as_columns().items():
        if name.startswith("FP_n_"):
            assert twice.as_columns()[name] == value
        else:
            assert twice.as_columns()[name] == 2 * value


def test_empty_diary():
    with pytest.raises(EmptyDiary):
        activity_features([], MAPPING)


def test_profile_encoding():
    columns = profile_features(
        _profile(age_years=10, gender=Gender.female, race="Asian", hours_work_per_week=40.0)
    )
    assert columns["FP_age"] == 10
    assert columns["FP_gender_female"] == 1 and columns["FP_gender_male"] == 0
    assert columns["FP_race_asian"] == 1 and columns["FP_race_other"] == 0
    assert columns["FP_smoker"] == 0 and columns["FP_smoker_missing"] == 1
    assert columns["FP_hours_work"] == 40
    assert math.isnan(columns["FP_income_bracket"])
    assert columns["FP_employment_missing"] == 1


def test_profile_encoding_of_unlisted_and_known_values():
    columns = profile_features(_profile(race="martian", smoker=TriState.yes))
    assert columns["FP_race_other"] == 1
    assert columns["FP_race_missing"] == 0
    assert columns["FP_smoker"] == 1 and columns["FP_smoker_missing"] == 0
    assert columns["FP_gender_missing"] == 1


def test_emission_absence_is_zero():
    record = EmissionRecord(county_fips="06059", category="Wildfires", tonnes_per_year=850.2)
    columns = emission_features([record], "06059")
    assert columns["FE_Wildfires"] == 850.2
    assert columns["FE_Mining"] == 0.0
    assert len(columns) == len(EMISSION_COLUMNS) == 26


def test_pollution_columns_and_missing_months():
    june = MonthlyStats(factor="pm25", month=6, f_max=35.0, f_mean=25.0, f_min=15.0)
    february = MonthlyStats(factor="pm25", month=2)
    columns = pollution_features({"pm25": [february, june]}, "06001")
    assert len(POLLUTION_COLUMNS) == 288
    assert columns["FA_pm25_max_m6"] == 35.0
    assert columns["FA_pm25_min_m6"] == 15.0
    assert math.isnan(columns["FA_pm25_mean_m2"])
    assert math.isnan(columns["FA_o3_max_m1"])


def test_median_imputation_with_indicator():
    profiles = [_profile(f"p{i}") for i in range(4)]
    cohort = Cohort(
        members=tuple(
            CohortMember(profile=p, label=1 if i % 2 == 0 else -1)
            for i, p in enumerate(profiles)
        ),
        seed=0,
    )
    personal = {
        "p0": {"FP_x": 1.0},
        "p1": {"FP_x": math.nan},
        "p2": {"FP_x": 3.0},
        "p3": {"FP_x": math.nan},
    }
    matrix = assemble_matrix(cohort, personal, {}, {}, families="P")
    assert matrix.column_names == ("FP_x", "FP_x_missing")
    np.testing.assert_array_equal(matrix.column("FP_x"), [1.0, 2.0, 3.0, 2.0])
    np.testing.assert_array_equal(matrix.column("FP_x_missing"), [0.0, 1.0, 0.0, 1.0])
    assert matrix.missing[:, 0].tolist() == [False, True, False, True]
    assert matrix.indicator_columns == ("FP_x_missing",)


def test_unmapped_county_is_recorded():
    profiles = [_profile("p0"), _profile("p1", county_fips="06099")]
    cohort = Cohort(
        members=(
            CohortMember(profile=profiles[0], label=1),
            CohortMember(profile=profiles[1], label=-1),
        ),
        seed=0,
    )
    emissions = {"06001": {name: 1.0 for name in EMISSION_COLUMNS}}
    matrix = assemble_matrix(cohort, {"p0": {}, "p1": {}}, emissions, {}, families="E")
    assert matrix.unmapped_counties == ("06099",)
    assert matrix.column("FE_Coal").tolist() == [1.0, 1.0]



def test_county_without_inventory_records_is_imputed_not_zero():
    records = [
        EmissionRecord(county_fips="06001", category="Wildfires", tonnes_per_year=10.0),
        EmissionRecord(county_fips="06002", category="Wildfires", tonnes_per_year=30.0),
    ]
    emissions = emission_vectors(records)
    assert sorted(emissions) == ["06001", "06002"]

    profiles = [
        _profile("p0"),
        _profile("p1", county_fips="06002"),
        _profile("p2", county_fips="06099"),
    ]
    cohort = Cohort(
        members=tuple(
            CohortMember(profile=p, label=label) for p, label in zip(profiles, (1, -1, 1))
        ),
        seed=0,
    )
    personal = {p.person_id: {} for p in profiles}
    matrix = assemble_matrix(cohort, personal, emissions, {}, families="E")
    assert matrix.unmapped_counties == ("06099",)
    assert matrix.column("FE_Wildfires").tolist() == [10.0, 30.0, 20.0]
    assert matrix.column("FE_Wildfires_missing").tolist() == [0.0, 0.0, 1.0]
    assert matrix.column("FE_Mining").tolist() == [0.0, 0.0, 0.0]
    assert matrix.column("FE_Mining_missing").tolist() == [0.0, 0.0, 1.0]

def test_parse_families():
    assert parse_families("a, p") == ("P", "A")
    assert parse_families(["E"]) == ("E",)
    with pytest.raises(ValueError):
        parse_families("P,X")


def test_matrix_blocks_and_families(small_matrix):
    families = [family_of(c) for c in small_matrix.column_names]
    assert families == sorted(families, key="PEA".index)
    assert not np.isnan(small_matrix.values).any()
    assert int((small_matrix.labels == 1).sum()) * 2 == small_matrix.shape[0]
    pollution = small_matrix.restrict("A")
    base = [c for c in pollution.column_names if c not in pollution.indicator_columns]
    assert len(base) == 288
    assert all(c.startswith("FP_") for c in small_matrix.restrict("P").column_names)


def test_restrict_matches_building_the_subset(small_inputs, small_matrix):
    subset = build_feature_matrix(
        small_inputs, seed=SMALL_SEED, families="P,E", years=SMALL_YEARS
    )
    assert subset.equals(small_matrix.restrict("P,E"))


def test_feature_csv_round_trip(tmp_path, small_matrix):
    path = tmp_path / "features.csv"
    write_feature_csv(small_matrix, path)
    again = read_feature_csv(path)
    assert again.equals(small_matrix)
    assert again.indicator_columns == small_matrix.indicator_columns
