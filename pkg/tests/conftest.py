import asyncio
from pathlib import Path
from typing import Dict, List

import pytest

from riskfactors.features.build import PipelineInputs, build_feature_matrix, load_inputs
from riskfactors.features.features import FeatureMatrix
from riskfactors.synth.synth import GroundTruth, SynthSpec, generate

SMALL_SEED = 7
SMALL_YEARS = (2001, 2001)


def write_csv(path: Path, header: List[str], rows: List[List[str]]) -> Path:
    lines = [",".join(header)] + [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def profile_row(**overrides: str) -> Dict[str, str]:
    row = {
        "person_id": "p1",
        "county_fips": "06001",
        "age_years": "30",
        "gender": "F",
        "race": "white",
        "asthma": "1",
        "smoker": "0",
        "lives_with_smoker": "",
        "employment_status": "full_time",
        "hours_work_per_week": "40",
        "education_level": "3",
        "income_bracket": "",
        "gas_stove": "yes",
        "heating_fuel": "gas",
        "cooking_fuel": "electric",
    }
    row.update(overrides)
    return row


@pytest.fixture(scope="session")
def small_spec() -> SynthSpec:
    return SynthSpec(
        n_people=240,
        n_counties=6,
        n_stations=10,
        year_start=SMALL_YEARS[0],
        year_end=SMALL_YEARS[1],
        max_diary_days=2,
        seed=SMALL_SEED,
    )


@pytest.fixture(scope="session")
def synth_dataset(tmp_path_factory: pytest.TempPathFactory, small_spec: SynthSpec):
    out = tmp_path_factory.mktemp("synth")
    truth = generate(small_spec, out)
    return out, truth


@pytest.fixture(scope="session")
def synth_dir(synth_dataset) -> Path:
    return synth_dataset[0]


@pytest.fixture(scope="session")
def ground_truth(synth_dataset) -> GroundTruth:
    return synth_dataset[1]


@pytest.fixture(scope="session")
def small_inputs(synth_dir: Path) -> PipelineInputs:
    return asyncio.run(
        load_inputs(
            profiles=synth_dir / "profiles.csv",
            diaries=synth_dir / "diaries.csv",
            emissions=synth_dir / "emissions.csv",
            stations=synth_dir / "stations.csv",
            counties=synth_dir / "counties.csv",
            category_map=synth_dir / "category_map.csv",
        )
    )


@pytest.fixture(scope="session")
def small_matrix(small_inputs: PipelineInputs) -> FeatureMatrix:
    return build_feature_matrix(small_inputs, seed=SMALL_SEED, years=SMALL_YEARS)
