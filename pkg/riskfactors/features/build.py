import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

from riskfactors.errors import MissingInputFile
from riskfactors.features.features import (
    FAMILIES,
    CategoryMapping,
    FeatureMatrix,
    assemble_matrix,
    emission_vectors,
    personal_vectors,
    pollution_vectors,
)
from riskfactors.ingest.ingest import (
    DiaryEntry,
    EmissionRecord,
    PersonProfile,
    balance_cohort,
    parse_diaries,
    parse_emissions,
    parse_profiles,
    parse_station_days,
)
from riskfactors.spatial.spatial import (
    DEFAULT_K,
    DEFAULT_YEARS,
    CountyRef,
    county_environment,
    parse_counties,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineInputs:
    """Parsed contents of the input files of one run."""

    profiles: List[PersonProfile]
    diaries: List[DiaryEntry]
    emissions: List[EmissionRecord]
    stations: pd.DataFrame
    counties: List[CountyRef]
    mapping: CategoryMapping


@dataclass(frozen=True)
class PersonVectors:
    """Raw (unimputed) family vectors: FP by person, FE and FA by county."""

    personal: Dict[str, Dict[str, float]]
    emissions: Dict[str, Dict[str, float]]
    pollution: Dict[str, Dict[str, float]]

    def row(self, profile: PersonProfile) -> Dict[str, float]:
        """Every raw column of one person; environmental cells absent when unmapped."""
        columns = dict(self.personal[profile.person_id])
        county = profile.county_fips
        if county is not None:
            columns.update(self.emissions.get(county, {}))
            columns.update(self.pollution.get(county, {}))
        return columns


def _diaries_by_person(entries: Sequence[DiaryEntry]) -> Dict[str, List[DiaryEntry]]:
    grouped: Dict[str, List[DiaryEntry]] = {}
    for entry in entries:
        grouped.setdefault(entry.person_id, []).append(entry)
    return grouped


def compute_person_vectors(
    inputs: PipelineInputs,
    profiles: Sequence[PersonProfile],
    years: Tuple[int, int] = DEFAULT_YEARS,
    k: int = DEFAULT_K,
) -> PersonVectors:
    """
    Extract every feature family for ``profiles``.

    Pollution statistics are interpolated only for counties some profile
    lives in.
    """
    wanted = {p.county_fips for p in profiles if p.county_fips is not None}
    counties = [c for c in inputs.counties if c.county_fips in wanted]
    return PersonVectors(
        personal=personal_vectors(profiles, _diaries_by_person(inputs.diaries), inputs.mapping),
        emissions=emission_vectors(inputs.emissions),
        pollution=pollution_vectors(county_environment(inputs.stations, counties, years, k)),
    )


def build_feature_matrix(
    inputs: PipelineInputs,
    seed: int,
    families: Union[str, Iterable[str]] = FAMILIES,
    years: Tuple[int, int] = DEFAULT_YEARS,
    k: int = DEFAULT_K,
) -> FeatureMatrix:
    """Balance the cohort and assemble its imputed feature matrix."""
    cohort = balance_cohort(inputs.profiles, seed)
    profiles = [member.profile for member in cohort.members]
    vectors = compute_person_vectors(inputs, profiles, years, k)
    matrix = assemble_matrix(
        cohort, vectors.personal, vectors.emissions, vectors.pollution, families
    )
    log.info(f"Feature matrix {matrix.shape[0]} x {matrix.shape[1]}: {matrix.column_counts()}")
    return matrix


async def load_inputs(
    profiles: Path,
    diaries: Path,
    emissions: Path,
    stations: Path,
    counties: Path,
    category_map: Optional[Path] = None,
) -> PipelineInputs:
    """
    Parse the input files concurrently, one worker thread per file.

    Raises:
        MissingInputFile: any path does not exist; checked before parsing starts.
    """
    named = {
        "profiles": profiles,
        "diaries": diaries,
        "emissions": emissions,
        "stations": stations,
        "counties": counties,
    }
    if category_map is not None:
        named["category map"] = category_map
    for role, path in named.items():
        if not Path(path).is_file():
            raise MissingInputFile(path, role)

    parsed = await asyncio.gather(
        asyncio.to_thread(parse_profiles, profiles),
        asyncio.to_thread(parse_diaries, diaries),
        asyncio.to_thread(parse_emissions, emissions),
        asyncio.to_thread(parse_station_days, stations),
        asyncio.to_thread(parse_counties, counties),
        asyncio.to_thread(CategoryMapping.load, category_map),
    )
    return PipelineInputs(
        profiles=parsed[0],
        diaries=parsed[1],
        emissions=parsed[2],
        stations=parsed[3],
        counties=parsed[4],
        mapping=parsed[5],
    )
