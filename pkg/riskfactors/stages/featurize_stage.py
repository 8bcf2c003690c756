import asyncio
import logging

from riskfactors.features.build import build_feature_matrix, load_inputs
from riskfactors.features.features import write_feature_csv
from riskfactors.stage_constants import INPUT_FILE, STAGE_OUTPUT
from riskfactors.stage_lib import StageInterface, StageResponse

log = logging.getLogger(__name__)


class FeaturizeStage(StageInterface):
    """Parses the inputs, balances the cohort and writes ``features.csv``."""

    async def run(self) -> StageResponse:
        config = self.config
        inputs = await load_inputs(
            profiles=config.input_path(INPUT_FILE.profiles),
            diaries=config.input_path(INPUT_FILE.diaries),
            emissions=config.input_path(INPUT_FILE.emissions),
            stations=config.input_path(INPUT_FILE.stations),
            counties=config.input_path(INPUT_FILE.counties),
            category_map=config.category_map_path(),
        )
        log.info(
            f"[{self.stage_id}] {len(inputs.profiles)} profiles, {len(inputs.diaries)} "
            f"diary entries, {len(inputs.emissions)} emission records, "
            f"{len(inputs.stations)} station readings, {len(inputs.counties)} counties"
        )
        matrix = await asyncio.to_thread(
            build_feature_matrix,
            inputs,
            config.seed,
            config.families,
            config.years,
            config.interpolation_k,
        )
        log.info(f"[{self.stage_id}] cohort size {matrix.shape[0]}")
        log.info(f"[{self.stage_id}] column counts {matrix.column_counts()}")
        if matrix.unmapped_counties:
            log.info(f"[{self.stage_id}] unmapped counties {list(matrix.unmapped_counties)}")

        path = config.output_path(STAGE_OUTPUT.features)
        await asyncio.to_thread(write_feature_csv, matrix, path)
        return self.ready(
            f"wrote {matrix.shape[0]} x {matrix.shape[1]} feature matrix to {path}", [path]
        )
