import logging
from pathlib import Path
from typing import List, Type

from riskfactors.stage_constants import STAGE_ID
from riskfactors.stage_lib import StageInterface, StageResponse, StageStatus
from riskfactors.stages.evaluate_stage import EvaluateStage
from riskfactors.stages.featurize_stage import FeaturizeStage
from riskfactors.stages.rank_stage import RankStage
from riskfactors.stages.synth_stage import SynthStage

log = logging.getLogger(__name__)


class RunAllStage(StageInterface):
    """
    Runs synth (only when a synth spec is configured), featurize, rank and
    evaluate in order, stopping at the first failure.
    """

    def plan(self) -> List[tuple[STAGE_ID, Type[StageInterface]]]:
        steps: List[tuple[STAGE_ID, Type[StageInterface]]] = []
        if self.config.synth_spec is not None:
            steps.append((STAGE_ID.synth, SynthStage))
        steps.extend(
            [
                (STAGE_ID.featurize, FeaturizeStage),
                (STAGE_ID.rank, RankStage),
                (STAGE_ID.evaluate, EvaluateStage),
            ]
        )
        return steps

    async def run(self) -> StageResponse:
        outputs: List[Path] = []
        steps = self.plan()
        for stage_id, stage_class in steps:
            response = await stage_class(self.config, stage_id.value).execute()
            if response.status is StageStatus.ERROR:
                log.error(f"[{self.stage_id}] stopped at {stage_id.value}")
                return response
            outputs.extend(response.outputs)
        return self.ready(f"ran {', '.join(s.value for s, _ in steps)}", outputs)
