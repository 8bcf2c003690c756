from typing import List, Type

from pydantic import BaseModel, ConfigDict

from riskfactors.stage_constants import INPUT_FILE, STAGE_ID, STAGE_OUTPUT
from riskfactors.stage_lib import StageInterface
from riskfactors.stages.evaluate_stage import EvaluateStage
from riskfactors.stages.featurize_stage import FeaturizeStage
from riskfactors.stages.rank_stage import RankStage
from riskfactors.stages.run_all_stage import RunAllStage
from riskfactors.stages.synth_stage import SynthStage


class StageDescriptor(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    stage_id: STAGE_ID
    description: str
    requires: List[str]
    produces: List[str]
    stage_class: Type[StageInterface]


_INPUTS = [
    INPUT_FILE.profiles.value,
    INPUT_FILE.diaries.value,
    INPUT_FILE.emissions.value,
    INPUT_FILE.stations.value,
    INPUT_FILE.counties.value,
]

STAGE_DIRECTORY = [
    StageDescriptor(
        stage_id=STAGE_ID.synth,
        description="Generate a synthetic input set with planted asthma risk factors.",
        requires=[],
        produces=[f.value for f in INPUT_FILE],
        stage_class=SynthStage,
    ),
    StageDescriptor(
        stage_id=STAGE_ID.featurize,
        description="Balance the cohort and build the imputed person by feature matrix.",
        requires=_INPUTS,
        produces=[STAGE_OUTPUT.features.value],
        stage_class=FeaturizeStage,
    ),
    StageDescriptor(
        stage_id=STAGE_ID.rank,
        description="Grid-search the boosted trees and rank features by gain importance.",
        requires=[STAGE_OUTPUT.features.value],
        produces=[
            STAGE_OUTPUT.model.value,
            STAGE_OUTPUT.ranking.value,
            STAGE_OUTPUT.importance.value,
        ],
        stage_class=RankStage,
    ),
    StageDescriptor(
        stage_id=STAGE_ID.evaluate,
        description="Score each feature-family subset with a KNN classifier under nested CV.",
        requires=[STAGE_OUTPUT.features.value],
        produces=[STAGE_OUTPUT.metrics.value, STAGE_OUTPUT.roc.value],
        stage_class=EvaluateStage,
    ),
    StageDescriptor(
        stage_id=STAGE_ID.run_all,
        description="Run every stage in order; synth runs only when a spec is configured.",
        requires=[],
        produces=[
            STAGE_OUTPUT.features.value,
            STAGE_OUTPUT.model.value,
            STAGE_OUTPUT.ranking.value,
            STAGE_OUTPUT.importance.value,
            STAGE_OUTPUT.metrics.value,
            STAGE_OUTPUT.roc.value,
        ],
        stage_class=RunAllStage,
    ),
]


def get_stage(stage_id: STAGE_ID) -> StageDescriptor:
    for descriptor in STAGE_DIRECTORY:
        if descriptor.stage_id is stage_id:
            return descriptor
    raise KeyError(stage_id)
