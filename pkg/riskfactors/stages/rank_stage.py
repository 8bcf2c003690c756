import asyncio
import logging

from riskfactors.evaluation.ablation import rank_features
from riskfactors.evaluation.report import write_importance_svg, write_ranking_csv
from riskfactors.features.features import read_feature_csv
from riskfactors.model.serialize import save_model
from riskfactors.stage_constants import STAGE_OUTPUT
from riskfactors.stage_lib import StageInterface, StageResponse

log = logging.getLogger(__name__)


class RankStage(StageInterface):
    """
    Grid-searches the boosted ensemble on ``features.csv`` and writes the model,
    the importance ranking and its chart.
    """

    async def run(self) -> StageResponse:
        config = self.config
        matrix = await asyncio.to_thread(
            read_feature_csv, config.output_path(STAGE_OUTPUT.features)
        )
        ranking = await asyncio.to_thread(
            rank_features,
            matrix,
            config.seed,
            config.gbt_depths,
            config.gbt_trees,
            config.n_folds,
            config.shrinkage,
            config.min_samples_leaf,
        )
        log.info(f"[{self.stage_id}] chosen GBT parameters {ranking.chosen_params}")
        if ranking.features:
            top = ranking.features[0]
            log.info(f"[{self.stage_id}] top feature {top.feature} ({top.importance:.4f})")

        outputs = [
            config.output_path(STAGE_OUTPUT.model),
            config.output_path(STAGE_OUTPUT.ranking),
            config.output_path(STAGE_OUTPUT.importance),
        ]
        save_model(ranking.model, outputs[0], search=config.ranking_search())
        write_ranking_csv(ranking.features, outputs[1])
        write_importance_svg(ranking.features, outputs[2], top_k=config.top_k)
        return self.ready(f"ranked {len(ranking.features)} features", outputs)
