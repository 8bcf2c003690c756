import asyncio
import logging
from typing import Optional

from riskfactors.errors import ConfigError
from riskfactors.evaluation.ablation import Ranking, ranking_from_model, run_ablation
from riskfactors.evaluation.report import write_metrics_json, write_roc_csv
from riskfactors.features.features import FeatureMatrix, family_of, read_feature_csv
from riskfactors.model.serialize import load_model_with_search
from riskfactors.stage_constants import STAGE_OUTPUT
from riskfactors.stage_lib import StageInterface, StageResponse

log = logging.getLogger(__name__)


class EvaluateStage(StageInterface):
    """
    Scores every configured family subset with the KNN classifier and writes
    ``metrics.json`` and ``roc.csv``.

    The ranking attached to the report comes from ``model.txt`` when its
    columns match the feature matrix and it was searched with the configured
    seed, grid, folds, shrinkage and leaf size; otherwise the ranking is
    recomputed.
    """

    def _saved_ranking(self, matrix: FeatureMatrix) -> Optional[Ranking]:
        path = self.config.output_path(STAGE_OUTPUT.model)
        if not path.is_file():
            return None
        model, search = load_model_with_search(path)
        if model.column_names != matrix.column_names:
            log.warning(f"[{self.stage_id}] {path} does not match the features; re-ranking")
            return None
        if search != self.config.ranking_search():
            log.warning(
                f"[{self.stage_id}] {path} was searched with {search or 'unknown settings'}, "
                f"not the configured {self.config.ranking_search()}; re-ranking"
            )
            return None
        log.info(f"[{self.stage_id}] reusing ranking model {path}")
        return Ranking(model=model, features=ranking_from_model(model))

    async def run(self) -> StageResponse:
        config = self.config
        matrix = await asyncio.to_thread(
            read_feature_csv, config.output_path(STAGE_OUTPUT.features)
        )
        present = {family_of(c) for c in matrix.column_names}
        for subset in config.ablation_subsets:
            if not set(subset) <= present:
                raise ConfigError(
                    f"Subset {','.join(subset)} needs families missing from the "
                    f"feature matrix (present: {','.join(sorted(present))})"
                )

        report = await asyncio.to_thread(
            run_ablation,
            matrix.restrict,
            config.seed,
            subsets=config.ablation_subsets,
            knn_grid=config.knn_grid,
            n_folds=config.n_folds,
            gbt_depths=config.gbt_depths,
            gbt_trees=config.gbt_trees,
            shrinkage=config.shrinkage,
            min_samples_leaf=config.min_samples_leaf,
            top_k=config.top_k,
            ranking=self._saved_ranking(matrix),
        )
        for subset in report.subsets:
            log.info(
                f"[{self.stage_id}] {subset.name}: AUC {subset.auc:.4f}, "
                f"K per fold {subset.chosen_params['k_per_fold']}"
            )

        outputs = [
            config.output_path(STAGE_OUTPUT.metrics),
            config.output_path(STAGE_OUTPUT.roc),
        ]
        write_metrics_json(report, outputs[0])
        write_roc_csv(report, outputs[1])
        return self.ready(f"evaluated {len(report.subsets)} feature subsets", outputs)
