import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from riskfactors.evaluation.ablation import EvalReport, RankedFeature  # noqa: E402
from riskfactors.stage_lib import atomic_write  # noqa: E402

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

# fixed ids and no timestamp keep the SVG byte-stable
matplotlib.rcParams["svg.hashsalt"] = "riskfactors"


def metrics_document(report: EvalReport) -> Dict[str, Any]:
    return {
        "seed": report.seed,
        "protocol": report.protocol,
        "n_folds": report.n_folds,
        "column_counts": report.column_counts,
        "knn_grid": report.knn_grid,
        "subsets": {
            subset.name: {
                "families": list(subset.families),
                "n_columns": subset.n_columns,
                "precision": subset.precision,
                "recall": subset.recall,
                "auc": subset.auc,
                "fold_aucs": subset.fold_aucs,
                "chosen_params": subset.chosen_params,
            }
            for subset in report.subsets
        },
        "gbt": {
            "chosen_params": report.gbt_params,
            "top_features": [
                {"rank": f.rank, "feature": f.feature, "importance": f.importance}
                for f in report.top_features
            ],
        },
    }


def write_metrics_json(report: EvalReport, path: PathLike) -> None:
    text = json.dumps(metrics_document(report), indent=2, sort_keys=True)
    with atomic_write(Path(path)) as handle:
        handle.write(text + "\n")


def write_ranking_csv(features: Sequence[RankedFeature], path: PathLike) -> None:
    frame = pd.DataFrame(
        {
            "rank": [f.rank for f in features],
            "feature": [f.feature for f in features],
            "importance": [repr(f.importance) for f in features],
        },
        columns=["rank", "feature", "importance"],
    )
    with atomic_write(Path(path)) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")


def write_roc_csv(report: EvalReport, path: PathLike) -> None:
    rows: List[Dict[str, str]] = []
    for subset in report.subsets:
        for fpr, tpr in zip(subset.roc_fpr, subset.roc_tpr):
            rows.append({"subset": subset.name, "fpr": repr(fpr), "tpr": repr(tpr)})
    frame = pd.DataFrame(rows, columns=["subset", "fpr", "tpr"])
    with atomic_write(Path(path)) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")


def write_importance_svg(
    features: Sequence[RankedFeature], path: PathLike, top_k: int = 20
) -> None:
    """Horizontal bar chart of the ``top_k`` most important features."""
    shown = list(features[:top_k])[::-1]
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.35 * len(shown) + 1.0)))
    try:
        ax.barh([f.feature for f in shown], [f.importance for f in shown], color="#4c72b0")
        ax.set_xlabel("relative importance")
        ax.set_title(f"Top {len(shown)} features by gradient boosting gain")
        fig.tight_layout()
        with atomic_write(Path(path), binary=True) as handle:
            fig.savefig(handle, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    log.debug(f"Wrote importance chart with {len(shown)} bars to {path}")
