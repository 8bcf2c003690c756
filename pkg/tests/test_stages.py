import asyncio
import json
import shutil

import pandas as pd
import pytest

from riskfactors.config import RunConfig
from riskfactors.model.gbt import GbtModel, GbtParams
from riskfactors.model.serialize import load_model, save_model
from riskfactors.stage_constants import INPUT_FILE, STAGE_ID, STAGE_OUTPUT
from riskfactors.stage_directory import STAGE_DIRECTORY, get_stage
from riskfactors.stage_lib import StageStatus
from riskfactors.stages.evaluate_stage import EvaluateStage
from riskfactors.stages.featurize_stage import FeaturizeStage
from riskfactors.stages.rank_stage import RankStage
from riskfactors.stages.run_all_stage import RunAllStage
from riskfactors.stages.synth_stage import SynthStage
from tests.conftest import SMALL_SEED, SMALL_YEARS

OUTPUTS = (
    STAGE_OUTPUT.features,
    STAGE_OUTPUT.model,
    STAGE_OUTPUT.ranking,
    STAGE_OUTPUT.importance,
    STAGE_OUTPUT.metrics,
    STAGE_OUTPUT.roc,
)


def fast_config(out_dir, input_dir, **overrides):
    values = dict(
        seed=SMALL_SEED,
        out_dir=out_dir,
        input_dir=input_dir,
        year_start=SMALL_YEARS[0],
        year_end=SMALL_YEARS[1],
        gbt_depths=(1, 2),
        gbt_trees=(5, 10),
        knn_grid=(1, 5, 9),
        n_folds=3,
    )
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory, synth_dir):
    out = tmp_path_factory.mktemp("run")
    config = fast_config(out, synth_dir)
    response = asyncio.run(RunAllStage(config, STAGE_ID.run_all.value).execute())
    return config, response


def test_directory_lists_every_stage():
    assert [d.stage_id for d in STAGE_DIRECTORY] == list(STAGE_ID)
    assert get_stage(STAGE_ID.rank).stage_class is RankStage


def test_run_all_writes_every_artifact(pipeline_run):
    config, response = pipeline_run
    assert response.status is StageStatus.READY, response.detail
    for name in OUTPUTS:
        assert config.output_path(name).is_file()
    assert set(response.outputs) == {config.output_path(name) for name in OUTPUTS}


def test_run_all_skips_synth_without_a_spec(pipeline_run):
    config, _ = pipeline_run
    stages = [stage_id for stage_id, _ in RunAllStage(config, "run-all").plan()]
    assert stages == [STAGE_ID.featurize, STAGE_ID.rank, STAGE_ID.evaluate]


def test_metrics_document(pipeline_run):
    config, _ = pipeline_run
    document = json.loads(config.output_path(STAGE_OUTPUT.metrics).read_text())
    assert document["seed"] == SMALL_SEED
    assert document["n_folds"] == 3
    assert set(document["subsets"]) == {"FP", "FP+FA", "FP+FE", "FP+FE+FA"}
    for subset in document["subsets"].values():
        assert 0.0 <= subset["auc"] <= 1.0
        assert len(subset["chosen_params"]["k_per_fold"]) == 3
    assert 1 <= len(document["gbt"]["top_features"]) <= config.top_k
    assert document["column_counts"]["A"] >= 288


def test_ranking_and_roc_tables(pipeline_run):
    config, _ = pipeline_run
    ranking = pd.read_csv(config.output_path(STAGE_OUTPUT.ranking))
    assert list(ranking.columns) == ["rank", "feature", "importance"]
    assert ranking["rank"].tolist() == list(range(1, len(ranking) + 1))
    assert ranking["importance"].is_monotonic_decreasing
    assert ranking["importance"].sum() == pytest.approx(1.0)

    roc = pd.read_csv(config.output_path(STAGE_OUTPUT.roc))
    assert list(roc.columns) == ["subset", "fpr", "tpr"]
    last = roc.groupby("subset").tail(1)
    assert (last["fpr"] == 1.0).all() and (last["tpr"] == 1.0).all()
    assert config.output_path(STAGE_OUTPUT.importance).read_text().lstrip().startswith("<?xml")


async def test_evaluate_reuses_the_saved_model(pipeline_run, tmp_path):
    config, _ = pipeline_run
    for name in (STAGE_OUTPUT.features, STAGE_OUTPUT.model):
        shutil.copy(config.output_path(name), tmp_path / name.value)
    again = config.model_copy(update={"out_dir": tmp_path})
    response = await EvaluateStage(again, "evaluate").execute()
    assert response.status is StageStatus.READY
    assert (tmp_path / "metrics.json").read_bytes() == config.output_path(
        STAGE_OUTPUT.metrics
    ).read_bytes()


async def test_evaluate_reranks_when_the_search_settings_changed(pipeline_run, tmp_path):
    config, _ = pipeline_run
    for name in (STAGE_OUTPUT.features, STAGE_OUTPUT.model):
        shutil.copy(config.output_path(name), tmp_path / name.value)
    changed = config.model_copy(
        update={"out_dir": tmp_path, "gbt_depths": (3,), "gbt_trees": (7,), "seed": 999}
    )
    response = await EvaluateStage(changed, "evaluate").execute()
    assert response.status is StageStatus.READY, response.detail
    document = json.loads((tmp_path / "metrics.json").read_text())
    assert document["seed"] == 999
    assert document["gbt"]["chosen_params"] == {"max_depth": 3, "n_trees": 7}


async def test_evaluate_reranks_a_model_without_search_settings(pipeline_run, tmp_path):
    config, _ = pipeline_run
    shutil.copy(config.output_path(STAGE_OUTPUT.features), tmp_path / "features.csv")
    saved = load_model(config.output_path(STAGE_OUTPUT.model))
    bogus = GbtModel(
        base_score=saved.base_score,
        trees=(),
        params=GbtParams(max_depth=4, n_trees=0),
        column_names=saved.column_names,
    )
    save_model(bogus, tmp_path / "model.txt")
    again = config.model_copy(update={"out_dir": tmp_path})
    assert (await EvaluateStage(again, "evaluate").execute()).status is StageStatus.READY
    assert (tmp_path / "metrics.json").read_bytes() == config.output_path(
        STAGE_OUTPUT.metrics
    ).read_bytes()


async def test_missing_inputs_exit_1(tmp_path):
    config = fast_config(tmp_path / "out", tmp_path / "nowhere")
    response = await FeaturizeStage(config, "featurize").execute()
    assert response.status is StageStatus.ERROR
    assert response.exit_code == 1
    assert "profiles" in response.detail


async def test_rank_without_features_exit_1(tmp_path):
    response = await RankStage(fast_config(tmp_path, tmp_path), "rank").execute()
    assert response.exit_code == 1


async def test_malformed_input_exit_2(tmp_path, synth_dir):
    inputs = tmp_path / "inputs"
    shutil.copytree(synth_dir, inputs)
    diaries = inputs / INPUT_FILE.diaries.value
    lines = diaries.read_text().splitlines()
    cells = lines[1].split(",")
    cells[6] = "7"
    lines[1] = ",".join(cells)
    diaries.write_text("\n".join(lines) + "\n")

    response = await FeaturizeStage(fast_config(tmp_path, inputs), "featurize").execute()
    assert response.status is StageStatus.ERROR
    assert response.exit_code == 2
    assert "smoking_flag" in response.detail


async def test_evaluate_needs_the_configured_families(tmp_path, synth_dir):
    config = fast_config(tmp_path, synth_dir, families=("P",))
    assert (await FeaturizeStage(config, "featurize").execute()).status is StageStatus.READY
    response = await EvaluateStage(config, "evaluate").execute()
    assert response.exit_code == 1
    assert "missing from the feature matrix" in response.detail


async def test_synth_stage_writes_into_the_input_directory(tmp_path):
    spec = tmp_path / "synth.env"
    spec.write_text(
        "N_PEOPLE=60\nN_COUNTIES=3\nN_STATIONS=4\nYEAR_START=2001\nYEAR_END=2001\n",
        encoding="utf-8",
    )
    config = RunConfig(seed=3, out_dir=tmp_path / "out", synth_spec=spec)
    response = await SynthStage(config, "synth").execute()
    assert response.status is StageStatus.READY
    assert config.resolved_input_dir == tmp_path / "out" / "inputs"
    for name in ("profiles.csv", "ground_truth.csv", "category_map.csv"):
        assert (config.resolved_input_dir / name).is_file()
    assert [s for s, _ in RunAllStage(config, "run-all").plan()][0] is STAGE_ID.synth


def test_run_all_is_deterministic(pipeline_run, tmp_path, synth_dir):
    config, _ = pipeline_run
    second = fast_config(tmp_path, synth_dir)
    response = asyncio.run(RunAllStage(second, "run-all").execute())
    assert response.status is StageStatus.READY
    for name in OUTPUTS:
        assert second.output_path(name).read_bytes() == config.output_path(name).read_bytes()
