import logging

import pytest

from local_runner.main import build_parser, run
from riskfactors.config import load_config
from riskfactors.errors import ConfigError, MissingInputFile
from riskfactors.stage_constants import INPUT_FILE


@pytest.fixture(autouse=True)
def restore_root_level():
    root = logging.getLogger()
    level = root.level
    yield
    root.setLevel(level)


def test_every_stage_is_a_subcommand():
    parser = build_parser()
    for command in ("synth", "featurize", "rank", "evaluate", "run-all"):
        args = parser.parse_args([command, "--seed", "1"])
        assert args.command == command
        assert args.seed == 1


def test_subcommand_is_required():
    with pytest.raises(SystemExit) as info:
        run([])
    assert info.value.code == 2


def test_missing_config_file_exits_1(tmp_path, capsys):
    code = run(["rank", "--config", str(tmp_path / "absent.env")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_missing_seed_exits_1(tmp_path):
    assert run(["featurize", "--out", str(tmp_path)]) == 1


def test_unknown_config_key_exits_1(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("SEED=1\nLEARNING_RATE=0.3\n", encoding="utf-8")
    assert run(["featurize", "--config", str(path), "--out", str(tmp_path)]) == 1


def test_missing_inputs_exit_1_and_log(tmp_path, capsys):
    code = run(["featurize", "--seed", "4", "--out", str(tmp_path)])
    assert code == 1
    assert "profiles" in capsys.readouterr().err
    log_text = (tmp_path / "run.log").read_text()
    assert "seed 4" in log_text
    assert "numpy" in log_text


def test_malformed_input_exits_2(tmp_path, synth_dir):
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    for path in synth_dir.iterdir():
        (inputs / path.name).write_bytes(path.read_bytes())
    profiles = inputs / "profiles.csv"
    lines = profiles.read_text().splitlines()
    lines.append(lines[1])
    profiles.write_text("\n".join(lines) + "\n")
    assert run(["featurize", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_synth_subcommand(tmp_path):
    spec = tmp_path / "synth.env"
    spec.write_text("N_PEOPLE=40\nN_COUNTIES=2\nN_STATIONS=3\nYEAR_END=2001\n")
    out = tmp_path / "out"
    assert run(["synth", "--seed", "8", "--out", str(out), "--spec", str(spec)]) == 0
    assert (out / "inputs" / "ground_truth.csv").is_file()
    assert (out / "run.log").is_file()


def test_flags_override_the_file(tmp_path):
    path = tmp_path / "run.env"
    path.write_text(
        "SEED=1\nFAMILIES=P,E\nKNN_GRID=3,1\nABLATION_SUBSETS=P;P,E\nYEAR_START=2003\n"
        "YEAR_END=2005\n",
        encoding="utf-8",
    )
    config = load_config(path, seed=9, families=None)
    assert config.seed == 9
    assert config.families == ("P", "E")
    assert config.knn_grid == (3, 1)
    assert config.ablation_subsets == (("P",), ("P", "E"))
    assert config.years == (2003, 2005)
    assert config.input_path(INPUT_FILE.profiles) == config.out_dir / "inputs" / "profiles.csv"



def test_ranking_search_ignores_grid_order():
    first = load_config(None, seed=3, gbt_depths="3,1", gbt_trees="100,50")
    second = load_config(None, seed=3, gbt_depths="1,3", gbt_trees="50,100")
    assert first.ranking_search() == second.ranking_search()
    assert first.ranking_search()["gbt_depths"] == "1,3"
    assert load_config(None, seed=4).ranking_search() != first.ranking_search()


@pytest.mark.parametrize(
    "content",
    [
        "SEED=1\nKNN_GRID=\n",
        "SEED=1\nGBT_DEPTHS=0,1\n",
        "SEED=1\nYEAR_START=2010\nYEAR_END=2001\n",
        "SEED=1\nFAMILIES=P,Q\n",
        "SEED=x\n",
    ],
)
def test_invalid_config_values(tmp_path, content):
    path = tmp_path / "run.env"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(MissingInputFile):
        load_config(tmp_path / "absent.env")
