import asyncio

import numpy as np
import pytest

from riskfactors.errors import ConfigError, MissingInputFile, UnknownPlantedFeature
from riskfactors.features.build import compute_person_vectors, load_inputs
from riskfactors.ingest.ingest import TriState
from riskfactors.synth.synth import (
    DEFAULT_PLANTED,
    GENERATED_FILES,
    SynthSpec,
    generate,
    generated_columns,
    load_synth_spec,
    read_ground_truth,
)


def _tiny(**fields):
    values = dict(
        n_people=150,
        n_counties=4,
        n_stations=6,
        year_start=2002,
        year_end=2002,
        max_diary_days=1,
    )
    values.update(fields)
    return SynthSpec(**values)


def _load(out):
    return asyncio.run(
        load_inputs(
            profiles=out / "profiles.csv",
            diaries=out / "diaries.csv",
            emissions=out / "emissions.csv",
            stations=out / "stations.csv",
            counties=out / "counties.csv",
            category_map=out / "category_map.csv",
        )
    )


def test_writes_every_file(synth_dir, ground_truth, small_spec):
    for name in GENERATED_FILES:
        assert (synth_dir / name).is_file()
    assert ground_truth.n_people == small_spec.n_people
    assert ground_truth.features == tuple(name for name, _ in DEFAULT_PLANTED)
    assert read_ground_truth(synth_dir / "ground_truth.csv") == dict(DEFAULT_PLANTED)


def test_generated_files_pass_ingest(small_inputs, small_spec):
    assert len(small_inputs.profiles) == small_spec.n_people
    assert len(small_inputs.counties) == small_spec.n_counties
    assert small_inputs.stations["station_id"].nunique() == small_spec.n_stations
    days = {}
    for entry in small_inputs.diaries:
        key = (entry.person_id, entry.date)
        days[key] = days.get(key, 0) + entry.duration_min
    assert set(days.values()) == {1440}


def test_positive_rate_is_near_one_half(ground_truth, small_inputs):
    assert 0.3 <= ground_truth.positive_rate <= 0.7
    labelled = [p for p in small_inputs.profiles if p.asthma is not TriState.unknown]
    positives = sum(p.asthma is TriState.yes for p in labelled)
    assert 0.3 <= positives / len(labelled) <= 0.7


def test_same_seed_gives_identical_files(tmp_path):
    spec = _tiny(seed=21)
    generate(spec, tmp_path / "a")
    generate(spec, tmp_path / "b")
    for name in GENERATED_FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_argument_overrides_the_spec(tmp_path):
    spec = _tiny(seed=1)
    generate(spec, tmp_path / "a", seed=2)
    generate(_tiny(seed=2), tmp_path / "b")
    assert (tmp_path / "a" / "profiles.csv").read_bytes() == (
        tmp_path / "b" / "profiles.csv"
    ).read_bytes()


def test_seed_is_required(tmp_path):
    with pytest.raises(ConfigError):
        generate(_tiny(), tmp_path)


def test_unknown_planted_feature(tmp_path):
    with pytest.raises(UnknownPlantedFeature):
        generate(_tiny(planted=(("FP_shoe_size", 1.0),), seed=1), tmp_path)


def test_planted_names_are_generated_columns():
    columns = generated_columns()
    assert all(name in columns for name, _ in DEFAULT_PLANTED)
    assert "FA_o3_min_m12" in columns


def test_exercise_signal_shows_in_group_means(tmp_path):
    spec = _tiny(n_people=400, planted=(("FP_t_exercise", 3.0),), noise_scale=0.0, seed=5)
    generate(spec, tmp_path)
    inputs = _load(tmp_path)
    vectors = compute_person_vectors(inputs, inputs.profiles, spec.years)
    exercise = {
        state: [
            vectors.personal[p.person_id]["FP_t_exercise"]
            for p in inputs.profiles
            if p.asthma is state
        ]
        for state in (TriState.yes, TriState.no)
    }
    assert np.mean(exercise[TriState.yes]) > np.mean(exercise[TriState.no])


def test_zero_coefficients_give_coin_flips(tmp_path):
    planted = tuple((name, 0.0) for name, _ in DEFAULT_PLANTED)
    truth = generate(_tiny(n_people=600, planted=planted, seed=9), tmp_path)
    assert abs(truth.positive_rate - 0.5) < 0.08


def test_load_synth_spec_reads_key_value_files(tmp_path):
    path = tmp_path / "synth.env"
    path.write_text(
        "N_PEOPLE=300\nPLANTED=FP_age:-1.5, FE_Coal:2\nSEED=4\n", encoding="utf-8"
    )
    spec = load_synth_spec(path, n_counties=5)
    assert spec.n_people == 300
    assert spec.n_counties == 5
    assert spec.planted == (("FP_age", -1.5), ("FE_Coal", 2.0))
    assert spec.seed == 4


@pytest.mark.parametrize(
    "content",
    ["N_PEOPLE=5\n", "COLOR=blue\n", "PLANTED=FP_age:1,FP_age:2\n", "PLANTED=FP_age:inf\n"],
)
def test_load_synth_spec_rejects(tmp_path, content):
    path = tmp_path / "synth.env"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_synth_spec(path)


def test_load_synth_spec_missing_file(tmp_path):
    with pytest.raises(MissingInputFile):
        load_synth_spec(tmp_path / "absent.env")
