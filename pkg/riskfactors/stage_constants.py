from enum import Enum


class STAGE_ID(str, Enum):
    """
    Enum containing every pipeline stage, named as its CLI subcommand.
    """

    synth = "synth"
    featurize = "featurize"
    rank = "rank"
    evaluate = "evaluate"
    run_all = "run-all"


class INPUT_FILE(str, Enum):
    """
    Default file names of the pipeline inputs inside the input directory.
    """

    profiles = "profiles.csv"
    diaries = "diaries.csv"
    emissions = "emissions.csv"
    stations = "stations.csv"
    counties = "counties.csv"
    category_map = "category_map.csv"
    ground_truth = "ground_truth.csv"


class STAGE_OUTPUT(str, Enum):
    """
    Artifacts written to the output directory.
    """

    features = "features.csv"
    model = "model.txt"
    ranking = "ranking.csv"
    importance = "importance.svg"
    metrics = "metrics.json"
    roc = "roc.csv"
    run_log = "run.log"
