"""
Flat text format for boosted models.

Header lines are ``key<TAB>value``; every tree starts with a ``tree`` line
followed by one ``node`` line per node::

    node  id  kind  feature  threshold  missing  value  gain  left  right  n_rows

Optional ``search<TAB>key<TAB>value`` lines record the settings of the grid
search that produced the model. Floats are written with ``repr`` so a save/load
round trip is exact.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from riskfactors.errors import MalformedArtifact, MissingInputFile
from riskfactors.model.gbt import GbtModel, GbtParams
from riskfactors.model.tree import LEAF, RegressionTree
from riskfactors.stage_lib import atomic_write

log = logging.getLogger(__name__)

FORMAT_TAG = "riskfactors-gbt-1"


def _float(value: float) -> str:
    return repr(float(value))


def save_model(
    model: GbtModel,
    path: Union[str, Path],
    search: Optional[Mapping[str, str]] = None,
) -> None:
    lines: List[str] = [
        f"format\t{FORMAT_TAG}",
        f"base_score\t{_float(model.base_score)}",
        f"shrinkage\t{_float(model.params.shrinkage)}",
        f"max_depth\t{model.params.max_depth}",
        f"n_trees\t{model.params.n_trees}",
        f"min_samples_leaf\t{model.params.min_samples_leaf}",
        f"degenerate\t{int(model.degenerate)}",
        "columns\t" + "\t".join(model.column_names),
        "loss_curve\t" + "\t".join(_float(v) for v in model.loss_curve),
    ]
    for key, value in sorted((search or {}).items()):
        lines.append(f"search\t{key}\t{value}")
    for index, tree in enumerate(model.trees):
        lines.append(f"tree\t{index}\t{tree.n_nodes}")
        for node in range(tree.n_nodes):
            kind = "leaf" if tree.feature[node] == LEAF else "split"
            lines.append(
                "\t".join(
                    [
                        "node",
                        str(node),
                        kind,
                        str(int(tree.feature[node])),
                        _float(tree.threshold[node]),
                        "L" if tree.missing_left[node] else "R",
                        _float(tree.value[node]),
                        _float(tree.gain[node]),
                        str(int(tree.left[node])),
                        str(int(tree.right[node])),
                        str(int(tree.n_rows[node])),
                    ]
                )
            )
    with atomic_write(Path(path)) as handle:
        handle.write("\n".join(lines) + "\n")
    log.debug(f"Saved model with {len(model.trees)} trees to {path}")


def _tree(rows: List[List[str]]) -> RegressionTree:
    return RegressionTree(
        feature=np.array([int(r[3]) for r in rows], dtype=np.int64),
        threshold=np.array([float(r[4]) for r in rows], dtype=np.float64),
        missing_left=np.array([r[5] == "L" for r in rows], dtype=bool),
        value=np.array([float(r[6]) for r in rows], dtype=np.float64),
        gain=np.array([float(r[7]) for r in rows], dtype=np.float64),
        left=np.array([int(r[8]) for r in rows], dtype=np.int64),
        right=np.array([int(r[9]) for r in rows], dtype=np.int64),
        n_rows=np.array([int(r[10]) for r in rows], dtype=np.int64),
    )


def load_model(path: Union[str, Path]) -> GbtModel:
    """Read a model written by ``save_model``."""
    return load_model_with_search(path)[0]


def load_model_with_search(path: Union[str, Path]) -> Tuple[GbtModel, Dict[str, str]]:
    """
    Read a model written by ``save_model`` together with its search settings
    (empty when none were saved).

    Raises:
        MissingInputFile: no file at ``path``.
        MalformedArtifact: the content does not follow the format.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputFile(path, role="model")
    header: Dict[str, List[str]] = {}
    search: Dict[str, str] = {}
    trees: List[RegressionTree] = []
    pending: List[List[str]] = []
    expected = 0
    try:
        for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            fields = line.split("\t")
            key = fields[0]
            if key == "tree":
                if len(pending) != expected:
                    raise ValueError(f"line {number}: previous tree is incomplete")
                if pending:
                    trees.append(_tree(pending))
                pending, expected = [], int(fields[2])
            elif key == "node":
                if len(fields) != 11 or int(fields[1]) != len(pending):
                    raise ValueError(f"line {number}: bad node record")
                pending.append(fields)
            elif key == "search":
                if len(fields) != 3:
                    raise ValueError(f"line {number}: bad search record")
                search[fields[1]] = fields[2]
            else:
                header[key] = fields[1:]
        if len(pending) != expected:
            raise ValueError("last tree is incomplete")
        if pending:
            trees.append(_tree(pending))
        if header.get("format") != [FORMAT_TAG]:
            raise ValueError(f"unknown format {header.get('format')}")
        columns = tuple(c for c in header["columns"] if c != "")
        params = GbtParams(
            max_depth=int(header["max_depth"][0]),
            n_trees=int(header["n_trees"][0]),
            shrinkage=float(header["shrinkage"][0]),
            min_samples_leaf=int(header["min_samples_leaf"][0]),
        )
        model = GbtModel(
            base_score=float(header["base_score"][0]),
            trees=tuple(trees),
            params=params,
            column_names=columns,
            degenerate=header["degenerate"][0] == "1",
            loss_curve=tuple(float(v) for v in header.get("loss_curve", []) if v != ""),
        )
    except (KeyError, IndexError, ValueError) as e:
        raise MalformedArtifact(f"{path}: {e}")
    log.debug(f"Loaded model with {len(trees)} trees from {path}")
    return model, search
