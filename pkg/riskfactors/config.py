"""
Run configuration.

A run is configured by a plain ``KEY=VALUE`` file plus command-line flags.
Flags win over the file and the file wins over the defaults below. Process
environment variables are never read, so a config file fully describes a run.
"""

import logging
from pathlib import Path
from typing import Annotated, Any, Dict, Optional, Tuple, Union

from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    NoDecode,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
)

from riskfactors.errors import ConfigError, MissingInputFile
from riskfactors.evaluation.ablation import DEFAULT_SUBSETS, DEFAULT_TOP_K
from riskfactors.evaluation.cross_validation import (
    DEFAULT_FOLDS,
    DEFAULT_GBT_DEPTHS,
    DEFAULT_GBT_TREES,
    DEFAULT_KNN_GRID,
)
from riskfactors.features.features import FAMILIES, parse_families
from riskfactors.model.tree import DEFAULT_MIN_SAMPLES_LEAF
from riskfactors.spatial.spatial import DEFAULT_K, DEFAULT_YEARS
from riskfactors.stage_constants import INPUT_FILE, STAGE_OUTPUT

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

IntList = Annotated[Tuple[int, ...], NoDecode]


def _split(value: Any, separator: str = ",") -> Any:
    if isinstance(value, str):
        return tuple(item.strip() for item in value.split(separator) if item.strip())
    return value


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(
        extra="forbid", case_sensitive=False, env_file_encoding="utf-8"
    )

    seed: int
    out_dir: Path = Path("out")
    input_dir: Optional[Path] = None
    profiles: Optional[Path] = None
    diaries: Optional[Path] = None
    emissions: Optional[Path] = None
    stations: Optional[Path] = None
    counties: Optional[Path] = None
    category_map: Optional[Path] = None
    synth_spec: Optional[Path] = None

    families: Annotated[Tuple[str, ...], NoDecode] = FAMILIES
    ablation_subsets: Annotated[Tuple[Tuple[str, ...], ...], NoDecode] = DEFAULT_SUBSETS
    gbt_depths: IntList = DEFAULT_GBT_DEPTHS
    gbt_trees: IntList = DEFAULT_GBT_TREES
    knn_grid: IntList = DEFAULT_KNN_GRID
    shrinkage: float = Field(default=0.1, gt=0.0, le=1.0)
    min_samples_leaf: int = Field(default=DEFAULT_MIN_SAMPLES_LEAF, ge=1)
    year_start: int = DEFAULT_YEARS[0]
    year_end: int = DEFAULT_YEARS[1]
    interpolation_k: int = Field(default=DEFAULT_K, ge=1)
    n_folds: int = Field(default=DEFAULT_FOLDS, ge=2)
    top_k: int = Field(default=DEFAULT_TOP_K, ge=1)

    @field_validator("families", mode="before")
    @classmethod
    def _parse_families(cls, value: Any) -> Tuple[str, ...]:
        return parse_families(value)

    @field_validator("ablation_subsets", mode="before")
    @classmethod
    def _parse_subsets(cls, value: Any) -> Tuple[Tuple[str, ...], ...]:
        subsets = _split(value, ";")
        if not subsets:
            raise ValueError("at least one ablation subset is required")
        return tuple(parse_families(subset) for subset in subsets)

    @field_validator("gbt_depths", "gbt_trees", "knn_grid", mode="before")
    @classmethod
    def _parse_grid(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("gbt_depths", "gbt_trees", "knn_grid")
    @classmethod
    def _check_grid(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("grid must not be empty")
        if min(value) < 1:
            raise ValueError("grid values must be positive")
        return value

    @model_validator(mode="after")
    def _check_years(self) -> "RunConfig":
        if self.year_start > self.year_end:
            raise ValueError(f"year range {self.year_start}-{self.year_end} is empty")
        return self

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, dotenv_settings

    @property
    def years(self) -> Tuple[int, int]:
        return self.year_start, self.year_end

    @property
    def resolved_input_dir(self) -> Path:
        return self.input_dir if self.input_dir is not None else self.out_dir / "inputs"

    def input_path(self, name: INPUT_FILE) -> Path:
        """Explicit path of an input file, else its default under the input directory."""
        explicit = getattr(self, name.name, None)
        return Path(explicit) if explicit is not None else self.resolved_input_dir / name.value

    def category_map_path(self) -> Optional[Path]:
        """Configured category map; None selects the shipped default."""
        if self.category_map is not None:
            return self.category_map
        candidate = self.resolved_input_dir / INPUT_FILE.category_map.value
        return candidate if candidate.is_file() else None

    def output_path(self, name: STAGE_OUTPUT) -> Path:
        return self.out_dir / name.value

    def ranking_search(self) -> Dict[str, str]:
        """Settings that determine the ranking model, as stored in ``model.txt``."""
        return {
            "seed": str(self.seed),
            "gbt_depths": ",".join(str(d) for d in sorted(set(self.gbt_depths))),
            "gbt_trees": ",".join(str(t) for t in sorted(set(self.gbt_trees))),
            "n_folds": str(self.n_folds),
            "shrinkage": repr(float(self.shrinkage)),
            "min_samples_leaf": str(self.min_samples_leaf),
        }


def load_config(path: Optional[PathLike] = None, **overrides: Any) -> RunConfig:
    """
    Build the run configuration from an optional file and flag overrides.

    Overrides that are None are ignored so unset flags fall through to the file.

    Raises:
        MissingInputFile: ``path`` does not exist.
        ConfigError: unknown key, invalid value or no seed.
    """
    if path is not None and not Path(path).is_file():
        raise MissingInputFile(path, role="config")
    values = {key: value for key, value in overrides.items() if value is not None}
    try:
        config = RunConfig(_env_file=path, **values)  # type: ignore[call-arg]
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration {path or ''}: {e}") from e
    log.debug(f"Loaded configuration: {config.model_dump()}")
    return config
