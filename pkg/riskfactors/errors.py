"""
Exception hierarchy shared by every pipeline stage.

Each class carries the process exit code the runner reports for it:
1 for bad configuration or missing input, 2 for data that fails validation,
3 for anything else.
"""

from typing import Any, Optional


class RiskFactorError(Exception):
    """Base class for all errors raised by the risk factor pipeline."""

    exit_code: int = 3


class ConfigError(RiskFactorError):
    """Invalid configuration or unreadable input location."""

    exit_code = 1


class MissingInputFile(ConfigError):
    def __init__(self, path: Any, role: str = "input") -> None:
        self.path = path
        super().__init__(f"Missing {role} file: {path}")


class EmptyRange(ConfigError):
    def __init__(self, start: int, end: int) -> None:
        super().__init__(f"Year range {start}-{end} is empty")


class UnknownPlantedFeature(ConfigError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"Planted feature '{name}' is not a generated column")


class DataValidationError(RiskFactorError):
    """Input data violates a schema or domain invariant."""

    exit_code = 2


class MissingHeader(DataValidationError):
    def __init__(self, path: Any, missing: list[str]) -> None:
        self.path = path
        self.missing = missing
        detail = ", ".join(missing) if missing else "no header row"
        super().__init__(f"{path}: header does not match schema ({detail})")


class UnreadableTable(DataValidationError):
    """The file is not UTF-8 CSV that can be tokenized."""

    def __init__(self, path: Any, reason: str) -> None:
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: unreadable CSV ({reason})")


class MalformedRow(DataValidationError):
    def __init__(
        self,
        row_index: int,
        column: str,
        value: Optional[str] = None,
        reason: str = "malformed value",
    ) -> None:
        self.row_index = row_index
        self.column = column
        self.value = value
        super().__init__(
            f"Row {row_index} column '{column}': {reason} (value={value!r})"
        )


class FlagOutOfRange(MalformedRow):
    def __init__(self, row_index: int, column: str, value: Optional[str]) -> None:
        super().__init__(row_index, column, value, reason="flag must be 0 or 1")


class NonPositiveDuration(MalformedRow):
    def __init__(self, row_index: int, value: Optional[str]) -> None:
        super().__init__(
            row_index, "duration_min", value, reason="duration must be >= 1 minute"
        )


class UnknownCategory(MalformedRow):
    def __init__(self, row_index: int, value: Optional[str]) -> None:
        super().__init__(
            row_index, "category", value, reason="not an emission factor category"
        )


class UnknownFactor(MalformedRow):
    def __init__(self, row_index: int, value: Optional[str]) -> None:
        super().__init__(
            row_index, "factor", value, reason="not an environmental factor"
        )


class CoordinateOutOfRange(MalformedRow):
    def __init__(self, row_index: int, column: str, value: Optional[str]) -> None:
        super().__init__(row_index, column, value, reason="coordinate out of range")


class DuplicatePersonId(DataValidationError):
    def __init__(self, person_id: str) -> None:
        self.person_id = person_id
        super().__init__(f"Duplicate person_id {person_id}")


class DuplicateRecord(DataValidationError):
    def __init__(self, what: str, key: Any) -> None:
        self.key = key
        super().__init__(f"Duplicate {what} {key}")


class NoPositives(DataValidationError):
    def __init__(self, detail: str = "no positive labels") -> None:
        super().__init__(detail)


class InsufficientNegatives(DataValidationError):
    def __init__(self, positives: int, negatives: int) -> None:
        super().__init__(
            f"Need at least {positives} negatives to balance, found {negatives}"
        )


class EmptyDiary(DataValidationError):
    def __init__(self, person_id: Optional[str] = None) -> None:
        super().__init__(f"No diary entries for person {person_id}")


class TooFewPerClass(DataValidationError):
    def __init__(self, n_folds: int, counts: dict[int, int]) -> None:
        super().__init__(f"Cannot build {n_folds} folds from class counts {counts}")


class MalformedArtifact(DataValidationError):
    """A file written by an earlier stage cannot be read back."""


class MixedFactorInput(RiskFactorError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"Readings span several dates or factors: {detail}")


class SingleClass(RiskFactorError):
    def __init__(self) -> None:
        super().__init__("Both classes must be present")


class TooFewRows(RiskFactorError):
    def __init__(self, n_rows: int, minimum: int) -> None:
        super().__init__(f"Need at least {minimum} rows, got {n_rows}")


class WidthMismatch(RiskFactorError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"Row width {got} does not match model width {expected}")


class KTooLarge(RiskFactorError):
    def __init__(self, k: int, n_train: int) -> None:
        self.k = k
        super().__init__(f"K={k} exceeds {n_train} training rows")


class NotFitted(RiskFactorError):
    def __init__(self) -> None:
        super().__init__("Model must be fitted before predicting")


class GridSearchFailed(RiskFactorError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"Every grid cell failed: {detail}")
