import logging
import os
import tempfile
from abc import ABC, abstractmethod
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import IO, TYPE_CHECKING, Iterator, List, Optional

from pydantic import BaseModel, Field

from riskfactors.errors import RiskFactorError

if TYPE_CHECKING:
    from riskfactors.config import RunConfig

log = logging.getLogger(__name__)


class StageStatus(str, Enum):
    READY = "ready"
    ERROR = "error"


class StageResponse(BaseModel):
    """Outcome of one stage run, handed back to the runner."""

    stage_id: str
    status: StageStatus
    detail: str = ""
    outputs: List[Path] = Field(default_factory=list)
    exit_code: int = 0


class StageInterface(ABC):
    """
    Base class for every pipeline stage.

    A stage is constructed with the resolved run configuration and performs
    its work in ``run``. Stages never raise to the caller: errors from the
    pipeline are converted into an ERROR response carrying the exit code of
    the exception class.
    """

    def __init__(self, config: "RunConfig", stage_id: str) -> None:
        self.config = config
        self.stage_id = stage_id

    @abstractmethod
    async def run(self) -> StageResponse:
        """Execute the stage and report what was written."""

    async def execute(self) -> StageResponse:
        """Run the stage, turning any failure into an ERROR response."""
        log.info(f"[{self.stage_id}] starting")
        try:
            return await self.run()
        except RiskFactorError as e:
            log.error(f"[{self.stage_id}] {type(e).__name__}: {e}")
            return self.failed(e, e.exit_code)
        except Exception as e:
            log.error(f"[{self.stage_id}] internal error: {e}", exc_info=True)
            return self.failed(e, RiskFactorError.exit_code)

    def ready(self, detail: str, outputs: List[Path]) -> StageResponse:
        log.info(f"[{self.stage_id}] {detail}")
        return StageResponse(
            stage_id=self.stage_id,
            status=StageStatus.READY,
            detail=detail,
            outputs=outputs,
        )

    def failed(self, error: Exception, exit_code: int) -> StageResponse:
        return StageResponse(
            stage_id=self.stage_id,
            status=StageStatus.ERROR,
            detail=str(error),
            exit_code=exit_code,
        )


@contextmanager
def atomic_write(path: Path, binary: bool = False) -> Iterator[IO]:
    """
    Open a temporary file next to ``path`` and move it into place on success.

    Readers never observe a partially written output; on error the temporary
    file is removed and ``path`` keeps its previous content.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    handle: Optional[IO] = None
    try:
        if binary:
            handle = os.fdopen(fd, "wb")
        else:
            handle = os.fdopen(fd, "w", encoding="utf-8", newline="")
        yield handle
        handle.close()
        os.replace(tmp_name, path)
    except BaseException:
        if handle is not None and not handle.closed:
            handle.close()
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
