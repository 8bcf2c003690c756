import asyncio
import logging

from riskfactors.stage_lib import StageInterface, StageResponse
from riskfactors.synth.synth import generate, load_synth_spec

log = logging.getLogger(__name__)


class SynthStage(StageInterface):
    """Writes a synthetic input set into the run's input directory."""

    async def run(self) -> StageResponse:
        spec = load_synth_spec(self.config.synth_spec)
        # a seed in the spec file pins the dataset; otherwise the run seed is used
        seed = spec.seed if spec.seed is not None else self.config.seed
        out_dir = self.config.resolved_input_dir
        log.info(f"[{self.stage_id}] spec {self.config.synth_spec or 'defaults'}, seed {seed}")
        truth = await asyncio.to_thread(generate, spec, out_dir, seed)
        return self.ready(
            f"wrote {len(truth.files)} files for {truth.n_people} people to {out_dir} "
            f"(positive rate {truth.positive_rate:.3f})",
            list(truth.files),
        )
