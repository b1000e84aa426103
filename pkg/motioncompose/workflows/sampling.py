# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import os
from typing import Dict, List, Optional

import jsonlines

from motioncompose.toymotion.common import ConceptDescription, MotionSequence
from motioncompose.toymotion.dataset import MotionRecord, write_dataset
from motioncompose.utils.plotting import plot_motion
from motioncompose.workflows.common import BaseWorkflow, RunConfig, checkpoint_schedule, load_denoiser, load_vae
from motioncompose.workflows.generation import MotionGenerator


def write_motions(
    motions: List[MotionSequence], descriptions: List[ConceptDescription], out_dir: str, stem: str = "motions",
) -> Dict[str, str]:
    """Binary motion file (dataset format) plus a jsonlines twin carrying frames and metadata."""
    os.makedirs(out_dir, exist_ok=True)
    binary_path = os.path.join(out_dir, f"{stem}.tmot")
    jsonl_path = os.path.join(out_dir, f"{stem}.jsonl")
    write_dataset([MotionRecord(m, desc) for m, desc in zip(motions, descriptions)], binary_path)
    with jsonlines.open(jsonl_path, "w") as fout:
        for m, desc in zip(motions, descriptions):
            fout.write({"description": desc.to_text(), **m.as_dict()})
    return {"motions": binary_path, "jsonl": jsonl_path}


class _GenerationWorkflow(BaseWorkflow):
    def __init__(self, config: RunConfig, checkpoint: Optional[str] = None, out_dir: str = "outputs") -> None:
        super().__init__(config)
        self._checkpoint: str = checkpoint if checkpoint is not None else config.diffusion.checkpoint
        self._out_dir: str = out_dir

        self._init_generator()

    def _init_generator(self) -> None:
        denoiser, ckpt = load_denoiser(self._checkpoint)
        vae = load_vae(self._config.vae.checkpoint) if denoiser.substrate == "latent" else None
        self._generator = MotionGenerator(denoiser, checkpoint_schedule(ckpt), self._config.sampler, vae)
        self._logger.info(
            f"Loaded {denoiser.substrate} denoiser from {self._checkpoint} (trained {ckpt.step} steps)", tag=self.name,
        )
        return


class SampleWorkflow(_GenerationWorkflow):
    name: str = "sample"

    def __init__(
        self, config: RunConfig, description: str, count: int = 1, checkpoint: Optional[str] = None,
        out_dir: str = "outputs", length: Optional[int] = None, plot: bool = True,
    ) -> None:
        super().__init__(config, checkpoint, out_dir)
        self._description: ConceptDescription = ConceptDescription.from_text(description)
        self._count: int = count
        self._length: int = length if length is not None else config.composition.length
        self._plot: bool = plot

    def run(self) -> Dict:
        motions = self._generator.generate(self._description, self._count, self._config.sampler.seed, self._length)
        outputs = write_motions(motions, [self._description] * len(motions), self._out_dir)
        if self._plot:
            outputs["plot"] = plot_motion(
                motions, os.path.join(self._out_dir, "motions.svg"), title=self._description.to_text(),
            )
        self._logger.info(f"Generated {len(motions)} motions for '{self._description.to_text()}': {outputs}", tag=self.name)
        return {"count": len(motions), **outputs}
