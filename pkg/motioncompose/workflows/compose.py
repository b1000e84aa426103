# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import dataclasses
import os
from typing import Dict, Optional

import jsonlines

from motioncompose.composer.common import CompositionSpec, load_spec, spec_to_dict
from motioncompose.composer.fusion import FusionDiagnostics
from motioncompose.composer.pipeline import temporal_pipeline
from motioncompose.composer.temporal import seam_transition_ratio
from motioncompose.evaluation.metrics.smoothness import transition_distance
from motioncompose.toymotion.common import ConceptDescription
from motioncompose.utils.errors import InvalidInputError
from motioncompose.utils.plotting import plot_motion
from motioncompose.workflows.common import RunConfig
from motioncompose.workflows.sampling import _GenerationWorkflow, write_motions


class ComposeWorkflow(_GenerationWorkflow):
    name: str = "compose"

    def __init__(
        self, config: RunConfig, spec_path: str, count: int = 1, checkpoint: Optional[str] = None,
        out_dir: str = "outputs", plot: bool = True, seed: Optional[int] = None,
    ) -> None:
        super().__init__(config, checkpoint, out_dir)
        self._spec: CompositionSpec = load_spec(spec_path)
        if seed is not None:
            self._spec = dataclasses.replace(self._spec, sampler=dataclasses.replace(self._spec.sampler, seed=seed))
        self._count: int = count
        self._plot: bool = plot
        self._logger.info(f"Composition spec {spec_path}: {spec_to_dict(self._spec)}", tag=self.name)

    def run(self) -> Dict:
        diagnostics = FusionDiagnostics()
        motions = self._generator.compose(self._spec, self._count, diagnostics)

        joint = self._spec.joint_desc if self._spec.joint_desc is not None else ConceptDescription()
        outputs = write_motions(motions, [joint] * len(motions), self._out_dir)
        outputs["diagnostics"] = os.path.join(self._out_dir, "diagnostics.jsonl")
        with jsonlines.open(outputs["diagnostics"], "w") as fout:
            fout.write_all(diagnostics.records)
        if self._plot:
            outputs["plot"] = plot_motion(motions, os.path.join(self._out_dir, "motions.svg"), title=joint.to_text())

        self._logger.info(
            f"Composed {len(motions)} motions over {len(diagnostics.records)} recorded steps: {outputs}", tag=self.name,
        )
        return {"count": len(motions), **outputs}


class StitchWorkflow(_GenerationWorkflow):
    """Two described segments generated jointly with an overlap correction (sequence substrate)."""
    name: str = "stitch"

    def __init__(
        self, config: RunConfig, first: str, second: str, length_1: int, length_2: int, overlap: int,
        count: int = 1, checkpoint: Optional[str] = None, out_dir: str = "outputs", plot: bool = True,
    ) -> None:
        super().__init__(config, checkpoint, out_dir)
        if self._generator.denoiser.substrate != "sequence":
            raise InvalidInputError("Stitching works on the sequence substrate only")
        self._segments = (ConceptDescription.from_text(first), ConceptDescription.from_text(second))
        self._lengths = (length_1, length_2)
        self._overlap: int = overlap
        self._count: int = count
        self._plot: bool = plot

    def run(self) -> Dict:
        generator = self._generator
        motions = temporal_pipeline(
            generator.denoiser, generator.schedule, self._segments[0], self._segments[1], self._lengths[0],
            self._lengths[1], self._overlap, generator.sampler, self._count,
        )
        ratios = [seam_transition_ratio(m.frames, self._lengths[0], self._overlap) for m in motions]
        transitions = [transition_distance(m) for m in motions]

        # Segment descriptions live in each motion's metadata.
        outputs = write_motions(motions, [ConceptDescription()] * len(motions), self._out_dir, stem="stitched")
        if self._plot:
            outputs["plot"] = plot_motion(motions, os.path.join(self._out_dir, "stitched.svg"))
        self._logger.info(
            f"Stitched {len(motions)} motions; seam/segment transition ratio {ratios}, transition {transitions}",
            tag=self.name,
        )
        return {"count": len(motions), "seam_ratios": ratios, "transition_distances": transitions, **outputs}
