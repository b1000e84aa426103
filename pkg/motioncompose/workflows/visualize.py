# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import json
import os
from typing import Callable, Dict, List, Optional

import numpy as np

from motioncompose.composer.common import CompositionSpec, load_spec
from motioncompose.composer.fusion import synergistic_fusion
from motioncompose.composer.latent import latent_conjunction
from motioncompose.diffusion.guidance import cfg_score
from motioncompose.diffusion.sampler import sample
from motioncompose.evaluation.energy_grid import (
    EnergyGrid, Plane, coordinate_plane, energy_grid, grid_correlation, pca_plane, save_grid_csv,
)
from motioncompose.toymotion.common import FAMILY_MODES, MOTION_DIM, ConceptDescription, ConceptFamily, ConceptToken
from motioncompose.utils.errors import InvalidInputError
from motioncompose.utils.plotting import plot_energy_grid
from motioncompose.workflows.common import RunConfig
from motioncompose.workflows.sampling import _GenerationWorkflow


def unrelated_description(desc: ConceptDescription) -> ConceptDescription:
    """A single-token description sharing no family with `desc`, or another mode of its first family."""
    used = {token.family for token in desc.tokens}
    for family in ConceptFamily:
        if family not in used:
            return ConceptDescription((ConceptToken(family, FAMILY_MODES[family][0]),))
    first = desc.tokens[0]
    other = [mode for mode in FAMILY_MODES[first.family] if mode != first.mode][0]
    return ConceptDescription((ConceptToken(first.family, other),))


class VisualizeWorkflow(_GenerationWorkflow):
    """Energy grids of the conjunction, joint-description, unrelated-concept and fused scores on one slice."""
    name: str = "visualize"

    def __init__(
        self, config: RunConfig, spec_path: str, checkpoint: Optional[str] = None, out_dir: Optional[str] = None,
    ) -> None:
        super().__init__(config, checkpoint, out_dir if out_dir is not None else config.viz.output_dir)
        self._spec: CompositionSpec = load_spec(spec_path)
        if self._spec.joint_desc is None:
            raise InvalidInputError("Energy grids need a joint description in the spec")
        if not 0 <= config.viz.t < self._generator.schedule.T:
            raise InvalidInputError(f"viz.t should be in [0, {self._generator.schedule.T}) but {config.viz.t} was given")

    def _state_shape(self) -> tuple:
        if self._generator.denoiser.substrate == "latent":
            return (1,) + self._generator.vae.latent_shape
        return (1, self._spec.length, MOTION_DIM)

    def _trajectory(self) -> Dict[int, np.ndarray]:
        """States visited by one fused sampling chain, keyed by the step index that produced them."""
        states: Dict[int, np.ndarray] = {}
        denoiser, spec = self._generator.denoiser, self._spec
        sample(
            lambda z_t, t: synergistic_fusion(denoiser, z_t, t, spec), spec.sampler, self._generator.schedule,
            self._state_shape(), on_step=lambda i, x: states.__setitem__(i, x.copy()),
        )
        return states

    def _plane(self, states: Dict[int, np.ndarray]) -> Plane:
        viz = self._config.viz
        nearest = min(states, key=lambda i: abs(i - viz.t))
        anchor = states[nearest]
        if viz.plane == "pca":
            return pca_plane(anchor, list(states.values()))
        return coordinate_plane(anchor, (0,) + tuple(viz.coordinates[0]), (0,) + tuple(viz.coordinates[1]))

    def _score_fns(self) -> Dict[str, Callable[[np.ndarray, int], np.ndarray]]:
        denoiser, spec = self._generator.denoiser, self._spec
        w = spec.sampler.guidance_weight
        joint = denoiser.embedder.embed(spec.joint_desc)
        unrelated = denoiser.embedder.embed(unrelated_description(spec.joint_desc))
        return {
            "conjunction": lambda z, t: latent_conjunction(denoiser, z, t, spec.conjoin_terms),
            "joint": lambda z, t: cfg_score(denoiser, z, t, joint, w),
            "unrelated": lambda z, t: cfg_score(denoiser, z, t, unrelated, w),
            "fused": lambda z, t: synergistic_fusion(denoiser, z, t, spec),
        }

    def run(self) -> Dict:
        viz = self._config.viz
        os.makedirs(self._out_dir, exist_ok=True)
        plane = self._plane(self._trajectory())

        grids: Dict[str, EnergyGrid] = {}
        outputs: Dict[str, List[str]] = {}
        for name, score_fn in self._score_fns().items():
            grid = energy_grid(
                score_fn, plane, viz.t, tuple(viz.resolution), viz.extent, viz.smoothing, viz.num_parallel,
                show_progress=True,
            )
            grids[name] = grid
            csv_path = os.path.join(self._out_dir, f"energy_{name}.csv")
            save_grid_csv(grid, csv_path)
            svg_path = plot_energy_grid(grid, os.path.join(self._out_dir, f"energy_{name}.svg"), title=f"{name} ({plane.label})")
            outputs[name] = [csv_path, svg_path]

        correlations = {
            "conjunction~joint": grid_correlation(grids["conjunction"], grids["joint"]),
            "conjunction~unrelated": grid_correlation(grids["conjunction"], grids["unrelated"]),
            "fused~joint": grid_correlation(grids["fused"], grids["joint"]),
        }
        report = {"t": viz.t, "plane": plane.label, "correlations": correlations, "outputs": outputs}
        with open(os.path.join(self._out_dir, "energy_report.json"), "w", encoding="utf-8") as fout:
            json.dump(report, fout, indent=2, sort_keys=True)
        self._logger.info(f"Energy grid correlations: {correlations}", tag=self.name)
        return report
