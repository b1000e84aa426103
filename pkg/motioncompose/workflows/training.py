# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import os
from typing import Dict, List

from tabulate import tabulate

from motioncompose.denoiser.model import Denoiser
from motioncompose.diffusion.trainer import eps_mse, train_diffusion
from motioncompose.motion_vae.model import MotionVAE
from motioncompose.motion_vae.trainer import reconstruction_report, train_vae
from motioncompose.numerics.rng import make_rng, split_seed
from motioncompose.toymotion.dataset import MotionRecord, read_dataset
from motioncompose.utils.logger import Logger
from motioncompose.workflows.common import (
    BaseWorkflow, RunConfig, build_examples, load_vae, make_noise_schedule, save_denoiser, save_vae,
)
from motioncompose.workflows.dataset import make_eval_records


class _TrainingWorkflow(BaseWorkflow):
    def __init__(self, config: RunConfig) -> None:
        super().__init__(config)

        self._load_records()

        self._init_loss_table()

    def _load_records(self) -> None:
        header, self._records = read_dataset(self._config.dataset.path)
        self._logger.info(f"Loaded {header['count']} records from {self._config.dataset.path}", tag=self.name)

        if os.path.exists(self._config.dataset.eval_path):
            _, self._eval_records = read_dataset(self._config.dataset.eval_path)
        else:
            self._eval_records = make_eval_records(self._config)
        return

    def _init_loss_table(self) -> None:
        self._loss_logger = Logger(
            f"{self._config.experiment_name}.{self.name}.losses", dump_folder=self._config.log_dir, extension_name="csv",
        )
        self._loss_logger.debug("|".join(self._loss_columns()))
        return

    def _loss_columns(self) -> List[str]:
        return ["step", "loss", "lr", "grad_norm"]

    def _dump_losses(self, history: List[dict]) -> None:
        for record in history:
            self._loss_logger.debug("|".join(str(record[column]) for column in self._loss_columns()))
        return

    def close(self) -> None:
        self._loss_logger.close()
        super().close()


class TrainVaeWorkflow(_TrainingWorkflow):
    name: str = "train-vae"

    def _loss_columns(self) -> List[str]:
        return ["step", "loss", "reconstruction", "kl", "lr", "grad_norm"]

    def run(self) -> Dict:
        config = self._config
        vae = MotionVAE(config.profile, seed=split_seed(config.seed, "vae", "init"), dtype=config.precision)
        batch_rng = make_rng(config.vae.train.seed, "vae", "batches")
        history = train_vae(
            self._records, config.vae.train, vae, self._logger,
            log_path=os.path.join(config.log_dir, f"{config.experiment_name}.{self.name}.jsonl"),
            batch_rng=batch_rng,
        )
        self._dump_losses(history)

        report = reconstruction_report(vae, self._eval_records) if len(self._eval_records) > 0 else {}
        if len(report) > 0:
            table = tabulate([[name, f"{value:.5f}"] for name, value in report.items()], headers=["Channel", "SmoothL1"])
            self._logger.info(f"Held-out reconstruction over {len(self._eval_records)} motions:\n\n{table}\n", tag=self.name)

        digest = save_vae(vae, config.vae.checkpoint, config, step=len(history), rng=batch_rng)
        self._logger.info(f"Saved VAE checkpoint {config.vae.checkpoint} (sha256 {digest[:12]})", tag=self.name)
        return {
            "checkpoint": config.vae.checkpoint, "sha256": digest, "steps": len(history),
            "final_loss": history[-1]["loss"], "reconstruction": report,
        }


class TrainDiffusionWorkflow(_TrainingWorkflow):
    name: str = "train-diffusion"

    def run(self) -> Dict:
        config = self._config
        substrate = config.diffusion.substrate
        schedule = make_noise_schedule(config)
        denoiser = Denoiser(
            config.profile, substrate=substrate, num_steps=schedule.T,
            seed=split_seed(config.seed, "denoiser", "init"), dtype=config.precision,
        )

        vae = load_vae(config.vae.checkpoint) if substrate == "latent" else None
        examples = build_examples(self._records, denoiser, vae)
        held_out = build_examples(self._eval_records, denoiser, vae, fit_normalization=False)

        rng = make_rng(config.diffusion.train.seed, "diffusion", "train")
        history = train_diffusion(
            denoiser, examples, schedule, config.diffusion.train, self._logger,
            log_path=os.path.join(config.log_dir, f"{config.experiment_name}.{self.name}.jsonl"), rng=rng,
        )
        self._dump_losses(history)

        held_out_mse = eps_mse(denoiser, held_out, schedule, seed=config.seed) if len(held_out) > 0 else None
        if held_out_mse is not None:
            self._logger.info(f"Held-out ε-MSE: {held_out_mse:.6f}", tag=self.name)

        digest = save_denoiser(denoiser, config.diffusion.checkpoint, config, step=len(history), rng=rng)
        self._logger.info(f"Saved {substrate} denoiser checkpoint {config.diffusion.checkpoint} (sha256 {digest[:12]})", tag=self.name)
        return {
            "checkpoint": config.diffusion.checkpoint, "sha256": digest, "steps": len(history),
            "final_loss": history[-1]["loss"], "held_out_eps_mse": held_out_mse,
        }

