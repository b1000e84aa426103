# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import argparse
import dataclasses
import json
import sys
import traceback
from typing import Callable, Dict, List, Optional

from motioncompose.utils.config_loader import load_dot_env
from motioncompose.utils.errors import MotionComposeError
from motioncompose.workflows import (
    AugmentWorkflow, BaseWorkflow, ComposeWorkflow, EvaluateWorkflow, MakeDatasetWorkflow, SampleWorkflow,
    StitchWorkflow, TrainDiffusionWorkflow, TrainVaeWorkflow, VisualizeWorkflow,
)
from motioncompose.workflows.common import RunConfig, load_run_config


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="the path of the yaml run config")
    parser.add_argument("--seed", type=int, default=None, help="overrides the seed of the config and its sections")
    parser.add_argument("--env", type=str, default=None, help="the .env file to load, defaults to the repo's one")
    return


def _add_checkpoint_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", type=str, default=None, help="denoiser checkpoint, defaults to the config's")
    return


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motioncompose", description="Compositional motion generation with energy-based latent diffusion.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    sub = subparsers.add_parser("make-dataset", help="synthesize the toy motion dataset and its eval split")
    _add_common_args(sub)
    sub.add_argument("--out", type=str, default=None, help="dataset path, defaults to dataset.path")

    sub = subparsers.add_parser("train-vae", help="train the motion VAE")
    _add_common_args(sub)

    sub = subparsers.add_parser("train-diffusion", help="train the latent or sequence denoiser")
    _add_common_args(sub)

    sub = subparsers.add_parser("sample", help="generate motions for one description")
    _add_common_args(sub)
    _add_checkpoint_arg(sub)
    sub.add_argument("--description", type=str, required=True, help='e.g. "direction:+x@1.0 left-limb:wave@0.8"')
    sub.add_argument("--count", type=int, default=1)
    sub.add_argument("--length", type=int, default=None)
    sub.add_argument("--out-dir", type=str, default="outputs")
    sub.add_argument("--no-plot", action="store_true", help="skip the SVG trajectory plot")

    sub = subparsers.add_parser("compose", help="generate motions from a composition spec file")
    _add_common_args(sub)
    _add_checkpoint_arg(sub)
    sub.add_argument("--spec", type=str, required=True, help="the yaml composition spec")
    sub.add_argument("--count", type=int, default=1)
    sub.add_argument("--out-dir", type=str, default="outputs")
    sub.add_argument("--no-plot", action="store_true")

    sub = subparsers.add_parser("stitch", help="generate two described segments joined over an overlap")
    _add_common_args(sub)
    _add_checkpoint_arg(sub)
    sub.add_argument("--first", type=str, required=True)
    sub.add_argument("--second", type=str, required=True)
    sub.add_argument("--length-1", type=int, default=80)
    sub.add_argument("--length-2", type=int, default=80)
    sub.add_argument("--overlap", type=int, default=20)
    sub.add_argument("--count", type=int, default=1)
    sub.add_argument("--out-dir", type=str, default="outputs")
    sub.add_argument("--no-plot", action="store_true")

    sub = subparsers.add_parser("evaluate", help="run the metric suite over the configured protocol")
    _add_common_args(sub)
    _add_checkpoint_arg(sub)
    sub.add_argument("--protocol", type=str, choices=["single", "conjunction", "negation"], default=None)
    sub.add_argument("--out-dir", type=str, default=None)

    sub = subparsers.add_parser("visualize", help="energy grids of the composition branches on a 2-D slice")
    _add_common_args(sub)
    _add_checkpoint_arg(sub)
    sub.add_argument("--spec", type=str, required=True)
    sub.add_argument("--out-dir", type=str, default=None)

    sub = subparsers.add_parser("augment", help="compose multi-concept data and finetune the denoiser on it")
    _add_common_args(sub)
    _add_checkpoint_arg(sub)
    sub.add_argument("--count", type=int, default=None)
    sub.add_argument("--out-dataset", type=str, default=None)
    sub.add_argument("--out-checkpoint", type=str, default=None)

    return parser


def _with_protocol(config: RunConfig, protocol: Optional[str]) -> RunConfig:
    if protocol is None:
        return config
    return dataclasses.replace(config, evaluation=dataclasses.replace(config.evaluation, protocol=protocol))


WORKFLOW_BUILDERS: Dict[str, Callable[[RunConfig, argparse.Namespace], BaseWorkflow]] = {
    "make-dataset": lambda config, args: MakeDatasetWorkflow(config, args.out),
    "train-vae": lambda config, args: TrainVaeWorkflow(config),
    "train-diffusion": lambda config, args: TrainDiffusionWorkflow(config),
    "sample": lambda config, args: SampleWorkflow(
        config, args.description, args.count, args.checkpoint, args.out_dir, args.length, not args.no_plot,
    ),
    "compose": lambda config, args: ComposeWorkflow(
        config, args.spec, args.count, args.checkpoint, args.out_dir, not args.no_plot, args.seed,
    ),
    "stitch": lambda config, args: StitchWorkflow(
        config, args.first, args.second, args.length_1, args.length_2, args.overlap, args.count, args.checkpoint,
        args.out_dir, not args.no_plot,
    ),
    "evaluate": lambda config, args: EvaluateWorkflow(
        _with_protocol(config, args.protocol), args.checkpoint, args.out_dir,
    ),
    "visualize": lambda config, args: VisualizeWorkflow(config, args.spec, args.checkpoint, args.out_dir),
    "augment": lambda config, args: AugmentWorkflow(
        config, args.checkpoint, args.count, args.out_dataset, args.out_checkpoint,
    ),
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    workflow: Optional[BaseWorkflow] = None
    try:
        load_dot_env(args.env)
        config = load_run_config(args.config, args.seed)
        workflow = WORKFLOW_BUILDERS[args.command](config, args)
        result = workflow.run()
    except MotionComposeError as e:
        print(f"[{args.command}] {type(e).__name__}: {e}", file=sys.stderr)
        if workflow is not None:
            workflow.logger.debug(traceback.format_exc(), tag=args.command)
        return e.exit_code
    finally:
        if workflow is not None:
            workflow.close()

    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
