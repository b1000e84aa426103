# Copyright (c) Microsoft Corporation.
# Licensed under the MIT license.

import importlib
import os
import pathlib
from typing import Any, Optional

import yaml
from dotenv import load_dotenv

from motioncompose.utils.errors import ConfigError


def load_dot_env(env_path: Optional[str] = None) -> bool:
    """Load `LOG_LEVEL` from a dot env file. A missing default file is not an error."""
    if env_path is None:
        repo_path = pathlib.Path(os.path.abspath(__file__)).parent.parent.parent
        env_path = os.path.join(repo_path, "env_configs/.env")
        if not os.path.exists(env_path):
            return False

    load_success: bool = load_dotenv(env_path)
    if not load_success:
        raise ConfigError(f"Failed to load dot env file: {env_path}")
    return load_success


def load_yaml_config(config_path: str) -> dict:
    try:
        with open(config_path, "r", encoding="utf-8") as fin:
            yaml_config = yaml.safe_load(fin)
    except OSError as e:
        raise ConfigError(f"Cannot read config {config_path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {config_path}: {e}")

    if yaml_config is None:
        yaml_config = {}
    if not isinstance(yaml_config, dict):
        raise ConfigError(f"Config {config_path} should be a mapping at the top level")
    return yaml_config


def load_constant(module_path: str, variable_name: str) -> Any:
    try:
        target_module = importlib.import_module(module_path)
    except ImportError as e:
        raise ConfigError(f"Cannot import {module_path}: {e}")
    if not hasattr(target_module, variable_name):
        raise ConfigError(f"{module_path} has no attribute {variable_name}")
    return getattr(target_module, variable_name)


def load_class(module_path: str, class_name: str, base_class: type = None) -> type:
    loaded_class = load_constant(module_path, class_name)
    if base_class is not None:
        assert issubclass(loaded_class, base_class), (
            f"Class expected to be sub-class of {base_class.__name__} but {loaded_class.__name__} loaded."
        )
    return loaded_class
