"""
JSON configuration file with defaults for the fitness, GA and experiment
parameters. Command-line flags override anything read here.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    "fitness": {
        "lambda": 0.5,
        "alpha": 0.5,
    },
    "ga": {
        "population_size": 32,
        "elite_size": 4,
        "mutation_probability": 0.05,
        "max_flips": 3,
        "max_generations": 100,
        "stagnation_limit": 15,
        "rng_seed": 0,
        "workers": 1,
    },
    "experiment": {
        "trials": None,
        "sizes": None,
        "fill_factors": None,
        "workers": 1,
    },
}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return _is_int(value) or isinstance(value, float)


def _optional_list_of(check: Callable[[Any], bool]) -> Callable[[Any], bool]:
    return lambda value: value is None or (isinstance(value, list) and all(check(v) for v in value))


# Accepted JSON shape of every key, with the wording used in errors.
_VALUE_CHECKS: Dict[str, Dict[str, Tuple[Callable[[Any], bool], str]]] = {
    "fitness": {
        "lambda": (_is_number, "a number"),
        "alpha": (_is_number, "a number"),
    },
    "ga": {
        "population_size": (_is_int, "an integer"),
        "elite_size": (_is_int, "an integer"),
        "mutation_probability": (_is_number, "a number"),
        "max_flips": (_is_int, "an integer"),
        "max_generations": (_is_int, "an integer"),
        "stagnation_limit": (_is_int, "an integer"),
        "rng_seed": (_is_int, "an integer"),
        "workers": (_is_int, "an integer"),
    },
    "experiment": {
        "trials": (lambda value: value is None or _is_int(value), "an integer or null"),
        "sizes": (_optional_list_of(_is_int), "a list of integers or null"),
        "fill_factors": (_optional_list_of(_is_number), "a list of numbers or null"),
        "workers": (_is_int, "an integer"),
    },
}


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Dict[str, Any]]:
    """
    Load the configuration, filling anything missing from the defaults.

    :param path: JSON file; None returns the defaults.
    :return: Sections ``fitness``, ``ga`` and ``experiment``.
    :raises ValueError: if the file is not a JSON object of sections or a
        value has the wrong JSON type.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is None:
        return config

    path = Path(path)
    if not path.exists():
        logger.warning(f"Config file {path} not found, using defaults")
        return config

    with open(path, "r") as f:
        try:
            loaded = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(loaded, dict):
        raise ValueError(f"config file {path} must hold a JSON object")

    for section, values in loaded.items():
        if section not in config:
            logger.warning(f"Ignoring unknown config section '{section}'")
            continue
        if not isinstance(values, dict):
            raise ValueError(f"config section '{section}' must be a JSON object")
        for key, value in values.items():
            if key not in config[section]:
                logger.warning(f"Ignoring unknown config key '{section}.{key}'")
                continue
            check, expected = _VALUE_CHECKS[section][key]
            if not check(value):
                raise ValueError(f"config key '{section}.{key}' must be {expected}, got {value!r}")
            config[section][key] = value

    logger.debug(f"Loaded config from {path}")
    return config


def create_config_file(config_path: Union[str, Path] = "config.json") -> None:
    """
    Create a default configuration file.

    :param config_path: Path where to save the config file.
    :type config_path: str
    """
    with open(config_path, "w") as f:
        json.dump(DEFAULT_CONFIG, f, indent=2)
    logger.info(f"Created default config file at {config_path}")
