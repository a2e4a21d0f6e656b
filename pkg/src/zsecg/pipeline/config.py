"""JSON run configuration; command-line flags override file values.

Keys mirror the long flag names with dashes turned into underscores, e.g.
``{"strategy": "da", "runs": 3, "gamma": 0.2}``.
"""

from __future__ import annotations

import json
from dataclasses import fields

from ..exceptions import InvalidArgument
from .datasets import StrategyConfig
from .experiment import ExperimentConfig


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise InvalidArgument(f"{path}: top level must be an object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def merge(file_values: dict, flag_values: dict) -> dict:
    """Flags that were given (not None) win over the file."""
    out = dict(file_values)
    out.update({k: v for k, v in flag_values.items() if v is not None})
    return out


def parse_seeds(value) -> tuple:
    """``"0..9"``, ``"0,3,5"``, an int count or a list."""
    if value is None:
        return tuple(range(10))
    if isinstance(value, int):
        return tuple(range(value))
    if isinstance(value, (list, tuple)):
        return tuple(int(s) for s in value)
    value = str(value).strip()
    if ".." in value:
        lo, hi = value.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in value.split(",") if s.strip())


def parse_patients(value, available) -> list | None:
    if value is None or value == "all":
        return None
    if isinstance(value, (list, tuple)):
        ids = [str(s) for s in value]
    else:
        ids = [s.strip() for s in str(value).split(",") if s.strip()]
    unknown = [i for i in ids if i not in available]
    if unknown:
        raise InvalidArgument(f"unknown patients: {unknown}")
    return ids


_STRATEGY_KEYS = {f.name for f in fields(StrategyConfig)}
_EXPERIMENT_KEYS = {f.name for f in fields(ExperimentConfig)} - {"strategy", "seeds"}


def experiment_config(values: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from merged key/value settings."""
    strat = {k: values[k] for k in _STRATEGY_KEYS if k in values and k != "kind"}
    strat["kind"] = values.get("strategy", "baseline")
    seeds = parse_seeds(values.get("seeds"))
    if values.get("runs") is not None:
        runs = int(values["runs"])
        seeds = seeds[:runs] if runs <= len(seeds) else tuple(range(runs))
    exp = {k: values[k] for k in _EXPERIMENT_KEYS if k in values}
    if "cascade_fractions" in exp:
        exp["cascade_fractions"] = tuple(exp["cascade_fractions"])
    return ExperimentConfig(strategy=StrategyConfig(**strat), seeds=seeds, **exp)
