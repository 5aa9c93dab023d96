"""Positional and lexical bias in feature attributions."""

import json

from ._core import (
    SCHEMA_VERSION,
    DataError,
    Dataset,
    Model,
    NumericError,
    UsageError,
    bias_agg,
    bias_cons,
    default_config,
    explain,
    generate_dataset,
    ingest,
    js_distance,
    methods,
    parse_records,
    run_experiment as _run_experiment,
    select_topk,
    train,
)

__all__ = [
    "SCHEMA_VERSION",
    "DataError",
    "Dataset",
    "Model",
    "NumericError",
    "UsageError",
    "bias_agg",
    "bias_cons",
    "default_config",
    "explain",
    "generate_dataset",
    "ingest",
    "js_distance",
    "methods",
    "parse_records",
    "run_experiment",
    "select_topk",
    "train",
]


def run_experiment(config):
    """Run every stage. `config` is a dict or a JSON string."""
    if not isinstance(config, str):
        config = json.dumps(config)
    return _run_experiment(config)
