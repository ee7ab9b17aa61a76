"""Deterministic security pattern selection with agent-checked plans."""

import json

from . import _aspo
from ._aspo import (
    AspoError,
    Catalog,
    CatalogError,
    ConfigError,
    activation_order,
    exact_binomial_ci,
    fisher_exact_two_sided,
    ks_distance,
    load_catalog,
    load_catalog_text,
    risk_and_odds_ratio,
    spearman_rank,
)

__all__ = [
    "AspoError", "Catalog", "CatalogError", "ConfigError", "activation_order", "compare",
    "decide", "default_config", "encode_context", "exact_binomial_ci", "fisher_exact_two_sided",
    "ks_distance", "load_catalog", "load_catalog_text", "replay", "risk_and_odds_ratio",
    "select_portfolio", "spearman_rank", "summarize", "validate_plan",
]


def _config(config):
    return "" if config is None else json.dumps(config)


def default_config():
    return json.loads(_aspo.default_config())


def encode_context(telemetry, catalog, capabilities, config=None):
    return json.loads(_aspo.encode_context(json.dumps(telemetry), catalog, list(capabilities), _config(config)))


def select_portfolio(feasible, context, catalog, config=None):
    return json.loads(_aspo.select_portfolio(list(feasible), json.dumps(context), catalog, _config(config)))


def validate_plan(selected, order, feasible, context, catalog, config=None):
    """Gate verdict for a plan against the deterministic portfolio chosen from `feasible`."""
    return json.loads(_aspo.validate_plan(
        list(selected), list(order), list(feasible), json.dumps(context), catalog, _config(config)))


def decide(telemetry, catalog, node="node-02", epoch=0, backend="mock", seed=None, config=None):
    """Runs one decision epoch; returns (trace dict, human-readable log)."""
    trace, log = _aspo.decide(json.dumps(telemetry), catalog, node, epoch, backend, seed, _config(config))
    return json.loads(trace), log


def replay(dataset, catalog, workload=500, nodes=10, backend="mock", seed=None, config=None):
    text = _aspo.replay(str(dataset), catalog, workload, nodes, backend, seed, _config(config))
    return [json.loads(line) for line in text.splitlines() if line]


def summarize(records, catalog=None):
    return json.loads(_aspo.summarize(json.dumps(records), catalog))


def compare(records_a, records_b, catalog=None):
    return json.loads(_aspo.compare(json.dumps(records_a), json.dumps(records_b), catalog))
