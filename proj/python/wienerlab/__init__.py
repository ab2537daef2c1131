"""Wiener-space numerical experiments."""

import json
from pathlib import Path

from ._core import (
    ChaosExpansion,
    ConfigError,
    TransportPlan,
    __version__,
    brenier_map,
    det2,
    det2_product_residual,
    hermite,
    monge_ampere_residual,
    pool_from_csv,
    pool_to_csv,
    sample_pool,
    schema_version,
    solve_ot,
)
from . import _core


def list_experiments():
    return json.loads(_core.list_experiments())


def run(config, out_dir=None):
    """Run one experiment; `config` is a dict or a path to a JSON file. Returns the report dict."""
    if isinstance(config, (str, Path)):
        config = json.loads(Path(config).read_text())
    return json.loads(_core.run(json.dumps(config), None if out_dir is None else str(out_dir)))


__all__ = [
    "ChaosExpansion",
    "ConfigError",
    "TransportPlan",
    "__version__",
    "brenier_map",
    "det2",
    "det2_product_residual",
    "hermite",
    "list_experiments",
    "monge_ampere_residual",
    "pool_from_csv",
    "pool_to_csv",
    "run",
    "sample_pool",
    "schema_version",
    "solve_ot",
]
