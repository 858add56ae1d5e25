"""Risk-sensitive adversarial imitation learning workbench.

Thin dict-friendly layer over the compiled core. Risk estimators take plain
lists; configs are nested dicts with the same five sections the CLI uses
(env, risk, algo, optimizer, run).
"""

import json

try:
    from riskimit._riskimit import (  # wheel layout: module inside the package
        __version__,
        cvar,
        cvar_dual,
        mean_cvar,
        resolve_config as _resolve_config,
        run_command as _run_command,
        self_check,
        value_at_risk,
    )
except ImportError:  # flat build-tree layout used by the ctest harness
    from _riskimit import (
        __version__,
        cvar,
        cvar_dual,
        mean_cvar,
        resolve_config as _resolve_config,
        run_command as _run_command,
        self_check,
        value_at_risk,
    )

__all__ = [
    "__version__",
    "cvar",
    "cvar_dual",
    "mean_cvar",
    "resolve_config",
    "run",
    "self_check",
    "value_at_risk",
]


def _override_pairs(overrides):
    pairs = []
    for key, value in overrides.items():
        pairs.append((key, value if isinstance(value, str) else json.dumps(value)))
    return pairs


def resolve_config(file_config=None, overrides=None, env_seed=None):
    """Resolved config dict: defaults <- file_config <- env_seed <- overrides.

    overrides maps dotted key paths ("risk.alpha") or the CLI shorthands
    (algo, seed, iterations, threads) to values.
    """
    resolved = _resolve_config(
        json.dumps(file_config or {}),
        _override_pairs(overrides or {}),
        env_seed,
    )
    return json.loads(resolved)


def run(command, config):
    """Runs one workbench command against a resolved config dict.

    Returns the exit status the CLI would have: 0 ok, 2 a training run
    diverged, 3 the verification suite failed. Config problems raise.
    """
    return _run_command(command, json.dumps(config))
