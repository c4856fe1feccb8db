"""Implicit regularization experiments in matrix factorization.

Thin wrapper over the native core. Matrices are numpy arrays; experiment
configs and summaries are JSON.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    Ensemble,
    build_instance,
    completion_ensemble,
    diagonal_ensemble,
    eigh,
    expm_sym,
    factored_gd,
    gd_on_X,
    gen_completion,
    gen_diagonal,
    gen_gaussian,
    gen_planted,
    grad_f,
    gradient_flow_ode,
    gram_spectral_bound,
    identity_init,
    kkt_check,
    min_frobenius_solution,
    min_l1_nonneg,
    min_nuclear_psd,
    nuclear_norm,
    objective,
    outer,
    psd_project,
    random_init,
    time_ordered_exp_solve,
)

__all__ = [
    "ConfigError",
    "Ensemble",
    "build_instance",
    "completion_ensemble",
    "diagonal_ensemble",
    "eigh",
    "expm_sym",
    "factored_gd",
    "gd_on_X",
    "gen_completion",
    "gen_diagonal",
    "gen_gaussian",
    "gen_planted",
    "grad_f",
    "gradient_flow_ode",
    "gram_spectral_bound",
    "identity_init",
    "kkt_check",
    "min_frobenius_solution",
    "min_l1_nonneg",
    "min_nuclear_psd",
    "nuclear_norm",
    "objective",
    "outer",
    "psd_project",
    "random_init",
    "time_ordered_exp_solve",
    "run",
]

_FAMILIES = {"sweep": _core.run_sweep, "flow": _core.run_flow, "grid": _core.run_grid}


def run(family, scale="smoke", config=None, threads=1):
    """Run an experiment family.

    Returns a dict with ``results_csv`` (text in the results.csv layout) and
    the decoded ``summary`` and ``config``; grid runs add ``grid`` statistics.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}")
    text = "" if config is None else json.dumps(config)
    out = dict(_FAMILIES[family](scale, text, threads))
    for key in ("summary", "config", "grid"):
        if key in out:
            out[key] = json.loads(out[key])
    return out
