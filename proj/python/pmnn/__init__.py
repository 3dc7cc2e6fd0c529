"""Neural and classical solvers for time-fractional differential equations."""

import json

from ._core import (
    caputo_l1,
    caputo_l2sigma,
    caputo_power_oracle,
    fdm_solve,
    gamma_fn,
    l1_weights,
    l2sigma_weight_row,
)
from ._core import solve_json as _solve_json

__all__ = [
    "caputo_l1",
    "caputo_l2sigma",
    "caputo_power_oracle",
    "fdm_solve",
    "gamma_fn",
    "l1_weights",
    "l2sigma_weight_row",
    "solve",
]


def solve(example, **kwargs):
    """Train one network on a benchmark problem and return the run report."""
    return json.loads(_solve_json(example, **kwargs))
