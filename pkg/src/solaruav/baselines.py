"""Comparison schemes: pinned horizontal position and random assignment.

Both reuse the main iterative pipeline with a restricted feasible set,
so per-instance they can never beat the proposed scheme (up to solver
tolerance).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .channel import Instance
from .sca import SolverOptions, Solution, sca_solve


def baseline1_fixed_xy(inst: Instance, options: Optional[SolverOptions] = None) -> Solution:
    """Hover over the cell center: optimize altitude, power, and assignment only."""
    return sca_solve(inst, options, fix_xy=(0.0, 0.0))


def baseline2_random_assignment(
    inst: Instance, options: Optional[SolverOptions] = None, rng: Optional[np.random.Generator] = None
) -> Solution:
    """Pick the user on each subcarrier uniformly at random, then optimize
    the 3-D position and the powers of the selected pairs."""
    if rng is None:
        rng = np.random.default_rng(options.seed if options is not None else 0)
    k, n_f = inst.h_gain.shape
    chosen = rng.integers(0, k, size=n_f)
    mask = np.zeros((k, n_f), dtype=bool)
    mask[chosen, np.arange(n_f)] = True
    return sca_solve(inst, options, mask=mask)
