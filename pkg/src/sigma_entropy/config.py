"""Numeric tolerances and environment overrides.

Every tolerance-sensitive function takes an explicit ``tol`` argument whose
default comes from here.  The CLI mirrors these through ``--tol`` and the
``SIGMA_ENTROPY_*`` environment variables.
"""

from __future__ import annotations

import os

ENV_PREFIX = "SIGMA_ENTROPY_"

#: equality constraints (mass sums, density normalization, dominance slack)
EQ_TOL = 1e-12
#: cross-checks against an independent oracle (quadrature, Monte Carlo, ...)
ORACLE_TOL = 1e-8
#: pivot threshold for rank computations
PIVOT_TOL = 1e-10


def env_value(name: str, default=None):
    """Return ``$SIGMA_ENTROPY_<NAME>`` or ``default`` when unset."""
    return os.environ.get(ENV_PREFIX + name.upper(), default)
