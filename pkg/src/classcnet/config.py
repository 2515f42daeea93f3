"""Numerical tolerances.

Every tolerance used by the package lives in :data:`TOL`.  A single
``scale`` factor multiplies all of them, so a run can be loosened or
tightened globally::

    with override(scale=10.0):
        ...
"""
from __future__ import annotations

import contextlib
import dataclasses


@dataclasses.dataclass(frozen=True)
class Tolerances:
    su2: float = 1e-12
    orthogonal: float = 1e-10
    minor: float = 1e-10
    decompose: float = 1e-9
    unitarity: float = 1e-10
    residual: float = 1e-8
    normalization: float = 1e-10
    chain_rule: float = 1e-12
    vanishing: float = 1e-12
    factorization: float = 1e-9
    scale: float = 1.0

    def get(self, name: str) -> float:
        return getattr(self, name) * self.scale


TOL = Tolerances()


def set_tolerances(**kwargs) -> Tolerances:
    """Replace the global tolerances; returns the previous value."""
    global TOL
    old = TOL
    TOL = dataclasses.replace(TOL, **kwargs)
    return old


@contextlib.contextmanager
def override(**kwargs):
    old = set_tolerances(**kwargs)
    try:
        yield TOL
    finally:
        set_tolerances(**dataclasses.asdict(old))


def tol(name: str) -> float:
    return TOL.get(name)
