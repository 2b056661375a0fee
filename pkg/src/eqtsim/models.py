"""Small named models used by ``verify`` and ``liouville`` and by the tests."""

from __future__ import annotations

import numpy as np

from .algebra import BlockOperator, CouplingMap, Model, PureState, SectorSpec
from .bloch import SIGMA_Z, fuzzy_projection


def two_state(kappa: float = 1.0) -> Model:
    """Two 1-dim sectors hopping at rate ``kappa`` both ways (classical telegraph)."""
    spec = SectorSpec((1, 1))
    c = np.sqrt(kappa) * np.eye(1)
    g = CouplingMap(spec, {(0, 1): c, (1, 0): c})
    return Model.constant(BlockOperator.zeros(spec), g)


def qubit_toy(omega: float = 1.0, kappa: float = 1.0, eps: float = 0.7, n=(1.0, 0.0, 0.0)) -> Model:
    """Two qubit sectors, ``H = (omega/2) sigma_z`` in both, swapped by ``sqrt(kappa) P(n, eps)``."""
    spec = SectorSpec((2, 2))
    a = np.sqrt(kappa) * fuzzy_projection(n, eps)
    H = BlockOperator(spec, [0.5 * omega * SIGMA_Z] * 2)
    return Model.constant(H, CouplingMap(spec, {(0, 1): a, (1, 0): a}))


def toy_initial(name: str) -> PureState:
    if name == "two-state":
        return PureState(0, [1.0])
    return PureState(0, [1.0, 0.0])


TOYS = {"qubit-toy": qubit_toy, "two-state": two_state}


def toy(name: str) -> Model:
    try:
        return TOYS[name]()
    except KeyError:
        raise ValueError(f"unknown toy model {name!r}; choose from {sorted(TOYS)}") from None
