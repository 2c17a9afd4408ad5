"""
Registry of simulated systems

Maps the system selectors used by the CLI and the ensemble/sweep machinery to
flat vector fields, tangent maps and algebra metadata.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .algebra import AlgebraBasis, StructureTensors, load_basis, named_basis, named_tensors
from .dynamics import (
    LorenzParams,
    U2Convention,
    coefficient_jvp,
    coefficient_rhs,
    lorenz_jacobian,
    lorenz_rhs,
    u2_coupling,
)
from .errors import ParameterError

logger = logging.getLogger("matrix-lorenz-systems")

MATRIX_SYSTEMS = ("u1", "su2", "u2_derived", "u2_paper", "custom_basis")
SYSTEMS = ("classical",) + MATRIX_SYSTEMS


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    A simulated system.

    coupling is the quadratic coefficient tensor of the flat field; the classical
    system is the one-generator case with coupling [[[1]]]. basis/tensors are set
    for matrix systems only.
    """

    name: str
    coupling: np.ndarray
    basis: Optional[AlgebraBasis] = None
    tensors: Optional[StructureTensors] = None

    @property
    def m(self) -> int:
        return self.coupling.shape[0]

    @property
    def dim(self) -> int:
        return 3 * self.m

    @property
    def is_matrix(self) -> bool:
        return self.basis is not None

    @property
    def has_blocks(self) -> bool:
        """True when both an identity and a traceless sector exist"""
        return (self.basis is not None
                and len(self.basis.identity_slots) > 0
                and len(self.basis.traceless_slots) > 0)

    def sector_mask(self, sector: str) -> np.ndarray:
        """Boolean mask over the flat state selecting the 'u1' or 'su2' coefficient slots"""
        if self.basis is None:
            raise ParameterError(f"system '{self.name}' has no group factors")
        slots = self.basis.identity_slots if sector == "u1" else self.basis.traceless_slots
        mask = np.zeros(self.m, dtype=bool)
        mask[slots] = True
        return np.tile(mask, 3)

    def vector_field(self, p: LorenzParams) -> Callable[[float, np.ndarray], np.ndarray]:
        if self.basis is None:
            return lambda t, s: lorenz_rhs(s, p)
        coupling = self.coupling
        return lambda t, s: coefficient_rhs(s, p, coupling)

    def tangent_map(self, p: LorenzParams) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """(state, tangents) -> J(state) applied to each tangent row"""
        if self.basis is None:
            return lambda s, v: v @ lorenz_jacobian(s, p).T
        coupling = self.coupling
        return lambda s, v: coefficient_jvp(s, v, p, coupling)


@lru_cache(maxsize=None)
def _classical() -> SystemModel:
    return SystemModel(name="classical", coupling=np.ones((1, 1, 1)))


def _from_basis(name: str, basis: AlgebraBasis) -> SystemModel:
    tensors = StructureTensors.from_basis(basis)
    return SystemModel(name=name, coupling=tensors.d, basis=basis, tensors=tensors)


@lru_cache(maxsize=32)
def build_system(name: str, basis_path: Optional[str] = None) -> SystemModel:
    """Resolve a system selector; custom_basis needs basis_path"""
    if name == "classical":
        return _classical()
    if name in ("u1", "su2"):
        return SystemModel(name=name, coupling=named_tensors(name).d,
                           basis=named_basis(name), tensors=named_tensors(name))
    if name in ("u2_derived", "u2_paper"):
        convention = U2Convention.DERIVED_D if name == "u2_derived" else U2Convention.LITERAL
        return SystemModel(name=name, coupling=u2_coupling(convention),
                           basis=named_basis("u2"), tensors=named_tensors("u2"))
    if name == "custom_basis":
        if not basis_path:
            raise ParameterError("system 'custom_basis' needs a basis file")
        return _from_basis(name, load_basis(basis_path))
    raise ParameterError(f"Unknown system '{name}' (expected one of {', '.join(SYSTEMS)})")
