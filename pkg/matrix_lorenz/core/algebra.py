#!/usr/bin/env python3
"""
Lie algebra bases and their structure tensors

A basis is a set of Hermitian generators T^a with Tr(T^a T^b) = kappa delta^ab.
From it we compute the structure constants f^abc ([T^a, T^b] = i f^abc T^c)
and the invariant symmetric tensor d^abc = Tr({T^a, T^b} T^c) / (2 kappa),
which fixes the quadratic couplings of the matrix Lorenz equations.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Sequence, Union

import numpy as np

from .errors import BasisError, ParameterError

logger = logging.getLogger("matrix-lorenz-algebra")

HERMITIAN_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-12
IMAGINARY_TOL = 1e-10
JACOBI_TOL = 1e-10
ANOMALY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class AlgebraBasis:
    """
    Validated generator set.

    Attributes:
        generators: complex array of shape (m, n, n).
        kappa: uniform trace normalization.
        has_identity_component: True iff some generator has a nonzero trace.
        name: label used in logs and output metadata.
    """

    generators: np.ndarray
    kappa: float
    has_identity_component: bool
    name: str = "custom"
    traces: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        traces = np.einsum("aii->a", self.generators).real
        traces.setflags(write=False)
        object.__setattr__(self, "traces", traces)

    @property
    def n(self) -> int:
        return self.generators.shape[1]

    @property
    def m(self) -> int:
        return self.generators.shape[0]

    @property
    def identity_slots(self) -> np.ndarray:
        """Indices of generators carrying a trace (the u(1) part)"""
        return np.flatnonzero(np.abs(self.traces) > ORTHOGONALITY_TOL)

    @property
    def traceless_slots(self) -> np.ndarray:
        """Indices of traceless generators (the simple part, su(2) for u(2))"""
        return np.flatnonzero(np.abs(self.traces) <= ORTHOGONALITY_TOL)

    def matrix(self, coeffs: np.ndarray) -> np.ndarray:
        """Rebuild X = c^a T^a from a coefficient vector"""
        coeffs = _as_coefficients(coeffs, self.m)
        return np.einsum("a,aij->ij", coeffs, self.generators)


@dataclass(frozen=True, eq=False)
class StructureTensors:
    f: np.ndarray
    d: np.ndarray
    kappa: float

    @classmethod
    def from_basis(cls, basis: AlgebraBasis) -> "StructureTensors":
        f = structure_constants(basis)
        residual = jacobi_residual(f)
        if residual > JACOBI_TOL:
            raise BasisError(f"Jacobi identity violated (residual {residual:.3e})")
        return cls(f=f, d=d_tensor(basis), kappa=basis.kappa)


def validate_basis(generators: Union[np.ndarray, Sequence[Any]], name: str = "custom") -> AlgebraBasis:
    """Check hermiticity and uniform orthogonality, and compute kappa"""
    try:
        gens = np.array(generators, dtype=complex)
    except (TypeError, ValueError) as e:
        raise BasisError(f"generators are not numeric matrices: {e}")

    if gens.ndim != 3 or gens.shape[0] == 0:
        raise BasisError("expected a non-empty list of square matrices")
    if gens.shape[1] != gens.shape[2]:
        raise BasisError(f"generators are not square: shape {gens.shape[1]}x{gens.shape[2]}")

    for a, t in enumerate(gens):
        if np.max(np.abs(t - t.conj().T)) > HERMITIAN_TOL:
            raise BasisError(f"generator {a} is not Hermitian", index=a)

    gram = np.einsum("aij,bji->ab", gens, gens)
    kappa = float(gram[0, 0].real)
    if abs(kappa) <= ORTHOGONALITY_TOL:
        raise BasisError("Tr(T^0 T^0) vanishes; kappa must be nonzero", pair=(0, 0))

    expected = kappa * np.eye(len(gens))
    deviation = np.abs(gram - expected)
    if np.max(deviation) > ORTHOGONALITY_TOL:
        a, b = np.unravel_index(np.argmax(deviation), deviation.shape)
        raise BasisError(
            f"Tr(T^{a} T^{b}) = {gram[a, b].real:.6g} is not kappa*delta with kappa = {kappa:.6g}",
            pair=(int(a), int(b)),
        )

    gens.setflags(write=False)
    traces = np.einsum("aii->a", gens)
    has_identity = bool(np.any(np.abs(traces) > ORTHOGONALITY_TOL))
    if not has_identity:
        logger.warning(
            f"Basis '{name}' has no identity component: the coefficient equations stay "
            f"well defined but the matrix-level equations are inconsistent"
        )

    return AlgebraBasis(generators=gens, kappa=kappa, has_identity_component=has_identity, name=name)


def _products(basis: AlgebraBasis) -> np.ndarray:
    """T^a T^b for every pair, shape (m, m, n, n)"""
    return np.einsum("aij,bjk->abik", basis.generators, basis.generators)


def structure_constants(basis: AlgebraBasis) -> np.ndarray:
    """f^abc = Tr([T^a, T^b] T^c) / (i kappa)"""
    products = _products(basis)
    commutators = products - products.transpose(1, 0, 2, 3)
    f = np.einsum("abik,cki->abc", commutators, basis.generators) / (1j * basis.kappa)
    residual = np.max(np.abs(f.imag)) if f.size else 0.0
    if residual > IMAGINARY_TOL:
        raise BasisError(
            f"structure constants have imaginary part {residual:.3e}; "
            f"the basis does not close into a real Lie algebra"
        )
    return np.ascontiguousarray(f.real)


def d_tensor(basis: AlgebraBasis) -> np.ndarray:
    """d^abc = Tr({T^a, T^b} T^c) / (2 kappa)"""
    products = _products(basis)
    anticommutators = products + products.transpose(1, 0, 2, 3)
    d = np.einsum("abik,cki->abc", anticommutators, basis.generators) / (2.0 * basis.kappa)
    return np.ascontiguousarray(d.real)


def jacobi_residual(f: np.ndarray) -> float:
    """Largest violation of f^abe f^ecd + f^cbe f^aed + f^dbe f^ace = 0"""
    total = (
        np.einsum("abe,ecd->abcd", f, f)
        + np.einsum("cbe,aed->abcd", f, f)
        + np.einsum("dbe,ace->abcd", f, f)
    )
    return float(np.max(np.abs(total))) if total.size else 0.0


def is_anomaly_safe(d: np.ndarray, tol: float = ANOMALY_TOL) -> bool:
    return bool(np.max(np.abs(d)) <= tol) if d.size else True


def _as_coefficients(c: np.ndarray, m: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape[-1:] != (m,):
        raise ParameterError(f"coefficient vector of length {c.shape[-1] if c.ndim else 0} does not match {m} generators")
    return c


def sym_contract(d: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """w^a = d^abc u^b v^c, the Weyl-ordered product in components. Accepts leading batch axes."""
    m = d.shape[0]
    u = _as_coefficients(u, m)
    v = _as_coefficients(v, m)
    return np.einsum("abc,...b,...c->...a", d, u, v)


def commutator_norm(f: np.ndarray, kappa: float, u: np.ndarray, v: np.ndarray) -> Union[float, np.ndarray]:
    """Frobenius norm of [U, V], from [U, V] = i u^a v^b f^abc T^c"""
    m = f.shape[0]
    u = _as_coefficients(u, m)
    v = _as_coefficients(v, m)
    w = np.einsum("abc,...a,...b->...c", f, u, v)
    return np.sqrt(abs(kappa) * np.sum(w * w, axis=-1))


# Built-in bases

_PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)

_GELL_MANN = np.array([
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, -1j, 0], [1j, 0, 0], [0, 0, 0]],
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
    [[0, 0, -1j], [0, 0, 0], [1j, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 1, 0]],
    [[0, 0, 0], [0, 0, -1j], [0, 1j, 0]],
    np.diag([1, 1, -2]) / np.sqrt(3),
], dtype=complex)


def _named_generators(name: str) -> np.ndarray:
    if name == "u1":
        return np.eye(2, dtype=complex)[None] / 2
    if name == "su2":
        return _PAULI / 2
    if name == "u2":
        return np.concatenate([np.eye(2, dtype=complex)[None] / 2, _PAULI / 2])
    if name == "su3":
        return _GELL_MANN / 2
    if name == "u3":
        return np.concatenate([np.eye(3, dtype=complex)[None] / np.sqrt(6), _GELL_MANN / 2])
    raise ParameterError(f"Unknown basis '{name}' (expected one of {', '.join(NAMED_BASES)})")


NAMED_BASES = ("u1", "su2", "u2", "su3", "u3")


@lru_cache(maxsize=None)
def named_basis(name: str) -> AlgebraBasis:
    """Standard bases: u1 = {I/2}, su2 = {sigma/2}, u2 = {I/2, sigma/2}, su3, u3"""
    return validate_basis(_named_generators(name), name=name)


@lru_cache(maxsize=None)
def named_tensors(name: str) -> StructureTensors:
    return StructureTensors.from_basis(named_basis(name))


def basis_from_document(document: Dict[str, Any], name: str = "custom") -> AlgebraBasis:
    """
    Build a basis from {"n": int, "generators": [...]}.

    Each generator lists its complex entries row-major as [re, im] pairs, either
    flat (n*n pairs) or nested by row.
    """
    try:
        n = int(document["n"])
        raw = np.asarray(document["generators"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise BasisError(f"malformed basis document: {e}")

    if raw.ndim < 2 or raw.shape[-1] != 2 or raw.size != raw.shape[0] * n * n * 2:
        raise BasisError(f"expected each generator to hold {n}x{n} [re, im] entries")
    entries = raw.reshape(raw.shape[0], n, n, 2)
    return validate_basis(entries[..., 0] + 1j * entries[..., 1], name=name)


def load_basis(path: Union[str, Path]) -> AlgebraBasis:
    path = Path(path)
    try:
        with open(path, "r") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise BasisError(f"Could not read basis file {path}: {e}")
    logger.info(f"Loaded basis from {path}")
    return basis_from_document(document, name=path.stem)


def basis_to_document(basis: AlgebraBasis) -> Dict[str, Any]:
    return {
        "n": basis.n,
        "generators": [
            [[float(z.real), float(z.imag)] for z in t.ravel()] for t in basis.generators
        ],
    }
