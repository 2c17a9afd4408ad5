#!/usr/bin/env python3
"""
Vector fields for the classical Lorenz, LLG spin and matrix Lorenz systems

All right-hand sides accept states with leading batch axes; the last axis holds
the state components. Matrix states are flattened as [x^0..x^m-1, y^.., z^..].
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Tuple

import numpy as np

from .algebra import named_tensors, sym_contract
from .errors import ParameterError

logger = logging.getLogger("matrix-lorenz-dynamics")

AXIS_NORM_TOL = 1e-12


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0

    def is_physical(self) -> bool:
        return self.sigma > 0 and self.b > 0


@dataclass(frozen=True, eq=False)
class LLGParams:
    """
    Reduced LLG parameters.

    Attributes:
        eta: anisotropy intensities, shape (3,).
        axes: unit anisotropy axes as rows, shape (3, 3).
        beta: reduced field, shape (3,).
        tau: damping times, shape (3,); +inf disables damping on that component.
        torque_d: z-axis torque magnitude.
    """

    eta: np.ndarray
    axes: np.ndarray
    beta: np.ndarray
    tau: np.ndarray
    torque_d: float

    def __post_init__(self):
        for name, shape in (("eta", (3,)), ("axes", (3, 3)), ("beta", (3,)), ("tau", (3,))):
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise ParameterError(f"LLG parameter '{name}' must have shape {shape}, got {value.shape}")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

        norms = np.linalg.norm(self.axes, axis=1)
        if np.max(np.abs(norms - 1.0)) > AXIS_NORM_TOL:
            raise ParameterError(f"anisotropy axes must be unit vectors, got norms {norms}")
        if np.any(self.tau <= 0):
            raise ParameterError(f"damping times must be positive, got {self.tau}")

    @classmethod
    def axis_aligned(cls, eta, beta, tau, torque_d: float) -> "LLGParams":
        return cls(eta=eta, axes=np.eye(3), beta=beta, tau=tau, torque_d=torque_d)


@dataclass(frozen=True)
class MaterialParams:
    K: Tuple[float, float, float]
    B: Tuple[float, float, float]
    mu0: float
    Ms: float


@dataclass(frozen=True, eq=False)
class MatrixLorenzState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(v, dtype=float) for v in (self.x, self.y, self.z)]
        if not (arrays[0].shape == arrays[1].shape == arrays[2].shape) or arrays[0].ndim != 1:
            raise ParameterError("x, y and z must be coefficient vectors of equal length")
        if not all(np.all(np.isfinite(v)) for v in arrays):
            raise ParameterError("matrix Lorenz state has non-finite entries")
        for name, value in zip("xyz", arrays):
            object.__setattr__(self, name, value)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.z])

    @classmethod
    def from_flat(cls, flat: np.ndarray) -> "MatrixLorenzState":
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.shape[0] % 3:
            raise ParameterError(f"flat state of length {flat.shape} is not three coefficient vectors")
        x, y, z = np.split(flat, 3)
        return cls(x, y, z)


class U2Convention(str, Enum):
    """Coefficient convention for the u(2) system"""

    DERIVED_D = "derived_d"
    LITERAL = "literal"


# Classical Lorenz

def lorenz_rhs(state: np.ndarray, p: LorenzParams) -> np.ndarray:
    """(sigma (y - x), x (r - z) - y, x y - b z)"""
    state = np.asarray(state, dtype=float)
    x, y, z = state[..., 0], state[..., 1], state[..., 2]
    return np.stack([
        p.sigma * (y - x),
        x * (p.r - z) - y,
        x * y - p.b * z,
    ], axis=-1)


def lorenz_jacobian(state: np.ndarray, p: LorenzParams) -> np.ndarray:
    x, y, z = np.asarray(state, dtype=float)
    return np.array([
        [-p.sigma, p.sigma, 0.0],
        [p.r - z, -1.0, -x],
        [y, x, -p.b],
    ])


def lorenz_fixed_points(p: LorenzParams) -> np.ndarray:
    """Origin, plus C+ and C- when r > 1"""
    points = [np.zeros(3)]
    if p.r > 1:
        q = np.sqrt(p.b * (p.r - 1))
        points.append(np.array([q, q, p.r - 1]))
        points.append(np.array([-q, -q, p.r - 1]))
    return np.array(points)


# LLG spin dynamics

def material_to_reduced(mp: MaterialParams) -> Tuple[np.ndarray, np.ndarray]:
    """eta_i = 2 K_i / (mu0 Ms^2), beta = B / (mu0 Ms)"""
    if mp.mu0 <= 0 or mp.Ms <= 0:
        raise ParameterError(f"mu0 and Ms must be positive (got mu0={mp.mu0}, Ms={mp.Ms})")
    eta = 2.0 * np.asarray(mp.K, dtype=float) / (mp.mu0 * mp.Ms ** 2)
    beta = np.asarray(mp.B, dtype=float) / (mp.mu0 * mp.Ms)
    return eta, beta


def llg_rhs(M: np.ndarray, p: LLGParams) -> np.ndarray:
    """omega x M - D + T with Bloch-Bloembergen damping and torque (0, 0, d)"""
    M = np.asarray(M, dtype=float)
    projections = M @ p.axes.T
    omega = (p.eta * projections) @ p.axes - p.beta
    damping = M / p.tau
    dM = np.cross(omega, M) - damping
    dM[..., 2] += p.torque_d
    return dM


def llg_to_lorenz(p: LorenzParams) -> LLGParams:
    """LLG parameters under which the spin equations become the Lorenz system"""
    if p.sigma == 0 or p.b == 0:
        raise ParameterError(f"sigma and b must be nonzero (got sigma={p.sigma}, b={p.b})")
    return LLGParams.axis_aligned(
        eta=[2.0, 1.0, 1.0],
        beta=[0.0, 0.0, p.sigma],
        tau=[1.0 / p.sigma, 1.0, 1.0 / p.b],
        torque_d=-p.b * (p.r + p.sigma),
    )


def map_state_lorenz_to_llg(xyz: np.ndarray, p: LorenzParams) -> np.ndarray:
    M = np.array(xyz, dtype=float)
    M[..., 2] -= p.r + p.sigma
    return M


def map_state_llg_to_lorenz(M: np.ndarray, p: LorenzParams) -> np.ndarray:
    xyz = np.array(M, dtype=float)
    xyz[..., 2] += p.r + p.sigma
    return xyz


# Matrix Lorenz

def coefficient_rhs(state: np.ndarray, p: LorenzParams, coupling: np.ndarray) -> np.ndarray:
    """
    Flat matrix Lorenz field for an arbitrary quadratic coupling tensor C:

        x' = sigma (y - x)
        y' = -y + r x - C(x, z)
        z' = -b z + C(x, y)

    where C(u, v)^a = C^abc u^b v^c. With C = d this is the Weyl-ordered system.
    """
    m = coupling.shape[0]
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != 3 * m:
        raise ParameterError(f"state of length {state.shape[-1]} does not match {m} generators")
    x, y, z = state[..., :m], state[..., m:2 * m], state[..., 2 * m:]
    return np.concatenate([
        p.sigma * (y - x),
        -y + p.r * x - np.einsum("abc,...b,...c->...a", coupling, x, z),
        -p.b * z + np.einsum("abc,...b,...c->...a", coupling, x, y),
    ], axis=-1)


def coefficient_jvp(state: np.ndarray, tangent: np.ndarray, p: LorenzParams,
                    coupling: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of coefficient_rhs applied to tangent vectors (broadcast against state)"""
    m = coupling.shape[0]
    x, y, z = state[..., :m], state[..., m:2 * m], state[..., 2 * m:]
    dx, dy, dz = tangent[..., :m], tangent[..., m:2 * m], tangent[..., 2 * m:]

    def bilinear(u, v):
        return np.einsum("abc,...b,...c->...a", coupling, u, v)

    return np.concatenate([
        p.sigma * (dy - dx),
        -dy + p.r * dx - bilinear(dx, z) - bilinear(x, dz),
        -p.b * dz + bilinear(dx, y) + bilinear(x, dy),
    ], axis=-1)


def matrix_lorenz_rhs(s: MatrixLorenzState, p: LorenzParams, d: np.ndarray) -> MatrixLorenzState:
    if d.shape != (s.m,) * 3:
        raise ParameterError(f"tensor of shape {d.shape} does not match {s.m} coefficients")
    return MatrixLorenzState(
        x=p.sigma * (s.y - s.x),
        y=-s.y + p.r * s.x - sym_contract(d, s.x, s.z),
        z=-p.b * s.z + sym_contract(d, s.x, s.y),
    )


@lru_cache(maxsize=None)
def literal_u2_tensor() -> np.ndarray:
    """
    Coupling tensor reproducing the printed u(2) equations:
    u(1) line x^0 z^0 + 2 x^b z^b, su(2) lines x^0 z^a + x^a z^0.
    Not symmetric in its last two indices.
    """
    c = np.zeros((4, 4, 4))
    c[0, 0, 0] = 1.0
    for a in range(1, 4):
        c[0, a, a] = 2.0
        c[a, 0, a] = 1.0
        c[a, a, 0] = 1.0
    c.setflags(write=False)
    return c


def u2_coupling(convention: U2Convention) -> np.ndarray:
    convention = U2Convention(convention)
    if convention is U2Convention.LITERAL:
        return literal_u2_tensor()
    return named_tensors("u2").d


def u2_rhs(s: MatrixLorenzState, p: LorenzParams,
           convention: U2Convention = U2Convention.LITERAL) -> MatrixLorenzState:
    if s.m != 4:
        raise ParameterError(f"the u(2) system has 4 coefficients per variable, got {s.m}")
    flat = coefficient_rhs(s.flatten(), p, u2_coupling(convention))
    return MatrixLorenzState.from_flat(flat)
