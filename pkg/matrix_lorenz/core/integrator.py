#!/usr/bin/env python3
"""
Fixed-step eighth-order Runge-Kutta integration

Uses the 12-stage eighth-order propagating formula of the Dormand-Prince 8(5,3)
pair, taken from scipy's coefficient table, in fixed-step mode (no error
estimate, no step control).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop853

from .errors import IntegrationError, ParameterError

logger = logging.getLogger("matrix-lorenz-integrator")

ORDER = 8
N_STAGES = _dop853.N_STAGES
_A = np.array(_dop853.A[:N_STAGES, :N_STAGES])
_B = np.array(_dop853.B)
_C = np.array(_dop853.C[:N_STAGES])


def butcher_tableau():
    """Copies of (A, b, c) for the stepping formula"""
    return _A.copy(), _B.copy(), _C.copy()

DIVERGENCE_LIMIT = 1e8

VectorField = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IntegrationSpec:
    dt: float = 1e-3
    n_steps: int = 100_000
    record_every: int = 1
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ParameterError(f"n_steps must be non-negative, got {self.n_steps}")
        if self.record_every < 1:
            raise ParameterError(f"record_every must be at least 1, got {self.record_every}")

    @classmethod
    def from_horizon(cls, dt: float, horizon: float, record_every: int = 1, t0: float = 0.0) -> "IntegrationSpec":
        if not dt > 0:
            raise ParameterError(f"dt must be positive, got {dt}")
        if horizon < 0:
            raise ParameterError(f"horizon must be non-negative, got {horizon}")
        n_steps = int(round(horizon / dt))
        if abs(n_steps * dt - horizon) > 1e-9 * max(horizon, dt):
            raise ParameterError(f"horizon {horizon:g} is not a whole number of steps of {dt:g}")
        return cls(dt=dt, n_steps=n_steps, record_every=record_every, t0=t0)

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def time_at(self, step: int) -> float:
        return self.t0 + step * self.dt


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states; states has shape (n_records, *state_shape)"""

    times: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _diverged_members(state: np.ndarray, limit: Optional[float]) -> np.ndarray:
    bad = ~np.isfinite(state)
    if limit is not None:
        with np.errstate(invalid="ignore"):
            bad |= np.abs(state) > limit
    if state.ndim <= 1:
        return np.array([0]) if bad.any() else np.array([], dtype=int)
    return np.flatnonzero(bad.reshape(state.shape[0], -1).any(axis=1))


def rk8_step(rhs: VectorField, state: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One explicit step of formal order 8; raises IntegrationError on non-finite output"""
    state = np.asarray(state, dtype=float)
    k = np.empty((N_STAGES,) + state.shape)
    k[0] = rhs(t, state)
    for s in range(1, N_STAGES):
        dy = np.tensordot(_A[s, :s], k[:s], axes=1) * dt
        k[s] = rhs(t + _C[s] * dt, state + dy)
    new_state = state + dt * np.tensordot(_B, k, axes=1)

    if not np.all(np.isfinite(new_state)):
        members = _diverged_members(new_state, None) if new_state.ndim > 1 else None
        raise IntegrationError(f"non-finite state after step at t={t:.6g}", time=t, members=members)
    return new_state


def integrate(rhs: VectorField, state0: np.ndarray, spec: IntegrationSpec,
              divergence_limit: Optional[float] = DIVERGENCE_LIMIT) -> Trajectory:
    """
    Advance state0 by spec.n_steps RK8 steps, recording every record_every-th
    state including the initial one. state0 may carry leading batch axes.
    """
    state = np.array(state0, dtype=float)
    n_records = spec.n_steps // spec.record_every + 1
    states = np.empty((n_records,) + state.shape)
    states[0] = state
    times = spec.t0 + np.arange(n_records) * (spec.record_every * spec.dt)

    record = 1
    for step in range(spec.n_steps):
        t = spec.time_at(step)
        try:
            state = rk8_step(rhs, state, t, spec.dt)
        except IntegrationError as e:
            raise IntegrationError(f"{e} (step {step})", time=t, step=step, members=e.members)

        if divergence_limit is not None and np.max(np.abs(state)) > divergence_limit:
            members = _diverged_members(state, divergence_limit) if state.ndim > 1 else None
            t_fail = spec.time_at(step + 1)
            raise IntegrationError(
                f"state exceeded {divergence_limit:g} at t={t_fail:.6g} (step {step})",
                time=t_fail, step=step, members=members,
            )

        if (step + 1) % spec.record_every == 0:
            states[record] = state
            record += 1

    logger.debug(f"Integrated {spec.n_steps} steps of dt={spec.dt:g}, recorded {n_records} states")
    return Trajectory(times=times, states=states)
