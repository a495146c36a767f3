"""Quadrotor prediction model: first-order attitude loop, Euler discretization.

State layout is ``[px, py, pz, vx, vy, vz, phi, theta]`` and input layout is
``[thrust, phi_ref, theta_ref]``. Yaw is fixed at zero; the thrust direction is
the third column of ``R_y(theta) @ R_x(phi)``.

The numeric cores are numba-compiled so the controller kernels can call them
from inside their own jitted loops.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

NX = 8
NU = 3

# state indices
PX, PY, PZ, VX, VY, VZ, PHI, THETA = range(NX)
# input indices
THRUST, PHI_REF, THETA_REF = range(NU)


@dataclass(frozen=True)
class State:
    p: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v: tuple[float, float, float] = (0.0, 0.0, 0.0)
    phi: float = 0.0
    theta: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([*self.p, *self.v, self.phi, self.theta], dtype=float)

    @classmethod
    def from_array(cls, x) -> "State":
        x = np.asarray(x, dtype=float)
        return cls(tuple(x[0:3]), tuple(x[3:6]), float(x[6]), float(x[7]))


@dataclass(frozen=True)
class Input:
    thrust: float = 9.81
    phi_ref: float = 0.0
    theta_ref: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.thrust, self.phi_ref, self.theta_ref], dtype=float)

    @classmethod
    def from_array(cls, u) -> "Input":
        u = np.asarray(u, dtype=float)
        return cls(float(u[0]), float(u[1]), float(u[2]))


@dataclass(frozen=True)
class ModelParams:
    """Physical and discretization constants of the prediction model."""

    drag: tuple[float, float, float] = (0.1, 0.1, 0.2)
    attitude_gain: tuple[float, float] = (1.0, 1.0)
    attitude_tau: tuple[float, float] = (0.5, 0.5)
    gravity: float = 9.81
    dt: float = 0.05
    horizon: int = 40

    def __post_init__(self):
        if min(self.attitude_tau) <= 0:
            raise ValueError("attitude_tau must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")

    @cached_property
    def _packed(self) -> np.ndarray:
        return np.array(
            [*self.drag, *self.attitude_gain, *self.attitude_tau, self.gravity, self.dt],
            dtype=float,
        )

    def packed(self) -> np.ndarray:
        """Flat parameter vector consumed by the jitted kernels."""
        return self._packed

    def hover_input(self) -> np.ndarray:
        return np.array([self.gravity, 0.0, 0.0])


# packed parameter layout: Ax Ay Az Kphi Ktheta tauphi tautheta g dt


@njit(cache=True, nogil=True)
def _deriv(x, u, prm, out):
    phi = x[6]
    th = x[7]
    T = u[0]
    cphi = np.cos(phi)
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = T * np.sin(th) * cphi - prm[0] * x[3]
    out[4] = -T * np.sin(phi) - prm[1] * x[4]
    out[5] = T * np.cos(th) * cphi - prm[7] - prm[2] * x[5]
    out[6] = (prm[3] * u[1] - phi) / prm[5]
    out[7] = (prm[4] * u[2] - th) / prm[6]


@njit(cache=True, nogil=True)
def _step(x, u, prm, out):
    _deriv(x, u, prm, out)
    dt = prm[8]
    for i in range(8):
        out[i] = x[i] + dt * out[i]


@njit(cache=True, nogil=True)
def _rollout(x0, useq, prm, xs):
    """Fill ``xs`` (N+1, 8) with the Euler rollout of ``useq`` (N, 3)."""
    for i in range(8):
        xs[0, i] = x0[i]
    for j in range(useq.shape[0]):
        _step(xs[j], useq[j], prm, xs[j + 1])


@njit(cache=True, nogil=True)
def _step_jac(x, u, prm, A, B):
    dt = prm[8]
    phi = x[6]
    th = x[7]
    T = u[0]
    sphi, cphi = np.sin(phi), np.cos(phi)
    sth, cth = np.sin(th), np.cos(th)
    A[:, :] = 0.0
    B[:, :] = 0.0
    for i in range(8):
        A[i, i] = 1.0
    for i in range(3):
        A[i, 3 + i] = dt
        A[3 + i, 3 + i] = 1.0 - dt * prm[i]
    A[3, 6] = -dt * T * sth * sphi
    A[3, 7] = dt * T * cth * cphi
    A[4, 6] = -dt * T * cphi
    A[5, 6] = -dt * T * cth * sphi
    A[5, 7] = -dt * T * sth * cphi
    A[6, 6] = 1.0 - dt / prm[5]
    A[7, 7] = 1.0 - dt / prm[6]
    B[3, 0] = dt * sth * cphi
    B[4, 0] = -dt * sphi
    B[5, 0] = dt * cth * cphi
    B[6, 1] = dt * prm[3] / prm[5]
    B[7, 2] = dt * prm[4] / prm[6]


def continuous_dynamics(x, u, params: ModelParams) -> np.ndarray:
    """Time derivative of the state under input ``u``."""
    out = np.empty(NX)
    _deriv(np.asarray(x, dtype=float), np.asarray(u, dtype=float), params.packed(), out)
    return out


def discrete_step(x, u, params: ModelParams) -> np.ndarray:
    """One forward-Euler step of length ``params.dt``."""
    out = np.empty(NX)
    _step(np.asarray(x, dtype=float), np.asarray(u, dtype=float), params.packed(), out)
    return out


def rollout(x0, u_seq, params: ModelParams) -> np.ndarray:
    """Predicted states for an input sequence; returns shape (len(u_seq)+1, 8)."""
    u_seq = np.ascontiguousarray(u_seq, dtype=float).reshape(-1, NU)
    xs = np.empty((u_seq.shape[0] + 1, NX))
    _rollout(np.asarray(x0, dtype=float), u_seq, params.packed(), xs)
    return xs


def step_jacobians(x, u, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of :func:`discrete_step` with respect to state (8x8) and input (8x3)."""
    A = np.empty((NX, NX))
    B = np.empty((NX, NU))
    _step_jac(np.asarray(x, dtype=float), np.asarray(u, dtype=float), params.packed(), A, B)
    return A, B


def hover_state(p=(0.0, 0.0, 0.0)) -> np.ndarray:
    x = np.zeros(NX)
    x[:3] = p
    return x
