"""Rigid-body dynamics of the two-link planar elbow manipulator.

Angles follow the usual elbow convention: ``q1`` is measured from the
horizontal, ``q2`` relative to link 1. All functions are pure and return
fresh numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NonFiniteStateError(ValueError):
    """Raised when a state or input vector contains NaN or Inf."""


class MassMatrixError(ArithmeticError):
    """Raised if the inertia matrix is not positive definite."""


@dataclass(frozen=True)
class ManipulatorParams:
    """Physical constants of the arm. Defaults are the benchmark arm."""

    m1: float = 1.0
    m2: float = 1.0
    I1: float = 0.25
    I2: float = 0.25
    l1: float = 0.5
    l2: float = 0.5
    lc1: float = 0.25
    lc2: float = 0.25
    g: float = 9.81

    def __post_init__(self):
        for name in ("m1", "m2", "I1", "I2", "l1", "l2", "lc1", "lc2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        if self.lc1 > self.l1:
            raise ValueError("lc1 must not exceed l1")
        if self.lc2 > self.l2:
            raise ValueError("lc2 must not exceed l2")
        if not (math.isfinite(self.g) and self.g >= 0):
            raise ValueError(f"g must be finite and >= 0, got {self.g!r}")


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qdot: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(2)
        qdot = np.asarray(self.qdot, dtype=float).reshape(2)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
            raise NonFiniteStateError(f"non-finite joint state q={q}, qdot={qdot}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)


def mass_matrix(params: ManipulatorParams, q) -> np.ndarray:
    p = params
    c2 = math.cos(q[1])
    d22 = p.m2 * p.lc2**2 + p.I2
    d12 = p.m2 * (p.lc2**2 + p.l1 * p.lc2 * c2) + p.I2
    d11 = (p.m1 * p.lc1**2
           + p.m2 * (p.l1**2 + p.lc2**2 + 2.0 * p.l1 * p.lc2 * c2)
           + p.I1 + p.I2)
    return np.array([[d11, d12], [d12, d22]])


def coriolis_matrix(params: ManipulatorParams, q, qdot) -> np.ndarray:
    """Christoffel-symbol Coriolis matrix.

    This particular factorisation makes ``Ddot - 2C`` skew-symmetric, which
    the Lyapunov analysis relies on.
    """
    h = -params.m2 * params.l1 * params.lc2 * math.sin(q[1])
    return np.array([[h * qdot[1], h * (qdot[0] + qdot[1])],
                     [-h * qdot[0], 0.0]])


def gravity_vector(params: ManipulatorParams, q) -> np.ndarray:
    p = params
    c12 = math.cos(q[0] + q[1])
    g2 = p.m2 * p.lc2 * p.g * c12
    g1 = (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * math.cos(q[0]) + g2
    return np.array([g1, g2])


def potential_energy(params: ManipulatorParams, q) -> float:
    """Gravitational potential, zero with both links horizontal."""
    p = params
    y1 = p.lc1 * math.sin(q[0])
    y2 = p.l1 * math.sin(q[0]) + p.lc2 * math.sin(q[0] + q[1])
    return p.g * (p.m1 * y1 + p.m2 * y2)


def total_energy(params: ManipulatorParams, state: JointState) -> float:
    qdot = state.qdot
    kinetic = 0.5 * qdot @ mass_matrix(params, state.q) @ qdot
    return float(kinetic + potential_energy(params, state.q))


def solve_mass(D: np.ndarray, rhs) -> np.ndarray:
    """Solve ``D x = rhs`` for a 2x2 SPD matrix, checking definiteness."""
    a, b, d = D[0, 0], D[0, 1], D[1, 1]
    det = a * d - b * b
    if not (a > 0 and det > 0):
        raise MassMatrixError(f"inertia matrix not positive definite: {D.tolist()}")
    return np.array([d * rhs[0] - b * rhs[1], a * rhs[1] - b * rhs[0]]) / det


def forward_dynamics(params: ManipulatorParams, state: JointState, u, d) -> np.ndarray:
    """Joint accelerations from ``D qdd + C qd + G = u + d``."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(d))):
        raise NonFiniteStateError(f"non-finite torque u={u} or disturbance d={d}")
    return accelerations(params, state.q, state.qdot, u + d)


def accelerations(params: ManipulatorParams, q, qdot, tau, terms=None) -> np.ndarray:
    """Unchecked forward dynamics on raw arrays; used in the integrator loop."""
    D, C, G = terms if terms is not None else arm_terms(params, q, qdot)
    return solve_mass(D, tau - C @ qdot - G)


def arm_terms(params: ManipulatorParams, q, qdot):
    """``(D, C, G)`` in one pass, sharing the trigonometry."""
    p = params
    c2, s2 = math.cos(q[1]), math.sin(q[1])
    a = p.m2 * p.l1 * p.lc2
    d22 = p.m2 * p.lc2**2 + p.I2
    d12 = d22 + a * c2
    d11 = p.m1 * p.lc1**2 + p.m2 * (p.l1**2 + p.lc2**2) + 2.0 * a * c2 + p.I1 + p.I2
    h = -a * s2
    g2 = p.m2 * p.lc2 * p.g * math.cos(q[0] + q[1])
    g1 = (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * math.cos(q[0]) + g2
    return (np.array([[d11, d12], [d12, d22]]),
            np.array([[h * qdot[1], h * (qdot[0] + qdot[1])], [-h * qdot[0], 0.0]]),
            np.array([g1, g2]))
