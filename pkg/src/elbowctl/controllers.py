"""Tracking control laws with constant-disturbance rejection.

Each law is available in two forms:

* a pure torque function (``*_torque``) plus the rate of its internal state,
  which the simulator integrates together with the plant inside RK4;
* a causal sampled-data step (``inverse_dynamics_control`` and
  ``lyapunov_control``) that advances the internal state with the
  trapezoidal rule, for use outside the simulator.

The controller classes at the bottom bundle gains with these functions and
form the tagged union consumed by :mod:`elbowctl.sim`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple

import numpy as np

from .dynamics import JointState, ManipulatorParams, arm_terms


@dataclass(frozen=True)
class TrajectoryPoint:
    qd: np.ndarray
    qd_dot: np.ndarray
    qd_ddot: np.ndarray


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class InvDynGains:
    kd: float = 12.0
    kp: float = 21.0
    ki: float = 10.0

    def __post_init__(self):
        for name in ("kd", "kp", "ki"):
            _positive(name, getattr(self, name))
        if self.kd * self.kp <= self.ki:
            raise ValueError(
                f"gains violate kd*kp > ki ({self.kd}*{self.kp} <= {self.ki}); "
                "the error dynamics would be unstable")


@dataclass(frozen=True)
class LyapGains:
    kd: float = 2.0
    ki: float = 1.0
    lam: float = 2.0

    def __post_init__(self):
        for name in ("kd", "ki", "lam"):
            _positive(name, getattr(self, name))


@dataclass(frozen=True)
class DiscGains:
    """Gains of the unit-vector law. ``epsilon`` is the boundary-layer width."""

    kd_switch: float = 5.0
    lam: float = 2.0
    epsilon: float = 1e-2

    def __post_init__(self):
        for name in ("kd_switch", "lam", "epsilon"):
            _positive(name, getattr(self, name))


@dataclass
class InvDynState:
    integral_error: np.ndarray = field(default_factory=lambda: np.zeros(2))
    last_error: np.ndarray | None = None


@dataclass
class LyapState:
    d_hat: np.ndarray = field(default_factory=lambda: np.zeros(2))
    last_sigma: np.ndarray | None = None


class SlidingVariables(NamedTuple):
    sigma: np.ndarray
    xi_dot: np.ndarray
    xi_ddot: np.ndarray
    q_tilde: np.ndarray


def sliding_variables(state: JointState, traj: TrajectoryPoint, lam: float) -> SlidingVariables:
    return _sliding(state.q, state.qdot, traj, lam)


def _sliding(q, qdot, traj, lam):
    q_tilde = q - traj.qd
    xi_dot = traj.qd_dot - lam * q_tilde
    xi_ddot = traj.qd_ddot - lam * (qdot - traj.qd_dot)
    return SlidingVariables(qdot - xi_dot, xi_dot, xi_ddot, q_tilde)


def saturate(sigma, epsilon: float) -> np.ndarray:
    """Unit vector ``sigma/|sigma|`` with a linear boundary layer of width ``epsilon``."""
    norm = math.hypot(sigma[0], sigma[1])
    return sigma / max(norm, epsilon)


def _feedforward(params, q, qdot, xi_dot, xi_ddot, terms):
    D, C, G = terms if terms is not None else arm_terms(params, q, qdot)
    return D @ xi_ddot + C @ xi_dot + G


def inverse_dynamics_torque(params, q, qdot, traj, gains: InvDynGains, integral_error,
                            terms=None):
    v = (traj.qd_ddot
         + gains.kd * (traj.qd_dot - qdot)
         + gains.kp * (traj.qd - q)
         + gains.ki * integral_error)
    D, C, G = terms if terms is not None else arm_terms(params, q, qdot)
    return D @ v + C @ qdot + G


def lyapunov_torque(params, q, qdot, traj, gains: LyapGains, d_hat, terms=None):
    sv = _sliding(q, qdot, traj, gains.lam)
    u = (_feedforward(params, q, qdot, sv.xi_dot, sv.xi_ddot, terms)
         - gains.kd * sv.sigma - d_hat)
    return u, sv.sigma


def switching_term(sigma, gains: DiscGains) -> np.ndarray:
    return gains.kd_switch * saturate(sigma, gains.epsilon)


def discontinuous_control(params: ManipulatorParams, state: JointState,
                          traj: TrajectoryPoint, gains: DiscGains) -> np.ndarray:
    return _discontinuous(params, state.q, state.qdot, traj, gains)[0]


def _discontinuous(params, q, qdot, traj, gains, terms=None):
    sv = _sliding(q, qdot, traj, gains.lam)
    u = (_feedforward(params, q, qdot, sv.xi_dot, sv.xi_ddot, terms)
         - switching_term(sv.sigma, gains))
    return u, sv.sigma


def inverse_dynamics_control(params: ManipulatorParams, state: JointState,
                             traj: TrajectoryPoint, gains: InvDynGains,
                             ctl_state: InvDynState, dt: float):
    """Sampled-data step. Returns ``(u, new_ctl_state)``.

    The integral is brought up to the current sample with the trapezoidal
    rule over the previous and current errors, then used for ``u``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    error = traj.qd - state.q
    integral = ctl_state.integral_error
    if ctl_state.last_error is not None:
        integral = integral + 0.5 * dt * (ctl_state.last_error + error)
    u = inverse_dynamics_torque(params, state.q, state.qdot, traj, gains, integral)
    return u, InvDynState(integral_error=integral, last_error=error)


def lyapunov_control(params: ManipulatorParams, state: JointState,
                     traj: TrajectoryPoint, gains: LyapGains,
                     ctl_state: LyapState, dt: float):
    """Sampled-data step with the estimator ``d_hat' = ki * sigma``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    sigma = _sliding(state.q, state.qdot, traj, gains.lam).sigma
    d_hat = ctl_state.d_hat
    if ctl_state.last_sigma is not None:
        d_hat = d_hat + 0.5 * dt * gains.ki * (ctl_state.last_sigma + sigma)
    u, _ = lyapunov_torque(params, state.q, state.qdot, traj, gains, d_hat)
    return u, LyapState(d_hat=d_hat, last_sigma=sigma)


# -- controller specs used by the simulator ---------------------------------

@dataclass(frozen=True)
class InverseDynamicsController:
    gains: InvDynGains = InvDynGains()
    kind: ClassVar[str] = "inverse_dynamics"
    n_internal: ClassVar[int] = 2

    def initial_internal(self) -> np.ndarray:
        return np.zeros(2)

    def torque(self, params, q, qdot, traj, z, terms=None):
        return inverse_dynamics_torque(params, q, qdot, traj, self.gains, z, terms)

    def internal_rate(self, q, qdot, traj, z):
        return traj.qd - q

    def sigma(self, q, qdot, traj):
        return None


@dataclass(frozen=True)
class LyapunovController:
    gains: LyapGains = LyapGains()
    d_hat0: tuple[float, float] = (0.0, 0.0)
    kind: ClassVar[str] = "lyapunov"
    n_internal: ClassVar[int] = 2

    def initial_internal(self) -> np.ndarray:
        return np.array(self.d_hat0, dtype=float)

    def torque(self, params, q, qdot, traj, z, terms=None):
        return lyapunov_torque(params, q, qdot, traj, self.gains, z, terms)[0]

    def internal_rate(self, q, qdot, traj, z):
        return self.gains.ki * _sliding(q, qdot, traj, self.gains.lam).sigma

    def sigma(self, q, qdot, traj):
        return _sliding(q, qdot, traj, self.gains.lam).sigma


@dataclass(frozen=True)
class DiscontinuousController:
    gains: DiscGains = DiscGains()
    kind: ClassVar[str] = "discontinuous"
    n_internal: ClassVar[int] = 0

    def initial_internal(self) -> np.ndarray:
        return np.zeros(0)

    def torque(self, params, q, qdot, traj, z, terms=None):
        return _discontinuous(params, q, qdot, traj, self.gains, terms)[0]

    def internal_rate(self, q, qdot, traj, z):
        return np.zeros(0)

    def sigma(self, q, qdot, traj):
        return _sliding(q, qdot, traj, self.gains.lam).sigma


@dataclass(frozen=True)
class ZeroTorqueController:
    """Applies no torque at all. Useful for passive-dynamics checks."""

    kind: ClassVar[str] = "none"
    n_internal: ClassVar[int] = 0

    def initial_internal(self) -> np.ndarray:
        return np.zeros(0)

    def torque(self, params, q, qdot, traj, z, terms=None):
        return np.zeros(2)

    def internal_rate(self, q, qdot, traj, z):
        return np.zeros(0)

    def sigma(self, q, qdot, traj):
        return None


ControllerSpec = (InverseDynamicsController | LyapunovController
                  | DiscontinuousController | ZeroTorqueController)
