"""Fixed-step closed-loop simulation of the elbow manipulator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .controllers import (
    ControllerSpec,
    InverseDynamicsController,
    LyapunovController,
    TrajectoryPoint,
)
from .dynamics import JointState, ManipulatorParams, accelerations, arm_terms, mass_matrix

DIVERGENCE_LIMIT = 1e6
MAX_DT = 0.01


class DivergedRunError(RuntimeError):
    def __init__(self, step: int, t: float, reason: str):
        super().__init__(f"run diverged at step {step} (t={t:.6g} s): {reason}")
        self.step = step
        self.t = t


class SimConfigError(ValueError):
    """Invalid simulation configuration. ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def desired_trajectory(t: float) -> TrajectoryPoint:
    s, c = math.sin(t), math.cos(t)
    qd = np.array([0.5 * s, 0.5 * c])
    return TrajectoryPoint(qd=qd, qd_dot=np.array([0.5 * c, -0.5 * s]), qd_ddot=-qd)


@dataclass(frozen=True)
class DisturbanceSpec:
    d: tuple[float, float] = (0.0, 0.0)
    limit: float = 50.0

    def __post_init__(self):
        d = tuple(float(x) for x in self.d)
        if len(d) != 2:
            raise SimConfigError("disturbance.d", f"expected 2 components, got {len(d)}")
        object.__setattr__(self, "d", d)
        if not all(math.isfinite(x) for x in d):
            raise SimConfigError("disturbance.d", f"must be finite, got {d}")
        if not (math.isfinite(self.limit) and self.limit > 0):
            raise SimConfigError("disturbance.limit", f"must be > 0, got {self.limit!r}")
        if max(abs(x) for x in d) > self.limit:
            raise SimConfigError(
                "disturbance.d", f"|d|_inf = {max(abs(x) for x in d)} exceeds limit {self.limit}")

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.d)


@dataclass(frozen=True)
class SimConfig:
    params: ManipulatorParams = field(default_factory=ManipulatorParams)
    controller: ControllerSpec = field(default_factory=InverseDynamicsController)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    t_end: float = 10.0
    dt: float = 1e-3
    initial_state: JointState = field(default_factory=lambda: JointState(np.zeros(2), np.zeros(2)))

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise SimConfigError("sim.dt", f"must be > 0, got {self.dt!r}")
        if self.dt > MAX_DT:
            raise SimConfigError("sim.dt", f"must be <= {MAX_DT}, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= self.dt):
            raise SimConfigError("sim.t_end", f"must be >= dt ({self.dt}), got {self.t_end!r}")

    @property
    def n_steps(self) -> int:
        # tolerate t_end/dt landing a hair below an integer
        return int(math.floor(self.t_end / self.dt + 1e-9))


@dataclass
class SimResult:
    """Per-step record of a run. Optional channels are None when undefined."""

    config: SimConfig
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qd: np.ndarray
    qd_dot: np.ndarray
    u: np.ndarray
    q_tilde: np.ndarray
    sigma: np.ndarray | None = None
    d_hat: np.ndarray | None = None
    V: np.ndarray | None = None
    internal: np.ndarray | None = None

    def __len__(self):
        return len(self.t)

    @property
    def d(self) -> np.ndarray:
        return self.config.disturbance.vector


def rk4_step(f: Callable, x: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``x' = f(t, x)``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def closed_loop_rhs(config: SimConfig, trajectory=desired_trajectory) -> Callable:
    """Right-hand side of the stacked state ``[q, qdot, internal]``."""
    params = config.params
    ctl = config.controller
    d = config.disturbance.vector

    def f(t, x):
        q, qdot, z = x[:2], x[2:4], x[4:]
        traj = trajectory(t)
        terms = arm_terms(params, q, qdot)
        u = ctl.torque(params, q, qdot, traj, z, terms)
        qddot = accelerations(params, q, qdot, u + d, terms)
        return np.concatenate((qdot, qddot, ctl.internal_rate(q, qdot, traj, z)))

    return f


def simulate(config: SimConfig, trajectory=desired_trajectory) -> SimResult:
    """Integrate the closed loop from ``initial_state`` to ``t_end``.

    Controller integral/estimator states ride along as extra ODE states, so
    RK4 sees one smooth system. The torque recorded at ``t_k`` is the one
    the controller commands from the state at ``t_k``.
    """
    ctl = config.controller
    n = config.n_steps
    dt = config.dt
    f = closed_loop_rhs(config, trajectory)
    x = np.concatenate((config.initial_state.q, config.initial_state.qdot,
                        ctl.initial_internal()))

    states = np.empty((n + 1, x.size))
    states[0] = x
    for k in range(n):
        x = rk4_step(f, x, k * dt, dt)
        if not np.all(np.isfinite(x)):
            raise DivergedRunError(k + 1, (k + 1) * dt, "non-finite state")
        if max(abs(x[2]), abs(x[3])) > DIVERGENCE_LIMIT:
            raise DivergedRunError(k + 1, (k + 1) * dt,
                                   f"|qdot|_inf exceeded {DIVERGENCE_LIMIT:g}")
        states[k + 1] = x

    t = np.arange(n + 1) * dt
    return _record(config, t, states, trajectory)


def _record(config, t, states, trajectory) -> SimResult:
    params, ctl = config.params, config.controller
    q, qdot, z = states[:, :2], states[:, 2:4], states[:, 4:]
    qd = np.empty_like(q)
    qd_dot = np.empty_like(q)
    u = np.empty_like(q)
    sigma = np.empty_like(q)
    has_sigma = False
    for k, tk in enumerate(t):
        traj = trajectory(tk)
        qd[k], qd_dot[k] = traj.qd, traj.qd_dot
        u[k] = ctl.torque(params, q[k], qdot[k], traj, z[k])
        s = ctl.sigma(q[k], qdot[k], traj)
        if s is not None:
            sigma[k] = s
            has_sigma = True

    result = SimResult(config=config, t=t, q=q.copy(), qdot=qdot.copy(), qd=qd,
                       qd_dot=qd_dot, u=u, q_tilde=q - qd,
                       sigma=sigma if has_sigma else None,
                       internal=z.copy() if z.shape[1] else None)
    if isinstance(ctl, LyapunovController):
        result.d_hat = z.copy()
        result.V = lyapunov_function(params, result.q, sigma, config.disturbance.vector - z,
                                     ctl.gains.ki)
    return result


def lyapunov_function(params: ManipulatorParams, q, sigma, d_tilde, ki: float) -> np.ndarray:
    """``V = 1/2 sigma' D(q) sigma + 1/2 d_tilde' d_tilde / ki`` row-wise."""
    out = np.empty(len(q))
    for k in range(len(q)):
        s = sigma[k]
        out[k] = 0.5 * s @ mass_matrix(params, q[k]) @ s
    return out + 0.5 * np.sum(d_tilde**2, axis=1) / ki


@dataclass(frozen=True)
class Metrics:
    rms_error: float
    max_abs_u: tuple[float, float]
    terminal_error: float
    steady_state_error: float
    estimator_error: float | None = None

    def as_dict(self) -> dict:
        return {
            "rms_error": self.rms_error,
            "max_abs_u": list(self.max_abs_u),
            "terminal_error": self.terminal_error,
            "steady_state_error": self.steady_state_error,
            "estimator_error": self.estimator_error,
        }


def metrics(result: SimResult, settle_window: float) -> Metrics:
    t_end = result.t[-1]
    if not 0 < settle_window < t_end:
        raise ValueError(f"settle_window must lie in (0, {t_end}), got {settle_window!r}")
    err_sq = np.sum(result.q_tilde**2, axis=1)
    tail = result.t >= t_end - settle_window - 1e-12
    est = None
    if result.d_hat is not None:
        est = float(np.linalg.norm(result.d_hat[-1] - result.d))
    return Metrics(
        rms_error=float(np.sqrt(np.mean(err_sq))),
        max_abs_u=tuple(float(x) for x in np.max(np.abs(result.u), axis=0)),
        terminal_error=float(np.sqrt(err_sq[-1])),
        steady_state_error=float(np.sqrt(np.mean(err_sq[tail]))),
        estimator_error=est,
    )


def error_envelope(result: SimResult, transient: float, window: float) -> np.ndarray:
    """Peak tracking-error norm in consecutive windows after ``transient``."""
    err = np.linalg.norm(result.q_tilde, axis=1)
    edges = np.arange(transient, result.t[-1] + 1e-12, window)
    peaks = []
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (result.t >= a) & (result.t < b)
        peaks.append(err[mask].max())
    return np.array(peaks)


def is_settling(envelope: np.ndarray, rtol: float = 1e-2, atol: float = 1e-9) -> bool:
    """True when each window peak is no larger than the one before it."""
    return bool(np.all(envelope[1:] <= envelope[:-1] * (1 + rtol) + atol))


def self_convergence_order(config: SimConfig, dts=(4e-3, 2e-3, 1e-3)) -> float:
    """Observed order from three runs at successively halved steps.

    States are compared on the coarsest grid; the order is
    ``log2(|x_h - x_h/2| / |x_h/2 - x_h/4|)`` using max-norm differences.
    """
    from dataclasses import replace

    coarse, mid, fine = (simulate(replace(config, dt=h)) for h in dts)
    r1, r2 = round(dts[0] / dts[1]), round(dts[0] / dts[2])

    def stack(res, stride):
        x = np.hstack([res.q, res.qdot] + ([res.internal] if res.internal is not None else []))
        return x[::stride]

    a, b, c = stack(coarse, 1), stack(mid, r1), stack(fine, r2)
    m = min(len(a), len(b), len(c))
    e1 = np.max(np.abs(a[:m] - b[:m]))
    e2 = np.max(np.abs(b[:m] - c[:m]))
    return float(math.log(e1 / e2, dts[0] / dts[1]))
