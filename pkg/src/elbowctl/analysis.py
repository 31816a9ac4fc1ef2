"""Linear error-dynamics analysis and Lyapunov certificates over traces."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import cumulative_simpson

from .controllers import DiscontinuousController, LyapGains, LyapunovController, switching_term
from .sim import SimResult, lyapunov_function, rk4_step


class NotHurwitzError(ValueError):
    pass


class TraceMismatchError(ValueError):
    """The trace was not produced by the controller the check expects."""


@dataclass(frozen=True)
class CubicCharPoly:
    """``s^3 + kd s^2 + kp s + ki``, the per-joint error characteristic polynomial."""

    kd: float
    kp: float
    ki: float

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([1.0, self.kd, self.kp, self.ki])


class HurwitzResult(NamedTuple):
    stable: bool
    margin: float


def hurwitz_check(poly: CubicCharPoly) -> HurwitzResult:
    """Routh-Hurwitz test for a monic cubic. ``margin`` is ``kd*kp - ki``."""
    margin = poly.kd * poly.kp - poly.ki
    return HurwitzResult(poly.kd > 0 and poly.ki > 0 and margin > 0, margin)


def characteristic_roots(poly: CubicCharPoly, cluster_tol: float = 1e-4) -> np.ndarray:
    """Roots of the characteristic polynomial, sorted, with repeated roots resolved.

    Companion-matrix roots of a multiplicity-m root scatter by about
    ``eps**(1/m)``. Roots closer than ``cluster_tol`` (relative) are merged
    and the cluster mean is polished by Newton's method on the (m-1)th
    derivative, where the repeated root is simple. The merge is kept only if
    its residual is no worse than that of the raw roots.
    """
    coeffs = poly.coefficients
    remaining = list(np.roots(coeffs))
    scale = max(1.0, max(abs(r) for r in remaining))
    roots = []
    while remaining:
        cluster = [remaining.pop(0)]
        grew = True
        while grew:
            near = [r for r in remaining
                    if min(abs(r - c) for c in cluster) <= cluster_tol * scale]
            remaining = [r for r in remaining if all(r is not n for n in near)]
            cluster += near
            grew = bool(near)
        if len(cluster) == 1:
            roots.append(complex(cluster[0]))
            continue
        p = np.polyder(coeffs, len(cluster) - 1)
        dp = np.polyder(p)
        z = complex(np.mean(cluster))
        for _ in range(4):
            slope = np.polyval(dp, z)
            if slope == 0:
                break
            z -= np.polyval(p, z) / slope
        raw_residual = max(abs(np.polyval(coeffs, r)) for r in cluster)
        if abs(np.polyval(coeffs, z)) <= raw_residual:
            roots.extend([z] * len(cluster))
        else:
            roots.extend(complex(r) for r in cluster)
    return np.sort_complex(np.array(roots))


def error_transfer(poly: CubicCharPoly, s: complex) -> complex:
    """Disturbance-to-error transfer ``s / (s^3 + kd s^2 + kp s + ki)``."""
    return s / (s**3 + poly.kd * s**2 + poly.kp * s + poly.ki)


def steady_state_error(poly: CubicCharPoly, delta: float) -> float:
    """Final value of the joint error under a constant disturbance ``delta``."""
    if not hurwitz_check(poly).stable:
        raise NotHurwitzError(
            f"final value undefined: s^3 + {poly.kd} s^2 + {poly.kp} s + {poly.ki} is not Hurwitz")
    # final-value theorem: lim s->0 of s * E(s), E(s) = G(s) delta / s
    return float(error_transfer(poly, 0.0).real * delta)


def simulate_error_dynamics(poly: CubicCharPoly, x0, t_end: float, dt: float = 1e-3):
    """Integrate ``e''' + kd e'' + kp e' + ki e = 0`` from ``x0 = (e, e', e'')``.

    With a constant disturbance the forcing term is its derivative, which is
    zero for ``t > 0``; the disturbance only shows up through the initial
    conditions. Returns ``(t, e)``.
    """
    A = np.array([[0.0, 1.0, 0.0],
                  [0.0, 0.0, 1.0],
                  [-poly.ki, -poly.kp, -poly.kd]])
    n = int(math.floor(t_end / dt + 1e-9))
    x = np.asarray(x0, dtype=float)
    e = np.empty(n + 1)
    e[0] = x[0]
    f = lambda t, x: A @ x
    for k in range(n):
        x = rk4_step(f, x, k * dt, dt)
        e[k + 1] = x[0]
    return np.arange(n + 1) * dt, e


@dataclass
class Certificate:
    name: str
    passed: bool
    worst_violation: float
    worst_index: int
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_violation": self.worst_violation,
            "worst_index": self.worst_index,
            "tolerance": self.tolerance,
        }


@dataclass
class CertificateReport:
    certificates: dict[str, Certificate] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates.values())

    def add(self, name, violations, tolerance):
        violations = np.asarray(violations, dtype=float)
        idx = int(np.argmax(violations))
        worst = float(violations[idx])
        self.certificates[name] = Certificate(name, bool(worst <= tolerance), worst, idx,
                                              float(tolerance))

    def __getitem__(self, name) -> Certificate:
        return self.certificates[name]

    def as_dict(self) -> dict:
        return {"passed": self.passed,
                "certificates": {k: c.as_dict() for k, c in self.certificates.items()}}


def lyapunov_certificates(trace: SimResult, gains: LyapGains | None = None,
                          true_d=None, *, monotone_tol: float | None = None,
                          rate_tol: float | None = None,
                          passivity_rtol: float = 1e-4) -> CertificateReport:
    """Evaluate the stability certificates of the estimator-based law over a trace.

    ``monotone``  V never increases by more than ``monotone_tol`` per step.
    ``rate``      central-difference dV/dt matches ``-sigma' Kd sigma`` within
                  ``dt^2 max|d3V/dt3|``, the stencil's truncation scale.
    ``l2_bound``  running integral of ``sigma' Kd sigma`` stays below V(0).
    ``passivity`` integral of ``-sigma' d_tilde`` equals ``V1(t) - V1(0)``,
                  ``V1 = d_tilde' d_tilde / (2 ki)``, relative to ``max(V1)``.

    Other absolute tolerances default to ``max(1e-4 |V(0)|, 1e-8)``.
    Integrals use cumulative Simpson quadrature. V is recomputed from the
    recorded q, sigma and d_hat, not read back.
    """
    ctl = trace.config.controller
    if not isinstance(ctl, LyapunovController) or trace.sigma is None or trace.d_hat is None:
        raise TraceMismatchError(
            f"lyapunov_certificates needs a Lyapunov-controller trace, got {ctl.kind!r}")
    gains = gains or ctl.gains
    d = trace.d if true_d is None else np.asarray(true_d, dtype=float)
    dt = trace.config.dt
    sigma = trace.sigma
    d_tilde = d - trace.d_hat

    V = lyapunov_function(trace.config.params, trace.q, sigma, d_tilde, gains.ki)
    dissipation = gains.kd * np.sum(sigma**2, axis=1)
    default_tol = max(1e-4 * abs(V[0]), 1e-8)

    report = CertificateReport()
    report.add("monotone", np.concatenate(([-np.inf], np.diff(V))),
               default_tol if monotone_tol is None else monotone_tol)

    rate_err = np.zeros_like(V)
    rate_err[1:-1] = np.abs((V[2:] - V[:-2]) / (2 * dt) + dissipation[1:-1])
    if rate_tol is None:
        # dV/dt = -dissipation, so the second difference of dissipation is dt^2 d3V/dt3
        third = np.abs(np.diff(dissipation, 2)) if len(V) > 2 else np.zeros(1)
        rate_tol = max(default_tol, float(third.max()))
    report.add("rate", rate_err, rate_tol)

    spent = cumulative_simpson(dissipation, dx=dt, initial=0.0)
    report.add("l2_bound", spent - V[0], default_tol)

    V1 = 0.5 * np.sum(d_tilde**2, axis=1) / gains.ki
    supplied = cumulative_simpson(-np.sum(sigma * d_tilde, axis=1), dx=dt, initial=0.0)
    scale = max(float(np.max(V1)), 1e-12)
    report.add("passivity", np.abs(supplied - (V1 - V1[0])) / scale, passivity_rtol)
    return report


def switching_certificate(trace: SimResult, rtol: float = 1e-12) -> CertificateReport:
    """Switching term of the unit-vector law never exceeds its gain."""
    ctl = trace.config.controller
    if not isinstance(ctl, DiscontinuousController) or trace.sigma is None:
        raise TraceMismatchError(
            f"switching_certificate needs a discontinuous-controller trace, got {ctl.kind!r}")
    k = ctl.gains.kd_switch
    norms = np.array([np.linalg.norm(switching_term(s, ctl.gains)) for s in trace.sigma])
    report = CertificateReport()
    report.add("switching_bound", norms - k, rtol * k)
    return report
