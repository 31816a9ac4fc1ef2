import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elbowctl.controllers import (
    DiscGains,
    DiscontinuousController,
    InvDynGains,
    InvDynState,
    InverseDynamicsController,
    LyapGains,
    LyapState,
    LyapunovController,
    TrajectoryPoint,
    discontinuous_control,
    inverse_dynamics_control,
    lyapunov_control,
    lyapunov_torque,
    saturate,
    sliding_variables,
    switching_term,
)
from elbowctl.dynamics import (
    JointState,
    ManipulatorParams,
    coriolis_matrix,
    forward_dynamics,
    gravity_vector,
    mass_matrix,
)
from elbowctl.sim import DisturbanceSpec, SimConfig, desired_trajectory, simulate

finite = st.floats(-3.0, 3.0)
vec2 = st.tuples(finite, finite).map(np.array)


def on_trajectory(t=0.7):
    traj = desired_trajectory(t)
    return JointState(traj.qd, traj.qd_dot), traj


class TestSlidingVariables:
    def test_zero_on_trajectory(self):
        state, traj = on_trajectory()
        sv = sliding_variables(state, traj, 2.0)
        np.testing.assert_array_equal(sv.sigma, 0.0)
        np.testing.assert_array_equal(sv.q_tilde, 0.0)

    def test_position_error_only(self):
        traj = TrajectoryPoint(np.zeros(2), np.zeros(2), np.zeros(2))
        sv = sliding_variables(JointState([0.1, 0.0], [0.0, 0.0]), traj, 2.0)
        np.testing.assert_allclose(sv.sigma, [0.2, 0.0])

    @given(q=vec2, qdot=vec2, qd=vec2, qd_dot=vec2, qd_ddot=vec2, lam=st.floats(0.1, 10))
    def test_identity(self, q, qdot, qd, qd_dot, qd_ddot, lam):
        traj = TrajectoryPoint(qd, qd_dot, qd_ddot)
        sv = sliding_variables(JointState(q, qdot), traj, lam)
        np.testing.assert_allclose(sv.sigma, (qdot - qd_dot) + lam * (q - qd), atol=1e-14)
        np.testing.assert_allclose(sv.xi_ddot, qd_ddot - lam * (qdot - qd_dot), atol=1e-14)


class TestGains:
    def test_non_hurwitz_inverse_dynamics_gains_rejected(self):
        with pytest.raises(ValueError, match="kd\\*kp > ki"):
            InvDynGains(kd=1, kp=1, ki=2)

    @pytest.mark.parametrize("cls,kw", [(LyapGains, {"lam": 0.0}), (DiscGains, {"epsilon": -1e-3}),
                                        (InvDynGains, {"ki": 0.0})])
    def test_nonpositive_rejected(self, cls, kw):
        with pytest.raises(ValueError):
            cls(**kw)


class TestFeedforwardAgreement:
    """At zero error and zero internal state all laws issue the same torque."""

    def test_all_laws_reduce_to_feedforward(self, params):
        state, traj = on_trajectory(1.3)
        q, qdot = state.q, state.qdot
        expected = (mass_matrix(params, q) @ traj.qd_ddot
                    + coriolis_matrix(params, q, qdot) @ traj.qd_dot
                    + gravity_vector(params, q))
        z = np.zeros(2)
        for ctl in (InverseDynamicsController(), LyapunovController()):
            np.testing.assert_allclose(ctl.torque(params, q, qdot, traj, z), expected, atol=1e-13)
        np.testing.assert_allclose(discontinuous_control(params, state, traj, DiscGains()),
                                   expected, atol=1e-13)

    def test_inverse_dynamics_step_pure_feedforward(self, params):
        state, traj = on_trajectory(0.2)
        u, _ = inverse_dynamics_control(params, state, traj, InvDynGains(), InvDynState(), 1e-3)
        v = traj.qd_ddot
        np.testing.assert_allclose(
            u, mass_matrix(params, state.q) @ v
            + coriolis_matrix(params, state.q, state.qdot) @ traj.qd_dot
            + gravity_vector(params, state.q), atol=1e-13)


class TestLyapunovLaw:
    @given(q=vec2, qdot=vec2, t=st.floats(0, 20), d=vec2)
    def test_perfect_estimate_gives_reference_acceleration(self, q, qdot, t, d):
        p = ManipulatorParams()
        traj = desired_trajectory(t)
        gains = LyapGains()
        state = JointState(q, qdot)
        sv = sliding_variables(state, traj, gains.lam)
        u, sigma = lyapunov_torque(p, q, qdot, traj, gains, d_hat=d)
        acc = forward_dynamics(p, state, u, d)
        # closed loop: D sigma_dot + C sigma + Kd sigma = 0 when d_hat = d
        sigma_dot = acc - sv.xi_ddot
        residual = (mass_matrix(p, q) @ sigma_dot + coriolis_matrix(p, q, qdot) @ sigma
                    + gains.kd * sigma)
        assert np.max(np.abs(residual)) < 1e-10
        if np.allclose(sigma, 0):
            np.testing.assert_allclose(acc, sv.xi_ddot, atol=1e-10)

    def test_sampled_estimator_is_trapezoidal(self, params):
        # frozen state => sigma constant => d_hat grows linearly at ki * sigma
        traj = TrajectoryPoint(np.zeros(2), np.zeros(2), np.zeros(2))
        state = JointState([0.1, -0.05], [0.0, 0.0])
        gains = LyapGains(kd=2, ki=3, lam=2)
        ctl_state = LyapState()
        for _ in range(11):
            u, ctl_state = lyapunov_control(params, state, traj, gains, ctl_state, 0.01)
        np.testing.assert_allclose(ctl_state.d_hat, 3 * np.array([0.2, -0.1]) * 0.1, rtol=1e-12)

    def test_first_sample_uses_zero_estimate(self, params):
        state, traj = on_trajectory()
        state = JointState(state.q + 0.1, state.qdot)
        u0, st1 = lyapunov_control(params, state, traj, LyapGains(), LyapState(), 1e-3)
        u_ref, _ = lyapunov_torque(params, state.q, state.qdot, traj, LyapGains(), np.zeros(2))
        np.testing.assert_allclose(u0, u_ref)
        np.testing.assert_array_equal(st1.d_hat, 0.0)


class TestInverseDynamicsSampled:
    def test_integral_of_linear_error_is_exact(self, params):
        # error grows linearly in time; trapezoid integrates it exactly
        gains = InvDynGains()
        ctl_state = InvDynState()
        dt, a = 0.05, np.array([0.3, -0.2])
        for k in range(21):
            t = k * dt
            traj = TrajectoryPoint(a * t, np.zeros(2), np.zeros(2))
            _, ctl_state = inverse_dynamics_control(params, JointState([0, 0], [0, 0]), traj,
                                                    gains, ctl_state, dt)
        np.testing.assert_allclose(ctl_state.integral_error, a * 1.0**2 / 2, rtol=1e-12)

    def test_rejects_nonpositive_dt(self, params):
        state, traj = on_trajectory()
        with pytest.raises(ValueError, match="dt"):
            inverse_dynamics_control(params, state, traj, InvDynGains(), InvDynState(), 0.0)


class TestSwitchingTerm:
    def test_zero_sigma_is_regular(self, params):
        state, traj = on_trajectory()
        np.testing.assert_array_equal(switching_term(np.zeros(2), DiscGains()), 0.0)

    def test_unit_sigma_gives_unit_direction(self):
        sigma = np.array([0.6, 0.8])
        assert np.linalg.norm(saturate(sigma, 1e-2)) == pytest.approx(1.0)

    @given(sigma=vec2.filter(lambda s: np.linalg.norm(s) > 1e-3), c=st.floats(1.0, 100.0))
    def test_direction_only_outside_layer(self, sigma, c):
        eps = 1e-3
        np.testing.assert_allclose(saturate(c * sigma, eps), saturate(sigma, eps), atol=1e-12)

    @given(sigma=vec2, kd=st.floats(0.1, 50), eps=st.floats(1e-4, 1.0))
    def test_norm_bounded_by_gain(self, sigma, kd, eps):
        gains = DiscGains(kd_switch=kd, epsilon=eps)
        norm = np.linalg.norm(switching_term(sigma, gains))
        assert norm <= kd * (1 + 1e-12)
        if np.linalg.norm(sigma) >= eps:
            assert norm == pytest.approx(kd, rel=1e-12)

    def test_linear_inside_layer(self):
        sigma = np.array([1e-3, -2e-3])
        np.testing.assert_allclose(switching_term(sigma, DiscGains(kd_switch=5, epsilon=1e-2)),
                                   5 * sigma / 1e-2)


def _central(x, dt):
    return (x[2:] - x[:-2]) / (2 * dt)


class TestClosedLoopErrorDynamics:
    @staticmethod
    def _inverse_dynamics_residual(dt):
        p = ManipulatorParams()
        gains = InvDynGains()
        d = np.array([1.0, -0.5])
        res = simulate(SimConfig(params=p, controller=InverseDynamicsController(gains),
                                 disturbance=DisturbanceSpec(tuple(d)), t_end=2.0, dt=dt))
        e, edot = res.q_tilde, res.qdot - res.qd_dot
        e2 = _central(edot, dt)
        e3 = (edot[2:] - 2 * edot[1:-1] + edot[:-2]) / dt**2
        delta = np.array([np.linalg.solve(mass_matrix(p, q), d) for q in res.q])
        lhs = e3 + gains.kd * e2 + gains.kp * edot[1:-1] + gains.ki * e[1:-1]
        return np.max(np.abs(lhs - _central(delta, dt)))

    def test_inverse_dynamics_error_equation(self):
        """Along a run, e''' + kd e'' + kp e' + ki e = d/dt (D^-1 d).

        The derivatives are finite differences, so the residual is O(dt^2)
        truncation: small, and about 4x smaller when dt halves.
        """
        coarse = self._inverse_dynamics_residual(1e-3)
        fine = self._inverse_dynamics_residual(5e-4)
        assert coarse < 2e3 * 1e-3**2
        assert coarse / fine > 3.5

    def test_lyapunov_sliding_equation(self):
        """Along a run, D sigma' + C sigma + Kd sigma = d - d_hat."""
        p = ManipulatorParams()
        gains = LyapGains()
        d = np.array([1.0, 0.5])
        dt = 1e-3
        res = simulate(SimConfig(params=p, controller=LyapunovController(gains),
                                 disturbance=DisturbanceSpec(tuple(d)), t_end=3.0, dt=dt))
        sigma_dot = _central(res.sigma, dt)
        residual = []
        for k in range(1, len(res) - 1):
            q, qdot, s = res.q[k], res.qdot[k], res.sigma[k]
            residual.append(mass_matrix(p, q) @ sigma_dot[k - 1] + coriolis_matrix(p, q, qdot) @ s
                            + gains.kd * s - (d - res.d_hat[k]))
        assert np.max(np.abs(residual)) < 1e-4


class TestControllerSpecs:
    def test_internal_state_sizes(self):
        assert InverseDynamicsController().initial_internal().shape == (2,)
        np.testing.assert_array_equal(LyapunovController(d_hat0=(1.0, 2.0)).initial_internal(),
                                      [1.0, 2.0])
        assert DiscontinuousController().initial_internal().shape == (0,)
