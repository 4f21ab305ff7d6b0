import numpy as np
import pytest

from dphelm.environment import WindParams, wind_regressor
from dphelm.observer import (
    ObserverGains,
    ObserverState,
    alarm_update,
    input_matrix,
    kyp_residual,
    observer_nn_rate,
    observer_rhs,
    stacked_drift,
    wind_coeff_rate,
)
from dphelm.rbf import RbfNetwork, basis_eval
from dphelm.vessel import VesselModel, VesselState, dynamics_rhs, rotation_matrix


def cybership_model() -> VesselModel:
    M = np.array([[25.8, 0.0, 0.0], [0.0, 33.8, 1.0115], [0.0, 1.0115, 2.76]])
    return VesselModel(M=M, D_linear=np.diag([0.72253, 0.88965, 1.9]))


def default_gains() -> ObserverGains:
    return ObserverGains.build()


def make_state(x_hat=None, phi=None) -> ObserverState:
    return ObserverState(
        x_hat=np.zeros(6) if x_hat is None else x_hat,
        phi_hat=np.array([0.024, 0.056, 0.033]) if phi is None else phi,
        w_d=np.zeros((8, 3)),
    )


class TestKypResidual:
    def test_exact_identity(self):
        A = -np.eye(6)
        P = np.eye(6)
        Q = np.sqrt(2.0) * np.eye(6)
        assert kyp_residual(A, P, Q) == pytest.approx(0.0, abs=1e-14)

    def test_constructed_gains_satisfy_identity(self):
        g = default_gains()
        assert kyp_residual(g.A, g.P, g.Q) < 1e-10

    def test_perturbation_detected(self):
        g = default_gains()
        P_bad = g.P + np.diag([0.01, 0, 0, 0, 0, 0])
        assert kyp_residual(g.A, P_bad, g.Q) > 1e-3

    def test_printed_injection_relation_is_inconsistent(self):
        # the printed values L = 5I, C = I, P = 5I do not satisfy L = P^-1 C'
        assert default_gains().l_relation_residual() > 1.0


class TestObserverRhs:
    def test_exact_estimate_matches_plant(self):
        model = cybership_model()
        gains = default_gains()
        wind = WindParams(
            rho_air=1.23, A_T=0.01, A_L=0.025, L_v=1.255, beta_w=0.0, V_w=16.0,
            phi=np.array([0.1, 0.14, 0.1]),
        )
        eta = np.array([1.0, -2.0, 0.6])
        nu = np.array([0.05, -0.02, 0.01])
        x = np.concatenate([eta, nu])
        tau = np.array([0.3, -0.1, 0.05])
        Pi = wind_regressor(eta[2], wind)

        rate_obs = observer_rhs(
            x.copy(), x.copy(), tau, Pi, wind.phi, gains, model, mode="pre"
        )
        pose_rate, vel_rate = dynamics_rhs(
            VesselState(eta, nu), tau, np.zeros(3), Pi @ wind.phi, np.zeros(3), model
        )
        np.testing.assert_allclose(rate_obs, np.concatenate([pose_rate, vel_rate]),
                                   atol=1e-12)

    def test_injection_isolated(self):
        model = VesselModel(
            M=np.eye(3),
            damping=lambda nu: np.zeros((3, 3)),
            coriolis=lambda nu: np.zeros((3, 3)),
        )
        gains = default_gains()
        x_meas = np.array([0.4, -0.3, 0.2, 0.0, 0.0, 0.0])
        x_hat = np.zeros(6)
        rate = observer_rhs(
            x_hat, x_meas, np.zeros(3), np.zeros((3, 3)), np.zeros(3),
            gains, model, mode="pre",
        )
        np.testing.assert_allclose(
            rate, gains.L @ (gains.C_meas @ (x_meas - x_hat)), atol=1e-13
        )

    def test_matches_independent_transcription(self):
        # literal re-transcription of the post-alarm observer right-hand side
        rng = np.random.default_rng(21)
        model = cybership_model()
        gains = default_gains()
        net = RbfNetwork.from_ranges(
            np.array([[-0.5, 0.5]] * 5 + [[-2.0, 2.0]]), 8, seed=3
        )
        net.weights = 0.1 * rng.standard_normal((8, 3))
        x_hat = rng.standard_normal(6) * 0.5
        x_meas = x_hat + 0.05 * rng.standard_normal(6)
        tau = rng.standard_normal(3)
        phi = rng.uniform(0.0, 0.2, 3)
        Pi = np.diag(rng.standard_normal(3))
        z_ow = rng.uniform(-0.4, 0.4, 6)

        rate = observer_rhs(
            x_hat, x_meas, tau, Pi, phi, gains, model,
            net=net, z_ow=z_ow, mode="post",
        )

        J = rotation_matrix(x_hat[2])
        f_x = np.concatenate([
            J @ x_hat[3:],
            -model.M_inv @ ((model.coriolis(x_hat[3:]) + model.damping(x_hat[3:]))
                            @ x_hat[3:]),
        ])
        R = np.zeros((6, 3))
        R[3:] = model.M_inv
        s_vec = np.array([
            np.exp(-np.sum((z_ow - net.centers[i]) ** 2) / net.widths[i] ** 2)
            for i in range(8)
        ])
        expected = (
            f_x
            + R @ (tau + net.weights.T @ s_vec + Pi @ phi)
            + gains.L @ gains.C_meas @ (x_meas - x_hat)
        )
        np.testing.assert_allclose(rate, expected, atol=1e-12)

    def test_post_mode_requires_network(self):
        model = cybership_model()
        with pytest.raises(ValueError):
            observer_rhs(
                np.zeros(6), np.zeros(6), np.zeros(3), np.zeros((3, 3)),
                np.zeros(3), default_gains(), model, mode="post",
            )


class TestWindCoeffRate:
    def test_zero_error_freezes(self):
        model = cybership_model()
        rate = wind_coeff_rate(np.zeros(6), np.diag([1.0, 2.0, 3.0]),
                               default_gains(), model)
        np.testing.assert_array_equal(rate, np.zeros(3))

    def test_gain_linearity(self):
        model = cybership_model()
        rng = np.random.default_rng(4)
        x_tilde = rng.standard_normal(6)
        Pi = np.diag(rng.standard_normal(3))
        g1 = default_gains()
        g2 = ObserverGains.build(gamma_diag=(300.0, 1800.0, 300.0))
        r1 = wind_coeff_rate(x_tilde, Pi, g1, model)
        r2 = wind_coeff_rate(x_tilde, Pi, g2, model)
        np.testing.assert_allclose(r2, 3.0 * r1, rtol=1e-12)

    def test_matches_matrix_chain(self):
        model = cybership_model()
        gains = default_gains()
        rng = np.random.default_rng(8)
        x_tilde = rng.standard_normal(6)
        Pi = np.diag(rng.standard_normal(3))
        R = input_matrix(model)
        expected = 2.0 * gains.Gamma.T @ Pi.T @ R.T @ gains.P.T @ x_tilde
        np.testing.assert_allclose(
            wind_coeff_rate(x_tilde, Pi, gains, model), expected, atol=1e-12
        )

    def test_superposition_in_error(self):
        model = cybership_model()
        gains = default_gains()
        rng = np.random.default_rng(17)
        Pi = np.diag(rng.standard_normal(3))
        a, b = rng.standard_normal(6), rng.standard_normal(6)
        r = wind_coeff_rate(2.0 * a - 3.0 * b, Pi, gains, model)
        ra = wind_coeff_rate(a, Pi, gains, model)
        rb = wind_coeff_rate(b, Pi, gains, model)
        np.testing.assert_allclose(r, 2.0 * ra - 3.0 * rb, atol=1e-12)


class TestObserverNnRate:
    def test_zero_error_zero_rate(self):
        model = cybership_model()
        rate = observer_nn_rate(np.zeros(6), np.ones(8), default_gains(), model)
        np.testing.assert_array_equal(rate, np.zeros((8, 3)))

    def test_zero_basis_zero_rate(self):
        model = cybership_model()
        rate = observer_nn_rate(np.ones(6), np.zeros(8), default_gains(), model)
        np.testing.assert_array_equal(rate, np.zeros((8, 3)))

    def test_matches_per_channel_formula(self):
        model = cybership_model()
        gains = default_gains()
        rng = np.random.default_rng(30)
        x_tilde = rng.standard_normal(6)
        basis = rng.uniform(0.0, 1.0, 8)
        rate = observer_nn_rate(x_tilde, basis, gains, model)
        xpr = x_tilde @ gains.P @ input_matrix(model)
        for i in range(3):
            np.testing.assert_allclose(
                rate[:, i], -gains.omega_nn[i] * xpr[i] * basis, atol=1e-12
            )


class TestAlarm:
    def _fill(self, state, values, t0=0.0, dt=0.02, seconds=5.0):
        gains = default_gains()
        n = int(seconds / dt) + 1
        for k in range(n):
            state.phi_hat = np.asarray(values, dtype=float)
            state.record_phi(t0 + k * dt, gains.alarm_window)
        return t0 + (n - 1) * dt

    def test_converged_values_do_not_alarm(self):
        state = make_state()
        t = self._fill(state, [0.1, 0.14, 0.1])
        assert alarm_update(state, t, default_gains()) is False

    def test_sustained_overshoot_alarms(self):
        state = make_state()
        t = self._fill(state, [0.25, 0.25, 0.25])
        assert alarm_update(state, t, default_gains()) is True
        assert state.alarm_time == t

    def test_single_spike_does_not_alarm(self):
        state = make_state()
        gains = default_gains()
        t = self._fill(state, [0.1, 0.1, 0.1])
        state.phi_hat = np.array([5.0, 0.1, 0.1])
        state.record_phi(t + 0.02, gains.alarm_window)
        assert alarm_update(state, t + 0.02, gains) is False

    def test_no_alarm_before_full_window(self):
        state = make_state()
        gains = default_gains()
        t = self._fill(state, [5.0, 5.0, 5.0], seconds=2.0)
        assert alarm_update(state, t, gains) is False

    def test_latch_is_permanent(self):
        state = make_state()
        gains = default_gains()
        t = self._fill(state, [0.3, 0.1, 0.1])
        assert alarm_update(state, t, gains) is True
        t2 = self._fill(state, [0.0, 0.0, 0.0], t0=t + 0.02)
        assert alarm_update(state, t2, gains) is True
        assert state.alarm_time == t

    def test_any_component_triggers(self):
        gains = default_gains()
        for idx in range(3):
            state = make_state()
            vals = [0.05, 0.05, 0.05]
            vals[idx] = 0.22
            t = self._fill(state, vals)
            assert alarm_update(state, t, gains) is True


class TestStackedDrift:
    def test_matches_block_definition(self):
        model = cybership_model()
        rng = np.random.default_rng(2)
        x = rng.standard_normal(6)
        out = stacked_drift(x, model)
        J = rotation_matrix(x[2])
        np.testing.assert_allclose(out[:3], J @ x[3:], atol=1e-14)
        np.testing.assert_allclose(
            out[3:],
            -model.M_inv @ ((model.coriolis(x[3:]) + model.damping(x[3:])) @ x[3:]),
            atol=1e-14,
        )
