import numpy as np
import pytest

from dphelm.controller import (
    BarrierViolation,
    ControllerGains,
    actuator_command,
    auxiliary_state,
    control_law,
    controller_nn_update_and_augment,
    stabilizing_function,
    tracking_errors,
    wrap_angle,
    zf_rate,
)
from dphelm.rbf import RbfNetwork, basis_eval
from dphelm.vessel import DelayLine, VesselModel, delay_read_and_integral, rotation_matrix

N_B = np.array([0.3, 0.3, np.pi / 6])


def cybership_model() -> VesselModel:
    M = np.array([[25.8, 0.0, 0.0], [0.0, 33.8, 1.0115], [0.0, 1.0115, 2.76]])
    return VesselModel(M=M, D_linear=np.diag([0.72253, 0.88965, 1.9]))


def default_gains(eps_pinv=1e-3) -> ControllerGains:
    return ControllerGains(
        K1=np.array([0.5, 0.5, 0.35]),
        K2=np.array([0.9, 0.9, 0.6]),
        Gamma1=np.array([0.15, 0.15, 0.3]),
        Theta=np.array([0.15, 0.15, 0.15]),
        N_b=N_B,
        upsilon=np.array([2.2, 2.2, 2.2]),
        xi=np.array([2.2, 2.2, 2.2]),
        eps_pinv=eps_pinv,
    )


class TestTrackingErrors:
    def test_zero_errors(self):
        eta = np.array([1.0, 2.0, 0.5])
        nu = np.array([0.1, 0.0, 0.02])
        z1, z2 = tracking_errors(eta, eta, nu, nu)
        np.testing.assert_array_equal(z1, np.zeros(3))
        np.testing.assert_array_equal(z2, np.zeros(3))

    def test_plain_difference(self):
        eta_d = np.array([0.1, -0.2, 0.05])
        z1, _ = tracking_errors(eta_d, np.zeros(3), np.zeros(3), np.zeros(3))
        np.testing.assert_allclose(z1, [0.1, -0.2, 0.05], atol=1e-15)

    def test_yaw_wrap(self):
        eta_d = np.array([0.0, 0.0, 3.1])
        eta = np.array([0.0, 0.0, -3.1])
        z1, _ = tracking_errors(eta_d, eta, np.zeros(3), np.zeros(3))
        assert z1[2] == pytest.approx(6.2 - 2.0 * np.pi, abs=1e-12)

    def test_wrap_endpoints(self):
        assert wrap_angle(np.pi) == pytest.approx(np.pi)
        assert wrap_angle(-np.pi) == pytest.approx(np.pi)
        assert wrap_angle(0.0) == 0.0


class TestStabilizingFunction:
    def test_zero_error_passthrough(self):
        rate = np.array([0.1, -0.05, 0.02])
        psi = 0.8
        alpha = stabilizing_function(rate, np.zeros(3), psi, np.diag([0.5, 0.5, 0.35]), N_B)
        np.testing.assert_allclose(alpha, rotation_matrix(psi).T @ rate, atol=1e-14)

    def test_printed_form_value(self):
        # direct evaluation with the printed reference gains
        K1 = 0.006 * np.eye(3)
        z1 = np.array([0.1, 0.0, 0.0])
        alpha = stabilizing_function(np.zeros(3), z1, 0.0, K1, N_B)
        scale = float(N_B @ N_B - z1 @ z1)
        assert alpha[0] == pytest.approx(scale * 0.006 * 0.1, abs=1e-15)
        assert alpha[1] == 0.0 and alpha[2] == 0.0

    def test_linear_in_reference_rate(self):
        z1 = np.array([0.05, -0.1, 0.1])
        K1 = np.diag([0.5, 0.5, 0.35])
        rate = np.array([0.2, 0.1, -0.05])
        a1 = stabilizing_function(rate, z1, 0.4, K1, N_B)
        a2 = stabilizing_function(3.0 * rate, z1, 0.4, K1, N_B)
        base = stabilizing_function(np.zeros(3), z1, 0.4, K1, N_B)
        np.testing.assert_allclose(a2 - base, 3.0 * (a1 - base), atol=1e-12)

    def test_barrier_violation_raises(self):
        z1 = np.array([0.31, 0.0, 0.0])
        with pytest.raises(BarrierViolation) as exc:
            stabilizing_function(np.zeros(3), z1, 0.0, np.eye(3), N_B)
        assert exc.value.axis == 0


class TestAuxiliaryState:
    def test_empty_history(self):
        model = cybership_model()
        z2 = np.array([0.1, 0.2, -0.1])
        S = auxiliary_state(z2, np.zeros(3), np.zeros(3), model)
        np.testing.assert_array_equal(S, z2)

    def test_constant_command_window(self):
        model = cybership_model()
        c = np.array([0.5, -0.2, 0.1])
        t_d = 2.0
        z2 = np.array([0.05, 0.05, 0.05])
        z_f = np.array([0.01, 0.0, -0.01])
        S = auxiliary_state(z2, t_d * c, z_f, model)
        np.testing.assert_allclose(
            S, z2 - model.M_inv @ (t_d * c) - z_f, atol=1e-14
        )

    def test_cancellation(self):
        model = VesselModel(M=np.eye(3))
        z2 = np.array([0.3, -0.3, 0.2])
        S = auxiliary_state(z2, np.zeros(3), z2, model)
        np.testing.assert_allclose(S, np.zeros(3), atol=1e-15)


class TestZfRate:
    def test_origin_is_equilibrium(self):
        rate = zf_rate(np.zeros(3), np.zeros(3), np.zeros(3), default_gains())
        np.testing.assert_array_equal(rate, np.zeros(3))

    def test_pure_decay(self):
        gains = default_gains()
        z_f = np.array([1.0, -2.0, 0.5])
        rate = zf_rate(np.zeros(3), np.zeros(3), z_f, gains)
        np.testing.assert_allclose(rate, -gains.Theta @ z_f, atol=1e-14)

    def test_matches_transcription(self):
        gains = default_gains()
        rng = np.random.default_rng(7)
        S, z2, z_f = rng.standard_normal(3), rng.standard_normal(3), rng.standard_normal(3)
        expected = gains.K2 @ S - gains.Gamma1 @ z2 - gains.Theta @ z_f
        np.testing.assert_allclose(zf_rate(S, z2, z_f, gains), expected, atol=1e-12)


class TestControlLaw:
    def test_pure_model_compensation(self):
        model = cybership_model()
        gains = default_gains()
        nu = np.array([0.1, -0.05, 0.02])
        eta = np.array([1.0, 2.0, 0.3])
        tau = control_law(
            np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3),
            nu, eta, eta[2], model, gains,
        )
        M_s = model.dynamics_matrix(nu) @ nu
        np.testing.assert_allclose(tau, M_s, atol=1e-14)

    def test_zero_auxiliary_state_is_regular(self):
        model = cybership_model()
        gains = default_gains()
        z1 = np.array([0.1, -0.1, 0.05])
        z2 = np.array([0.02, 0.0, -0.01])
        tau = control_law(
            z1, z2, np.zeros(3), np.zeros(3), np.zeros(3),
            np.zeros(3), np.zeros(3), 0.2, model, gains,
        )
        assert np.all(np.isfinite(tau))
        # the pseudo-inverse weight vanishes with S = 0
        np.testing.assert_allclose(tau, np.zeros(3), atol=1e-12)

    def test_matches_independent_transcription(self):
        # term-by-term re-evaluation of the printed command
        rng = np.random.default_rng(44)
        model = cybership_model()
        gains = default_gains()
        for _ in range(25):
            z1 = rng.uniform(-0.25, 0.25, 3) * np.array([1.0, 1.0, 1.5])
            z2 = rng.uniform(-0.1, 0.1, 3)
            S = rng.uniform(-0.2, 0.2, 3)
            z_f = rng.uniform(-0.2, 0.2, 3)
            a_rate = rng.uniform(-0.5, 0.5, 3)
            nu = rng.uniform(-0.3, 0.3, 3)
            eta = rng.uniform(-2.0, 2.0, 3)
            psi = eta[2]
            tau = control_law(z1, z2, S, z_f, a_rate, nu, eta, psi, model, gains)

            J = rotation_matrix(psi)
            Jz2 = J @ z2
            M_s = (model.coriolis(nu) + model.damping(nu)) @ nu
            quad = float(z1 @ gains.K1 @ z1)
            bracket = 0.0
            for i, nb in enumerate(gains.N_b):
                den = nb**2 - z1[i] ** 2
                bracket += z1[i] * Jz2[i] / den + nb**2 * quad / den
            pinv = S / (float(S @ S) + gains.eps_pinv)
            expected = (
                model.M @ a_rate + M_s + gains.K2 @ z_f + pinv * bracket
            )
            np.testing.assert_allclose(tau, expected, atol=1e-10)

    def test_finite_on_admissible_region(self):
        # bulk scan over 1e6 admissible inputs with a vectorized evaluation of
        # the same algebra, spot-checked for equality against the operation
        rng = np.random.default_rng(99)
        model = cybership_model()
        gains = default_gains()
        n = 1_000_000
        z1 = rng.uniform(-0.99, 0.99, (n, 3)) * gains.N_b
        z2 = rng.uniform(-1.0, 1.0, (n, 3))
        S = rng.uniform(-1.0, 1.0, (n, 3))
        z_f = rng.uniform(-1.0, 1.0, (n, 3))
        a_rate = rng.uniform(-2.0, 2.0, (n, 3))
        nu = rng.uniform(-0.5, 0.5, (n, 3))
        psi = rng.uniform(-4.0, 4.0, n)

        c, s = np.cos(psi), np.sin(psi)
        Jz2 = np.stack(
            [c * z2[:, 0] + s * z2[:, 1], -s * z2[:, 0] + c * z2[:, 1], z2[:, 2]],
            axis=1,
        )
        k1 = np.diag(gains.K1)
        quad = np.sum(z1 * z1 * k1, axis=1)
        bracket = np.zeros(n)
        for i, nb in enumerate(gains.N_b):
            den = nb**2 - z1[:, i] ** 2
            bracket += (z1[:, i] * Jz2[:, i] + nb**2 * quad) / den
        pinv = S / (np.sum(S * S, axis=1) + gains.eps_pinv)[:, None]
        Cnu = np.zeros((n, 3))
        m = model.M
        c13 = -(m[1, 1] * nu[:, 1] + m[1, 2] * nu[:, 2])
        c23 = m[0, 0] * nu[:, 0]
        Cnu[:, 0] = c13 * nu[:, 2]
        Cnu[:, 1] = c23 * nu[:, 2]
        Cnu[:, 2] = -c13 * nu[:, 0] - c23 * nu[:, 1]
        D = np.array([0.72253, 0.88965, 1.9])
        M_s = Cnu + nu * D
        tau = (
            a_rate @ model.M.T
            + M_s
            + z_f * np.diag(gains.K2)
            + pinv * bracket[:, None]
        )
        assert np.all(np.isfinite(tau))

        for k in rng.integers(0, n, size=50):
            op = control_law(
                z1[k], z2[k], S[k], z_f[k], a_rate[k], nu[k],
                np.zeros(3), psi[k], model, gains,
            )
            np.testing.assert_allclose(op, tau[k], atol=1e-10)

    def test_barrier_violation_raises(self):
        model = cybership_model()
        gains = default_gains()
        with pytest.raises(BarrierViolation):
            control_law(
                np.array([0.0, 0.3, 0.0]), np.zeros(3), np.zeros(3), np.zeros(3),
                np.zeros(3), np.zeros(3), np.zeros(3), 0.0, model, gains,
            )


class TestControllerNn:
    def _net(self):
        return RbfNetwork.from_ranges(
            np.array([[-0.5, 0.5]] * 5 + [[-2.0, 2.0]]), 8, seed=5
        )

    def test_pass_through_before_alarm(self):
        gains = default_gains()
        w = np.ones((8, 3))
        tau = np.array([1.0, 2.0, 3.0])
        w_dot, tau_m = controller_nn_update_and_augment(
            np.ones(3), np.ones(8), w, tau, gains, alarm_mode=False
        )
        np.testing.assert_array_equal(w_dot, np.zeros((8, 3)))
        np.testing.assert_array_equal(tau_m, tau)

    def test_zero_state_zero_rate(self):
        gains = default_gains()
        w_dot, _ = controller_nn_update_and_augment(
            np.zeros(3), np.ones(8), np.zeros((8, 3)), np.zeros(3), gains, True
        )
        np.testing.assert_array_equal(w_dot, np.zeros((8, 3)))

    def test_leakage_decay_matches_closed_form(self):
        # with S = 0 each weight obeys w' = -upsilon*xi*w
        gains = default_gains()
        w = np.full((8, 3), 0.5)
        dt, steps = 1e-4, 10_000
        for _ in range(steps):
            w_dot, _ = controller_nn_update_and_augment(
                np.zeros(3), np.ones(8), w, np.zeros(3), gains, True
            )
            w = w + dt * w_dot
        expected = 0.5 * np.exp(-gains.upsilon[0] * gains.xi[0] * dt * steps)
        np.testing.assert_allclose(w, expected, rtol=3e-3)

    def test_augmentation_subtracts_nn_output(self):
        gains = default_gains()
        rng = np.random.default_rng(3)
        net = self._net()
        w = rng.standard_normal((8, 3))
        z = rng.uniform(-0.4, 0.4, 6)
        basis = basis_eval(net, z)
        tau = rng.standard_normal(3)
        S = rng.standard_normal(3)
        w_dot, tau_m = controller_nn_update_and_augment(S, basis, w, tau, gains, True)
        np.testing.assert_allclose(tau_m, tau - w.T @ basis, atol=1e-12)
        for i in range(3):
            np.testing.assert_allclose(
                w_dot[:, i],
                -gains.upsilon[i] * (basis * S[i] + gains.xi[i] * w[:, i]),
                atol=1e-12,
            )


class TestActuatorCommand:
    def test_no_feedforward(self):
        tau = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(actuator_command(tau, np.zeros(3)), tau)

    def test_pure_feedforward(self):
        tau = np.array([0.4, 0.2, -0.1])
        np.testing.assert_allclose(actuator_command(tau, tau), np.zeros(3), atol=1e-15)

    def test_steady_state_bookkeeping_through_delay(self):
        # constant signals: the force reaching the plant reconstructs tau'_m
        tau_m = np.array([0.8, -0.3, 0.2])
        tau_wind_hat = np.array([0.1, 0.5, -0.2])
        tau_cmd = actuator_command(tau_m, tau_wind_hat)
        line = DelayLine(delay=1.0, dt=0.1)
        for k in range(30):
            line.push(k * 0.1, tau_cmd)
        delayed, _ = delay_read_and_integral(line, 2.9)
        np.testing.assert_allclose(delayed + tau_wind_hat, tau_m, atol=1e-14)
