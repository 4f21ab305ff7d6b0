"""Adaptive sea-state observer: full-state estimator with wind-coefficient
adaptation, post-alarm RBF wave compensation, and the alarm monitor.

The observer runs in two modes.  Before the alarm it injects the wind
feedforward Pi @ phi_hat only; when the windowed mean of any estimated drag
coefficient crosses the alarm threshold (the overcompensation signature of an
un-modeled wave load) it latches the alarm and adds the NN wave term.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rbf import RbfNetwork, basis_eval
from .vessel import VesselModel, rotation_matrix


def kyp_residual(A: np.ndarray, P: np.ndarray, Q: np.ndarray) -> float:
    """Frobenius norm of A'P + PA + QQ' (zero when the gain identity holds)."""
    return float(np.linalg.norm(A.T @ P + P @ A + Q @ Q.T))


@dataclass
class ObserverGains:
    """Injection and adaptation gains.

    Constructed so the Lyapunov identity A'P + PA = -QQ' holds exactly:
    A = -a I, P = p I, Q = sqrt(2 a p) I.  The injection gain L and the
    measurement matrix C are free config values; the printed reference values
    (L = 5I, C = I, P = 5I) do not satisfy L = P^-1 C', so that relation is
    reported as a diagnostic rather than enforced.
    """

    A: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    L: np.ndarray
    C_meas: np.ndarray
    Gamma: np.ndarray
    omega_nn: np.ndarray
    alarm_threshold: float = 0.2
    alarm_window: float = 5.0

    @classmethod
    def build(
        cls,
        a: float = 1.0,
        p: float = 5.0,
        l: float = 5.0,
        gamma_diag=(100.0, 600.0, 100.0),
        omega_nn=(0.002, 0.002, 0.002),
        alarm_threshold: float = 0.2,
        alarm_window: float = 5.0,
    ) -> "ObserverGains":
        if a <= 0.0 or p <= 0.0:
            raise ValueError("a and p must be positive for a Hurwitz A and pd P")
        I6 = np.eye(6)
        gains = cls(
            A=-a * I6,
            P=p * I6,
            Q=np.sqrt(2.0 * a * p) * I6,
            L=l * I6,
            C_meas=I6.copy(),
            Gamma=np.diag(gamma_diag),
            omega_nn=np.asarray(omega_nn, dtype=float),
            alarm_threshold=alarm_threshold,
            alarm_window=alarm_window,
        )
        res = kyp_residual(gains.A, gains.P, gains.Q)
        if res > 1e-10:
            raise ValueError(f"constructed gains violate the Lyapunov identity: {res}")
        return gains

    def l_relation_residual(self) -> float:
        """Norm of L - P^-1 C'; nonzero for the printed reference values."""
        return float(np.linalg.norm(self.L - np.linalg.solve(self.P, self.C_meas.T)))


@dataclass
class ObserverState:
    """Estimator state plus the alarm latch and coefficient history."""

    x_hat: np.ndarray
    phi_hat: np.ndarray
    w_d: np.ndarray
    alarm: bool = False
    alarm_time: Optional[float] = None
    phi_frozen: Optional[np.ndarray] = None
    phi_history: deque = field(default_factory=deque)

    def record_phi(self, t: float, window: float) -> None:
        self.phi_history.append((t, self.phi_hat.copy()))
        while self.phi_history and self.phi_history[0][0] < t - window:
            self.phi_history.popleft()


def input_matrix(model: VesselModel) -> np.ndarray:
    """Force injection R = [0; M^-1] of the stacked state space."""
    return model.R


def stacked_drift(x: np.ndarray, model: VesselModel) -> np.ndarray:
    """f(X) X + phi(X): stacked kinematics and unforced velocity dynamics."""
    eta, nu = x[:3], x[3:]
    out = np.empty(6)
    out[:3] = rotation_matrix(eta[2]) @ nu
    out[3:] = -model.M_inv @ (
        model.dynamics_matrix(nu) @ nu + model.restoring(eta)
    )
    return out


def observer_rhs(
    x_hat: np.ndarray,
    x_meas: np.ndarray,
    tau_delayed: np.ndarray,
    Pi: np.ndarray,
    phi_for_ff: np.ndarray,
    gains: ObserverGains,
    model: VesselModel,
    net: Optional[RbfNetwork] = None,
    z_ow: Optional[np.ndarray] = None,
    mode: str = "pre",
) -> np.ndarray:
    """d/dt x_hat for either observer mode.

    Pre-alarm: f(X^)X^ + phi(X^) + R[tau(t-t_d) + Pi phi^] + L C (X - X^).
    Post-alarm adds the NN wave estimate W_d' S(Z_ow) inside the force bracket.
    """
    force = tau_delayed + Pi @ phi_for_ff
    if mode == "post":
        if net is None or z_ow is None:
            raise ValueError("post-alarm mode requires the network and its input")
        force = force + net.weights.T @ basis_eval(net, z_ow)
    rate = stacked_drift(x_hat, model)
    rate += input_matrix(model) @ force
    rate += gains.L @ (gains.C_meas @ (x_meas - x_hat))
    return rate


def wind_coeff_rate(x_tilde: np.ndarray, Pi: np.ndarray, gains: ObserverGains,
                    model: VesselModel) -> np.ndarray:
    """Adaptive law d/dt phi_hat = 2 Gamma' Pi' R' P' x_tilde."""
    R = input_matrix(model)
    return 2.0 * gains.Gamma.T @ Pi.T @ R.T @ gains.P.T @ x_tilde


def observer_nn_rate(
    x_tilde: np.ndarray, basis: np.ndarray, gains: ObserverGains, model: VesselModel
) -> np.ndarray:
    """Per-channel weight rates: column i is -omega_i (x~' P R)_i S(Z_ow)."""
    R = input_matrix(model)
    xpr = x_tilde @ gains.P @ R
    return -np.outer(basis, gains.omega_nn * xpr)


def alarm_update(obs: ObserverState, t: float, gains: ObserverGains) -> bool:
    """Latch the alarm when any coefficient's windowed mean crosses threshold.

    Requires a full window of history; the latch is permanent.  On the latch
    instant the windowed mean is stored as the frozen coefficient set used by
    configurations that freeze the wind feedforward after alarm.
    """
    if obs.alarm:
        return True
    if not obs.phi_history:
        return False
    t0 = obs.phi_history[0][0]
    if t - t0 < gains.alarm_window - 1e-9:
        return False
    stacked = np.array([p for (_, p) in obs.phi_history])
    means = stacked.mean(axis=0)
    if np.any(means > gains.alarm_threshold):
        obs.alarm = True
        obs.alarm_time = t
        obs.phi_frozen = means.copy()
    return obs.alarm
