"""Barrier backstepping tracking controller with input-delay compensation.

Design structure: tracking errors z1 (pose, barrier-bounded by N_b) and z2
(velocity); stabilizing function alpha_c; auxiliary state S that folds the
delayed-input integral into a delay-free loop; filter state z_f; and a
post-alarm RBF compensator subtracted from the command.  The commanded
generalized force tau' is model-based (M alpha_c_dot + C nu + D nu + g) plus
the barrier terms scaled by a regularized pseudo-inverse of S.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .vessel import VesselModel, rotation_matrix


class BarrierViolation(RuntimeError):
    """Tracking error reached the barrier bound; the simulation must abort."""

    def __init__(self, axis: int, value: float, bound: float):
        self.axis = axis
        self.value = value
        self.bound = bound
        super().__init__(
            f"barrier violation on axis {axis}: |z1|={abs(value):.6f} >= N_b={bound:.6f}"
        )


_AXIS_SELECTORS = tuple(np.diag(e) for e in np.eye(3))


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = (angle + np.pi) % (2.0 * np.pi) - np.pi
    if wrapped == -np.pi:
        return np.pi
    return wrapped


@dataclass
class ControllerGains:
    """Backstepping and adaptation gains; all gain matrices positive definite."""

    K1: np.ndarray
    K2: np.ndarray
    Gamma1: np.ndarray
    Theta: np.ndarray
    N_b: np.ndarray
    upsilon: np.ndarray
    xi: np.ndarray
    eps_pinv: float = 1e-6

    def __post_init__(self):
        for name in ("K1", "K2", "Gamma1", "Theta"):
            mat = np.asarray(getattr(self, name), dtype=float)
            if mat.ndim == 1:
                mat = np.diag(mat)
            setattr(self, name, mat)
            if np.min(np.linalg.eigvalsh(0.5 * (mat + mat.T))) <= 0.0:
                raise ValueError(f"{name} must be positive definite")
        self.N_b = np.asarray(self.N_b, dtype=float)
        if np.any(self.N_b <= 0.0):
            raise ValueError("error bounds N_b must be positive")
        self.upsilon = np.asarray(self.upsilon, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)


@dataclass
class ControllerState:
    """Filter state, NN weights, and the alarm-mode flag."""

    z_f: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_c: np.ndarray = field(default_factory=lambda: np.zeros((32, 3)))
    alarm_mode: bool = False
    alpha_c_prev: Optional[np.ndarray] = None


def tracking_errors(
    eta_d: np.ndarray, eta: np.ndarray, alpha_c: np.ndarray, nu: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """z1 = eta_d - eta (yaw wrapped to (-pi, pi]), z2 = alpha_c - nu."""
    z1 = eta_d - eta
    z1 = np.array([z1[0], z1[1], wrap_angle(z1[2])])
    return z1, alpha_c - nu


def check_barrier(z1: np.ndarray, N_b: np.ndarray) -> None:
    for i in range(3):
        if abs(z1[i]) >= N_b[i]:
            raise BarrierViolation(i, z1[i], N_b[i])


def stabilizing_function(
    eta_d_rate: np.ndarray,
    z1: np.ndarray,
    psi: float,
    K1: np.ndarray,
    N_b: np.ndarray,
) -> np.ndarray:
    """alpha_c = J'(psi) [eta_d_rate + (N_b'N_b - z1'z1) K1 z1]."""
    check_barrier(z1, N_b)
    scale = float(N_b @ N_b - z1 @ z1)
    return rotation_matrix(psi).T @ (eta_d_rate + scale * (K1 @ z1))


def auxiliary_state(
    z2: np.ndarray, control_integral: np.ndarray, z_f: np.ndarray, model: VesselModel
) -> np.ndarray:
    """S = z2 - M^-1 * integral(tau', [t - t_d, t]) - z_f."""
    return z2 - model.M_inv @ control_integral - z_f


def zf_rate(S: np.ndarray, z2: np.ndarray, z_f: np.ndarray,
            gains: ControllerGains) -> np.ndarray:
    """Filter law z_f_dot = K2 S - Gamma1 z2 - Theta z_f."""
    return gains.K2 @ S - gains.Gamma1 @ z2 - gains.Theta @ z_f


def _barrier_fractions(z1: np.ndarray, z2: np.ndarray, psi: float,
                       K1: np.ndarray, N_b: np.ndarray) -> float:
    """Sum of the six per-axis barrier fractions of the control law."""
    J = rotation_matrix(psi)
    Jz2 = J @ z2
    quad = float(z1 @ K1 @ z1)
    total = 0.0
    for i, sel in enumerate(_AXIS_SELECTORS):
        nb_sq = N_b[i] ** 2
        den = nb_sq - z1[i] ** 2
        total += z1[i] * Jz2[i] / den
        total += nb_sq * quad / den
    return total


def control_law(
    z1: np.ndarray,
    z2: np.ndarray,
    S: np.ndarray,
    z_f: np.ndarray,
    alpha_c_rate: np.ndarray,
    nu: np.ndarray,
    eta: np.ndarray,
    psi: float,
    model: VesselModel,
    gains: ControllerGains,
) -> np.ndarray:
    """Commanded force tau' = M alpha_c_dot + M_s + K2 z_f + (S')^+ [barrier terms].

    M_s is the model compensation C(nu) nu + D(nu) nu + g(eta); the row
    pseudo-inverse is regularized as S / (S'S + eps) so S = 0 is harmless.
    """
    check_barrier(z1, gains.N_b)
    M_s = model.dynamics_matrix(nu) @ nu + model.restoring(eta)
    pinv = S / (float(S @ S) + gains.eps_pinv)
    bracket = _barrier_fractions(z1, z2, psi, gains.K1, gains.N_b)
    return model.M @ alpha_c_rate + M_s + gains.K2 @ z_f + pinv * bracket


def controller_nn_update_and_augment(
    S: np.ndarray,
    basis_c: np.ndarray,
    w_c: np.ndarray,
    tau_prime: np.ndarray,
    gains: ControllerGains,
    alarm_mode: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Post-alarm weight rates and augmented command.

    Channel i: w_c_dot[:, i] = -upsilon_i (S_c S_i + xi_i w_c[:, i]);
    tau'_m = tau' - w_c' S_c.  Identity pass-through before the alarm.
    """
    if not alarm_mode:
        return np.zeros_like(w_c), tau_prime
    w_dot = -(gains.upsilon * (np.outer(basis_c, S) + gains.xi * w_c))
    tau_m = tau_prime - w_c.T @ basis_c
    return w_dot, tau_m


def actuator_command(tau_prime_m: np.ndarray, tau_wind_hat: np.ndarray) -> np.ndarray:
    """Allocator command tau = tau'_m - tau_wind_hat (wind enters as feedforward)."""
    return tau_prime_m - tau_wind_hat
