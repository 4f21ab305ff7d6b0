"""3-DOF low-frequency vessel plant: kinematics, rigid-body dynamics, input
delay line, and a fixed-step RK4 integrator.

The plant follows the standard surge/sway/yaw maneuvering form

    eta_dot = J(psi) nu
    M nu_dot + C(nu) nu + D(nu) nu + g(eta) = tau_applied + tau_wave + tau_wind + d

with a generalized-force delay line feeding ``tau_applied``.  All matrices are
configurable; the shipped defaults are CyberShip II scale (see
``data/scenario_paper.toml``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_trapezoid = getattr(np, "trapezoid", np.trapz)


class IntegrationError(RuntimeError):
    """Raised when the integrator produces non-finite values."""


class DelayLineError(RuntimeError):
    """Raised on delay-line contract violations (reads ahead of history)."""


@dataclass
class Pose:
    """Earth-fixed position and heading. ``psi`` is stored unwrapped."""

    x: float
    y: float
    psi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi], dtype=float)


@dataclass
class BodyVelocity:
    """Body-frame velocity: surge u, sway v, yaw rate r."""

    u: float
    v: float
    r: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.r], dtype=float)


@dataclass
class VesselState:
    """Integrated plant state: pose eta = [x, y, psi], velocity nu = [u, v, r]."""

    eta: np.ndarray
    nu: np.ndarray

    @property
    def pose(self) -> Pose:
        return Pose(*self.eta)

    @property
    def velocity(self) -> BodyVelocity:
        return BodyVelocity(*self.nu)

    def copy(self) -> "VesselState":
        return VesselState(self.eta.copy(), self.nu.copy())


def rotation_matrix(psi: float) -> np.ndarray:
    """Heading rotation between the pose rate and the body velocity.

    Returns [[cos, sin, 0], [-sin, cos, 0], [0, 0, 1]].
    """
    c, s = np.cos(psi), np.sin(psi)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def _rigid_body_coriolis(M: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Coriolis/centripetal matrix derived from the inertia matrix."""

    def coriolis(nu: np.ndarray) -> np.ndarray:
        u, v, r = nu
        c13 = -(M[1, 1] * v + M[1, 2] * r)
        c23 = M[0, 0] * u
        return np.array(
            [[0.0, 0.0, c13], [0.0, 0.0, c23], [-c13, -c23, 0.0]]
        )

    return coriolis


def _zero_restoring(eta: np.ndarray) -> np.ndarray:
    return np.zeros(3)


class VesselModel:
    """Inertia, Coriolis, damping and restoring terms of the LF model.

    ``M`` must be symmetric positive definite (checked here, not at each RHS
    evaluation).  Coriolis defaults to the rigid-body form built from ``M``;
    damping defaults to constant linear damping; restoring defaults to zero
    (surface DP has no horizontal restoring).
    """

    def __init__(
        self,
        M: np.ndarray,
        damping: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        coriolis: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        restoring: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        D_linear: Optional[np.ndarray] = None,
    ):
        M = np.asarray(M, dtype=float)
        if M.shape != (3, 3):
            raise ValueError("inertia matrix must be 3x3")
        if not np.allclose(M, M.T, atol=1e-9):
            raise ValueError("inertia matrix must be symmetric")
        eigvals = np.linalg.eigvalsh(M)
        if np.min(eigvals) <= 0.0:
            raise ValueError("inertia matrix must be positive definite")
        self.M = M
        self.M_inv = np.linalg.inv(M)
        # stacked-state force injection [0; M^-1], used by the observer laws
        self.R = np.zeros((6, 3))
        self.R[3:, :] = self.M_inv

        if damping is None:
            D = np.eye(3) if D_linear is None else np.asarray(D_linear, dtype=float)
            damping = lambda nu, _D=D: _D  # noqa: E731
        self.damping = damping
        self.coriolis = coriolis if coriolis is not None else _rigid_body_coriolis(M)
        self.restoring = restoring if restoring is not None else _zero_restoring

    def dynamics_matrix(self, nu: np.ndarray) -> np.ndarray:
        """C(nu) + D(nu), the velocity-coupling matrix used by the observer."""
        return self.coriolis(nu) + self.damping(nu)


def dynamics_rhs(
    state: VesselState,
    tau_applied: np.ndarray,
    tau_wave: np.ndarray,
    tau_wind: np.ndarray,
    d: np.ndarray,
    model: VesselModel,
) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time plant right-hand side.

    ``tau_wave`` must already be gated by the caller.  Returns
    (pose_rate, velocity_rate).
    """
    nu = state.nu
    pose_rate = rotation_matrix(state.eta[2]) @ nu
    force = tau_applied + tau_wave + tau_wind + d
    force = force - model.coriolis(nu) @ nu - model.damping(nu) @ nu
    force = force - model.restoring(state.eta)
    return pose_rate, model.M_inv @ force


def rk4_step(x: np.ndarray, rhs: Callable[[float, np.ndarray], np.ndarray],
             t: float, dt: float) -> np.ndarray:
    """Classical 4th-order Runge-Kutta update of a flat state vector."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = rhs(t + dt, x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"non-finite state after RK4 step at t={t:.6f}")
    return out


class DelayLine:
    """Ring buffer of timestamped generalized forces with delayed reads.

    Reads at ``t - delay`` use nearest-sample lookup when the delay is a
    multiple of the sample period and linear interpolation otherwise.  Reads
    older than the stored history return ``pre_history`` (zero by default).
    """

    def __init__(self, delay: float, dt: float, pre_history: Optional[np.ndarray] = None):
        if delay < 0.0:
            raise ValueError("delay must be non-negative")
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.delay = delay
        self.dt = dt
        self.pre_history = np.zeros(3) if pre_history is None else np.asarray(pre_history, float)
        n = int(np.ceil(delay / dt)) + 2
        self._times: list[float] = []
        self._values: list[np.ndarray] = []
        self._capacity = n + 2

    def push(self, t: float, value: np.ndarray) -> None:
        if self._times and t <= self._times[-1]:
            raise DelayLineError("samples must be pushed with increasing time")
        self._times.append(t)
        self._values.append(np.asarray(value, dtype=float).copy())
        if len(self._times) > self._capacity:
            self._times.pop(0)
            self._values.pop(0)

    def _value_at(self, t_query: float) -> np.ndarray:
        times = self._times
        if not times or t_query < times[0]:
            return self.pre_history.copy()
        idx = int(np.searchsorted(times, t_query, side="right")) - 1
        if idx == len(times) - 1:
            return self._values[idx].copy()
        t0, t1 = times[idx], times[idx + 1]
        # nearest sample when on the grid, interpolation between samples
        frac = (t_query - t0) / (t1 - t0)
        if frac < 1e-9:
            return self._values[idx].copy()
        if frac > 1.0 - 1e-9:
            return self._values[idx + 1].copy()
        return (1.0 - frac) * self._values[idx] + frac * self._values[idx + 1]


def delay_read_and_integral(line: DelayLine, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Delayed sample at ``t - delay`` and trapezoidal integral over the window.

    The integral covers [t - delay, t]; samples before the start of history
    take the configured pre-history value.
    """
    if line._times and t > line._times[-1] + 1e-12:
        raise DelayLineError(
            f"delay line read at t={t} is ahead of newest sample t={line._times[-1]}"
        )
    if line.delay == 0.0:
        return line._value_at(t), np.zeros(3)

    n = max(int(round(line.delay / line.dt)), 1)
    times = line._times
    # fast path: read at the frontier of a fully populated dt-aligned grid
    if (
        len(times) >= n + 1
        and abs(times[-1] - t) < 1e-9
        and abs(times[-1] - times[-(n + 1)] - line.delay) < 1e-9
    ):
        samples = np.stack(line._values[-(n + 1) :])
        delayed = samples[0].copy()
        integral = line.dt * (samples.sum(axis=0) - 0.5 * (samples[0] + samples[-1]))
        return delayed, integral

    delayed = line._value_at(t - line.delay)
    n = max(int(np.ceil(line.delay / line.dt)), 1)
    grid = np.linspace(t - line.delay, t, n + 1)
    samples = np.empty((n + 1, 3))
    for i, tq in enumerate(grid):
        samples[i] = line._value_at(tq)
    integral = _trapezoid(samples, grid, axis=0)
    return delayed, integral
