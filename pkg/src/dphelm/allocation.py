"""Dynamic thrust allocation for six azimuth thrusters.

Each allocation cycle linearizes the thruster configuration map around the
current (angle, thrust) state, assembles a box-constrained equality QP over
[delta_u; delta_alpha; o] (o is the force-match slack), and solves it with a
primal-dual projection dynamic iterated to a cost-variance termination rule.
Angles are kept unwrapped internally; the admissible intervals already merge
the forbidden zones into single contiguous spans that may exceed 360 degrees.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# sign pattern of the printed yaw-moment expansion, one (cos, sin) pair per thruster
MOMENT_COS_SIGNS = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
MOMENT_SIN_SIGNS = np.array([1.0, 1.0, -1.0, 1.0, -1.0, -1.0])


class AllocationError(RuntimeError):
    pass


class SolverDivergence(RuntimeError):
    """Projection dynamics exceeded the divergence guard."""


def forbidden_zone_intervals(
    encounter_angles_deg: list[Optional[float]], zone_halfwidth_deg: float = 10.0
) -> list[tuple[float, float]]:
    """Admissible azimuth interval per thruster, in radians.

    For a thruster with encounter angle a_e the forbidden sector is
    (a_e - half, a_e + half); its complement on the circle is returned as the
    single contiguous interval [a_e + half, a_e + half + (360 - 2 half)].
    ``None`` entries mean no rotation constraint (unbounded interval).
    """
    if zone_halfwidth_deg < 0.0:
        raise ValueError("zone halfwidth must be non-negative")
    if 2.0 * zone_halfwidth_deg >= 360.0:
        raise AllocationError("forbidden zone covers the full circle")
    intervals = []
    span = 360.0 - 2.0 * zone_halfwidth_deg
    for a_e in encounter_angles_deg:
        if a_e is None:
            intervals.append((-np.inf, np.inf))
        else:
            lo = a_e + zone_halfwidth_deg
            intervals.append((np.deg2rad(lo), np.deg2rad(lo + span)))
    return intervals


@dataclass
class ThrusterBank:
    """Geometry, limits and current state of the six azimuth thrusters."""

    lx: np.ndarray
    ly: np.ndarray
    alpha_intervals: list[tuple[float, float]]
    u_min: np.ndarray
    u_max: np.ndarray
    delta_alpha_cycle: float
    alpha: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.lx = np.asarray(self.lx, dtype=float)
        self.ly = np.asarray(self.ly, dtype=float)
        self.u_min = np.asarray(self.u_min, dtype=float)
        self.u_max = np.asarray(self.u_max, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        n = self.lx.shape[0]
        if n != 6:
            raise ValueError("the bank models exactly six thrusters")
        for i, (lo, hi) in enumerate(self.alpha_intervals):
            if not (lo - 1e-12 <= self.alpha[i] <= hi + 1e-12):
                raise AllocationError(
                    f"thruster {i + 1} angle {self.alpha[i]:.4f} outside its interval"
                )
        if np.any(self.u < self.u_min - 1e-12) or np.any(self.u > self.u_max + 1e-12):
            raise AllocationError("thrust outside limits")

    def moment_coefficients(self, alpha: np.ndarray) -> np.ndarray:
        """Per-thruster yaw-moment coefficient with the printed sign pattern."""
        return MOMENT_COS_SIGNS * self.lx * np.cos(alpha) + MOMENT_SIN_SIGNS * self.ly * np.sin(alpha)


def configuration_map(alpha: np.ndarray, u: np.ndarray, bank: ThrusterBank) -> np.ndarray:
    """Generalized force [F_x, F_y, M_z] produced by the bank."""
    alpha = np.asarray(alpha, dtype=float)
    u = np.asarray(u, dtype=float)
    fx = float(np.cos(alpha) @ u)
    fy = float(np.sin(alpha) @ u)
    mz = float(bank.moment_coefficients(alpha) @ u)
    return np.array([fx, fy, mz])


def configuration_matrix(alpha: np.ndarray, bank: ThrusterBank) -> np.ndarray:
    """T(alpha): 3x6 matrix with tau = T(alpha) u."""
    return np.vstack(
        [np.cos(alpha), np.sin(alpha), bank.moment_coefficients(alpha)]
    )


def configuration_jacobian(alpha: np.ndarray, u: np.ndarray, bank: ThrusterBank) -> np.ndarray:
    """Analytic d/d_alpha of T(alpha) u, one column per thruster."""
    alpha = np.asarray(alpha, dtype=float)
    u = np.asarray(u, dtype=float)
    row_fx = -np.sin(alpha) * u
    row_fy = np.cos(alpha) * u
    row_mz = (
        -MOMENT_COS_SIGNS * bank.lx * np.sin(alpha)
        + MOMENT_SIN_SIGNS * bank.ly * np.cos(alpha)
    ) * u
    return np.vstack([row_fx, row_fy, row_mz])


@dataclass
class AllocationProblem:
    """Assembled local QP min 1/2 U'KU + W'U s.t. Mmat U = Y, lo <= U <= hi."""

    K_diag: np.ndarray
    W: np.ndarray
    Mmat: np.ndarray
    Y: np.ndarray
    U_lo: np.ndarray
    U_hi: np.ndarray
    alpha0: np.ndarray
    u0: np.ndarray

    def cost(self, U: np.ndarray) -> float:
        return float(0.5 * np.sum(self.K_diag * U * U) + self.W @ U)


def assemble_local_qp(
    tau_cmd: np.ndarray,
    bank: ThrusterBank,
    Q: np.ndarray,
    P: np.ndarray,
    R: np.ndarray,
    o_bound: float = 0.02,
) -> AllocationProblem:
    """Build the 15-dimensional local QP around the bank's current state.

    Bound merging: the angle-change box is the intersection of the per-cycle
    rate bound and the slack to each admissible-interval edge.
    """
    alpha0, u0 = bank.alpha.copy(), bank.u.copy()
    Qd = np.diag(Q) if np.ndim(Q) == 2 else np.asarray(Q, float)
    Pd = np.diag(P) if np.ndim(P) == 2 else np.asarray(P, float)
    Rd = np.diag(R) if np.ndim(R) == 2 else np.asarray(R, float)
    K_diag = np.concatenate([2.0 * Qd, 2.0 * Pd, 2.0 * Rd])
    W = np.concatenate([2.0 * Qd * u0, np.zeros(6), np.zeros(3)])

    T0 = configuration_matrix(alpha0, bank)
    Jac = configuration_jacobian(alpha0, u0, bank)
    Mmat = np.hstack([T0, Jac, -np.eye(3)])
    Y = np.asarray(tau_cmd, dtype=float) - T0 @ u0

    du_lo = bank.u_min - u0
    du_hi = bank.u_max - u0
    rate = bank.delta_alpha_cycle
    da_lo = np.empty(6)
    da_hi = np.empty(6)
    for i, (lo, hi) in enumerate(bank.alpha_intervals):
        da_lo[i] = max(lo - alpha0[i], -rate)
        da_hi[i] = min(hi - alpha0[i], rate)
    U_lo = np.concatenate([du_lo, da_lo, -o_bound * np.ones(3)])
    U_hi = np.concatenate([du_hi, da_hi, o_bound * np.ones(3)])
    bad = np.nonzero(U_lo > U_hi)[0]
    if bad.size:
        j = int(bad[0])
        raise AllocationError(
            f"infeasible bound box at variable {j} (thruster {j % 6 + 1})"
        )
    return AllocationProblem(K_diag, W, Mmat, Y, U_lo, U_hi, alpha0, u0)


def project(B: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Componentwise clamp onto [lo, hi]."""
    return np.minimum(np.maximum(B, lo), hi)


@dataclass
class SolverState:
    """Primal-dual vector and step bookkeeping carried across cycles."""

    Z: np.ndarray
    gamma_z: np.ndarray
    z_lo: np.ndarray
    z_hi: np.ndarray
    h: float = 1.0
    iterations: int = 0
    cost_window: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def fresh(
        cls,
        problem: AllocationProblem,
        v_bar: float = 1e6,
        gamma0: float = 0.1,
        v_warm: Optional[np.ndarray] = None,
    ) -> "SolverState":
        n = problem.K_diag.shape[0]
        m = problem.Y.shape[0]
        z_lo = np.concatenate([problem.U_lo, -v_bar * np.ones(m)])
        z_hi = np.concatenate([problem.U_hi, v_bar * np.ones(m)])
        gamma = gamma0 * np.ones(n + m)
        U0 = project(np.zeros(n), problem.U_lo, problem.U_hi)
        V0 = np.zeros(m) if v_warm is None else np.asarray(v_warm, float).copy()
        return cls(Z=np.concatenate([U0, V0]), gamma_z=gamma, z_lo=z_lo, z_hi=z_hi)


def pdnn_step(
    state: SolverState, E: np.ndarray, Svec: np.ndarray, h: float,
    I_plus_ET: Optional[np.ndarray] = None,
) -> SolverState:
    """One forward-Euler step of Z_dot = Gamma (I + E') {G(Z - (EZ + S)) - Z}."""
    if I_plus_ET is None:
        I_plus_ET = np.eye(E.shape[0]) + E.T
    inner = project(state.Z - (E @ state.Z + Svec), state.z_lo, state.z_hi) - state.Z
    state.Z = state.Z + h * (state.gamma_z * (I_plus_ET @ inner))
    state.iterations += 1
    if state.Z.max() > 1e6 or state.Z.min() < -1e6:
        raise SolverDivergence(f"||Z|| exceeded 1e6 after {state.iterations} iterations")
    return state


def _assemble_lvi(problem: AllocationProblem) -> tuple[np.ndarray, np.ndarray]:
    n = problem.K_diag.shape[0]
    m = problem.Mmat.shape[0]
    E = np.zeros((n + m, n + m))
    E[:n, :n] = np.diag(problem.K_diag)
    E[:n, n:] = -problem.Mmat.T
    E[n:, :n] = problem.Mmat
    Svec = np.concatenate([problem.W, -problem.Y])
    return E, Svec


@dataclass
class AllocationResult:
    u: np.ndarray
    alpha: np.ndarray
    o: np.ndarray
    achieved: np.ndarray
    iterations: int
    cost: float
    reason: str
    h: float
    v_dual: np.ndarray


def _rescaled(problem: AllocationProblem) -> tuple[AllocationProblem, np.ndarray]:
    """Symmetric variable rescaling U~ = U / D, D = 1/sqrt(K_ii).

    The rescaled QP has unit quadratic diagonal and the identical cost value,
    so the variance termination reads the same objective; the scalar-gain
    projection dynamics then contract uniformly across the primal blocks.
    """
    D = 1.0 / np.sqrt(problem.K_diag)
    scaled = AllocationProblem(
        K_diag=np.ones_like(problem.K_diag),
        W=problem.W * D,
        Mmat=problem.Mmat * D[None, :],
        Y=problem.Y.copy(),
        U_lo=problem.U_lo / D,
        U_hi=problem.U_hi / D,
        alpha0=problem.alpha0,
        u0=problem.u0,
    )
    return scaled, D


def solve_allocation(
    problem: AllocationProblem,
    state: Optional[SolverState] = None,
    max_iter: int = 100_000,
    window: int = 1000,
    var_tol: float = 1e-12,
    gamma_mode: str = "rescaled",
    gamma0: float = 0.1,
    v_warm: Optional[np.ndarray] = None,
    h: float = 0.25,
    check_every: int = 25,
    bank: Optional[ThrusterBank] = None,
) -> AllocationResult:
    """Iterate the projection dynamics until the cost variance settles.

    Terminates when the variance of the primal cost over the past ``window``
    iterations drops below ``var_tol``, or flags the best iterate as
    unconverged at ``max_iter``.  On divergence the Euler step is halved and
    the cycle restarts from the warm start.  The default mode iterates on the
    symmetrically rescaled problem (see :func:`_rescaled`); ``"paper"``
    iterates the raw assembly with the printed uniform gain.
    """
    if gamma_mode == "rescaled":
        work, D = _rescaled(problem)
    elif gamma_mode == "paper":
        work, D = problem, np.ones_like(problem.K_diag)
    else:
        raise ValueError(f"unknown gamma mode {gamma_mode!r}")
    E, Svec = _assemble_lvi(work)
    n = problem.K_diag.shape[0]
    I_plus_ET = np.eye(E.shape[0]) + E.T
    k_work = work.K_diag
    w_work = work.W

    reason = "max_iter"
    terminated = False
    while True:
        if state is None:
            state = SolverState.fresh(work, gamma0=gamma0, v_warm=v_warm)
            state.h = h
        costs = np.empty(window)
        filled = 0
        j0 = work.cost(state.Z[:n])
        try:
            for _ in range(max_iter):
                pdnn_step(state, E, Svec, state.h, I_plus_ET)
                U_it = state.Z[:n]
                costs[filled % window] = 0.5 * float(
                    np.dot(k_work * U_it, U_it)
                ) + float(w_work @ U_it)
                filled += 1
                if filled >= window and filled % check_every == 0:
                    j_now = costs[(filled - 1) % window]
                    if j_now > 10.0 * abs(j0) + 100.0:
                        raise SolverDivergence(
                            f"cost diverged ({j_now:.3e}) after {filled} iterations"
                        )
                    if float(np.var(costs)) < var_tol:
                        reason = "variance"
                        terminated = True
                        break
            break
        except SolverDivergence:
            next_h = state.h * 0.5
            if next_h < 1e-6:
                raise
            h = next_h
            state = None  # restart from the warm start with a smaller step
    if not terminated:
        reason = "max_iter"

    U = project(state.Z[:n] * D, problem.U_lo, problem.U_hi)
    du, da, o = U[:6], U[6:12], U[12:]
    u_new = problem.u0 + du
    alpha_new = problem.alpha0 + da
    if bank is not None:
        achieved = configuration_map(alpha_new, u_new, bank)
    else:
        achieved = np.full(3, np.nan)
    return AllocationResult(
        u=u_new,
        alpha=alpha_new,
        o=o,
        achieved=achieved,
        iterations=state.iterations,
        cost=problem.cost(U),
        reason=reason,
        h=state.h,
        v_dual=state.Z[n:].copy(),
    )
