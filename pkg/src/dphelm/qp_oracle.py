"""Reference solver for the local allocation QP, independent of the
projection dynamics.

Uses a trust-region constrained minimizer with exact gradient and Hessian,
multi-started from deterministic points plus one seeded random interior
point.  Serves only as the cross-check route; the runtime allocator never
calls it.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, minimize

from .allocation import AllocationProblem


def solve_reference(problem: AllocationProblem, seed: int = 0) -> tuple[np.ndarray, float]:
    """High-accuracy primal solution and cost of the assembled QP."""
    k = problem.K_diag
    W = problem.W
    lo, hi = problem.U_lo, problem.U_hi

    def fun(U):
        return 0.5 * float(np.sum(k * U * U)) + float(W @ U)

    def jac(U):
        return k * U + W

    def hess(U):
        return np.diag(k)

    constraints = [LinearConstraint(problem.Mmat, problem.Y, problem.Y)]
    bounds = Bounds(lo, hi)
    rng = np.random.default_rng(seed)
    starts = [
        np.clip(np.zeros_like(lo), lo, hi),
        0.5 * (lo + hi),
        lo + rng.uniform(0.2, 0.8, size=lo.shape) * (hi - lo),
    ]
    best_x, best_cost = None, np.inf
    for x0 in starts:
        res = minimize(
            fun,
            x0,
            jac=jac,
            hess=hess,
            method="trust-constr",
            constraints=constraints,
            bounds=bounds,
            options={"gtol": 1e-12, "xtol": 1e-14, "maxiter": 3000, "verbose": 0},
        )
        if res.fun < best_cost and np.max(np.abs(problem.Mmat @ res.x - problem.Y)) < 1e-8:
            best_x, best_cost = res.x, float(res.fun)
    if best_x is None:
        raise RuntimeError("reference solver failed on all starts")
    return best_x, best_cost


def random_feasible_problem(rng: np.random.Generator, bank_template) -> AllocationProblem:
    """Randomized feasible local QP built around a perturbed bank state.

    Feasibility is guaranteed by construction: a strictly interior point of
    the box is drawn first and the commanded force is set so that point
    satisfies the equality constraint.
    """
    from .allocation import ThrusterBank, assemble_local_qp, configuration_matrix

    intervals = bank_template.alpha_intervals
    alpha = np.empty(6)
    for i, (lo, hi) in enumerate(intervals):
        if np.isinf(lo) or np.isinf(hi):
            alpha[i] = rng.uniform(0.0, 2.0 * np.pi)
        else:
            alpha[i] = rng.uniform(lo + 0.1, hi - 0.1)
    u = rng.uniform(bank_template.u_min + 0.05, bank_template.u_max - 0.05)
    bank = ThrusterBank(
        lx=bank_template.lx,
        ly=bank_template.ly,
        alpha_intervals=intervals,
        u_min=bank_template.u_min,
        u_max=bank_template.u_max,
        delta_alpha_cycle=bank_template.delta_alpha_cycle,
        alpha=alpha,
        u=u,
    )
    problem = assemble_local_qp(
        np.zeros(3), bank, Q=0.2 * np.ones(6), P=0.2 * np.ones(6), R=10.0 * np.ones(3)
    )
    interior = problem.U_lo + rng.uniform(0.15, 0.85, size=15) * (
        problem.U_hi - problem.U_lo
    )
    # choose tau so the interior point satisfies Mmat U = Y exactly
    Y = problem.Mmat @ interior
    T0 = configuration_matrix(bank.alpha, bank)
    tau_cmd = Y + T0 @ bank.u
    return assemble_local_qp(
        tau_cmd, bank, Q=0.2 * np.ones(6), P=0.2 * np.ones(6), R=10.0 * np.ones(3)
    )
