"""Closed-loop scenario runner.

Fixed event order per step: environment loads -> observer/controller command
-> allocation (at its own cadence, zero-order hold) -> plant delay line ->
joint RK4 integration of plant + observer + adaptive laws.  The controller
filter and both NN weight sets advance at the control rate; the plant,
observer state and wind-coefficient estimator integrate inside the RK4 stage
so the stiff adaptation loops stay stable.

Writes one CSV per module plus a JSON run summary and a copy of the scenario
file; all randomness derives from the scenario seed.
"""

from __future__ import annotations

import json
import shutil
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import allocation as alloc
from . import controller as ctrl
from . import environment as env
from . import observer as obs
from .rbf import basis_eval
from .scenario import Scenario
from .vessel import (
    DelayLine,
    IntegrationError,
    delay_read_and_integral,
    rk4_step,
    rotation_matrix,
)


class SimulationAbort(RuntimeError):
    """Raised after partial logs are flushed when the loop hits a fatal state."""


def desired_trajectory(t: float, t_m: float, guard: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Reference pose and rate: held before t_m, quarter-round after.

    eta_xd = 17 sin(0.005 (t - t_m)), eta_yd = -17 sin(0.005 (t - t_m) + pi/2),
    psi_d = pi/2 - arctan(|x_d| / |y_d|).  The two translational rates are
    analytic; the heading rate is a finite difference with a guarded ratio.
    """
    hold = np.array([0.0, -17.0, np.pi / 2.0])
    if t <= t_m:
        return hold, np.zeros(3)

    def pose(tq: float) -> np.ndarray:
        s = 0.005 * (tq - t_m)
        x = 17.0 * np.sin(s)
        y = -17.0 * np.sin(s + np.pi / 2.0)
        psi = np.pi / 2.0 - np.arctan(abs(x) / max(abs(y), guard))
        return np.array([x, y, psi])

    eta_d = pose(t)
    s = 0.005 * (t - t_m)
    rate = np.empty(3)
    rate[0] = 17.0 * 0.005 * np.cos(s)
    rate[1] = -17.0 * 0.005 * np.cos(s + np.pi / 2.0)
    h = 1e-3
    rate[2] = (pose(t)[2] - pose(max(t - h, t_m))[2]) / min(h, t - t_m)
    return eta_d, rate


@dataclass
class RunSummary:
    duration: float
    steps: int
    alarm_time: Optional[float]
    max_abs_z1: list
    final_z1: list
    barrier_violations: int
    allocation_cycles: int
    unconverged_cycles: int
    max_force_mismatch: float
    runtime_s: float
    seed: int
    aborted: Optional[str] = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


def _fmt_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


class _CsvLog:
    def __init__(self, path: Path, header: list[str]):
        self.path = path
        self.rows: list[str] = [",".join(header)]

    def add(self, values) -> None:
        self.rows.append(_fmt_row(values))

    def flush(self) -> None:
        self.path.write_text("\n".join(self.rows) + "\n", encoding="utf-8")


OBSERVER_COLUMNS = (
    ["t"]
    + [f"xhat_{n}" for n in ("x", "y", "psi", "u", "v", "r")]
    + ["phihat_cx", "phihat_cy", "phihat_cn", "alarm", "xtilde_norm", "xtilde_pos_norm"]
)
CONTROLLER_COLUMNS = (
    ["t"]
    + [f"etad_{n}" for n in ("x", "y", "psi")]
    + [f"eta_{n}" for n in ("x", "y", "psi")]
    + [f"z1_{n}" for n in ("x", "y", "psi")]
    + [f"z2_{n}" for n in ("u", "v", "r")]
    + [f"S_{n}" for n in ("u", "v", "r")]
    + [f"zf_{n}" for n in ("u", "v", "r")]
    + [f"taup_{n}" for n in ("x", "y", "n")]
    + [f"tauwhat_{n}" for n in ("x", "y", "n")]
    + [f"taucmd_{n}" for n in ("x", "y", "n")]
)
ALLOCATION_COLUMNS = (
    ["t"]
    + [f"taucmd_{n}" for n in ("x", "y", "n")]
    + [f"tauach_{n}" for n in ("x", "y", "n")]
    + [f"o_{n}" for n in ("x", "y", "n")]
    + [f"u_{i}" for i in range(1, 7)]
    + [f"alpha_{i}" for i in range(1, 7)]
    + ["iterations", "converged"]
)
ENVIRONMENT_COLUMNS = (
    ["t", "gate"]
    + [f"tauwave_{n}" for n in ("x", "y", "n")]
    + [f"tauwind_{n}" for n in ("x", "y", "n")]
    + [f"d_{n}" for n in ("x", "y", "n")]
    + [f"applied_{n}" for n in ("x", "y", "n")]
)


def run_scenario(
    scenario: Scenario,
    out_dir: str | Path | None,
    seed_override: Optional[int] = None,
    duration_override: Optional[float] = None,
    config_path: Optional[Path] = None,
) -> RunSummary:
    """Run the closed loop and write logs; returns the run summary.

    Fatal conditions (barrier violation, solver divergence, non-finite state)
    flush partial logs and raise :class:`SimulationAbort`.
    """
    t_start = time.perf_counter()
    seed = scenario.seed if seed_override is None else seed_override
    duration = scenario.duration if duration_override is None else duration_override
    dt = scenario.dt
    n_steps = int(round(duration / dt))

    ss = np.random.SeedSequence(seed)
    seed_wave, seed_dist = ss.spawn(2)
    rng_dist = np.random.default_rng(seed_dist)

    model = scenario.vessel_model()
    wind = scenario.wind_params()
    gate_params = scenario.gate_params()
    bank_wave = scenario.wave_bank(seed_wave)
    ogains = scenario.observer_gains()
    cgains = scenario.controller_gains()
    thrusters = scenario.thruster_bank()

    obs_net = scenario.rbf_network()
    ctrl_net = scenario.rbf_network()

    init = scenario.init
    eta = np.array(init["eta0"], dtype=float)
    nu = np.array(init["nu0"], dtype=float)
    x_hat = np.concatenate([eta, nu])
    observer_state = obs.ObserverState(
        x_hat=x_hat.copy(),
        phi_hat=np.array(init["phi_hat0"], dtype=float),
        w_d=np.zeros((obs_net.n_nodes, 3)),
    )
    controller_state = ctrl.ControllerState(
        z_f=np.zeros(3), w_c=np.zeros((ctrl_net.n_nodes, 3))
    )
    freeze_ff = bool(scenario.observer.get("freeze_wind_after_alarm", False))
    envelope = np.array(scenario.controller.get("tau_envelope", [2.5, 2.5, 0.8]))
    rate_tf = float(scenario.controller.get("alpha_rate_filter", 0.8))
    rate_beta = float(np.exp(-dt / rate_tf)) if rate_tf > 0.0 else 0.0
    alpha_c_rate_f = np.zeros(3)
    slew = np.array(scenario.controller.get("tau_slew", [2.0, 2.0, 1.0]))
    last_cmd = np.zeros(3)

    acfg = scenario.allocator
    plant_line = DelayLine(delay=scenario.t_d, dt=dt)
    cmd_line = DelayLine(delay=scenario.t_d, dt=dt)

    dist_enabled = bool(scenario.disturbance.get("enabled", True))
    dist_bound = float(scenario.disturbance.get("bound", 0.05))
    wave_enabled = bank_wave is not None
    beta_wave = scenario.wave_table["beta_wave"]
    A_o = bank_wave.amplitude_at_peak if wave_enabled else 0.0
    omega_o = scenario.wave_table["omega_o"]

    out_path = Path(out_dir) if out_dir is not None else None
    logs: dict[str, _CsvLog] = {}
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        logs["observer"] = _CsvLog(out_path / "observer.csv", OBSERVER_COLUMNS)
        logs["controller"] = _CsvLog(out_path / "controller.csv", CONTROLLER_COLUMNS)
        logs["allocation"] = _CsvLog(out_path / "allocation.csv", ALLOCATION_COLUMNS)
        logs["environment"] = _CsvLog(out_path / "environment.csv", ENVIRONMENT_COLUMNS)
        src_cfg = config_path if config_path is not None else None
        if src_cfg is not None:
            shutil.copyfile(src_cfg, out_path / "scenario.toml")

    applied_force = np.zeros(3)
    next_alloc = 0.0
    v_warm: Optional[np.ndarray] = None
    h_warm = float(acfg.get("h", 0.25))
    alloc_cycles = 0
    unconverged = 0
    max_mismatch = 0.0
    max_abs_z1 = np.zeros(3)
    last_z1 = np.zeros(3)
    t = 0.0

    def finish(aborted: Optional[str]) -> RunSummary:
        for log in logs.values():
            log.flush()
        summary = RunSummary(
            duration=t,
            steps=step,
            alarm_time=observer_state.alarm_time,
            max_abs_z1=[float(v) for v in max_abs_z1],
            final_z1=[float(v) for v in last_z1],
            barrier_violations=0 if aborted is None else 1,
            allocation_cycles=alloc_cycles,
            unconverged_cycles=unconverged,
            max_force_mismatch=float(max_mismatch),
            runtime_s=time.perf_counter() - t_start,
            seed=seed,
            aborted=aborted,
        )
        if out_path is not None:
            (out_path / "summary.json").write_text(summary.to_json(), encoding="utf-8")
        return summary

    step = 0
    try:
        for step in range(n_steps + 1):
            t = step * dt
            psi = eta[2]

            # --- environment (held over the step) -------------------------
            gate = env.wave_gate(t, gate_params)
            if wave_enabled and gate > 0.0:
                speed = float(np.hypot(nu[0], nu[1]))
                beta_r = beta_wave - psi
                tau_wave = env.wave_drift_load(
                    t - gate_params.T, bank_wave, speed, gate, beta_r
                )
            else:
                tau_wave = np.zeros(3)
            d = (
                env.disturbance_sample(rng_dist, dist_bound)
                if dist_enabled
                else np.zeros(3)
            )

            # --- measurements and wind estimate ---------------------------
            x_meas = np.concatenate([eta, nu])
            Pi = env.wind_regressor(psi, wind)
            if observer_state.alarm and freeze_ff and observer_state.phi_frozen is not None:
                phi_ff = observer_state.phi_frozen
            else:
                phi_ff = observer_state.phi_hat
            tau_wind_hat = Pi @ phi_ff

            # --- controller ------------------------------------------------
            eta_d, eta_d_rate = desired_trajectory(t, scenario.t_m)
            z1 = np.array(
                [eta_d[0] - eta[0], eta_d[1] - eta[1], ctrl.wrap_angle(eta_d[2] - eta[2])]
            )
            last_z1 = z1
            max_abs_z1 = np.maximum(max_abs_z1, np.abs(z1))
            alpha_c = ctrl.stabilizing_function(eta_d_rate, z1, psi, cgains.K1, cgains.N_b)
            if controller_state.alpha_c_prev is None:
                raw_rate = np.zeros(3)
            else:
                raw_rate = (alpha_c - controller_state.alpha_c_prev) / dt
            controller_state.alpha_c_prev = alpha_c
            # low-pass the differenced rate: a reference corner otherwise
            # aliases into one saturated sample and its impulse is lost
            alpha_c_rate = rate_beta * alpha_c_rate_f + (1.0 - rate_beta) * raw_rate
            alpha_c_rate_f = alpha_c_rate
            z2 = alpha_c - nu

            read_t = max(t - dt, 0.0)
            _, cmd_integral = delay_read_and_integral(cmd_line, read_t)
            S = ctrl.auxiliary_state(z2, cmd_integral, controller_state.z_f, model)
            tau_prime = ctrl.control_law(
                z1, z2, S, controller_state.z_f, alpha_c_rate, nu, eta, psi, model, cgains
            )

            eta_rate_meas = rotation_matrix(psi) @ nu
            z_c = np.array(
                [A_o, omega_o, beta_wave, eta_rate_meas[0], eta_rate_meas[1], psi]
            )
            basis_c = basis_eval(ctrl_net, z_c)
            w_c_dot, tau_prime_m = ctrl.controller_nn_update_and_augment(
                S, basis_c, controller_state.w_c, tau_prime,
                cgains, controller_state.alarm_mode,
            )

            tau_cmd = ctrl.actuator_command(tau_prime_m, tau_wind_hat)
            tau_cmd = np.clip(tau_cmd, -envelope, envelope)
            # slew limit keeps per-cycle command changes inside the locally
            # reachable force set of the linearized allocator
            tau_cmd = last_cmd + np.clip(tau_cmd - last_cmd, -slew * dt, slew * dt)
            last_cmd = tau_cmd
            tau_prime_booked = tau_cmd + tau_wind_hat
            cmd_line.push(t, tau_prime_booked)

            controller_state.z_f = controller_state.z_f + dt * ctrl.zf_rate(
                S, z2, controller_state.z_f, cgains
            )
            controller_state.w_c = controller_state.w_c + dt * w_c_dot

            # --- allocation at its own cadence ----------------------------
            if t + 1e-9 >= next_alloc:
                problem = alloc.assemble_local_qp(
                    tau_cmd,
                    thrusters,
                    Q=acfg["Q"] * np.ones(6),
                    P=acfg["P"] * np.ones(6),
                    R=acfg["R"] * np.ones(3),
                    o_bound=acfg["o_bound"],
                )
                result = alloc.solve_allocation(
                    problem,
                    max_iter=int(acfg["max_iter"]),
                    window=int(acfg["var_window"]),
                    var_tol=acfg["var_tol"],
                    gamma_mode=acfg.get("gamma_mode", "rescaled"),
                    gamma0=acfg.get("gamma0", 0.1),
                    v_warm=v_warm,
                    h=h_warm,
                    check_every=int(acfg.get("check_every", 25)),
                    bank=thrusters,
                )
                thrusters.alpha = result.alpha
                thrusters.u = result.u
                applied_force = result.achieved
                v_warm = result.v_dual
                h_warm = result.h
                alloc_cycles += 1
                if result.reason != "variance":
                    unconverged += 1
                mismatch = float(np.max(np.abs(result.achieved - tau_cmd)))
                max_mismatch = max(max_mismatch, mismatch)
                if "allocation" in logs:
                    logs["allocation"].add(
                        [t, *tau_cmd, *result.achieved, *result.o, *result.u,
                         *np.mod(result.alpha, 2.0 * np.pi),
                         result.iterations, 1.0 if result.reason == "variance" else 0.0]
                    )
                next_alloc += scenario.dt_opt

            plant_line.push(t, applied_force)
            delayed_applied, _ = delay_read_and_integral(plant_line, t)

            # --- logs ------------------------------------------------------
            x_tilde = x_meas - observer_state.x_hat
            if logs:
                logs["observer"].add(
                    [t, *observer_state.x_hat, *observer_state.phi_hat,
                     1.0 if observer_state.alarm else 0.0,
                     float(np.linalg.norm(x_tilde)),
                     float(np.linalg.norm(x_tilde[:3]))]
                )
                logs["controller"].add(
                    [t, *eta_d, *eta, *z1, *z2, *S, *controller_state.z_f,
                     *tau_prime_m, *tau_wind_hat, *tau_cmd]
                )
                logs["environment"].add(
                    [t, gate, *tau_wave, *Pi @ wind.phi, *d, *delayed_applied]
                )

            if step == n_steps:
                break

            # --- joint integration over [t, t + dt] ------------------------
            mode = "post" if observer_state.alarm else "pre"
            obs_net.weights = observer_state.w_d

            def rhs(t_sub: float, y: np.ndarray) -> np.ndarray:
                eta_s = y[0:3]
                nu_s = y[3:6]
                xh_s = y[6:12]
                ph_s = y[12:15]
                wd_s = y[15:].reshape(-1, 3)
                psi_s = eta_s[2]

                Pi_s = env.wind_regressor(psi_s, wind)
                tau_wind_true = Pi_s @ wind.phi
                pose_rate = rotation_matrix(psi_s) @ nu_s
                force = (
                    delayed_applied
                    + tau_wave
                    + tau_wind_true
                    + d
                    - model.dynamics_matrix(nu_s) @ nu_s
                    - model.restoring(eta_s)
                )
                nu_rate = model.M_inv @ force

                x_meas_s = y[0:6]
                if observer_state.alarm and freeze_ff and observer_state.phi_frozen is not None:
                    phi_ff_s = observer_state.phi_frozen
                else:
                    phi_ff_s = ph_s
                eta_rate_hat = rotation_matrix(xh_s[2]) @ xh_s[3:6]
                z_ow = np.array(
                    [A_o, omega_o, beta_wave, eta_rate_hat[0], eta_rate_hat[1], xh_s[2]]
                )
                obs_net.weights = wd_s
                xh_rate = obs.observer_rhs(
                    xh_s, x_meas_s, delayed_applied, Pi_s, phi_ff_s,
                    ogains, model, net=obs_net, z_ow=z_ow, mode=mode,
                )
                xt_s = x_meas_s - xh_s
                ph_rate = obs.wind_coeff_rate(xt_s, Pi_s, ogains, model)
                if mode == "post":
                    wd_rate = obs.observer_nn_rate(
                        xt_s, basis_eval(obs_net, z_ow), ogains, model
                    )
                else:
                    wd_rate = np.zeros_like(wd_s)
                return np.concatenate(
                    [pose_rate, nu_rate, xh_rate, ph_rate, wd_rate.ravel()]
                )

            y0 = np.concatenate(
                [eta, nu, observer_state.x_hat, observer_state.phi_hat,
                 observer_state.w_d.ravel()]
            )
            y1 = rk4_step(y0, rhs, t, dt)
            eta = y1[0:3]
            nu = y1[3:6]
            observer_state.x_hat = y1[6:12]
            observer_state.phi_hat = y1[12:15]
            observer_state.w_d = y1[15:].reshape(-1, 3)

            # --- alarm monitor --------------------------------------------
            t_next = (step + 1) * dt
            observer_state.record_phi(t_next, ogains.alarm_window)
            was_alarm = observer_state.alarm
            obs.alarm_update(observer_state, t_next, ogains)
            if observer_state.alarm and not was_alarm:
                controller_state.alarm_mode = True
    except ctrl.BarrierViolation as exc:
        summary = finish(f"barrier violation at t={t:.3f}: {exc}")
        raise SimulationAbort(summary.aborted) from exc
    except alloc.SolverDivergence as exc:
        summary = finish(f"solver divergence at t={t:.3f}: {exc}")
        raise SimulationAbort(summary.aborted) from exc
    except (IntegrationError, FloatingPointError) as exc:
        summary = finish(f"non-finite state at t={t:.3f}: {exc}")
        raise SimulationAbort(summary.aborted) from exc

    return finish(None)
