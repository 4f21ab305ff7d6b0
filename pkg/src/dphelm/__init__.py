"""Desk-scale dynamic-positioning stack: environment synthesis, adaptive
sea-state observer with alarm logic, barrier backstepping control with
input-delay compensation, and projection-dynamics thrust allocation."""

from .vessel import (
    BodyVelocity,
    DelayLine,
    Pose,
    VesselModel,
    VesselState,
    delay_read_and_integral,
    dynamics_rhs,
    rk4_step,
    rotation_matrix,
)
from .environment import (
    GateParams,
    WaveComponentBank,
    WindParams,
    disturbance_sample,
    encounter_frequency,
    jonswap_components,
    wave_drift_load,
    wave_gate,
    wind_load,
)
from .rbf import RbfNetwork, basis_eval, build_centers, nn_output
from .observer import ObserverGains, ObserverState, alarm_update, kyp_residual
from .controller import BarrierViolation, ControllerGains, ControllerState
from .allocation import (
    AllocationProblem,
    SolverState,
    ThrusterBank,
    assemble_local_qp,
    configuration_jacobian,
    configuration_map,
    forbidden_zone_intervals,
    pdnn_step,
    project,
    solve_allocation,
)
from .scenario import Scenario, load_default_scenario, load_scenario
from .harness import RunSummary, SimulationAbort, desired_trajectory, run_scenario

__version__ = "0.1.0"
