"""Figure catalogue: what each plot reads and which config-driven constraint
overlays it draws.

Overlay values always come from the run's copied ``scenario.toml``; nothing
is hard-coded so re-tuned runs plot their own limits.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

THRUSTER_IDS = range(1, 7)
DOF = ("x", "y", "n")


@dataclass(frozen=True)
class FigureSpec:
    """One rendered image: source CSV, required columns, overlay keys."""

    name: str
    source: str
    columns: tuple
    title: str
    overlays: tuple = ()


SPECS = (
    FigureSpec(
        name="trajectory_surge",
        source="controller.csv",
        columns=("t", "etad_x", "eta_x"),
        title="Desired and vessel motion, surge",
    ),
    FigureSpec(
        name="trajectory_sway",
        source="controller.csv",
        columns=("t", "etad_y", "eta_y"),
        title="Desired and vessel motion, sway",
    ),
    FigureSpec(
        name="trajectory_yaw",
        source="controller.csv",
        columns=("t", "etad_psi", "eta_psi"),
        title="Desired and vessel heading",
    ),
    FigureSpec(
        name="tracking_errors",
        source="controller.csv",
        columns=("t", "z1_x", "z1_y", "z1_psi"),
        title="Tracking errors and barrier bounds",
        overlays=("N_b",),
    ),
    FigureSpec(
        name="wind_coefficients",
        source="observer.csv",
        columns=("t", "phihat_cx", "phihat_cy", "phihat_cn", "alarm"),
        title="Estimated wind drag coefficients",
        overlays=("alarm_threshold",),
    ),
    FigureSpec(
        name="observer_error",
        source="observer.csv",
        columns=("t", "xtilde_norm", "xtilde_pos_norm"),
        title="Sea-observer estimation error",
    ),
    FigureSpec(
        name="allocation_forces",
        source="allocation.csv",
        columns=("t",)
        + tuple(f"taucmd_{d}" for d in DOF)
        + tuple(f"tauach_{d}" for d in DOF)
        + tuple(f"o_{d}" for d in DOF),
        title="Commanded vs allocated generalized force",
        overlays=("o_bound",),
    ),
    FigureSpec(
        name="thruster_thrust",
        source="allocation.csv",
        columns=("t",) + tuple(f"u_{i}" for i in THRUSTER_IDS),
        title="Thrust per thruster",
        overlays=("u_min", "u_max"),
    ),
    FigureSpec(
        name="thruster_angles",
        source="allocation.csv",
        columns=("t",) + tuple(f"alpha_{i}" for i in THRUSTER_IDS),
        title="Azimuth angles and per-cycle rotation",
        overlays=("delta_alpha_cycle", "forbidden_zones"),
    ),
)


def load_run_config(run_dir: Path) -> dict[str, Any]:
    path = Path(run_dir) / "scenario.toml"
    if not path.exists():
        raise FileNotFoundError(f"missing run configuration copy: {path}")
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def overlay_values(config: dict[str, Any]) -> dict[str, Any]:
    """Constraint overlays extracted from the run's own configuration."""
    alloc = config["allocator"]
    zones = []
    half = float(alloc["zone_halfwidth_deg"])
    unconstrained = set(alloc.get("unconstrained", []))
    for i in THRUSTER_IDS:
        if i in unconstrained:
            zones.append(None)
        else:
            center = float(alloc["encounter_angles_deg"][i - 1])
            zones.append((center - half, center + half))
    return {
        "N_b": [float(v) for v in config["controller"]["N_b"]],
        "alarm_threshold": float(config["observer"]["alarm_threshold"]),
        "u_min": float(alloc["u_min"]),
        "u_max": float(alloc["u_max"]),
        "o_bound": float(alloc["o_bound"]),
        "delta_alpha_cycle": float(alloc["delta_alpha_cycle"]),
        "forbidden_zones": zones,
    }
