"""Scenario configuration: TOML loading, validation, and builders for the
module parameter blocks.

The shipped ``scenario_paper.toml`` carries the published run values
(trajectory, thresholds, thruster bounds, adaptation rates) together with the
desk-scale choices the source leaves open (vessel matrices, areas, wave band,
thruster arms).  Everything here is plain data; the harness owns the loop.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .allocation import ThrusterBank, forbidden_zone_intervals
from .controller import ControllerGains
from .environment import GateParams, WaveComponentBank, WindParams, jonswap_components
from .observer import ObserverGains
from .rbf import RbfNetwork
from .vessel import VesselModel


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    """Validated scenario: timing block plus raw per-module parameter tables."""

    duration: float
    dt: float
    dt_opt: float
    t_m: float
    T: float
    t_T: float
    t_d: float
    seed: int
    raw: dict[str, Any]

    def __post_init__(self):
        if self.dt <= 0.0 or self.dt_opt < self.dt:
            raise ConfigError("need dt > 0 and dt_opt >= dt")
        if self.duration <= 0.0:
            raise ConfigError("duration must be positive")
        if self.t_T <= 0.0:
            raise ConfigError("shielding ramp t_T must be positive")
        if self.t_d < 0.0:
            raise ConfigError("input delay t_d must be non-negative")

    # -- builders ---------------------------------------------------------

    def vessel_model(self) -> VesselModel:
        v = self.raw["vessel"]
        return VesselModel(M=np.array(v["M"]), D_linear=np.array(v["D"]))

    def wind_params(self) -> WindParams:
        w = self.raw["wind"]
        return WindParams(
            rho_air=w["rho_air"],
            A_T=w["A_T"],
            A_L=w["A_L"],
            L_v=w["L_v"],
            beta_w=w["beta_w"],
            V_w=w["V_w"],
            phi=np.array(w["phi_true"]),
        )

    def gate_params(self) -> GateParams:
        return GateParams(T=self.T, t_T=self.t_T)

    def wave_bank(self, seed) -> Optional[WaveComponentBank]:
        w = self.raw["wave"]
        if not w.get("enabled", True):
            return None
        return jonswap_components(
            Hs=w["Hs"],
            Tp=2.0 * np.pi / w["omega_o"],
            N=int(w["n_components"]),
            omega_range=(w["omega_lo"], w["omega_hi"]),
            seed=seed,
            gamma=w.get("gamma", 3.3),
            beta_wave=w["beta_wave"],
            rho_water=w["rho_water"],
            g_v=w["g_v"],
            drift_scales=tuple(w["drift_scales"]),
        )

    def observer_gains(self) -> ObserverGains:
        o = self.raw["observer"]
        return ObserverGains.build(
            a=o["a"],
            p=o["p"],
            l=o["l"],
            gamma_diag=tuple(o["gamma"]),
            omega_nn=tuple(o["omega_nn"]),
            alarm_threshold=o["alarm_threshold"],
            alarm_window=o["alarm_window"],
        )

    def controller_gains(self) -> ControllerGains:
        c = self.raw["controller"]
        return ControllerGains(
            K1=np.array(c["K1"]),
            K2=np.array(c["K2"]),
            Gamma1=np.array(c["Gamma1"]),
            Theta=np.array(c["Theta"]),
            N_b=np.array(c["N_b"]),
            upsilon=np.array(c["upsilon"]),
            xi=np.array(c["xi"]),
            eps_pinv=c["eps_pinv"],
        )

    def rbf_network(self) -> RbfNetwork:
        r = self.raw["rbf"]
        return RbfNetwork.from_ranges(
            np.array(r["ranges"]), int(r["n_nodes"]), int(r["seed"])
        )

    def thruster_bank(self) -> ThrusterBank:
        a = self.raw["allocator"]
        unconstrained = set(a.get("unconstrained", []))
        encounter = [
            None if (i + 1) in unconstrained else a["encounter_angles_deg"][i]
            for i in range(6)
        ]
        intervals = forbidden_zone_intervals(encounter, a["zone_halfwidth_deg"])
        return ThrusterBank(
            lx=np.array(a["lx"]),
            ly=np.array(a["ly"]),
            alpha_intervals=intervals,
            u_min=a["u_min"] * np.ones(6),
            u_max=a["u_max"] * np.ones(6),
            delta_alpha_cycle=a["delta_alpha_cycle"],
            alpha=np.array(a["alpha0"]),
            u=np.array(a["u0"]),
        )

    # -- convenience accessors -------------------------------------------

    @property
    def allocator(self) -> dict[str, Any]:
        return self.raw["allocator"]

    @property
    def controller(self) -> dict[str, Any]:
        return self.raw["controller"]

    @property
    def observer(self) -> dict[str, Any]:
        return self.raw["observer"]

    @property
    def init(self) -> dict[str, Any]:
        return self.raw["init"]

    @property
    def disturbance(self) -> dict[str, Any]:
        return self.raw.get("disturbance", {"enabled": True, "bound": 0.05})

    @property
    def wave_table(self) -> dict[str, Any]:
        return self.raw["wave"]

    @property
    def wind_table(self) -> dict[str, Any]:
        return self.raw["wind"]


_REQUIRED_TABLES = (
    "sim",
    "vessel",
    "init",
    "wind",
    "wave",
    "observer",
    "controller",
    "rbf",
    "allocator",
)


def load_scenario_dict(raw: dict[str, Any]) -> Scenario:
    for table in _REQUIRED_TABLES:
        if table not in raw:
            raise ConfigError(f"missing configuration table [{table}]")
    sim = raw["sim"]
    scenario = Scenario(
        duration=float(sim["duration"]),
        dt=float(sim["dt"]),
        dt_opt=float(sim["dt_opt"]),
        t_m=float(sim["t_m"]),
        T=float(sim["T"]),
        t_T=float(sim["t_T"]),
        t_d=float(sim["t_d"]),
        seed=int(sim["seed"]),
        raw=raw,
    )
    # touch every builder so invalid blocks fail at load, not mid-run
    scenario.vessel_model()
    scenario.wind_params()
    scenario.observer_gains()
    scenario.controller_gains()
    scenario.rbf_network()
    scenario.thruster_bank()
    scenario.wave_bank(seed=0)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return load_scenario_dict(raw)


def default_scenario_path() -> Path:
    return Path(str(resources.files("dphelm").joinpath("data/scenario_paper.toml")))


def load_default_scenario() -> Scenario:
    return load_scenario(default_scenario_path())
