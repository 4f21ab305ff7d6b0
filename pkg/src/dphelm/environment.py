"""Environmental load synthesis: wind loads, gated wave-drift loads from a
JONSWAP component bank, and the bounded random disturbance.

The wave-drift model is the slowly-varying component bank

    tau_wave[dof] = sum_k rho_water g |F2(omega_k, beta_r)| A_k^2 cos(omega_e t + eps_k)

scaled by the shielding gate.  The drift-amplitude function |F2| stands in
for RAO data: the default is scale * (1 + cos(beta_r)) per degree of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass
class GateParams:
    """Shielding gate: zero before T, linear ramp of length t_T, one after."""

    T: float
    t_T: float

    def __post_init__(self):
        if self.t_T <= 0.0:
            raise ValueError("shielding ramp time t_T must be positive")


def wave_gate(t: float, gate: GateParams) -> float:
    """Gate value in [0, 1]; continuous and non-decreasing in t.

    The ramp is (t - T)/t_T.  (The source formulation prints the ramp with
    the opposite sign, which contradicts its own endpoints; the increasing
    ramp is used.)
    """
    if t < gate.T:
        return 0.0
    s = (t - gate.T) / gate.t_T
    return 1.0 if s >= 1.0 else s


@dataclass
class WindParams:
    """Wind load model parameters; phi = [C_x, C_y, C_N] peak drag coefficients."""

    rho_air: float
    A_T: float
    A_L: float
    L_v: float
    beta_w: float
    V_w: float
    phi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        if self.rho_air <= 0 or self.A_T <= 0 or self.A_L <= 0 or self.L_v <= 0:
            raise ValueError("air density, areas and vessel length must be positive")
        if self.V_w < 0:
            raise ValueError("wind speed must be non-negative")


def wind_regressor(psi: float, p: WindParams) -> np.ndarray:
    """Diagonal wind regressor Pi(psi) with tau_wind = Pi @ phi."""
    q = 0.5 * p.rho_air * p.V_w**2
    rel = psi - p.beta_w
    return q * np.diag(
        [np.cos(rel) * p.A_T, np.sin(rel) * p.A_L, np.sin(2.0 * rel) * p.A_L * p.L_v]
    )


def wind_load(psi: float, p: WindParams) -> tuple[np.ndarray, np.ndarray]:
    """Wind regressor and generalized wind force/moment [surge, sway, yaw]."""
    Pi = wind_regressor(psi, p)
    return Pi, Pi @ p.phi


def jonswap_spectrum(omega: np.ndarray, Hs: float, Tp: float, gamma: float = 3.3) -> np.ndarray:
    """Hs-normalized JONSWAP spectral density (Goda's form).

    Normalized so that the integral approximates Hs^2/16 for any peak period,
    which keeps component amplitudes meaningful across the whole frequency
    range used by the drift bank.
    """
    omega = np.asarray(omega, dtype=float)
    if Hs < 0 or Tp <= 0 or gamma <= 0:
        raise ValueError("invalid spectral parameters")
    wp = 2.0 * np.pi / Tp
    beta_j = (
        0.0624
        * (1.094 - 0.01915 * np.log(gamma))
        / (0.230 + 0.0336 * gamma - 0.185 / (1.9 + gamma))
    )
    sigma = np.where(omega <= wp, 0.07, 0.09)
    with np.errstate(divide="ignore", invalid="ignore"):
        peak_arg = np.exp(-((omega - wp) ** 2) / (2.0 * sigma**2 * wp**2))
        shape = np.where(
            omega > 0.0,
            beta_j * Hs**2 * wp**4 / np.where(omega > 0, omega, 1.0) ** 5
            * np.exp(-1.25 * (wp / np.where(omega > 0, omega, 1.0)) ** 4)
            * gamma**peak_arg,
            0.0,
        )
    return shape


DriftAmplitude = Callable[[np.ndarray, float], np.ndarray]


def default_drift_amplitude(scale: float) -> DriftAmplitude:
    """Stand-in for RAO drift data: scale * (1 + cos(beta_r)), flat in omega."""

    def amplitude(omegas: np.ndarray, beta_r: float) -> np.ndarray:
        return scale * (1.0 + np.cos(beta_r)) * np.ones_like(omegas)

    return amplitude


@dataclass
class WaveComponentBank:
    """Discretized drift-band spectrum: frequencies, amplitudes and phases.

    Amplitudes satisfy A_k = sqrt(2 S(omega_k) d_omega); phases are drawn
    uniformly from [-0.2, 0.2] rad with the bank's seed.
    """

    omegas: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    beta_wave: float
    omega_o: float
    rho_water: float
    g_v: float
    drift_amplitudes: tuple[DriftAmplitude, DriftAmplitude, DriftAmplitude]

    @property
    def amplitude_at_peak(self) -> float:
        """A_k of the component closest to the dominant frequency."""
        idx = int(np.argmin(np.abs(self.omegas - self.omega_o)))
        return float(self.amplitudes[idx])


def jonswap_components(
    Hs: float,
    Tp: float,
    N: int,
    omega_range: tuple[float, float],
    seed: int,
    gamma: float = 3.3,
    beta_wave: float = 0.0,
    rho_water: float = 1025.0,
    g_v: float = 9.81,
    drift_scales: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> WaveComponentBank:
    """Build an equally spaced component bank over ``omega_range``."""
    if N < 1:
        raise ValueError("need at least one wave component")
    lo, hi = omega_range
    if not (0.0 < lo < hi):
        raise ValueError("omega_range must be a positive non-empty interval")
    omegas = np.linspace(lo, hi, N)
    d_omega = (hi - lo) / N if N > 1 else hi - lo
    S = jonswap_spectrum(omegas, Hs, Tp, gamma)
    amplitudes = np.sqrt(2.0 * S * d_omega)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(-0.2, 0.2, size=N)
    drift = tuple(default_drift_amplitude(s) for s in drift_scales)
    return WaveComponentBank(
        omegas=omegas,
        amplitudes=amplitudes,
        phases=phases,
        beta_wave=beta_wave,
        omega_o=2.0 * np.pi / Tp,
        rho_water=rho_water,
        g_v=g_v,
        drift_amplitudes=drift,  # type: ignore[arg-type]
    )


def encounter_frequency(U: float, omega: float, beta: float, g_v: float) -> float:
    """Doppler-shifted wave frequency |omega - omega^2 U cos(beta) / g|."""
    if g_v <= 0.0:
        raise ValueError("gravity must be positive")
    return abs(omega - (omega**2 / g_v) * U * np.cos(beta))


def wave_drift_load(
    t: float,
    bank: WaveComponentBank,
    U: float,
    gate_value: float,
    beta_r: Optional[float] = None,
) -> np.ndarray:
    """Gated slowly-varying drift force/moment for the three DOF.

    ``t`` is the wave clock (the harness starts it at the attack instant so
    the near-aligned phases stay coherent through the ramp).  ``beta_r`` is
    the wave attack angle relative to the heading; defaults to the bank's
    absolute attack direction.
    """
    if beta_r is None:
        beta_r = bank.beta_wave
    omega_e = np.abs(bank.omegas - (bank.omegas**2 / bank.g_v) * U * np.cos(beta_r))
    weighted = bank.amplitudes**2 * np.cos(omega_e * t + bank.phases)
    out = np.empty(3)
    for dof in range(3):
        f2 = bank.drift_amplitudes[dof](bank.omegas, beta_r)
        out[dof] = bank.rho_water * bank.g_v * np.sum(f2 * weighted)
    return gate_value * out


def disturbance_sample(rng: np.random.Generator, bound: float = 0.05) -> np.ndarray:
    """One bounded random disturbance draw, uniform per channel."""
    return rng.uniform(-bound, bound, size=3)
