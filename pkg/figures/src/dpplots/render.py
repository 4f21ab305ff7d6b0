"""Rendering of the figure catalogue from a run directory."""

from __future__ import annotations

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .specs import DOF, SPECS, THRUSTER_IDS, FigureSpec, load_run_config, overlay_values


class SchemaError(RuntimeError):
    """A required CSV or column is missing from the run directory."""


def _load_frames(run_dir: Path, specs=SPECS) -> dict[str, pd.DataFrame]:
    run_dir = Path(run_dir)
    wanted = sorted({spec.source for spec in specs})
    missing = [name for name in wanted if not (run_dir / name).exists()]
    if missing:
        raise SchemaError(
            f"run directory {run_dir} is missing required files: {', '.join(missing)}"
        )
    frames = {}
    for name in wanted:
        frames[name] = pd.read_csv(run_dir / name, on_bad_lines="skip")
    return frames


def _check_columns(frames: dict[str, pd.DataFrame], specs=SPECS) -> None:
    for spec in specs:
        have = frames[spec.source].columns
        missing = [c for c in spec.columns if c not in have]
        if missing:
            raise SchemaError(
                f"{spec.source} lacks column(s) {', '.join(missing)} "
                f"needed by figure '{spec.name}'"
            )


def _warn_if_truncated(frames, config) -> None:
    duration = float(config["sim"]["duration"])
    ctrl = frames["controller.csv"]
    if len(ctrl) and float(ctrl["t"].iloc[-1]) < duration - 1.0:
        print(
            f"warning: controller.csv ends at t={ctrl['t'].iloc[-1]:.2f}s "
            f"but the configuration ran to {duration:.0f}s; rendering the "
            "available range",
            file=sys.stderr,
        )


def _hline(ax, y, **kw):
    ax.axhline(y, color=kw.pop("color", "crimson"), lw=0.9, ls="--", **kw)


def _render_one(spec: FigureSpec, df: pd.DataFrame, ov: dict, out: Path) -> Path:
    t = df["t"].to_numpy()
    if spec.name.startswith("trajectory_"):
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ref, act = spec.columns[1], spec.columns[2]
        ax.plot(t, df[ref], label="desired", color="tab:red")
        ax.plot(t, df[act], label="vessel", color="tab:blue", lw=0.9)
        ax.set_ylabel({"x": "x [m]", "y": "y [m]", "psi": "heading [rad]"}[
            ref.split("_")[1]
        ])
    elif spec.name == "tracking_errors":
        fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
        for ax, col, nb, unit in zip(
            axes, ("z1_x", "z1_y", "z1_psi"), ov["N_b"], ("m", "m", "rad")
        ):
            ax.plot(t, df[col], lw=0.9)
            _hline(ax, nb)
            _hline(ax, -nb)
            ax.set_ylabel(f"{col} [{unit}]")
        ax = axes[-1]
    elif spec.name == "wind_coefficients":
        fig, ax = plt.subplots(figsize=(7, 3.2))
        for col, label in (
            ("phihat_cx", "C_x"), ("phihat_cy", "C_y"), ("phihat_cn", "C_N"),
        ):
            ax.plot(t, df[col], label=label, lw=0.9)
        _hline(ax, ov["alarm_threshold"])
        alarm = df["alarm"].to_numpy()
        if np.any(alarm > 0.5):
            ax.axvline(t[np.argmax(alarm > 0.5)], color="k", lw=0.8, ls=":")
        ax.set_ylabel("estimated drag coefficient [-]")
    elif spec.name == "observer_error":
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ax.plot(t, df["xtilde_norm"], label="full state", lw=0.9)
        ax.plot(t, df["xtilde_pos_norm"], label="position", lw=0.9)
        ax.set_ylabel("estimation error norm")
        ax.set_yscale("log")
    elif spec.name == "allocation_forces":
        fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
        units = ("N", "N", "N m")
        for ax, d, unit in zip(axes, DOF, units):
            ax.plot(t, df[f"taucmd_{d}"], label="command", color="tab:red")
            ax.plot(t, df[f"tauach_{d}"], label="allocated", color="tab:blue", lw=0.8)
            ax.set_ylabel(f"tau_{d} [{unit}]")
        ax = axes[-1]
    elif spec.name == "thruster_thrust":
        fig, ax = plt.subplots(figsize=(7, 3.2))
        for i in THRUSTER_IDS:
            ax.plot(t, df[f"u_{i}"], lw=0.8, label=f"u{i}")
        _hline(ax, ov["u_max"])
        _hline(ax, ov["u_min"])
        ax.set_ylabel("thrust [N]")
    elif spec.name == "thruster_angles":
        fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
        for i, zone in zip(THRUSTER_IDS, ov["forbidden_zones"]):
            axes[0].plot(t, np.rad2deg(df[f"alpha_{i}"]), lw=0.8, label=f"a{i}")
            if zone is not None:
                axes[0].axhspan(
                    zone[0] % 360.0, zone[1] % 360.0, color="crimson", alpha=0.06
                )
        axes[0].set_ylabel("azimuth [deg]")
        for i in THRUSTER_IDS:
            step = np.angle(np.exp(1j * np.diff(df[f"alpha_{i}"].to_numpy())))
            axes[1].plot(t[1:], step, lw=0.7)
        _hline(axes[1], ov["delta_alpha_cycle"])
        _hline(axes[1], -ov["delta_alpha_cycle"])
        axes[1].set_ylabel("rotation per cycle [rad]")
        ax = axes[1]
    else:  # pragma: no cover - catalogue and renderer kept in sync
        raise SchemaError(f"no renderer for figure '{spec.name}'")

    ax.set_xlabel("t [s]")
    fig.suptitle(spec.title)
    handles, labels = ax.get_legend_handles_labels()
    if labels:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out / f"{spec.name}.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_all(run_dir: str | Path, out_dir: str | Path) -> list[Path]:
    """Render every catalogued figure; returns the written file paths."""
    run_dir = Path(run_dir)
    config = load_run_config(run_dir)
    frames = _load_frames(run_dir)
    _check_columns(frames)
    _warn_if_truncated(frames, config)
    ov = overlay_values(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for spec in SPECS:
        written.append(_render_one(spec, frames[spec.source], ov, out))
    return written
