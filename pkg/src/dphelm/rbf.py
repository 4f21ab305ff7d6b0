"""Gaussian radial-basis-function network shared by the observer and
controller wave compensators.

Both compensators use the same structure: low-discrepancy centers inside
configured per-input ranges, a common width from the mean nearest-neighbor
distance, and a weight matrix updated by the owning adaptive law.  Output has
three channels (surge/sway force, yaw moment).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc


def build_centers(
    ranges: np.ndarray, n_nodes: int, seed: int, width_factor: float = 2.0
) -> tuple[np.ndarray, np.ndarray]:
    """Place centers by a scrambled Halton sequence inside the hyper-rectangle.

    Widths are common across nodes: mean nearest-neighbor distance times
    ``width_factor`` (unit width when the placement is degenerate).  The
    factor 2.0 keeps enough basis overlap for boundary accuracy; 1.5 leaves
    visible least-squares ringing at range edges.
    """
    ranges = np.asarray(ranges, dtype=float)
    if ranges.ndim != 2 or ranges.shape[1] != 2:
        raise ValueError("ranges must be an (n_inputs, 2) array of [lo, hi]")
    if np.any(ranges[:, 1] < ranges[:, 0]):
        raise ValueError("each range must satisfy lo <= hi")
    if n_nodes < 1:
        raise ValueError("need at least one node")
    n_inputs = ranges.shape[0]
    sampler = qmc.Halton(d=n_inputs, scramble=True, seed=seed)
    unit = sampler.random(n_nodes)
    centers = ranges[:, 0] + unit * (ranges[:, 1] - ranges[:, 0])

    if n_nodes == 1:
        widths = np.ones(1)
    else:
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt(np.sum(diff**2, axis=-1))
        np.fill_diagonal(dist, np.inf)
        mean_nn = float(np.mean(np.min(dist, axis=1)))
        sigma = width_factor * mean_nn if mean_nn > 0.0 else 1.0
        widths = np.full(n_nodes, sigma)
    return centers, widths


@dataclass
class RbfNetwork:
    """Centers, widths and a weight matrix mapping activations to 3 channels."""

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.widths = np.asarray(self.widths, dtype=float)
        if np.any(self.widths <= 0.0):
            raise ValueError("widths must be positive")
        if self.weights is None:
            self.weights = np.zeros((self.n_nodes, 3))
        self.weights = np.asarray(self.weights, dtype=float)

    @property
    def n_nodes(self) -> int:
        return self.centers.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.centers.shape[1]

    @classmethod
    def from_ranges(cls, ranges, n_nodes: int, seed: int, n_outputs: int = 3) -> "RbfNetwork":
        centers, widths = build_centers(ranges, n_nodes, seed)
        return cls(centers, widths, np.zeros((n_nodes, n_outputs)))


def basis_eval(net: RbfNetwork, Z: np.ndarray) -> np.ndarray:
    """Gaussian activations exp(-||Z - c_i||^2 / sigma_i^2), each in (0, 1]."""
    Z = np.asarray(Z, dtype=float)
    diff = net.centers - Z
    sq = np.einsum("ij,ij->i", diff, diff)
    return np.exp(-sq / net.widths**2)


def nn_output(net: RbfNetwork, Z: np.ndarray) -> np.ndarray:
    """Weighted network output weights.T @ basis_eval(Z)."""
    s = basis_eval(net, Z)
    if net.weights.shape[0] != s.shape[0]:
        raise ValueError(
            f"weight rows {net.weights.shape[0]} != nodes {s.shape[0]}"
        )
    return net.weights.T @ s
