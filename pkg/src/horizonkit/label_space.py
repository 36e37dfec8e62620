"""Discretized label spaces for classification-style horizon predictors.

Bins are built by linearly interpolating the empirical CDF of a parameter
over training data, so every bin holds roughly the same training mass.  For
the normal angle theta the edges are forced to be symmetric about pi/2
(a level horizon), pairing each edge with its reflected opposite-rank edge.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBins
from .geometry import HorizonLine

THETA_CENTER = math.pi / 2.0


@dataclass(frozen=True, eq=False)
class BinSpec:
    """Quantile bins for one horizon parameter.

    edges: n+1 strictly increasing boundaries.
    centers: n decode values (median of the training samples in each bin).
    """

    parameter: str
    edges: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        edges = np.array(self.edges, dtype=float)
        centers = np.array(self.centers, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("edges must be a 1-d array with at least 2 entries")
        if np.any(np.diff(edges) <= 0):
            raise DegenerateBins(f"bin edges for {self.parameter!r} are not strictly increasing")
        if centers.shape != (edges.size - 1,):
            raise ValueError("centers must have one entry per bin")
        edges.setflags(write=False)
        centers.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "centers", centers)

    @property
    def n(self):
        return self.edges.size - 1

    def to_dict(self):
        return {
            "parameter": self.parameter,
            "edges": self.edges.tolist(),
            "centers": self.centers.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["parameter"], np.asarray(d["edges"]), np.asarray(d["centers"]))

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _symmetrize(edges, center):
    """Force the edge list to be exactly closed under reflection about center.

    Each edge is averaged with the negated opposite-rank edge; the upper half
    is kept and the lower half is rewritten as ``2*center - upper`` so that
    paired edges sum to exactly ``2*center`` in floating point.
    """
    avg = (edges + (2.0 * center - edges[::-1])) / 2.0
    out = avg.copy()
    m = edges.size
    for k in range(m // 2):
        hi = avg[m - 1 - k]
        out[m - 1 - k] = hi
        out[k] = 2.0 * center - hi
    if m % 2 == 1:
        out[m // 2] = center
    return out


def build_bins(samples, n, symmetric=False, center=0.0, parameter="value"):
    """Quantile bin edges at k/n, k = 0..n, of the sorted training sample.

    With ``symmetric`` the edges are additionally symmetrized about
    ``center``.  Raises DegenerateBins when edges collapse (duplicate-heavy
    data); bin centers are the per-bin sample medians (midpoint for bins the
    symmetrization emptied).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < n + 1:
        raise ValueError(f"need at least {n + 1} samples for {n} bins, got {x.size}")
    edges = np.quantile(x, np.linspace(0.0, 1.0, n + 1))
    if symmetric:
        edges = _symmetrize(edges, center)
    if np.any(np.diff(edges) <= 0):
        raise DegenerateBins(f"coincident bin edges for {parameter!r}")

    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n - 1)
    centers = np.empty(n)
    for b in range(n):
        members = x[idx == b]
        centers[b] = np.median(members) if members.size else 0.5 * (edges[b] + edges[b + 1])
    return BinSpec(parameter, edges, centers)


def assign_bin(spec, value):
    """Bin index for a value: half-open [e_i, e_i+1), last bin closed, values
    outside the range clamp to the first/last bin.  Vectorizes over arrays."""
    idx = np.searchsorted(spec.edges, np.asarray(value, dtype=float), side="right") - 1
    idx = np.clip(idx, 0, spec.n - 1)
    return idx if idx.ndim else int(idx)


def build_horizon_label_space(thetas, rhos, n=100):
    """(theta, rho) BinSpecs from training lines; theta symmetric about pi/2."""
    theta_bins = build_bins(thetas, n, symmetric=True, center=THETA_CENTER, parameter="theta")
    rho_bins = build_bins(rhos, n, parameter="rho")
    return theta_bins, rho_bins


class HorizonDistribution:
    """Discrete probability grid over (theta-bin, rho-bin) for one subwindow.

    grid[i, j] is the probability of theta bin i and rho bin j; entries are
    non-negative and sum to 1 within 1e-9.  ``point`` is the decoded point
    estimate as a HorizonLine in the subwindow's centered coordinates.
    """

    __slots__ = ("grid", "theta_bins", "rho_bins", "point", "window")

    def __init__(self, grid, theta_bins, rho_bins, point=None, window=None):
        grid = np.array(grid, dtype=float)
        if grid.shape != (theta_bins.n, rho_bins.n):
            raise ValueError(f"grid shape {grid.shape} does not match bin counts "
                             f"({theta_bins.n}, {rho_bins.n})")
        if np.any(grid < 0) or not np.all(np.isfinite(grid)):
            raise ValueError("grid entries must be finite and non-negative")
        if abs(grid.sum() - 1.0) > 1e-9:
            raise ValueError(f"grid must sum to 1 within 1e-9, got {grid.sum()!r}")
        grid.setflags(write=False)
        self.grid = grid
        self.theta_bins = theta_bins
        self.rho_bins = rho_bins
        self.point = point if point is not None else decode_argmax(self)
        self.window = window

    def with_window(self, window):
        return HorizonDistribution(self.grid, self.theta_bins, self.rho_bins,
                                   point=self.point, window=window)

    @property
    def max_probability(self):
        return float(self.grid.max())


def decode_argmax(dist, aspect=1.0):
    """Point estimate at the center of the argmax cell (ties: lowest flat index)."""
    i, j = np.unravel_index(int(np.argmax(dist.grid)), dist.grid.shape)
    return HorizonLine.from_theta_rho(dist.theta_bins.centers[i], dist.rho_bins.centers[j], aspect)


def decode_expectation(dist, aspect=1.0):
    """Point estimate at the per-parameter expected bin-center values."""
    p_theta = dist.grid.sum(axis=1)
    p_rho = dist.grid.sum(axis=0)
    theta = float(p_theta @ dist.theta_bins.centers)
    rho = float(p_rho @ dist.rho_bins.centers)
    return HorizonLine.from_theta_rho(theta, rho, aspect)


def _softmax(z):
    z = np.asarray(z, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def bins_to_distribution(theta_bins, rho_bins, logits, aspect=1.0, window=None):
    """Softmax-normalize an N x N logit grid into a HorizonDistribution."""
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    grid = _softmax(logits.ravel()).reshape(logits.shape)
    dist = HorizonDistribution(grid, theta_bins, rho_bins, window=window)
    dist.point = decode_argmax(dist, aspect)
    return dist


def marginals_to_distribution(theta_bins, rho_bins, theta_logits, rho_logits,
                              aspect=1.0, window=None):
    """Joint grid as the outer product of two per-parameter softmax outputs."""
    grid = np.outer(_softmax(theta_logits), _softmax(rho_logits))
    grid = grid / grid.sum()
    dist = HorizonDistribution(grid, theta_bins, rho_bins, window=window)
    dist.point = decode_argmax(dist, aspect)
    return dist
