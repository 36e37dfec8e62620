"""Combine per-subwindow horizon estimates into a full-image horizon.

Two strategies: confidence-weighted averaging of the transferred point
estimates in image space, and minimizing the joint negative log-likelihood

    E(theta, rho) = -(1/N) sum_i log W_i(theta, rho)

where W_i maps a candidate full-image horizon into subwindow i's centered
coordinates and reads its probability from the grid by clamped bilinear
interpolation over bin centers (floored at 1e-12 before the log).  The NLL
is minimized by a deterministic coarse sweep over the subwindows' bin
centers transferred to full-image coordinates, followed by a pattern search
confined to one coarse cell.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDistribution, VerticalHorizon
from .geometry import HorizonLine, Window, full_window, transfer_line, window_affine

PROB_FLOOR = 1e-12
CROP_GRID_FRACTION = 0.99
MAX_COARSE_CANDIDATES = 200
MAX_REFINE_EVALS = 200


@dataclass(frozen=True, eq=False)
class SubwindowSet:
    """Per-crop horizon distributions over one full image frame."""

    frame: object  # ImageFrame
    items: tuple   # ((Window, HorizonDistribution), ...)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("need at least one subwindow")
        for win, _ in items:
            if (win.x0 < -1e-9 or win.y0 < -1e-9
                    or win.x0 + win.width > self.frame.width + 1e-9
                    or win.y0 + win.height > self.frame.height + 1e-9):
                raise ValueError(f"crop {win} falls outside the {self.frame.width}"
                                 f"x{self.frame.height} image")
        object.__setattr__(self, "items", items)


def make_crop_grid(frame, grid_fraction=CROP_GRID_FRACTION):
    """Ten deterministic square crops: the maximal center crop plus a 3x3
    grid of crops at ``grid_fraction`` of the minimum dimension, with corner
    crops flush to the image corners and middle crops centered."""
    w, h = frame.width, frame.height
    m = min(w, h)
    if m < 100:
        raise ValueError(f"crop grid needs min dimension >= 100 px, got {m}")
    crops = [Window((w - m) // 2, (h - m) // 2, m, m)]
    s = int(round(grid_fraction * m))
    xs = [0, (w - s) // 2, w - s]
    ys = [0, (h - s) // 2, h - s]
    crops += [Window(x, y, s, s) for y in ys for x in xs]
    return crops


def transfer_horizon(line, src, dst):
    """Alias of `geometry.transfer_line`: exact affine line transfer between
    two axis-aligned windows of the same image."""
    return transfer_line(line, src, dst)


def aggregate_average(subwindows):
    """Confidence-weighted average of the transferred point estimates.

    Each subwindow's point estimate moves to full-image coordinates and its
    (l, r) border intercepts are averaged with weight = the distribution's
    maximum cell probability.  Vertical estimates are dropped with a warning;
    VerticalHorizon is raised only if every estimate drops.
    """
    full = full_window(subwindows.frame)
    weights, lefts, rights = [], [], []
    for win, dist in subwindows.items:
        line = transfer_line(dist.point, win, full)
        try:
            left, right = line.lr
        except VerticalHorizon:
            warnings.warn(f"dropping vertical subwindow estimate from {win}")
            continue
        weights.append(dist.max_probability)
        lefts.append(left)
        rights.append(right)
    if not weights:
        raise VerticalHorizon("every subwindow estimate was vertical")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return HorizonLine.from_lr(float(w @ np.asarray(lefts)),
                               float(w @ np.asarray(rights)),
                               subwindows.frame.aspect)


def _interp_prob(dist, thetas, rhos):
    """Clamped bilinear interpolation of the probability grid over bin
    centers, vectorized over candidate (theta, rho) arrays."""
    def locate(centers, q):
        q = np.clip(q, centers[0], centers[-1])
        if centers.size == 1:
            return np.zeros_like(q, dtype=int), np.zeros_like(q)
        i = np.clip(np.searchsorted(centers, q, side="right") - 1, 0, centers.size - 2)
        f = (q - centers[i]) / (centers[i + 1] - centers[i])
        return i, f

    grid = dist.grid
    tc = dist.theta_bins.centers
    rc = dist.rho_bins.centers
    i, ft = locate(tc, np.asarray(thetas, dtype=float))
    j, fr = locate(rc, np.asarray(rhos, dtype=float))
    i1 = np.minimum(i + 1, tc.size - 1)
    j1 = np.minimum(j + 1, rc.size - 1)
    return (grid[i, j] * (1 - ft) * (1 - fr) + grid[i1, j] * ft * (1 - fr)
            + grid[i, j1] * (1 - ft) * fr + grid[i1, j1] * ft * fr)


def nll_objective(subwindows, theta, rho, floor=PROB_FLOOR):
    """Joint negative log-likelihood of a full-image candidate horizon."""
    full = full_window(subwindows.frame)
    total = 0.0
    for win, dist in subwindows.items:
        k, dx, dy = window_affine(full, win)
        rho_sub = k * rho + dx * math.cos(theta) + dy * math.sin(theta)
        p = _interp_prob(dist, np.asarray(theta), np.asarray(rho_sub))
        total += math.log(max(float(p), floor))
    return -total / len(subwindows.items)


def _objective_over_rhos(subs, theta, rhos, floor):
    """Vectorized NLL over an array of candidate full-image rho values."""
    acc = np.zeros_like(rhos)
    for (k, dx, dy), dist in subs:
        rho_sub = k * rhos + dx * math.cos(theta) + dy * math.sin(theta)
        p = _interp_prob(dist, np.full_like(rhos, theta), rho_sub)
        acc += np.log(np.maximum(p, floor))
    return -acc / len(subs)


def _subsample(values, limit):
    values = np.unique(values)
    if values.size <= limit:
        return values
    idx = np.unique(np.round(np.linspace(0, values.size - 1, limit)).astype(int))
    return values[idx]


def aggregate_nll(subwindows, *, max_candidates=MAX_COARSE_CANDIDATES,
                  refine_evals=MAX_REFINE_EVALS, floor=PROB_FLOOR):
    """Full-image horizon minimizing the joint subwindow NLL.

    Candidates are the cross product of the transferred bin centers
    (subsampled to ``max_candidates`` per axis) plus every subwindow's own
    transferred argmax; the best candidate is refined by a pattern search
    that stays within one coarse cell.  Raises DegenerateDistribution when
    all candidates sit at the probability floor in every subwindow.
    """
    full = full_window(subwindows.frame)
    subs = [(window_affine(full, win), dist) for win, dist in subwindows.items]

    thetas = _subsample(np.concatenate([d.theta_bins.centers for _, d in subs]),
                        max_candidates)
    theta_step = float(np.median(np.diff(thetas))) if thetas.size > 1 else 1e-3

    best = (math.inf, 0.0, 0.0, 1e-3)
    for theta in thetas:
        pool = np.concatenate([
            (d.rho_bins.centers - dx * math.cos(theta) - dy * math.sin(theta)) / k
            for (k, dx, dy), d in subs])
        rhos = _subsample(pool, max_candidates)
        values = _objective_over_rhos(subs, theta, rhos, floor)
        a = int(np.argmin(values))
        rho_step = float(np.median(np.diff(rhos))) if rhos.size > 1 else 1e-3
        if values[a] < best[0]:
            best = (float(values[a]), float(theta), float(rhos[a]), rho_step)

    # each subwindow's transferred argmax must be among the candidates;
    # sorted so ties resolve independently of subwindow order
    argmax_candidates = set()
    for (k, dx, dy), dist in subs:
        i, j = np.unravel_index(int(np.argmax(dist.grid)), dist.grid.shape)
        theta = float(dist.theta_bins.centers[i])
        rho = (float(dist.rho_bins.centers[j])
               - dx * math.cos(theta) - dy * math.sin(theta)) / k
        argmax_candidates.add((theta, rho))
    for theta, rho in sorted(argmax_candidates):
        value = nll_objective(subwindows, theta, rho, floor)
        if value < best[0]:
            best = (value, theta, rho, best[3])

    floor_value = -math.log(floor)
    if best[0] >= floor_value - 1e-12:
        raise DegenerateDistribution("all candidates scored the probability floor "
                                     "in every subwindow")

    value, theta, rho, rho_step = best
    theta, rho, value = _pattern_search(
        subwindows, theta, rho, theta_step, rho_step,
        max_evals=refine_evals, floor=floor)
    return HorizonLine.from_theta_rho(theta, rho, subwindows.frame.aspect)


def _pattern_search(subwindows, theta0, rho0, dtheta, drho, max_evals, floor):
    """Derivative-free refinement clamped to one coarse cell around the seed."""
    theta, rho = theta0, rho0
    value = nll_objective(subwindows, theta, rho, floor)
    step_t, step_r = dtheta / 2.0, drho / 2.0
    evals = 0
    while evals < max_evals and (step_t > 1e-14 or step_r > 1e-14):
        moves = ((theta + step_t, rho), (theta - step_t, rho),
                 (theta, rho + step_r), (theta, rho - step_r))
        best_move = None
        for cand_t, cand_r in moves:
            cand_t = min(max(cand_t, theta0 - dtheta), theta0 + dtheta)
            cand_r = min(max(cand_r, rho0 - drho), rho0 + drho)
            cand_v = nll_objective(subwindows, cand_t, cand_r, floor)
            evals += 1
            if cand_v < value - 1e-15 and (best_move is None or cand_v < best_move[0]):
                best_move = (cand_v, cand_t, cand_r)
        if best_move is None:
            step_t /= 2.0
            step_r /= 2.0
        else:
            value, theta, rho = best_move
    return theta, rho, value
