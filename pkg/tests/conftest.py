"""Shared fixtures and oracles for the horizonkit test suite."""

import math

import numpy as np
import pytest

from horizonkit.geometry import HorizonLine


def random_line(rng, max_tilt=0.4, aspect=1.0):
    """Random non-vertical horizon line with bounded slope and offset."""
    theta = math.pi / 2.0 + rng.uniform(-max_tilt, max_tilt)
    rho = rng.uniform(-0.45, 0.45)
    return HorizonLine.from_theta_rho(theta, rho, aspect)


def lines_close(a, b, tol=1e-9):
    """Coefficient-level closeness after canonical normalization."""
    return np.allclose(a.coeffs, b.coeffs, atol=tol) and (
        abs(a.aspect - b.aspect) < 1e-12)


def boundary_rows(image):
    """Sub-pixel 0.5-crossing row per column of a bright-above /
    dark-below image; NaN where no crossing is visible."""
    rows = np.full(image.shape[1], np.nan)
    for j in range(image.shape[1]):
        col = image[:, j]
        below = np.nonzero(col < 0.5)[0]
        if below.size == 0 or below[0] == 0:
            continue
        i = int(below[0])
        v0, v1 = col[i - 1], col[i]
        rows[j] = (i - 1) + (v0 - 0.5) / (v0 - v1) if v0 != v1 else i - 0.5
    return rows


def line_boundary_rows(line, size):
    """Row index (pixel-center convention) of a horizon line per column."""
    cols = np.arange(size)
    x = ((cols + 0.5) - size / 2.0) / size
    y = line.y_at(x)
    return size / 2.0 - y * size - 0.5


@pytest.fixture
def rng():
    return np.random.default_rng(20160901)
