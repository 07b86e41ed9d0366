"""Edge-scaling maps and rescaled line ensembles.

At the spectral edge the two slow coordinates are s (time) and t (corner
depth): tau(s) = s M^{-1/3}, N(t) = M(1 + 2 t M^{-1/3}).  The scaled
lines lambda_j(s, t) = M^{1/6}(xi_j - 2 sqrt(N)) live on a grid whose
t-nodes are the integer corner sizes; evaluation interpolates linearly
in t and extends as a constant outside the computed rectangle.  All
fractional powers of M go through cbrt so that perfect cubes stay exact.
"""

from dataclasses import dataclass

import numpy as np


def _m13(m):
    return float(np.cbrt(float(m)))


def scaling_maps(m, s, t):
    """(tau, N_real) for slow coordinates (s, t)."""
    if m < 8:
        raise ValueError("M must be at least 8")
    c = _m13(m)
    return s / c, m * (1.0 + 2.0 * t / c)


def corner_size_to_t(m, n):
    """Inverse of N(t) at integer corner sizes."""
    return (n - m) / (2.0 * _m13(m) ** 2)


def scale_spectrum(m, frame):
    """lambda_j = M^{1/6} (xi_j - 2 sqrt(N)), descending."""
    if m < 8:
        raise ValueError("M must be at least 8")
    return np.sqrt(_m13(m)) * (frame.eigenvalues - 2.0 * np.sqrt(frame.n))


@dataclass(frozen=True)
class ScaledLineEnsemble:
    m: int
    j_max: int
    s_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray  # (len(s_grid), len(t_grid), j_max)

    def __post_init__(self):
        if self.values.shape != (len(self.s_grid), len(self.t_grid), self.j_max):
            raise ValueError("values shape does not match grids")
        if np.any(np.diff(self.values, axis=-1) > 0):
            raise ValueError("lines out of order")


def build_line_ensemble(grid, m, j_max=10, mirrored=False):
    """Scaled line ensemble over a corner grid.

    grid n-values are the t-nodes, grid tau-values the s-nodes.  With
    mirrored=True the lines come from the negated spectra (the companion
    ensemble at the lower edge).
    """
    if m < 8:
        raise ValueError("M must be at least 8")
    if j_max < 1 or j_max > min(grid.n_values):
        raise ValueError(f"j_max must lie in [1, {min(grid.n_values)}]")
    c = _m13(m)
    s_grid = np.asarray(sorted(tau * c for tau in grid.tau_values))
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("duplicate tau values")
    taus = sorted(grid.tau_values)
    n_values = np.asarray(grid.n_values)
    t_grid = corner_size_to_t(m, n_values)
    # consecutive integer sizes must sit 1/(2 M^{2/3}) apart
    step = 1.0 / (2.0 * c * c)
    for a, b, dt in zip(n_values, n_values[1:], np.diff(t_grid)):
        if b - a == 1:
            assert abs(dt - step) <= 1e-12 * step
    values = np.empty((len(s_grid), len(t_grid), j_max))
    for i, tau in enumerate(taus):
        for l, n in enumerate(n_values):
            frame = grid.frames[(tau, int(n))]
            if mirrored:
                frame = frame.mirrored()
            values[i, l] = scale_spectrum(m, frame)[:j_max]
    return ScaledLineEnsemble(int(m), int(j_max), s_grid, t_grid, values)


def evaluate_line(ensemble, j, s, t):
    """Line j at (s, t): linear in t, nearest s-node, constant outside."""
    if not 1 <= j <= ensemble.j_max:
        raise ValueError(f"j must lie in [1, {ensemble.j_max}]")
    i = int(np.argmin(np.abs(ensemble.s_grid - s)))
    return float(np.interp(t, ensemble.t_grid, ensemble.values[i, :, j - 1]))


def ensemble_csv_rows(ensemble):
    """Rows M,s,t,j,lambda over all grid nodes and lines."""
    for i, s in enumerate(ensemble.s_grid):
        for l, t in enumerate(ensemble.t_grid):
            for j in range(ensemble.j_max):
                yield (ensemble.m, repr(float(s)), repr(float(t)), j + 1,
                       repr(float(ensemble.values[i, l, j])))
