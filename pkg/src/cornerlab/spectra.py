"""Corner spectra: eigenvalues of nested principal submatrices.

The size-n corner of a snapshot is its top-left n x n block; corners of
one snapshot share entries, so their spectra interlace.  Everything here
is eigenvalues-only (statistics downstream never need eigenvectors).
"""

from dataclasses import dataclass, field

import numpy as np

from .entries import snapshot_batch

HERMITIAN_ATOL = 1e-12
INTERLACE_RTOL = 1e-8


@dataclass(frozen=True)
class SpectrumFrame:
    tau: float
    n: int
    eigenvalues: np.ndarray  # descending

    def __post_init__(self):
        xs = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", xs)
        if xs.shape != (self.n,):
            raise ValueError(f"expected {self.n} eigenvalues, got shape {xs.shape}")
        if not np.isfinite(xs).all():
            raise ValueError("non-finite eigenvalue")
        if np.any(np.diff(xs) > 0):
            raise ValueError("eigenvalues must be non-increasing")

    def mirrored(self):
        """Spectrum of the negated matrix: exact negated, reversed list."""
        return SpectrumFrame(self.tau, self.n, -self.eigenvalues[::-1])


@dataclass(frozen=True)
class InterlacingReport:
    passed: bool
    worst_violation: float
    tolerance: float


@dataclass(frozen=True)
class CornerGrid:
    tau_values: tuple
    n_values: tuple
    frames: dict = field(repr=False)  # (tau, n) -> SpectrumFrame
    seed: int = 0

    def __post_init__(self):
        for tau in self.tau_values:
            for n in self.n_values:
                if (tau, n) not in self.frames:
                    raise ValueError(f"missing frame ({tau}, {n})")


def eigenvalues(h):
    """Descending spectrum of a Hermitian matrix (or stack of them)."""
    h = np.asarray(h)
    if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
        raise ValueError(f"not square: shape {h.shape}")
    asym = np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))))
    if asym > HERMITIAN_ATOL:
        raise ValueError(f"matrix is not Hermitian: max asymmetry {asym:.3e}")
    return np.linalg.eigvalsh(h)[..., ::-1]


def corner_spectra(path, tau, n_values, trial=0):
    """Spectra of the nested corners of one snapshot, one frame per size."""
    n_values = [int(n) for n in n_values]
    if any(b < a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be sorted ascending")
    h = snapshot_batch(path, tau, max(n_values), [trial])[0]
    return [SpectrumFrame(tau, n, eigenvalues(h[:n, :n])) for n in n_values]


def corner_grid(path, tau_values, n_values, trial=0):
    frames = {}
    for tau in tau_values:
        for frame in corner_spectra(path, tau, n_values, trial):
            frames[(tau, frame.n)] = frame
    return CornerGrid(tuple(tau_values), tuple(int(n) for n in n_values),
                      frames, path.seed)


def check_interlacing(lower, upper):
    """Cauchy interlacing of a size-n spectrum inside a size-(n+1) one."""
    if upper.n != lower.n + 1:
        raise ValueError(f"size mismatch: {lower.n} vs {upper.n} (need n and n+1)")
    if upper.tau != lower.tau:
        raise ValueError("frames are from different times")
    up, lo = upper.eigenvalues, lower.eigenvalues
    margins = np.minimum(up[:-1] - lo, lo - up[1:])
    worst = max(0.0, float(-margins.min()))
    scale = float(np.abs(up).max())
    tol = INTERLACE_RTOL * scale
    return InterlacingReport(worst <= tol, worst, tol)


def frame_csv_rows(frame):
    """Rows tau,n,j,xi with j ascending from 1 (descending eigenvalues)."""
    for j, xi in enumerate(frame.eigenvalues, start=1):
        yield (repr(float(frame.tau)), frame.n, j, repr(float(xi)))
