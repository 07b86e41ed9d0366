"""Chebyshev-transformed traces and moment estimators.

P_n^{(N)}(x) = U_n(x / (2 sqrt(N-2))) - U_{n-2}(...) / (N-2) is the
polynomial whose trace equals a sum over non-backtracking loopless
closed paths; this module provides both evaluations (spectral and path
sum), the exact expansion of powers in the P basis, and Monte Carlo
estimators for mixed trace moments with the path oracle as ground
truth.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .entries import MatrixPath, snapshot_batch
from .pathsum import ENUM_GUARD, MomentSpec, enumerate_nb_loopless  # noqa: F401
from .scaling import scale_spectrum
from .spectra import SpectrumFrame, eigenvalues

PATH_TRACE_ATOL = 1e-12
TAIL_GUARD = 1e-12


def chebyshev_U(n, x):
    """U_n evaluated elementwise, with U_{-2} = U_{-1} = 0."""
    if n < -2:
        raise ValueError(f"n must be >= -2, got {n}")
    x = np.asarray(x, dtype=float)
    if n < 0:
        return np.zeros_like(x)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for _ in range(n):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur


def P_eval(n, n_size, lam):
    """P_n^{(N)} at lam; N >= 3."""
    if n_size < 3:
        raise ValueError(f"N must be >= 3, got {n_size}")
    x = np.asarray(lam, dtype=float) / (2.0 * math.sqrt(n_size - 2))
    return chebyshev_U(n, x) - chebyshev_U(n - 2, x) / (n_size - 2)


def trace_P_spectral(h, n):
    """Sum of P_n over the spectrum of h."""
    lam = eigenvalues(h)
    return float(np.sum(P_eval(n, h.shape[0], lam)))


def trace_P_paths(h, n):
    """tr P_n as the weighted non-backtracking loopless path sum.

    Valid only for zero-diagonal unit-modulus Hermitian matrices; for
    complex inputs the imaginary part of the sum must cancel and the
    real part is returned.
    """
    h = np.asarray(h)
    n_size = h.shape[0]
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if n_size < 3:
        raise ValueError(f"N must be >= 3, got {n_size}")
    if np.max(np.abs(np.diagonal(h))) > PATH_TRACE_ATOL:
        raise ValueError("matrix must have zero diagonal")
    off = ~np.eye(n_size, dtype=bool)
    if np.max(np.abs(np.abs(h[off]) - 1.0)) > PATH_TRACE_ATOL:
        raise ValueError("off-diagonal entries must be unimodular")
    if np.max(np.abs(h - h.conj().T)) > PATH_TRACE_ATOL:
        raise ValueError("matrix must be Hermitian")
    if n == 0:
        return float(n_size)
    reals, imags = [], []
    for p in enumerate_nb_loopless(n_size, n):
        prod = 1.0 + 0.0j
        for a, b in zip(p, p[1:]):
            prod *= h[a - 1, b - 1]
        reals.append(prod.real)
        imags.append(prod.imag)
    scale = (n_size - 2.0) ** (-n / 2.0)
    imag = scale * math.fsum(imags)
    if abs(imag) > 1e-9:
        raise ValueError(f"path sum has non-cancelling imaginary part {imag}")
    return scale * math.fsum(reals)


@dataclass(frozen=True)
class PBasisExpansion:
    """lambda^m = sum_p K_p (N-2)^{p/2} P_p^{(N)}, with integer K_p.

    The coefficients dict maps degree p to the exact integer K_p; the
    half-integer powers of (N-2) never need to be formed because
    evaluation runs the scaled recursion V_{p+1} = lam V_p - (N-2)
    V_{p-1}, under which the p-th term is K_p (V_p - V_{p-2}).
    """
    m: int
    n_size: int
    coefficients: dict

    def gamma(self, p):
        """Float coefficient of P_p (for inspection; evaluation is exact)."""
        k = self.coefficients.get(p, 0)
        return float(k) * (self.n_size - 2.0) ** (p / 2.0)

    def evaluate(self, lam):
        """Reconstruct lam^m, exactly in rational arithmetic.

        Floats are exact binary rationals, so the only rounding is the
        final conversion; a pure float recursion loses ~15 digits to
        cancellation already at m = 30, N = 100.
        """
        lam = Fraction(lam)
        q = self.n_size - 2
        total = Fraction(0)
        v_prevprev = Fraction(0)  # V_{p-2}
        v_prev = Fraction(0)
        v_cur = Fraction(1)  # V_0
        for p in range(self.m + 1):
            if p == 1:
                v_prevprev, v_prev, v_cur = v_prev, v_cur, lam
            elif p >= 2:
                v_prevprev, v_prev, v_cur = v_prev, v_cur, lam * v_cur - q * v_prev
            k = self.coefficients.get(p)
            if k:
                total += k * (v_cur - v_prevprev)
        return float(total)


def power_in_P_basis(m, n_size):
    """Expand lambda^m over {P_p^{(N)}}: Chebyshev power formula, then
    the geometric telescoping U_n = sum_r (N-2)^{-r} P_{n-2r}."""
    if not 0 <= m <= 200:
        raise ValueError(f"m must be in [0, 200], got {m}")
    if n_size < 3:
        raise ValueError(f"N must be >= 3, got {n_size}")
    q = n_size - 2
    # x^m = 2^{-m} sum_j [C(m,j) - C(m,j-1)] U_{m-2j}
    c = [math.comb(m, j) - (math.comb(m, j - 1) if j >= 1 else 0)
         for j in range(m // 2 + 1)]
    coefficients = {}
    for p in range(m % 2, m + 1, 2):
        j_max = (m - p) // 2
        k = sum(c[j] * q**j for j in range(j_max + 1))
        coefficients[p] = k
    return PBasisExpansion(m=m, n_size=n_size, coefficients=coefficients)


def _plain_factor(lam, m, n_size):
    return np.sum((lam / (2.0 * math.sqrt(n_size))) ** m, axis=-1)


def _modified_factor(lam, n, n_size):
    return np.sum(P_eval(n, n_size, lam), axis=-1)


def mc_mixed_moments(spec, model, trials, seed, m_ambient=None):
    """Monte Carlo estimate of the mixed moment named by spec.

    m_ambient is accepted for interface symmetry with the experiment
    drivers; corners are nested, so the ambient size never changes the
    law of the corner snapshots and only a lower-bound check is done.
    """
    trials = int(trials)
    if trials < 100:
        raise ValueError(f"trials must be >= 100, got {trials}")
    if m_ambient is not None and m_ambient < max(spec.sizes):
        raise ValueError("ambient size smaller than a requested corner")
    path = MatrixPath(model, seed)
    values = np.ones(trials)
    chunk = 2048
    for start in range(0, trials, chunk):
        idx = range(start, min(start + chunk, trials))
        block = np.ones(len(idx))
        for m, tau, n_size in zip(spec.exponents, spec.times, spec.sizes):
            hs = snapshot_batch(path, tau, n_size, idx)
            lam = np.linalg.eigvalsh(hs)
            if spec.kind == "plain":
                block = block * _plain_factor(lam, m, n_size)
            else:
                block = block * _modified_factor(lam, m, n_size)
        values[start:start + len(block)] = block
    estimate = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(trials))
    return {"estimate": estimate, "stderr": stderr}


@dataclass(frozen=True)
class LaplaceStatistic:
    value: float
    tail_bounded: bool
    lines_used: int


def _scaled_lines(source, s, t, m_ambient):
    if isinstance(source, SpectrumFrame):
        if m_ambient is None:
            raise ValueError("a SpectrumFrame source needs m_ambient")
        return np.sort(scale_spectrum(m_ambient, source))[::-1]
    if hasattr(source, "evaluate_line"):
        vals = [source.evaluate_line(j, s, t) for j in range(1, source.j_max + 1)]
        return np.asarray(vals)
    return np.sort(np.asarray(source, dtype=float))[::-1]


def _exp_sum(lines, alpha):
    terms = np.exp(alpha * np.asarray(lines))
    total = math.fsum(terms)
    bounded = bool(terms[-1] < TAIL_GUARD * total)
    return total, bounded, len(terms)


def laplace_statistic(source, alpha, s=0.0, t=0.0, mirror_parity=None,
                      m_ambient=None, mirror_source=None):
    """sum_j exp(alpha lambda_j), optionally plus the mirrored term.

    source: scaled line values, a ScaledLineEnsemble (evaluated at
    (s, t)), or a SpectrumFrame with m_ambient.  With mirror_parity set,
    the mirrored lines come from frame.mirrored() or, for the other
    source types, from mirror_source.  tail_bounded reports whether the
    last included term is below 1e-12 of the sum, i.e. whether the
    truncation at the available lines is numerically converged.
    """
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    lines = _scaled_lines(source, s, t, m_ambient)
    if lines.size == 0:
        raise ValueError("no lines to sum over")
    value, bounded, used = _exp_sum(lines, alpha)
    if mirror_parity is not None:
        if isinstance(source, SpectrumFrame):
            mirror_lines = _scaled_lines(source.mirrored(), s, t, m_ambient)
        elif mirror_source is not None:
            mirror_lines = _scaled_lines(mirror_source, s, t, m_ambient)
        else:
            raise ValueError("mirror_parity needs a SpectrumFrame source "
                             "or an explicit mirror_source")
        mvalue, mbounded, mused = _exp_sum(mirror_lines, alpha)
        value += (-1) ** int(mirror_parity) * mvalue
        bounded = bounded and mbounded
        used += mused
    return LaplaceStatistic(value=value, tail_bounded=bounded, lines_used=used)


def edge_bulk_classify(xi, n_size, m_ambient, eps=0.01):
    """Place an eigenvalue into right-edge / left-edge / bulk / tail.

    Band half-widths are M^{-1/6+eps} at the edges and inside the bulk,
    N^{-1/6+eps} for the tail threshold; ties go to the edge categories.
    The sliver between the stated bulk/tail ranges and the edge bands
    (nonempty whenever N != M) falls to the nearer side of |xi| = 2
    sqrt(N).
    """
    xi = float(xi)
    edge = 2.0 * math.sqrt(n_size)
    band = m_ambient ** (-1.0 / 6.0 + eps)
    tail_gap = n_size ** (-1.0 / 6.0 + eps)
    if abs(xi - edge) <= band:
        return "right-edge"
    if abs(xi + edge) <= band:
        return "left-edge"
    if abs(xi) >= edge + tail_gap:
        return "tail"
    if abs(xi) <= edge - band:
        return "bulk"
    return "tail" if abs(xi) > edge else "bulk"
