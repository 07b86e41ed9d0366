"""Airy-function reference numerics: the Airy and extended Airy kernels,
Fredholm determinants, and Tracy-Widom distribution tables.

Two independent routes to the beta=2 distribution are kept deliberately
separate: a Nystrom Fredholm determinant of the Airy kernel, and the
Painleve-II representation through the Hastings-McLeod solution.  Their
agreement is a test, so neither may call the other.
"""

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_bvp
from scipy.special import airy as _scipy_airy

AIRY_MIN, AIRY_MAX = -15.0, 10.0
TW_LO, TW_HI = -10.0, 6.0
TW_STEP = 0.05
_V_LO, _V_HI = -21.0, 3.0  # u = x + e^v quadrature window
FREDHOLM_NODES = 320


class QuadratureNonConvergence(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class PainleveBlowup(RuntimeError):
    """The boundary-value solve did not converge over the full interval."""


def _ai(x):
    return _scipy_airy(x)[0]


def _aip(x):
    return _scipy_airy(x)[1]


def _check_airy_domain(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < AIRY_MIN) or np.any(arr > AIRY_MAX):
        raise ValueError(f"argument outside [{AIRY_MIN}, {AIRY_MAX}]")
    return arr


def airy_ai(x):
    return _ai(_check_airy_domain(x))


def airy_ai_prime(x):
    return _aip(_check_airy_domain(x))


def airy_kernel(lam1, lam2):
    """Equal-time Airy kernel via the stable closed forms."""
    if abs(lam1 - lam2) < 1e-7:
        mid = 0.5 * (lam1 + lam2)
        return _aip(mid) ** 2 - mid * _ai(mid) ** 2
    num = _ai(lam1) * _aip(lam2) - _aip(lam1) * _ai(lam2)
    return num / (lam1 - lam2)


def _airy_kernel_grid(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ai_a, aip_a = _scipy_airy(a)[:2]
    ai_b, aip_b = _scipy_airy(b)[:2]
    diff = a[:, None] - b[None, :]
    num = ai_a[:, None] * aip_b[None, :] - aip_a[:, None] * ai_b[None, :]
    near = np.abs(diff) < 1e-7
    out = np.where(near, 1.0, num) / np.where(near, 1.0, diff)
    if np.any(near):
        mids = 0.5 * (a[:, None] + b[None, :])
        ai_m, aip_m = _scipy_airy(mids)[:2]
        out = np.where(near, aip_m**2 - mids * ai_m**2, out)
    return out


def _bilateral_gaussian(d, a, b):
    # int_R e^{ud} Ai(a+u) Ai(b+u) du for d > 0
    return np.exp(d**3 / 12.0 - (a + b) * d / 2.0 - (a - b) ** 2 / (4.0 * d)) \
        / math.sqrt(4.0 * math.pi * d)


def _oscillation_cutoff(delta):
    # |u| beyond which |u|^{-1/4} envelopes times e^{-delta |u|} stay
    # below 1e-14
    u = 40.0
    for _ in range(60):
        u = (33.0 - 0.25 * math.log(u)) / delta
    return max(u, 8.0)


def _adaptive(f, lo, hi, limit):
    out = quad(f, lo, hi, epsabs=1e-12, epsrel=1e-11, limit=limit,
               full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 or abserr > 1e-9 * max(1.0, abs(value)):
        raise QuadratureNonConvergence(
            f"integral error estimate {abserr:.2e} over ({lo}, {hi})"
        )
    return value


def extended_airy_kernel(s1, lam1, s2, lam2, _quad_limit=400):
    """Two-branch extended kernel by adaptive quadrature.

    s1 >= s2 integrates e^{-u(s1-s2)} Ai(lam1+u) Ai(lam2+u) over (0, inf);
    s1 < s2 integrates the same over (-inf, 0) with a minus sign, done for
    small time gaps as the full-line Gaussian identity minus the (0, inf)
    part, and for gaps >= 0.5 by direct truncated quadrature.
    """
    if abs(s1 - s2) > 5.0:
        raise ValueError("time separation |s1 - s2| must be <= 5")
    _check_airy_domain([lam1, lam2])
    delta = s1 - s2

    def integrand(u):
        return math.exp(-u * delta) * _ai(lam1 + u) * _ai(lam2 + u)

    if delta >= 0.0:
        return _adaptive(integrand, 0.0, np.inf, _quad_limit)
    gap = -delta
    if gap < 0.5:
        # finite upper limit: e^{gap u} grows but Ai(lam+u)^2 wins long
        # before u = 35 anywhere on the admissible lambda range
        positive_part = _adaptive(integrand, 0.0, 35.0, _quad_limit)
        return positive_part - float(_bilateral_gaussian(gap, lam1, lam2))
    cutoff = _oscillation_cutoff(gap)
    return -_adaptive(integrand, -cutoff, 0.0, _quad_limit)


def _extended_kernel_grid(s1, a, s2, b):
    """extended_airy_kernel on the grid a x b, via fixed Gauss-Legendre
    panels sharing the branch logic of the scalar version."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    delta = s1 - s2
    if delta == 0.0:
        return _airy_kernel_grid(a, b)

    def weighted_sum(lo, hi, n, sign_exponent):
        v, w = np.polynomial.legendre.leggauss(n)
        u = 0.5 * (hi - lo) * (v + 1.0) + lo
        w = 0.5 * (hi - lo) * w * np.exp(sign_exponent * u)
        ai_a = _ai(a[:, None] + u[None, :])
        ai_b = _ai(b[:, None] + u[None, :])
        return (ai_a * w[None, :]) @ ai_b.T

    if delta > 0.0:
        return weighted_sum(0.0, 25.0, 220, -delta)
    gap = -delta
    if gap < 0.5:
        positive = weighted_sum(0.0, 25.0, 220, gap)
        return positive - _bilateral_gaussian(gap, a[:, None], b[None, :])
    cutoff = _oscillation_cutoff(gap)
    waves = (2.0 / (3.0 * math.pi)) * (cutoff + 16.0) ** 1.5
    n = int(200 + 8 * waves)
    return -weighted_sum(-cutoff, 0.0, n, gap)


@dataclass(frozen=True)
class KernelDiscretization:
    """Per-time quadrature of (x_p, inf) after u = x + e^v."""

    cutoffs: tuple
    nodes: np.ndarray
    weights: np.ndarray
    slices: tuple

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        for lo, hi in self.slices:
            if hi - lo < 20:
                raise ValueError("need at least 20 nodes per time point")

    @classmethod
    def build(cls, cutoffs, n_nodes):
        v, w = np.polynomial.legendre.leggauss(n_nodes)
        v = 0.5 * (_V_HI - _V_LO) * (v + 1.0) + _V_LO
        w = 0.5 * (_V_HI - _V_LO) * w
        nodes = []
        weights = []
        slices = []
        start = 0
        for x in cutoffs:
            nodes.append(x + np.exp(v))
            weights.append(w * np.exp(v))
            slices.append((start, start + n_nodes))
            start += n_nodes
        return cls(
            cutoffs=tuple(float(x) for x in cutoffs),
            nodes=np.concatenate(nodes),
            weights=np.concatenate(weights),
            slices=tuple(slices),
        )


def tw_cdf_fredholm(x, nodes=FREDHOLM_NODES):
    """F_2(x) = det(I - K_Airy on (x, inf)) by symmetrized Nystrom."""
    if not TW_LO <= x <= TW_HI:
        raise ValueError(f"x={x} outside [{TW_LO}, {TW_HI}]")
    disc = KernelDiscretization.build((x,), nodes)
    root_w = np.sqrt(disc.weights)
    kern = _airy_kernel_grid(disc.nodes, disc.nodes)
    mat = np.eye(nodes) - root_w[:, None] * kern * root_w[None, :]
    return float(np.linalg.det(mat))


# ---------------------------------------------------------------- Painleve

_HM_LEFT = -10.5
_HM_RIGHT = 9.0


def _hm_left_series(x):
    # Hastings-McLeod as x -> -inf: sqrt(-x/2)(1 + x^-3/8 - 73 x^-6/128 + ...)
    r = 1.0 / x**3
    return math.sqrt(-x / 2.0) * (
        1.0 + r / 8.0 - 73.0 * r**2 / 128.0 + 10657.0 * r**3 / 1024.0
    )


@lru_cache(maxsize=1)
def _hastings_mcleod():
    """Solve q'' = xq + 2q^3 with q ~ Ai on the right and the -inf series
    on the left, carrying the tail integrals as extra states:

        P = int_x^inf q^2,  J = int_x^inf (t - x) q^2,  L = int_x^inf q.

    Boundary values of P, J, L at the right end close in Ai, Ai'.
    """
    b = _HM_RIGHT
    ai_b, aip_b = _ai(b), _aip(b)
    p_b = aip_b**2 - b * ai_b**2
    j_b = (2.0 / 3.0) * (b**2 * ai_b**2 - b * aip_b**2) - ai_b * aip_b / 3.0
    # scipy's itairy is unusable between 4 and 9.5, so integrate the
    # Ai tail directly (smooth, tiny, converges at machine precision)
    l_b = quad(_ai, b, 40.0)[0]
    q_a = _hm_left_series(_HM_LEFT)

    def rhs(x, y):
        q, qp, p, j, l = y
        return np.vstack([qp, x * q + 2.0 * q**3, -q * q, -p, -q])

    def bc(ya, yb):
        return np.array([
            ya[0] - q_a,
            yb[0] - ai_b,
            yb[2] - p_b,
            yb[3] - j_b,
            yb[4] - l_b,
        ])

    x0 = np.linspace(_HM_LEFT, _HM_RIGHT, 600)
    q0 = np.where(x0 < -1.0, np.sqrt(np.maximum(-x0, 1.0) / 2.0), _ai(np.maximum(x0, -1.0)))
    qp0 = np.gradient(q0, x0)
    p0 = np.flip(np.concatenate([[0.0], np.cumsum(
        np.flip((q0**2)[:-1] + (q0**2)[1:]) * 0.5 * np.diff(x0)[0])]))
    j0 = np.flip(np.concatenate([[0.0], np.cumsum(
        np.flip(p0[:-1] + p0[1:]) * 0.5 * np.diff(x0)[0])]))
    l0 = np.flip(np.concatenate([[0.0], np.cumsum(
        np.flip(q0[:-1] + q0[1:]) * 0.5 * np.diff(x0)[0])]))
    sol = solve_bvp(rhs, bc, x0, np.vstack([q0, qp0, p0, j0, l0]),
                    tol=1e-10, max_nodes=200_000)
    if sol.status != 0:
        raise PainleveBlowup(
            f"boundary-value solve stopped before x={_HM_LEFT}: {sol.message}"
        )
    return sol.sol


def hastings_mcleod_q(x):
    """The Hastings-McLeod solution q(x) on [-10.5, 9]."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < _HM_LEFT) or np.any(arr > _HM_RIGHT):
        raise ValueError(f"argument outside [{_HM_LEFT}, {_HM_RIGHT}]")
    return _hastings_mcleod()(arr)[0]


# ------------------------------------------------------------------ tables

@dataclass(frozen=True)
class TWTable:
    beta: int
    xs: np.ndarray
    values: np.ndarray
    method: str

    def validate(self):
        problems = []
        if self.beta not in (1, 2):
            problems.append(f"beta={self.beta}")
        if self.method not in ("fredholm", "painleve"):
            problems.append(f"method={self.method!r}")
        if self.xs[0] > TW_LO + 1e-9 or self.xs[-1] < TW_HI - 1e-9:
            problems.append("grid does not cover [-10, 6]")
        if np.max(np.diff(self.xs)) > TW_STEP + 1e-12:
            problems.append("grid step exceeds 0.05")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            problems.append("values outside [0, 1]")
        if np.any(np.diff(self.values) < 0.0):
            problems.append("values not non-decreasing")
        # beta=1 has the heavier right tail: 1 - F_1(6) = 1.94e-6 exactly,
        # so its bound sits one decade looser
        tail = 1e-6 if self.beta == 2 else 1e-5
        if self.values[np.searchsorted(self.xs, 6.0 - 1e-12)] <= 1.0 - tail:
            problems.append(f"F(6) not above 1 - {tail}")
        if problems:
            raise ValueError("invalid table: " + "; ".join(problems))
        return self

    def evaluate(self, x):
        return np.interp(x, self.xs, self.values)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["beta", "x", "F"])
            for x, f in zip(self.xs, self.values):
                writer.writerow([self.beta, repr(float(x)), repr(float(f))])

    @classmethod
    def from_csv(cls, path, method="painleve"):
        tables = {}
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["beta", "x", "F"]:
                raise ValueError(f"unexpected header {header}")
            for beta_s, x_s, f_s in reader:
                tables.setdefault(int(beta_s), []).append((float(x_s), float(f_s)))
        out = []
        for beta, rows in sorted(tables.items()):
            rows.sort()
            xs = np.array([r[0] for r in rows])
            vals = np.array([r[1] for r in rows])
            out.append(cls(beta=beta, xs=xs, values=vals, method=method).validate())
        return out


def reference_tables():
    """The shipped Tracy-Widom reference tables, one per beta."""
    from importlib import resources

    source = resources.files("cornerlab.data") / "tw_reference.csv"
    with resources.as_file(source) as path:
        tables = TWTable.from_csv(path)
    return {table.beta: table for table in tables}


def write_tables(path, tables):
    """Serialize several TWTables (e.g. both betas) into one beta,x,F file."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta", "x", "F"])
        for table in sorted(tables, key=lambda t: t.beta):
            for x, f in zip(table.xs, table.values):
                writer.writerow([table.beta, repr(float(x)), repr(float(f))])


def _default_grid():
    n = int(round((TW_HI - TW_LO) / TW_STEP))
    return np.linspace(TW_LO, TW_HI, n + 1)


def _snap_table(beta, xs, values, method):
    # the deep left tail of the Fredholm determinant sits at the roundoff
    # floor; snap sub-1e-10 violations and refuse anything larger
    vals = np.asarray(values, dtype=float)
    clipped = np.clip(vals, 0.0, 1.0)
    monotone = np.maximum.accumulate(clipped)
    if np.max(np.abs(monotone - vals)) > 1e-10:
        raise ValueError("table violates invariants beyond roundoff")
    return TWTable(beta=beta, xs=np.asarray(xs, dtype=float),
                   values=monotone, method=method).validate()


def tw_cdf_painleve(beta, x_grid=None):
    """Tracy-Widom table through the Painleve-II representation:
    F_2 = exp(-J), F_1 = exp(-(J + L)/2) with the tail integrals J, L
    carried by the Hastings-McLeod solve."""
    if beta not in (1, 2):
        raise ValueError(f"beta must be 1 or 2, got {beta}")
    xs = _default_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    states = _hastings_mcleod()(xs)
    j, l = states[3], states[4]
    values = np.exp(-j) if beta == 2 else np.exp(-0.5 * (j + l))
    return _snap_table(beta, xs, values, "painleve")


def tw_table(beta, method="painleve", x_grid=None, nodes=FREDHOLM_NODES):
    """Generate a TWTable by either route; fredholm exists only for beta=2."""
    if method == "painleve":
        return tw_cdf_painleve(beta, x_grid)
    if method == "fredholm":
        if beta != 2:
            raise ValueError("the Fredholm route computes beta=2 only")
        xs = _default_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
        values = np.array([tw_cdf_fredholm(x, nodes=nodes) for x in xs])
        return _snap_table(2, xs, values, "fredholm")
    raise ValueError(f"unknown method {method!r}")


def joint_gap_probability(ss, xs, nodes=110):
    """P(no point above x1 at time s1 and none above x2 at time s2) for
    the beta=2 two-time process: block-Nystrom determinant of the
    extended kernel.  Coincident times reduce to one slice at min(x)."""
    s1, s2 = float(ss[0]), float(ss[1])
    x1, x2 = float(xs[0]), float(xs[1])
    if abs(s1 - s2) > 2.0:
        raise ValueError("time separation |s1 - s2| must be <= 2")
    for x in (x1, x2):
        if not TW_LO <= x <= TW_HI:
            raise ValueError(f"cutoff {x} outside [{TW_LO}, {TW_HI}]")
    if s1 == s2:
        return tw_cdf_fredholm(min(x1, x2), nodes=max(nodes, FREDHOLM_NODES))

    def determinant(n):
        disc = KernelDiscretization.build((x1, x2), n)
        root_w = np.sqrt(disc.weights)
        total = len(disc.nodes)
        kern = np.empty((total, total))
        times = (s1, s2)
        for p, (plo, phi) in enumerate(disc.slices):
            for q, (qlo, qhi) in enumerate(disc.slices):
                kern[plo:phi, qlo:qhi] = _extended_kernel_grid(
                    times[p], disc.nodes[plo:phi], times[q], disc.nodes[qlo:qhi]
                )
        mat = np.eye(total) - root_w[:, None] * kern * root_w[None, :]
        return float(np.linalg.det(mat))

    fine = determinant(nodes)
    coarse = determinant(max(20, nodes // 2))
    if abs(fine - coarse) > 1e-5:
        raise QuadratureNonConvergence(
            f"block determinant moved by {abs(fine - coarse):.2e} "
            f"between {max(20, nodes // 2)} and {nodes} nodes per block"
        )
    return fine
