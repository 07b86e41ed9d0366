"""Time-dependent Hermitian entry fields.

Three entry-process kinds over tau in [-1, 1], all with stationary pair
covariance e^{-|dtau|}:

  gaussian-ou            H = (X+X^T)/sqrt(2)  (beta=1)  or
                         H = (X+X^T+iY-iY^T)/2  (beta=2),
                         X, Y independent matrices of standard
                         Ornstein-Uhlenbeck entries
  resampled-gaussian     same symmetrizations, entries redrawn at the
                         events of independent rate-1 Poisson clocks
  resampled-unimodular   off-diagonal entries of modulus one (signs for
                         beta=1, uniform phases for beta=2), zero
                         diagonal, same Poisson resampling

Entry values are pure functions of (seed, trial, i, j, tau): the
Ornstein-Uhlenbeck field is sampled on the dyadic tree over [-1, 1] by
conditional bridging (every float tau is dyadic, so the descent
terminates), and the Poisson clocks draw their inter-event gaps from
fixed counter positions.  Queries at different times or corner sizes
therefore see one consistent realization.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .rng import philox4x64, uniform_from_bits, normal_from_bits, derive_key

KINDS = ("gaussian-ou", "resampled-gaussian", "resampled-unimodular")

_SQRT2 = math.sqrt(2.0)
# Poisson clock: 24 exp(1) gaps cover [-1, 1] except with probability
# ~4e-18 (Poisson(2) mass at >= 24 events); the clock freezes there.
_GAP_BLOCKS = 6
_VALUE_BLOCK0 = 8
# tau this close to 0 is snapped to 0 so the dyadic descent stays shallow
_SNAP = 2.0**-48


@dataclass(frozen=True)
class EntryProcessSpec:
    kind: str
    beta: int
    zero_diagonal: bool = None
    resample_intensity: float = 1.0
    subgaussian_c0: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.beta not in (1, 2):
            raise ValueError(f"beta must be 1 or 2, got {self.beta!r}")
        if self.zero_diagonal is None:
            object.__setattr__(self, "zero_diagonal", self.kind == "resampled-unimodular")
        if self.kind == "resampled-unimodular" and not self.zero_diagonal:
            raise ValueError("resampled-unimodular requires zero_diagonal")
        if self.kind != "gaussian-ou" and self.resample_intensity != 1.0:
            raise ValueError("resample_intensity is fixed at 1")
        if self.subgaussian_c0 <= 0:
            raise ValueError("subgaussian_c0 must be positive")

    def to_json(self, seed=0):
        return json.dumps(
            {"kind": self.kind, "beta": self.beta,
             "zero_diagonal": self.zero_diagonal, "seed": seed}
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        spec = cls(kind=obj["kind"], beta=int(obj["beta"]),
                   zero_diagonal=obj.get("zero_diagonal"))
        return spec, int(obj.get("seed", 0))


@dataclass(frozen=True)
class MatrixPath:
    """An immutable realization handle: spec + seed.

    All evaluators are pure in (seed, trial, i, j, tau) and safe to use
    from concurrent workers.
    """
    spec: EntryProcessSpec
    seed: int


def _check_tau(tau):
    tau = float(tau)
    if not (-1.0 <= tau <= 1.0) or not math.isfinite(tau):
        raise ValueError(f"tau must lie in [-1, 1], got {tau}")
    if abs(tau) < _SNAP:
        tau = 0.0
    return tau


def _pf(c0, c1, c2, c3, keys):
    """Philox lanes for broadcastable counter words against (..., 2) keys."""
    words = np.broadcast_arrays(
        np.asarray(c0, dtype=np.uint64), np.asarray(c1, dtype=np.uint64),
        np.asarray(c2, dtype=np.uint64), np.asarray(c3, dtype=np.uint64))
    return philox4x64(np.stack(words, axis=-1), keys)


def _bridge_coeffs(a, m, b):
    """Conditional mean weights and stddev of OU at m given values at a < m < b.

    Written in terms of 1 - e^{-2h} via expm1: the descent visits
    brackets as narrow as one ulp of tau, where e^{-h} itself rounds
    to 1 and the naive quotients degenerate to 0/0.
    """
    e1 = -math.expm1(-2.0 * (m - a))
    e2 = -math.expm1(-2.0 * (b - m))
    denom = e1 + e2 - e1 * e2
    wa = math.exp(-(m - a)) * e2 / denom
    wb = math.exp(-(b - m)) * e1 / denom
    sd = math.sqrt(e1 * e2 / denom)
    return wa, wb, sd


def _node_bits(x):
    return np.float64(x).view(np.uint64)


def _ou_values(tau, entry_ids, keys):
    """OU node values at tau for each entry id: (..., 4) lanes.

    Lanes are four independent OU fields (X upper, X lower, Y upper,
    Y lower); callers slice what the symmetry class needs.
    """
    z = lambda node: normal_from_bits(_pf(entry_ids, 0, _node_bits(node), 0, keys))
    x_a = z(-1.0)
    if tau == -1.0:
        return x_a
    rho0 = math.exp(-2.0)
    x_b = rho0 * x_a + math.sqrt(1.0 - rho0 * rho0) * z(1.0)
    if tau == 1.0:
        return x_b
    a, b = -1.0, 1.0
    for _ in range(1100):
        m = a + (b - a) / 2
        wa, wb, sd = _bridge_coeffs(a, m, b)
        x_m = wa * x_a + wb * x_b + sd * z(m)
        if m == tau:
            return x_m
        if tau < m:
            b, x_b = m, x_m
        else:
            a, x_a = m, x_m
    raise AssertionError(f"dyadic descent did not terminate at tau={tau!r}")


def _segment_index(tau, eid_b, comp, key_b):
    """Number of Poisson-clock events in [-1, tau] per entry (clamped at 24).

    Blocks past the first are generated only for the rows whose clock has
    not yet passed tau (about 14% after one block at tau=1, per Poisson
    tail), so a snapshot costs roughly one gap block plus one value block.
    """
    budget = 1.0 + tau
    gaps = -np.log(uniform_from_bits(_pf(eid_b, 0, 0, comp, key_b)))
    partial = np.cumsum(gaps, axis=-1)
    count = (partial <= budget).sum(axis=-1)
    total = np.ascontiguousarray(partial[..., -1])
    active = total <= budget
    for block in range(1, _GAP_BLOCKS):
        if not active.any():
            break
        sub = -np.log(uniform_from_bits(_pf(eid_b[active], block, 0, comp, key_b[active])))
        partial = total[active][:, None] + np.cumsum(sub, axis=1)
        count[active] += (partial <= budget).sum(axis=1)
        tot = partial[:, -1]
        total[active] = tot
        active[active] = tot <= budget
    return count


def _resampled_values(tau, entry_ids, comps, keys, shape, value_map):
    """Piecewise-constant resampled field: one lane-0 draw per segment."""
    eid_b = np.broadcast_to(np.asarray(entry_ids, dtype=np.uint64), shape)
    key_b = np.broadcast_to(keys, shape + (2,))
    out = []
    for comp in comps:
        seg = _segment_index(tau, eid_b, comp, key_b)
        words = _pf(eid_b, _VALUE_BLOCK0 + seg, 0, comp, key_b)
        out.append(value_map(uniform_from_bits(words[..., 0])))
    return out


def _upper_entry_values(path, tau, iu, ju, keys, shape):
    """Values H(i,j) for 0-based upper-triangular index arrays i <= j."""
    spec = path.spec
    entry_ids = ju * (ju + 1) // 2 + iu
    diag = iu == ju
    if spec.kind == "gaussian-ou":
        lanes = _ou_values(tau, entry_ids, keys)
        if spec.beta == 1:
            vals = np.where(diag, _SQRT2 * lanes[..., 0],
                            (lanes[..., 0] + lanes[..., 1]) / _SQRT2)
        else:
            off = (lanes[..., 0] + lanes[..., 1]
                   + 1j * (lanes[..., 2] - lanes[..., 3])) / 2.0
            vals = np.where(diag, lanes[..., 0].astype(complex), off)
    elif spec.kind == "resampled-gaussian":
        comps = (0, 1) if spec.beta == 1 else (0, 1, 2, 3)
        v = _resampled_values(tau, entry_ids, comps, keys, shape, ndtri)
        if spec.beta == 1:
            vals = np.where(diag, _SQRT2 * v[0], (v[0] + v[1]) / _SQRT2)
        else:
            vals = np.where(diag, v[0].astype(complex),
                            (v[0] + v[1] + 1j * (v[2] - v[3])) / 2.0)
    else:
        if spec.beta == 1:
            value_map = lambda u: np.where(u < 0.5, 1.0, -1.0)
        else:
            value_map = lambda u: np.exp(2j * np.pi * u)
        vals = _resampled_values(tau, entry_ids, (0,), keys, shape, value_map)[0]
    if spec.zero_diagonal:
        vals = np.where(diag, 0.0 * vals, vals)
    return vals


def _trial_keys(path, trials):
    return derive_key(path.seed, np.asarray(trials, dtype=np.uint64))


def sample_entry_path(path, i, j, times, trial=0):
    """Values of entry (i, j) (1-based) along sorted times in [-1, 1]."""
    if i < 1 or j < 1:
        raise ValueError("indices are 1-based")
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted")
    conj = i > j
    iu, ju = (np.array([j - 1]), np.array([i - 1])) if conj else (np.array([i - 1]), np.array([j - 1]))
    key = derive_key(path.seed, trial)
    out = []
    for t in times:
        v = _upper_entry_values(path, _check_tau(t), iu, ju, key, (1,))[0]
        out.append(np.conj(v) if conj else v)
    if path.spec.beta == 1:
        return [float(np.real(v)) for v in out]
    return [complex(v) for v in out]


def snapshot_batch(path, tau, n, trials):
    """Stack of size-n snapshots at one tau, one per trial index."""
    tau = _check_tau(tau)
    if n < 1:
        raise ValueError("n must be >= 1")
    trials = np.atleast_1d(np.asarray(trials, dtype=np.uint64))
    keys = _trial_keys(path, trials)[:, None, :]
    iu, ju = np.triu_indices(n, 1 if path.spec.zero_diagonal else 0)
    vals = _upper_entry_values(path, tau, iu, ju, keys, (len(trials), len(iu)))
    dtype = np.float64 if path.spec.beta == 1 else np.complex128
    h = np.zeros((len(trials), n, n), dtype=dtype)
    h[:, iu, ju] = vals
    h[:, ju, iu] = np.conj(vals)
    return h


def hermitian_snapshot(path, tau, n, trial=0):
    """One size-n snapshot of the entry field at time tau."""
    return snapshot_batch(path, tau, n, [trial])[0]


def covariance_check(spec, dtau, trials, seed):
    """Empirical two-time covariances of one off-diagonal entry.

    Reports the conjugate pair covariance E Re[H(t1) conj(H(t2))] and the
    plain product E H(t1) H(t2) against their model values e^{-dtau} and
    (for beta=2 off-diagonal) 0, over independent trials.
    """
    dtau = float(dtau)
    if not 0.0 <= dtau <= 2.0:
        raise ValueError("dtau must lie in [0, 2]")
    if trials < 1000:
        raise ValueError("need at least 10^3 trials")
    t1, t2 = (0.0, dtau) if dtau <= 1.0 else (-dtau / 2, dtau / 2)
    path = MatrixPath(spec, seed)
    keys = _trial_keys(path, np.arange(trials))[:, None, :]
    iu = np.array([0])
    ju = np.array([1])
    shape = (trials, 1)
    v1 = _upper_entry_values(path, _check_tau(t1), iu, ju, keys, shape)[:, 0]
    v2 = _upper_entry_values(path, _check_tau(t2), iu, ju, keys, shape)[:, 0]
    pair = np.real(v1 * np.conj(v2))
    plain = np.real(v1 * v2)
    model_plain = math.exp(-dtau) if spec.beta == 1 else 0.0
    return {
        "empirical": float(pair.mean()),
        "model": math.exp(-dtau),
        "stderr": float(pair.std(ddof=1) / math.sqrt(trials)),
        "plain_empirical": float(plain.mean()),
        "plain_model": model_plain,
        "plain_stderr": float(plain.std(ddof=1) / math.sqrt(trials)),
    }
