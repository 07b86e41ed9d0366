"""Exact path-expansion oracle for mixed trace moments.

Moments of traces expand into sums over k-tuples of closed paths on the
complete graph with loops; independence across entries factorizes the
expectation over unordered edges.  This module enumerates the tuples
outright at small (N, m, k) and applies exact per-edge expectation
rules, so it serves as ground truth for the Monte Carlo estimators.

Per-edge rules (r traversals of one unordered edge):
  any kind          r odd in total -> 0 (entry sign symmetry)
  sign process      product over odd-count times = covariance of the
                    first consecutive pair times the next, ...
                    (no resample event inside each paired gap)
  phase process     run the Poisson-gap DP over net winding numbers;
                    a resample event kills any unbalanced run
  real Gaussian     Isserlis over the stationary covariance v e^{-|dt|}
  complex Gaussian  permanent over e^{-|t_i - t'_j|} of the +/- split
The resampled-Gaussian kind is not jointly Gaussian across times, so
beyond single-time moments and doubled cross-time edges it raises
OracleOutOfScope rather than guessing.
"""

import itertools
import math
from dataclasses import dataclass

ENUM_GUARD = 10**7


class OracleOutOfScope(ValueError):
    """The requested pattern has no exact rule; refuse, never approximate."""


@dataclass(frozen=True)
class MomentSpec:
    """Mixed-moment index: exponents m_p (or n_p), times tau_p, sizes N_p."""
    kind: str  # plain | modified
    exponents: tuple
    times: tuple
    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(int(m) for m in self.exponents))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        if self.kind not in ("plain", "modified"):
            raise ValueError(f"kind must be plain or modified, got {self.kind!r}")
        k = len(self.exponents)
        if k < 1 or len(self.times) != k or len(self.sizes) != k:
            raise ValueError("exponents, times, sizes must have equal length >= 1")
        if any(m < 1 for m in self.exponents):
            raise ValueError("exponents must be >= 1")
        if any(abs(t) > 1 for t in self.times):
            raise ValueError("times must lie in [-1, 1]")
        min_n = 3 if self.kind == "modified" else 1
        if any(n < min_n for n in self.sizes):
            raise ValueError(f"sizes must be >= {min_n} for kind {self.kind}")

    @property
    def k(self):
        return len(self.exponents)


@dataclass(frozen=True)
class PathTuple:
    paths: tuple  # k closed paths, each a tuple with last == first

    def __post_init__(self):
        for p in self.paths:
            if len(p) < 2 or p[0] != p[-1]:
                raise ValueError("paths must be closed (last vertex == first)")


@dataclass(frozen=True)
class EdgeMultiplicity:
    unordered: dict  # (a, b) with a <= b -> count
    oriented: dict   # (a, b) directed -> count


def enumerate_closed_paths(n_vertices, m):
    """All N^m closed paths u_0 .. u_m with u_m = u_0; loops allowed."""
    if n_vertices**m > ENUM_GUARD:
        raise ValueError(f"enumeration too large: {n_vertices}^{m} > {ENUM_GUARD}")
    for inner in itertools.product(range(1, n_vertices + 1), repeat=m):
        yield inner + (inner[0],)


def enumerate_nb_loopless(n_vertices, n):
    """Closed paths with u_i != u_{i+1}, and u_i != u_{i+2} for i <= n-2.

    u_n is pinned to u_0, so the non-backtracking constraint reaches
    through the endpoint (u_{n-2} != u_0) but not across the start:
    u_{n-1} = u_1 is allowed.  This is exactly the class produced by the
    recursion A_{n+1} = A_n H - (N-2) A_{n-1} behind the trace identity;
    the fully cyclic and the interior-only readings both disagree with
    spectral traces once n >= 5.
    """
    if (n_vertices - 1)**n > ENUM_GUARD:
        raise ValueError(f"enumeration too large: ({n_vertices}-1)^{n} > {ENUM_GUARD}")
    if n < 3:
        return
    verts = range(1, n_vertices + 1)

    def extend(seq):
        i = len(seq)
        if i == n:
            if seq[-1] != seq[0] and seq[-2] != seq[0]:
                yield seq + (seq[0],)
            return
        for v in verts:
            if v == seq[-1]:
                continue
            if i >= 2 and v == seq[-2]:
                continue
            yield from extend(seq + (v,))

    for start in verts:
        yield from extend((start,))


def edge_multiplicities(ptuple):
    unordered = {}
    oriented = {}
    for p in ptuple.paths:
        for a, b in zip(p, p[1:]):
            key = (a, b) if a <= b else (b, a)
            unordered[key] = unordered.get(key, 0) + 1
            oriented[(a, b)] = oriented.get((a, b), 0) + 1
    return EdgeMultiplicity(unordered, oriented)


def is_even_tuple(ptuple):
    return all(c % 2 == 0 for c in edge_multiplicities(ptuple).unordered.values())


def _double_factorial(r):
    out = 1
    for v in range(r - 1, 0, -2):
        out *= v
    return out


def _real_isserlis(cov):
    """Sum over perfect matchings of the product of pair covariances."""
    idx = list(range(len(cov)))

    def rec(rest):
        if not rest:
            return 1.0
        i, rest = rest[0], rest[1:]
        return sum(cov[i][rest[j]] * rec(rest[:j] + rest[j + 1:])
                   for j in range(len(rest)))

    return rec(tuple(idx))


def _permanent(mat):
    if not mat:
        return 1.0
    n = len(mat)
    return sum(math.prod(mat[i][p[i]] for i in range(n))
               for p in itertools.permutations(range(n)))


def _sign_process_moment(times):
    """E of a product of resampled +/-1 values, one factor per time."""
    odd = sorted(t for t, c in _time_counts(times).items() if c % 2)
    if len(odd) % 2:
        return 0.0
    return math.prod(math.exp(-(b - a)) for a, b in zip(odd[::2], odd[1::2]))


def _time_counts(times):
    counts = {}
    for t in times:
        counts[t] = counts.get(t, 0) + 1
    return counts


def _phase_process_moment(recs):
    """E prod e^{i theta(t) d_t} for the resampled uniform-phase process.

    Dynamic program over inter-time gaps: a run of times sharing one
    phase draw must have zero net winding; a resample event may only
    close a run whose accumulated sum is zero.
    """
    net = {}
    for t, s in recs:
        net[t] = net.get(t, 0) + s
    times = sorted(net)
    states = {net[times[0]]: 1.0}
    for t_prev, t_next in zip(times, times[1:]):
        p_none = math.exp(-(t_next - t_prev))
        d = net[t_next]
        new = {}
        for s, w in states.items():
            new[s + d] = new.get(s + d, 0.0) + w * p_none
            if s == 0:
                new[d] = new.get(d, 0.0) + w * (1.0 - p_none)
        states = new
    return states.get(0, 0.0)


def _real_gaussian_moment(model, times, variance):
    r = len(times)
    if r % 2:
        return 0.0
    counts = _time_counts(times)
    if len(counts) == 1:
        return variance ** (r // 2) * _double_factorial(r)
    if model.kind == "gaussian-ou":
        cov = [[variance * math.exp(-abs(a - b)) for b in times] for a in times]
        return _real_isserlis(cov)
    if r == 2:
        return variance * math.exp(-abs(times[0] - times[1]))
    raise OracleOutOfScope(
        "resampled-gaussian edge with multiplicity > 2 across distinct times")


def _complex_gaussian_moment(model, recs):
    plus = [t for t, s in recs if s > 0]
    minus = [t for t, s in recs if s < 0]
    if len(plus) != len(minus):
        return 0.0
    if len(_time_counts(plus + minus)) == 1:
        return float(math.factorial(len(plus)))
    if model.kind == "gaussian-ou":
        return _permanent([[math.exp(-abs(a - b)) for b in minus] for a in plus])
    if len(recs) == 2:
        return math.exp(-abs(plus[0] - minus[0]))
    raise OracleOutOfScope(
        "resampled-gaussian edge with multiplicity > 2 across distinct times")


def _edge_expectation(model, edge, recs):
    total = len(recs)
    if total % 2:
        return 0.0
    if edge[0] == edge[1]:
        if model.zero_diagonal:
            return 0.0
        variance = 2.0 if model.beta == 1 else 1.0
        return _real_gaussian_moment(model, [t for t, _ in recs], variance)
    if model.kind == "resampled-unimodular":
        if model.beta == 1:
            return _sign_process_moment([t for t, _ in recs])
        return _phase_process_moment(recs)
    if model.beta == 1:
        return _real_gaussian_moment(model, [t for t, _ in recs], 1.0)
    return _complex_gaussian_moment(model, recs)


def _tuple_expectation(paths, times, model):
    edges = {}
    for path, t in zip(paths, times):
        for a, b in zip(path, path[1:]):
            key = (a, b) if a <= b else (b, a)
            edges.setdefault(key, []).append((t, 1 if a <= b else -1))
    if any(len(recs) % 2 for recs in edges.values()):
        return 0.0
    value = 1.0
    for key, recs in edges.items():
        value *= _edge_expectation(model, key, recs)
        if value == 0.0:
            return 0.0
    return value


class _Accumulator:
    """Chunked fsum: exactly rounded partials, immune to 10^7-term drift."""

    def __init__(self):
        self.partials = []
        self.buffer = []

    def add(self, v):
        if v != 0.0:
            self.buffer.append(v)
            if len(self.buffer) >= 4096:
                self.partials.append(math.fsum(self.buffer))
                self.buffer = []

    def total(self):
        return math.fsum(self.partials + self.buffer)


def _canonical_paths(n_vertices, m, enumerator_kind):
    """First-occurrence-labeled closed paths plus their orbit sizes.

    Entry processes are exchangeable over vertex labels, so each
    canonical path stands for falling_factorial(N, labels) relabelings.
    """
    nb = enumerator_kind == "modified"

    def orbit(v_used):
        out = 1
        for i in range(v_used):
            out *= n_vertices - i
        return out

    def extend(seq, v_used):
        i = len(seq)
        if i == m:
            if nb and (seq[-1] == 1 or seq[-2] == 1):
                return
            yield seq + (1,), orbit(v_used)
            return
        hi = min(v_used + 1, n_vertices)
        for v in range(1, hi + 1):
            if nb:
                if v == seq[-1]:
                    continue
                if i >= 2 and v == seq[-2]:
                    continue
            yield from extend(seq + (v,), max(v_used, v))

    if nb and m < 3:
        return
    yield from extend((1,), 1)


def _path_iterable(spec, p, method):
    n, m = spec.sizes[p], spec.exponents[p]
    if spec.kind == "modified":
        if method == "canonical":
            return _canonical_paths(n, m, "modified")
        return ((path, 1) for path in enumerate_nb_loopless(n, m))
    if method == "canonical":
        return _canonical_paths(n, m, "plain")
    return ((path, 1) for path in enumerate_closed_paths(n, m))


def _prefactor(spec):
    if spec.kind == "modified":
        return math.prod((n - 2.0) ** (-m / 2.0)
                         for m, n in zip(spec.exponents, spec.sizes))
    return math.prod((2.0 * math.sqrt(n)) ** (-m)
                     for m, n in zip(spec.exponents, spec.sizes))


def _exact_sum(spec, model, method):
    sizes_bound = 1
    for m, n in zip(spec.exponents, spec.sizes):
        base = (n - 1) if spec.kind == "modified" else n
        sizes_bound *= base**m
    if sizes_bound > ENUM_GUARD:
        raise ValueError(f"enumeration too large: bound {sizes_bound} > {ENUM_GUARD}")
    if method == "auto":
        method = "canonical" if spec.k == 1 else "raw"
    if method == "canonical" and spec.k != 1:
        raise ValueError("canonical reduction implemented for k=1 only")
    acc = _Accumulator()
    if spec.k == 1:
        for path, mult in _path_iterable(spec, 0, method):
            acc.add(mult * _tuple_expectation((path,), spec.times, model))
    else:
        bounds = []
        for p in range(spec.k):
            base = (spec.sizes[p] - 1) if spec.kind == "modified" else spec.sizes[p]
            bounds.append(base ** spec.exponents[p])
        outer = max(range(spec.k), key=lambda p: bounds[p])
        others = [p for p in range(spec.k) if p != outer]
        tails = {p: [path for path, _ in _path_iterable(spec, p, method)]
                 for p in others}
        slots = [None] * spec.k
        for head, _ in _path_iterable(spec, outer, method):
            slots[outer] = head
            for combo in itertools.product(*(tails[p] for p in others)):
                for p, c in zip(others, combo):
                    slots[p] = c
                acc.add(_tuple_expectation(tuple(slots), spec.times, model))
    return acc.total() * _prefactor(spec)


def exact_mixed_moment(spec, model, method="auto"):
    """Exact E prod_p tr (H^{(N_p)}(tau_p) / (2 sqrt(N_p)))^{m_p}."""
    if spec.kind != "plain":
        raise ValueError("spec.kind must be 'plain'")
    return _exact_sum(spec, model, method)


def exact_modified_moment(spec, model, method="auto"):
    """Exact E prod_p tr P_{n_p}^{(N_p)} via the non-backtracking expansion.

    The path identity for tr P_n holds only for unimodular matrices, so
    other models are out of scope here.
    """
    if spec.kind != "modified":
        raise ValueError("spec.kind must be 'modified'")
    if model.kind != "resampled-unimodular":
        raise OracleOutOfScope(
            "the non-backtracking expansion of tr P_n requires unimodular entries")
    return _exact_sum(spec, model, method)
