"""Hand-specified path diagrams, their constraint polytopes, and the
edge-limit transforms built from polytope integrals.

A diagram with k marked paths is stored combinatorially: per edge, the
traversal counts c_p(e) for each path p, and the (sorted) pair of paths
p_minus(e) <= p_plus(e) that actually use the edge.  The polytope
Delta_D(alpha) collects the positive edge lengths satisfying

    sum_e c_p(e) * l(e) = alpha_p        for p = 1..k,

and the diagram integral is exp(-sum_e d_e * l(e)) integrated over that
polytope, with d_e the |dt| + |ds| separation of the two paths on e.
Lebesgue measure is taken in the chart of the non-pivot (free) edge
coordinates, pivots being the first linearly independent columns in edge
order.
"""

import itertools
import json
import math
import os
from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np
from scipy.linalg import expm
from scipy.spatial import Delaunay, QhullError

QUADRATURE_MAX_DIM = 6
MC_MAX_DIM = 12
MC_DEFAULT_BUDGET = 200_000
_MC_SHARD = 65_536
_VERTEX_TOL = 1e-9


class InfeasiblePolytope(ValueError):
    """No strictly positive solution to the length constraints."""


@dataclass(frozen=True)
class DiagramEdge:
    cp: tuple
    p_minus: int
    p_plus: int
    label: str = ""


@dataclass(frozen=True)
class DiagramSpec:
    name: str
    k: int
    s: int
    vertices: int
    orientable: bool
    edges: tuple


@dataclass(frozen=True)
class DiagramReport:
    passed: bool
    problems: tuple


def validate_diagram(d):
    """Check the combinatorial invariants; name each violation."""
    problems = []
    if d.k < 1:
        problems.append(f"path count k={d.k} must be >= 1")
    if d.s < d.k:
        problems.append(f"s={d.s} smaller than path count k={d.k}")
    if d.vertices != 2 * d.s:
        problems.append(f"vertex count {d.vertices} != 2s = {2 * d.s}")
    expected_edges = 3 * d.s - d.k
    if len(d.edges) != expected_edges:
        problems.append(
            f"edge count {len(d.edges)} != 3s - k = {expected_edges}"
        )
    for i, e in enumerate(d.edges):
        tag = e.label or str(i)
        if len(e.cp) != d.k:
            problems.append(f"edge {tag}: cp has {len(e.cp)} entries, expected k={d.k}")
            continue
        if sum(e.cp) != 2:
            problems.append(f"edge {tag}: cp sums to {sum(e.cp)}, expected 2")
        if not all(c in (0, 1, 2) for c in e.cp):
            problems.append(f"edge {tag}: cp values {e.cp} outside {{0,1,2}}")
            continue
        if not (1 <= e.p_minus <= e.p_plus <= d.k):
            problems.append(
                f"edge {tag}: path pair ({e.p_minus}, {e.p_plus}) out of order or range"
            )
            continue
        traversing = {e.p_minus, e.p_plus}
        for p in range(1, d.k + 1):
            if p not in traversing and e.cp[p - 1] != 0:
                problems.append(
                    f"edge {tag}: c_{p} = {e.cp[p - 1]} nonzero off the traversing pair"
                )
            if p in traversing and e.cp[p - 1] == 0:
                problems.append(f"edge {tag}: traversing path {p} has count 0")
    return DiagramReport(passed=not problems, problems=tuple(problems))


def _require_valid(d):
    report = validate_diagram(d)
    if not report.passed:
        raise ValueError(
            f"invalid diagram {d.name!r}: " + "; ".join(report.problems)
        )


def _diagram_from_dict(data):
    edges = tuple(
        DiagramEdge(
            cp=tuple(e["cp"]),
            p_minus=e["p_minus"],
            p_plus=e["p_plus"],
            label=e.get("label", ""),
        )
        for e in data["edges"]
    )
    return DiagramSpec(
        name=data.get("name", ""),
        k=data["k"],
        s=data["s"],
        vertices=data.get("vertices", 2 * data["s"]),
        orientable=data["orientable"],
        edges=edges,
    )


def builtin_diagrams():
    """Names of the diagram files shipped with the package."""
    root = resources.files("cornerlab").joinpath("data/diagrams")
    return tuple(sorted(p.name[: -len(".json")] for p in root.iterdir()
                        if p.name.endswith(".json")))


def load_diagram(source):
    """Load a diagram by builtin name or from a JSON file path."""
    root = resources.files("cornerlab").joinpath("data/diagrams")
    candidate = root.joinpath(f"{source}.json")
    if candidate.is_file():
        data = json.loads(candidate.read_text())
    elif os.path.isfile(source):
        with open(source) as fh:
            data = json.load(fh)
    else:
        raise ValueError(
            f"unknown diagram {source!r}; builtins: {', '.join(builtin_diagrams())}"
        )
    d = _diagram_from_dict(data)
    _require_valid(d)
    return d


@dataclass(frozen=True)
class PolytopeProblem:
    """Positive solutions of c_p . l = rhs_p in the free-coordinate chart."""

    diagram: DiagramSpec
    rhs: tuple

    def __post_init__(self):
        if len(self.rhs) != self.diagram.k:
            raise ValueError(
                f"rhs has {len(self.rhs)} entries, diagram has k={self.diagram.k}"
            )
        object.__setattr__(self, "rhs", tuple(float(r) for r in self.rhs))

    @cached_property
    def matrix(self):
        a = np.zeros((self.diagram.k, len(self.diagram.edges)))
        for j, e in enumerate(self.diagram.edges):
            for p in range(self.diagram.k):
                a[p, j] = e.cp[p]
        return a

    @cached_property
    def chart(self):
        """(pivots, frees, offset, coeff): l[pivots] = offset - coeff @ l[frees]."""
        a = self.matrix
        k, n_edges = a.shape
        aug = np.hstack([a, np.array(self.rhs)[:, None]])
        pivots = []
        row = 0
        for col in range(n_edges):
            if row == k:
                break
            best = row + np.argmax(np.abs(aug[row:, col]))
            if abs(aug[best, col]) < 1e-12:
                continue
            aug[[row, best]] = aug[[best, row]]
            aug[row] /= aug[row, col]
            for r in range(k):
                if r != row and aug[r, col] != 0.0:
                    aug[r] -= aug[r, col] * aug[row]
            pivots.append(col)
            row += 1
        if row < k:
            raise InfeasiblePolytope(
                f"constraint rows of {self.diagram.name!r} are linearly dependent"
            )
        frees = [c for c in range(n_edges) if c not in set(pivots)]
        offset = aug[:, -1].copy()
        coeff = aug[:, frees].copy()
        return pivots, frees, offset, coeff

    @property
    def dimension(self):
        return len(self.chart[1])

    def contains(self, point, tol=1e-9):
        w = np.asarray(point, dtype=float)
        if w.shape != (len(self.diagram.edges),):
            raise ValueError("point length does not match edge count")
        if np.any(w <= tol):
            return False
        return bool(np.all(np.abs(self.matrix @ w - np.array(self.rhs)) <= tol))

    def free_bounds(self):
        """Per free edge, an upper bound valid on the whole polytope."""
        _, frees, _, _ = self.chart
        bounds = []
        for j in frees:
            e = self.diagram.edges[j]
            bounds.append(min(
                self.rhs[p - 1] / e.cp[p - 1]
                for p in {e.p_minus, e.p_plus}
            ))
        return np.array(bounds)

    @cached_property
    def basic_vertices(self):
        """Vertices of the polytope closure (basic feasible solutions)."""
        a = self.matrix
        b = np.array(self.rhs)
        k, n_edges = a.shape
        found = []
        for support in itertools.combinations(range(n_edges), k):
            sub = a[:, support]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            x = np.linalg.solve(sub, b)
            if np.any(x < -_VERTEX_TOL):
                continue
            w = np.zeros(n_edges)
            w[list(support)] = np.clip(x, 0.0, None)
            found.append(w)
        if not found:
            return np.zeros((0, n_edges))
        verts = np.array(found)
        _, keep = np.unique(verts.round(9), axis=0, return_index=True)
        return verts[np.sort(keep)]

    def interior_point(self):
        """A strictly positive solution, or raise InfeasiblePolytope."""
        verts = self.basic_vertices
        if len(verts) == 0:
            raise InfeasiblePolytope(
                f"no nonnegative solution for {self.diagram.name!r} with rhs {self.rhs}"
            )
        centre = verts.mean(axis=0)
        if np.any(centre <= _VERTEX_TOL):
            raise InfeasiblePolytope(
                f"solutions of {self.diagram.name!r} with rhs {self.rhs} "
                "lie on the boundary (some edge length forced to zero)"
            )
        return centre


def _edge_exponents(d, ss, ts):
    out = np.empty(len(d.edges))
    for j, e in enumerate(d.edges):
        out[j] = abs(ts[e.p_plus - 1] - ts[e.p_minus - 1]) + abs(
            ss[e.p_plus - 1] - ss[e.p_minus - 1]
        )
    return out


def _divided_difference_exp(nodes):
    # Opitz: the divided difference of exp at the nodes is the corner
    # entry of expm of the bidiagonal matrix carrying them.
    m = len(nodes)
    z = np.zeros((m, m))
    np.fill_diagonal(z, nodes)
    for i in range(m - 1):
        z[i, i + 1] = 1.0
    return expm(z)[0, -1]


def _simplex_quadrature(problem, d_vec):
    pivots, frees, offset, coeff = problem.chart
    verts = problem.basic_vertices
    problem.interior_point()
    dim = len(frees)
    pts = verts[:, frees]
    y = verts @ (-d_vec)
    total = 0.0
    abs_total = 0.0
    if dim == 0:
        return float(np.exp(y[0])), 1e-15
    if dim == 1:
        order = np.argsort(pts[:, 0])
        for a, b in zip(order[:-1], order[1:]):
            length = pts[b, 0] - pts[a, 0]
            if length <= 1e-12:
                continue
            part = length * _divided_difference_exp([y[a], y[b]])
            total += part
            abs_total += abs(part)
    else:
        try:
            tri = Delaunay(pts)
        except QhullError:
            tri = Delaunay(pts, qhull_options="QJ")
        fact = math.factorial(dim)
        for simplex in tri.simplices:
            base = pts[simplex[0]]
            span = pts[simplex[1:]] - base
            vol = abs(np.linalg.det(span)) / fact
            if vol < 1e-14:
                continue
            part = vol * fact * _divided_difference_exp(y[simplex])
            total += part
            abs_total += abs(part)
    return total, abs_total * 1e-11 + 1e-15


def _monte_carlo(problem, d_vec, budget, seed):
    pivots, frees, offset, coeff = problem.chart
    problem.interior_point()
    dim = len(frees)
    bounds = problem.free_bounds()
    box_vol = float(np.prod(bounds))
    n_edges = len(problem.diagram.edges)
    children = np.random.SeedSequence(seed).spawn(
        max(1, math.ceil(budget / _MC_SHARD))
    )
    total = 0.0
    total_sq = 0.0
    n_done = 0
    for child in children:
        n = min(_MC_SHARD, budget - n_done)
        if n <= 0:
            break
        rng = np.random.default_rng(child)
        free = rng.uniform(0.0, bounds, size=(n, dim))
        piv = offset[None, :] - free @ coeff.T
        inside = np.all(piv > 0.0, axis=1)
        w = np.zeros((n, n_edges))
        w[:, frees] = free
        w[:, pivots] = piv
        vals = np.where(inside, np.exp(w @ (-d_vec)), 0.0)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        n_done += n
    mean = total / n_done
    var = max(total_sq / n_done - mean * mean, 0.0)
    return box_vol * mean, box_vol * math.sqrt(var / n_done)


def integral_I(d, alphas, ss, ts, method="monte-carlo", budget=None, seed=0):
    """Integrate exp(-sum_e [|dt| + |ds|] l_e) over the length polytope.

    Returns {"value", "error_estimate"}.  "simplex-quadrature" triangulates
    the polytope and integrates the exponential exactly per simplex;
    "monte-carlo" does rejection sampling in a bounding box of the free
    coordinates with `budget` samples split over derived-seed shards.
    """
    _require_valid(d)
    for name, arg in (("alphas", alphas), ("ss", ss), ("ts", ts)):
        if len(arg) != d.k:
            raise ValueError(f"{name} has {len(arg)} entries, expected k={d.k}")
    problem = PolytopeProblem(diagram=d, rhs=tuple(alphas))
    dim = problem.dimension
    d_vec = _edge_exponents(d, ss, ts)
    if method == "simplex-quadrature":
        if dim > QUADRATURE_MAX_DIM:
            raise ValueError(
                f"polytope dimension {dim} exceeds {QUADRATURE_MAX_DIM} for quadrature"
            )
        value, err = _simplex_quadrature(problem, d_vec)
    elif method == "monte-carlo":
        if dim > MC_MAX_DIM:
            raise ValueError(
                f"polytope dimension {dim} exceeds {MC_MAX_DIM} for monte-carlo"
            )
        value, err = _monte_carlo(
            problem, d_vec, MC_DEFAULT_BUDGET if budget is None else int(budget), seed
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    return {"value": float(value), "error_estimate": float(err)}


def psi_sharp(diagrams, beta, alphas, ss, ts, method="simplex-quadrature",
              budget=None, seed=0):
    """Sum of integral_I over a diagram family; beta=2 admits only
    orientable diagrams (edges traversed in opposite directions)."""
    if beta not in (1, 2):
        raise ValueError(f"beta must be 1 or 2, got {beta}")
    if beta == 2:
        bad = [d.name for d in diagrams if not d.orientable]
        if bad:
            raise ValueError(
                "beta=2 admits only orientable diagrams; rejected: " + ", ".join(bad)
            )
    total = 0.0
    for d in diagrams:
        total += integral_I(d, alphas, ss, ts, method=method, budget=budget,
                            seed=seed)["value"]
    return total


_PHI_CUTOFF = 6.5  # exp(-6.5^2) is below double precision


def phi_sharp(psi_sharp_evaluator, alphas, ss, ts, quadrature_nodes=40):
    """Gauss-weighted transform of psi^#:

        prod_p  int_0^inf (2 xi dxi / sqrt(pi alpha_p)) e^{-xi^2}
                    psi^#(..., 2 sqrt(alpha_p) xi_p, ...)

    evaluated by tensor-product Gauss-Legendre on (0, 6.5)^k, where the
    truncated Gaussian tail is below machine precision.
    """
    k = len(alphas)
    if not 1 <= k <= 3:
        raise ValueError(f"k={k} outside supported range 1..3")
    if any(a <= 0 for a in alphas):
        raise ValueError("alphas must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(quadrature_nodes)
    xi = 0.5 * _PHI_CUTOFF * (nodes + 1.0)
    wgt_1d = 0.5 * _PHI_CUTOFF * weights * 2.0 * xi * np.exp(-xi * xi)
    total = 0.0
    for idx in itertools.product(range(quadrature_nodes), repeat=k):
        scaled = tuple(
            2.0 * math.sqrt(a) * xi[i] for a, i in zip(alphas, idx)
        )
        wgt = math.prod(wgt_1d[i] for i in idx)
        total += wgt * psi_sharp_evaluator(scaled, ss, ts)
    return total / math.prod(math.sqrt(math.pi * a) for a in alphas)


def _normalize_subset_table(table):
    out = {}
    for key, val in table.items():
        tup = tuple(sorted(key))
        if len(set(tup)) != len(tup):
            raise ValueError(f"subset key {key!r} has repeated indices")
        out[tup] = float(val)
    return out


def sharp_from_psi(psi_table):
    """Forward subset-sum relation: psi^#(S) = sum_{I subset S} psi(I) psi(S\\I)."""
    psi = _normalize_subset_table(psi_table)
    out = {}
    for key in psi:
        total = 0.0
        rest = set(key)
        for size in range(len(key) + 1):
            for sub in itertools.combinations(key, size):
                comp = tuple(sorted(rest - set(sub)))
                total += psi[sub] * psi[comp]
        out[key] = total
    return out


def psi_from_sharp(psi_sharp_table):
    """Invert the subset-sum relation, with the convention psi(empty) = 1.

    The table must contain psi^# for every subset of the full index set,
    including the empty tuple (whose value must be 1 up to 1e-9, since
    psi(empty)=1 forces psi^#(empty)=1).
    """
    sharp = _normalize_subset_table(psi_sharp_table)
    if () not in sharp:
        raise ValueError("missing psi^# entry for the empty tuple")
    full = max(sharp, key=len)
    for size in range(len(full) + 1):
        for sub in itertools.combinations(full, size):
            if sub not in sharp:
                raise ValueError(f"missing psi^# entry for sub-tuple {sub}")
    if abs(sharp[()] - 1.0) > 1e-9:
        raise ValueError(
            f"inconsistent table: psi^#(empty) = {sharp[()]}, "
            "but psi(empty) = 1 forces it to equal 1"
        )
    psi = {(): 1.0}
    for size in range(1, len(full) + 1):
        for sub in itertools.combinations(full, size):
            cross = 0.0
            rest = set(sub)
            for inner_size in range(1, size):
                for inner in itertools.combinations(sub, inner_size):
                    comp = tuple(sorted(rest - set(inner)))
                    cross += psi[inner] * psi[comp]
            psi[sub] = (sharp[sub] - cross) / 2.0
    return psi
