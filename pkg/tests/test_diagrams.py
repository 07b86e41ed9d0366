import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerlab.diagrams import (
    DiagramEdge,
    DiagramSpec,
    InfeasiblePolytope,
    PolytopeProblem,
    builtin_diagrams,
    integral_I,
    load_diagram,
    phi_sharp,
    psi_from_sharp,
    psi_sharp,
    sharp_from_psi,
    validate_diagram,
)

SEG = load_diagram("one-path-projective")
TORUS = load_diagram("one-path-torus")
SPHERE = load_diagram("two-path-sphere")
BRIDGED = load_diagram("two-path-bridged")
DISJOINT = load_diagram("two-path-disjoint")


def edge(cp, lo, hi):
    return DiagramEdge(cp=tuple(cp), p_minus=lo, p_plus=hi)


# ---------------------------------------------------------------- validation

def test_builtin_diagrams_all_valid():
    names = builtin_diagrams()
    assert len(names) == 6
    for name in names:
        d = load_diagram(name)
        report = validate_diagram(d)
        assert report.passed, report.problems
        assert d.vertices == 2 * d.s
        assert len(d.edges) == 3 * d.s - d.k


def test_only_torus_and_sphere_orientable():
    flags = {name: load_diagram(name).orientable for name in builtin_diagrams()}
    assert flags == {
        "one-path-projective": False,
        "one-path-torus": True,
        "one-path-klein": False,
        "two-path-sphere": True,
        "two-path-disjoint": False,
        "two-path-bridged": False,
    }


def test_bridged_edge_data():
    # the bridged two-path diagram, edge by edge: four doubled edges of
    # path 1, two shared single-traversal edges, one doubled edge of path 2
    cps = [e.cp for e in BRIDGED.edges]
    assert cps == [(2, 0)] * 4 + [(1, 1)] * 2 + [(0, 2)]
    assert [(e.p_minus, e.p_plus) for e in BRIDGED.edges] == \
        [(1, 1)] * 4 + [(1, 2)] * 2 + [(2, 2)]
    assert BRIDGED.k == 2 and BRIDGED.s == 3 and BRIDGED.vertices == 6


def test_bridged_length_point_satisfies_constraints():
    # traversal lengths 1,1,3,2,1,2,2 give path totals 17 and 7
    prob = PolytopeProblem(diagram=BRIDGED, rhs=(17.0, 7.0))
    assert prob.contains((1, 1, 3, 2, 1, 2, 2))
    assert prob.dimension == 3 * BRIDGED.s - 2 * BRIDGED.k == 5


def test_validate_rejects_bad_cp_sum():
    d = DiagramSpec(name="bad", k=1, s=1, vertices=2, orientable=False,
                    edges=(edge([2], 1, 1), edge([3], 1, 1)))
    report = validate_diagram(d)
    assert not report.passed
    assert any("sums to 3" in p for p in report.problems)


def test_validate_minimal_segment_diagram():
    d = DiagramSpec(name="seg", k=1, s=1, vertices=2, orientable=False,
                    edges=(edge([2], 1, 1), edge([2], 1, 1)))
    assert validate_diagram(d).passed


def test_validate_names_each_violation():
    d = DiagramSpec(
        name="mess", k=2, s=1, vertices=3, orientable=False,
        edges=(edge([2, 1], 1, 1), edge([2, 0], 1, 1)),
    )
    report = validate_diagram(d)
    assert not report.passed
    joined = " | ".join(report.problems)
    assert "s=1 smaller than path count" in joined
    assert "vertex count 3" in joined
    assert "edge count 2 != 3s - k = 1" in joined
    assert "sums to 3" in joined
    assert "nonzero off the traversing pair" in joined


def test_validate_rejects_zero_count_on_traversing_path():
    d = DiagramSpec(name="z", k=2, s=2, vertices=4, orientable=False,
                    edges=(edge([2, 0], 1, 2),) * 4)
    report = validate_diagram(d)
    assert any("traversing path 2 has count 0" in p for p in report.problems)


def test_load_diagram_unknown_name():
    with pytest.raises(ValueError, match="unknown diagram"):
        load_diagram("no-such-thing")


def test_load_diagram_from_file(tmp_path):
    path = tmp_path / "custom.json"
    path.write_text(
        '{"name": "custom", "k": 1, "s": 1, "vertices": 2, "orientable": false,'
        ' "edges": [{"cp": [2], "p_minus": 1, "p_plus": 1},'
        '           {"cp": [2], "p_minus": 1, "p_plus": 1}]}'
    )
    d = load_diagram(str(path))
    assert d.name == "custom"
    assert validate_diagram(d).passed


# ---------------------------------------------------------------- integral_I

def test_segment_volume_analytic():
    # single constraint 2*l1 + 2*l2 = alpha: a segment of length alpha/2
    for alpha in (1.0, 3.2):
        out = integral_I(SEG, (alpha,), (0.0,), (0.0,), method="simplex-quadrature")
        assert out["value"] == pytest.approx(alpha / 2, rel=1e-12)


def test_segment_volume_mc_within_one_percent():
    out = integral_I(SEG, (2.0,), (0.0,), (0.0,), method="monte-carlo",
                     budget=100_000, seed=1)
    assert out["value"] == pytest.approx(1.0, rel=0.01)


def test_k1_integrand_is_volume_regardless_of_times():
    # p_minus == p_plus on every edge, so the exponent vanishes
    a = integral_I(TORUS, (2.0,), (0.0,), (0.0,), method="simplex-quadrature")
    b = integral_I(TORUS, (2.0,), (9.0,), (-4.0,), method="simplex-quadrature")
    assert a["value"] == b["value"]
    # chart volume: 4-simplex of side alpha/2
    assert a["value"] == pytest.approx((2.0 / 2) ** 4 / 24, rel=1e-12)


def test_equal_times_give_volume_for_k2():
    out = integral_I(SPHERE, (2.0, 1.5), (0.3, 0.3), (-1.0, -1.0),
                     method="simplex-quadrature")
    assert out["value"] == pytest.approx(min(2.0, 1.5) ** 2 / 2, rel=1e-12)


@pytest.mark.parametrize("s2,t2", [(0.5, 0.0), (0.25, 1.0), (0.0, 2.0)])
def test_sphere_closed_form(s2, t2):
    # shared-cycle diagram: I = int_0^m u e^{-delta u} du with m = min(alphas)
    a1, a2 = 2.0, 1.5
    delta = abs(s2) + abs(t2)
    m = min(a1, a2)
    exact = (1 - (1 + delta * m) * math.exp(-delta * m)) / delta**2
    quad = integral_I(SPHERE, (a1, a2), (0.0, s2), (0.0, t2),
                      method="simplex-quadrature")
    assert quad["value"] == pytest.approx(exact, rel=1e-10)
    mc = integral_I(SPHERE, (a1, a2), (0.0, s2), (0.0, t2),
                    method="monte-carlo", budget=400_000, seed=9)
    assert abs(mc["value"] - exact) < 4 * mc["error_estimate"]


def test_disjoint_diagram_factorizes_and_ignores_separation():
    # no shared edge: the integral is a product of one-path volumes
    a1, a2 = 3.0, 2.0
    expect = (a1 / 2) * (a2 / 2) ** 4 / 24
    for s2, t2 in [(0.0, 0.0), (1.3, 0.4)]:
        out = integral_I(DISJOINT, (a1, a2), (0.0, s2), (0.0, t2),
                         method="simplex-quadrature")
        assert out["value"] == pytest.approx(expect, rel=1e-12)


def test_mc_and_quadrature_agree_on_bridged():
    args = (BRIDGED, (2.0, 1.0), (0.0, 0.7), (0.0, 0.3))
    quad = integral_I(*args, method="simplex-quadrature")
    mc = integral_I(*args, method="monte-carlo", budget=600_000, seed=13)
    err = mc["error_estimate"] + quad["error_estimate"]
    assert abs(quad["value"] - mc["value"]) < 4 * err


def test_mc_error_estimate_scales_down():
    coarse = integral_I(SPHERE, (2.0, 1.5), (0.0, 0.5), (0.0, 0.0),
                        method="monte-carlo", budget=20_000, seed=2)
    fine = integral_I(SPHERE, (2.0, 1.5), (0.0, 0.5), (0.0, 0.0),
                      method="monte-carlo", budget=320_000, seed=2)
    assert fine["error_estimate"] < coarse["error_estimate"]


def test_infeasible_rhs_raises():
    with pytest.raises(InfeasiblePolytope):
        integral_I(SEG, (-1.0,), (0.0,), (0.0,), method="simplex-quadrature")
    with pytest.raises(InfeasiblePolytope):
        integral_I(SPHERE, (0.0, 1.0), (0.0, 0.0), (0.0, 0.0),
                   method="monte-carlo", budget=1000)


def test_argument_length_mismatch():
    with pytest.raises(ValueError, match="expected k=2"):
        integral_I(SPHERE, (1.0,), (0.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError, match="unknown method"):
        integral_I(SEG, (1.0,), (0.0,), (0.0,), method="trapezoid")


def test_translation_and_negation_leave_integral_unchanged():
    # dyadic offsets keep |dt|, |ds| bit-identical, so both estimators
    # return the exact same float
    base = (2.0, 1.0), (0.125, 0.875), (-0.25, 0.125)
    shifted = (2.0, 1.0), (4.125, 4.875), (7.75, 8.125)
    negated = (2.0, 1.0), (-0.125, -0.875), (0.25, -0.125)
    for method, kwargs in [("simplex-quadrature", {}),
                           ("monte-carlo", {"budget": 50_000, "seed": 3})]:
        vals = [integral_I(BRIDGED, *args, method=method, **kwargs)["value"]
                for args in (base, shifted, negated)]
        assert vals[0] == vals[1] == vals[2]


@settings(max_examples=20, deadline=None)
@given(shift_s=st.integers(-40, 40), shift_t=st.integers(-40, 40))
def test_translation_invariance_property(shift_s, shift_t):
    cs, ct = shift_s / 8.0, shift_t / 8.0
    base = integral_I(SPHERE, (2.0, 1.5), (0.25, 0.875), (0.5, -0.125),
                      method="simplex-quadrature")["value"]
    moved = integral_I(SPHERE, (2.0, 1.5), (0.25 + cs, 0.875 + cs),
                       (0.5 + ct, -0.125 + ct),
                       method="simplex-quadrature")["value"]
    assert moved == base


def test_monotone_in_separation():
    deltas = [0.0, 0.5, 1.0, 2.0, 4.0]
    vals = [integral_I(BRIDGED, (2.0, 1.0), (0.0, d), (0.0, 0.0),
                       method="simplex-quadrature")["value"] for d in deltas]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[0] > vals[-1]


def test_quadrature_dimension_guard():
    # k=2, s=4: ten edges, dimension 3s - 2k = 8
    edges = tuple(edge([2, 0], 1, 1) for _ in range(5)) + \
        tuple(edge([0, 2], 2, 2) for _ in range(5))
    d = DiagramSpec(name="wide", k=2, s=4, vertices=8, orientable=False,
                    edges=edges)
    assert validate_diagram(d).passed
    with pytest.raises(ValueError, match="exceeds 6 for quadrature"):
        integral_I(d, (1.0, 1.0), (0.0, 0.0), (0.0, 0.0),
                   method="simplex-quadrature")
    out = integral_I(d, (1.0, 1.0), (0.0, 0.0), (0.0, 0.0),
                     method="monte-carlo", budget=50_000, seed=4)
    assert out["value"] > 0


# ----------------------------------------------------------------- psi_sharp

def test_psi_sharp_empty_family_is_zero():
    assert psi_sharp([], 1, (2.0,), (0.0,), (0.0,)) == 0.0


def test_psi_sharp_single_diagram_equals_integral():
    lone = integral_I(TORUS, (2.0,), (0.0,), (0.0,),
                      method="simplex-quadrature")["value"]
    assert psi_sharp([TORUS], 2, (2.0,), (0.0,), (0.0,)) == lone


def test_psi_sharp_sums_family():
    total = psi_sharp([SEG, TORUS, TORUS], 1, (2.0,), (0.0,), (0.0,))
    assert total == pytest.approx(1.0 + 2 * (1.0 / 24), rel=1e-12)


def test_psi_sharp_beta2_rejects_nonorientable():
    with pytest.raises(ValueError, match="one-path-projective"):
        psi_sharp([TORUS, SEG], 2, (2.0,), (0.0,), (0.0,))


def test_psi_sharp_bad_beta():
    with pytest.raises(ValueError, match="beta"):
        psi_sharp([TORUS], 3, (2.0,), (0.0,), (0.0,))


# ----------------------------------------------------------------- phi_sharp

def test_phi_sharp_constant_psi():
    for alpha in (1.0, 2.5):
        out = phi_sharp(lambda a, s, t: 1.0, (alpha,), (0.0,), (0.0,))
        assert out == pytest.approx(1 / math.sqrt(math.pi * alpha), rel=1e-12)


def test_phi_sharp_zero_psi():
    assert phi_sharp(lambda a, s, t: 0.0, (1.0, 2.0), (0.0,) * 2, (0.0,) * 2) == 0.0


def test_phi_sharp_separable_factorizes():
    f1 = lambda x: math.exp(-0.3 * x)
    f2 = lambda x: 1.0 / (1.0 + x)
    joint = phi_sharp(lambda a, s, t: f1(a[0]) * f2(a[1]),
                      (1.2, 0.8), (0.0, 0.0), (0.0, 0.0), quadrature_nodes=40)
    left = phi_sharp(lambda a, s, t: f1(a[0]), (1.2,), (0.0,), (0.0,),
                     quadrature_nodes=40)
    right = phi_sharp(lambda a, s, t: f2(a[0]), (0.8,), (0.0,), (0.0,),
                      quadrature_nodes=40)
    assert joint == pytest.approx(left * right, rel=1e-12)


def test_phi_sharp_gaussian_psi_closed_form():
    # psi^#(x) = x integrates to E[2 sqrt(alpha) xi] = sqrt(alpha) against
    # the half-Gaussian weight, so phi^# = sqrt(alpha/pi) / sqrt(alpha) ... :
    # int_0^inf 2 xi e^{-xi^2} * 2 sqrt(a) xi dxi = 2 sqrt(a) * Gamma(3/2)
    alpha = 1.7
    out = phi_sharp(lambda a, s, t: a[0], (alpha,), (0.0,), (0.0,),
                    quadrature_nodes=60)
    exact = 2 * math.sqrt(alpha) * (math.sqrt(math.pi) / 2) / math.sqrt(math.pi * alpha)
    assert out == pytest.approx(exact, rel=1e-8)


def test_phi_sharp_k_guard():
    with pytest.raises(ValueError, match="outside supported range"):
        phi_sharp(lambda a, s, t: 1.0, (1.0,) * 4, (0.0,) * 4, (0.0,) * 4)
    with pytest.raises(ValueError, match="positive"):
        phi_sharp(lambda a, s, t: 1.0, (0.0,), (0.0,), (0.0,))


# ------------------------------------------------------------ subset algebra

def test_psi_from_sharp_k1_halves():
    out = psi_from_sharp({(): 1.0, (1,): 0.8})
    assert out[(1,)] == pytest.approx(0.4)
    assert out[()] == 1.0


def test_psi_from_sharp_round_trip():
    rng = np.random.default_rng(17)
    psi = {(): 1.0}
    for size in (1, 2, 3):
        for sub in itertools.combinations((1, 2, 3), size):
            psi[sub] = float(rng.normal())
    rebuilt = psi_from_sharp(sharp_from_psi(psi))
    for key, val in psi.items():
        assert rebuilt[key] == pytest.approx(val, abs=1e-12)


def test_sharp_from_psi_k2_expansion():
    psi = {(): 1.0, (1,): 0.5, (2,): -0.25, (1, 2): 2.0}
    sharp = sharp_from_psi(psi)
    assert sharp[()] == 1.0
    assert sharp[(1,)] == pytest.approx(1.0)
    assert sharp[(1, 2)] == pytest.approx(2 * 2.0 + 2 * 0.5 * -0.25)


def test_psi_from_sharp_rejects_all_zero_table():
    with pytest.raises(ValueError, match="inconsistent"):
        psi_from_sharp({(): 0.0, (1,): 0.0})


def test_psi_from_sharp_missing_subset():
    with pytest.raises(ValueError, match="missing"):
        psi_from_sharp({(): 1.0, (1, 2): 3.0, (1,): 0.5})
    with pytest.raises(ValueError, match="empty tuple"):
        psi_from_sharp({(1,): 0.5})


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3))
def test_psi_round_trip_property(vals):
    psi = {(): 1.0, (1,): vals[0], (2,): vals[1], (1, 2): vals[2]}
    rebuilt = psi_from_sharp(sharp_from_psi(psi))
    for key, val in psi.items():
        assert rebuilt[key] == pytest.approx(val, abs=1e-9)
