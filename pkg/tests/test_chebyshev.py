import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerlab.chebyshev import (
    LaplaceStatistic,
    MomentSpec,
    PBasisExpansion,
    P_eval,
    chebyshev_U,
    edge_bulk_classify,
    laplace_statistic,
    mc_mixed_moments,
    power_in_P_basis,
    trace_P_paths,
    trace_P_spectral,
)
from cornerlab.entries import EntryProcessSpec, MatrixPath, hermitian_snapshot
from cornerlab.pathsum import exact_mixed_moment, exact_modified_moment
from cornerlab.spectra import SpectrumFrame

UNI1 = EntryProcessSpec(kind="resampled-unimodular", beta=1)
UNI2 = EntryProcessSpec(kind="resampled-unimodular", beta=2)
GOE = EntryProcessSpec(kind="gaussian-ou", beta=1)

XS = np.linspace(-2.0, 2.0, 9)


def test_chebyshev_U_low_orders():
    assert np.allclose(chebyshev_U(0, XS), 1.0)
    assert np.allclose(chebyshev_U(1, XS), 2 * XS)
    assert np.allclose(chebyshev_U(2, XS), 4 * XS**2 - 1)
    assert np.all(chebyshev_U(-1, XS) == 0)
    assert np.all(chebyshev_U(-2, XS) == 0)
    with pytest.raises(ValueError):
        chebyshev_U(-3, XS)


@given(n=st.integers(0, 20), x=st.floats(-2, 2, allow_nan=False))
def test_chebyshev_U_recursion(n, x):
    lhs = chebyshev_U(n + 1, x)
    rhs = 2 * x * chebyshev_U(n, x) - chebyshev_U(n - 1, x)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_P_eval_low_orders():
    lam = np.linspace(-3, 3, 7)
    for n_size in (3, 5, 12):
        assert np.allclose(P_eval(0, n_size, lam), 1.0)
        assert np.allclose(P_eval(1, n_size, lam), lam / math.sqrt(n_size - 2))
    assert np.allclose(P_eval(2, 3, lam), lam**2 - 2)
    with pytest.raises(ValueError):
        P_eval(2, 2, lam)


def test_trace_P_spectral_all_ones():
    h = np.ones((3, 3)) - np.eye(3)
    assert trace_P_spectral(h, 0) == pytest.approx(3.0)
    assert trace_P_spectral(h, 2) == pytest.approx(0.0, abs=1e-12)
    assert trace_P_spectral(h, 3) == pytest.approx(6.0)
    assert trace_P_paths(h, 3) == pytest.approx(6.0)


@pytest.mark.parametrize("beta", [1, 2])
@pytest.mark.parametrize("n_size", [3, 4, 5, 6])
def test_trace_identity(beta, n_size):
    spec = EntryProcessSpec(kind="resampled-unimodular", beta=beta)
    path = MatrixPath(spec, seed=100 * n_size + beta)
    for trial in range(3):
        h = hermitian_snapshot(path, tau=0.3, n=n_size, trial=trial)
        for n in range(1, 7):
            assert trace_P_paths(h, n) == pytest.approx(
                trace_P_spectral(h, n), abs=1e-9)


def test_trace_P_paths_n0_is_size():
    h = np.ones((4, 4)) - np.eye(4)
    assert trace_P_paths(h, 0) == 4.0


def test_trace_P_paths_validation():
    good = np.ones((4, 4)) - np.eye(4)
    with pytest.raises(ValueError, match="diagonal"):
        trace_P_paths(good + np.eye(4), 3)
    with pytest.raises(ValueError, match="unimodular"):
        trace_P_paths(good * 0.5, 3)
    skew = good.copy()
    skew[0, 1] = -1.0
    with pytest.raises(ValueError, match="Hermitian"):
        trace_P_paths(skew, 3)
    with pytest.raises(ValueError, match=">= 3"):
        trace_P_paths(np.zeros((2, 2)), 3)
    with pytest.raises(ValueError, match="too large"):
        trace_P_paths(np.ones((30, 30)) - np.eye(30), 6)


def test_power_expansion_edge_cases():
    assert power_in_P_basis(0, 5).coefficients == {0: 1}
    assert power_in_P_basis(1, 5).coefficients == {1: 1}
    ex = power_in_P_basis(2, 3)
    assert ex.coefficients == {0: 2, 2: 1}
    assert ex.gamma(2) == 1.0
    with pytest.raises(ValueError):
        power_in_P_basis(201, 3)
    with pytest.raises(ValueError):
        power_in_P_basis(2, 2)


def test_square_in_U_level():
    # x^2 = (1/12)(3 U_0 + 3 U_2), i.e. equal weights 1/4
    for x in XS:
        assert x**2 == pytest.approx(
            (3 * chebyshev_U(0, x) + 3 * chebyshev_U(2, x)) / 12, abs=1e-12)


@pytest.mark.parametrize("n_size", [3, 10, 100])
@pytest.mark.parametrize("m", [2, 5, 12, 30])
def test_power_expansion_reproduces_powers(m, n_size):
    ex = power_in_P_basis(m, n_size)
    for lam in np.linspace(-3, 3, 50):
        expected = float(Fraction(lam) ** m)
        got = ex.evaluate(lam)
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-300)


def test_power_expansion_parity():
    for m in (4, 7):
        ex = power_in_P_basis(m, 5)
        assert all(p % 2 == m % 2 for p in ex.coefficients)
        assert all(isinstance(k, int) for k in ex.coefficients.values())


def test_power_expansion_large_m():
    ex = power_in_P_basis(200, 7)
    lam = 1.5
    assert ex.evaluate(lam) == pytest.approx(float(Fraction(lam) ** 200), rel=1e-12)


def test_mc_matches_hand_values():
    res = mc_mixed_moments(MomentSpec("plain", (2,), (0.0,), (4,)), GOE,
                           trials=4000, seed=11)
    assert abs(res["estimate"] - 1.25) < 3 * res["stderr"]
    res = mc_mixed_moments(MomentSpec("plain", (2,), (0.0,), (4,)), UNI1,
                           trials=4000, seed=12)
    assert abs(res["estimate"] - 0.75) < 3 * res["stderr"]
    res = mc_mixed_moments(MomentSpec("plain", (3,), (0.0,), (4,)), UNI2,
                           trials=4000, seed=13)
    assert abs(res["estimate"]) < 3 * res["stderr"]


def test_mc_matches_path_oracle_two_time():
    spec = MomentSpec("plain", (1, 1), (0.0, 0.4), (4, 4))
    exact = exact_mixed_moment(spec, GOE)
    res = mc_mixed_moments(spec, GOE, trials=4000, seed=21)
    assert abs(res["estimate"] - exact) < 3 * res["stderr"]


def test_mc_modified_matches_oracle():
    spec = MomentSpec("modified", (4,), (0.2,), (4,))
    exact = exact_modified_moment(spec, UNI2)
    res = mc_mixed_moments(spec, UNI2, trials=4000, seed=31)
    assert abs(res["estimate"] - exact) < 3 * res["stderr"]


def test_mc_validation_and_determinism():
    spec = MomentSpec("plain", (2,), (0.0,), (4,))
    with pytest.raises(ValueError, match="trials"):
        mc_mixed_moments(spec, GOE, trials=50, seed=1)
    with pytest.raises(ValueError, match="ambient"):
        mc_mixed_moments(spec, GOE, trials=100, seed=1, m_ambient=3)
    a = mc_mixed_moments(spec, GOE, trials=200, seed=5)
    b = mc_mixed_moments(spec, GOE, trials=200, seed=5)
    assert a == b


def test_laplace_values():
    assert laplace_statistic([0.0], alpha=1.0).value == pytest.approx(1.0)
    res = laplace_statistic([0.0, -math.log(2)], alpha=1.0)
    assert res.value == pytest.approx(1.5)
    assert not res.tail_bounded
    assert res.lines_used == 2
    assert laplace_statistic([0.0, -40.0], alpha=1.0).tail_bounded


def test_laplace_monotone_in_alpha():
    rng = np.random.default_rng(7)
    lines = -rng.exponential(1.0, size=12) - 0.05
    values = [laplace_statistic(lines, alpha=a).value for a in (1.0, 1.5, 2.0, 3.0)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_laplace_frame_source_and_mirror():
    frame = SpectrumFrame(tau=0.0, n=3, eigenvalues=np.array([2.0, 0.5, -1.0]))
    m_ambient = 64
    scaled = 64 ** (1 / 6) * (frame.eigenvalues - 2 * math.sqrt(3))
    direct = laplace_statistic(frame, alpha=1.0, m_ambient=m_ambient)
    assert direct.value == pytest.approx(math.fsum(np.exp(scaled)), rel=1e-12)
    mirrored = 64 ** (1 / 6) * (-frame.eigenvalues[::-1] - 2 * math.sqrt(3))
    for parity in (0, 1):
        res = laplace_statistic(frame, alpha=1.0, m_ambient=m_ambient,
                                mirror_parity=parity)
        expected = math.fsum(np.exp(scaled)) + (-1) ** parity * math.fsum(np.exp(mirrored))
        assert res.value == pytest.approx(expected, rel=1e-12)
        assert res.lines_used == 6


def test_laplace_validation():
    with pytest.raises(ValueError, match="alpha"):
        laplace_statistic([0.0], alpha=0.5)
    with pytest.raises(ValueError, match="m_ambient"):
        laplace_statistic(SpectrumFrame(tau=0.0, n=1, eigenvalues=np.array([0.0])), alpha=1.0)
    with pytest.raises(ValueError, match="mirror_source"):
        laplace_statistic([0.0], alpha=1.0, mirror_parity=0)


def test_classify_examples():
    for n_size, m_ambient in ((4, 8), (100, 200), (50, 50)):
        edge = 2 * math.sqrt(n_size)
        assert edge_bulk_classify(edge, n_size, m_ambient) == "right-edge"
        assert edge_bulk_classify(-edge, n_size, m_ambient) == "left-edge"
        assert edge_bulk_classify(0.0, n_size, m_ambient) == "bulk"
        assert edge_bulk_classify(3 * math.sqrt(n_size), n_size, m_ambient) == "tail"


def test_classify_ties_go_to_edge():
    n_size = m_ambient = 100
    band = m_ambient ** (-1 / 6 + 0.01)
    edge = 2 * math.sqrt(n_size)
    assert edge_bulk_classify(edge + band, n_size, m_ambient) == "right-edge"
    assert edge_bulk_classify(edge - band, n_size, m_ambient) == "right-edge"
    assert edge_bulk_classify(-edge - band, n_size, m_ambient) == "left-edge"
    assert edge_bulk_classify(edge + 2 * band, n_size, m_ambient) == "tail"


def test_classify_sliver_between_ranges():
    # N < M: the edge band is narrower than the stated tail threshold
    n_size, m_ambient = 16, 1000
    xi = 2 * math.sqrt(n_size) + 0.5
    assert m_ambient ** (-1 / 6 + 0.01) < 0.5 < n_size ** (-1 / 6 + 0.01)
    assert edge_bulk_classify(xi, n_size, m_ambient) == "tail"
    xi_in = 2 * math.sqrt(n_size) - 0.34
    assert edge_bulk_classify(xi_in, n_size, m_ambient) == "bulk"
