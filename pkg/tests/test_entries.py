import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cornerlab.entries import (
    EntryProcessSpec, MatrixPath, sample_entry_path, hermitian_snapshot,
    snapshot_batch, covariance_check,
)

ALL_SPECS = [
    EntryProcessSpec("gaussian-ou", 1),
    EntryProcessSpec("gaussian-ou", 2),
    EntryProcessSpec("resampled-gaussian", 1),
    EntryProcessSpec("resampled-gaussian", 2),
    EntryProcessSpec("resampled-unimodular", 1),
    EntryProcessSpec("resampled-unimodular", 2),
]


def test_spec_validation():
    with pytest.raises(ValueError):
        EntryProcessSpec("wigner", 1)
    with pytest.raises(ValueError):
        EntryProcessSpec("gaussian-ou", 3)
    with pytest.raises(ValueError):
        EntryProcessSpec("resampled-unimodular", 1, zero_diagonal=False)
    with pytest.raises(ValueError):
        EntryProcessSpec("resampled-gaussian", 1, resample_intensity=2.0)
    assert EntryProcessSpec("resampled-unimodular", 2).zero_diagonal
    assert not EntryProcessSpec("gaussian-ou", 1).zero_diagonal


def test_spec_json_round_trip():
    spec = EntryProcessSpec("resampled-unimodular", 2)
    text = spec.to_json(seed=123)
    back, seed = EntryProcessSpec.from_json(text)
    assert back == spec and seed == 123


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind}-b{s.beta}")
def test_snapshot_hermitian_and_nested(spec):
    path = MatrixPath(spec, seed=7)
    for tau in (0.0, 0.25, -0.6):
        big = hermitian_snapshot(path, tau, 12)
        assert np.array_equal(big, big.conj().T)
        if spec.beta == 1:
            assert big.dtype == np.float64
        small = hermitian_snapshot(path, tau, 7)
        assert np.array_equal(small, big[:7, :7])


def test_snapshot_deterministic_across_instances():
    spec = EntryProcessSpec("resampled-gaussian", 2)
    a = hermitian_snapshot(MatrixPath(spec, 3), 0.5, 9)
    b = hermitian_snapshot(MatrixPath(spec, 3), 0.5, 9)
    c = hermitian_snapshot(MatrixPath(spec, 4), 0.5, 9)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_unimodular_snapshot_structure():
    for beta in (1, 2):
        path = MatrixPath(EntryProcessSpec("resampled-unimodular", beta), 11)
        h = hermitian_snapshot(path, 0.3, 20)
        assert np.all(np.diag(h) == 0)
        off = h[~np.eye(20, dtype=bool)]
        assert np.all(np.abs(np.abs(off) - 1.0) < 1e-15)
        if beta == 1:
            assert set(np.unique(h)) <= {-1.0, 0.0, 1.0}


def test_entry_path_conjugate_symmetry():
    path = MatrixPath(EntryProcessSpec("gaussian-ou", 2), 5)
    upper = sample_entry_path(path, 2, 6, [0.0, 0.125, 0.5])
    lower = sample_entry_path(path, 6, 2, [0.0, 0.125, 0.5])
    assert upper == [complex(v).conjugate() for v in lower]


def test_entry_path_matches_snapshot():
    for spec in ALL_SPECS:
        path = MatrixPath(spec, 21)
        h = hermitian_snapshot(path, 0.25, 6, trial=3)
        v = sample_entry_path(path, 2, 5, [0.25], trial=3)[0]
        assert v == pytest.approx(h[1, 4], abs=0, rel=0) or v == h[1, 4]


def test_entry_path_input_validation():
    path = MatrixPath(EntryProcessSpec("gaussian-ou", 1), 0)
    with pytest.raises(ValueError):
        sample_entry_path(path, 0, 1, [0.0])
    with pytest.raises(ValueError):
        sample_entry_path(path, 1, 1, [0.5, 0.2])
    with pytest.raises(ValueError):
        sample_entry_path(path, 1, 1, [1.5])


def test_resampled_path_piecewise_constant():
    path = MatrixPath(EntryProcessSpec("resampled-gaussian", 1), 2)
    same = 0
    for trial in range(200):
        a, b = sample_entry_path(path, 1, 2, [0.3, 0.3 + 1e-9], trial=trial)
        same += a == b
    # P(resample inside 1e-9 window) ~ 1e-9
    assert same == 200


def test_ou_path_is_continuous_in_tau():
    path = MatrixPath(EntryProcessSpec("gaussian-ou", 1), 13)
    a, b = sample_entry_path(path, 3, 4, [0.25, 0.25 + 2.0**-40])
    assert abs(a - b) < 1e-4


@settings(deadline=None, max_examples=25)
@given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
def test_ou_snapshot_finite_hermitian_any_tau(tau):
    path = MatrixPath(EntryProcessSpec("gaussian-ou", 2), 1)
    h = hermitian_snapshot(path, tau, 4)
    assert np.isfinite(h).all()
    assert np.array_equal(h, h.conj().T)


def test_gaussian_beta1_variances():
    # off-diagonal variance 1, diagonal variance 2, from (X+X^T)/sqrt(2)
    path = MatrixPath(EntryProcessSpec("gaussian-ou", 1), 31)
    h = snapshot_batch(path, 0.0, 15, np.arange(1000))
    off = h[:, ~np.eye(15, dtype=bool)].ravel()
    dia = h[:, np.eye(15, dtype=bool)].ravel()
    for sample, target in ((off, 1.0), (dia, 2.0)):
        var = sample.var()
        stderr = math.sqrt(2.0 / sample.size) * target  # var of chi^2 mean
        assert abs(var - target) < 3 * stderr + 0.01


def test_gaussian_beta2_second_moments():
    path = MatrixPath(EntryProcessSpec("gaussian-ou", 2), 32)
    h = snapshot_batch(path, 0.0, 15, np.arange(1000))
    off = h[:, ~np.eye(15, dtype=bool)].ravel()
    n = off.size
    assert abs(np.mean(np.abs(off) ** 2) - 1.0) < 3 * math.sqrt(2.0 / n) + 0.01
    plain = np.mean(off**2)
    assert abs(plain) < 4 / math.sqrt(n)
    dia = h[:, np.eye(15, dtype=bool)].ravel()
    assert np.all(dia.imag == 0)
    assert abs(dia.real.var() - 1.0) < 0.05


def test_odd_moments_vanish():
    # entry symmetry: E H and E (Re H)^3 within 4 sigma of 0 at 10^5 samples
    for spec in (EntryProcessSpec("gaussian-ou", 1), EntryProcessSpec("resampled-gaussian", 2)):
        path = MatrixPath(spec, 77)
        h = snapshot_batch(path, 0.125, 10, np.arange(2000))
        off = np.real(h[:, ~np.eye(10, dtype=bool)]).ravel()
        assert off.size >= 10**5
        for p in (1, 3):
            m = np.mean(off**p)
            s = np.std(off**p) / math.sqrt(off.size)
            assert abs(m) < 4 * s


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind}-b{s.beta}")
@pytest.mark.parametrize("dtau", [0.0, 0.1, 0.5])
def test_covariance_all_kinds(spec, dtau):
    rep = covariance_check(spec, dtau, trials=20000, seed=5)
    assert rep["model"] == pytest.approx(math.exp(-dtau), abs=1e-12)
    tol = 3 * rep["stderr"] + 1e-12
    assert abs(rep["empirical"] - rep["model"]) < tol
    plain_tol = 3 * rep["plain_stderr"] + 1e-12
    assert abs(rep["plain_empirical"] - rep["plain_model"]) < plain_tol


def test_covariance_closed_forms():
    # e^{-0.5} and the small-dtau linearization 1 - dtau
    rep = covariance_check(EntryProcessSpec("gaussian-ou", 1), 0.5, 1000, 1)
    assert rep["model"] == pytest.approx(0.6065306597, abs=1e-10)
    rep = covariance_check(EntryProcessSpec("gaussian-ou", 1), 0.1, 1000, 1)
    assert abs(rep["model"] - (1 - 0.1)) < 0.005


def test_covariance_unimodular_exact_at_zero():
    rep = covariance_check(EntryProcessSpec("resampled-unimodular", 1), 0.0, 1000, 9)
    assert rep["empirical"] == 1.0
    assert rep["stderr"] == 0.0
    # beta=2 phases only carry cos^2 + sin^2 exactness up to one ulp
    rep = covariance_check(EntryProcessSpec("resampled-unimodular", 2), 0.0, 1000, 9)
    assert rep["empirical"] == pytest.approx(1.0, abs=5e-16)
    assert rep["stderr"] < 1e-15


def test_covariance_check_validation():
    spec = EntryProcessSpec("gaussian-ou", 1)
    with pytest.raises(ValueError):
        covariance_check(spec, -0.1, 1000, 0)
    with pytest.raises(ValueError):
        covariance_check(spec, 2.5, 1000, 0)
    with pytest.raises(ValueError):
        covariance_check(spec, 0.1, 999, 0)
