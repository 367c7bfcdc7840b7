import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.special import roots_legendre

from ptguide.errors import DegenerateCoupling, InvalidGeometry, MismatchedGeometry, OutOfDomain
from ptguide.transverse import (
    biorthonormality_residual,
    boundary_residual,
    build_family,
    eval_adjoint,
    eval_mode,
    overlap_matrix,
    threshold,
)


def _non_degenerate(alpha, d):
    r = abs(alpha) * d / np.pi
    return alpha == 0 or abs(r - round(r)) > 1e-3


def test_thresholds_subcritical():
    fam = build_family(1 / 3, 2.0, 2)
    np.testing.assert_allclose(fam.mu, [1 / 3, np.pi / 2, np.pi], rtol=0, atol=1e-15)
    assert fam.index_pair == (0, 1)


def test_neumann_limit():
    fam = build_family(0.0, 2.0, 1)
    np.testing.assert_allclose(fam.mu, [0.0, np.pi / 2])
    x = np.linspace(0, 2, 7)
    np.testing.assert_allclose(eval_mode(fam.modes[0], x), 1.0)
    assert abs(fam.modes[0].A - 0.5) < 1e-15


def test_supercritical_swap():
    fam = build_family(2.0, 2.0, 2)
    np.testing.assert_allclose(fam.mu, [np.pi / 2, 2.0, np.pi])
    assert fam.index_pair == (1, 0)


def test_errors():
    with pytest.raises(InvalidGeometry):
        build_family(0.3, 0.0, 2)
    with pytest.raises(DegenerateCoupling):
        build_family(np.pi / 2, 2.0, 0)
    with pytest.raises(DegenerateCoupling):
        build_family(np.pi * (1 + 1e-10), 2.0, 3)
    with pytest.raises(OutOfDomain):
        eval_mode(build_family(0.3, 2.0, 1).modes[0], 2.5)
    with pytest.raises(MismatchedGeometry):
        overlap_matrix(build_family(0.3, 2.0, 2), build_family(0.3, 3.0, 2), 2, 2)


def test_mode_values():
    fam = build_family(1 / 3, 2.0, 3)
    x = np.linspace(0, 2, 11)
    np.testing.assert_allclose(eval_mode(fam.modes[0], x), np.exp(-1j * x / 3), atol=1e-15)
    assert abs(eval_mode(fam.modes[1], 1.0) - (-2j / (3 * np.pi))) < 1e-15
    for m in fam.modes:
        assert abs(eval_mode(m, 0.0) - 1) < 1e-15


def test_overlap_identity_same_alpha():
    for a in (0.0, 1 / 3, 2.0):
        fam = build_family(a, 2.0, 8)
        np.testing.assert_allclose(overlap_matrix(fam, fam, 8, 8), np.eye(9), atol=1e-12)


def test_overlap_matches_quadrature():
    fa, fb = build_family(1 / 3, 2.0, 6), build_family(-0.3, 2.0, 6)
    t, w = roots_legendre(64)
    x, w = 1 + t, w
    Q = np.array([[np.sum(w * np.conj(eval_adjoint(mi, x)) * eval_mode(mj, x)) for mj in fb.modes] for mi in fa.modes])
    np.testing.assert_allclose(overlap_matrix(fa, fb, 6, 6), Q, atol=1e-10)


@pytest.mark.parametrize("alpha, tol", [(1 / 3, 1e-10), (0.0, 1e-12), (2.0, 1e-10)])
def test_biorthonormality_examples(alpha, tol):
    assert biorthonormality_residual(build_family(alpha, 2.0, 10)) < tol


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-6, 6), d=st.floats(0.5, 4), J=st.integers(0, 20))
def test_biorthonormality_property(alpha, d, J):
    assume(_non_degenerate(alpha, d))
    assert biorthonormality_residual(build_family(alpha, d, J)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-6, 6), d=st.floats(0.5, 4))
def test_boundary_condition_property(alpha, d):
    assume(_non_degenerate(alpha, d))
    for m in build_family(alpha, d, 12).modes:
        assert boundary_residual(m) < 1e-12 * max(1.0, m.mu)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-6, 6), d=st.floats(0.5, 4))
def test_threshold_ordering_property(alpha, d):
    assume(_non_degenerate(alpha, d))
    fam = build_family(alpha, d, 6)
    assert fam.mu[0] ** 2 == threshold(alpha, d) == min(alpha**2, (np.pi / d) ** 2)
    assert fam.mu[0] <= fam.mu[1]
    if abs(alpha) < 2 * np.pi / d:
        assert np.all(np.diff(fam.mu) >= 0)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.01, 6), d=st.floats(0.5, 4))
def test_conjugation_symmetry_property(alpha, d):
    assume(_non_degenerate(alpha, d))
    fp, fm = build_family(alpha, d, 6), build_family(-alpha, d, 6)
    np.testing.assert_allclose(fm.coeffs, np.conj(fp.coeffs), atol=1e-15)
    np.testing.assert_allclose(fm.A, np.conj(fp.A), rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(d=st.floats(0.5, 4), k=st.integers(1, 3), off=st.floats(-1, 1))
def test_degeneracy_guard_property(d, k, off):
    p = np.pi / d
    alpha = k * p * (1 + off * 1e-8)
    gap = abs((k * p) ** 2 - alpha**2) / p**2
    if gap < 0.99e-8:
        with pytest.raises(DegenerateCoupling):
            build_family(alpha, d, 3)
    elif gap > 1.01e-8:
        build_family(alpha, d, 3)
