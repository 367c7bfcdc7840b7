import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptguide import collocation as C
from ptguide import diffmat
from ptguide.profiles import GaussianPoly, OddCompact, SmoothProfile


def gauss_profile(alpha0, eps, w=1.0, coeffs=(-1.0,), d=2.0):
    return SmoothProfile(alpha0, eps, GaussianPoly(coeffs, w), d)


def test_constant_alpha_separable():
    p = gauss_profile(1 / 3, 0.0)
    op = C.assemble(p, "hermite", 16, 10)
    ev = np.array(C.solve_spectrum(op))
    e1 = np.linalg.eigvals(-op.D2_x1)
    e2 = np.linalg.eigvals(-diffmat.robin_d2_block(10, 2.0, 1 / 3))
    sums = (e1[:, None] + e2[None, :]).ravel()
    dist = np.array([np.min(np.abs(sums - z)) for z in ev])
    assert np.max(dist / np.maximum(1, np.abs(ev))) < 1e-6
    blocks = op.D2_x2_blocks
    assert all(np.array_equal(b, blocks[0]) for b in blocks)


@pytest.mark.parametrize("kind", ["hermite", "fourier"])
def test_conjugate_operator(kind):
    p = gauss_profile(0.7, 0.4)
    L = C.assemble(p, kind, 12, 8).L
    Lm = C.assemble(p.negated(), kind, 12, 8).L
    np.testing.assert_array_equal(Lm, np.conj(L))


def test_parity_conjugation():
    p = gauss_profile(0.7, 0.4, coeffs=(-1.0, 0.5))
    N1, N2 = 10, 8
    L = C.assemble(p, "hermite", N1, N2).L
    R = np.eye(N2)[::-1]
    P = np.kron(np.eye(N1), R)
    np.testing.assert_allclose(P @ L @ P, np.conj(L), atol=1e-10 * np.max(np.abs(L)))


def test_solve_spectrum_small_oracles():
    z = C.solve_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(z, [0, 0], atol=1e-12)
    z = C.solve_spectrum(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(z, [-1, 1], atol=1e-12)


def test_solve_spectrum_size_cap():
    with pytest.raises(ValueError):
        C.solve_spectrum(np.eye(10), size_cap=5)


def test_filter_constant_profile_empty():
    p = gauss_profile(1 / 3, 0.0)
    assert C.spectrum(p, "hermite", 32, 12, refine=(8, 4)) == []


def test_filter_zero_tolerance_empty():
    rng = np.random.default_rng(1)
    lo = rng.normal(size=30) * 0.01
    hi = rng.normal(size=30) * 0.01
    assert C.filter_physical(lo, hi, 1.0, tol_cluster=0.0) == []


def test_filter_keeps_only_partnered():
    recs = C.filter_physical([0.2, 0.5 + 0.1j, 0.5 - 0.1j, 2.0], [0.2 + 1e-9, 0.5 + 0.1j, 0.5 - 0.1j, 0.9], 1.0)
    vals = [r.value for r in recs]
    assert len(vals) == 3 and all(r.real < 1 for r in vals)
    assert sum(r.conjugate_pair for r in recs) == 2


def test_gaussian_dip_single_eigenvalue():
    p = gauss_profile(1 / 3, 0.5)
    recs = C.spectrum(p, "hermite")
    assert len(recs) == 1 and abs(recs[0].imag) < 1e-8 and recs[0].real < 1 / 9


def test_grid_family_agreement():
    p = gauss_profile(1.2, 1.0)
    h = C.spectrum(p, "hermite", 56, 16, param=1.25)
    f = C.spectrum(p, "fourier", 56, 16, param=14.0)
    assert len(h) == len(f) == 1
    assert abs(h[0].value - f[0].value) < 1e-6 * abs(h[0].value)
    assert abs(h[0].imag) < 1e-8


def test_odd_beta_real_spectrum():
    p = SmoothProfile(0.0, 1.0, OddCompact(1.0, 3.0), 2.0)
    recs = C.spectrum(p, "fourier", 48, 12, param=10.0, refine=(16, 4))
    assert all(abs(r.imag) < 1e-8 for r in recs)
    assert len(recs) == 0


@settings(max_examples=6, deadline=None)
@given(
    alpha0=st.sampled_from([0.5, 1.0, 1.3]),
    eps=st.floats(0.5, 1.5),
    c1=st.floats(-1, 1),
)
def test_spectrum_symmetries_property(alpha0, eps, c1):
    p = gauss_profile(alpha0, eps, coeffs=(-1.0, c1))
    a = [r.value for r in C.spectrum(p, "hermite", 24, 10, refine=(8, 4), tol_cluster=1e-3)]
    b = [r.value for r in C.spectrum(p.negated(), "hermite", 24, 10, refine=(8, 4), tol_cluster=1e-3)]
    for z in a:
        assert min(abs(np.conj(z) - w) for w in a) < 1e-8 * max(1, abs(z))
    assert len(a) == len(b)
    for z in a:
        assert min(abs(np.conj(z) - w) for w in b) < 1e-8 * max(1, abs(z))
