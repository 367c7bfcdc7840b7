import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import roots_legendre

from ptguide import modematch as MM
from ptguide.errors import NotSymmetric, ThresholdProximity
from ptguide.profiles import SquareWellProfile
from ptguide.rootfind import SearchRegion, winding_number
from ptguide.transverse import build_family, eval_adjoint, eval_mode, threshold

WELL = SquareWellProfile(1 / 3, -0.3, -0.3, -2.0, 2.0, 2.0)
ASYM = SquareWellProfile(1.0, 0.4, 0.7, -1.5, 2.5, 2.0)
BROKEN = SquareWellProfile(1.59, 0.89, 0.89, -2.5, 2.5, 2.0)


def printed_blocks(profile, lam, N, flip_plus=(), flip_minus=()):
    """Second transcription of the block system, with quadrature overlaps."""
    d = profile.d
    t, w = roots_legendre(64)
    x = 0.5 * d * (t + 1)
    w = 0.5 * d * w
    f0 = build_family(profile.alpha0, d, N)
    fp = build_family(profile.alpha_plus, d, N)
    fm = build_family(profile.alpha_minus, d, N)

    def ov(fam):
        return np.array([[np.sum(w * np.conj(eval_adjoint(a, x)) * eval_mode(b, x)) for b in fam.modes] for a in f0.modes])

    Op, Om = ov(fp), ov(fm)
    n = N + 1
    B = {k: np.zeros((n, n), dtype=complex) for k in ("m11", "m12", "m21", "m23", "m33", "m34", "m42", "m44")}
    Lp, Lm = profile.L_plus, profile.L_minus
    for i in range(n):
        kap = cmath.sqrt(f0.modes[i].mu ** 2 - lam)
        for j in range(n):
            kp = cmath.sqrt(lam - fp.modes[j].mu ** 2)
            km = cmath.sqrt(lam - fm.modes[j].mu ** 2)
            kp = -kp if j in flip_plus else kp
            km = -km if j in flip_minus else km
            B["m11"][i, j] = Op[i, j]
            B["m12"][i, j] = -Om[i, j]
            B["m33"][i, j] = kp * Op[i, j]
            B["m34"][i, j] = -km * Om[i, j]
            B["m21"][i, j] = (kap * cmath.cos(Lp * kp) - kp * cmath.sin(Lp * kp)) * Op[i, j]
            B["m23"][i, j] = (kap * cmath.sin(Lp * kp) + kp * cmath.cos(Lp * kp)) * Op[i, j]
            B["m42"][i, j] = (kap * cmath.cos(Lm * km) + km * cmath.sin(Lm * km)) * Om[i, j]
            B["m44"][i, j] = (kap * cmath.sin(Lm * km) - km * cmath.cos(Lm * km)) * Om[i, j]
    return B


def full(B):
    Z = np.zeros_like(B["m11"])
    return np.block([[B["m11"], B["m12"], Z, Z], [B["m21"], Z, B["m23"], Z], [Z, Z, B["m33"], B["m34"]], [Z, B["m42"], Z, B["m44"]]])


def sigma_ratio(M):
    # equilibrate rows and columns: the printed blocks grow like cosh(k L)
    for _ in range(3):
        M = M / np.linalg.norm(M, axis=1, keepdims=True)
        M = M / np.linalg.norm(M, axis=0, keepdims=True)
    s = np.linalg.svd(M, compute_uv=False)
    return s[-1] / s[0]


def test_blocks_match_independent_transcription():
    sys_ = MM.assemble_system(WELL, 0.05, 8)
    ref = printed_blocks(WELL, 0.05, 8)
    scale = max(np.max(np.abs(b)) for b in ref.values())
    for k, v in ref.items():
        assert np.max(np.abs(sys_.blocks[k] - v)) < 1e-13 * scale, k
    M = sys_.matrix
    n = 9
    assert np.all(M[:n, 2 * n :] == 0) and np.all(M[n : 2 * n, n : 2 * n] == 0)
    assert np.all(M[2 * n : 3 * n, : 2 * n] == 0) and np.all(M[3 * n :, ::2][:, :0] == 0)
    assert np.all(M[3 * n :, :n] == 0) and np.all(M[3 * n :, 2 * n : 3 * n] == 0)


def test_unperturbed_blocks_are_diagonal():
    p = SquareWellProfile(1 / 3, 1 / 3, 1 / 3, -1.0, 1.0, 2.0)
    b = MM.assemble_system(p, 0.05, 6).blocks
    np.testing.assert_allclose(b["m11"], np.eye(7), atol=1e-13)
    for k in ("m21", "m23", "m33"):
        assert np.max(np.abs(b[k] - np.diag(np.diag(b[k])))) < 1e-13 * np.max(np.abs(b[k]))


@pytest.mark.parametrize("N", [10, 20])
def test_unperturbed_determinant_nonzero(N):
    p = SquareWellProfile(1 / 3, 1 / 3, 1 / 3, -2.0, 2.0, 2.0)
    lam = np.linspace(0.001, 1 / 9 - 0.005, 60)
    la = np.array([MM.secular_logdet(p, x, N)[0] for x in lam])
    assert np.all(np.isfinite(la))
    assert np.min(la) > np.max(la) - 12


@pytest.mark.parametrize("alpha", [1 / 3, 1.0, 2.0])
def test_unperturbed_no_eigenvalues(alpha):
    p = SquareWellProfile(alpha, alpha, alpha, -2.0, 2.0, 2.0)
    assert MM.find_eigenvalues(p, 16) == []


def test_logdet_continuity():
    lam = 0.02 + 0.01j
    l0, p0 = MM.secular_logdet(WELL, lam, 12)
    diffs = []
    for h in (1e-3, 1e-5, 1e-7):
        l1, p1 = MM.secular_logdet(WELL, lam + h, 12)
        diffs.append(abs(l1 - l0) + abs(p1 - p0))
    assert diffs[0] > diffs[1] > diffs[2] and diffs[2] < 1e-5


def test_logdet_deterministic():
    assert MM.secular_logdet(ASYM, 0.5 + 0.1j, 14) == MM.secular_logdet(ASYM, 0.5 + 0.1j, 14)


def test_threshold_guard():
    with pytest.raises(ThresholdProximity):
        MM.secular_logdet(WELL, 1 / 9, 8)
    with pytest.raises(ThresholdProximity):
        MM.assemble_system(WELL, (np.pi / 2) ** 2 + 1e-9, 8)


def test_winding_around_eigenvalue():
    recs = MM.find_eigenvalues(ASYM, 20)
    assert recs
    z = recs[0].value
    box = SearchRegion(z.real - 1e-3, z.real + 1e-3, -1e-3, 1e-3)
    assert winding_number(MM.SecularDeterminant(ASYM, 20), box) == 1


def test_symmetric_well_approaches_well_threshold():
    vals = []
    for L in (1.0, 2.0, 4.0, 8.0):
        p = SquareWellProfile(1.0, 0.5, 0.5, -L, L, 2.0)
        vals.append(MM.find_eigenvalues(p, 20)[0].real)
    assert np.all(np.diff(vals) < 0)
    assert all(v > 0.25 for v in vals)
    assert vals[-1] - 0.25 < 0.05


def test_broken_regime_conjugate_pair():
    region = SearchRegion(0.0, threshold(1.59, 2.0) - 1e-3, -0.5, 0.5)
    recs = MM.find_eigenvalues(BROKEN, 20, region)
    cplx = [r.value for r in recs if abs(r.imag) > 1e-6]
    assert len(cplx) == 2
    assert abs(cplx[0] - np.conj(cplx[1])) < 1e-9
    assert all(r.conjugate_pair for r in recs if abs(r.imag) > 1e-6)


@pytest.mark.parametrize("profile", [WELL, ASYM])
def test_printed_system_singular_at_eigenvalues(profile):
    # small N keeps the printed (unscaled) blocks well conditioned
    recs = MM.find_eigenvalues(profile, 3)
    assert recs
    for r in recs:
        assert sigma_ratio(full(printed_blocks(profile, r.value, 3))) < 1e-12
        assert sigma_ratio(full(printed_blocks(profile, r.value + 1e-3, 3))) > 1e-7


def test_branch_flip_invariance():
    lam = MM.find_eigenvalues(ASYM, 3)[0].value
    n = 4
    plus, minus = (0, 3), (1, 2)
    M = full(printed_blocks(ASYM, lam, 3))
    F = full(printed_blocks(ASYM, lam, 3, flip_plus=plus, flip_minus=minus))
    # a flip only changes the sign of the matching bB / cB column
    D = np.ones(4 * n)
    D[[2 * n + j for j in plus]] = -1
    D[[3 * n + j for j in minus]] = -1
    assert np.max(np.abs(F - M * D)) < 1e-13 * np.max(np.abs(M))
    assert sigma_ratio(F) < 1e-12
    assert abs(np.linalg.slogdet(F)[1] - np.linalg.slogdet(M)[1]) < 1e-10


def test_truncation_convergence():
    p = SquareWellProfile(1.0, 0.5, 0.5, -2.0, 2.0, 2.0)
    a = MM.find_eigenvalues(p, 30)
    b = MM.find_eigenvalues(p, 34)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert abs(x.value - y.value) < 1e-8


def test_reconstruction_residuals_and_decay():
    rec = MM.find_eigenvalues(ASYM, 24)[0]
    ef = MM.reconstruct_eigenfunction(ASYM, rec, 24)
    assert max(v for k, v in ef.residuals.items() if k != "sigma_ratio") < 1e-8
    kap = np.sqrt(threshold(1.0, 2.0) - rec.real)
    x1 = np.linspace(ASYM.L_plus + 2, ASYM.L_plus + 10, 9)
    amp = np.array([abs(ef(x, 0.7)) for x in x1])
    rate = -np.polyfit(x1, np.log(amp), 1)[0]
    assert abs(rate - kap) < 0.01 * kap
    x2 = np.linspace(0, 2, 21)
    far = np.array([ef(ASYM.L_plus + 12, t) for t in x2])
    psi0 = np.exp(-1j * x2)
    c = (np.conj(psi0) @ far) / (np.conj(psi0) @ psi0)
    assert np.max(np.abs(far - c * psi0)) < 1e-3 * np.max(np.abs(far))


def test_symmetric_reduction_matches_full():
    p = SquareWellProfile(1.0, 0.2, 0.2, -2.0, 2.0, 2.0)
    full_roots = [r.value for r in MM.find_eigenvalues(p, 16)]
    assert len(full_roots) >= 2
    for z in full_roots:
        (le, _), (lo, _) = MM.symmetric_reduced_determinants(p, z, 16)
        (le2, _), (lo2, _) = MM.symmetric_reduced_determinants(p, z + 0.02, 16)
        assert min(le - le2, lo - lo2) < -8
    # lowest root belongs to the even family and its eigenfunction is even
    z0 = full_roots[0]
    (le, _), (lo, _) = MM.symmetric_reduced_determinants(p, z0, 16)
    assert le < lo
    ef = MM.reconstruct_eigenfunction(p, z0, 16)
    xs = np.linspace(0.1, 4.0, 12)
    vals = np.array([ef(x, 0.5) for x in xs])
    mirror = np.array([ef(-x, 0.5) for x in xs])
    assert np.max(np.abs(vals - mirror)) < 1e-8 * np.max(np.abs(vals))


def test_reduced_requires_symmetry():
    with pytest.raises(NotSymmetric):
        MM.symmetric_reduced_determinants(ASYM, 0.5, 8)


def test_converged_eigenvalues_reports_distance():
    recs = MM.converged_eigenvalues(ASYM, 20, 4)
    assert recs and all(np.isfinite(r.convergence) for r in recs)
    assert recs[0].resolution == (20, 24)


wells = st.builds(
    lambda a0, am, ap, lm, lp: SquareWellProfile(a0, am, ap, -lm, lp, 2.0),
    st.sampled_from([0.5, 1.0, 1.4, 1.8]),
    st.floats(-2.5, 2.5),
    st.floats(-2.5, 2.5),
    st.floats(0.5, 2.5),
    st.floats(0.5, 2.5),
)


def _region(p):
    return SearchRegion(0.0, threshold(p.alpha0, p.d) - 2e-3, -0.4, 0.4)


@settings(max_examples=8, deadline=None)
@given(p=wells)
def test_conjugation_and_adjoint_property(p):
    a = [r.value for r in MM.find_eigenvalues(p, 10, _region(p))]
    b = [r.value for r in MM.find_eigenvalues(p.negated(), 10, _region(p))]
    assert len(a) == len(b)
    for z in a:
        assert min(abs(np.conj(z) - w) for w in a) < 1e-9 * max(1, abs(z))
        assert min(abs(np.conj(z) - w) for w in b) < 1e-9 * max(1, abs(z))


@settings(max_examples=8, deadline=None)
@given(p=wells)
def test_argument_principle_count_property(p):
    region = _region(p)
    roots = MM.find_eigenvalues(p, 10, region)
    assert MM.count_in_region(p, region, 10) == len(roots)
