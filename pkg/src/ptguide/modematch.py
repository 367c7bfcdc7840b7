"""Mode matching for a two-segment square well.

The strip is cut at ``L_minus < 0 < L_plus``.  In each of the four regions the
coupling is constant and the eigenfunction is expanded in that region's
transverse basis; projecting the interface conditions onto the adjoint basis
of the asymptotic region turns the problem into a homogeneous linear system
whose determinant vanishes at the eigenvalues.

Two versions of that system are provided:

* :func:`assemble_system` builds the blocks exactly as written in the
  literature, with ``cos(k x) + B sin(k x)`` in the central regions;
* :class:`SecularDeterminant` uses an equivalent per-channel basis
  (``cos(kx)``, ``sin(kx)/k`` for channels that can oscillate, decaying
  exponentials for the evanescent ones).  Its determinant has the same zeros,
  is free of the spurious zeros at ``lambda = (mu_j^{+-})^2`` and stays well
  conditioned for many channels and long wells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import rootfind
from .errors import IllConditionedNullspace, NoConvergence, NotSymmetric, ThresholdProximity
from .records import EigenvalueRecord, sort_key
from .rootfind import SearchRegion
from .transverse import build_family, eval_mode, overlap_matrix, threshold

TOL_BRANCH = 1e-6
DEFAULT_N = 30


def principal_sqrt(z):
    """Square root with Re >= 0, and Im >= 0 on the negative real axis."""
    z = np.asarray(z, dtype=complex) + 0j  # turns -0.0 imaginary parts into +0.0
    return np.sqrt(z)


@dataclass
class MatchSystem:
    N: int
    lam: complex
    blocks: dict

    @property
    def matrix(self):
        n = self.N + 1
        Z = np.zeros((n, n), dtype=complex)
        b = self.blocks
        return np.block(
            [
                [b["m11"], b["m12"], Z, Z],
                [b["m21"], Z, b["m23"], Z],
                [Z, Z, b["m33"], b["m34"]],
                [Z, b["m42"], Z, b["m44"]],
            ]
        )


class _Setup:
    """Transverse data for one (profile, N); independent of lambda."""

    def __init__(self, profile, N):
        d = profile.d
        self.profile = profile
        self.N = N
        self.f0 = build_family(profile.alpha0, d, N)
        self.fm = build_family(profile.alpha_minus, d, N)
        self.fp = build_family(profile.alpha_plus, d, N)
        self.Op = overlap_matrix(self.f0, self.fp, N, N)
        self.Om = overlap_matrix(self.f0, self.fm, N, N)
        self.mu0 = self.f0.mu
        self.mup = self.fp.mu
        self.mum = self.fm.mu
        self.mu0_sq = threshold(profile.alpha0, d)
        self.branch_points = self.mu0**2
        self.tol_branch = TOL_BRANCH * (np.pi / d) ** 2

    def check_lambda(self, lam):
        gap = np.min(np.abs(lam - self.branch_points))
        if gap < self.tol_branch:
            raise ThresholdProximity(f"lambda={lam} is within {gap:.2e} of a continuum threshold")

    def kappa(self, lam):
        return principal_sqrt(self.mu0**2 - lam)


def assemble_system(profile, lam, N):
    """Blocks of the truncated matching system, channels j = 0..N, as printed."""
    S = _Setup(profile, N)
    lam = complex(lam)
    S.check_lambda(lam)
    kap = S.kappa(lam)[:, None]
    kp = principal_sqrt(lam - S.mup**2)[None, :]
    km = principal_sqrt(lam - S.mum**2)[None, :]
    Lp, Lm = profile.L_plus, profile.L_minus
    Op, Om = S.Op, S.Om
    blocks = {
        "m11": Op.copy(),
        "m12": -Om,
        "m33": kp * Op,
        "m34": -km * Om,
        "m21": (kap * np.cos(Lp * kp) - kp * np.sin(Lp * kp)) * Op,
        "m23": (kap * np.sin(Lp * kp) + kp * np.cos(Lp * kp)) * Op,
        "m42": (kap * np.cos(Lm * km) + km * np.sin(Lm * km)) * Om,
        "m44": (kap * np.sin(Lm * km) - km * np.cos(Lm * km)) * Om,
    }
    return MatchSystem(N, lam, blocks)


def _sinc_len(k, L):
    # sin(k L) / k, finite at k = 0
    return L * np.sinc(k * L / np.pi)


def _channel_values(mu, lam, L, use_exp):
    """Values (f(0), f'(0), f(L), f'(L)) and the same for g, per channel.

    ``L`` is the far end of the central segment (positive or negative).
    """
    k2 = lam - mu**2
    k = principal_sqrt(k2)
    q = principal_sqrt(-k2)
    one = np.ones_like(k)
    zero = np.zeros_like(k)
    # oscillation-capable channels: cos(kx), sin(kx)/k
    f = [one, zero, np.cos(k * L), -k2 * _sinc_len(k, L)]
    g = [zero, one, _sinc_len(k, L), np.cos(k * L)]
    sgn = 1.0 if L > 0 else -1.0
    e = np.exp(-q * abs(L))
    # evanescent channels: exp(-q|x|) decaying away from 0, exp(-q|x - L|) decaying away from L
    fe = [one, -sgn * q, e, -sgn * q * e]
    ge = [e, sgn * q * e, one, sgn * q]
    F = [np.where(use_exp, a, b) for a, b in zip(fe, f)]
    G = [np.where(use_exp, a, b) for a, b in zip(ge, g)]
    return F, G, k, q


class SecularDeterminant:
    """Scaled secular determinant ``lambda -> (log|det|, phase)`` for a square well.

    Channels whose threshold ``mu_j^2`` lies above ``mu_0^2`` of the asymptotic
    region use the exponential basis, so all branch cuts lie on the real half
    line ``[mu_0^2, inf)`` and the function is analytic elsewhere.
    """

    def __init__(self, profile, N=DEFAULT_N):
        self.setup = _Setup(profile, N)
        self.profile = profile
        self.N = N
        S = self.setup
        split = S.mu0_sq * (1 + 1e-12) + 1e-14
        self.exp_p = S.mup**2 > split
        self.exp_m = S.mum**2 > split
        self.row_scale = 1.0 / (1.0 + S.mu0)
        self.n_eval = 0

    @property
    def mu0_sq(self):
        return self.setup.mu0_sq

    def parts(self, lam):
        S = self.setup
        Fp, Gp, kp, qp = _channel_values(S.mup, lam, self.profile.L_plus, self.exp_p)
        Fm, Gm, km, qm = _channel_values(S.mum, lam, self.profile.L_minus, self.exp_m)
        return (Fp, Gp, kp, qp), (Fm, Gm, km, qm)

    def matrix(self, lam):
        lam = complex(lam)
        S = self.setup
        S.check_lambda(lam)
        kap = S.kappa(lam)[:, None]
        (Fp, Gp, _, _), (Fm, Gm, _, _) = self.parts(lam)
        Op, Om = S.Op, S.Om
        rs = self.row_scale[:, None]
        # unknowns (p, s, r, t): + side f/g amplitudes, - side f/g amplitudes
        r1 = [Op * Fp[0], -Om * Fm[0], Op * Gp[0], -Om * Gm[0]]
        r3 = [Op * Fp[1], -Om * Fm[1], Op * Gp[1], -Om * Gm[1]]
        Z = np.zeros_like(Op)
        r2 = [rs * Op * (kap * Fp[2] + Fp[3]), Z, rs * Op * (kap * Gp[2] + Gp[3]), Z]
        r4 = [Z, rs * Om * (kap * Fm[2] - Fm[3]), Z, rs * Om * (kap * Gm[2] - Gm[3])]
        r3 = [rs * b for b in r3]
        return np.block([r1, r2, r3, r4])

    def __call__(self, lam):
        self.n_eval += 1
        M = self.matrix(lam)
        lu, piv = sla.lu_factor(M, check_finite=False)
        diag = np.diag(lu)
        logabs = float(np.sum(np.log(np.abs(diag))))
        perm_sign = (-1) ** int(np.sum(piv != np.arange(len(piv))))
        phase = perm_sign * np.prod(diag / np.abs(diag))
        return logabs, complex(phase)


def secular_logdet(profile, lam, N=DEFAULT_N):
    """Scaled determinant of the matching system: ``(log|det|, phase)``."""
    return SecularDeterminant(profile, N)(lam)


# -- reduced determinants for symmetric wells --------------------------------


def symmetric_reduced_determinants(profile, lam, N=DEFAULT_N):
    """Even and odd scaled determinants of a symmetric well.

    Even eigenfunctions are built from ``cos(k x1)`` in the well, odd ones from
    ``sin(k x1)``; the two (N+1)-dimensional determinants are those of the
    blocks ``m21 + m42`` and ``m23 - m44`` (columns rescaled per channel).
    """
    if not profile.is_symmetric:
        raise NotSymmetric("reduced determinants need alpha_plus == alpha_minus and L_plus == -L_minus")
    return _ReducedDeterminant(profile, N, "even")(lam), _ReducedDeterminant(profile, N, "odd")(lam)


class _ReducedDeterminant:
    def __init__(self, profile, N, parity):
        if not profile.is_symmetric:
            raise NotSymmetric("profile is not a symmetric well")
        self.setup = _Setup(profile, N)
        self.profile = profile
        self.parity = parity
        self.row_scale = 1.0 / (1.0 + self.setup.mu0)

    def __call__(self, lam):
        lam = complex(lam)
        S = self.setup
        S.check_lambda(lam)
        L = self.profile.L_plus
        kap = S.kappa(lam)[:, None]
        k2 = lam - S.mup**2
        k = principal_sqrt(k2)
        q = principal_sqrt(-k2)
        evan = (S.mup**2 > S.mu0_sq * (1 + 1e-12)) & (np.abs(q * L) > 1.0)
        osc = ~evan
        val = np.empty_like(k)
        der = np.empty_like(k)
        t = np.tanh(q[evan] * L)
        if self.parity == "even":
            # cos(kx); evanescent channels divided by cosh(qL)
            val[osc] = np.cos(k[osc] * L)
            der[osc] = -k2[osc] * _sinc_len(k[osc], L)
            val[evan] = 1.0
            der[evan] = q[evan] * t
        else:
            # sin(kx)/k; evanescent channels divided by cosh(qL)
            val[osc] = _sinc_len(k[osc], L)
            der[osc] = np.cos(k[osc] * L)
            val[evan] = t / q[evan]
            der[evan] = 1.0
        M = self.row_scale[:, None] * S.Op * (kap * val[None, :] + der[None, :])
        sign, logabs = np.linalg.slogdet(M)
        return float(logabs), complex(sign)


# -- root finding ------------------------------------------------------------


def _kappa_newton(func, mu0_sq, lam0, tol=1e-11, max_iter=50):
    """Newton on kappa = sqrt(mu0^2 - lambda): analytic through the threshold."""
    def g(kap):
        try:
            return func(mu0_sq - kap * kap)
        except ThresholdProximity as exc:
            raise NoConvergence(str(exc)) from exc

    k0 = principal_sqrt(mu0_sq - lam0)
    if abs(k0) < 1e-8:
        k0 = 1e-3
    kap, it = rootfind.newton(
        g, k0, tol=tol * 1e-3, max_iter=max_iter, accept=lambda z: z.real > -1e-3 and np.isfinite(z)
    )
    if kap.real <= 0:
        raise NoConvergence(f"root at kappa={kap} is not on the physical sheet")
    lam = mu0_sq - kap * kap
    # final polish directly in lambda when away from the threshold
    if abs(kap) > 1e-3:
        try:
            lam, _ = rootfind.newton(func, lam, tol=tol, max_iter=8)
        except NoConvergence:
            pass
    return complex(lam)


def default_search(profile):
    mu0_sq = threshold(profile.alpha0, profile.d)
    return SearchRegion(0.0, mu0_sq - TOL_BRANCH * (np.pi / profile.d) ** 2 * 2)


def _null_residual(sec, lam):
    M = sec.matrix(lam)
    s = np.linalg.svd(M, compute_uv=False)
    return float(s[-1] / s[0])


def find_eigenvalues(profile, N=DEFAULT_N, search=None, samples_per_unit=400, tol=1e-11, max_iter=50):
    """Eigenvalues of the square-well waveguide inside ``search``.

    Real-only regions are scanned on a grid (``samples_per_unit``) for local
    minima of |det|, which seed Newton iterations; rectangles are split by the
    argument principle until each piece holds one zero.  Near-double zeros are
    resolved with a local quadratic model.
    """
    sec = SecularDeterminant(profile, N)
    mu0_sq = sec.mu0_sq
    search = search or default_search(profile)
    roots = []
    failures = 0
    if search.real_only:
        n = max(16, int(np.ceil((search.re_max - search.re_min) * samples_per_unit)) + 1)
        grid = np.linspace(search.re_min, search.re_max, n)
        la = np.array([sec(x)[0] for x in grid])
        cand = [i for i in range(n) if (i == 0 or la[i] <= la[i - 1]) and (i == n - 1 or la[i] <= la[i + 1])]
        for i in cand:
            try:
                lam = _kappa_newton(sec, mu0_sq, grid[i], tol=tol, max_iter=max_iter)
            except NoConvergence:
                failures += 1
                continue
            if search.contains(lam, pad=1e-7) or (abs(lam.imag) < 1e-9 and search.re_min - 1e-7 <= lam.real <= search.re_max + 1e-7):
                roots.append(lam)
        roots = rootfind.dedupe(roots, 1e-8)
        if failures:
            # make sure no zero was missed: compare with the winding count of a thin box
            h = 1e-3 * max(search.re_max - search.re_min, 1e-6)
            box = SearchRegion(search.re_min, search.re_max, -h, h)
            try:
                expected = rootfind.winding_number(sec, box)
            except ValueError:
                expected = len(roots)
            if expected > len(roots):
                raise NoConvergence(
                    f"found {len(roots)} of {expected} zeros in the search region", partial=roots
                )
    else:
        polish = lambda z: _kappa_newton(sec, mu0_sq, z, tol=tol, max_iter=max_iter)
        found = rootfind.find_zeros_in_rect(sec, search, tol=tol, polish=polish)
        for z, mult in found:
            roots.extend([z] * mult)
    roots = [complex(r.real, 0.0) if abs(r.imag) < 1e-12 * max(1, abs(r)) else r for r in roots]
    records = []
    for lam in sorted(roots, key=sort_key):
        pair = abs(lam.imag) > 1e-9 and any(abs(lam.conjugate() - o) < 1e-8 * max(1, abs(lam)) for o in roots)
        records.append(
            EigenvalueRecord(
                value=lam,
                solver="modematch",
                resolution=(N,),
                residual=_null_residual(sec, lam),
                conjugate_pair=pair,
            )
        )
    return records


def count_in_region(profile, region, N=DEFAULT_N):
    """Argument-principle count of zeros of the secular determinant in a rectangle."""
    return rootfind.winding_number(SecularDeterminant(profile, N), region)


def converged_eigenvalues(profile, N=DEFAULT_N, dN=4, search=None, tol_match=1e-8):
    """Eigenvalues at N whose partner at N + dN lies within ``tol_match`` (relative)."""
    lo = find_eigenvalues(profile, N, search)
    hi = find_eigenvalues(profile, N + dN, search)
    out = []
    for r in lo:
        if not hi:
            break
        best = min(hi, key=lambda h: abs(h.value - r.value))
        dist = abs(best.value - r.value)
        r.convergence = dist
        r.resolution = (N, N + dN)
        r.converged = dist < tol_match * max(1.0, abs(r.value))
        out.append(r)
    return out


# -- eigenfunctions ----------------------------------------------------------


@dataclass
class MatchedEigenfunction:
    lam: complex
    profile: object
    N: int
    p: np.ndarray
    s: np.ndarray
    r: np.ndarray
    t: np.ndarray
    a_tilde: np.ndarray  # a_j exp(-kappa_j L_plus): right-region amplitudes at the interface
    d_tilde: np.ndarray  # d_j exp(kappa_j L_minus)
    b: np.ndarray
    c: np.ndarray
    B_plus: np.ndarray
    B_minus: np.ndarray
    residuals: dict = field(default_factory=dict)
    _sec: object = None

    @property
    def a(self):
        with np.errstate(over="ignore"):
            return self.a_tilde * np.exp(self._sec.setup.kappa(self.lam) * self.profile.L_plus)

    @property
    def d(self):
        with np.errstate(over="ignore"):
            return self.d_tilde * np.exp(-self._sec.setup.kappa(self.lam) * self.profile.L_minus)

    def _center(self, x1, plus):
        S = self._sec.setup
        prof = self.profile
        if plus:
            mu, L, use, A, B = S.mup, prof.L_plus, self._sec.exp_p, self.p, self.r
        else:
            mu, L, use, A, B = S.mum, prof.L_minus, self._sec.exp_m, self.s, self.t
        k2 = self.lam - mu**2
        k = principal_sqrt(k2)
        q = principal_sqrt(-k2)
        x = np.asarray(x1, dtype=float)[..., None]
        f = np.where(use, np.exp(-q * np.abs(x)), np.cos(k * x))
        g = np.where(use, np.exp(-q * np.abs(x - L)), x * np.sinc(k * x / np.pi))
        return f * A + g * B  # shape (..., N+1)

    def transverse_amplitudes(self, x1):
        """Expansion coefficients of Psi(x1, .) in the local transverse basis."""
        S = self._sec.setup
        prof = self.profile
        x1 = float(x1)
        kap = S.kappa(self.lam)
        if x1 >= prof.L_plus:
            return self.a_tilde * np.exp(-kap * (x1 - prof.L_plus)), S.f0
        if x1 <= prof.L_minus:
            return self.d_tilde * np.exp(kap * (x1 - prof.L_minus)), S.f0
        if x1 >= 0:
            return self._center(x1, True), S.fp
        return self._center(x1, False), S.fm

    def __call__(self, x1, x2):
        if np.ndim(x1) == 0:
            amp, fam = self.transverse_amplitudes(x1)
            x2 = np.asarray(x2, dtype=float)
            return sum(amp[j] * eval_mode(m, x2) for j, m in enumerate(fam.modes))
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        out = np.empty(x1.shape, dtype=complex)
        for idx in np.ndindex(x1.shape):
            out[idx] = self(float(x1[idx]), x2[idx])
        return out


def _to_printed(A, B, mu, lam, L, use_exp):
    # convert (f, g) amplitudes to the cos / sin coefficients b, b*B
    k = principal_sqrt(lam - mu**2)
    q = principal_sqrt(mu**2 - lam)
    sgn = 1.0 if L > 0 else -1.0
    e = np.exp(-q * abs(L))
    safe_k = np.where(k == 0, 1.0, k)
    s_ = k / np.where(q == 0, 1.0, 1j * q)  # k = s_ * i q, s_ = +-1
    # exp(-q|x|) = cos(kx) + i s_ sgn sin(kx); exp(-q|x - L|) = e (cos(kx) - i s_ sgn sin(kx))
    b_exp = A + B * e
    bB_exp = 1j * s_ * sgn * (A - B * e)
    b_trig = A
    bB_trig = B / safe_k
    b = np.where(use_exp, b_exp, b_trig)
    bB = np.where(use_exp, bB_exp, bB_trig)
    with np.errstate(divide="ignore", invalid="ignore"):
        Bc = bB / b
    return b, Bc


def reconstruct_eigenfunction(profile, record, N=DEFAULT_N, tol_null=1e-6):
    """Null vector of the matching system at ``record.value`` and the fields it defines."""
    lam = complex(record.value if hasattr(record, "value") else record)
    sec = SecularDeterminant(profile, N)
    M = sec.matrix(lam)
    U, sv, Vh = np.linalg.svd(M)
    if sv[-2] < tol_null * sv[0]:
        raise IllConditionedNullspace(
            f"two singular values below {tol_null:g} * sigma_max ({sv[-1]:.2e}, {sv[-2]:.2e}): "
            "possible degeneracy or exceptional point"
        )
    v = Vh[-1].conj()
    n = N + 1
    p, s, r, t = v[:n], v[n : 2 * n], v[2 * n : 3 * n], v[3 * n :]
    S = sec.setup
    (Fp, Gp, _, _), (Fm, Gm, _, _) = sec.parts(lam)
    a_tilde = S.Op @ (p * Fp[2] + r * Gp[2])
    d_tilde = S.Om @ (s * Fm[2] + t * Gm[2])
    # normalise so the right tail's leading channel amplitude is 1 when possible
    scale = a_tilde[0] if abs(a_tilde[0]) > 1e-14 * np.max(np.abs(a_tilde)) else np.max(np.abs(v))
    p, s, r, t, a_tilde, d_tilde = (x / scale for x in (p, s, r, t, a_tilde, d_tilde))
    b, Bp = _to_printed(p, r, S.mup, lam, profile.L_plus, sec.exp_p)
    c, Bm = _to_printed(s, t, S.mum, lam, profile.L_minus, sec.exp_m)
    ef = MatchedEigenfunction(lam, profile, N, p, s, r, t, a_tilde, d_tilde, b, c, Bp, Bm, _sec=sec)
    ef.residuals = matching_residuals(ef)
    ef.residuals["sigma_ratio"] = float(sv[-1] / sv[0])
    return ef


def matching_residuals(ef):
    """Projected mismatch of value and x1-derivative at the three interfaces.

    Each entry is the largest projected mismatch relative to the size of the
    projected value and (scaled) slope at that interface.
    """
    sec = ef._sec
    S = sec.setup
    lam = ef.lam
    kap = S.kappa(lam)
    (Fp, Gp, _, _), (Fm, Gm, _, _) = sec.parts(lam)
    Op, Om = S.Op, S.Om

    def rel(x, val, der):
        ref = max(np.max(np.abs(val)), np.max(np.abs(der)) / (1.0 + S.mu0[-1]), 1e-300)
        return float(np.max(np.abs(x)) / ref)

    plus0 = Op @ (ef.p * Fp[0] + ef.r * Gp[0])
    minus0 = Om @ (ef.s * Fm[0] + ef.t * Gm[0])
    dplus0 = Op @ (ef.p * Fp[1] + ef.r * Gp[1])
    dminus0 = Om @ (ef.s * Fm[1] + ef.t * Gm[1])
    plusL = Op @ (ef.p * Fp[2] + ef.r * Gp[2])
    dplusL = Op @ (ef.p * Fp[3] + ef.r * Gp[3])
    minusL = Om @ (ef.s * Fm[2] + ef.t * Gm[2])
    dminusL = Om @ (ef.s * Fm[3] + ef.t * Gm[3])
    return {
        "value_0": rel(plus0 - minus0, plus0, dplus0),
        "slope_0": rel(dplus0 - dminus0, plus0, dplus0),
        "value_L+": rel(plusL - ef.a_tilde, plusL, dplusL),
        "slope_L+": rel(dplusL + kap * ef.a_tilde, plusL, dplusL),
        "value_L-": rel(minusL - ef.d_tilde, minusL, dminusL),
        "slope_L-": rel(dminusL - kap * ef.d_tilde, minusL, dminusL),
    }
