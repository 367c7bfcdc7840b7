"""Weak-coupling asymptotics for alpha = alpha0 + epsilon * beta.

Everything the small-epsilon theory needs is a handful of quadratic forms in
beta.  With ``s_j = sqrt(mu_j**2 - mu_0**2)`` the pairings with the auxiliary
functions are

    <beta v_0> = -1/2 int int |x - t| beta(x) beta(t)
    <beta v_j> = 1/(2 s_j) int int exp(-s_j |x - t|) beta(x) beta(t)
               = 1/(2 pi) int |beta^(xi)|**2 / (xi**2 + s_j**2) dxi

Step shapes have closed forms; gaussian shapes use their exact Fourier
transform.  The channel series in tau decays only like j**-2, so the part
beyond the cutoff is summed from the large-s expansion of <beta v_j> instead
of being dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P
from scipy import integrate, special

from .errors import DegenerateCoupling, InvalidChannel, NoEigenvaluePredicted, SeriesNotConverged
from .profiles import GaussianPoly, StepShape
from .transverse import check_degenerate

J_MAX = 200
TOL_ZERO_MOMENT = 1e-10
TOL_TAIL = 1e-6
TAN_CAP = 1e6
QUAD_RTOL = 1e-12
CHEB_DEGREE = 256
FOURIER_NODES = 800
TAIL_TERMS = 5
TAIL_DIRECT = 200_000


@dataclass(frozen=True)
class WeakCouplingInput:
    alpha0: float
    d: float
    beta: object
    J_max: int = J_MAX
    quadrature: dict = field(default_factory=lambda: {"rule": "chebyshev", "nodes": CHEB_DEGREE, "radius": None})

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("strip width must be positive")
        if self.J_max < 1:
            raise ValueError("J_max must be at least 1")

    @property
    def regime(self):
        p = np.pi / self.d
        if abs(self.alpha0) == p:
            raise DegenerateCoupling("|alpha0| = pi/d: neither regime applies")
        return "subcritical" if abs(self.alpha0) < p else "supercritical"

    @property
    def mu0_sq(self):
        return min(abs(self.alpha0), np.pi / self.d) ** 2

    @classmethod
    def from_profile(cls, profile, **kw):
        """Smooth profiles give (alpha0, beta); a square well is alpha0 + 1 * step."""
        if hasattr(profile, "as_step"):
            return cls(profile.alpha0, profile.d, profile.as_step(), **kw)
        return cls(profile.alpha0, profile.d, profile.beta, **kw)


@dataclass(frozen=True)
class CaseLabel:
    label: str
    moment: float
    tau: float = float("nan")
    tail: float = float("nan")

    @property
    def has_eigenvalue(self):
        return self.label in ("B1", "B3", "C1")


def _support(beta, radius=None):
    lo, hi = beta.support
    if radius is not None and isinstance(beta, GaussianPoly):
        lo, hi = beta.shift - radius, beta.shift + radius
    return float(lo), float(hi)


def moment(beta, method="auto"):
    """<beta>: closed form where the shape provides one, adaptive quadrature otherwise."""
    if method == "auto" and hasattr(beta, "moment"):
        return float(beta.moment())
    lo, hi = _support(beta)
    pts = [b for b in getattr(beta, "breakpoints", ()) if lo < b < hi]
    val, _ = integrate.quad(lambda t: float(beta(t)), lo, hi, points=pts or None, epsabs=0, epsrel=QUAD_RTOL, limit=400)
    return float(val)


def v_function(beta, j, mu_j, mu0, x1):
    """v_j(x1): convolution of beta with -|x|/2 (j = 0) or exp(-s|x|)/(2s) (j >= 1)."""
    if j >= 1 and not mu_j > mu0:
        raise InvalidChannel(f"channel {j} needs mu_j > mu_0 (got {mu_j} <= {mu0})")
    lo, hi = _support(beta)
    x1 = float(x1)
    if j == 0:
        kern = lambda t: -0.5 * abs(x1 - t) * float(beta(t))
        scale = 1.0
    else:
        s = np.sqrt(mu_j**2 - mu0**2)
        kern = lambda t: np.exp(-s * abs(x1 - t)) * float(beta(t))
        scale = 0.5 / s
    pts = sorted({b for b in getattr(beta, "breakpoints", ()) if lo < b < hi} | ({x1} if lo < x1 < hi else set()))
    val, _ = integrate.quad(kern, lo, hi, points=pts or None, epsabs=0, epsrel=QUAD_RTOL, limit=400)
    return scale * val


# ---------------------------------------------------------------- pairings

def _shifted_coeffs(beta):
    # polynomial in y = x - shift
    q = np.zeros(len(beta.coeffs))
    for m, pm in enumerate(beta.coeffs):
        q[: m + 1] += pm * P.polypow([beta.shift, 1.0], m)[: m + 1]
    return q


def gaussian_ft_sq(beta, xi):
    """|FT beta|^2 at ``xi`` for a GaussianPoly shape, exact.

    With y = x - shift the transform is sqrt(pi w) exp(-w xi^2/4) E[q(Y)] where
    Y is normal with mean -i w xi/2 and variance w/2.
    """
    xi = np.asarray(xi, dtype=float)
    q = _shifted_coeffs(beta)
    w = beta.w
    m = -0.5j * w * xi
    var = 0.5 * w
    M_prev, M = np.zeros_like(m), np.ones_like(m)
    total = q[0] * M
    for n in range(1, q.size):
        M_prev, M = M, m * M + (n - 1) * var * M_prev
        total = total + q[n] * M
    ft = np.sqrt(np.pi * w) * np.exp(-w * xi**2 / 4) * total
    return np.abs(ft) ** 2


class _FourierPairing:
    """<beta v_j> for many s from one Gauss-Legendre rule in xi (gaussian shapes)."""

    def __init__(self, beta, n=FOURIER_NODES):
        deg = max(len(beta.coeffs) - 1, 0)
        xmax = np.sqrt(160.0 / beta.w) * (1 + 0.5 * deg)
        t, wt = np.polynomial.legendre.leggauss(n)
        self.xi = 0.5 * xmax * (t + 1)
        self.wt = 0.5 * xmax * wt
        self.F = gaussian_ft_sq(beta, self.xi)

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = (self.F * self.wt) @ (1.0 / (self.xi[:, None] ** 2 + s[None, :] ** 2))
        return out / np.pi


class _QuadPairing:
    """Fallback: numerical transform on the support, adaptive quadrature in xi."""

    def __init__(self, beta, n=400):
        lo, hi = _support(beta)
        t, wt = np.polynomial.legendre.leggauss(n)
        self.x = lo + 0.5 * (hi - lo) * (t + 1)
        self.bw = 0.5 * (hi - lo) * wt * beta(self.x)

    def F(self, xi):
        return abs(np.sum(self.bw * np.exp(-1j * xi * self.x))) ** 2

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = [integrate.quad(lambda xi: self.F(xi) / (xi * xi + si * si), 0, np.inf, epsrel=QUAD_RTOL, limit=400)[0] for si in s]
        return np.array(out) / np.pi


def pairing_function(beta):
    """Callable s -> <beta v> with decay rate s (vectorised)."""
    if isinstance(beta, StepShape):
        return lambda s: np.atleast_1d(beta.pair_kernel(np.atleast_1d(np.asarray(s, dtype=float))))
    if isinstance(beta, GaussianPoly):
        return _FourierPairing(beta)
    return _QuadPairing(beta)


def beta_v_pairing(beta, s):
    """<beta v_j> for decay rate(s) ``s = sqrt(mu_j^2 - mu_0^2) > 0``."""
    return pairing_function(beta)(s)


def beta_v0_pairing(beta, degree=CHEB_DEGREE):
    """<beta v_0> = -1/2 int int |x - t| beta beta.

    Uses int int |x - t| b b = 2 int b(x) (x B1(x) - B2(x)) with the
    cumulative integrals B1 = int^x b, B2 = int^x t b taken on a Chebyshev
    interpolant over the support.
    """
    if isinstance(beta, StepShape):
        return float(beta.abs_kernel())
    lo, hi = _support(beta)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    f = lambda u: beta(mid + half * u)
    cb = C.chebinterpolate(f, degree)
    ct = C.chebinterpolate(lambda u: (mid + half * u) * beta(mid + half * u), degree)
    B1 = C.chebint(cb, lbnd=-1) * half
    B2 = C.chebint(ct, lbnd=-1) * half
    x = C.Chebyshev([mid, half]).coef
    inner = C.chebsub(C.chebmul(x, B1), B2)
    total = C.chebint(C.chebmul(cb, inner), lbnd=-1) * half
    return float(-C.chebval(1.0, total))


# ---------------------------------------------------------------- tau

def _expansion(beta):
    terms = beta.large_s_expansion(TAIL_TERMS) if hasattr(beta, "large_s_expansion") else []
    if not terms:
        raise SeriesNotConverged("shape provides no large-s expansion for the series tail")
    return terms


def _asym(terms, s):
    s = np.asarray(s, dtype=float)
    return sum(c * s ** (-p) for c, p in terms)


def _series_layout(inp):
    """Return (lead, weight(j), rate(j), parity factor) describing tau = lead + sum w_j E(s_j)."""
    a0, d = inp.alpha0, inp.d
    p = np.pi / d
    if inp.regime == "subcritical":
        mu0 = abs(a0)
        half = a0 * d / 2
        tan_e = np.tan(half)
        cot_e = np.cos(half) / np.sin(half) if np.sin(half) != 0 else np.inf
        if max(abs(tan_e), abs(cot_e)) > TAN_CAP:
            raise SeriesNotConverged(f"tan factors of size {max(abs(tan_e), abs(cot_e)):.3g} in the channel series")
        t_odd = -cot_e

        def weight(j):
            j = np.asarray(j, dtype=float)
            mu = j * p
            t = np.where(j % 2 == 0, tan_e, t_odd)
            return (2 * a0 / d) * mu**2 / (mu**2 - mu0**2) * t

        def rate(j):
            return np.sqrt((np.asarray(j, dtype=float) * p) ** 2 - mu0**2)

        return "v0", weight, rate, (2 * a0 / d * tan_e, 2 * a0 / d * t_odd), 1.0
    mu0, mu1 = p, abs(a0)
    gap = mu1**2 - mu0**2
    pref = 8 * np.pi**2 / (gap * d**4)

    def weight(j):
        mu = 2 * np.asarray(j, dtype=float) * p
        return pref * mu**2 / (mu**2 - mu1**2)

    def rate(j):
        return np.sqrt((2 * np.asarray(j, dtype=float) * p) ** 2 - mu0**2)

    return "v1", weight, rate, (pref, pref), 2.0


def tau_constant(inp):
    """(tau, tail_estimate) for the weak-coupling input.

    The first ``J_max`` channels are summed with exact pairings.  Channels
    beyond are summed from the large-s expansion of the pairing: directly up to
    ``TAIL_DIRECT`` and by Hurwitz zeta sums after that.  The estimate combines
    the expansion's error at the cutoff channel and the next-order size of the
    zeta remainder.
    """
    check_degenerate(inp.alpha0, inp.d)
    a0, d, beta = inp.alpha0, inp.d, inp.beta
    kind, weight, rate, (c_even, c_odd), spacing = _series_layout(inp)
    pair = pairing_function(beta)
    J = int(inp.J_max)
    j = np.arange(1, J + 1)
    w = weight(j)
    s = rate(j)
    E = pair(s)
    partial = float(np.sum(w * E))
    if kind == "v0":
        lead = 2 * a0**2 * beta_v0_pairing(beta)
    else:
        mu0, mu1 = np.pi / d, abs(a0)
        s1 = np.sqrt(mu1**2 - mu0**2)
        lead = 2 * a0 * np.pi**2 / np.tan(a0 * d / 2) / ((mu1**2 - mu0**2) * d**3) * float(pair(s1)[0])
    terms = _expansion(beta)
    if terms[0][0] == 0.0:
        # ||beta||^2 = 0: every pairing vanishes
        return 0.0, 0.0
    # exponentially small parts of the step pairing and the tail of the asymptotic
    # expansion both show up as the misfit at the cutoff channel
    misfit = abs(w[-1] * (E[-1] - _asym(terms, s[-1])))
    jt = np.arange(J + 1, TAIL_DIRECT + 1)
    direct = float(np.sum(weight(jt) * _asym(terms, rate(jt))))
    # remainder: w_j E(s_j) ~ c_par * c0 / (spacing * j * pi/d)^2 with c0 the leading expansion coefficient
    c0, p0 = terms[0]
    k = (np.pi * spacing / d) ** -p0 * c0
    m0 = TAIL_DIRECT + 1
    if kind == "v0":
        # parity split: even j = 2m, odd j = 2m - 1
        even = c_even * 2.0**-p0 * special.zeta(p0, np.ceil(m0 / 2))
        odd = c_odd * 2.0**-p0 * special.zeta(p0, np.ceil((m0 + 1) / 2) - 0.5)
        rem = k * (even + odd)
    else:
        rem = k * c_even * special.zeta(p0, m0)
    sub = terms[1:] or [(0.0, p0 + 1)]
    rel_next = abs(sub[0][0] / c0) * (np.pi * spacing * TAIL_DIRECT / d) ** -(sub[0][1] - p0) + (d / (np.pi * TAIL_DIRECT)) ** 2
    tail_est = misfit * J + abs(rem) * rel_next
    tau = lead + partial + direct + rem
    if tail_est > TOL_TAIL * abs(tau):
        raise SeriesNotConverged(f"tail estimate {tail_est:.3g} exceeds {TOL_TAIL:g} * |tau| = {TOL_TAIL * abs(tau):.3g}")
    return float(tau), float(tail_est)


def tau_partial_sums(inp, J_values):
    """Raw partial sums (no tail) for the listed cutoffs, for convergence diagnostics."""
    kind, weight, rate, _, _ = _series_layout(inp)
    pair = pairing_function(inp.beta)
    Jm = int(max(J_values))
    j = np.arange(1, Jm + 1)
    cums = np.cumsum(weight(j) * pair(rate(j)))
    return np.array([cums[int(J) - 1] for J in J_values])


# ---------------------------------------------------------------- cases

def classify(inp):
    """Case label from the sign conditions of the weak-coupling theorem."""
    a0 = inp.alpha0
    m = moment(inp.beta)
    if a0 == 0:
        return CaseLabel("A", m)
    check_degenerate(a0, inp.d)
    if inp.regime == "subcritical":
        if abs(m) >= TOL_ZERO_MOMENT:
            return CaseLabel("B1" if a0 * m < 0 else "B2", m)
        tau, tail = tau_constant(inp)
        return CaseLabel("B3" if tau > 0 else "B4", m, tau, tail)
    tau, tail = tau_constant(inp)
    return CaseLabel("C1" if tau > 0 else "C2", m, tau, tail)


def lambda_prediction(inp, epsilon, order="eps3", case=None):
    """Truncated asymptotic eigenvalue at coupling strength ``epsilon``.

    B1: ``mu0^2 - eps^2 a0^2 <b>^2 (+ 2 eps^3 a0 tau <b>)``; B3 and C1:
    ``mu0^2 - eps^4 tau^2``.
    """
    if order not in ("eps2", "eps3", "eps4"):
        raise ValueError(f"unknown order {order!r}")
    case = classify(inp) if case is None else case
    if not case.has_eigenvalue:
        raise NoEigenvaluePredicted(f"case {case.label} admits no weakly coupled eigenvalue")
    mu0_sq = inp.mu0_sq
    a0, m = inp.alpha0, case.moment
    if case.label == "B1":
        lam = mu0_sq - epsilon**2 * a0**2 * m**2
        if order != "eps2":
            tau = case.tau if np.isfinite(case.tau) else tau_constant(inp)[0]
            lam += 2 * epsilon**3 * a0 * tau * m
        return float(lam)
    return float(mu0_sq - epsilon**4 * case.tau**2)
