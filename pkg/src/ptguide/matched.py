"""Collocation with exact exterior matching.

Outside the support of ``alpha - alpha0`` the coupling is constant, so a
solution in ``x1 > R`` is ``exp(-(x1 - R) S) u(R)`` with ``S = sqrt(B0 - lambda)``
and ``B0`` the discrete transverse operator for ``alpha0``.  Imposing
``u' + S u = 0`` at ``x1 = R`` (and ``u' - S u = 0`` at ``-R``) removes the
box truncation error entirely, which matters for weakly bound states whose
decay length ``1 / sqrt(mu0^2 - lambda)`` can be far larger than any box.

The interior [-R, R] is split at the breakpoints of the profile into
Chebyshev segments glued by continuity of value and slope; x2 uses the same
Robin-embedded Chebyshev blocks as :mod:`ptguide.collocation`.

The problem ``T(kappa) u = 0`` is nonlinear in the spectral parameter.  It is
written in ``kappa = sqrt(m0 - lambda)`` (``m0`` the discrete threshold) so
that the lowest channel is analytic through the threshold, and solved by
nonlinear inverse iteration.  Starting values come from the linear problem
with the exterior map frozen at a reference ``kappa``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import diffmat
from .errors import NoConvergence
from .records import EigenvalueRecord, mark_conjugate_pairs, sort_key
from .transverse import threshold

DEFAULT_N1 = None  # chosen from the box width
DEFAULT_N2 = 16
REFINE = (16, 8)


def _tri_sqrt(U, diag_sqrt):
    """Square root R of an upper-triangular U - lambda given its diagonal."""
    n = U.shape[0]
    R = np.zeros_like(U)
    R[np.diag_indices(n)] = diag_sqrt
    for j in range(1, n):
        for i in range(j - 1, -1, -1):
            s = U[i, j] - R[i, i + 1 : j] @ R[i + 1 : j, j]
            R[i, j] = s / (R[i, i] + R[j, j])
    return R


def _tri_sqrt_derivative(R, diag_deriv):
    """dR from R dR + dR R = d(U - lambda) (a multiple of I), given the diagonal of dR."""
    n = R.shape[0]
    W = np.zeros_like(R)
    W[np.diag_indices(n)] = diag_deriv
    for j in range(1, n):
        for i in range(j - 1, -1, -1):
            s = R[i, i + 1 : j + 1] @ W[i + 1 : j + 1, j] + W[i, i:j] @ R[i:j, j]
            W[i, j] = -s / (R[i, i] + R[j, j])
    return W


class ExteriorMap:
    """``S(kappa) = sqrt(B0 - m0 + kappa^2)`` with the threshold channel taken as ``kappa``."""

    def __init__(self, alpha0, d, N2):
        B0 = -diffmat.robin_d2_block(N2, d, alpha0)
        U, Q = sla.schur(B0, output="complex")
        mu0_sq = threshold(alpha0, d)
        dg = np.diag(U).copy()
        self.i0 = int(np.argmin(np.abs(dg - mu0_sq)))
        # at |alpha0| = pi/d the two lowest transverse levels form a Jordan block;
        # rounding splits them by ~sqrt(eps), while their mean stays accurate
        near = np.flatnonzero(np.abs(dg - dg[self.i0]) < 1e-4 * max(1.0, abs(mu0_sq)))
        m0 = dg[near].mean()
        if abs(m0.imag) < 1e-8 * max(1.0, abs(m0)):
            m0 = m0.real
        dg[near] = m0
        U[np.diag_indices_from(U)] = dg
        self.m0 = complex(m0)
        self.cluster = near
        self.U, self.Q = U, Q
        self.gap = dg - self.m0

    def __call__(self, kappa, derivative=False):
        kappa = complex(kappa)
        diag = np.sqrt(self.gap + kappa * kappa + 0j)
        diag[self.cluster] = kappa
        Ush = self.U - (self.m0 - kappa * kappa) * np.eye(self.U.shape[0])
        R = _tri_sqrt(Ush, diag)
        S = self.Q @ R @ self.Q.conj().T
        if not derivative:
            return S
        dd = kappa / diag
        dd[self.cluster] = 1.0
        W = _tri_sqrt_derivative(R, dd)
        return S, self.Q @ W @ self.Q.conj().T


def _segments(profile, R_left, R_right, N1, max_len):
    cuts = sorted({float(b) for b in profile.breakpoints if R_left < b < R_right} | {R_left, R_right})
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(np.ceil((b - a) / max_len - 1e-9)))
        edges = np.linspace(a, b, m + 1)
        pieces.extend(zip(edges[:-1], edges[1:]))
    total = R_right - R_left
    counts = [max(8, int(round(N1 * (b - a) / total))) for a, b in pieces]
    return pieces, counts


def interior_box(profile):
    """(R_left, R_right): where the coupling stops differing from alpha0.

    Gaussian envelopes are cut at 6.5 widths (relative size ~1e-18).
    """
    beta = getattr(profile, "beta", None)
    if beta is not None and hasattr(beta, "w"):
        r = 6.5 * np.sqrt(beta.w)
        return beta.shift - r, beta.shift + r
    lo, hi = profile.support
    return float(lo), float(hi)


def default_n1(profile):
    lo, hi = interior_box(profile)
    return int(32 + 2.5 * (hi - lo))


@dataclass
class MatchedOperator:
    """Discrete ``T(kappa) = A - (m0 - kappa^2) P + boundary terms``."""

    profile: object
    N1: int
    N2: int
    x1: np.ndarray
    segments: list
    A: np.ndarray
    P: np.ndarray  # 1 on rows of collocated PDE equations
    left_rows: np.ndarray
    right_rows: np.ndarray
    left_nodes: np.ndarray
    right_nodes: np.ndarray
    ext: ExteriorMap
    pde_nodes: np.ndarray = field(default=None)
    con_nodes: np.ndarray = field(default=None)

    @property
    def m0(self):
        return self.ext.m0

    def lam(self, kappa):
        return self.m0 - kappa * kappa

    def kappa(self, lam):
        k = np.sqrt(self.m0 - complex(lam))
        return k if k.real >= 0 else -k

    def T(self, kappa):
        T = self.A.copy()
        T[np.diag_indices_from(T)] -= self.lam(kappa) * self.P
        S = self.ext(kappa)
        # boundary rows:  -u' + S u = 0 at the left end, u' + S u = 0 at the right end
        T[np.ix_(self.left_rows, self.left_nodes)] += S
        T[np.ix_(self.right_rows, self.right_nodes)] += S
        return T

    def dT_apply(self, kappa, u):
        """(dT / dkappa) u without forming the matrix."""
        _, dS = self.ext(kappa, True)
        out = 2 * kappa * self.P * u
        out[self.left_rows] += dS @ u[self.left_nodes]
        out[self.right_rows] += dS @ u[self.right_nodes]
        return out


def assemble_matched(profile, N1=DEFAULT_N1, N2=DEFAULT_N2, box=None, max_len=None):
    """Build the matched operator on the interior box with ~N1 x1-nodes."""
    R_left, R_right = box or interior_box(profile)
    N1 = N1 or default_n1(profile)
    max_len = np.inf if max_len is None else max_len
    pieces, counts = _segments(profile, R_left, R_right, N1, max_len)
    d = profile.d
    xs, D1s, D2s = [], [], []
    for (a, b), m in zip(pieces, counts):
        x, D1, D2 = diffmat.cheb_interval(m, a, b)
        xs.append(x)
        D1s.append(D1)
        D2s.append(D2)
    offs = np.cumsum([0] + counts)
    ntot = offs[-1]
    n = ntot * N2
    I2 = np.eye(N2)
    A = np.zeros((n, n), dtype=complex)
    P = np.zeros(n)

    def blk(k):
        return slice(k * N2, (k + 1) * N2)

    pde, con = [], []
    for s, ((a, b), m) in enumerate(zip(pieces, counts)):
        x = xs[s]
        # alpha sampled strictly inside the segment so steps are unambiguous
        alph = profile(np.clip(x, a + 1e-12 * (b - a), b - 1e-12 * (b - a)))
        blocks = diffmat.robin_d2_blocks(N2, d, alph)
        for i in range(1, m - 1):
            r = offs[s] + i
            pde.append(r)
            for j in range(m):
                A[blk(r), blk(offs[s] + j)] = -D2s[s][i, j] * I2
            A[blk(r), blk(r)] -= blocks[i]
            P[blk(r)] = 1.0
    # gluing rows: value continuity on the left node's rows, slope continuity on the right node's rows
    for s in range(len(pieces) - 1):
        rl = offs[s + 1] - 1  # last node of segment s
        rr = offs[s + 1]  # first node of segment s + 1
        con.extend([rl, rr])
        A[blk(rl), blk(rl)] = I2
        A[blk(rl), blk(rr)] = -I2
        for j in range(counts[s]):
            A[blk(rr), blk(offs[s] + j)] += D1s[s][-1, j] * I2
        for j in range(counts[s + 1]):
            A[blk(rr), blk(offs[s + 1] + j)] -= D1s[s + 1][0, j] * I2
    # outer ends: derivative part of the exterior condition
    r0, r1 = 0, ntot - 1
    con.extend([r0, r1])
    for j in range(counts[0]):
        A[blk(r0), blk(j)] = -D1s[0][0, j] * I2
    for j in range(counts[-1]):
        A[blk(r1), blk(offs[-2] + j)] = D1s[-1][-1, j] * I2
    left = np.arange(N2)
    right = np.arange((ntot - 1) * N2, ntot * N2)
    ext = ExteriorMap(profile.alpha0, d, N2)
    return MatchedOperator(
        profile, int(ntot), N2, np.concatenate(xs), list(pieces), A, P, left, right, left, right, ext,
        np.array(sorted(pde)), np.array(sorted(con)),
    )


def _node_index(op, nodes):
    return (np.asarray(nodes)[:, None] * op.N2 + np.arange(op.N2)[None, :]).ravel()


def frozen_eigenvalues(op, kappa_ref):
    """Eigenvalues of the linear problem with the exterior map frozen at ``kappa_ref``."""
    T = op.T(kappa_ref)
    T[np.diag_indices_from(T)] += op.lam(kappa_ref) * op.P  # = A + boundary terms
    p = _node_index(op, op.pde_nodes)
    c = _node_index(op, op.con_nodes)
    App, Apc = T[np.ix_(p, p)], T[np.ix_(p, c)]
    Acp, Acc = T[np.ix_(c, p)], T[np.ix_(c, c)]
    K = App - Apc @ np.linalg.solve(Acc, Acp)
    return sla.eigvals(K)


def nonlinear_inverse_iteration(op, kappa0, u0=None, tol=1e-12, max_iter=15, avoid=()):
    """Solve ``T(kappa) u = 0`` near ``kappa0``; returns (kappa, u, iterations).

    Each step solves ``T(kappa) x = T'(kappa) u`` and updates
    ``kappa -= 1 / (w^H x)`` with the normalisation ``w^H u = 1``.
    Iterates that come within 1e-6 (relative) of a value in ``avoid`` are
    abandoned with NoConvergence: they are converging to a known eigenvalue.
    """
    avoid = np.asarray(list(avoid), dtype=complex)
    n = op.A.shape[0]
    kappa = complex(kappa0)
    if u0 is None:
        # one inverse-iteration sweep from a fixed generic vector
        b = np.random.default_rng(20100).standard_normal(n) + 0j
        u = sla.lu_solve(sla.lu_factor(op.T(kappa), check_finite=False), b)
    else:
        u = np.asarray(u0, dtype=complex)
    w = u / np.linalg.norm(u)
    u = u / (w.conj() @ u)
    scale = max(1.0, abs(kappa0))
    for it in range(1, max_iter + 1):
        lu = sla.lu_factor(op.T(kappa), check_finite=False)
        x = sla.lu_solve(lu, op.dT_apply(kappa, u))
        if not np.all(np.isfinite(x)):
            raise NoConvergence(f"non-finite update at kappa={kappa}")
        den = w.conj() @ x
        if den == 0 or not np.isfinite(den):
            raise NoConvergence(f"breakdown at kappa={kappa}")
        dk = -1.0 / den  # w^H u = 1
        kappa = kappa + dk
        u = x / den
        if abs(kappa - kappa0) > 10 * scale or (it >= 5 and abs(dk) > 1e-3 * abs(kappa)):
            raise NoConvergence(f"iteration from kappa={kappa0} is not settling (at {kappa})")
        if avoid.size and np.min(np.abs(avoid - op.lam(kappa)) / np.maximum(1.0, np.abs(avoid))) < 1e-6:
            raise NoConvergence(f"iteration from kappa={kappa0} joins a known eigenvalue")
        dlam = abs(2 * kappa * dk) + abs(dk) ** 2
        if dlam < tol * max(1.0, abs(op.lam(kappa))):
            return kappa, u, it
    raise NoConvergence(f"nonlinear inverse iteration did not converge from kappa={kappa0}")


def polish(op, lam0, tol=1e-12, max_iter=15, u0=None, avoid=()):
    kappa, u, it = nonlinear_inverse_iteration(op, op.kappa(lam0), u0=u0, tol=tol, max_iter=max_iter, avoid=avoid)
    return kappa, u


def _residual(op, kappa, u):
    T = op.T(kappa)
    return float(np.linalg.norm(T @ u) / (np.linalg.norm(T, 1) * np.linalg.norm(u)))


def find_eigenvalues(
    profile,
    N1=DEFAULT_N1,
    N2=DEFAULT_N2,
    guesses=None,
    kappa_ref=None,
    re_window=None,
    im_window=None,
    min_kappa=1e-7,
    tol=1e-12,
    op=None,
    known=(),
):
    """Bound states of the strip from the matched discretisation at one resolution.

    Starting values are ``guesses`` when given, otherwise the frozen-map
    eigenvalues (at each reference in ``kappa_ref``) with ``Re lambda`` below
    ``m0`` plus a small window.  Each is
    polished; results with ``Re kappa <= min_kappa`` (not decaying) are dropped.
    Eigenvalues in ``known`` are not returned again and iterations heading for
    them are cut short.
    Returns a list of (lambda, kappa, u) sorted by (Re, Im).
    """
    op = op or assemble_matched(profile, N1, N2)
    mu0 = np.sqrt(threshold(profile.alpha0, profile.d))
    if guesses is None:
        if kappa_ref is None:
            # the frozen map is accurate only near its reference, so sample several
            kappa_ref = (1e-2 * max(mu0, 0.1), 0.35 * mu0, 0.8 * mu0)
        width = op.x1[-1] - op.x1[0]
        re_window = re_window if re_window is not None else (np.pi / width) ** 2
        im_window = im_window if im_window is not None else np.inf
        m0 = op.m0.real
        guesses = []
        for kr in np.atleast_1d(kappa_ref):
            ev = frozen_eigenvalues(op, kr)
            guesses += [z for z in ev if z.real < m0 + re_window and abs(z.imag) < im_window]
    found = []
    known = [complex(z) for z in known]
    for g in sorted(guesses, key=sort_key):
        try:
            kappa, u = polish(op, g, tol=tol, avoid=known + [f[0] for f in found])
        except NoConvergence:
            continue
        if kappa.real <= min_kappa:
            continue
        lam = op.lam(kappa)
        if any(abs(lam - f[0]) < 1e-8 * max(1.0, abs(lam)) for f in found):
            continue
        found.append((lam, kappa, u))
    found.sort(key=lambda t: sort_key(t[0]))
    return found


def spectrum(profile, N1=DEFAULT_N1, N2=DEFAULT_N2, refine=REFINE, tol_cluster=1e-6, guesses=None, **kw):
    """Eigenvalues at (N1, N2), re-polished at the refined resolution.

    Each record holds the fine value; ``convergence`` is the distance between
    the two resolutions and ``converged`` tells whether it is below
    ``tol_cluster * max(1, |lambda|)``.
    """
    lo = find_eigenvalues(profile, N1, N2, guesses=guesses, **kw)
    N1 = N1 or default_n1(profile)
    op_hi = assemble_matched(profile, N1 + refine[0], N2 + refine[1])
    recs = []
    for lam, kappa, u in lo:
        try:
            k_hi, u_hi = polish(op_hi, lam)
        except NoConvergence:
            continue
        if k_hi.real <= 0:
            continue
        lam_hi = op_hi.lam(k_hi)
        dist = abs(lam_hi - lam)
        recs.append(
            EigenvalueRecord(
                value=complex(lam_hi),
                solver="collocation-matched",
                resolution=(op_hi.N1, op_hi.N2),
                residual=_residual(op_hi, k_hi, u_hi),
                convergence=float(dist),
                converged=bool(dist < tol_cluster * max(1.0, abs(lam_hi))),
                extra={"coarse": complex(lam), "kappa": complex(k_hi)},
            )
        )
    recs = [r for i, r in enumerate(recs) if all(abs(r.value - o.value) > 1e-8 * max(1, abs(r.value)) for o in recs[:i])]
    recs.sort(key=sort_key)
    return mark_conjugate_pairs(recs)
