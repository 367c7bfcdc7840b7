"""Tensor-product spectral collocation for the PT-symmetric strip.

x1 is discretised on Hermite roots (weighted interpolant) or a uniform
Fourier grid truncated by Dirichlet deletion; x2 on Chebyshev extrema with
the Robin walls built into each column's interpolant.  The dense matrix

    L = -(D2_x1 kron I + blockdiag(D2_x2(alpha(x1_k))))

is diagonalised completely and the approximations of bound states are
picked out by comparing two resolutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import diffmat
from .errors import NoConvergence
from .records import EigenvalueRecord, mark_conjugate_pairs, sort_key
from .transverse import threshold

SIZE_CAP = 6000
DEFAULT_N1 = 64
DEFAULT_N2 = 24
REFINE = (16, 8)
HERMITE_SCALES = (0.8, 1.0, 1.25)


@dataclass
class CollocationOperator:
    x1_nodes: np.ndarray
    x2_nodes: np.ndarray
    D2_x1: np.ndarray
    D2_x2_blocks: np.ndarray
    L: np.ndarray
    grid_kind: str
    grid_param: float

    @property
    def shape(self):
        return (self.x1_nodes.size, self.x2_nodes.size)


def default_x1max(profile):
    """Half-width of the Fourier box: support of beta plus eight envelope widths."""
    beta = getattr(profile, "beta", None)
    if beta is not None and hasattr(beta, "w"):
        return abs(beta.shift) + 8.0 * np.sqrt(beta.w)
    lo, hi = profile.support
    return max(abs(lo), abs(hi)) + 12.0


def x1_grid(grid_kind, N1, param):
    """Nodes and second-derivative matrix in x1 (after any Dirichlet deletion)."""
    if grid_kind == "hermite":
        return diffmat.hermite_d2(N1, param)
    if grid_kind == "fourier":
        x, D2 = diffmat.fourier_d2(N1, param)
        # the node at -x1max is the periodic image of +x1max: deleting its row and
        # column imposes the Dirichlet truncation at both box ends
        return x[1:], D2[1:, 1:]
    raise ValueError(f"unknown grid kind {grid_kind!r}")


def assemble(profile, grid_kind="hermite", N1=DEFAULT_N1, N2=DEFAULT_N2, param=None):
    """Collocation matrix of -Laplacian with the x1-dependent Robin walls.

    ``param`` is the Hermite scale b (nodes ``b * roots``) or the Fourier
    half-width; defaults are 1 and :func:`default_x1max`.
    """
    if param is None:
        param = 1.0 if grid_kind == "hermite" else default_x1max(profile)
    x1, D2x1 = x1_grid(grid_kind, N1, param)
    x2 = diffmat.transverse_nodes(N2, profile.d)
    blocks = diffmat.robin_d2_blocks(N2, profile.d, profile(x1))
    n1 = x1.size
    L = -np.kron(D2x1, np.eye(N2)).astype(complex)
    for k in range(n1):
        s = slice(k * N2, (k + 1) * N2)
        L[s, s] -= blocks[k]
    return CollocationOperator(x1, x2, D2x1, blocks, L, grid_kind, float(param))


def solve_spectrum(op, size_cap=SIZE_CAP):
    """All eigenvalues of the dense collocation matrix, sorted by (Re, Im).

    LAPACK's complex driver reduces to Hessenberg form and runs shifted QR.
    """
    A = op.L if hasattr(op, "L") else np.asarray(op)
    n = A.shape[0]
    if n > size_cap:
        raise ValueError(f"matrix of size {n} exceeds the dense size cap {size_cap}")
    try:
        w = sla.eigvals(A, overwrite_a=False, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"QR iteration failed: {exc}", partial=[]) from exc
    return sorted(w, key=sort_key)


def filter_physical(eigs_lo, eigs_hi, mu0_sq, tol_cluster=1e-6, margin=None, resolution=()):
    """Keep eigenvalues below the threshold that reappear at the finer resolution.

    A value survives when ``Re < mu0_sq - margin`` and some finer eigenvalue
    lies within ``tol_cluster * max(1, |lambda|)``.  The record carries the
    finer value; the coarse one and their distance go into ``extra`` and
    ``convergence``.
    """
    if margin is None:
        margin = 1e-4 * mu0_sq
    hi = np.asarray(eigs_hi, dtype=complex)
    out = []
    used = set()
    for z in eigs_lo:
        z = complex(z)
        if not z.real < mu0_sq - margin or hi.size == 0:
            continue
        dist = np.abs(hi - z)
        j = int(np.argmin(dist))
        if dist[j] < tol_cluster * max(1.0, abs(z)) and j not in used:
            used.add(j)
            rec = EigenvalueRecord(
                value=complex(hi[j]),
                solver="collocation",
                resolution=tuple(resolution),
                convergence=float(dist[j]),
                converged=True,
                extra={"coarse": z},
            )
            out.append(rec)
    out.sort(key=sort_key)
    return mark_conjugate_pairs(out)


def eigen_residual(L, lam):
    """Smallest singular value of L - lambda, relative to ||L||_2 (dense)."""
    s = np.linalg.svd(L - lam * np.eye(L.shape[0]), compute_uv=False)
    return float(s[-1] / s[0])


def spectrum(profile, grid_kind="hermite", N1=DEFAULT_N1, N2=DEFAULT_N2, param=None, refine=REFINE, tol_cluster=1e-6):
    """Filtered eigenvalues from the resolution pair (N1, N2) and (N1, N2) + refine."""
    mu0_sq = threshold(profile.alpha0, profile.d)
    lo = solve_spectrum(assemble(profile, grid_kind, N1, N2, param))
    hi = solve_spectrum(assemble(profile, grid_kind, N1 + refine[0], N2 + refine[1], param))
    recs = filter_physical(lo, hi, mu0_sq, tol_cluster, resolution=(N1, N2, N1 + refine[0], N2 + refine[1]))
    for r in recs:
        r.extra["grid"] = grid_kind
    return recs


def best_hermite_scale(profile, N1=DEFAULT_N1, N2=DEFAULT_N2, scales=HERMITE_SCALES, refine=REFINE, tol_cluster=1e-6):
    """Hermite scale with the smallest drift of the filtered eigenvalues.

    Each candidate b is scored by the largest coarse/fine distance among its
    filtered eigenvalues; ties (including no eigenvalues) keep the first scale.
    Returns ``(b, records)``.
    """
    best = None
    for b in scales:
        recs = spectrum(profile, "hermite", N1, N2, b, refine, tol_cluster)
        score = (-len(recs), max((r.convergence for r in recs), default=0.0))
        if best is None or score < best[0]:
            best = (score, b, recs)
    return best[1], best[2]
