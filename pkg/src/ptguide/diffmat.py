"""Differentiation matrices: Hermite, Fourier and Chebyshev grids.

The Hermite and general-node constructions follow the Weideman-Reddy
differentiation suite (weighted polynomial interpolants); the transverse
block embeds the Robin condition into an osculatory Chebyshev interpolant.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C


def herroots(n):
    """Roots of the (physicists') Hermite polynomial H_n, ascending."""
    J = np.diag(np.sqrt(np.arange(1, n) / 2.0), 1)
    return np.linalg.eigvalsh(J + J.T)


def poldif(x, alpha, B):
    """Differentiation matrices of the weighted interpolant alpha(x) p(x).

    ``B[l, j]`` holds the (l+1)-th derivative of alpha divided by alpha at
    ``x[j]``.  Returns the list [D1, ..., Dm].  Node weights are handled in
    log form so that large grids do not overflow.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    m = B.shape[0]
    DX = x[:, None] - x[None, :]
    np.fill_diagonal(DX, 1.0)
    logc = np.log(np.abs(alpha)) + np.sum(np.log(np.abs(DX)), axis=1)
    sgn = np.sign(alpha) * np.prod(np.sign(DX), axis=1)
    Cm = (sgn[:, None] * sgn[None, :]) * np.exp(logc[:, None] - logc[None, :])
    Z = 1.0 / DX
    np.fill_diagonal(Z, 0.0)
    # X: column j holds the off-diagonal entries of row j of Z, shape (n-1, n)
    X = Z[~np.eye(n, dtype=bool)].reshape(n, n - 1).T
    Y = np.ones((n - 1, n))
    D = np.eye(n)
    out = []
    for ell in range(1, m + 1):
        Y = np.cumsum(np.vstack([B[ell - 1], ell * Y * X]), axis=0)
        D = ell * Z * (Cm * np.diag(D)[:, None] - D)
        np.fill_diagonal(D, Y[-1])
        Y = Y[:-1]
        out.append(D)
    return out


def hermite_d2(N1, b=1.0):
    """Nodes ``b * roots(H_N1)`` and the second-derivative matrix of the
    interpolant ``exp(-x**2 / (2 b**2)) p(x)``."""
    if N1 < 2:
        raise ValueError("need at least two Hermite nodes")
    if b <= 0:
        raise ValueError("Hermite scale must be positive")
    x = herroots(N1)
    alpha = np.exp(-(x**2) / 2)
    B = np.vstack([-x, x**2 - 1])
    D2 = poldif(x, alpha, B)[1]
    return b * x, D2 / b**2


def fourier_d2(N1, x1max):
    """Periodic second-derivative matrix on ``N1`` uniform nodes in [-x1max, x1max)."""
    if N1 < 4 or N1 % 2:
        raise ValueError("Fourier grid needs an even number of nodes >= 4")
    if x1max <= 0:
        raise ValueError("x1max must be positive")
    h = 2 * np.pi / N1
    k = np.arange(N1)
    col = np.zeros(N1)
    col[0] = -np.pi**2 / (3 * h**2) - 1.0 / 6.0
    col[1:] = -0.5 * (-1.0) ** k[1:] / np.sin(h * k[1:] / 2) ** 2
    idx = (k[:, None] - k[None, :]) % N1
    D2 = col[idx] * (np.pi / x1max) ** 2
    nodes = -x1max + 2 * x1max * k / N1
    return nodes, D2


def cheb(N):
    """Chebyshev extrema ``cos(pi k / N)`` (descending) and the first-derivative matrix."""
    if N == 0:
        return np.array([1.0]), np.zeros((1, 1))
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def cheb_interval(n, a, b):
    """``n`` Chebyshev extrema on [a, b] (ascending) with D1 and D2 there."""
    eta, D = cheb(n - 1)
    eta, D = eta[::-1], D[::-1, ::-1]
    s = 2.0 / (b - a)
    x = a + (eta + 1) / s
    D1 = D * s
    return x, D1, D1 @ D1


def transverse_nodes(N2, d):
    """Chebyshev extrema mapped to [0, d], ascending, endpoints included."""
    return 0.5 * d * (1 - np.cos(np.pi * np.arange(N2) / (N2 - 1)))


def _robin_interpolant(N2, d, alpha):
    # coefficient map of the degree N2+1 interpolant matching the N2 values and
    # the Robin relation psi' + i alpha psi = 0 at both ends
    eta = 2 * transverse_nodes(N2, d) / d - 1
    M = N2 + 2
    I = np.eye(M)
    V = C.chebvander(eta, M - 1)
    ends = np.array([-1.0, 1.0])
    Ve = C.chebvander(ends, M - 1)
    d1 = C.chebvander(ends, M - 2) @ C.chebder(I, axis=0) * (2 / d)
    rows = np.vstack([V, d1 + 1j * alpha * Ve]).astype(complex)
    return eta, np.linalg.inv(rows)[:, :N2]


def robin_d2_block(N2, d, alpha_at_node):
    """Second x2-derivative on the transverse nodes with both Robin walls embedded."""
    if N2 < 4:
        raise ValueError("transverse grid needs at least four nodes")
    eta, Cinv = _robin_interpolant(N2, d, alpha_at_node)
    M = N2 + 2
    d2 = C.chebvander(eta, M - 3) @ C.chebder(np.eye(M), m=2, axis=0) * (2 / d) ** 2
    return d2 @ Cinv


def robin_d1_block(N2, d, alpha_at_node):
    """First x2-derivative on the transverse nodes with the Robin walls embedded."""
    eta, Cinv = _robin_interpolant(N2, d, alpha_at_node)
    M = N2 + 2
    d1 = C.chebvander(eta, M - 2) @ C.chebder(np.eye(M), axis=0) * (2 / d)
    return d1 @ Cinv


def robin_d2_blocks(N2, d, alphas):
    """Stack of Robin blocks, one per coupling value (shape len(alphas) x N2 x N2).

    The blocks depend affinely on ``i alpha`` only through the inverse of the
    interpolation system, so they are computed one by one; repeated values are
    reused.
    """
    alphas = np.asarray(alphas, dtype=float)
    out = np.empty((alphas.size, N2, N2), dtype=complex)
    cache = {}
    for k, a in enumerate(alphas):
        key = float(a)
        if key not in cache:
            cache[key] = robin_d2_block(N2, d, key)
        out[k] = cache[key]
    return out
