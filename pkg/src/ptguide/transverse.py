"""Transverse eigenproblem on (0, d) with the PT-symmetric Robin condition.

For a constant coupling ``alpha`` the cross-section operator -d^2/dx2^2 with
``psi' + i alpha psi = 0`` at both edges has eigenvalues ``mu_j**2`` with

    mu_0 = min(|alpha|, pi/d),  mu_1 = max(|alpha|, pi/d),  mu_j = j pi / d  (j >= 2)

and eigenfunctions ``psi_j(x) = cos(mu_j x) - i alpha/mu_j sin(mu_j x)``.  The
adjoint problem (coupling ``-alpha``) supplies ``phi_j = conj(A_j psi_j)``; the
constants ``A_j`` make the two families biorthonormal.

The L2 pairing is antilinear in its first slot, so ``(phi_i, psi_j)`` reduces
to the bilinear integral ``A_i * int psi_i psi_j``, which is evaluated in closed
form below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoupling, InvalidGeometry, MismatchedGeometry, OutOfDomain

TOL_DEGEN = 1e-8


@dataclass(frozen=True)
class TransverseMode:
    j: int
    mu: float
    psi_coeffs: tuple  # (c_cos, c_sin)
    A: complex
    alpha: float
    d: float

    def __call__(self, x2):
        return eval_mode(self, x2)


@dataclass(frozen=True)
class TransverseFamily:
    alpha: float
    d: float
    modes: tuple

    @property
    def J(self):
        return len(self.modes) - 1

    @property
    def mu(self):
        return np.array([m.mu for m in self.modes])

    @property
    def A(self):
        return np.array([m.A for m in self.modes])

    @property
    def coeffs(self):
        return np.array([m.psi_coeffs for m in self.modes], dtype=complex)

    @property
    def index_pair(self):
        """(j0, j1): position of the plane-wave mode and of the pi/d cosine mode."""
        return (0, 1) if abs(self.alpha) < np.pi / self.d else (1, 0)


def threshold(alpha, d):
    """Bottom ``mu_0**2`` of the continuous spectrum for constant coupling ``alpha``."""
    if d <= 0:
        raise InvalidGeometry(f"strip width must be positive, got d={d}")
    return min(abs(alpha), np.pi / d) ** 2


def thresholds(alpha, d, J):
    """The numbers mu_0 <= mu_1 <= ... <= mu_J."""
    if d <= 0:
        raise InvalidGeometry(f"strip width must be positive, got d={d}")
    a, p = abs(alpha), np.pi / d
    mu = np.arange(J + 1, dtype=float) * p
    mu[0] = min(a, p)
    if J >= 1:
        mu[1] = max(a, p)
    return mu[: J + 1]


def check_degenerate(alpha, d, tol=TOL_DEGEN):
    """Raise DegenerateCoupling if |alpha| d / pi is a positive integer within ``tol``.

    The test is ``min_k |(k pi/d)^2 - alpha^2| < tol (pi/d)^2`` over k >= 1.
    """
    if alpha == 0:
        return
    p = np.pi / d
    ratio = abs(alpha) / p
    k = max(1, int(round(ratio)))
    gaps = [abs((kk * p) ** 2 - alpha**2) for kk in (k - 1, k, k + 1) if kk >= 1]
    if min(gaps) < tol * p**2:
        raise DegenerateCoupling(
            f"alpha*d/pi = {alpha * d / np.pi:.12g} is an integer to within tolerance; "
            "the transverse normalisation constant is singular"
        )


def _plane_wave_norm(alpha, d):
    # 2 i a / (1 - exp(-2 i a d)) written as exp(i a d) / (d sinc(a d)); finite at a = 0
    return np.exp(1j * alpha * d) / (d * np.sinc(alpha * d / np.pi))


def build_family(alpha, d, J, tol_degen=TOL_DEGEN):
    """Transverse modes j = 0..J for constant coupling ``alpha`` on a strip of width ``d``.

    Raises
    ------
    InvalidGeometry
        if ``d <= 0``.
    DegenerateCoupling
        if ``|alpha| d / pi`` is a positive integer (within ``tol_degen``).
    """
    if d <= 0:
        raise InvalidGeometry(f"strip width must be positive, got d={d}")
    if J < 0:
        raise ValueError("J must be non-negative")
    alpha = float(alpha)
    check_degenerate(alpha, d, tol_degen)
    mu = thresholds(alpha, d, J)
    j0 = 0 if abs(alpha) < np.pi / d else 1
    modes = []
    for j in range(J + 1):
        m = float(mu[j])
        c_sin = 0.0 if m == 0.0 else -1j * alpha / m
        if j == j0:
            A = _plane_wave_norm(alpha, d)
        else:
            A = 2 * m**2 / ((m**2 - alpha**2) * d)
        modes.append(TransverseMode(j, m, (1.0 + 0j, complex(c_sin)), complex(A), alpha, float(d)))
    return TransverseFamily(alpha, float(d), tuple(modes))


def _check_x2(mode, x2):
    x2 = np.asarray(x2, dtype=float)
    eps = 1e-12 * mode.d
    if np.any(x2 < -eps) or np.any(x2 > mode.d + eps):
        raise OutOfDomain(f"x2 must lie in [0, {mode.d}]")
    return x2


def eval_mode(mode, x2):
    """psi_j(x2)."""
    x2 = _check_x2(mode, x2)
    c, s = mode.psi_coeffs
    return c * np.cos(mode.mu * x2) + s * np.sin(mode.mu * x2)


def eval_mode_derivative(mode, x2):
    """d psi_j / d x2."""
    x2 = _check_x2(mode, x2)
    c, s = mode.psi_coeffs
    return mode.mu * (-c * np.sin(mode.mu * x2) + s * np.cos(mode.mu * x2))


def eval_adjoint(mode, x2):
    """phi_j(x2) = conj(A_j psi_j(x2))."""
    return np.conj(mode.A * eval_mode(mode, x2))


def _exp_integral(k, d):
    # int_0^d exp(i k x) dx, smooth through k = 0
    return d * np.exp(0.5j * k * d) * np.sinc(k * d / (2 * np.pi))


def _exp_form(family, n):
    c = family.coeffs[: n + 1]
    P = 0.5 * (c[:, 0] - 1j * c[:, 1])
    Q = 0.5 * (c[:, 0] + 1j * c[:, 1])
    return P, Q, family.mu[: n + 1]


def overlap_matrix(adjoint_family, family, I, Jm):
    """Matrix of pairings ``(phi_i, psi_j)`` with phi from ``adjoint_family``.

    Entry (i, j) is ``int_0^d conj(phi_i(x)) psi_j(x) dx`` for i <= I, j <= Jm,
    obtained from closed-form antiderivatives.
    """
    if not np.isclose(adjoint_family.d, family.d, rtol=1e-14, atol=0):
        raise MismatchedGeometry("families live on strips of different width")
    if I > adjoint_family.J or Jm > family.J:
        raise ValueError("requested more channels than the families carry")
    d = family.d
    Pa, Qa, ma = _exp_form(adjoint_family, I)
    Pb, Qb, mb = _exp_form(family, Jm)
    sp = ma[:, None] + mb[None, :]
    sm = ma[:, None] - mb[None, :]
    integral = (
        np.outer(Pa, Pb) * _exp_integral(sp, d)
        + np.outer(Pa, Qb) * _exp_integral(sm, d)
        + np.outer(Qa, Pb) * _exp_integral(-sm, d)
        + np.outer(Qa, Qb) * _exp_integral(-sp, d)
    )
    return adjoint_family.A[: I + 1, None] * integral


def biorthonormality_residual(family):
    """max_{i,j} |(phi_i, psi_j) - delta_ij|."""
    G = overlap_matrix(family, family, family.J, family.J)
    return float(np.max(np.abs(G - np.eye(family.J + 1))))


def boundary_residual(mode):
    """max over both edges of |psi' + i alpha psi|."""
    x = np.array([0.0, mode.d])
    return float(np.max(np.abs(eval_mode_derivative(mode, x) + 1j * mode.alpha * eval_mode(mode, x))))
