"""Coupling profiles alpha(x1) and the perturbation shapes beta(x1)."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import InvalidGeometry


def _double_factorial(n):
    return 1 if n <= 0 else n * _double_factorial(n - 2)


def gaussian_moment(n, w):
    """int y**n exp(-y**2 / w) dy over the real line."""
    if n % 2:
        return 0.0
    k = n // 2
    return np.sqrt(np.pi * w) * (w / 2) ** k * _double_factorial(2 * k - 1)


@dataclass(frozen=True)
class GaussianPoly:
    """beta(x) = (sum_m coeffs[m] x**m) * exp(-(x - shift)**2 / w)."""

    coeffs: tuple
    w: float
    shift: float = 0.0
    kind: str = field(default="gaussian_poly", init=False)

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError("gaussian envelope width must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return P.polyval(x, self.coeffs) * np.exp(-((x - self.shift) ** 2) / self.w)

    @property
    def support(self):
        r = 8.0 * np.sqrt(self.w)
        return (self.shift - r, self.shift + r)

    @property
    def breakpoints(self):
        return ()

    def moment(self):
        """<beta> from the Gaussian moments (exact)."""
        # re-expand the polynomial around the shift: x = y + shift
        total = 0.0
        for m, pm in enumerate(self.coeffs):
            for n in range(m + 1):
                total += pm * comb(m, n) * self.shift ** (m - n) * gaussian_moment(n, self.w)
        return float(total)

    def derivative_poly(self, k):
        """Polynomial q with beta^(k)(x) = q(x) exp(-(x - shift)**2 / w)."""
        q = np.array(self.coeffs, dtype=float)
        lin = np.array([2 * self.shift / self.w, -2 / self.w])  # d/dx of the exponent
        for _ in range(k):
            q = P.polyadd(P.polyder(q) if len(q) > 1 else [0.0], P.polymul(q, lin))
        return q

    def derivative_norms(self, K):
        """||beta^(k)||_2**2 for k = 0..K-1, exact via Gaussian moments."""
        out = []
        for k in range(K):
            q = self.derivative_poly(k)
            sq = P.polymul(q, q)
            # int sq(x) exp(-2 (x - s)^2 / w) dx
            w2 = self.w / 2
            total = 0.0
            for m, pm in enumerate(sq):
                for n in range(m + 1):
                    total += pm * comb(m, n) * self.shift ** (m - n) * gaussian_moment(n, w2)
            out.append(float(total))
        return out

    def large_s_expansion(self, K=5):
        """Terms (c, p) with (1/2s) int int exp(-s|x-t|) beta beta ~ sum c s**-p."""
        M = self.derivative_norms(K)
        return [((-1) ** k * M[k], 2 * k + 2) for k in range(K)]

    def is_odd(self):
        if self.shift != 0:
            return False
        return all(c == 0 for c in self.coeffs[0::2])


@dataclass(frozen=True)
class OddCompact:
    """Odd, compactly supported C^2 bump: amp * (x/R) (1 - (x/R)^2)^3 on |x| < R."""

    amplitude: float = 1.0
    R: float = 3.0
    kind: str = field(default="odd_compact", init=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = x / self.R
        return np.where(np.abs(u) < 1, self.amplitude * u * (1 - u**2) ** 3, 0.0)

    @property
    def support(self):
        return (-self.R, self.R)

    @property
    def breakpoints(self):
        return (-self.R, self.R)

    def moment(self):
        return 0.0

    def is_odd(self):
        return True

    def large_s_expansion(self, K=3):
        # beta is C^2 with a jump in its third derivative at +-R: three even orders are exact
        base = P.polymul([0.0, 1.0], P.polypow([1.0, 0.0, -1.0], 3)) * self.amplitude
        out = []
        q = base
        for k in range(min(K, 3)):
            sq = P.polyint(P.polymul(q, q))
            Mk = (P.polyval(1.0, sq) - P.polyval(-1.0, sq)) * self.R ** (1 - 2 * k)
            out.append(((-1) ** k * Mk, 2 * k + 2))
            q = P.polyder(q)
        return out


@dataclass(frozen=True)
class StepShape:
    """Piecewise constant beta: value ``heights[m]`` on ``(edges[m], edges[m+1])``."""

    edges: tuple
    heights: tuple
    kind: str = field(default="step", init=False)

    def __post_init__(self):
        if len(self.edges) != len(self.heights) + 1:
            raise ValueError("need one more edge than heights")
        if any(b <= a for a, b in zip(self.edges[:-1], self.edges[1:])):
            raise ValueError("edges must increase")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, b, h in zip(self.edges[:-1], self.edges[1:], self.heights):
            out = np.where((x > a) & (x < b), h, out)
        return out

    @property
    def support(self):
        return (self.edges[0], self.edges[-1])

    @property
    def breakpoints(self):
        return tuple(self.edges)

    def moment(self):
        return float(sum(h * (b - a) for a, b, h in zip(self.edges[:-1], self.edges[1:], self.heights)))

    def is_odd(self):
        e = np.array(self.edges)
        h = np.array(self.heights)
        return bool(np.allclose(e, -e[::-1]) and np.allclose(h, -h[::-1]))

    def pair_kernel(self, s):
        """(1/2s) int int exp(-s|x-t|) beta(x) beta(t) dx dt, exact (s > 0)."""
        s = np.asarray(s, dtype=float)
        ivals = list(zip(self.edges[:-1], self.edges[1:], self.heights))
        total = np.zeros_like(s)
        for m, (a1, b1, h1) in enumerate(ivals):
            ell = b1 - a1
            total = total + h1 * h1 * (2 * ell / s + 2 * np.expm1(-s * ell) / s**2)
            for a2, b2, h2 in ivals[m + 1 :]:
                g = (
                    np.exp(-s * (a2 - b1))
                    - np.exp(-s * (a2 - a1))
                    - np.exp(-s * (b2 - b1))
                    + np.exp(-s * (b2 - a1))
                ) / s**2
                total = total + 2 * h1 * h2 * g
        return total / (2 * s)

    def abs_kernel(self):
        """-(1/2) int int |x - t| beta(x) beta(t) dx dt, exact."""
        ivals = list(zip(self.edges[:-1], self.edges[1:], self.heights))
        total = 0.0
        for m, (a1, b1, h1) in enumerate(ivals):
            ell = b1 - a1
            total += h1 * h1 * ell**3 / 3
            for a2, b2, h2 in ivals[m + 1 :]:
                total += 2 * h1 * h2 * (b1 - a1) * (b2 - a2) * (0.5 * (a2 + b2) - 0.5 * (a1 + b1))
        return -0.5 * total

    def large_s_expansion(self, K=2):
        ivals = list(zip(self.edges[:-1], self.edges[1:], self.heights))
        M0 = sum(h * h * (b - a) for a, b, h in ivals)
        # 1/s^3 coefficient: -(1/2) sum of squared jumps (beta is zero outside)
        vals = [0.0] + list(self.heights) + [0.0]
        jumps = np.diff(vals)
        return [(M0, 2), (-0.5 * float(np.sum(jumps**2)), 3)]


def make_beta(spec):
    """Build a shape from a plain mapping (used by the config loader)."""
    kind = spec["kind"]
    if kind == "gaussian_poly":
        return GaussianPoly(tuple(float(c) for c in spec["coeffs"]), float(spec["w"]), float(spec.get("shift", 0.0)))
    if kind == "odd_compact":
        return OddCompact(float(spec.get("amplitude", 1.0)), float(spec.get("R", 3.0)))
    if kind == "step":
        return StepShape(tuple(float(e) for e in spec["edges"]), tuple(float(h) for h in spec["heights"]))
    raise ValueError(f"unknown beta kind {kind!r}")


@dataclass(frozen=True)
class SmoothProfile:
    """alpha(x1) = alpha0 + epsilon * beta(x1) on a strip of width d."""

    alpha0: float
    epsilon: float
    beta: object
    d: float

    def __post_init__(self):
        if self.d <= 0:
            raise InvalidGeometry(f"strip width must be positive, got d={self.d}")

    def __call__(self, x1):
        return self.alpha0 + self.epsilon * self.beta(x1)

    def with_epsilon(self, epsilon):
        return SmoothProfile(self.alpha0, epsilon, self.beta, self.d)

    def negated(self):
        return SmoothProfile(-self.alpha0, -self.epsilon, self.beta, self.d)

    @property
    def breakpoints(self):
        return self.beta.breakpoints if self.epsilon != 0 else ()

    @property
    def support(self):
        return self.beta.support


@dataclass(frozen=True)
class SquareWellProfile:
    """alpha = alpha_minus on (L_minus, 0), alpha_plus on (0, L_plus), alpha0 elsewhere."""

    alpha0: float
    alpha_minus: float
    alpha_plus: float
    L_minus: float
    L_plus: float
    d: float

    def __post_init__(self):
        if self.d <= 0:
            raise InvalidGeometry(f"strip width must be positive, got d={self.d}")
        if not (self.L_minus < 0 < self.L_plus):
            raise InvalidGeometry("need L_minus < 0 < L_plus")

    @property
    def is_symmetric(self):
        return self.alpha_plus == self.alpha_minus and self.L_plus == -self.L_minus

    def __call__(self, x1):
        x1 = np.asarray(x1, dtype=float)
        out = np.full_like(x1, self.alpha0)
        out = np.where((x1 > self.L_minus) & (x1 < 0), self.alpha_minus, out)
        out = np.where((x1 > 0) & (x1 < self.L_plus), self.alpha_plus, out)
        out = np.where(x1 == 0, 0.5 * (self.alpha_minus + self.alpha_plus), out)
        return out

    def negated(self):
        return SquareWellProfile(-self.alpha0, -self.alpha_minus, -self.alpha_plus, self.L_minus, self.L_plus, self.d)

    @property
    def alpha_minus_shift(self):
        return self.alpha_minus - self.alpha0

    @property
    def breakpoints(self):
        return (self.L_minus, 0.0, self.L_plus)

    @property
    def support(self):
        return (self.L_minus, self.L_plus)

    def as_step(self):
        """The equivalent weak-coupling data: epsilon = 1, beta = alpha - alpha0."""
        return StepShape((self.L_minus, 0.0, self.L_plus), (self.alpha_minus - self.alpha0, self.alpha_plus - self.alpha0))
