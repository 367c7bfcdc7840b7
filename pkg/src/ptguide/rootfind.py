"""Zeros of analytic functions given in scaled form.

Every function handled here maps a complex number to ``(log|f|, f/|f|)`` so that
determinants of large matrices never overflow.  Tools:

* adaptive argument-principle winding numbers around rectangles,
* contour-moment estimates of the zeros inside a rectangle,
* Newton iteration with a central-difference derivative,
* a quadratic local model for two nearly coincident zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence


@dataclass(frozen=True)
class SearchRegion:
    """Axis-parallel rectangle ``[re_min, re_max] x [im_min, im_max]``.

    With ``im_min == im_max == 0`` only the real segment is searched.
    """

    re_min: float
    re_max: float
    im_min: float = 0.0
    im_max: float = 0.0

    @property
    def real_only(self):
        return self.im_min == 0.0 and self.im_max == 0.0

    def contains(self, z, pad=0.0):
        return (
            self.re_min - pad <= z.real <= self.re_max + pad
            and self.im_min - pad <= z.imag <= self.im_max + pad
        )

    def corners(self):
        return (
            complex(self.re_min, self.im_min),
            complex(self.re_max, self.im_min),
            complex(self.re_max, self.im_max),
            complex(self.re_min, self.im_max),
        )

    @property
    def center(self):
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def size(self):
        return max(self.re_max - self.re_min, self.im_max - self.im_min)


def log_ratio(a, b):
    """log(f(b)/f(a)) for scaled values a, b = (log|f|, phase), principal argument."""
    return (b[0] - a[0]) + 1j * np.angle(b[1] / a[1])


class ContourSample:
    """Adaptively sampled closed contour with the increments of log f along it."""

    def __init__(self, f, vertices, n_init=8, max_darg=np.pi / 5, max_points=20000, min_len=1e-14):
        pts = []
        for a, b in zip(vertices, vertices[1:] + vertices[:1]):
            t = np.linspace(0.0, 1.0, n_init, endpoint=False)
            pts.extend(a + (b - a) * t)
        pts = list(pts)
        vals = [f(z) for z in pts]
        out_z, out_v = [pts[0]], [vals[0]]
        # walk the closed polygon, bisecting segments where the phase jumps
        stack = []
        for k in range(len(pts)):
            stack.append((pts[k], vals[k], pts[(k + 1) % len(pts)], vals[(k + 1) % len(pts)]))
        stack.reverse()
        self.n_eval = len(vals)
        self.degenerate = False
        while stack:
            za, va, zb, vb = stack.pop()
            dl = log_ratio(va, vb)
            if abs(dl.imag) > max_darg and abs(zb - za) > min_len and self.n_eval < max_points:
                zm = 0.5 * (za + zb)
                vm = f(zm)
                self.n_eval += 1
                stack.append((zm, vm, zb, vb))
                stack.append((za, va, zm, vm))
                continue
            if abs(dl.imag) > max_darg:
                self.degenerate = True
            out_z.append(zb)
            out_v.append(vb)
        self.z = np.array(out_z)
        self.values = out_v
        self.dlog = np.array([log_ratio(a, b) for a, b in zip(out_v[:-1], out_v[1:])])

    @property
    def winding(self):
        w = np.sum(self.dlog.imag) / (2 * np.pi)
        return w

    def moment(self, p):
        """(1 / 2 pi i) * contour integral of z**p f'/f dz (midpoint rule on increments)."""
        zm = 0.5 * (self.z[:-1] + self.z[1:])
        return np.sum(zm**p * self.dlog) / (2j * np.pi)


def winding_number(f, region, **kw):
    """Number of zeros of ``f`` inside ``region`` (rectangle), via the argument principle.

    Raises ``ValueError`` if the sampled phase does not close to an integer, which
    signals a zero on (or extremely close to) the contour.
    """
    c = ContourSample(f, list(region.corners()), **kw)
    w = c.winding
    n = int(round(w))
    if abs(w - n) > 0.05 or c.degenerate:
        raise ValueError(f"winding number {w:.3f} is not an integer; zero near the contour?")
    return n


def _step_ratio(f, z, h, v0=None):
    """f(z) / f'(z) using a central difference of the scaled values."""
    if v0 is None:
        v0 = f(z)
    vp, vm = f(z + h), f(z - h)
    rp = np.exp(log_ratio(v0, vp))
    rm = np.exp(log_ratio(v0, vm))
    denom = rp - rm
    if denom == 0 or not np.isfinite(denom):
        return None, v0
    return 2 * h / denom, v0


def newton(f, z0, tol=1e-11, max_iter=50, h_rel=1e-7, max_step=None, accept=None):
    """Newton iteration for a zero of ``f`` (scaled form) starting at ``z0``.

    Stops when ``|dz| < tol * max(1, |z|)``.  Returns ``(z, n_iter)``; raises
    NoConvergence otherwise.  ``accept`` may veto iterates (e.g. unphysical sheet).
    """
    z = complex(z0)
    for it in range(1, max_iter + 1):
        h = h_rel * max(1.0, abs(z))
        ratio, _ = _step_ratio(f, z, h)
        if ratio is None:
            raise NoConvergence(f"Newton derivative vanished at {z}")
        dz = -ratio
        if max_step is not None and abs(dz) > max_step:
            dz *= max_step / abs(dz)
        z = z + dz
        if accept is not None and not accept(z):
            raise NoConvergence(f"Newton left the admissible set at {z}")
        if abs(dz) < tol * max(1.0, abs(z)):
            return z, it
    raise NoConvergence(f"Newton did not converge from {z0} (last iterate {z})")


def quadratic_cluster(f, center, radius, n=16):
    """Two zeros of ``f`` near ``center`` from a least-squares quadratic model.

    ``f`` is sampled on a circle of the given radius; values are rescaled to the
    sample with the largest modulus so the model stays well conditioned.
    """
    t = 2 * np.pi * np.arange(n) / n
    z = center + radius * np.exp(1j * t)
    vals = [f(zz) for zz in z]
    ref = max(v[0] for v in vals)
    w = np.array([np.exp(v[0] - ref) * v[1] for v in vals])
    s = (z - center) / radius
    V = np.vstack([np.ones(n), s, s**2]).T
    c, *_ = np.linalg.lstsq(V, w, rcond=None)
    roots = np.roots(c[::-1]) if abs(c[2]) > 0 else np.array([-c[0] / c[1]])
    return center + radius * roots


def find_zeros_in_rect(f, region, tol=1e-11, min_size=1e-6, max_depth=16, polish=None, _depth=0):
    """Zeros of ``f`` inside a rectangle, by recursive argument-principle subdivision.

    Returns a list of ``(z, multiplicity)``.  A rectangle holding a single zero is
    resolved by the first contour moment followed by Newton; a rectangle that
    still holds several zeros once smaller than ``min_size`` is treated as a
    cluster through the quadratic model (and reported with its multiplicity if
    the model cannot separate the zeros).
    """
    polish = polish or (lambda z: newton(f, z, tol=tol)[0])
    c = ContourSample(f, list(region.corners()))
    w = c.winding
    n = int(round(w))
    if abs(w - n) > 0.05 or c.degenerate:
        # nudge the rectangle outward by a small irrational fraction and retry
        if _depth > max_depth:
            raise ValueError("could not place a contour away from the zeros")
        dx = 0.0137 * max(region.re_max - region.re_min, 1e-12)
        dy = 0.0137 * max(region.im_max - region.im_min, 1e-12)
        bigger = SearchRegion(region.re_min - dx, region.re_max + dx, region.im_min - dy, region.im_max + dy)
        return find_zeros_in_rect(f, bigger, tol, min_size, max_depth, polish, _depth + 1)
    if n <= 0:
        return []
    if n == 1:
        guess = c.moment(1)
        try:
            z = polish(guess)
            if region.contains(z, pad=1e-9 * max(1.0, abs(z))):
                return [(z, 1)]
        except NoConvergence:
            pass
        z = polish(region.center)
        return [(z, 1)]
    if region.size < min_size or _depth >= max_depth:
        s1, s2 = c.moment(1), c.moment(2)
        if n == 2:
            disc = np.sqrt(2 * s2 - s1**2 + 0j)
            guesses = [(s1 + disc) / 2, (s1 - disc) / 2]
        else:
            guesses = [s1 / n] * n
        out = []
        for g in guesses:
            try:
                out.append(polish(g))
            except NoConvergence:
                out.append(g)
        if n == 2 and abs(out[0] - out[1]) < 10 * tol * max(1.0, abs(out[0])):
            return [(0.5 * (out[0] + out[1]), 2)]
        return [(z, 1) for z in out]
    # split the longer side at an off-centre point so the new edges avoid symmetric zeros
    wre = region.re_max - region.re_min
    wim = region.im_max - region.im_min
    out = []
    if wre >= wim:
        xm = region.re_min + 0.5137 * wre
        parts = [
            SearchRegion(region.re_min, xm, region.im_min, region.im_max),
            SearchRegion(xm, region.re_max, region.im_min, region.im_max),
        ]
    else:
        ym = region.im_min + 0.4863 * wim
        parts = [
            SearchRegion(region.re_min, region.re_max, region.im_min, ym),
            SearchRegion(region.re_min, region.re_max, ym, region.im_max),
        ]
    for p in parts:
        out.extend(find_zeros_in_rect(f, p, tol, min_size, max_depth, polish, _depth + 1))
    return out


def dedupe(values, tol):
    """Drop values closer than ``tol`` (relative to max(1, |z|)) to an earlier one."""
    out = []
    for z in values:
        if all(abs(z - w) > tol * max(1.0, abs(z)) for w in out):
            out.append(z)
    return out
