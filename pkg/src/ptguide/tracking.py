"""Eigenvalue branches over a parameter sweep and their lifecycle events.

A sweep solves the spectral problem on a monotone parameter grid, links the
eigenvalues of consecutive steps into branches by an optimal assignment and
bisects a step whenever the link is not clean (a branch jumps farther than
the continuity bound, appears, disappears or changes between real and
complex).  Events are logged from the finest bracket:

    emerge             a branch appears (first decaying solution)
    reenter_continuum  a branch disappears into the continuous spectrum
    coalesce_to_real   a conjugate pair lands on the real axis as two reals
    split_to_complex   two reals collide and leave as a conjugate pair
    turning_point      Re lambda of a real branch has a local extremum
    unresolved         refinement ran out before the step became clean
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import collocation, matched, modematch
from .errors import NoConvergence, StepRefinementExhausted
from .profiles import SquareWellProfile
from .records import EigenvalueRecord, mark_conjugate_pairs, sort_key
from .rootfind import SearchRegion
from .transverse import threshold

EVENT_KINDS = ("emerge", "coalesce_to_real", "turning_point", "split_to_complex", "reenter_continuum", "unresolved")
IM_TOL = 1e-8
EVENT_TOL = 1e-4
MAX_LEVEL = 12
SLACK = 4.0


@dataclass(frozen=True)
class Event:
    parameter: float
    kind: str
    branches: tuple
    bracket: tuple = ()

    def as_row(self):
        lo, hi = self.bracket if self.bracket else (self.parameter, self.parameter)
        return {"parameter": self.parameter, "kind": self.kind, "branches": " ".join(map(str, self.branches)), "lo": lo, "hi": hi}


@dataclass
class Eigencurve:
    parameter: str
    values: list
    records: list  # per sample: list of EigenvalueRecord
    branch_ids: list  # per sample: branch id of each record
    events: list = field(default_factory=list)
    mu0_sq: float = float("nan")
    solver: str = ""

    def branches(self):
        return sorted({b for ids in self.branch_ids for b in ids})

    def branch(self, bid):
        """(parameters, eigenvalues) of one branch."""
        ps, zs = [], []
        for p, recs, ids in zip(self.values, self.records, self.branch_ids):
            for r, b in zip(recs, ids):
                if b == bid:
                    ps.append(p)
                    zs.append(r.value)
        return np.array(ps), np.array(zs, dtype=complex)

    def event_kinds(self, branches=None):
        if branches is None:
            return [e.kind for e in self.events]
        want = set(branches)
        return [e.kind for e in self.events if want & set(e.branches)]

    def rows(self):
        out = []
        for p, recs, ids in zip(self.values, self.records, self.branch_ids):
            for r, b in zip(recs, ids):
                row = {"parameter": p, "branch": b}
                row.update(r.as_row())
                out.append(row)
        return out


# ---------------------------------------------------------------- solvers

class MatchedSolver:
    """Matched-exterior collocation with continuation from the previous step."""

    name = "collocation-matched"

    def __init__(self, N1=None, N2=12, min_kappa=1e-7, re_window=None):
        # re_window: how far above the threshold frozen-map guesses are kept
        self.N1, self.N2, self.min_kappa, self.re_window = N1, N2, min_kappa, re_window

    def __call__(self, profile, guesses=()):
        op = matched.assemble_matched(profile, self.N1, self.N2)
        vals, kap = [], {}

        def add(g):
            if any(abs(g - v) < 1e-8 * max(1.0, abs(v)) for v in vals):
                return
            try:
                kappa, _ = matched.polish(op, g, avoid=vals)
            except NoConvergence:
                return
            lam = complex(op.lam(kappa))
            if kappa.real <= self.min_kappa or any(abs(lam - v) < 1e-8 * max(1.0, abs(lam)) for v in vals):
                return
            vals.append(lam)
            kap[lam] = kappa

        # continuation guesses first, so frozen-map guesses that lead to them stop early
        for g in guesses:
            add(complex(g))
        # with continuation guesses only emergence near threshold (small kappa) needs the frozen map
        refs = None
        if len(guesses):
            refs = (1e-2 * max(np.sqrt(threshold(profile.alpha0, profile.d)), 0.1),)
        found = matched.find_eigenvalues(
            profile, op=op, kappa_ref=refs, re_window=self.re_window, min_kappa=self.min_kappa, known=vals
        )
        for lam, kappa, _ in found:
            lam = complex(lam)
            if all(abs(lam - v) >= 1e-8 * max(1.0, abs(lam)) for v in vals):
                vals.append(lam)
                kap[lam] = kappa
        # conjugation closure
        k = 0
        while k < len(vals):
            z = vals[k]
            k += 1
            if abs(z.imag) > IM_TOL:
                add(z.conjugate())
        recs = [
            EigenvalueRecord(complex(v), self.name, (op.N1, op.N2), extra={"kappa": complex(kap[complex(v)])})
            for v in vals
        ]
        recs.sort(key=sort_key)
        return mark_conjugate_pairs(recs)


class ModematchSolver:
    """Secular-determinant solver for square wells (real axis, or a rectangle)."""

    name = "modematch"

    def __init__(self, N=modematch.DEFAULT_N, region=None):
        self.N, self.region = N, region

    def __call__(self, profile, guesses=()):
        search = self.region(profile) if callable(self.region) else self.region
        try:
            return modematch.find_eigenvalues(profile, self.N, search)
        except NoConvergence as exc:
            # keep what was found; the branch logic flags anything that goes missing
            return [EigenvalueRecord(complex(z), self.name, (self.N,)) for z in exc.partial]


class DenseSolver:
    """Full-spectrum Hermite/Fourier collocation with the two-resolution filter."""

    name = "collocation"

    def __init__(self, grid_kind="hermite", N1=collocation.DEFAULT_N1, N2=collocation.DEFAULT_N2, param=None):
        self.grid_kind, self.N1, self.N2, self.param = grid_kind, N1, N2, param

    def __call__(self, profile, guesses=()):
        return collocation.spectrum(profile, self.grid_kind, self.N1, self.N2, self.param)


def default_solver(profile):
    return ModematchSolver() if isinstance(profile, SquareWellProfile) else MatchedSolver()


def make_solver(name, profile=None, **kw):
    if name in (None, "auto"):
        return default_solver(profile)
    if name == "modematch":
        return ModematchSolver(**kw)
    if name in ("matched", "collocation-matched"):
        return MatchedSolver(**kw)
    if name in ("colloc", "collocation", "hermite", "fourier"):
        kind = "fourier" if name == "fourier" else "hermite"
        return DenseSolver(kind, **kw)
    raise ValueError(f"unknown solver {name!r}")


# ---------------------------------------------------------------- sweep

@dataclass
class _Step:
    p: float
    recs: list
    ids: list


def _is_complex(z):
    return abs(complex(z).imag) > IM_TOL


def _slope_cap(history, floor):
    """Largest branch slope over the last three accepted steps, times SLACK."""
    best = 0.0
    for s0, s1 in zip(history[-4:-1], history[-3:]):
        dp = s1.p - s0.p
        if dp <= 0:
            continue
        pos = {b: r.value for r, b in zip(s0.recs, s0.ids)}
        for r, b in zip(s1.recs, s1.ids):
            if b in pos:
                best = max(best, abs(r.value - pos[b]) / dp)
    return SLACK * max(best, floor)


def _predict(history):
    """Linear extrapolation per branch from the last two accepted steps."""
    last = history[-1]
    prev = {b: (history[-2].p, r.value) for r, b in zip(history[-2].recs, history[-2].ids)} if len(history) > 1 else {}
    return last, prev


def _assign(history, recs, p_new):
    """Optimal assignment of the new eigenvalues to the branches alive at the last step.

    Returns (pairs, cost) where pairs is a list of (index in last step, index in
    ``recs``).  Conjugate partners are kept on consistent half-planes.
    """
    last, prev = _predict(history)
    pred = []
    for r, b in zip(last.recs, last.ids):
        z = r.value
        if b in prev and last.p != prev[b][0]:
            p0, z0 = prev[b]
            z = z + (z - z0) * (p_new - last.p) / (last.p - p0)
        pred.append(z)
    new = [r.value for r in recs]
    if not pred or not new:
        return [], np.zeros((len(pred), len(new)))
    cost = np.abs(np.array(pred)[:, None] - np.array(new)[None, :])
    # tiny deterministic bias toward keeping the sign of Im, which breaks the
    # tie between the two members of a conjugate pair
    sgn = np.sign(np.round([z.imag for z in pred], 12))[:, None] * np.sign(np.round([z.imag for z in new], 12))[None, :]
    rows, cols = linear_sum_assignment(cost - 1e-12 * sgn)
    pairs = list(zip(rows.tolist(), cols.tolist()))
    # a pair landing on the real axis: the +Im member takes the larger real value
    old_vals = [r.value for r in last.recs]
    by_old = dict(pairs)
    for i, j in pairs:
        zi = old_vals[i]
        if zi.imag > IM_TOL:
            k = next((k for k in by_old if abs(old_vals[k] - zi.conjugate()) < 1e-8 * max(1, abs(zi))), None)
            if k is None:
                continue
            j2 = by_old[k]
            if not _is_complex(new[j]) and not _is_complex(new[j2]) and new[j].real < new[j2].real:
                by_old[i], by_old[k] = j2, j
    pairs = sorted(by_old.items())
    return pairs, cost


class _Sweeper:
    def __init__(self, family, solver, event_tol, max_level, slope_floor, strict):
        self.family, self.solver = family, solver
        self.event_tol, self.max_level = event_tol, max_level
        self.slope_floor, self.strict = slope_floor, strict
        self.history = []
        self.events = []
        self.next_id = 0
        self.cache = {}

    def solve(self, p):
        if p not in self.cache:
            guesses = []
            if self.history:
                last, prev = _predict(self.history)
                for r, b in zip(last.recs, last.ids):
                    z = r.value
                    if b in prev and last.p != prev[b][0]:
                        p0, z0 = prev[b]
                        z = z + (z - z0) * (p - last.p) / (last.p - p0)
                    guesses.append(z)
            recs = self.solver(self.family(p), guesses)
            self.cache[p] = sorted(recs, key=sort_key)
        return self.cache[p]

    def start(self, p):
        recs = self.solve(p)
        ids = []
        for _ in recs:
            ids.append(self.next_id)
            self.next_id += 1
        self.history.append(_Step(p, recs, ids))

    def clean(self, recs, p):
        last = self.history[-1]
        if len(recs) != len(last.recs):
            return False
        pairs, cost = _assign(self.history, recs, p)
        if len(self.history) >= 3:
            bound = _slope_cap(self.history, self.slope_floor) * (p - last.p)
        else:
            bound = np.inf
        for i, j in pairs:
            if _is_complex(last.recs[i].value) != _is_complex(recs[j].value):
                return False
            if cost[i, j] > bound:
                return False
        return True

    def advance(self, p, level=0):
        recs = self.solve(p)
        last = self.history[-1]
        if self.clean(recs, p):
            self.accept(p, recs, events=False)
            return
        if p - last.p <= self.event_tol or level >= self.max_level:
            exhausted = p - last.p > self.event_tol
            self.accept(p, recs, events=True, exhausted=exhausted)
            return
        mid = 0.5 * (last.p + p)
        self.advance(mid, level + 1)
        self.advance(p, level + 1)

    def accept(self, p, recs, events, exhausted=False):
        last = self.history[-1]
        pairs, cost = _assign(self.history, recs, p)
        ids = [None] * len(recs)
        for i, j in pairs:
            ids[j] = last.ids[i]
        bracket = (last.p, p)
        mid = 0.5 * (last.p + p)
        if events:
            matched_old = {i for i, _ in pairs}
            gone = [last.ids[i] for i in range(len(last.recs)) if i not in matched_old]
            for b in gone:
                self.events.append(Event(mid, "reenter_continuum", (b,), bracket))
            done = set()
            for i, j in pairs:
                zi, zj = last.recs[i].value, recs[j].value
                if i in done or _is_complex(zi) == _is_complex(zj):
                    continue
                # find the partner that makes the same transition
                partner = None
                for i2, j2 in pairs:
                    if i2 == i or i2 in done:
                        continue
                    z2i, z2j = last.recs[i2].value, recs[j2].value
                    if _is_complex(z2i) != _is_complex(z2j):
                        if _is_complex(zi) and abs(z2i - zi.conjugate()) < 1e-6 * max(1, abs(zi)):
                            partner = i2
                        elif _is_complex(zj) and abs(z2j - zj.conjugate()) < 1e-6 * max(1, abs(zj)):
                            partner = i2
                    if partner is not None:
                        break
                done.add(i)
                bids = (last.ids[i],)
                if partner is not None:
                    done.add(partner)
                    bids = tuple(sorted((last.ids[i], last.ids[partner])))
                kind = "coalesce_to_real" if _is_complex(zi) else "split_to_complex"
                self.events.append(Event(mid, kind, bids, bracket))
            if exhausted:
                self.events.append(Event(mid, "unresolved", tuple(sorted(b for b in last.ids)), bracket))
                if self.strict:
                    raise StepRefinementExhausted(f"step {bracket} could not be resolved in {self.max_level} bisections")
        born = [j for j in range(len(recs)) if ids[j] is None]
        for j in sorted(born, key=lambda j: sort_key(recs[j].value)):
            ids[j] = self.next_id
            self.next_id += 1
        if born:
            bids = tuple(ids[j] for j in born)
            self.events.append(Event(mid if events else p, "emerge", tuple(sorted(bids)), bracket))
        self.history.append(_Step(p, recs, ids))


def _turning_points(curve):
    out = []
    for b in curve.branches():
        ps, zs = curve.branch(b)
        for k in range(1, len(ps) - 1):
            z0, z1, z2 = zs[k - 1 : k + 2]
            if any(_is_complex(z) for z in (z0, z1, z2)):
                continue
            d0, d1 = z1.real - z0.real, z2.real - z1.real
            if d0 * d1 < 0 and min(abs(d0), abs(d1)) > 1e-12:
                # vertex of the parabola through the three samples
                x = ps[k - 1 : k + 2]
                y = np.array([z0.real, z1.real, z2.real])
                c = np.polyfit(x - x[1], y, 2)
                pv = x[1] - c[1] / (2 * c[0]) if c[0] != 0 else x[1]
                pv = float(np.clip(pv, x[0], x[2]))
                out.append(Event(pv, "turning_point", (b,), (float(x[0]), float(x[2]))))
    return out


def sweep(family, grid, solver=None, parameter="epsilon", event_tol=EVENT_TOL, max_level=MAX_LEVEL, slope_floor=1e-2, strict=False):
    """Follow eigenvalue branches of ``family(p)`` over the monotone ``grid``.

    ``solver`` maps (profile, guesses) to a list of EigenvalueRecord; by
    default mode matching for square wells and matched collocation otherwise.
    A step is bisected while its branch links are not clean, down to
    ``event_tol`` or ``max_level`` halvings; a step that
    is still unclean after ``max_level`` halvings is logged as ``unresolved``
    (or raises StepRefinementExhausted with ``strict``).
    """
    grid = [float(p) for p in grid]
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise ValueError("parameter grid must be strictly increasing")
    prof0 = family(grid[0])
    solver = solver or default_solver(prof0)
    sw = _Sweeper(family, solver, event_tol, max_level, slope_floor, strict)
    sw.start(grid[0])
    for p in grid[1:]:
        sw.advance(p)
    curve = Eigencurve(
        parameter,
        [s.p for s in sw.history],
        [s.recs for s in sw.history],
        [s.ids for s in sw.history],
        [],
        threshold(prof0.alpha0, prof0.d),
        getattr(solver, "name", str(solver)),
    )
    order = {k: i for i, k in enumerate(EVENT_KINDS)}
    events = sw.events + _turning_points(curve)
    curve.events = sorted(events, key=lambda e: (e.parameter, order[e.kind], e.branches))
    return curve


# ---------------------------------------------------------------- analysis

def detect_pt_breaking(curve, im_tol=IM_TOL, family=None, solver=None, tol=EVENT_TOL):
    """Maximal parameter intervals in which some branch has |Im lambda| > im_tol.

    Interval ends sit midway in the bracketing step.  When ``family`` and
    ``solver`` are given, brackets wider than ``tol`` are bisected further.
    """
    broken = [any(abs(r.value.imag) > im_tol for r in recs) for recs in curve.records]
    ps = curve.values

    def is_broken(p):
        return any(abs(r.value.imag) > im_tol for r in solver(family(p)))

    def refine(lo, hi, lo_state):
        while hi - lo > tol and family is not None and solver is not None:
            mid = 0.5 * (lo + hi)
            if is_broken(mid) == lo_state:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    out = []
    start = None
    for k, b in enumerate(broken):
        if b and start is None:
            start = ps[0] if k == 0 else refine(ps[k - 1], ps[k], False)
        if not b and start is not None:
            out.append((start, refine(ps[k - 1], ps[k], True)))
            start = None
    if start is not None:
        out.append((start, ps[-1]))
    return out


def crossing_analysis(curve, tol=1e-6):
    """Minimal gap between real branches that are neighbours at some sample.

    Returns dicts with the branch pair, the minimal gap, where it occurs and
    whether it counts as a true crossing (gap below ``tol``).
    """
    pairs = set()
    for recs, ids in zip(curve.records, curve.branch_ids):
        real = sorted((r.value.real, b) for r, b in zip(recs, ids) if not _is_complex(r.value))
        for (_, a), (_, b) in zip(real[:-1], real[1:]):
            pairs.add(tuple(sorted((a, b))))
    out = []
    for a, b in sorted(pairs):
        best = (np.inf, None)
        for p, recs, ids in zip(curve.values, curve.records, curve.branch_ids):
            va = [r.value for r, i in zip(recs, ids) if i == a and not _is_complex(r.value)]
            vb = [r.value for r, i in zip(recs, ids) if i == b and not _is_complex(r.value)]
            if va and vb:
                g = abs(va[0].real - vb[0].real)
                if g < best[0]:
                    best = (g, p)
        if best[1] is not None:
            out.append({"branches": (a, b), "gap": float(best[0]), "parameter": float(best[1]), "crossing": bool(best[0] < tol)})
    return out


def square_well_search(profile):
    """Real search interval for square-well sweeps: from just below min alpha^2 to the threshold."""
    lo = min(0.0, min(profile.alpha_minus, profile.alpha_plus, profile.alpha0) ** 2 - 1.0)
    return SearchRegion(lo, modematch.default_search(profile).re_max)
