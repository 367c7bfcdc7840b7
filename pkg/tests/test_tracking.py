import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptguide import tracking as T
from ptguide.errors import StepRefinementExhausted
from ptguide.profiles import SquareWellProfile
from ptguide.records import EigenvalueRecord, mark_conjugate_pairs


class Point:
    """Minimal profile stand-in carrying the swept parameter."""

    def __init__(self, p, sign=1):
        self.p, self.sign, self.alpha0, self.d = p, sign, 1.0, 2.0


def synthetic(fn):
    def solver(prof, guesses=()):
        vals = fn(prof.p)
        if prof.sign < 0:
            vals = [np.conj(v) for v in vals]
        return mark_conjugate_pairs([EigenvalueRecord(complex(v), "synthetic", ()) for v in vals])

    return solver


def split_family(p0):
    # two reals 0.5 +- sqrt(p0 - p) meet at p0 and continue as a conjugate pair
    def fn(p):
        r = np.sqrt(complex(p0 - p))
        return [0.5 - r, 0.5 + r] if p < p0 else [0.5 - r, 0.5 + r]

    return fn


def window_family(a, b):
    return lambda p: [0.6 - (p - a) * (b - p)] if a < p < b else []


GRID = np.linspace(0.0, 1.0, 11)


def kinds(curve):
    return [e.kind for e in curve.events]


def test_split_to_complex_located():
    curve = T.sweep(lambda p: Point(p), GRID, synthetic(split_family(0.437)))
    ev = [e for e in curve.events if e.kind == "split_to_complex"]
    assert len(ev) == 1
    lo, hi = ev[0].bracket
    assert lo < 0.437 <= hi and hi - lo <= 1e-4
    assert len(ev[0].branches) == 2
    a, b = (curve.branch(x)[1] for x in ev[0].branches)
    post = [(za, zb) for za, zb in zip(a, b) if abs(za.imag) > 1e-8]
    assert post and all(abs(za - np.conj(zb)) < 1e-8 for za, zb in post)


def test_coalesce_to_real_located():
    fn = split_family(0.537)
    curve = T.sweep(lambda p: Point(p), GRID, synthetic(lambda p: fn(1.074 - p)))
    ev = [e for e in curve.events if e.kind == "coalesce_to_real"]
    assert len(ev) == 1 and abs(ev[0].parameter - 0.537) < 1e-4


def test_emerge_and_reenter():
    curve = T.sweep(lambda p: Point(p), GRID, synthetic(window_family(0.23, 0.81)))
    ks = kinds(curve)
    assert ks[0] == "emerge" and ks[-1] == "reenter_continuum"
    em = curve.events[0]
    re = curve.events[-1]
    assert abs(em.parameter - 0.23) < 1e-4 and abs(re.parameter - 0.81) < 1e-4
    assert "turning_point" in ks


def test_turning_point_vertex():
    curve = T.sweep(lambda p: Point(p), GRID, synthetic(lambda p: [0.1 + (p - 0.43) ** 2]))
    tp = [e for e in curve.events if e.kind == "turning_point"]
    assert len(tp) == 1 and abs(tp[0].parameter - 0.43) < 1e-6


def test_determinism():
    s = synthetic(split_family(0.437))
    a = T.sweep(lambda p: Point(p), GRID, s)
    b = T.sweep(lambda p: Point(p), GRID, s)
    assert a.events == b.events
    assert [r.value for rs in a.records for r in rs] == [r.value for rs in b.records for r in rs]


def test_mirror_symmetry():
    s = synthetic(split_family(0.437))
    a = T.sweep(lambda p: Point(p), GRID, s)
    b = T.sweep(lambda p: Point(p, -1), GRID, s)
    assert [(e.parameter, e.kind) for e in a.events] == [(e.parameter, e.kind) for e in b.events]
    for ra, rb in zip(a.records, b.records):
        np.testing.assert_allclose(sorted(np.conj([r.value for r in ra]), key=lambda z: (z.real, z.imag)),
                                   sorted([r.value for r in rb], key=lambda z: (z.real, z.imag)))
    assert T.detect_pt_breaking(a) == T.detect_pt_breaking(b)


def test_detect_pt_breaking_intervals():
    fn = split_family(0.437)
    solver = synthetic(lambda p: fn(p) if p < 0.7 else [0.2, 0.3])
    curve = T.sweep(lambda p: Point(p), GRID, solver)
    iv = T.detect_pt_breaking(curve)
    assert len(iv) == 1
    assert abs(iv[0][0] - 0.437) < 1e-4
    refined = T.detect_pt_breaking(curve, family=lambda p: Point(p), solver=solver)
    assert abs(refined[0][1] - 0.7) < 1e-4


def test_detect_pt_breaking_none():
    curve = T.sweep(lambda p: Point(p), GRID, synthetic(lambda p: [0.2 + p, 0.9 + p]))
    assert T.detect_pt_breaking(curve) == []


def test_crossing_analysis():
    avoided = synthetic(lambda p: [1 - np.sqrt((p - 0.5) ** 2 + 0.01), 1 + np.sqrt((p - 0.5) ** 2 + 0.01)])
    out = T.crossing_analysis(T.sweep(lambda p: Point(p), GRID, avoided))
    assert len(out) == 1 and not out[0]["crossing"] and abs(out[0]["gap"] - 0.2) < 1e-12
    single = T.sweep(lambda p: Point(p), GRID, synthetic(lambda p: [p]))
    assert T.crossing_analysis(single) == []


def test_unresolved_and_strict():
    jump = synthetic(lambda p: [0.1 + 0.01 * p] if p < 0.55 else [0.9 + 0.01 * p])
    curve = T.sweep(lambda p: Point(p), GRID, jump, max_level=3)
    assert "unresolved" in kinds(curve)
    with pytest.raises(StepRefinementExhausted):
        T.sweep(lambda p: Point(p), GRID, jump, max_level=3, strict=True)


def test_grid_must_increase():
    with pytest.raises(ValueError):
        T.sweep(lambda p: Point(p), [0.0, 0.5, 0.4], synthetic(lambda p: []))


def test_square_well_width_sweep():
    family = lambda L: SquareWellProfile(1.0, 0.5, 0.5, -L, L, 2.0)
    curve = T.sweep(family, np.linspace(1.0, 6.0, 11), T.ModematchSolver(16, T.square_well_search), parameter="L")
    first = curve.branch_ids[0][0]
    ps, zs = curve.branch(first)
    assert ps[0] == 1.0 and ps[-1] == 6.0
    assert np.all(np.diff(zs.real) < 0) and np.all(zs.real > 0.25)
    assert zs[-1].real - 0.25 < 0.05


def test_mirror_square_well_sweep():
    fam = lambda e: SquareWellProfile(1.0, 1.0 - e, 1.0 - 0.5 * e, -2.0, 2.0, 2.0)
    mir = lambda e: fam(e).negated()
    solver = T.ModematchSolver(12, T.square_well_search)
    grid = np.linspace(0.2, 1.0, 5)
    a, b = T.sweep(fam, grid, solver), T.sweep(mir, grid, solver)
    assert kinds(a) == kinds(b)
    for ra, rb in zip(a.records, b.records):
        np.testing.assert_allclose(np.conj([r.value for r in ra]), [r.value for r in rb], atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(p0=st.floats(0.05, 0.95), a=st.floats(0.0, 0.4), w=st.floats(0.2, 0.55))
def test_event_log_well_formed_property(p0, a, w):
    b = min(a + w, 0.99)
    split = split_family(p0)
    fn = lambda p: split(p) + window_family(a, b)(p)
    curve = T.sweep(lambda p: Point(p), GRID, synthetic(fn))
    first_seen = {}
    for k, ids in enumerate(curve.branch_ids):
        for i in ids:
            first_seen.setdefault(i, curve.values[k])
    for e in curve.events:
        assert e.kind in T.EVENT_KINDS
        if e.kind == "split_to_complex":
            for bid in e.branches:
                prior = [x for x in curve.events if bid in x.branches and x.parameter <= e.parameter and x.kind in ("emerge", "coalesce_to_real")]
                assert prior or first_seen[bid] == curve.values[0]
        if e.kind == "reenter_continuum":
            ps, _ = curve.branch(e.branches[0])
            assert ps[-1] <= e.parameter
    # conjugation closure at every step
    for recs in curve.records:
        vals = [r.value for r in recs]
        for z in vals:
            assert min(abs(np.conj(z) - v) for v in vals) < 1e-12
