import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perfectsim.cftp import InvalidModelError, run_cftp
from perfectsim.spatial import (
    AreaInteractionFactor,
    CoverageField,
    Grain,
    MultiscaleParams,
    PatternState,
    SpatialPattern,
    area_interaction_factor,
    area_interaction_model,
    coverage_measure,
    incremental_coverage,
    log_density,
    multiscale_model,
)
from perfectsim.summary import estimate_K


def two_disc_union(r, d):
    if d >= 2 * r:
        return 2 * math.pi * r * r
    lens = 2 * r * r * math.acos(d / (2 * r)) - 0.5 * d * math.sqrt(4 * r * r - d * d)
    return 2 * math.pi * r * r - lens


def _state(field, pts):
    s = PatternState([field])
    for i, p in enumerate(pts):
        s.add(i, tuple(p))
    return s


# ---------------------------------------------------------------------------
# patterns and grains


def test_pattern_validation():
    with pytest.raises(ValueError):
        SpatialPattern([[1.5, 0.5]])
    with pytest.raises(ValueError):
        SpatialPattern([[0.5, 0.5]], (0, 0, 0, 1))
    p = SpatialPattern([[0.2, 0.2], [0.2, 0.2]])
    assert len(p) == 2 and p.area == 1.0


def test_grain_positive():
    with pytest.raises(InvalidModelError):
        Grain(0.0)


# ---------------------------------------------------------------------------
# coverage


def test_empty_pattern_zero():
    assert coverage_measure(np.zeros((0, 2)), Grain(0.1)) == 0.0


@pytest.mark.parametrize("r", [0.013, 0.07, 0.1, 0.3])
def test_single_disc_area(r):
    assert coverage_measure([[0.4, 0.6]], Grain(r)) == pytest.approx(math.pi * r * r, rel=1e-2)


def test_two_discs_against_exact_union():
    r = 0.1
    field = CoverageField(Grain(r))
    rng = np.random.default_rng(0)
    assert coverage_measure([[0.3, 0.3], [0.5, 0.3]], None, field) == pytest.approx(2 * math.pi * r * r, rel=1e-2)
    assert coverage_measure([[0.3, 0.3], [0.3, 0.3]], None, field) == pytest.approx(math.pi * r * r, rel=1e-2)
    for _ in range(50):
        d = rng.uniform(0, 2.5 * r)
        a = rng.uniform(0, 2 * math.pi)
        p = np.array([0.5, 0.5])
        q = p + d * np.array([math.cos(a), math.sin(a)])
        got = coverage_measure([p, q], None, field)
        # discs sit on the centres of the cells holding p and q
        cp, cq = field.cells(p), field.cells(q)
        d_snap = field.h * float(np.hypot(*(cp - cq)))
        assert got == pytest.approx(two_disc_union(r, d_snap), rel=1e-2)
        assert abs(d_snap - d) <= field.h * math.sqrt(2)


def test_grains_not_clipped_at_window_edge():
    r = 0.1
    assert coverage_measure([[0.0, 0.0]], Grain(r)) == pytest.approx(math.pi * r * r, rel=1e-2)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 25), r=st.sampled_from([0.03, 0.07, 0.12]))
def test_incremental_matches_difference(seed, n, r):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    u = rng.random(2)
    field = CoverageField(Grain(r))
    inc = incremental_coverage(u, pts, None, field)
    diff = coverage_measure(np.vstack([pts, u]), None, field) - coverage_measure(pts, None, field)
    assert inc == pytest.approx(diff, rel=1e-12, abs=1e-15)
    assert inc >= 0
    # the cached PatternState path agrees
    assert _state(field, pts).uncovered_area(tuple(u), 0) == pytest.approx(inc, rel=1e-12, abs=1e-15)


def test_incremental_examples():
    r = 0.05
    field = CoverageField(Grain(r))
    pts = np.array([[0.2, 0.2], [0.7, 0.7]])
    assert incremental_coverage([0.5, 0.1], pts, None, field) == pytest.approx(math.pi * r * r, rel=1e-2)
    assert incremental_coverage([0.2, 0.2], pts, None, field) == 0.0


def test_grid_convergence():
    rng = np.random.default_rng(4)
    for _ in range(5):
        pts = rng.random((30, 2))
        g = Grain(0.07)
        coarse = coverage_measure(pts, None, CoverageField(g, 0.0035))
        fine = coverage_measure(pts, None, CoverageField(g, 0.00175))
        assert abs(coarse - fine) < 0.01 * fine


# ---------------------------------------------------------------------------
# factors


def test_gamma_one_is_poisson():
    field = CoverageField(Grain(0.1))
    rate, inter = area_interaction_factor(3.0, 1.0, None, field)
    cfg = _state(field, np.random.default_rng(0).random((10, 2)))
    assert rate.log_ratio((0.5, 0.5), cfg) + inter.log_ratio((0.5, 0.5), cfg) == pytest.approx(math.log(3.0))


def test_empty_and_duplicate_ratios():
    r = 0.08
    field = CoverageField(Grain(r))
    f = AreaInteractionFactor(math.log(2.0), field, 0)
    empty = _state(field, [])
    assert f.log_ratio((0.5, 0.5), empty) == pytest.approx(-math.log(2.0) * math.pi * r * r, rel=1e-2)
    one = _state(field, [(0.3, 0.3)])
    assert f.log_ratio((0.3, 0.3), one) == 0.0


def test_invalid_gamma():
    with pytest.raises(InvalidModelError):
        area_interaction_factor(1.0, 0.0, Grain(0.1))
    with pytest.raises(InvalidModelError):
        multiscale_model(MultiscaleParams(1.0, -0.1, -1.0, 0.1, 0.05))
    with pytest.raises(InvalidModelError):
        multiscale_model(MultiscaleParams(1.0, 1.0, 0.1, 0.1, 0.05))


def test_directions():
    assert AreaInteractionFactor(2.0, CoverageField(Grain(0.1)), 0).increasing
    assert not AreaInteractionFactor(-2.0, CoverageField(Grain(0.1)), 0).increasing


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lg1=st.floats(0, 60), lg2=st.floats(-250, 0))
def test_multiscale_monotone_and_bounded(seed, lg1, lg2):
    rng = np.random.default_rng(seed)
    model = multiscale_model(MultiscaleParams(2.0, lg1, lg2, 0.07, 0.013))
    pts = rng.random((int(rng.integers(0, 30)), 2))
    sub = pts[rng.random(len(pts)) < 0.5]
    fields = [f.field for f in model.factors[1:]]
    small, big = PatternState(fields), PatternState(fields)
    for i, p in enumerate(pts):
        big.add(i, tuple(p))
    for i, p in enumerate(sub):
        small.add(i, tuple(p))
    log_dom = model.space._log_rate
    for u in map(tuple, rng.random((5, 2))):
        full = 0.0
        for f in model.factors:
            a, b = f.log_ratio(u, small), f.log_ratio(u, big)
            assert (a <= b + 1e-9) if f.increasing else (a >= b - 1e-9)
            assert f.log_lower(None) - 1e-9 <= b <= f.log_upper(None) + 1e-9
            full += b
        # local stability
        assert full <= log_dom + 1e-9


def test_redwood_dominating_rate():
    import mpmath

    mpmath.mp.dps = 50
    want = mpmath.mpf("0.118") * mpmath.power(10, 200 * mpmath.pi * mpmath.mpf("0.013") ** 2)
    assert float(want) == pytest.approx(0.1507, abs=5e-5)
    model = multiscale_model(MultiscaleParams(0.118, math.log10(2000), -200, 0.07, 0.013))
    # the grid disc area replaces pi r^2 in the exponent
    assert model.space.rate == pytest.approx(float(want), rel=2e-3)


def test_thinning_probability():
    p = MultiscaleParams(1.0, 2.0, -3.0, 0.1, 0.05)
    model = multiscale_model(p)
    m1, m2 = (f.field.disc_area for f in model.factors[1:])
    want = -2.0 * math.log(10) * m1 - 3.0 * math.log(10) * m2
    assert model.log_lower_init(np.zeros((1, 2)))[0] == pytest.approx(want)
    assert model.space.rate == pytest.approx(10 ** (3.0 * m2))


def test_unit_gammas_pure_poisson():
    model = multiscale_model(MultiscaleParams(5.0, 0.0, 0.0, 0.1, 0.05))
    assert model.space.rate == pytest.approx(5.0, rel=1e-14)
    assert model.log_lower_init(np.zeros((1, 2)))[0] == pytest.approx(math.log(1.0))


def test_upper_acceptance_dominates_lower():
    rng = np.random.default_rng(8)
    model = multiscale_model(MultiscaleParams(50.0, 2.0, -20.0, 0.07, 0.013))
    fields = [f.field for f in model.factors[1:]]
    for _ in range(100):
        pts = rng.random((int(rng.integers(1, 40)), 2))
        keep = rng.random(len(pts)) < 0.5
        up, lo = PatternState(fields), PatternState(fields)
        for i, p in enumerate(pts):
            up.add(i, tuple(p))
            if keep[i]:
                lo.add(i, tuple(p))
        u = tuple(rng.random(2))
        hi = sum(max(f.log_ratio(u, up), f.log_ratio(u, lo)) for f in model.factors)
        low = sum(min(f.log_ratio(u, up), f.log_ratio(u, lo)) for f in model.factors)
        assert low <= hi


def test_log_density_consistent_with_ratios():
    rng = np.random.default_rng(2)
    model = multiscale_model(MultiscaleParams(3.0, 1.5, -2.0, 0.1, 0.04))
    fields = [f.field for f in model.factors[1:]]
    pts = rng.random((12, 2))
    u = rng.random(2)
    cfg = PatternState(fields)
    for i, p in enumerate(pts):
        cfg.add(i, tuple(p))
    ratio = sum(f.log_ratio(tuple(u), cfg) for f in model.factors)
    assert ratio == pytest.approx(log_density(np.vstack([pts, u]), model) - log_density(pts, model), abs=1e-9)


def test_length_scale_reports_caller_units():
    model = multiscale_model(MultiscaleParams(0.118, math.log10(2000), -200, 0.07, 0.013), length_scale=4.18)
    assert model.space.window == pytest.approx((0, 0, 4.18, 4.18))
    assert model.factors[1].field.grain.radius == pytest.approx(0.07 * 4.18)
    res = run_cftp(model, 3)
    pat = res.config.pattern(model.window)
    assert pat.window == (0.0, 0.0, 1.0, 1.0) and len(pat) == len(res.config)


# ---------------------------------------------------------------------------
# qualitative behaviour


def _mean_K(model, t, n):
    vals = []
    for s in range(n):
        pat = run_cftp(model, s).config.pattern((0, 0, 1, 1))
        if len(pat) >= 2:
            vals.append(estimate_K(pat, [t]).values[0])
    return np.mean(vals)


def test_attraction_raises_K():
    model = multiscale_model(MultiscaleParams(100.0, 40.0, 0.0, 0.1, 0.05))
    assert _mean_K(model, 0.1, 15) > math.pi * 0.01


def test_repulsion_lowers_K():
    model = multiscale_model(MultiscaleParams(50.0, 0.0, -60.0, 0.1, 0.05))
    assert _mean_K(model, 0.06, 15) < math.pi * 0.06**2


def test_area_interaction_model_runs():
    model = area_interaction_model(20.0, 0.5, 0.05)
    res = run_cftp(model, 0)
    assert len(res.config) >= 0 and res.horizon >= 1.0
