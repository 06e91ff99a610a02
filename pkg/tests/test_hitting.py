import math

import numpy as np
import pytest

from fracheat import DomainError
from fracheat.hitting import (HittingExperiment, HittingResult, Window, bound_comparison, cell_for_level,
                              gaussian_one_point_variance, hit_test, hitting_probability_mc, min_distance,
                              small_ball_scaling, wilson_interval)
from fracheat.kernel import squared_mass_constant
from fracheat.potential import Box, CompactSetSpec
from fracheat.spde import ModelSpec, SolverGrid

MODEL = ModelSpec(2.0, 1, "additive", "exact")
GRID = SolverGrid(2.0, 1.0, 4.0, 64, 64)
WIN = Window((0.5, 1.0), (-0.5, 0.5))


def box(lo, hi):
    return CompactSetSpec(1, (Box((lo,), (hi,)),))


def run(target, window=WIN, n=200, seed0=0, delta=None, model=MODEL):
    return hitting_probability_mc(HittingExperiment(model, GRID, window, target, n_samples=n, seed0=seed0, delta=delta))


@pytest.fixture(scope="module")
def base():
    return run(box(0.3, 0.7))


def test_wilson_interval_reference_values():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and hi == pytest.approx(0.03699, abs=1e-4)
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-3) and hi == pytest.approx(0.5962, abs=1e-3)
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


def test_wilson_coverage_against_bernoulli_oracle():
    rng = np.random.default_rng(0)
    p, n = 0.3, 200
    ks = rng.binomial(n, p, size=4000)
    table = {k: wilson_interval(k, n) for k in np.unique(ks)}
    cover = np.mean([table[k][0] <= p <= table[k][1] for k in ks])
    assert 0.935 <= cover <= 0.965


def test_window_validation():
    with pytest.raises(DomainError):
        Window((1.0, 0.5), (0, 1))
    with pytest.raises(DomainError):
        Window((0.5, 1.0), (0, 1), "fixed-time")
    assert Window.fixed_time(0.5, (0, 1)).mode == "fixed-time"
    assert WIN.contains(Window((0.6, 0.9), (0.0, 0.2)))
    with pytest.raises(DomainError):
        HittingExperiment(MODEL, GRID, Window((0.0, 1.0), (0, 1)), box(0, 1))
    with pytest.raises(DomainError):
        HittingExperiment(MODEL, GRID, Window((0.5, 1.0), (0, 3.5)), box(0, 1))
    with pytest.raises(DomainError):
        HittingExperiment(MODEL, GRID, WIN, CompactSetSpec(2, points=((0.0, 0.0),)))
    with pytest.raises(DomainError):
        HittingExperiment(MODEL, GRID, WIN, box(0, 1), n_samples=50)


def test_trivial_hit_and_far_miss():
    sure = run(box(-100.0, 100.0), n=100)
    assert sure.estimate == 1.0 and sure.wilson_ci[0] > 0.95
    far = run(CompactSetSpec(1, points=((50.0,),)), n=100, delta=0.0)
    assert far.estimate == 0.0 and far.wilson_ci[0] == 0.0


def test_delta_sensitivity_is_monotone(base):
    s = base.sensitivity
    assert s["zero"]["estimate"] <= s["half"]["estimate"] <= base.estimate <= s["double"]["estimate"]
    assert base.delta == pytest.approx(base.modulus)
    assert not base.delta_below_modulus
    assert base.wilson_ci[0] <= base.estimate <= base.wilson_ci[1]


def test_nested_targets_and_windows_are_monotone(base):
    bigger = run(box(0.2, 0.8))
    assert np.all(bigger.min_distances <= base.min_distances)
    smaller_window = run(box(0.3, 0.7), window=Window((0.6, 0.9), (-0.25, 0.25)))
    assert np.all(smaller_window.min_distances >= base.min_distances)
    fixed = run(box(0.3, 0.7), window=Window.fixed_time(1.0, (-0.5, 0.5)))
    assert np.all(fixed.min_distances >= base.min_distances)


def test_determinism_and_seed_dependence(base):
    again = run(box(0.3, 0.7))
    assert np.array_equal(again.min_distances, base.min_distances)
    assert again.to_dict() == base.to_dict()
    other = run(box(0.3, 0.7), seed0=10_000)
    assert not np.array_equal(other.min_distances, base.min_distances)


def test_single_sample_hit_test():
    from fracheat.spde import Recording, solve
    from fracheat.hitting import window_indices
    ti, xi = window_indices(GRID, WIN)
    sample = solve(MODEL, GRID, 3, Recording(ti, xi))
    A = box(0.3, 0.7)
    dist = min_distance(sample, WIN, A)
    assert hit_test(sample, WIN, A, dist)
    assert not hit_test(sample, WIN, A, dist * 0.999) or dist == 0.0
    with pytest.raises(DomainError):
        hit_test(sample, WIN, A, -1.0)


def test_thresholds_per_mode(base):
    assert base.threshold == pytest.approx(1 - 6)
    ft = run(box(0.3, 0.7), window=Window.fixed_time(1.0, (-0.5, 0.5)), n=100)
    fs = run(box(0.3, 0.7), window=Window.fixed_space((0.5, 1.0), 0.0), n=100)
    assert ft.threshold == pytest.approx(-1.0) and fs.threshold == pytest.approx(-3.0)
    for r in (base, ft, fs):
        assert r.capacity_value == 1.0 and math.isinf(r.hausdorff_value)


def test_bound_comparison_cases(base):
    rep = bound_comparison(base)
    assert rep.c1_hat == (base.estimate,) and rep.c2_hat == (None,) and rep.upper_vacuous == (True,)
    assert rep.ordering_ok
    fam = bound_comparison([base, run(box(0.2, 0.8)), run(box(0.25, 0.75))])
    assert fam.stable and fam.c1_spread < 3.0
    zero = HittingResult(0.2, (0.1, 0.3), 100, 20, 0.1, 0.1, False, {}, "space-time", 0.5, 0.0, 0.0, 0)
    rep = bound_comparison(zero)
    assert rep.c1_hat == (None,) and not rep.ordering_ok


def test_one_point_variance():
    assert gaussian_one_point_variance(2.0, 0.25) == pytest.approx(squared_mass_constant(2.0) * 0.5)


def test_cell_for_level_geometry():
    I, J = cell_for_level(2.0, 2, 0.5, 0.0)
    assert I[1] - I[0] == pytest.approx(2.0**-8) and J[1] - J[0] == pytest.approx(2.0**-4)
    assert I[0] <= 0.5 < I[1] and J[0] <= 0.0 < J[1]


def test_small_ball_additive_exponent():
    fit = small_ball_scaling(2.0, 1, [0.0], [3, 4, 5], n_samples=1000, seed0=7)
    assert len(fit.fitted_levels) == 3
    assert all(0 < f < 0.95 for f in fit.frequencies)
    assert fit.exponent >= 1 - 0.2 and fit.passed
    assert fit.to_dict()["passed"] is True


def test_small_ball_excludes_saturated_levels():
    fit = small_ball_scaling(2.0, 1, [0.0], [1, 2, 3], n_samples=400, seed0=1, max_frequency=0.0)
    assert fit.fitted_levels == () and math.isnan(fit.exponent) and not fit.passed


def test_small_ball_interval_shrinks_with_n():
    a = small_ball_scaling(2.0, 1, [0.0], [3, 4, 5], n_samples=500, seed0=2)
    b = small_ball_scaling(2.0, 1, [0.0], [3, 4, 5], n_samples=1000, seed0=2)
    wa = a.intervals[0][1] - a.intervals[0][0]
    wb = b.intervals[0][1] - b.intervals[0][0]
    assert 1.2 < wa / wb < 1.7


def test_small_ball_validation():
    with pytest.raises(DomainError):
        small_ball_scaling(2.0, 1, [0.0], [3, 4])
    with pytest.raises(DomainError):
        small_ball_scaling(2.0, 1, [0.0], [3, 4, 5], n_samples=100, preset="bounded-smooth", grid=GRID)
    with pytest.raises(DomainError):
        small_ball_scaling(2.0, 1, [0.0], [3, 4, 5], preset="zero")
