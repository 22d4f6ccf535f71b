import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_field
from randeuler.analysis import (
    estimate_error,
    fit_order,
    lp_estimate,
    noise_floor_sweep,
    path_suprema,
    reference_solution,
    sup_grid,
    theoretical_order,
    validate_bounds,
)
from randeuler.core import compute_class_constants
from randeuler.errors import ConfigError, DomainError, PreconditionError, ReferenceAccuracyError
from randeuler.noise import NoiseKind, make_noise, zero_noise
from randeuler.problems import (
    adversarial_pair,
    fixture_from_name,
    holder_time_probe,
    linear_autonomous,
    lipschitz_state_probe,
    rough_holder_probe,
)
from randeuler.schemes import min_implicit_steps


class TestReference:
    def test_linear_endpoint(self):
        assert reference_solution(linear_autonomous(), [0.0, 1.0])[-1, 0] == pytest.approx(math.e, rel=1e-15)

    def test_kink_endpoint(self):
        assert reference_solution(holder_time_probe(1.0), [1.0])[0, 0] == pytest.approx(0.25, abs=1e-15)

    def test_state_probe_self_consistency(self):
        p = lipschitz_state_probe(d=2)
        grid = np.linspace(0, 1, 9)
        a = reference_solution(p, grid, finest_n=64)
        b = reference_solution(p, grid, finest_n=128)
        assert np.abs(a - b).sum(axis=-1).max() < 1e-10

    def test_rk4_path_agrees_with_analytic(self):
        p = linear_autonomous()
        stripped = type(p)(p.a, p.b, p.eta, p.rhs, K=p.K, L=p.L)
        grid = np.linspace(0, 1, 5)
        np.testing.assert_allclose(reference_solution(stripped, grid, finest_n=32), p.analytic_solution(grid), rtol=1e-11)

    def test_accuracy_failure(self):
        p = lipschitz_state_probe(d=2)
        with pytest.raises(ReferenceAccuracyError):
            reference_solution(p, [1.0], finest_n=1, tol=1e-30)

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            reference_solution(linear_autonomous(), [0.5, 0.2])


class TestSupGrid:
    def test_contains_all_nodes(self):
        g = sup_grid(0.0, 1.0, 8, 4)
        assert g.size == 33
        nodes = np.linspace(0, 1, 9)
        np.testing.assert_array_equal(g[::4], nodes)

    def test_refinements_nest(self):
        coarse, fine = sup_grid(0.0, 1.0, 16, 8), sup_grid(0.0, 1.0, 16, 16)
        np.testing.assert_allclose(fine[::2], coarse, rtol=0, atol=1e-15)


class TestEstimateError:
    @pytest.mark.parametrize("scheme", ["explicit", "implicit", "explicit-det", "implicit-det"])
    def test_zero_field_zero_error(self, zero_problem, scheme):
        est = estimate_error(zero_problem, zero_noise(2), scheme, 16, 4)
        assert est.value == 0.0 and est.std_error == 0.0

    def test_linear_error_decreases(self):
        p = linear_autonomous()
        vals = [estimate_error(p, zero_noise(1), "explicit", 2**k, 8, seed=1).value for k in range(6, 14)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_adversarial_lower_bound(self):
        delta = 0.1
        pair = adversarial_pair(delta)
        errs = [
            estimate_error(p, m, "explicit", 64, 4).value
            for p, m in ((pair.plus, pair.cancel_plus), (pair.minus, pair.cancel_minus))
        ]
        assert max(errs) >= delta * pair.plus.length - 1e-12

    def test_path_order_and_threads_invariant(self):
        p = rough_holder_probe(0.5)
        a = path_suprema(p, zero_noise(1), "explicit", 128, 70, seed=3, threads=1)
        b = path_suprema(p, zero_noise(1), "explicit", 128, 70, seed=3, threads=8)
        np.testing.assert_array_equal(a, b)
        # each path's value does not depend on how many paths were requested
        np.testing.assert_array_equal(a[:10], path_suprema(p, zero_noise(1), "explicit", 128, 10, seed=3))

    def test_refinement_monotone_and_stable(self):
        for name in ("linear", "holder(0.25)", "holder(1)", "kink(0.5)", "state(2)"):
            p = fixture_from_name(name)
            s8 = path_suprema(p, zero_noise(p.d), "explicit", 64, 20, seed=0, sup_refinement=8)
            s16 = path_suprema(p, zero_noise(p.d), "explicit", 64, 20, seed=0, sup_refinement=16)
            assert np.all(s16 >= s8 - 1e-15)
            v8, v16 = lp_estimate(s8, 2)[0], lp_estimate(s16, 2)[0]
            assert abs(v16 - v8) < 0.01 * v8, name

    def test_power_mean(self):
        p = rough_holder_probe(0.25)
        e2 = estimate_error(p, zero_noise(1), "explicit", 64, 40, p_exponent=2)
        e4 = estimate_error(p, zero_noise(1), "explicit", 64, 40, p_exponent=4)
        assert e4.value >= e2.value

    def test_implicit_needs_k2(self):
        with pytest.raises(PreconditionError):
            estimate_error(linear_autonomous(), make_noise(NoiseKind.ADVERSARIAL_SIGN, 0.1, 1), "implicit", 64, 2)

    def test_argument_checks(self):
        with pytest.raises(DomainError):
            estimate_error(linear_autonomous(), zero_noise(1), "explicit", 8, 1)
        with pytest.raises(DomainError):
            estimate_error(linear_autonomous(), zero_noise(1), "explicit", 8, 4, p_exponent=1.0)
        with pytest.raises(ConfigError):
            estimate_error(linear_autonomous(), zero_noise(1), "midpoint", 8, 4)


class TestLpEstimate:
    def test_constant_sups(self):
        assert lp_estimate(np.full(5, 0.3), 2) == (pytest.approx(0.3), 0.0)

    def test_delta_method_se(self):
        rng = np.random.default_rng(0)
        s = rng.random(1000)
        value, se = lp_estimate(s, 2)
        m = np.mean(s**2)
        assert value == pytest.approx(math.sqrt(m))
        assert se == pytest.approx(np.std(s**2, ddof=1) / math.sqrt(1000) / (2 * math.sqrt(m)))


class TestFitOrder:
    def test_exact_inverse(self):
        fit = fit_order([(n, 1.0 / n) for n in (8, 16, 32, 64)])
        assert abs(fit.fitted_order - 1.0) < 1e-12 and abs(fit.r_squared - 1.0) < 1e-12

    def test_constant_times_power(self):
        fit = fit_order([(n, 3 * n**-0.75) for n in (10, 100, 1000)])
        assert abs(fit.fitted_order - 0.75) < 1e-12
        assert abs(fit.intercept - math.log(3)) < 1e-12

    def test_nonpositive_point(self):
        pts = [(8, 0.1), (16, 0.0), (32, 0.02), (64, 0.01)]
        with pytest.raises(DomainError):
            fit_order(pts)
        assert len(fit_order(pts, drop_nonpositive=True).points) == 3

    def test_too_few(self):
        with pytest.raises(DomainError):
            fit_order([(1, 1.0), (2, 0.5)])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 3.0), st.floats(1e-3, 1e3), st.integers(3, 10))
    def test_recovers_synthetic_power_laws(self, order, const, count):
        ns = [2**k for k in range(3, 3 + count)]
        fit = fit_order([(n, const * n**-order) for n in ns])
        assert abs(fit.fitted_order - order) < 1e-12

    def test_theoretical(self):
        assert theoretical_order(0.25) == 0.75
        assert theoretical_order(1.0) == 1.0


class TestNoiseFloor:
    def test_zero_row_matches_plain_estimate(self):
        p = rough_holder_probe(1.0)
        rows = noise_floor_sweep(p, NoiseKind.CONSTANT_DIRECTION, "explicit", 256, [0.0, 0.05], 10, seed=7)
        plain = estimate_error(p, zero_noise(1), "explicit", 256, 10, seed=7)
        assert rows[0].estimate.value == plain.value
        assert math.isnan(rows[0].error_over_delta)

    def test_adversarial_ratio_at_least_length(self):
        pair = adversarial_pair(0.1)
        rows = noise_floor_sweep(
            pair.plus, NoiseKind.CONSTANT_DIRECTION, "explicit", 1024, [0.0125, 0.025, 0.05, 0.1], 10, seed=0,
            noise_params={"sign": -1.0},
        )
        for r in rows:
            assert r.error_over_delta >= pair.plus.length - 1e-12

    def test_doubling_delta_roughly_doubles(self):
        p = linear_autonomous()
        rows = noise_floor_sweep(p, NoiseKind.CONSTANT_DIRECTION, "explicit", 4096, [0.025, 0.05, 0.1], 10, seed=0)
        for a, b in zip(rows, rows[1:]):
            assert 1.5 <= b.estimate.value / a.estimate.value <= 2.5

    def test_linear_in_state_below_explicit_constant(self):
        p = linear_autonomous()
        C = compute_class_constants(p).explicit_noise_C
        rows = noise_floor_sweep(p, NoiseKind.LINEAR_IN_STATE, "explicit", 2048, [0.01, 0.1], 10, seed=0)
        for r in rows:
            assert r.error_over_delta <= C + 0.1


class TestValidateBounds:
    def test_zero_delta_zero_ratio(self):
        r = validate_bounds(linear_autonomous(), zero_noise(1), "explicit", 64, 10, seed=0)
        assert r.perturbation_ratio == 0.0 and r.max_perturbation == 0.0 and r.passed

    def test_explicit_linear_ball(self):
        p = linear_autonomous()
        c = compute_class_constants(p)
        r = validate_bounds(p, make_noise(NoiseKind.LINEAR_IN_STATE, 0.0, 1), "explicit", 64, 10, seed=0)
        # |V^j| <= R1 - K, and V^j - eta stays inside B(0, R1)
        assert r.ball_ratio * c.R1 <= c.R1 - p.K

    def test_implicit_linear_in_state(self):
        p = linear_autonomous()
        n = min_implicit_steps(p.K, 2 * p.L, p.length)
        r = validate_bounds(p, make_noise(NoiseKind.LINEAR_IN_STATE, 0.05, 1), "implicit", n, 20, seed=0)
        assert r.passed and r.perturbation_ratio <= 1 + 1e-9 and r.iterate_ratio <= 1

    def test_rejects_deterministic_scheme(self):
        with pytest.raises(ConfigError):
            validate_bounds(linear_autonomous(), zero_noise(1), "explicit-det", 8, 2, seed=0)

    def test_implicit_step_restriction(self):
        with pytest.raises(PreconditionError):
            validate_bounds(linear_autonomous(), zero_noise(1), "implicit", 2, 2, seed=0)

    @settings(max_examples=15, deadline=None)
    @given(st.sampled_from(list(NoiseKind)), st.floats(0.0, 1.0), st.integers(0, 1000))
    def test_explicit_bounds_hold(self, kind, delta, seed):
        p = lipschitz_state_probe()
        r = validate_bounds(p, make_noise(kind, delta, p.d, eta_shift=1.0), "explicit", 32, 8, seed=seed)
        assert r.passed


def test_constant_field_error_is_exact_zero():
    p = constant_field([1.0], [0.0], K=1.0)
    p = type(p)(p.a, p.b, p.eta, p.rhs, K=1.0, L=1.0, analytic_solution=lambda t: np.asarray(t, float)[..., None])
    assert estimate_error(p, zero_noise(1), "explicit", 32, 3).value <= 1e-15
