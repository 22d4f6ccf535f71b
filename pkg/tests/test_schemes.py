import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_field
from randeuler.core import ProblemSpec, SchemeTag, compute_class_constants, make_mesh, one_norm
from randeuler.errors import DivergenceError, NonConvergenceError, PreconditionError
from randeuler.noise import NoiseKind, PerturbedProblem, make_noise, zero_noise
from randeuler.problems import linear_autonomous, lipschitz_state_probe, rough_holder_probe, stability_problem
from randeuler.randomization import tau_matrix
from randeuler.schemes import (
    DetVariant,
    ImplicitSolverConfig,
    Predictor,
    deterministic_variants,
    explicit_kernel,
    explicit_rand_euler,
    implicit_kernel,
    implicit_preconditions,
    implicit_rand_euler,
    min_implicit_steps,
)


def _mesh(p, n, seed=0):
    return make_mesh(p, n, tau_matrix(seed, [0], n)[0])


def _clean(p):
    return PerturbedProblem(p, zero_noise(p.d))


class TestExplicit:
    @pytest.mark.parametrize("n", [10, 100, 1000])
    def test_linear_closed_form(self, n):
        p = linear_autonomous()
        tr = explicit_rand_euler(_clean(p), _mesh(p, n))
        want = (1 + 1 / n) ** np.arange(n + 1)
        np.testing.assert_allclose(tr.values[:, 0], want, rtol=1e-12, atol=0)
        assert tr.scheme_tag is SchemeTag.EXPLICIT_RAND

    def test_zero_field_fixes_state(self, zero_problem):
        tr = explicit_rand_euler(_clean(zero_problem), _mesh(zero_problem, 17))
        assert np.all(tr.values == zero_problem.eta)

    def test_constant_field_is_exact(self):
        p = constant_field([0.5, -1.5], [0.25, 0.0], a=0.0, b=2.0, K=2.0)
        n = 16
        tr = explicit_rand_euler(_clean(p), _mesh(p, n))
        j = np.arange(n + 1)[:, None]
        np.testing.assert_allclose(tr.values, p.eta + j * (2.0 / n) * np.array([0.5, -1.5]), rtol=0, atol=1e-14)

    def test_noise_enters_through_rhs_and_eta(self):
        p = linear_autonomous()
        m = make_noise(NoiseKind.CONSTANT_DIRECTION, 0.1, 1, eta_shift=1.0)
        n = 5
        tr = explicit_rand_euler(PerturbedProblem(p, m), _mesh(p, n))
        v = 1.1
        for j in range(1, n + 1):
            v = v + (v + 0.1) / n
            assert tr.values[j, 0] == pytest.approx(v, rel=1e-14)

    def test_divergence_reports_step(self):
        p = ProblemSpec(0, 1, [1.0], lambda t, y: 1e300 * y, K=1, L=1)
        with pytest.raises(DivergenceError) as info, np.errstate(over="ignore"):
            explicit_rand_euler(_clean(p), _mesh(p, 10))
        assert info.value.step >= 1


class TestImplicit:
    @pytest.mark.parametrize("n", [10, 100, 1000])
    def test_linear_closed_form(self, n):
        p = linear_autonomous()
        tr, rep = implicit_rand_euler(_clean(p), _mesh(p, n))
        want = (1 - 1 / n) ** -np.arange(n + 1.0)
        np.testing.assert_allclose(tr.values[:, 0], want, rtol=1e-9, atol=0)
        assert rep.fixed_point_iterations.shape == (n,)
        assert rep.contraction_factor_bound == pytest.approx(2 / n)

    def test_zero_field_single_iteration(self, zero_problem):
        cfg = ImplicitSolverConfig(predictor=Predictor.PREVIOUS_NODE)
        tr, rep = implicit_rand_euler(_clean(zero_problem), _mesh(zero_problem, 8), cfg)
        assert np.all(tr.values == zero_problem.eta)
        assert np.all(rep.fixed_point_iterations == 1)

    def test_residual_within_tolerance(self):
        p = lipschitz_state_probe(d=3)
        pp = _clean(p)
        mesh = _mesh(p, 64)
        tr, _ = implicit_rand_euler(pp, mesh)
        for j in range(1, 65):
            u = tr.values[j]
            res = u - tr.values[j - 1] - mesh.h * pp.rhs_tilde(mesh.thetas[j - 1], u)
            # one more Picard step moves by at most h(L+1) times the stopping gap
            assert one_norm(res) <= 1e-12 * (1 + one_norm(u))

    def test_iteration_count_bound(self):
        p = rough_holder_probe(1.0)
        pp = _clean(p)
        n = 64
        mesh = _mesh(p, n, seed=4)
        cfg = ImplicitSolverConfig(fp_tolerance=1e-12)
        tr, rep = implicit_rand_euler(pp, mesh, cfg)
        q = mesh.h * (p.L + 1)
        for j in range(1, n + 1):
            prev, th = tr.values[j - 1], mesh.thetas[j - 1]
            x0 = prev + mesh.h * pp.rhs_tilde(th, prev)
            x1 = prev + mesh.h * pp.rhs_tilde(th, x0)
            g0 = one_norm(x1 - x0)
            bound = 1 if g0 <= cfg.fp_tolerance else math.ceil(math.log(cfg.fp_tolerance / g0) / math.log(q)) + 1
            assert rep.fixed_point_iterations[j - 1] <= bound

    def test_preconditions_enforced(self):
        p = linear_autonomous()
        with pytest.raises(PreconditionError):
            implicit_rand_euler(_clean(p), _mesh(p, 3))
        with warnings.catch_warnings(record=True):
            warnings.simplefilter("always")
            implicit_rand_euler(_clean(p), _mesh(p, 3), force=True)

    def test_k1_noise_rejected(self):
        p = linear_autonomous()
        pp = PerturbedProblem(p, make_noise(NoiseKind.ADVERSARIAL_SIGN, 0.1, 1))
        with pytest.raises(PreconditionError):
            implicit_rand_euler(pp, _mesh(p, 16))

    def test_nonconvergence_when_iterations_capped(self):
        p = linear_autonomous()
        cfg = ImplicitSolverConfig(fp_tolerance=1e-15, max_iterations=2)
        with pytest.raises(NonConvergenceError):
            implicit_rand_euler(_clean(p), _mesh(p, 8), cfg)

    def test_min_implicit_steps(self):
        for K, L, T in ((1, 1, 1), (3.0, 20.0, 2.0), (0.2, 0.1, 0.5)):
            n = min_implicit_steps(K, L, T)
            h = T / n
            assert h * (K + 1) <= 0.5 and h * (L + 1) < 1
            if n > 1:
                h_prev = T / (n - 1)
                assert h_prev * (K + 1) > 0.5 or h_prev * (L + 1) >= 1


class TestDeterministic:
    def test_explicit_left_node_factor(self):
        lam, h, n = -1.0, 0.1, 10
        p = stability_problem(lam, T=1.0)
        mesh = _mesh(p, n)
        tr = deterministic_variants(_clean(p), mesh, DetVariant.EXPLICIT_LEFT_NODE)
        for j in range(1, n + 1):
            factor = 1 + 2 * lam * h * mesh.nodes[j - 1]
            np.testing.assert_allclose(tr.values[j], factor * tr.values[j - 1], rtol=1e-14, atol=1e-16)

    def test_time_independent_field_matches_randomized(self):
        p = lipschitz_state_probe()
        mesh = _mesh(p, 32)
        det = deterministic_variants(_clean(p), mesh, "ExplicitLeftNode")
        rnd = explicit_rand_euler(_clean(p), mesh)
        np.testing.assert_array_equal(det.values, rnd.values)
        det_i = deterministic_variants(_clean(p), mesh, "ImplicitRightNode")
        rnd_i, _ = implicit_rand_euler(_clean(p), mesh)
        np.testing.assert_array_equal(det_i.values, rnd_i.values)

    def test_zero_field(self, zero_problem):
        mesh = _mesh(zero_problem, 8)
        for which in DetVariant:
            tr = deterministic_variants(_clean(zero_problem), mesh, which)
            assert np.all(tr.values == zero_problem.eta)


class TestBatching:
    def test_batched_rows_equal_single_runs(self):
        p = lipschitz_state_probe(d=2)
        pp = PerturbedProblem(p, make_noise(NoiseKind.LINEAR_IN_STATE, 0.1, 2))
        n = 40
        h = p.length / n
        taus = tau_matrix(9, range(5), n)
        thetas = np.arange(n) * h + taus * h
        ex = explicit_kernel(pp, h, thetas)
        im, _ = implicit_kernel(pp, h, thetas, ImplicitSolverConfig())
        for m in range(5):
            np.testing.assert_array_equal(ex[m], explicit_kernel(pp, h, thetas[m : m + 1])[0])
            np.testing.assert_array_equal(im[m], implicit_kernel(pp, h, thetas[m : m + 1], ImplicitSolverConfig())[0][0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(NoiseKind)), st.floats(0.0, 1.0))
def test_explicit_ball_containment(seed, kind, delta):
    for p in (linear_autonomous(), lipschitz_state_probe(), stability_problem(-2 + 1j)):
        R1 = compute_class_constants(p).R1
        pp = PerturbedProblem(p, make_noise(kind, delta, p.d, eta_shift=1.0))
        n = 32
        h = p.length / n
        thetas = np.arange(n) * h + tau_matrix(seed, [0], n) * h
        signs = np.where(tau_matrix(seed + 1, [0], n) < 0.5, 1.0, -1.0)
        vals = explicit_kernel(pp, h, thetas, signs)[0]
        assert np.all(one_norm(vals - p.eta) <= R1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([NoiseKind.ZERO, NoiseKind.CONSTANT_DIRECTION, NoiseKind.LINEAR_IN_STATE]), st.floats(0.0, 1.0))
def test_implicit_iterate_bound(seed, kind, delta):
    for p in (linear_autonomous(), lipschitz_state_probe()):
        bound = compute_class_constants(p).implicit_iterate_bound
        pp = PerturbedProblem(p, make_noise(kind, delta, p.d, eta_shift=1.0))
        n = min_implicit_steps(p.K, p.L, p.length)
        h = p.length / n
        thetas = np.arange(n) * h + tau_matrix(seed, [0], n) * h
        vals, _ = implicit_kernel(pp, h, thetas, ImplicitSolverConfig())
        assert np.all(one_norm(vals[0]) <= bound + 1e-9)
