"""Monte-Carlo error estimation, order fitting and a-priori bound checks."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ProblemSpec, compute_class_constants, one_norm, uniform_nodes
from .errors import ConfigError, DomainError, PreconditionError, ReferenceAccuracyError
from .noise import NoiseModel, PerturbedProblem, make_noise, noise_signs, zero_noise, _sample_ball
from .randomization import tau_matrix
from .schemes import ImplicitSolverConfig, explicit_kernel, implicit_kernel, implicit_preconditions

# paths per integration batch; fixed so results never depend on the thread count
PATH_CHUNK = 32

SCHEMES = ("explicit", "implicit", "explicit-det", "implicit-det")


def _scheme_name(scheme) -> str:
    name = getattr(scheme, "value", scheme)
    aliases = {
        "ExplicitRandEuler": "explicit",
        "ImplicitRandEuler": "implicit",
        "ExplicitDetEuler": "explicit-det",
        "ImplicitDetEuler": "implicit-det",
    }
    name = aliases.get(name, name)
    if name not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    return name


def _map_chunks(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _chunks(M):
    return [np.arange(s, min(s + PATH_CHUNK, M)) for s in range(0, M, PATH_CHUNK)]


# ----------------------------------------------------------------------------
# reference solutions


def _rk4_segment(rhs, t0, t1, y, m):
    h = (t1 - t0) / m
    t = t0
    for i in range(m):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (t1 - t0) * (i + 1) / m
    return y


def _rk4_on_grid(p, grid, substeps):
    out = np.empty((grid.size, p.d))
    y = p.eta.copy()
    t_prev = p.a
    for i, t in enumerate(grid):
        if t > t_prev:
            y = _rk4_segment(p.rhs, t_prev, t, y, int(substeps[i]))
        out[i] = y
        t_prev = t
    return out


def reference_solution(p: ProblemSpec, t_grid, finest_n: Optional[int] = None, tol: float = 1e-10) -> np.ndarray:
    """Exact solution on ``t_grid`` (shape ``(len, d)``).

    Uses the analytic solution when the problem has one; otherwise classical
    RK4 with steps at least 64 times finer than ``(b - a) / finest_n`` and a
    self-check against a run with twice as many steps.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise DomainError("t_grid must be a non-empty 1-d array")
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < p.a or t_grid[-1] > p.b:
        raise DomainError("t_grid must be ascending inside [a, b]")
    if p.analytic_solution is not None:
        return np.asarray(p.analytic_solution(t_grid), dtype=float).reshape(t_grid.size, p.d)
    if finest_n is None:
        finest_n = max(t_grid.size - 1, 1)
    h_ref = p.length / (64 * finest_n)
    gaps = np.diff(np.concatenate([[p.a], t_grid]))
    substeps = np.maximum(1, np.ceil(gaps / h_ref - 1e-9)).astype(int)
    coarse = _rk4_on_grid(p, t_grid, substeps)
    fine = _rk4_on_grid(p, t_grid, 2 * substeps)
    drift = float(np.max(one_norm(coarse - fine)))
    if drift >= tol:
        raise ReferenceAccuracyError(f"reference changed by {drift:.3g} when the mesh was doubled")
    return fine


# ----------------------------------------------------------------------------
# sampled assumption check


@dataclass(frozen=True)
class AssumptionReport:
    eta_ratio: float
    growth_ratio: float
    time_holder_ratio: float
    state_lipschitz_ratio: float

    @property
    def passed(self) -> bool:
        return max(self.eta_ratio, self.growth_ratio, self.time_holder_ratio, self.state_lipschitz_ratio) <= 1 + 1e-9


def check_assumptions(p: ProblemSpec, samples: int = 10_000, seed: int = 0) -> AssumptionReport:
    """Sampled ratios for the growth, time-Hölder and state-Lipschitz conditions.

    Points come from ``[a, b] x B(eta, R)`` with ``R = min(R0, lipschitz_radius)``;
    each ratio should be at most 1 if the declared ``K, L, rho`` are honest.
    """
    rng = np.random.default_rng(seed)
    radius = min(compute_class_constants(p).R0, p.lipschitz_radius)
    t = p.a + p.length * rng.random(samples)
    x = _sample_ball(rng, p.eta, radius, samples)
    growth = one_norm(p.rhs(t, x)) / (p.K * (1 + one_norm(x)))

    # time pairs: half spread out, half at log-uniform small gaps
    s = p.a + p.length * rng.random(samples)
    half = samples // 2
    gap = p.length * 10.0 ** rng.uniform(-7, 0, size=half)
    s[:half] = np.clip(t[:half] + rng.choice([-1, 1], size=half) * gap, p.a, p.b)
    dt = np.abs(t - s)
    keep = dt > 0
    holder = one_norm(p.rhs(t, x) - p.rhs(s, x))[keep] / (p.L * dt[keep] ** p.rho)

    y = _sample_ball(rng, p.eta, radius, samples)
    y[:half] = x[:half] + (10.0 ** rng.uniform(-7, 0, size=half))[:, None] * _sample_ball(
        rng, np.zeros(p.d), 1.0, half
    )
    dx = one_norm(x - y)
    keep = dx > 0
    lip = one_norm(p.rhs(t, x) - p.rhs(t, y))[keep] / (p.L * dx[keep])
    return AssumptionReport(
        eta_ratio=float(one_norm(p.eta) / p.K),
        growth_ratio=float(growth.max()),
        time_holder_ratio=float(holder.max(initial=0.0)),
        state_lipschitz_ratio=float(lip.max(initial=0.0)),
    )


# ----------------------------------------------------------------------------
# ensembles


def _thetas_for(scheme, nodes, h, taus):
    if scheme == "explicit-det":
        return np.broadcast_to(nodes[:-1], taus.shape)
    if scheme == "implicit-det":
        return np.broadcast_to(nodes[1:], taus.shape)
    return nodes[:-1] + taus * h


def simulate_paths(pp: PerturbedProblem, scheme, n: int, path_ids, seed: int, cfg=None):
    """Integrate the listed paths; returns ``(values, iterations-or-None)``.

    ``values`` has shape ``(len(path_ids), n + 1, d)``.  Path ``m`` always uses
    the first ``n`` draws of its own tau stream.
    """
    scheme = _scheme_name(scheme)
    cfg = cfg or ImplicitSolverConfig()
    h, nodes = uniform_nodes(pp.base.a, pp.base.b, n)
    taus = tau_matrix(seed, path_ids, n)
    thetas = _thetas_for(scheme, nodes, h, taus)
    signs = noise_signs(pp.noise, seed, path_ids, n)
    if scheme.startswith("explicit"):
        return explicit_kernel(pp, h, thetas, signs), None
    return implicit_kernel(pp, h, thetas, cfg, signs)


def sup_grid(a, b, n, refinement):
    """Evaluation grid for the time supremum: every step split into ``refinement`` equal parts."""
    if refinement < 1:
        raise DomainError("sup_refinement must be at least 1")
    _, nodes = uniform_nodes(a, b, n)
    frac = np.arange(refinement) / refinement
    inner = (nodes[:-1, None] + frac * (nodes[1] - nodes[0])).ravel()
    inner[::refinement] = nodes[:-1]
    return np.append(inner, nodes[-1])


def _sup_errors(values, z_grid, refinement):
    """Per-path ``max_t |z(t) - l(t)|_1`` on the refined grid."""
    M, n1, d = values.shape
    n = n1 - 1
    w = np.arange(refinement) / refinement
    left, right = values[:, :-1, None, :], values[:, 1:, None, :]
    out = np.empty(M)
    # bound temporary memory to a few million doubles
    rows = max(1, 4_000_000 // max(1, n * refinement * d))
    zin = z_grid[:-1].reshape(n, refinement, d)
    for s in range(0, M, rows):
        sl = slice(s, s + rows)
        lerp = (1.0 - w[:, None]) * left[sl] + w[:, None] * right[sl]
        err = np.abs(zin - lerp).sum(axis=-1).reshape(lerp.shape[0], -1).max(axis=1)
        last = np.abs(z_grid[-1] - values[sl, -1]).sum(axis=-1)
        out[sl] = np.maximum(err, last)
    return out


def _check_compat(pp, scheme, n, force):
    if scheme.startswith("implicit"):
        implicit_preconditions(pp, pp.base.length / n, force=force)


def path_suprema(
    p: ProblemSpec,
    noise: NoiseModel,
    scheme,
    n: int,
    M: int,
    seed: int,
    sup_refinement: int = 8,
    cfg: Optional[ImplicitSolverConfig] = None,
    threads: int = 1,
    force: bool = False,
    z_grid=None,
) -> np.ndarray:
    """Per-path sup-norm errors for paths ``0..M-1`` (shape ``(M,)``)."""
    scheme = _scheme_name(scheme)
    pp = PerturbedProblem(p, noise)
    _check_compat(pp, scheme, n, force)
    if z_grid is None:
        z_grid = reference_solution(p, sup_grid(p.a, p.b, n, sup_refinement), finest_n=n)

    def work(ids):
        values, _ = simulate_paths(pp, scheme, n, ids, seed, cfg)
        return _sup_errors(values, z_grid, sup_refinement)

    return np.concatenate(_map_chunks(work, _chunks(M), threads))


@dataclass(frozen=True)
class ErrorEstimate:
    p: float
    paths: int
    n: int
    delta: float
    value: float
    std_error: float
    sup_refinement: int


def lp_estimate(sups, p_exponent):
    """Plug-in ``(mean sup^p)^(1/p)`` with a delta-method standard error."""
    sups = np.asarray(sups, dtype=float)
    M = sups.size
    powers = sups**p_exponent
    moment = float(np.sum(powers) / M)
    if moment == 0.0:
        return 0.0, 0.0
    value = moment ** (1.0 / p_exponent)
    se_moment = float(np.std(powers, ddof=1) / math.sqrt(M))
    return value, value / (p_exponent * moment) * se_moment


def estimate_error(
    p: ProblemSpec,
    noise: NoiseModel,
    scheme,
    n: int,
    M: int,
    p_exponent: float = 2.0,
    seed: int = 0,
    sup_refinement: int = 8,
    cfg: Optional[ImplicitSolverConfig] = None,
    threads: int = 1,
    force: bool = False,
    z_grid=None,
) -> ErrorEstimate:
    """Monte-Carlo estimate of ``|| sup_t |z(t) - l(t)|_1 ||_{L^p(Omega)}``."""
    if M < 2:
        raise DomainError("need at least two paths")
    if p_exponent < 2:
        raise DomainError("the L^p exponent must be at least 2")
    sups = path_suprema(p, noise, scheme, n, M, seed, sup_refinement, cfg, threads, force, z_grid)
    value, se = lp_estimate(sups, p_exponent)
    return ErrorEstimate(p_exponent, M, n, noise.delta, value, se, sup_refinement)


@dataclass(frozen=True)
class OrderFit:
    points: tuple
    fitted_order: float
    intercept: float
    r_squared: float


def fit_order(points: Sequence, drop_nonpositive: bool = False) -> OrderFit:
    """Least-squares fit of ``log(error) = -order * log(n) + c``."""
    pts = [(float(n), float(e)) for n, e in points]
    bad = [pt for pt in pts if not pt[1] > 0 or not pt[0] > 0]
    if bad:
        if not drop_nonpositive:
            raise DomainError(f"nonpositive points cannot be fitted on a log scale: {bad}")
        pts = [pt for pt in pts if pt not in bad]
    if len(pts) < 3:
        raise DomainError("need at least three points")
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return OrderFit(tuple(pts), float(-slope), float(intercept), min(r2, 1.0))


def theoretical_order(rho: float) -> float:
    return min(rho + 0.5, 1.0)


@dataclass(frozen=True)
class NoiseFloorRow:
    delta: float
    estimate: ErrorEstimate
    error_over_delta: float


def noise_floor_sweep(
    p: ProblemSpec,
    noise_kind,
    scheme,
    n_fixed: int,
    deltas,
    M: int,
    seed: int,
    p_exponent: float = 2.0,
    sup_refinement: int = 8,
    cfg: Optional[ImplicitSolverConfig] = None,
    threads: int = 1,
    eta_shift: float = 0.0,
    noise_params: Optional[dict] = None,
    force: bool = False,
):
    """Error at fixed ``n`` across precisions; every row reuses the same paths."""
    z_grid = reference_solution(p, sup_grid(p.a, p.b, n_fixed, sup_refinement), finest_n=n_fixed)
    rows = []
    for delta in deltas:
        noise = make_noise(noise_kind, delta, p.d, eta_shift=eta_shift, **(noise_params or {}))
        est = estimate_error(p, noise, scheme, n_fixed, M, p_exponent, seed, sup_refinement, cfg, threads, force, z_grid)
        ratio = est.value / delta if delta > 0 else math.nan
        rows.append(NoiseFloorRow(float(delta), est, ratio))
    return rows


# ----------------------------------------------------------------------------
# a-priori bounds


@dataclass(frozen=True)
class BoundReport:
    fixture: str
    scheme: str
    noise: str
    delta: float
    n: int
    paths: int
    ball_ratio: Optional[float]
    iterate_ratio: Optional[float]
    perturbation_ratio: float
    max_perturbation: float
    perturbation_constant: float
    passed: bool

    def to_dict(self):
        return asdict(self)


IMPLICIT_SLACK = 1e-9


def validate_bounds(
    p: ProblemSpec,
    noise: NoiseModel,
    scheme,
    n: int,
    M: int,
    seed: int,
    cfg: Optional[ImplicitSolverConfig] = None,
    threads: int = 1,
) -> BoundReport:
    """Coupled clean/noisy runs on identical draws checked against the a-priori constants.

    Explicit: every node of both runs lies in ``B(eta, R1)`` and
    ``max_j |W^j - W~^j|_1 <= C delta`` with the explicit constant.
    Implicit: every node obeys the iterate bound and the perturbation bound
    with the implicit constant, each with ``1e-9`` absolute slack for the
    inexact inner solve.
    """
    scheme = _scheme_name(scheme)
    if scheme not in ("explicit", "implicit"):
        raise ConfigError("bound validation covers the randomized schemes")
    consts = compute_class_constants(p)
    clean = PerturbedProblem(p, zero_noise(p.d))
    noisy = PerturbedProblem(p, noise)
    h = p.length / n
    if scheme == "implicit":
        implicit_preconditions(noisy, h)
        if h * p.L > 0.5:
            raise PreconditionError(f"hL = {h * p.L:.6g} > 1/2")

    def work(ids):
        a, _ = simulate_paths(clean, scheme, n, ids, seed, cfg)
        b, _ = simulate_paths(noisy, scheme, n, ids, seed, cfg)
        return (
            float(np.max(one_norm(a - b))),
            float(max(np.max(one_norm(a - p.eta)), np.max(one_norm(b - p.eta)))),
            float(max(np.max(one_norm(a)), np.max(one_norm(b)))),
        )

    parts = _map_chunks(work, _chunks(M), threads)
    max_pert = max(x[0] for x in parts)
    max_dev = max(x[1] for x in parts)
    max_norm = max(x[2] for x in parts)

    if scheme == "explicit":
        C = consts.explicit_noise_C
        ball = max_dev / consts.R1
        iterate = None
        ok = ball <= 1.0
        pert_ok = max_pert <= C * noise.delta * (1 + 1e-12)
    else:
        C = consts.implicit_noise_C
        ball = None
        iterate = max_norm / consts.implicit_iterate_bound
        ok = max_norm <= consts.implicit_iterate_bound + IMPLICIT_SLACK
        pert_ok = max_pert <= C * noise.delta + IMPLICIT_SLACK
    if max_pert == 0.0:
        ratio = 0.0
    elif noise.delta == 0.0:
        ratio = math.inf
    else:
        ratio = max_pert / (C * noise.delta)
    return BoundReport(
        fixture=p.name,
        scheme=scheme,
        noise=noise.kind.value,
        delta=noise.delta,
        n=n,
        paths=M,
        ball_ratio=ball,
        iterate_ratio=iterate,
        perturbation_ratio=ratio,
        max_perturbation=max_pert,
        perturbation_constant=C,
        passed=bool(ok and pert_ok),
    )
