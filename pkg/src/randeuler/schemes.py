"""Randomized explicit and implicit Euler integrators.

Each public single-path function has a batched kernel underneath
(``explicit_kernel`` / ``implicit_kernel``) that advances many paths at once:
``thetas`` has shape ``(M, n)`` and the result has shape ``(M, n + 1, d)``.
Per-path results do not depend on which other paths share the batch.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import RandomMesh, SchemeTag, Trajectory
from .errors import DivergenceError, NonConvergenceError, PreconditionError
from .noise import NoiseClass, PerturbedProblem


class Predictor(str, enum.Enum):
    PREVIOUS_NODE = "PreviousNode"
    EXPLICIT_EULER = "ExplicitEulerPredictor"


@dataclass(frozen=True)
class ImplicitSolverConfig:
    fp_tolerance: float = 1e-12
    max_iterations: int = 200
    predictor: Predictor = Predictor.EXPLICIT_EULER

    def __post_init__(self):
        if not self.fp_tolerance > 0:
            raise ValueError("fp_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        object.__setattr__(self, "predictor", Predictor(self.predictor))


@dataclass(frozen=True)
class StepReport:
    """Picard iteration counts (shape ``(n,)`` or ``(M, n)``) and the contraction bound h(L+1)."""

    fixed_point_iterations: np.ndarray
    contraction_factor_bound: float


def _check_finite(x, step):
    bad = ~np.isfinite(x).all(axis=-1)
    if bad.any():
        raise DivergenceError(step, path=int(np.flatnonzero(bad)[0]))


def explicit_kernel(pp: PerturbedProblem, h, thetas, signs=None) -> np.ndarray:
    """``W^j = W^{j-1} + h f~(theta_j, W^{j-1})`` for every row of ``thetas``."""
    thetas = np.atleast_2d(thetas)
    M, n = thetas.shape
    out = np.empty((M, n + 1, pp.base.d))
    w = np.broadcast_to(pp.eta_tilde, (M, pp.base.d)).copy()
    out[:, 0] = w
    for j in range(1, n + 1):
        s = None if signs is None else signs[:, j - 1]
        w = w + h * pp.rhs_tilde(thetas[:, j - 1], w, sign=s)
        _check_finite(w, j)
        out[:, j] = w
    return out


def implicit_kernel(pp: PerturbedProblem, h, thetas, cfg: ImplicitSolverConfig, signs=None):
    """Solve ``U^j = U^{j-1} + h f~(theta_j, U^j)`` by Picard iteration, path by path.

    Returns ``(values, iterations)``.  A path stops iterating once successive
    iterates differ by at most ``fp_tolerance * (1 + |x|_1)``; converged paths
    are frozen so batching never changes a path's result.
    """
    thetas = np.atleast_2d(thetas)
    M, n = thetas.shape
    d = pp.base.d
    out = np.empty((M, n + 1, d))
    iters = np.zeros((M, n), dtype=np.int64)
    u = np.broadcast_to(pp.eta_tilde, (M, d)).copy()
    out[:, 0] = u
    tol = cfg.fp_tolerance
    for j in range(1, n + 1):
        th = thetas[:, j - 1]
        s = None if signs is None else signs[:, j - 1]
        if cfg.predictor is Predictor.EXPLICIT_EULER:
            x = u + h * pp.rhs_tilde(th, u, sign=s)
        else:
            x = u.copy()
        active = np.arange(M)
        for k in range(1, cfg.max_iterations + 1):
            xa = x[active]
            sa = None if s is None else s[active]
            x_new = u[active] + h * pp.rhs_tilde(th[active], xa, sign=sa)
            _check_finite(x_new, j)
            gap = np.abs(x_new - xa).sum(axis=-1)
            x[active] = x_new
            done = gap <= tol * (1.0 + np.abs(x_new).sum(axis=-1))
            iters[active[done], j - 1] = k
            active = active[~done]
            if active.size == 0:
                break
        else:
            raise NonConvergenceError(j, cfg.max_iterations, path=int(active[0]))
        u = x
        out[:, j] = u
    return out, iters


def implicit_preconditions(pp: PerturbedProblem, h: float, force: bool = False):
    """Step-size and noise-class requirements of the implicit scheme.

    Needs ``h(K+1) <= 1/2`` and ``h(L+1) < 1`` from the declared metadata, and
    a ``K2`` noise model.  With ``force`` the violations become warnings.
    """
    p = pp.base
    problems = []
    if h * (p.K + 1) > 0.5:
        problems.append(f"h(K+1) = {h * (p.K + 1):.6g} > 1/2")
    if h * (p.L + 1) >= 1:
        problems.append(f"h(L+1) = {h * (p.L + 1):.6g} >= 1")
    if pp.noise.class_tag is not NoiseClass.K2:
        problems.append("implicit scheme requires K2 noise")
    if problems:
        msg = "; ".join(problems)
        if not force:
            raise PreconditionError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)


def min_implicit_steps(K: float, L: float, length: float) -> int:
    """Smallest n with h(K+1) <= 1/2 and h(L+1) < 1."""
    n = max(math.ceil(2 * (K + 1) * length), math.floor((L + 1) * length) + 1, 1)
    while length / n * (K + 1) > 0.5 or length / n * (L + 1) >= 1:
        n += 1
    return n


def _check_mesh(pp, mesh):
    if abs(mesh.a - pp.base.a) > 1e-12 * max(1, abs(pp.base.a)) or abs(mesh.b - pp.base.b) > 1e-12 * max(
        1, abs(pp.base.b)
    ):
        raise PreconditionError("mesh was not built on the problem's interval")


def explicit_rand_euler(pp: PerturbedProblem, mesh: RandomMesh, signs=None) -> Trajectory:
    _check_mesh(pp, mesh)
    values = explicit_kernel(pp, mesh.h, mesh.thetas[None, :], None if signs is None else np.atleast_2d(signs))
    return Trajectory(mesh, values[0], SchemeTag.EXPLICIT_RAND)


def implicit_rand_euler(
    pp: PerturbedProblem,
    mesh: RandomMesh,
    cfg: ImplicitSolverConfig = ImplicitSolverConfig(),
    force: bool = False,
):
    """Randomized implicit Euler; returns ``(Trajectory, StepReport)``."""
    _check_mesh(pp, mesh)
    implicit_preconditions(pp, mesh.h, force=force)
    values, iters = implicit_kernel(pp, mesh.h, mesh.thetas[None, :], cfg)
    report = StepReport(iters[0], mesh.h * (pp.base.L + 1))
    return Trajectory(mesh, values[0], SchemeTag.IMPLICIT_RAND), report


class DetVariant(str, enum.Enum):
    EXPLICIT_LEFT_NODE = "ExplicitLeftNode"
    IMPLICIT_RIGHT_NODE = "ImplicitRightNode"


def deterministic_variants(
    pp: PerturbedProblem,
    mesh: RandomMesh,
    which,
    cfg: ImplicitSolverConfig = ImplicitSolverConfig(),
    force: bool = False,
) -> Trajectory:
    """Classical Euler: theta_j pinned to t_{j-1} (explicit) or t_j (implicit)."""
    which = DetVariant(which)
    _check_mesh(pp, mesh)
    if which is DetVariant.EXPLICIT_LEFT_NODE:
        values = explicit_kernel(pp, mesh.h, mesh.nodes[None, :-1])
        return Trajectory(mesh, values[0], SchemeTag.EXPLICIT_DET)
    implicit_preconditions(pp, mesh.h, force=force)
    values, _ = implicit_kernel(pp, mesh.h, mesh.nodes[None, 1:], cfg)
    return Trajectory(mesh, values[0], SchemeTag.IMPLICIT_DET)
