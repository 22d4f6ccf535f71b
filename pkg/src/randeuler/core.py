"""Domain types shared by the schemes, the error harness and the stability lab.

Vector-valued callables in this package follow one convention: ``rhs(t, y)``
accepts ``y`` of shape ``(..., d)`` and ``t`` broadcastable against
``y[..., 0]``, and returns an array shaped like ``y``.  This lets a whole
ensemble of paths advance through one call per step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError

Rhs = Callable[[np.ndarray, np.ndarray], np.ndarray]


def one_norm(x, axis=-1):
    """Sum of absolute values along ``axis`` (the ambient norm everywhere here)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[axis] == 0:
        raise DimensionError("one_norm needs a non-empty vector")
    return np.abs(x).sum(axis=axis)


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemSpec:
    """An initial-value problem ``z' = rhs(t, z)``, ``z(a) = eta`` plus class metadata.

    ``K``, ``L`` and ``rho`` are asserted by whoever builds the problem; they are
    used for step-size preconditions and a-priori bound constants but are never
    verified symbolically (see :func:`randeuler.analysis.check_assumptions`).
    ``lipschitz_radius`` is the radius of the ball around ``eta`` on which the
    Hölder/Lipschitz conditions are claimed; ``inf`` means globally.
    """

    a: float
    b: float
    eta: np.ndarray
    rhs: Rhs
    K: float
    L: float
    rho: float = 1.0
    lipschitz_radius: float = math.inf
    analytic_solution: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "problem"

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        if eta.ndim != 1 or eta.size == 0:
            raise DimensionError("eta must be a non-empty vector")
        object.__setattr__(self, "eta", _frozen(eta))
        if not self.a < self.b:
            raise DomainError(f"need a < b, got a={self.a}, b={self.b}")
        if not 0.0 < self.rho <= 1.0:
            raise DomainError(f"rho must lie in (0, 1], got {self.rho}")
        if self.K <= 0 or self.L <= 0:
            raise DomainError("K and L must be positive")
        if self.lipschitz_radius < 0:
            raise DomainError("lipschitz_radius must be nonnegative")
        if one_norm(eta) > self.K * (1 + 1e-15):
            raise DomainError(f"|eta|_1 = {one_norm(eta)} exceeds K = {self.K}")
        if self.analytic_solution is not None:
            z0 = np.asarray(self.analytic_solution(np.float64(self.a)), dtype=float)
            if one_norm(z0 - eta) > 1e-12:
                raise DomainError("analytic_solution(a) does not match eta")

    @property
    def d(self) -> int:
        return self.eta.shape[0]

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class RandomMesh:
    """Uniform grid with one random evaluation time per step."""

    n: int
    h: float
    nodes: np.ndarray
    taus: np.ndarray
    thetas: np.ndarray

    def __post_init__(self):
        for name in ("nodes", "taus", "thetas"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def a(self):
        return float(self.nodes[0])

    @property
    def b(self):
        return float(self.nodes[-1])


def uniform_nodes(a, b, n):
    """Nodes ``a + j*h``; the last node is pinned to ``b`` exactly."""
    h = (b - a) / n
    nodes = a + h * np.arange(n + 1, dtype=float)
    nodes[-1] = b
    return h, nodes


def make_mesh(p: ProblemSpec, n: int, draws) -> RandomMesh:
    """Build the randomized mesh: ``theta_j = t_{j-1} + tau_j * h``."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    taus = np.asarray(draws, dtype=float)
    if taus.shape != (n,):
        raise DimensionError(f"expected {n} draws, got shape {taus.shape}")
    if np.any(taus <= 0.0) or np.any(taus >= 1.0):
        raise DomainError("every draw must lie in the open interval (0, 1)")
    h, nodes = uniform_nodes(p.a, p.b, n)
    thetas = nodes[:-1] + taus * h
    return RandomMesh(n=n, h=h, nodes=nodes, taus=taus, thetas=thetas)


class SchemeTag(str, enum.Enum):
    EXPLICIT_RAND = "ExplicitRandEuler"
    IMPLICIT_RAND = "ImplicitRandEuler"
    EXPLICIT_DET = "ExplicitDetEuler"
    IMPLICIT_DET = "ImplicitDetEuler"


@dataclass(frozen=True)
class Trajectory:
    """Node values ``W^0..W^n`` with the piecewise-linear dense output."""

    mesh: RandomMesh
    values: np.ndarray
    scheme_tag: SchemeTag

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != self.mesh.n + 1:
            raise DimensionError("values must have shape (n + 1, d)")
        object.__setattr__(self, "values", _frozen(values))

    def __call__(self, t):
        return eval_dense(self, t)


def interpolate(nodes, values, t):
    """Piecewise-linear interpolation of ``values`` (shape ``(n+1, d)``) at scalar ``t``.

    Node hits return the stored value exactly; interior points use the convex
    form ``(1-w)*left + w*right``.
    """
    j = int(np.searchsorted(nodes, t, side="left"))
    if nodes[j] == t:
        return values[j].copy()
    w = (t - nodes[j - 1]) / (nodes[j] - nodes[j - 1])
    return (1.0 - w) * values[j - 1] + w * values[j]


def eval_dense(traj: Trajectory, t: float) -> np.ndarray:
    nodes = traj.mesh.nodes
    if not nodes[0] <= t <= nodes[-1]:
        raise DomainError(f"t={t} outside [{nodes[0]}, {nodes[-1]}]")
    return interpolate(nodes, traj.values, t)


@dataclass(frozen=True)
class ClassConstants:
    R1: float
    R2: float
    R0: float
    explicit_noise_C: float
    implicit_iterate_bound: float
    implicit_noise_C: float


def _exp(x):
    # large-L fixtures make these constants astronomically big; inf is an honest answer
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def compute_class_constants(p: ProblemSpec) -> ClassConstants:
    """Radii and perturbation constants determined by ``(a, b, K, L)``."""
    T, K, L = p.length, p.K, p.L
    R1 = (K + 2) * _exp((K + 1) * T) + K - 1
    R2 = K * (1 + T) * _exp(K * T) + K
    iterate_bound = (K + 2) * _exp(2 * (K + 1) * T) - 1
    explicit_C = _exp(L * T) * (1 + (1 + R1 - K) / L)
    implicit_C = _exp(2 * L * T) + (1 + iterate_bound) / L * (_exp(2 * L * T) - 1)
    return ClassConstants(
        R1=R1,
        R2=R2,
        R0=max(R1, R2),
        explicit_noise_C=explicit_C,
        implicit_iterate_bound=iterate_bound,
        implicit_noise_C=implicit_C,
    )
