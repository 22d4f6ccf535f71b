"""Corrupting functions for inexact right-hand-side information.

Two classes are modelled.  ``K1`` noise obeys the linear-growth bound
``|noise(t, y)|_1 <= delta * (1 + |y|_1)``; ``K2`` noise additionally is
``delta``-Lipschitz in the state.  The implicit scheme only accepts ``K2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import ProblemSpec, compute_class_constants, one_norm
from .errors import ContractError, DomainError
from .randomization import noise_matrix


class NoiseClass(str, enum.Enum):
    K1 = "K1"
    K2 = "K2"


class NoiseKind(str, enum.Enum):
    ZERO = "Zero"
    CONSTANT_DIRECTION = "ConstantDirection"
    LINEAR_IN_STATE = "LinearInState"
    STATE_SCALED_SINE = "StateScaledSine"
    ADVERSARIAL_SIGN = "AdversarialSign"


_DEFAULT_CLASS = {
    NoiseKind.ZERO: NoiseClass.K2,
    NoiseKind.CONSTANT_DIRECTION: NoiseClass.K2,
    NoiseKind.LINEAR_IN_STATE: NoiseClass.K2,
    NoiseKind.STATE_SCALED_SINE: NoiseClass.K1,
    NoiseKind.ADVERSARIAL_SIGN: NoiseClass.K1,
}

_DEFAULT_PARAMS = {
    NoiseKind.ZERO: {},
    NoiseKind.CONSTANT_DIRECTION: {"sign": 1.0},
    NoiseKind.LINEAR_IN_STATE: {"scale": 1.0},
    NoiseKind.STATE_SCALED_SINE: {"omega": 6 * np.pi, "kappa": 1.0},
    NoiseKind.ADVERSARIAL_SIGN: {},
}


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """A corrupting function with precision ``delta`` and a perturbed initial value.

    Kind-specific ``params``:

    * ``ConstantDirection``: ``sign`` in {-1, +1}; the noise is ``sign*delta*e_1``.
    * ``LinearInState``: ``scale`` with ``|scale| <= 1``; the noise is ``delta*scale*y``.
    * ``StateScaledSine``: ``omega``, ``kappa`` and an optional unit one-norm
      ``direction`` u (default ``(1/d, ..., 1/d)``); the noise is
      ``delta*sin(omega*t + kappa*y_1)*(1 + |y|_1)*u``.  Its state-Lipschitz
      constant is unbounded unless ``kappa == 0``, so it is ``K1`` only.
    * ``AdversarialSign``: ``sigma*delta*(1 + |y|_1)*e_1`` with a fresh random
      sign ``sigma`` per evaluation, taken from the path's noise stream.
    """

    delta: float
    kind: NoiseKind
    d: int
    class_tag: NoiseClass
    params: dict = field(default_factory=dict)
    eta_perturbation: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        object.__setattr__(self, "class_tag", NoiseClass(self.class_tag))
        params = dict(_DEFAULT_PARAMS[self.kind])
        unknown = set(self.params) - set(params) - {"direction"}
        if unknown:
            raise DomainError(f"unknown parameters for {self.kind.value}: {sorted(unknown)}")
        params.update(self.params)
        if self.kind is NoiseKind.CONSTANT_DIRECTION and params["sign"] not in (1.0, -1.0):
            raise DomainError("sign must be +1 or -1")
        if self.kind is NoiseKind.LINEAR_IN_STATE and abs(params["scale"]) > 1.0:
            raise DomainError("LinearInState needs |scale| <= 1")
        if self.kind is NoiseKind.STATE_SCALED_SINE:
            u = np.asarray(params.get("direction", np.full(self.d, 1.0 / self.d)), dtype=float)
            if u.shape != (self.d,) or abs(one_norm(u) - 1.0) > 1e-12:
                raise DomainError("direction must be a unit one-norm vector of length d")
            params["direction"] = u
        object.__setattr__(self, "params", params)

        eta_pert = np.zeros(self.d) if self.eta_perturbation is None else self.eta_perturbation
        eta_pert = np.array(eta_pert, dtype=float)
        if eta_pert.shape != (self.d,):
            raise DomainError("eta_perturbation must have length d")
        if one_norm(eta_pert) > self.delta * (1 + 1e-12):
            raise DomainError("eta_perturbation must lie in the delta ball")
        eta_pert.setflags(write=False)
        object.__setattr__(self, "eta_perturbation", eta_pert)

    @property
    def needs_draws(self) -> bool:
        return self.kind is NoiseKind.ADVERSARIAL_SIGN and self.delta > 0

    def __call__(self, t, y, sign=None):
        return corrupt(self, t, y, sign=sign)


def make_noise(kind, delta, d, class_tag=None, eta_shift=0.0, **params) -> NoiseModel:
    """Build a model; the initial value is shifted by ``eta_shift*delta*e_1``."""
    kind = NoiseKind(kind)
    if not -1.0 <= eta_shift <= 1.0:
        raise DomainError("eta_shift must lie in [-1, 1]")
    eta_pert = np.zeros(d)
    eta_pert[0] = eta_shift * delta
    return NoiseModel(
        delta=float(delta),
        kind=kind,
        d=d,
        class_tag=class_tag or _DEFAULT_CLASS[kind],
        params=params,
        eta_perturbation=eta_pert,
    )


def zero_noise(d) -> NoiseModel:
    return make_noise(NoiseKind.ZERO, 0.0, d)


def _e1_like(y):
    e = np.zeros_like(y)
    e[..., 0] = 1.0
    return e


def corrupt(m: NoiseModel, t, y, sign=None, check=False) -> np.ndarray:
    """Evaluate the corrupting function at ``(t, y)``; shapes as for ``rhs``.

    ``sign`` is only read by ``AdversarialSign`` and broadcasts against
    ``y[..., 0]``; it defaults to +1.
    """
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    kind, delta, prm = m.kind, m.delta, m.params
    if kind is NoiseKind.ZERO or delta == 0.0:
        out = np.zeros_like(y)
    elif kind is NoiseKind.CONSTANT_DIRECTION:
        out = (prm["sign"] * delta) * _e1_like(y)
    elif kind is NoiseKind.LINEAR_IN_STATE:
        out = (delta * prm["scale"]) * y
    elif kind is NoiseKind.STATE_SCALED_SINE:
        amp = delta * np.sin(prm["omega"] * t + prm["kappa"] * y[..., 0])
        amp = amp * (1.0 + np.abs(y).sum(axis=-1))
        out = amp[..., None] * prm["direction"]
    else:
        s = 1.0 if sign is None else np.asarray(sign, dtype=float)
        out = (s * delta * (1.0 + np.abs(y).sum(axis=-1)))[..., None] * _e1_like(y)
    if check:
        bound = delta * (1.0 + np.abs(y).sum(axis=-1))
        if np.any(np.abs(out).sum(axis=-1) > bound * (1 + 1e-12)):
            raise ContractError(f"{kind.value} noise escaped its K1 bound")
    return out


def noise_signs(m: NoiseModel, seed: int, paths, n: int):
    """Per-path, per-step signs for ``AdversarialSign``; ``None`` for other kinds."""
    if not m.needs_draws:
        return None
    return np.where(noise_matrix(seed, paths, n) < 0.5, 1.0, -1.0)


@dataclass(frozen=True)
class PerturbedProblem:
    """The pair ``(eta~, f~)`` a scheme actually sees."""

    base: ProblemSpec
    noise: NoiseModel

    def __post_init__(self):
        if self.noise.d != self.base.d:
            raise DomainError("noise dimension does not match the problem")

    @property
    def eta_tilde(self) -> np.ndarray:
        return self.base.eta + self.noise.eta_perturbation

    def rhs_tilde(self, t, y, sign=None):
        return self.base.rhs(t, y) + corrupt(self.noise, t, y, sign=sign)


@dataclass(frozen=True)
class MembershipReport:
    k1_ratio: float
    k2_ratio: float
    declared: NoiseClass
    passed: bool


def _sample_ball(rng, center, radius, count):
    d = center.shape[0]
    direction = rng.dirichlet(np.ones(d), size=count) * rng.choice([-1.0, 1.0], size=(count, d))
    r = radius * rng.random(count) ** (1.0 / d)
    return center + r[:, None] * direction


def verify_class_membership(m: NoiseModel, p: ProblemSpec, samples: int, seed: int) -> MembershipReport:
    """Sampled check of the class bounds on ``[a, b] x B(eta, R0)``.

    Reports the largest observed ``|noise|_1 / (delta (1 + |y|_1))`` and, for
    pairs, ``|noise(x) - noise(y)|_1 / (delta |x - y|_1)``.  Pairs are drawn
    both far apart and at log-uniform separations down to 1% of ``1 + |y|_1``.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if m.d != p.d:
        raise DomainError("noise dimension does not match the problem")
    if m.delta == 0.0:
        return MembershipReport(0.0, 0.0, m.class_tag, True)
    rng = np.random.default_rng(seed)
    R0 = compute_class_constants(p).R0
    t = p.a + p.length * rng.random(samples)
    y = _sample_ball(rng, p.eta, R0, samples)
    sign = rng.choice([-1.0, 1.0], size=samples)
    val = corrupt(m, t, y, sign=sign)
    k1 = float(np.max(one_norm(val) / (m.delta * (1.0 + one_norm(y)))))

    x = _sample_ball(rng, p.eta, R0, samples)
    close = samples // 2
    # relative gaps below ~1e-2 let cancellation error exceed the 1e-12 slack
    step = (1.0 + one_norm(y[:close])) * 10.0 ** rng.uniform(-2, 0, size=close)
    x[:close] = y[:close] + step[:, None] * _sample_ball(rng, np.zeros(p.d), 1.0, close)
    gap = one_norm(x - y)
    keep = gap > 0
    # signs are per evaluation, so the pairwise check compares like with like
    diff = one_norm(corrupt(m, t, x, sign=sign) - val)
    k2 = float(np.max(diff[keep] / (m.delta * gap[keep]), initial=0.0))

    ok = k1 <= 1 + 1e-12
    if m.class_tag is NoiseClass.K2:
        ok = ok and k2 <= 1 + 1e-12
    return MembershipReport(k1, k2, m.class_tag, ok)
