"""Fixture IVPs with declared class parameters and, where possible, exact solutions."""

from __future__ import annotations

import math
import re
from typing import NamedTuple

import numpy as np

from .core import ProblemSpec, compute_class_constants
from .errors import ConfigError, DomainError
from .noise import NoiseKind, NoiseModel, make_noise


def linear_autonomous(K=1.0, L=1.0, a=0.0, b=1.0) -> ProblemSpec:
    """``z' = A z``, ``z(a) = A`` with ``A = min(K, L)``; the exact solution is ``A e^{A(t-a)}``."""
    if K <= 0 or L <= 0:
        raise DomainError("K and L must be positive")
    A = min(K, L)

    def rhs(t, y):
        return A * np.asarray(y, dtype=float)

    def exact(t):
        t = np.asarray(t, dtype=float)
        return (A * np.exp(A * (t - a)))[..., None]

    return ProblemSpec(a, b, [A], rhs, K=K, L=L, rho=1.0, analytic_solution=exact, name="linear")


def holder_time_probe(rho, L=1.0, a=0.0, b=1.0) -> ProblemSpec:
    """State-independent ``f = L |t - m|^rho`` with its kink at the midpoint ``m``.

    Only one interval per mesh sees the kink, so this probe's Monte-Carlo error
    decays like ``h^(1+rho)`` rather than the worst-case rate; see
    :func:`rough_holder_probe` for a field that attains it.
    """
    if not 0 < rho <= 1:
        raise DomainError("rho must lie in (0, 1]")
    mid = 0.5 * (a + b)

    def rhs(t, y):
        y = np.asarray(y, dtype=float)
        val = L * np.abs(np.asarray(t, dtype=float) - mid) ** rho
        return np.broadcast_to(val[..., None] if np.ndim(val) else val, y.shape).copy()

    def antiderivative(s):
        u = s - mid
        return np.sign(u) * np.abs(u) ** (rho + 1) / (rho + 1)

    def exact(t):
        t = np.asarray(t, dtype=float)
        return (L * (antiderivative(t) - antiderivative(a)))[..., None]

    K = L * (0.5 * (b - a)) ** rho + 1.0
    return ProblemSpec(a, b, [0.0], rhs, K=K, L=L, rho=rho, analytic_solution=exact, name=f"kink({rho:g})")


def _holder_constant(rho, weights, freqs):
    """Rigorous Hölder-``rho`` constant of ``sum_k w_k cos(freq_k t)`` for dyadic weights ``2^{-k rho}``."""
    if rho == 1.0:
        return float(np.sum(weights * freqs))
    q = 2.0 ** (1.0 - rho)
    return math.pi * q / (q - 1.0) + 2.0 / (1.0 - 2.0 ** (-rho))


def rough_holder_probe(rho, a=0.0, b=1.0, coupling=1.0, amplitude=1.0, octaves=30) -> ProblemSpec:
    """Scalar ``z' = g(t) + c z`` whose forcing ``g`` is Hölder-``rho`` at every point.

    For ``rho < 1`` the forcing is the lacunary series
    ``g(t) = amplitude * sum_{k<octaves} 2^{-k rho} cos(2^k pi (t - a))``; for
    ``rho = 1`` a single cosine.  Roughness everywhere makes the random
    quadrature error scale like ``h^(rho+1/2)`` and the linear coupling ``c``
    contributes the O(h) Euler bias, so the observed order is
    ``min(rho + 1/2, 1)``.  The solution is known in closed form.
    """
    if not 0 < rho <= 1:
        raise DomainError("rho must lie in (0, 1]")
    if coupling <= 0 or amplitude <= 0:
        raise DomainError("coupling and amplitude must be positive")
    k = np.arange(1 if rho == 1.0 else octaves)
    weights = amplitude * 2.0 ** (-k * rho)
    freqs = math.pi * 2.0**k
    c = float(coupling)

    def forcing(t):
        # row-wise sum rather than BLAS so a path's value never depends on batch shape
        return (np.cos(np.multiply.outer(np.asarray(t, dtype=float) - a, freqs)) * weights).sum(axis=-1)

    def rhs(t, y):
        y = np.asarray(y, dtype=float)
        return forcing(t)[..., None] + c * y

    def exact(t):
        u = np.asarray(t, dtype=float) - a
        ou = np.multiply.outer(u, freqs)
        terms = (-c * np.cos(ou) + freqs * np.sin(ou) + c * np.exp(c * u)[..., None]) / (c * c + freqs**2)
        return (terms * weights).sum(axis=-1)[..., None]

    K = max(float(weights.sum()), c)
    L = max(amplitude * _holder_constant(rho, weights / amplitude, freqs), c)
    return ProblemSpec(a, b, [0.0], rhs, K=K, L=L, rho=rho, analytic_solution=exact, name=f"holder({rho:g})")


def lipschitz_state_probe(K=1.0, L=1.0, d=2, a=0.0, b=1.0) -> ProblemSpec:
    """``f_i(t, y) = K/(2d) (1 + sin y_i)``: bounded, globally Lipschitz, no closed form."""
    if d < 1:
        raise DomainError("d must be at least 1")
    if K / 2 > L:
        raise DomainError(f"need K/2 <= L, got K={K}, L={L}")
    scale = K / (2 * d)

    def rhs(t, y):
        return scale * (1.0 + np.sin(np.asarray(y, dtype=float)))

    eta = np.full(d, scale)
    return ProblemSpec(a, b, eta, rhs, K=K, L=L, rho=1.0, name=f"state({d})")


class AdversarialPair(NamedTuple):
    """Two problems ``f = +-delta e_1`` and the noise that turns each into ``f~ = 0``."""

    plus: ProblemSpec
    minus: ProblemSpec
    cancel_plus: NoiseModel
    cancel_minus: NoiseModel

    @property
    def separation(self) -> float:
        # sup_t |z_plus - z_minus|_1
        return 2 * self.cancel_plus.delta * self.plus.length


def _constant_field(vec, a, name):
    vec = np.asarray(vec, dtype=float)

    def rhs(t, y):
        return np.broadcast_to(vec, np.shape(y)).copy()

    def exact(t):
        return np.multiply.outer(np.asarray(t, dtype=float) - a, vec)

    return rhs, exact


def adversarial_pair(delta, a=0.0, b=1.0, d=2) -> AdversarialPair:
    """Pair of problems indistinguishable from ``f~ = 0`` at precision ``delta`` (K = L = 1)."""
    if not 0 < delta <= 1.0:
        raise DomainError("delta must lie in (0, min(K, 1)] = (0, 1]")
    e1 = np.zeros(d)
    e1[0] = 1.0
    problems = []
    for sign, label in ((1.0, "+"), (-1.0, "-")):
        rhs, exact = _constant_field(sign * delta * e1, a, label)
        problems.append(
            ProblemSpec(a, b, np.zeros(d), rhs, K=1.0, L=1.0, rho=1.0, analytic_solution=exact, name=f"adversarial({delta:g}){label}")
        )
    cancel = [make_noise(NoiseKind.CONSTANT_DIRECTION, delta, d, sign=-s) for s in (1.0, -1.0)]
    return AdversarialPair(problems[0], problems[1], cancel[0], cancel[1])


def stability_problem(lam, T=1.0, eta=1.0 + 0j) -> ProblemSpec:
    """``z' = 2 lam t z`` on ``[0, T]`` written as a real 2-vector ``(Re z, Im z)``.

    The exact solution is ``eta * exp(lam t^2)``.
    """
    lam = complex(lam)
    eta = complex(eta)
    if eta == 0:
        raise DomainError("eta must be nonzero")
    lr, li = lam.real, lam.imag
    col = abs(lr) + abs(li)  # one-norm operator norm of [[lr, -li], [li, lr]]

    def rhs(t, y):
        y = np.asarray(y, dtype=float)
        x0, x1 = y[..., 0], y[..., 1]
        rot = np.stack([lr * x0 - li * x1, li * x0 + lr * x1], axis=-1)
        return 2.0 * np.asarray(t, dtype=float)[..., None] * rot

    def exact(t):
        z = eta * np.exp(lam * np.asarray(t, dtype=float) ** 2)
        return np.stack([z.real, z.imag], axis=-1)

    eta_vec = np.array([eta.real, eta.imag])
    K = max(2 * T * col, abs(eta.real) + abs(eta.imag), 1.0)
    # time-Lipschitz constant grows with |x| on B(eta, R0), so compute R0 first
    probe = ProblemSpec(0.0, T, eta_vec, rhs, K=K, L=1.0)
    R0 = compute_class_constants(probe).R0
    L = max(2 * T * col, 2 * col * (np.abs(eta_vec).sum() + R0), 1.0)
    return ProblemSpec(0.0, T, eta_vec, rhs, K=K, L=L, rho=1.0, analytic_solution=exact, name=f"stability({lr:g},{li:g})")


_FIXTURE_RE = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


def fixture_from_name(name: str) -> ProblemSpec:
    """Resolve ``linear``, ``holder(rho)``, ``kink(rho)``, ``state(d)``,
    ``adversarial(delta)`` or ``stability(re,im)``.

    ``adversarial(delta)`` resolves to the ``+delta e_1`` member of the pair.
    """
    m = _FIXTURE_RE.match(name)
    if not m:
        raise ConfigError(f"malformed fixture name {name!r}")
    kind, argstr = m.group(1), m.group(2)
    try:
        args = [float(x) for x in argstr.split(",")] if argstr else []
    except ValueError as exc:
        raise ConfigError(f"bad fixture arguments in {name!r}") from exc
    arity = {"linear": 0, "holder": 1, "kink": 1, "state": 1, "adversarial": 1, "stability": 2}
    if kind not in arity:
        raise ConfigError(f"unknown fixture {kind!r}")
    if len(args) != arity[kind]:
        raise ConfigError(f"fixture {kind!r} takes {arity[kind]} argument(s)")
    try:
        if kind == "linear":
            return linear_autonomous()
        if kind == "holder":
            return rough_holder_probe(args[0])
        if kind == "kink":
            return holder_time_probe(args[0])
        if kind == "state":
            if args[0] != int(args[0]):
                raise ConfigError("state(d) needs an integer d")
            return lipschitz_state_probe(d=int(args[0]))
        if kind == "adversarial":
            return adversarial_pair(args[0]).plus
        return stability_problem(complex(args[0], args[1]))
    except DomainError as exc:
        raise ConfigError(f"fixture {name!r}: {exc}") from exc
