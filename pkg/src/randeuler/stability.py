"""Stability of the randomized Euler schemes on ``z' = 2 lam t z``.

Both schemes reduce to products of scalar step factors,
``1 + 2 lam h theta_j`` (explicit) and ``1 / (1 - 2 lam h theta_j)``
(implicit), with ``theta_j = h (j - 1 + tau_j)``.  Everything here works with
sums of log-moduli so that the explicit blow-up never overflows.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularityError
from .randomization import tau_matrix


class Mode(str, enum.Enum):
    EXPLICIT = "Explicit"
    IMPLICIT = "Implicit"
    EXPLICIT_DET = "ExplicitDet"
    IMPLICIT_DET = "ImplicitDet"

    @property
    def implicit(self) -> bool:
        return self in (Mode.IMPLICIT, Mode.IMPLICIT_DET)

    @property
    def deterministic(self) -> bool:
        return self in (Mode.EXPLICIT_DET, Mode.IMPLICIT_DET)

    def det_twin(self) -> "Mode":
        return Mode.IMPLICIT_DET if self.implicit else Mode.EXPLICIT_DET


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


def explicit_step_factor(lam, h, theta):
    return 1 + 2 * complex(lam) * h * np.asarray(theta)


def implicit_step_factor(lam, h, theta):
    denom = 1 - 2 * complex(lam) * h * np.asarray(theta)
    if np.any(denom == 0):
        raise SingularityError(f"1 - 2*lam*h*theta vanishes for lam={lam}, h={h}")
    return 1 / denom


def explicit_ms_factors(lam, h, steps):
    """``E|1 + 2 lam h theta_j|^2`` for each step index in ``steps``."""
    lam = complex(lam)
    j = np.asarray(steps, dtype=float)
    return 1 + 4 * lam.real * h * h * (j - 0.5) + 4 * abs(lam) ** 2 * h**4 * (j * j - j + 1.0 / 3.0)


def implicit_ms_factors(lam, h, steps):
    """``E|1 - 2 lam h theta_j|^{-2}`` for each step index, in closed form.

    With ``w = 2 lam h`` the integrand ``1 / |1 - w theta|^2`` is the
    reciprocal of a quadratic in ``theta``; it integrates to an arctangent
    (complex ``w``) or a rational function (real ``w``).  Returns ``inf`` where
    the step interval contains the pole.
    """
    w = 2 * complex(lam) * h
    wr, wi = w.real, w.imag
    j = np.asarray(steps, dtype=float)
    th0, th1 = h * (j - 1), h * j
    g0, g1 = 1 - wr * th0, 1 - wr * th1
    # a negligible imaginary part would overflow the arctan arguments; the real form
    # is then exact to rounding unless the real pole falls inside the step
    nearly_real = abs(wi) <= 1e-8 * abs(w) and bool(np.all(g0 * g1 > 0))
    if wi != 0.0 and not nearly_real:
        x0 = (abs(w) ** 2 * th0 - wr) / abs(wi)
        x1 = (abs(w) ** 2 * th1 - wr) / abs(wi)
        prod = 1 + x0 * x1
        with np.errstate(divide="ignore", invalid="ignore"):
            diff = np.where(prod > 0, np.arctan((x1 - x0) / np.where(prod > 0, prod, 1.0)), np.arctan(x1) - np.arctan(x0))
        return diff / (abs(wi) * h)
    if wr == 0.0:
        return np.ones_like(j)
    with np.errstate(divide="ignore"):
        val = (th1 - th0) / (g0 * g1) / h
    return np.where(g0 * g1 > 0, val, np.inf)


def ms_moment_explicit(lam, h, K) -> float:
    """``log E|V^K / eta|^2`` for the randomized explicit scheme."""
    if K < 1:
        raise DomainError("K must be at least 1")
    f = explicit_ms_factors(lam, h, np.arange(1, K + 1))
    if np.any(f <= 0):
        raise DomainError("nonpositive mean-square factor")
    return float(np.sum(np.log(f)))


def ms_moment_implicit(lam, h, K) -> float:
    """``log E|U^K / eta|^2`` for the randomized implicit scheme."""
    if K < 1:
        raise DomainError("K must be at least 1")
    f = implicit_ms_factors(lam, h, np.arange(1, K + 1))
    return float(np.sum(np.log(f)))


def _det_thetas(mode, h, K):
    j = np.arange(1, K + 1, dtype=float)
    return (h * (j - 1) if mode is Mode.EXPLICIT_DET else h * j)[None, :]


def path_log_moduli(mode, lam, h, thetas):
    """Per-path ``log|W^K / eta|``, last-step ``log|factor|`` and a singular-path mask."""
    mode = Mode(mode)
    w = 2 * complex(lam) * h
    sign = -1.0 if mode.implicit else 1.0
    re = 1 + sign * w.real * thetas
    im = w.imag * thetas
    with np.errstate(divide="ignore"):
        logs = 0.5 * np.log(re * re + im * im)
    if mode.implicit:
        logs = -logs
        singular = np.isinf(logs).any(axis=1) & (logs > 0).any(axis=1)
    else:
        singular = np.zeros(thetas.shape[0], dtype=bool)
    return logs.sum(axis=1), logs[:, -1], singular


@dataclass(frozen=True)
class StabilityQuery:
    lam: complex
    h: float
    steps: int = 5000
    paths: int = 1000
    blowup: float = 1e6
    decay: float = 1e-6
    mode: Mode = Mode.EXPLICIT

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.blowup > 1 > self.decay > 0:
            raise DomainError("need blowup > 1 > decay > 0")
        if self.h <= 0 or self.steps < 1 or self.paths < 1:
            raise DomainError("h, steps and paths must be positive")


@dataclass(frozen=True)
class StabilityVerdict:
    ms_stable: Verdict
    as_stable: Verdict
    sp_stable: Verdict
    ms_analytic_log_moment: float
    evidence: dict = field(default_factory=dict)

    @property
    def triple(self):
        return (self.ms_stable, self.as_stable, self.sp_stable)


def on_positive_real_axis(lam) -> bool:
    lam = complex(lam)
    return lam.imag == 0.0 and lam.real >= 0.0


def _moment_data(q: StabilityQuery):
    if q.mode.deterministic:
        total, last, _ = path_log_moduli(q.mode, q.lam, q.h, _det_thetas(q.mode, q.h, q.steps))
        return 2 * float(total[0]), 2 * float(last[0])
    factors = (implicit_ms_factors if q.mode.implicit else explicit_ms_factors)(q.lam, q.h, np.arange(1, q.steps + 1))
    with np.errstate(divide="ignore"):
        logs = np.log(factors)
    return float(np.sum(logs)), float(logs[-1])


def classify(q: StabilityQuery, seed: int = 0, taus=None) -> StabilityVerdict:
    """Finite-horizon verdicts for mean-square, almost-sure and in-probability stability.

    A path counts as decayed when ``|W^K/eta| < decay`` and as grown when
    ``|W^K/eta| > blowup`` or when it has not shrunk and its last step factor
    has modulus at least one (a non-contracting tail, e.g. ``lam = 0``).  The
    mean-square verdict applies the same rule to the exact second moment.
    ``taus`` (shape ``(paths, steps)``) may be passed to reuse draws.
    """
    log_dec, log_blow = math.log(q.decay), math.log(q.blowup)
    ms_log, ms_last = _moment_data(q)
    if q.mode.deterministic:
        thetas = _det_thetas(q.mode, q.h, q.steps)
    else:
        if taus is None:
            taus = tau_matrix(seed, range(q.paths), q.steps)
        thetas = q.h * (np.arange(q.steps) + taus)
    total, last, singular = path_log_moduli(q.mode, q.lam, q.h, thetas)

    ok = ~singular
    decayed = ok & (total < log_dec)
    grown = ok & ((total > log_blow) | ((total >= 0) & (last >= 0)))
    m = total.size
    frac_dec = float(decayed.sum()) / m
    frac_grown = float(grown.sum()) / m

    if ms_log < log_dec:
        ms = Verdict.STABLE
    elif ms_log > log_blow or (ms_log >= 0 and ms_last >= 0):
        ms = Verdict.UNSTABLE
    else:
        ms = Verdict.INCONCLUSIVE
    if frac_dec == 1.0:
        as_ = Verdict.STABLE
    elif frac_grown == 1.0:
        as_ = Verdict.UNSTABLE
    else:
        as_ = Verdict.INCONCLUSIVE
    if frac_dec >= 0.99:
        sp = Verdict.STABLE
    elif frac_grown >= 0.99:
        sp = Verdict.UNSTABLE
    else:
        sp = Verdict.INCONCLUSIVE

    positive_real = q.mode.implicit and on_positive_real_axis(q.lam)
    if positive_real:
        # outside the proven region by convention; pole crossings are counted, not fatal
        ms = as_ = sp = Verdict.UNSTABLE
    evidence = {
        "decayed_fraction": frac_dec,
        "grown_fraction": frac_grown,
        "singular_paths": int(singular.sum()),
        # a step factor of exactly zero (explicit, real lam, theta = -1/(2 lam h)) kills the path
        "annihilated_paths": int(np.sum(total == -np.inf)),
        "median_log_modulus": float(np.median(total[ok])) if ok.any() else math.nan,
        "positive_real": positive_real,
    }
    return StabilityVerdict(ms, as_, sp, ms_log, evidence)


def ms_moment_monte_carlo(lam, h, K, paths, seed=0, mode=Mode.EXPLICIT):
    """Monte-Carlo ``log E|W^K/eta|^2`` and its delta-method standard error."""
    taus = tau_matrix(seed, range(paths), K)
    total, _, _ = path_log_moduli(mode, lam, h, h * (np.arange(K) + taus))
    sq = np.exp(2 * total)
    mean = float(np.mean(sq))
    return math.log(mean), float(np.std(sq, ddof=1) / math.sqrt(paths)) / mean


@dataclass(frozen=True)
class RasterCell:
    x: float
    y: float
    lam: complex
    verdict: StabilityVerdict
    det_verdict: StabilityVerdict

    @property
    def det_agrees(self) -> bool:
        return self.verdict.triple == self.det_verdict.triple

    @property
    def positive_real(self) -> bool:
        return on_positive_real_axis(self.lam)


@dataclass(frozen=True)
class Raster:
    mode: Mode
    plane: str
    xs: np.ndarray
    ys: np.ndarray
    cells: list  # row-major, ys outer, xs inner

    def summary(self) -> dict:
        def frac(pred, cells):
            return float(sum(1 for c in cells if pred(c)) / len(cells)) if cells else math.nan

        off_axis = [c for c in self.cells if not c.positive_real]
        out = {}
        for name, idx in (("ms", 0), ("as", 1), ("sp", 2)):
            out[f"{name}_stable_fraction"] = frac(lambda c: c.verdict.triple[idx] is Verdict.STABLE, self.cells)
            out[f"{name}_stable_fraction_off_positive_real"] = frac(
                lambda c: c.verdict.triple[idx] is Verdict.STABLE, off_axis
            )
        out["all_stable_fraction"] = frac(lambda c: all(v is Verdict.STABLE for v in c.verdict.triple), self.cells)
        out["all_stable_fraction_off_positive_real"] = frac(
            lambda c: all(v is Verdict.STABLE for v in c.verdict.triple), off_axis
        )
        out["det_agreement_fraction"] = frac(lambda c: c.det_agrees, self.cells)
        out["cells"] = len(self.cells)
        out["positive_real_cells"] = len(self.cells) - len(off_axis)
        return out


def raster_region(
    mode,
    re_range=(-4.0, 1.0),
    im_range=(-2.0, 2.0),
    resolution=(50, 50),
    h=0.1,
    K=5000,
    M=100,
    seed=0,
    plane="lambda",
    threads=1,
    blowup=1e6,
    decay=1e-6,
) -> Raster:
    """Classify every cell of a grid, randomized and deterministic side by side.

    With ``plane='h2lambda'`` the grid coordinates are values of ``h^2 lam``.
    All cells share the same tau draws.
    """
    mode = Mode(mode)
    if mode.deterministic:
        raise DomainError("raster mode must be a randomized scheme")
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise DomainError("resolution must be at least 2x2")
    if plane not in ("lambda", "h2lambda"):
        raise DomainError("plane must be 'lambda' or 'h2lambda'")
    xs = np.linspace(re_range[0], re_range[1], nx)
    ys = np.linspace(im_range[0], im_range[1], ny)
    scale = 1.0 / (h * h) if plane == "h2lambda" else 1.0
    taus = tau_matrix(seed, range(M), K)

    def cell(xy):
        x, y = xy
        lam = complex(x, y) * scale
        v = classify(StabilityQuery(lam, h, K, M, blowup, decay, mode), seed, taus=taus)
        dv = classify(StabilityQuery(lam, h, K, 1, blowup, decay, mode.det_twin()))
        return RasterCell(float(x), float(y), lam, v, dv)

    coords = [(x, y) for y in ys for x in xs]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(cell, coords))
    else:
        cells = [cell(c) for c in coords]
    return Raster(mode, plane, xs, ys, cells)
