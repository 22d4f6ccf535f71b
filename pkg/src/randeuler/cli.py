"""Command-line front end.

Subcommands: ``convergence``, ``noise-sweep``, ``stability``, ``validate``,
``demo-lower-bound`` and ``plot``.  Each reads its ``[section]`` of an optional
config file; any key can be overridden with ``--key value``.  Exit codes:
0 success, 2 config error, 3 numerical precondition violation, 4 a-priori bound
violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    estimate_error,
    fit_order,
    noise_floor_sweep,
    path_suprema,
    theoretical_order,
    validate_bounds,
)
from .errors import (
    BoundViolation,
    ConfigError,
    DivergenceError,
    DomainError,
    NonConvergenceError,
    PreconditionError,
    ReferenceAccuracyError,
)
from .config import SCHEMA, ExperimentConfig
from .noise import NoiseClass, NoiseKind, make_noise
from .problems import adversarial_pair, fixture_from_name
from .schemes import ImplicitSolverConfig, min_implicit_steps
from .stability import Mode, Verdict, raster_region

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_BOUND = 0, 2, 3, 4

COMMANDS = ("convergence", "noise-sweep", "stability", "validate", "demo-lower-bound", "plot")


def _version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _num(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _num(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return _num(x)
    return x


def _write_json(path, payload, cfg):
    doc = {"version": _version(), "config": cfg.as_strings(), **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solver(cfg) -> ImplicitSolverConfig:
    return ImplicitSolverConfig(cfg["fp_tolerance"], cfg["max_iterations"], cfg["predictor"])


def _noise_params(cfg) -> dict:
    kind = NoiseKind(cfg["noise"])
    if kind is NoiseKind.CONSTANT_DIRECTION:
        return {"sign": cfg["noise_sign"]}
    if kind is NoiseKind.LINEAR_IN_STATE:
        return {"scale": cfg["noise_scale"]}
    if kind is NoiseKind.STATE_SCALED_SINE:
        return {"omega": cfg["noise_omega"], "kappa": cfg["noise_kappa"]}
    return {}


def cmd_convergence(cfg, out: Path, threads: int, force: bool) -> int:
    problem = fixture_from_name(cfg["fixture"])
    noise = make_noise(cfg["noise"], cfg["delta"], problem.d, eta_shift=cfg["eta_shift"], **_noise_params(cfg))
    rows, points = [], []
    for n in cfg["n_list"]:
        est = estimate_error(
            problem, noise, cfg["scheme"], n, cfg["paths"], cfg["p"], cfg["seed"],
            cfg["sup_refinement"], _solver(cfg), threads, force,
        )
        rows.append([cfg["scheme"], cfg["fixture"], problem.rho, cfg["delta"], n, problem.length / n,
                     cfg["p"], cfg["paths"], est.value, est.std_error])
        points.append((n, est.value))
    _write_csv(out / "convergence.csv",
               ["scheme", "fixture", "rho", "delta", "n", "h", "p", "M", "error", "std_error"], rows)
    payload = {"theoretical_order": theoretical_order(problem.rho), "rho": problem.rho}
    if len(points) >= 3:
        fit = fit_order(points, drop_nonpositive=True)
        payload.update(fitted_order=fit.fitted_order, intercept=fit.intercept, r_squared=fit.r_squared)
    else:
        payload.update(fitted_order=None, intercept=None, r_squared=None)
    _write_json(out / "order.json", payload, cfg)
    return EXIT_OK


def cmd_noise_sweep(cfg, out: Path, threads: int, force: bool) -> int:
    problem = fixture_from_name(cfg["fixture"])
    rows = noise_floor_sweep(
        problem, cfg["noise"], cfg["scheme"], cfg["n"], cfg["deltas"], cfg["paths"], cfg["seed"],
        cfg["p"], cfg["sup_refinement"], _solver(cfg), threads, cfg["eta_shift"], _noise_params(cfg), force,
    )
    _write_csv(
        out / "noisefloor.csv",
        ["delta", "error", "error_over_delta", "lower_bound", "std_error"],
        [[r.delta, r.estimate.value, r.error_over_delta, problem.length * r.delta, r.estimate.std_error] for r in rows],
    )
    return EXIT_OK


_PGM_LEVEL = {Verdict.STABLE: 255, Verdict.INCONCLUSIVE: 128, Verdict.UNSTABLE: 0}


def cmd_stability(cfg, out: Path, threads: int, force: bool) -> int:
    mode = Mode.IMPLICIT if cfg["mode"] == "implicit" else Mode.EXPLICIT
    raster = raster_region(
        mode, (cfg["re_min"], cfg["re_max"]), (cfg["im_min"], cfg["im_max"]), (cfg["nx"], cfg["ny"]),
        cfg["h"], cfg["steps"], cfg["paths"], cfg["seed"], cfg["plane"], threads, cfg["blowup"], cfg["decay"],
    )
    _write_csv(
        out / "stability.csv",
        ["re", "im", "ms", "as", "sp", "det_agrees"],
        [[c.x, c.y, *(v.value for v in c.verdict.triple), c.det_agrees] for c in raster.cells],
    )
    nx, ny = cfg["nx"], cfg["ny"]
    lines = ["P2", f"# {mode.value} stability, plane={cfg['plane']}, 255=stable 128=inconclusive 0=unstable",
             f"{nx} {ny}", "255"]
    for row in reversed(range(ny)):  # top row is the largest imaginary part
        cells = raster.cells[row * nx:(row + 1) * nx]
        lines.append(" ".join(str(_PGM_LEVEL[min(c.verdict.triple, key=lambda v: _PGM_LEVEL[v])]) for c in cells))
    (out / "stability.pgm").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "stability_summary.json", {"mode": mode.value, "summary": raster.summary()}, cfg)
    return EXIT_OK


_EXPLICIT_NOISES = [k for k in NoiseKind]
_IMPLICIT_NOISES = [NoiseKind.ZERO, NoiseKind.CONSTANT_DIRECTION, NoiseKind.LINEAR_IN_STATE]


def cmd_validate(cfg, out: Path, threads: int, force: bool) -> int:
    reports = []
    solver = _solver(cfg)
    for name in cfg["fixtures"]:
        problem = fixture_from_name(name)
        for scheme in cfg["schemes"]:
            n = cfg["n"]
            kinds = _EXPLICIT_NOISES
            if scheme == "implicit":
                # perturbation bound also needs hL <= 1/2
                n = max(n, min_implicit_steps(problem.K, max(problem.L, 2 * problem.L - 1), problem.length))
                kinds = _IMPLICIT_NOISES
            for delta in cfg["deltas"]:
                for kind in kinds:
                    noise = make_noise(kind, delta, problem.d, eta_shift=1.0)
                    if scheme == "implicit" and noise.class_tag is not NoiseClass.K2:
                        continue
                    rep = validate_bounds(problem, noise, scheme, n, cfg["paths"], cfg["seed"], solver, threads)
                    reports.append({"fixture_spec": name, **rep.to_dict()})
    violations = sum(1 for r in reports if not r["passed"])
    _write_json(out / "bounds.json", {"passed": violations == 0, "violations": violations, "reports": reports}, cfg)
    if violations:
        raise BoundViolation(f"{violations} bound violation(s); see {out / 'bounds.json'}")
    return EXIT_OK


def cmd_demo_lower_bound(cfg, out: Path, threads: int, force: bool) -> int:
    a, b = cfg["a"], cfg["b"]
    rows, records = [], []
    for delta in cfg["deltas"]:
        if not delta > 0:
            raise ConfigError("demo-lower-bound needs delta in (0, 1]")
        pair = adversarial_pair(delta, a, b)
        bound = (b - a) * delta
        for scheme in ("explicit", "implicit"):
            errs = []
            for problem, cancel in ((pair.plus, pair.cancel_plus), (pair.minus, pair.cancel_minus)):
                sups = path_suprema(problem, cancel, scheme, cfg["n"], cfg["paths"], cfg["seed"],
                                    cfg["sup_refinement"], threads=threads, force=force)
                errs.append(float(sups.max()))
            worst = max(errs)
            ok = worst >= bound - 1e-12
            rows.append([delta, scheme, errs[0], errs[1], worst, bound, ok])
            records.append({"delta": delta, "scheme": scheme, "error_plus": errs[0], "error_minus": errs[1],
                            "max_error": worst, "lower_bound": bound, "passed": ok})
    _write_csv(out / "lower_bound.csv",
               ["delta", "scheme", "error_plus", "error_minus", "max_error", "lower_bound", "passed"], rows)
    passed = all(r["passed"] for r in records)
    _write_json(out / "lower_bound.json", {"passed": passed, "rows": records}, cfg)
    if not passed:
        raise BoundViolation("an algorithm beat the (b - a) delta lower bound")
    return EXIT_OK


PLOT_SCRIPT = '''"""Plots for the CSV files written next to this script (needs matplotlib)."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(name):
    path = os.path.join(HERE, name)
    if not os.path.exists(path):
        return None
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


conv = read("convergence.csv")
if conv:
    n = [float(r["n"]) for r in conv]
    err = [float(r["error"]) for r in conv]
    plt.figure()
    plt.loglog(n, err, "o-", label="observed")
    plt.xlabel("n")
    plt.ylabel("L^p sup-norm error")
    plt.legend()
    plt.savefig(os.path.join(HERE, "convergence.png"), dpi=150)

floor = read("noisefloor.csv")
if floor:
    d = [float(r["delta"]) for r in floor]
    plt.figure()
    plt.plot(d, [float(r["error"]) for r in floor], "o-", label="error")
    plt.plot(d, [float(r["lower_bound"]) for r in floor], "k--", label="(b-a) delta")
    plt.xlabel("delta")
    plt.legend()
    plt.savefig(os.path.join(HERE, "noisefloor.png"), dpi=150)

stab = read("stability.csv")
if stab:
    colour = {"Stable": "tab:green", "Inconclusive": "tab:orange", "Unstable": "tab:red"}
    plt.figure()
    plt.scatter([float(r["re"]) for r in stab], [float(r["im"]) for r in stab],
                c=[colour[r["ms"]] for r in stab], s=12, marker="s")
    plt.xlabel("Re")
    plt.ylabel("Im")
    plt.title("mean-square verdicts")
    plt.savefig(os.path.join(HERE, "stability.png"), dpi=150)
'''


def cmd_plot(cfg, out: Path, threads: int, force: bool) -> int:
    (out / "plot_results.py").write_text(PLOT_SCRIPT, encoding="utf-8")
    return EXIT_OK


HANDLERS = {
    "convergence": cmd_convergence,
    "noise-sweep": cmd_noise_sweep,
    "stability": cmd_stability,
    "validate": cmd_validate,
    "demo-lower-bound": cmd_demo_lower_bound,
    "plot": cmd_plot,
}


def _parse_overrides(extra):
    overrides = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for {tok}") from None
        overrides[key.replace("-", "_")] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randeuler", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="INI-style config file with a [command] section")
    parser.add_argument("--seed", help="master seed (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--force", action="store_true", help="downgrade scheme precondition failures to warnings")
    parser.add_argument("--plane", choices=("lambda", "h2lambda"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _parse_overrides(extra)
        if args.seed is not None and "seed" in SCHEMA[args.command]:
            overrides["seed"] = args.seed
        if args.plane is not None:
            overrides["plane"] = args.plane
        if args.config:
            cfg = ExperimentConfig.from_file(args.command, args.config, overrides)
        else:
            cfg = ExperimentConfig.build(args.command, overrides)
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, out, args.threads, args.force)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PreconditionError, DivergenceError, NonConvergenceError, ReferenceAccuracyError) as exc:
        print(f"numerical precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return EXIT_BOUND


if __name__ == "__main__":
    sys.exit(main())
