"""Randomized explicit and implicit Euler schemes under inexact information."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ClassConstants,
    ProblemSpec,
    RandomMesh,
    SchemeTag,
    Trajectory,
    compute_class_constants,
    eval_dense,
    make_mesh,
    one_norm,
)
from .noise import NoiseClass, NoiseKind, NoiseModel, PerturbedProblem, corrupt, make_noise  # noqa: E402
from .schemes import (  # noqa: E402
    ImplicitSolverConfig,
    deterministic_variants,
    explicit_rand_euler,
    implicit_rand_euler,
)

__all__ = [
    "ClassConstants",
    "ImplicitSolverConfig",
    "NoiseClass",
    "NoiseKind",
    "NoiseModel",
    "PerturbedProblem",
    "ProblemSpec",
    "RandomMesh",
    "SchemeTag",
    "Trajectory",
    "compute_class_constants",
    "corrupt",
    "deterministic_variants",
    "eval_dense",
    "explicit_rand_euler",
    "implicit_rand_euler",
    "make_mesh",
    "make_noise",
    "one_norm",
]
