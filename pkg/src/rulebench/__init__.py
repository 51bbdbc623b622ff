"""Rule-based compliance benchmarking with a data-driven scoring layer."""

from .bench import BenchConfig, BenchmarkReport, MethodKind, compare, run_method
from .dsl import ParseDiagnostic, Program, parse_program, print_program
from .engine import EngineConfig, Verdict, VerdictKind, explain, ground, saturate, step
from .fitting import (
    FitResult,
    ParameterSpace,
    ScoringModel,
    exhaustive,
    hill_climb,
    objective,
    predict,
    random_baseline,
    state_space_search,
)
from .survey import (
    GeneratorConfig,
    UserOpinionRecord,
    anonymize,
    correlation_points,
    generate_synthetic,
    histogram,
    load_records,
    running_average,
)
from .terms import (
    DerivationLattice,
    FiniteDomain,
    Rule,
    Term,
    WorkingMemory,
    make_term,
    match,
    substitute,
    wm_insert,
)

__all__ = [
    "BenchConfig",
    "BenchmarkReport",
    "DerivationLattice",
    "EngineConfig",
    "FiniteDomain",
    "FitResult",
    "GeneratorConfig",
    "MethodKind",
    "ParameterSpace",
    "ParseDiagnostic",
    "Program",
    "Rule",
    "ScoringModel",
    "Term",
    "UserOpinionRecord",
    "Verdict",
    "VerdictKind",
    "WorkingMemory",
    "anonymize",
    "compare",
    "correlation_points",
    "exhaustive",
    "explain",
    "generate_synthetic",
    "ground",
    "hill_climb",
    "histogram",
    "load_records",
    "make_term",
    "match",
    "objective",
    "parse_program",
    "predict",
    "print_program",
    "random_baseline",
    "run_method",
    "running_average",
    "saturate",
    "state_space_search",
    "step",
    "substitute",
    "wm_insert",
]

__version__ = "0.1.0"
