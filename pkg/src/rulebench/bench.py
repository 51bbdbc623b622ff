"""Four-way quality-benchmark comparison and its report formats.

For every app the four methods predict each record's stated 1-5 quality
score and are charged the normalized mean-absolute-deviation percentage:

* ``SimpleAverage``   - the record's own context scores averaged (polarity
  mirrored), no fitting;
* ``ExpertScore``     - a fixed per-app score from a config file;
* ``KarbHillClimb``   - the rule-linked linear scorer fitted by hill climbing;
* ``DataDrivenKarb``  - the same scorer fitted by the two-phase state-space
  search, seeded with correlation-derived polarities and starting weights.

Row order everywhere is the order above.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fitting import (
    AppObjective,
    FitResult,
    ParameterSpace,
    ScoringModel,
    error_percentage,
    hill_climb,
    predict,
    state_space_search,
)
from .survey import UserOpinionRecord, dataset_checksum


class BenchConfigError(Exception):
    """Missing or malformed benchmark configuration."""


class MethodKind(Enum):
    SIMPLE_AVERAGE = "SimpleAverage"
    EXPERT_SCORE = "ExpertScore"
    KARB_HILL_CLIMB = "KarbHillClimb"
    DATA_DRIVEN_KARB = "DataDrivenKarb"

    @classmethod
    def order(cls) -> list["MethodKind"]:
        return [cls.SIMPLE_AVERAGE, cls.EXPERT_SCORE, cls.KARB_HILL_CLIMB, cls.DATA_DRIVEN_KARB]

    @classmethod
    def parse(cls, name: str) -> "MethodKind":
        for kind in cls:
            if kind.value.lower() == name.lower() or kind.name.lower() == name.lower():
                return kind
        raise BenchConfigError(f"unknown method {name!r}")


@dataclass
class HillClimbParams:
    step: float = 0.3
    max_iters: int = 200
    restarts: int = 2
    init_bias: float = 3.0


@dataclass
class BenchConfig:
    space: ParameterSpace
    features: tuple[str, ...]
    polarity: dict[str, int] = field(default_factory=dict)
    expert_scores: dict[str, float] = field(default_factory=dict)
    seed: int = 42
    sss_budget: int = 600
    hill: HillClimbParams = field(default_factory=HillClimbParams)
    simple_average_per_app: bool = False  # per-app grand mean instead of per-record mean

    def describe(self) -> dict:
        return {
            "features": list(self.features),
            "polarity": {k: v for k, v in sorted(self.polarity.items())},
            "levels": {k: list(v) for k, v in self.space.levels.items()},
            "bounds": {k: list(v) for k, v in self.space.bounds.items()},
            "expert_scores": {k: v for k, v in sorted(self.expert_scores.items())},
            "seed": self.seed,
            "sss_budget": self.sss_budget,
            "hill_climb": {
                "step": self.hill.step,
                "max_iters": self.hill.max_iters,
                "restarts": self.hill.restarts,
                "init_bias": self.hill.init_bias,
            },
            "simple_average_per_app": self.simple_average_per_app,
        }


def default_config(seed: int = 42, sss_budget: int = 600) -> BenchConfig:
    """Benchmark configuration backed by the bundled space/experts/rule files."""
    from .bundles import bundled_text
    from .dsl import parse_program
    from .fitting import parse_space, scoring_features

    space, polarity = parse_space(bundled_text("space.cfg"))
    features = tuple(scoring_features(parse_program(bundled_text("quality_rules.karb")).program))
    experts = parse_experts(bundled_text("experts.cfg"))
    return BenchConfig(
        space=space,
        features=features,
        polarity=polarity,
        expert_scores=experts,
        seed=seed,
        sss_budget=sss_budget,
    )


def parse_experts(text: str) -> dict[str, float]:
    """Read ``app_id = score`` lines; scores must lie on the 1-5 scale."""
    scores: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BenchConfigError(f"experts config line {lineno}: expected 'app_id = score'")
        app, _, value = line.partition("=")
        try:
            score = float(value.strip())
        except ValueError:
            raise BenchConfigError(f"experts config line {lineno}: bad score {value.strip()!r}")
        if not 1.0 <= score <= 5.0:
            raise BenchConfigError(f"experts config line {lineno}: score must lie in [1, 5]")
        scores[app.strip()] = score
    return scores


def _adjusted(record: UserOpinionRecord, feature: str, polarity: dict[str, int]) -> float:
    value = getattr(record, feature)
    return float(6 - value) if polarity.get(feature, 1) < 0 else float(value)


def _simple_average(records, features, polarity, per_app: bool) -> list[float]:
    per_record = [sum(_adjusted(r, f, polarity) for f in features) / len(features) for r in records]
    if per_app:
        mean = sum(per_record) / len(per_record)
        return [mean] * len(records)
    return per_record


def _data_derived_init(records, features, space: ParameterSpace) -> tuple[dict[str, int], dict[str, float]]:
    """Correlation signs become polarities; magnitudes pick starting levels."""
    y = np.array([float(r.absolute_quality) for r in records])
    polarity: dict[str, int] = {}
    init: dict[str, float] = {}
    for f in features:
        x = np.array([float(getattr(r, f)) for r in records])
        if x.std() == 0 or y.std() == 0:
            corr = 0.0
        else:
            corr = float(np.corrcoef(x, y)[0, 1])
        polarity[f] = -1 if corr < 0 else 1
        init[f] = abs(corr)
    signed_mean = sum(init[f] * polarity[f] * np.mean([getattr(r, f) for r in records]) for f in features)
    init["bias"] = float(np.mean(y) - signed_mean)
    return polarity, space.snap(init)


@dataclass
class MethodRun:
    method: MethodKind
    predictions: list[float]
    error: float
    model: ScoringModel | None = None
    fit: FitResult | None = None


def run_method(method: MethodKind, records: list[UserOpinionRecord], config: BenchConfig) -> MethodRun:
    """Predict every record with one method and charge its error percentage."""
    if not records:
        raise BenchConfigError("no records for this app")
    truths = [r.absolute_quality for r in records]
    features = config.features

    if method is MethodKind.SIMPLE_AVERAGE:
        preds = _simple_average(records, features, config.polarity, config.simple_average_per_app)
        return MethodRun(method, preds, error_percentage(preds, truths))

    if method is MethodKind.EXPERT_SCORE:
        app_id = records[0].app_id
        if app_id not in config.expert_scores:
            raise BenchConfigError(f"no expert score configured for app {app_id}")
        score = config.expert_scores[app_id]
        preds = [score] * len(records)
        return MethodRun(method, preds, error_percentage(preds, truths))

    if method is MethodKind.KARB_HILL_CLIMB:
        objective_fn = AppObjective(records, features, config.polarity)
        init = {f: 0.0 for f in features}
        init["bias"] = config.hill.init_bias
        fit = hill_climb(
            objective_fn,
            config.space,
            init,
            step=config.hill.step,
            max_iters=config.hill.max_iters,
            restarts=config.hill.restarts,
            seed=config.seed,
        )
        model = ScoringModel(
            feature_weights={f: fit.best[f] for f in features},
            bias=fit.best.get("bias", 0.0),
            polarity=dict(config.polarity),
        )
    elif method is MethodKind.DATA_DRIVEN_KARB:
        polarity, init = _data_derived_init(records, features, config.space)
        objective_fn = AppObjective(records, features, polarity)
        fit = state_space_search(objective_fn, config.space, config.sss_budget, config.seed, init=init)
        model = ScoringModel(
            feature_weights={f: fit.best[f] for f in features},
            bias=fit.best.get("bias", 0.0),
            polarity=polarity,
        )
    else:
        raise BenchConfigError(f"unknown method {method}")

    preds = [predict(model, r) for r in records]
    return MethodRun(method, preds, error_percentage(preds, truths), model=model, fit=fit)


@dataclass
class BenchmarkReport:
    apps: list[str]
    methods: list[MethodKind]
    errors: dict[tuple[str, str], float]  # (method value, app) -> error %
    failures: dict[tuple[str, str], str]
    averages: dict[str, float]
    metadata: dict

    def cell(self, method: MethodKind, app: str) -> float | None:
        return self.errors.get((method.value, app))

    def to_csv(self) -> str:
        lines = ["method,app_id,error_percentage"]
        for method in self.methods:
            for app in self.apps:
                err = self.errors.get((method.value, app))
                cell = repr(err) if err is not None else "NA"
                lines.append(f"{method.value},{app},{cell}")
        return "\n".join(lines) + "\n"

    def curve_csv(self) -> str:
        """Error-reduction curves: per app plus the cross-app average."""
        lines = ["method_rank,method,app_id,error_percentage"]
        for rank, method in enumerate(self.methods, start=1):
            for app in self.apps:
                err = self.errors.get((method.value, app))
                cell = repr(err) if err is not None else "NA"
                lines.append(f"{rank},{method.value},{app},{cell}")
        for rank, method in enumerate(self.methods, start=1):
            avg = self.averages.get(method.value)
            cell = repr(avg) if avg is not None else "NA"
            lines.append(f"{rank},{method.value},average,{cell}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "apps": self.apps,
            "methods": [m.value for m in self.methods],
            "errors": {f"{m}|{a}": e for (m, a), e in sorted(self.errors.items())},
            "failures": {f"{m}|{a}": msg for (m, a), msg in sorted(self.failures.items())},
            "averages": self.averages,
            "metadata": self.metadata,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def format_table(self) -> str:
        """Human-readable error matrix, methods as rows and apps as columns."""
        width = max([len("method")] + [len(m.value) for m in self.methods])
        header = "method".ljust(width) + "".join(f"{a:>10}" for a in self.apps) + f"{'average':>10}"
        lines = [header, "-" * len(header)]
        for method in self.methods:
            cells = []
            for app in self.apps:
                err = self.errors.get((method.value, app))
                cells.append(f"{err:10.2f}" if err is not None else f"{'NA':>10}")
            avg = self.averages.get(method.value)
            cells.append(f"{avg:10.2f}" if avg is not None else f"{'NA':>10}")
            lines.append(method.value.ljust(width) + "".join(cells))
        return "\n".join(lines) + "\n"


def compare(records: list[UserOpinionRecord], methods: list[MethodKind], config: BenchConfig) -> BenchmarkReport:
    """Run every (method, app) cell; one failing cell never aborts the rest."""
    if not records:
        raise BenchConfigError("no records to benchmark")
    if not methods:
        raise BenchConfigError("no methods selected")
    by_app: dict[str, list[UserOpinionRecord]] = {}
    for r in records:
        by_app.setdefault(r.app_id, []).append(r)
    apps = sorted(by_app)

    errors: dict[tuple[str, str], float] = {}
    failures: dict[tuple[str, str], str] = {}
    fits: dict[str, dict] = {}
    for method in methods:
        for app in apps:
            try:
                run = run_method(method, by_app[app], config)
            except Exception as exc:  # keep other cells alive
                failures[(method.value, app)] = str(exc)
                continue
            errors[(method.value, app)] = run.error
            if run.fit is not None:
                fits.setdefault(method.value, {})[app] = {
                    "best": {k: v for k, v in sorted(run.fit.best.items())},
                    "evaluations": run.fit.evaluations,
                }

    averages: dict[str, float] = {}
    for method in methods:
        cells = [errors[(method.value, app)] for app in apps if (method.value, app) in errors]
        if cells:
            averages[method.value] = sum(cells) / len(cells)

    metadata = {
        "seed": config.seed,
        "dataset_sha256": dataset_checksum(records),
        "record_count": len(records),
        "config": config.describe(),
        "fits": fits,
    }
    return BenchmarkReport(apps, list(methods), errors, failures, averages, metadata)
