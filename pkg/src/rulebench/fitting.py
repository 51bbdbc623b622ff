"""Weighted-rule quality scoring and the parameter-fitting procedures.

The scorer is linear in the surveyed context features, clamped to the
1-5 answer scale: ``clamp(bias + sum(weight * polarity * score))``.  Which
features enter is dictated by a scoring rule file; the weights come from
one of four fitters (hill climbing, two-phase state-space search, an
exhaustive grid sweep, and a random baseline).  Error is reported as a
percentage of the answer-scale span: ``100 * mean(|prediction - stated|) / 4``.

All fitters are pure functions of (objective, space, seed) and break ties
by the lowest row-major grid index.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .dsl import Program
from .survey import CONTEXT_FEATURES, UserOpinionRecord
from .terms import Term

LIKERT_SPAN = 4.0  # widest possible |prediction - stated| on a 1-5 scale


class DataError(Exception):
    """A record lacks a feature the model wants to score."""


class UndefinedObjectiveError(Exception):
    """No records to evaluate against."""


class FitConfigError(Exception):
    """Bad parameter space / budget configuration."""


@dataclass
class ScoringModel:
    """Rule-linked linear estimator of the 1-5 quality answer."""

    feature_weights: dict[str, float]
    bias: float = 0.0
    polarity: dict[str, int] = field(default_factory=dict)
    clamp_range: tuple[float, float] = (1.0, 5.0)

    def signed_weight(self, feature: str) -> float:
        return self.feature_weights[feature] * self.polarity.get(feature, 1)


def predict(model: ScoringModel, record: UserOpinionRecord) -> float:
    """Clamped weighted sum of the record's context scores."""
    total = model.bias
    for feature, weight in model.feature_weights.items():
        value = getattr(record, feature, None)
        if value is None:
            raise DataError(f"record has no value for feature {feature!r}")
        total += weight * model.polarity.get(feature, 1) * value
    low, high = model.clamp_range
    return min(high, max(low, total))


def error_percentage(predictions, truths) -> float:
    """Mean absolute deviation, normalized to the 1-5 span, as a percentage."""
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.size == 0:
        raise UndefinedObjectiveError("no records")
    return float(100.0 * np.mean(np.abs(predictions - truths)) / LIKERT_SPAN)


def mean_absolute_error(records: list[UserOpinionRecord], model: ScoringModel) -> float:
    if not records:
        raise UndefinedObjectiveError("no records")
    preds = [predict(model, r) for r in records]
    return float(np.mean(np.abs(np.asarray(preds) - np.asarray([r.absolute_quality for r in records], dtype=float))))


def objective(records: list[UserOpinionRecord], model: ScoringModel) -> float:
    """Error percentage of the model against the records' stated quality."""
    if not records:
        raise UndefinedObjectiveError("no records")
    matrix = DatasetMatrix.from_records(records, tuple(model.feature_weights))
    weights = np.array([model.feature_weights[f] for f in matrix.features])
    polarity = np.array([model.polarity.get(f, 1) for f in matrix.features], dtype=float)
    return matrix.error(weights * polarity, model.bias, model.clamp_range)


def scoring_features(program: Program) -> dict[str, float]:
    """Feature -> starting weight, read off a scoring rule file.

    A scoring rule links one unary context-feature head on the left to the
    ``quality`` head on the right; its alpha is the starting weight.
    """
    features: dict[str, float] = {}
    for rule in program.rules:
        if len(rule.lhs) != 1 or len(rule.rhs) != 1:
            continue
        lhs, rhs = rule.lhs[0], rule.rhs[0]
        if not (isinstance(rhs, Term) and rhs.head == "quality"):
            continue
        if isinstance(lhs, Term) and len(lhs.args) == 1:
            features[lhs.head] = float(rule.alpha)
    bad = [f for f in features if f not in CONTEXT_FEATURES]
    if bad:
        raise FitConfigError(f"scoring rules name unknown context feature(s): {', '.join(sorted(bad))}")
    if not features:
        raise FitConfigError("no scoring rules found (expected '<w> * feature(X) => quality(X).')")
    return features


class DatasetMatrix:
    """Vectorized view of one record set for fast objective evaluation."""

    def __init__(self, features: tuple[str, ...], x: np.ndarray, y: np.ndarray):
        self.features = features
        self.x = x
        self.y = y

    @classmethod
    def from_records(cls, records: list[UserOpinionRecord], features: tuple[str, ...]) -> "DatasetMatrix":
        rows = []
        for r in records:
            row = []
            for f in features:
                value = getattr(r, f, None)
                if value is None:
                    raise DataError(f"record has no value for feature {f!r}")
                row.append(float(value))
            rows.append(row)
        x = np.array(rows, dtype=float).reshape(len(records), len(features))
        y = np.array([float(r.absolute_quality) for r in records])
        return cls(tuple(features), x, y)

    def error(self, signed_weights: np.ndarray, bias: float, clamp: tuple[float, float] = (1.0, 5.0)) -> float:
        preds = np.clip(self.x @ signed_weights + bias, clamp[0], clamp[1])
        return float(100.0 * np.mean(np.abs(preds - self.y)) / LIKERT_SPAN)

    def batch_error(self, signed_w: np.ndarray, biases: np.ndarray, clamp: tuple[float, float] = (1.0, 5.0)) -> np.ndarray:
        """Errors of many candidate states at once (states x features)."""
        preds = np.clip(self.x @ signed_w.T + biases[np.newaxis, :], clamp[0], clamp[1])
        return 100.0 * np.mean(np.abs(preds - self.y[:, np.newaxis]), axis=0) / LIKERT_SPAN


class AppObjective:
    """Objective over one app's records, keyed by named parameters.

    The bias coordinate is named ``bias``; every other coordinate is a
    feature weight (polarity applied inside, so the search space stays
    non-negative).  Exposes a ``batch`` method the grid fitters exploit.
    """

    def __init__(self, records: list[UserOpinionRecord], features: tuple[str, ...], polarity: dict[str, int]):
        if not records:
            raise UndefinedObjectiveError("no records")
        self.matrix = DatasetMatrix.from_records(records, features)
        self.polarity = np.array([polarity.get(f, 1) for f in features], dtype=float)
        self.features = features
        self.evaluations = 0

    def __call__(self, params: dict[str, float]) -> float:
        self.evaluations += 1
        weights = np.array([params[f] for f in self.features])
        return self.matrix.error(weights * self.polarity, params.get("bias", 0.0))

    def batch(self, states: list[dict[str, float]]) -> np.ndarray:
        self.evaluations += len(states)
        w = np.array([[s[f] for f in self.features] for s in states])
        b = np.array([s.get("bias", 0.0) for s in states])
        return self.matrix.batch_error(w * self.polarity[np.newaxis, :], b)


@dataclass
class ParameterSpace:
    """Per-coordinate grid levels plus continuous bounds for hill climbing."""

    levels: dict[str, list[float]]
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self.levels = {k: sorted(float(v) for v in vs) for k, vs in self.levels.items()}
        for name, vs in self.levels.items():
            if not vs:
                raise FitConfigError(f"coordinate {name} has no levels")
            lo, hi = self.bounds.get(name, (vs[0], vs[-1]))
            if lo > vs[0] or hi < vs[-1]:
                raise FitConfigError(f"bounds of {name} do not contain its levels")
            self.bounds[name] = (float(lo), float(hi))

    @property
    def coords(self) -> list[str]:
        return list(self.levels)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(self.levels[c]) for c in self.coords)

    @property
    def size(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    def state(self, index: int) -> dict[str, float]:
        """Row-major decode: the last coordinate varies fastest."""
        if not 0 <= index < self.size:
            raise IndexError(index)
        out: dict[str, float] = {}
        for coord, n in zip(reversed(self.coords), reversed(self.shape)):
            out[coord] = self.levels[coord][index % n]
            index //= n
        return {c: out[c] for c in self.coords}

    def index_of(self, params: dict[str, float]) -> int:
        index = 0
        for coord in self.coords:
            levels = self.levels[coord]
            try:
                pos = levels.index(float(params[coord]))
            except ValueError:
                raise FitConfigError(f"{params[coord]} is not a grid level of {coord}")
            index = index * len(levels) + pos
        return index

    def snap(self, params: dict[str, float]) -> dict[str, float]:
        """Nearest grid state (ties toward the lower level)."""
        out = {}
        for coord in self.coords:
            levels = self.levels[coord]
            value = params.get(coord, levels[0])
            out[coord] = min(levels, key=lambda lv: (abs(lv - value), lv))
        return out

    def clip(self, params: dict[str, float]) -> dict[str, float]:
        out = {}
        for coord in self.coords:
            lo, hi = self.bounds[coord]
            out[coord] = min(hi, max(lo, params.get(coord, lo)))
        return out


@dataclass
class FitResult:
    best: dict[str, float]
    best_error: float
    evaluations: int
    trace: list[tuple[int, float]]
    seed: int | None = None
    method: str = ""


def _grid_eval(objective_fn, space: ParameterSpace, indices: list[int]) -> list[float]:
    states = [space.state(i) for i in indices]
    batch = getattr(objective_fn, "batch", None)
    if batch is not None:
        return [float(e) for e in batch(states)]
    return [float(objective_fn(s)) for s in states]


def exhaustive(objective_fn, space: ParameterSpace, cap: int = 1_000_000) -> FitResult:
    """Global grid minimum; refuses grids larger than ``cap``."""
    if space.size > cap:
        raise FitConfigError(f"grid has {space.size} states, above the cap of {cap}")
    indices = list(range(space.size))
    errors = _grid_eval(objective_fn, space, indices)
    best_index = min(indices, key=lambda i: (errors[i], i))
    return FitResult(
        best=space.state(best_index),
        best_error=errors[best_index],
        evaluations=space.size,
        trace=list(zip(indices, errors)),
        method="exhaustive",
    )


def random_baseline(objective_fn, space: ParameterSpace, n: int, seed: int) -> FitResult:
    """Best of ``n`` uniform grid samples (with replacement)."""
    if n < 1:
        raise FitConfigError("need at least one sample")
    rng = random.Random(seed)
    indices = [rng.randrange(space.size) for _ in range(n)]
    errors = _grid_eval(objective_fn, space, indices)
    trace = list(zip(indices, errors))
    best_index, best_error = min(trace, key=lambda t: (t[1], t[0]))
    return FitResult(
        best=space.state(best_index),
        best_error=best_error,
        evaluations=n,
        trace=trace,
        seed=seed,
        method="random",
    )


def state_space_search(
    objective_fn, space: ParameterSpace, budget: int, seed: int, init: dict[str, float] | None = None
) -> FitResult:
    """Two-phase lightweight search over the grid.

    Phase 1 spends half the budget on seeded uniform samples (plus the
    snapped ``init`` state when given).  Phase 2 refines the incumbent one
    coordinate at a time over its grid levels; when a sweep leaves the
    incumbent in place and budget remains, refinement restarts from the
    next-best sampled state.  With a budget covering the whole grid this
    degenerates to the exhaustive sweep.
    """
    if budget < len(space.coords):
        raise FitConfigError(f"budget {budget} is below the number of coordinates ({len(space.coords)})")
    if budget >= space.size:
        result = exhaustive(objective_fn, space, cap=max(space.size, 1))
        return FitResult(result.best, result.best_error, result.evaluations, result.trace, seed, "state_space")

    rng = random.Random(seed)
    evaluated: dict[int, float] = {}
    trace: list[tuple[int, float]] = []

    def eval_index(index: int) -> float:
        if index not in evaluated:
            error = _grid_eval(objective_fn, space, [index])[0]
            evaluated[index] = error
            trace.append((index, error))
        return evaluated[index]

    phase1 = max(budget // 2, 1)
    if init is not None:
        eval_index(space.index_of(space.snap(init)))
    for index in rng.sample(range(space.size), min(phase1, space.size)):
        if len(evaluated) >= phase1:
            break
        eval_index(index)

    def refine(start: int) -> int:
        local = start
        moved = True
        while moved and len(evaluated) < budget:
            moved = False
            for coord in space.coords:
                current = space.state(local)
                candidates = []
                for level in space.levels[coord]:
                    candidate = dict(current)
                    candidate[coord] = level
                    candidates.append(space.index_of(candidate))
                for index in candidates:
                    if len(evaluated) >= budget:
                        break
                    eval_index(index)
                best = min((i for i in candidates if i in evaluated), key=lambda i: (evaluated[i], i))
                if (evaluated[best], best) < (evaluated[local], local):
                    local = best
                    moved = True
            if len(evaluated) >= budget:
                break
        return local

    starts = sorted(evaluated, key=lambda i: (evaluated[i], i))
    incumbent = starts[0]
    refined: set[int] = set()
    for start in starts:
        if len(evaluated) >= budget:
            break
        if start in refined:
            continue
        local = refine(start)
        refined.update((start, local))
        if (evaluated[local], local) < (evaluated[incumbent], incumbent):
            incumbent = local

    return FitResult(
        best=space.state(incumbent),
        best_error=evaluated[incumbent],
        evaluations=len(evaluated),
        trace=trace,
        seed=seed,
        method="state_space",
    )


def hill_climb(
    objective_fn,
    space: ParameterSpace,
    init: dict[str, float],
    step: float = 0.25,
    max_iters: int = 200,
    restarts: int = 3,
    seed: int = 0,
) -> FitResult:
    """Steepest-descent coordinate moves of +-step, best over seeded restarts."""
    if step <= 0:
        raise FitConfigError("step must be positive")
    if max_iters < 1 or restarts < 0:
        raise FitConfigError("budgets must be positive")
    rng = random.Random(seed)
    trace: list[tuple[int, float]] = []
    evaluations = 0

    def evaluate(params: dict[str, float]) -> float:
        nonlocal evaluations
        error = float(objective_fn(params))
        trace.append((evaluations, error))
        evaluations += 1
        return error

    best_params: dict[str, float] | None = None
    best_error = float("inf")
    for restart in range(restarts + 1):
        if restart == 0:
            current = space.clip(dict(init))
        else:
            current = {c: rng.uniform(*space.bounds[c]) for c in space.coords}
        current_error = evaluate(current)
        for _ in range(max_iters):
            neighbors = []
            for coord in space.coords:
                lo, hi = space.bounds[coord]
                for delta in (-step, step):
                    value = min(hi, max(lo, current[coord] + delta))
                    if value != current[coord]:
                        candidate = dict(current)
                        candidate[coord] = value
                        neighbors.append(candidate)
            if not neighbors:
                break
            scored = [(evaluate(n), i) for i, n in enumerate(neighbors)]
            err, pos = min(scored)
            if err < current_error:
                current = neighbors[pos]
                current_error = err
            else:
                break  # local minimum
        if current_error < best_error:
            best_error = current_error
            best_params = current
    assert best_params is not None
    return FitResult(
        best=best_params,
        best_error=best_error,
        evaluations=evaluations,
        trace=trace,
        seed=seed,
        method="hill_climb",
    )


def parse_space(text: str) -> tuple[ParameterSpace, dict[str, int]]:
    """Read the plain-text space/polarity config format.

    Lines are ``levels.<coord> = v, v, ...``, ``bounds.<coord> = lo, hi`` and
    ``polarity.<feature> = +1|-1``; ``#`` comments and blank lines allowed.
    """
    levels: dict[str, list[float]] = {}
    bounds: dict[str, tuple[float, float]] = {}
    polarity: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FitConfigError(f"line {lineno}: expected 'key = values'")
        key, _, value = line.partition("=")
        key = key.strip()
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            if key.startswith("levels."):
                levels[key[len("levels.") :]] = [float(p) for p in parts]
            elif key.startswith("bounds."):
                lo, hi = (float(p) for p in parts)
                bounds[key[len("bounds.") :]] = (lo, hi)
            elif key.startswith("polarity."):
                (p,) = parts
                value = int(p)
                if value not in (-1, 1):
                    raise ValueError(value)
                polarity[key[len("polarity.") :]] = value
            else:
                raise FitConfigError(f"line {lineno}: unknown key {key!r}")
        except (ValueError, TypeError):
            raise FitConfigError(f"line {lineno}: bad value for {key!r}")
    if not levels:
        raise FitConfigError("space config declares no levels")
    return ParameterSpace(levels, bounds), polarity
