"""User-opinion survey data: ingest, anonymize, segment and summarize.

Records follow a fixed CSV schema (five 1-5 scores, demographics and a
micro-community tag plus in-community arrival order).  All analytics are
window-based and never let a window cross a community boundary.  A seeded
synthetic generator stands in for real survey data.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import random
from dataclasses import dataclass, field

MEASURES = ("absolute_quality", "error_freeness", "ui_complexity", "rationality", "usability")
OPTIONAL_MEASURES = ("relative_quality", "accordance")
CONTEXT_FEATURES = ("error_freeness", "ui_complexity", "rationality", "usability")

CSV_HEADER = (
    "app_id",
    "absolute_quality",
    "error_freeness",
    "ui_complexity",
    "rationality",
    "usability",
    "gender",
    "age",
    "community_id",
    "seq",
)


class DataFormatError(Exception):
    """The file as a whole is unusable (bad or missing header)."""


class SizeError(Exception):
    """A series is too short for the requested window."""


class MeasureError(Exception):
    """Unknown measure or malformed app id."""


class ConfigError(Exception):
    """Invalid generator configuration."""


@dataclass(frozen=True)
class UserOpinionRecord:
    app_id: str
    absolute_quality: int
    error_freeness: int
    ui_complexity: int
    rationality: int
    usability: int
    gender: str = "unknown"
    age: int | None = None
    community_id: str = "c0"
    seq: int = 0
    relative_quality: int | None = None
    accordance: int | None = None

    def measure(self, name: str) -> int:
        if name not in MEASURES and name not in OPTIONAL_MEASURES:
            raise MeasureError(f"unknown measure {name!r}")
        value = getattr(self, name)
        if value is None:
            raise MeasureError(f"measure {name!r} missing on record (optional column not loaded)")
        return value


@dataclass(frozen=True)
class RowDiagnostic:
    line: int
    message: str

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}: error: {self.message}"


@dataclass
class LoadResult:
    records: list[UserOpinionRecord]
    diagnostics: list[RowDiagnostic] = field(default_factory=list)


def _parse_likert(raw: str, column: str) -> int:
    value = int(raw)
    if value not in (1, 2, 3, 4, 5):
        raise ValueError(f"{column} must be in 1..5, got {raw}")
    return value


def load_records(path) -> LoadResult:
    """Read a survey CSV; invalid rows are skipped with line diagnostics."""
    with open(path, newline="", encoding="utf-8") as fh:
        return read_records(fh)


def read_records(fh) -> LoadResult:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty file: missing header")
    if tuple(header[: len(CSV_HEADER)]) != CSV_HEADER:
        raise DataFormatError(f"bad header: expected columns {','.join(CSV_HEADER)}")
    extras = tuple(header[len(CSV_HEADER) :])
    if any(col not in OPTIONAL_MEASURES for col in extras):
        raise DataFormatError(f"unknown extra columns: {','.join(extras)}")

    records: list[UserOpinionRecord] = []
    diagnostics: list[RowDiagnostic] = []
    last_seq: dict[str, int] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            diagnostics.append(RowDiagnostic(lineno, f"expected {len(header)} fields, got {len(row)}"))
            continue
        try:
            app_id = row[0].strip()
            if not app_id:
                raise ValueError("empty app_id")
            scores = {name: _parse_likert(row[i + 1], name) for i, name in enumerate(MEASURES)}
            gender = row[6].strip() or "unknown"
            age = None if row[7].strip() in ("", "unknown") else int(row[7])
            community_id = row[8].strip()
            seq = int(row[9])
            optional = {}
            for col, raw in zip(extras, row[len(CSV_HEADER) :]):
                optional[col] = None if raw.strip() == "" else _parse_likert(raw, col)
        except ValueError as exc:
            diagnostics.append(RowDiagnostic(lineno, str(exc)))
            continue
        if community_id in last_seq and seq <= last_seq[community_id]:
            diagnostics.append(
                RowDiagnostic(lineno, f"seq {seq} not increasing within community {community_id}")
            )
            continue
        last_seq[community_id] = seq
        records.append(
            UserOpinionRecord(
                app_id=app_id,
                gender=gender,
                age=age,
                community_id=community_id,
                seq=seq,
                **scores,
                **optional,
            )
        )
    return LoadResult(records, diagnostics)


def records_to_csv(records: list[UserOpinionRecord]) -> str:
    """Canonical CSV text (optional columns included iff any record has them)."""
    with_optional = [c for c in OPTIONAL_MEASURES if any(getattr(r, c) is not None for r in records)]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(CSV_HEADER) + with_optional)
    for r in records:
        row = [
            r.app_id,
            r.absolute_quality,
            r.error_freeness,
            r.ui_complexity,
            r.rationality,
            r.usability,
            r.gender,
            "unknown" if r.age is None else r.age,
            r.community_id,
            r.seq,
        ]
        row += ["" if getattr(r, c) is None else getattr(r, c) for c in with_optional]
        writer.writerow(row)
    return out.getvalue()


def write_records(records: list[UserOpinionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def dataset_checksum(records: list[UserOpinionRecord]) -> str:
    return hashlib.sha256(records_to_csv(records).encode("utf-8")).hexdigest()


def anonymize(names: list[str], seed: int) -> dict[str, str]:
    """Seeded bijection from raw app names onto codes M1, M2, ..."""
    distinct = list(dict.fromkeys(names))
    codes = [f"M{i}" for i in range(1, len(distinct) + 1)]
    rng = random.Random(seed)
    shuffled = rng.sample(codes, len(codes))
    return dict(zip(distinct, shuffled))


def running_average(series: list[float], window: int) -> list[float]:
    """Sliding-window means; output[i] covers series[i : i + window]."""
    if window < 1:
        raise SizeError("window must be >= 1")
    if len(series) < window:
        raise SizeError(f"series of length {len(series)} shorter than window {window}")
    return [math.fsum(series[i : i + window]) / window for i in range(len(series) - window + 1)]


def histogram(records: list[UserOpinionRecord], app_id: str, measure: str) -> list[int]:
    """Counts of levels 1..5 of one measure over one app's records."""
    if measure not in MEASURES and measure not in OPTIONAL_MEASURES:
        raise MeasureError(f"unknown measure {measure!r}")
    if not app_id:
        raise MeasureError("empty app id")
    counts = [0, 0, 0, 0, 0]
    for r in records:
        if r.app_id == app_id:
            counts[r.measure(measure) - 1] += 1
    return counts


@dataclass
class SegmentPoint:
    """Mean measure values over one in-community window of records."""

    community_id: str
    app_id: str
    window_start: int
    means: dict[str, float]


def _communities(records: list[UserOpinionRecord]) -> list[tuple[str, list[UserOpinionRecord]]]:
    """Records grouped by community, ordered by first appearance, seq-sorted."""
    groups: dict[str, list[UserOpinionRecord]] = {}
    for r in records:
        groups.setdefault(r.community_id, []).append(r)
    return [(cid, sorted(rows, key=lambda r: r.seq)) for cid, rows in groups.items()]


def segmented_running_average(records: list[UserOpinionRecord], measures: list[str], window: int) -> list[SegmentPoint]:
    """Per-community sliding means for several measures on identical windows."""
    points: list[SegmentPoint] = []
    for cid, rows in _communities(records):
        if len(rows) < window:
            continue
        per_measure = {m: running_average([r.measure(m) for r in rows], window) for m in measures}
        for start in range(len(rows) - window + 1):
            points.append(
                SegmentPoint(
                    community_id=cid,
                    app_id=rows[start].app_id,
                    window_start=start,
                    means={m: per_measure[m][start] for m in measures},
                )
            )
    return points


@dataclass
class CorrelationPoints:
    measure_x: str
    measure_y: str
    window: int
    points: list[SegmentPoint]

    def xy(self) -> list[tuple[float, float]]:
        return [(p.means[self.measure_x], p.means[self.measure_y]) for p in self.points]

    def for_app(self, app_id: str) -> list[SegmentPoint]:
        return [p for p in self.points if p.app_id == app_id]

    def background(self, app_id: str, inclusive: bool = True) -> list[SegmentPoint]:
        """The 'entire data space' companion set for one app's locus plot."""
        if inclusive:
            return list(self.points)
        return [p for p in self.points if p.app_id != app_id]


def correlation_points(
    records: list[UserOpinionRecord], measure_x: str, measure_y: str, window: int
) -> CorrelationPoints:
    """One (mean x, mean y) point per in-community window position."""
    points = segmented_running_average(records, [measure_x, measure_y], window)
    return CorrelationPoints(measure_x, measure_y, window, points)


@dataclass
class AppProfile:
    """Latent ground truth for one synthetic app."""

    app_id: str
    latent_quality: float
    context_latents: dict[str, float]


@dataclass
class GeneratorConfig:
    apps: list[AppProfile]
    records_per_app: int = 1000
    community_size: int = 20
    context_weights: dict[str, float] = field(
        default_factory=lambda: {
            "error_freeness": 0.375,
            "ui_complexity": 0.125,
            "rationality": 0.25,
            "usability": 0.375,
        }
    )
    polarity: dict[str, int] = field(default_factory=lambda: {"ui_complexity": -1})
    quality_noise: float = 0.55
    context_noise: float = 0.9
    with_optional_measures: bool = True

    def validate(self) -> None:
        if not self.apps:
            raise ConfigError("generator needs at least one app profile")
        if self.records_per_app < 1 or self.community_size < 1:
            raise ConfigError("record and community sizes must be positive")
        if self.quality_noise < 0 or self.context_noise < 0:
            raise ConfigError("noise levels must be non-negative")
        for app in self.apps:
            if not 1.0 <= app.latent_quality <= 5.0:
                raise ConfigError(f"{app.app_id}: latent quality must lie in [1, 5]")
            for feature, latent in app.context_latents.items():
                if feature not in CONTEXT_FEATURES:
                    raise ConfigError(f"{app.app_id}: unknown context feature {feature}")
                if not 1.0 <= latent <= 5.0:
                    raise ConfigError(f"{app.app_id}: context latent {feature} must lie in [1, 5]")
        for feature in self.context_weights:
            if feature not in CONTEXT_FEATURES:
                raise ConfigError(f"unknown weighted feature {feature}")


def _clamp_level(x: float) -> int:
    return max(1, min(5, round(x)))


def generate_synthetic(config: GeneratorConfig, seed: int) -> list[UserOpinionRecord]:
    """Draw records as clamp(round(latent + weighted centered context + noise), 1, 5)."""
    config.validate()
    rng = random.Random(seed)
    records: list[UserOpinionRecord] = []
    for app in config.apps:
        n_communities = math.ceil(config.records_per_app / config.community_size)
        produced = 0
        for c in range(n_communities):
            community_id = f"{app.app_id}_c{c:03d}"
            size = min(config.community_size, config.records_per_app - produced)
            for s in range(size):
                contexts = {}
                for feature in CONTEXT_FEATURES:
                    latent = app.context_latents.get(feature, 3.0)
                    contexts[feature] = _clamp_level(latent + rng.gauss(0.0, config.context_noise))
                lift = sum(
                    config.context_weights.get(f, 0.0) * config.polarity.get(f, 1) * (contexts[f] - 3)
                    for f in CONTEXT_FEATURES
                )
                raw_quality = app.latent_quality + lift + rng.gauss(0.0, config.quality_noise)
                quality = _clamp_level(raw_quality)
                gender = rng.choices(("female", "male", "unknown"), weights=(46, 46, 8))[0]
                age = rng.randint(16, 72) if rng.random() > 0.1 else None
                optional = {}
                if config.with_optional_measures:
                    optional["relative_quality"] = _clamp_level(raw_quality + rng.gauss(0.0, 0.6))
                    optional["accordance"] = _clamp_level(contexts["usability"] + rng.gauss(0.0, 0.8))
                records.append(
                    UserOpinionRecord(
                        app_id=app.app_id,
                        absolute_quality=quality,
                        gender=gender,
                        age=age,
                        community_id=community_id,
                        seq=s + 1,
                        **contexts,
                        **optional,
                    )
                )
                produced += 1
    return records


def default_generator_config(apps: int = 5, records_per_app: int = 1000, community_size: int = 20) -> GeneratorConfig:
    """The bundled benchmark dataset shape: M1..Mk with spread latent levels.

    The latent quality levels sit exactly on the bundled fitting grid's bias
    levels (offset by the weighted context mean), so a grid search can in
    principle recover the generating model.
    """
    latents = [1.925, 2.275, 3.675, 4.025, 4.375]
    context_shift = [
        {"error_freeness": 3.4, "ui_complexity": 2.4, "rationality": 3.2, "usability": 3.0},
        {"error_freeness": 2.6, "ui_complexity": 3.4, "rationality": 2.8, "usability": 3.4},
        {"error_freeness": 3.0, "ui_complexity": 3.0, "rationality": 3.4, "usability": 2.6},
        {"error_freeness": 3.6, "ui_complexity": 2.8, "rationality": 3.0, "usability": 3.2},
        {"error_freeness": 2.8, "ui_complexity": 3.2, "rationality": 3.6, "usability": 3.4},
    ]
    profiles = [
        AppProfile(f"M{i + 1}", latents[i % len(latents)], context_shift[i % len(context_shift)])
        for i in range(apps)
    ]
    return GeneratorConfig(apps=profiles, records_per_app=records_per_app, community_size=community_size)
