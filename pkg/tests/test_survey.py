"""Survey ingestion, anonymization, windowed analytics and the generator."""

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rulebench.survey import (
    AppProfile,
    ConfigError,
    DataFormatError,
    GeneratorConfig,
    MeasureError,
    SizeError,
    UserOpinionRecord,
    anonymize,
    correlation_points,
    dataset_checksum,
    default_generator_config,
    generate_synthetic,
    histogram,
    load_records,
    read_records,
    records_to_csv,
    running_average,
    segmented_running_average,
    write_records,
)

HEADER = "app_id,absolute_quality,error_freeness,ui_complexity,rationality,usability,gender,age,community_id,seq"


def rec(app="M1", q=3, ef=3, ui=3, ra=3, us=3, community="c0", seq=1, **kw):
    return UserOpinionRecord(app, q, ef, ui, ra, us, community_id=community, seq=seq, **kw)


class TestLoadRecords:
    def test_three_well_formed_rows(self, tmp_path):
        path = tmp_path / "ok.csv"
        path.write_text(
            f"{HEADER}\nM1,4,3,2,4,5,female,30,c0,1\nM1,3,3,3,3,3,male,unknown,c0,2\nM2,5,5,1,5,5,unknown,22,c1,1\n"
        )
        loaded = load_records(path)
        assert len(loaded.records) == 3 and loaded.diagnostics == []
        assert loaded.records[0].age == 30 and loaded.records[1].age is None

    def test_out_of_range_row_skipped_with_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(f"{HEADER}\nM1,6,3,3,3,3,female,30,c0,1\nM1,4,3,3,3,3,male,31,c0,2\n")
        loaded = load_records(path)
        assert len(loaded.records) == 1
        assert loaded.diagnostics[0].line == 2
        assert "absolute_quality" in loaded.diagnostics[0].message

    def test_missing_header_is_format_error(self, tmp_path):
        path = tmp_path / "noheader.csv"
        path.write_text("M1,4,3,3,3,3,female,30,c0,1\n")
        with pytest.raises(DataFormatError):
            load_records(path)

    def test_unknown_extra_column_rejected(self, tmp_path):
        path = tmp_path / "extra.csv"
        path.write_text(f"{HEADER},favorite_color\nM1,4,3,3,3,3,female,30,c0,1,blue\n")
        with pytest.raises(DataFormatError):
            load_records(path)

    def test_optional_columns_accepted(self, tmp_path):
        path = tmp_path / "opt.csv"
        path.write_text(f"{HEADER},relative_quality,accordance\nM1,4,3,3,3,3,female,30,c0,1,4,3\n")
        loaded = load_records(path)
        assert loaded.records[0].relative_quality == 4
        assert loaded.records[0].accordance == 3

    def test_seq_must_increase_within_community(self, tmp_path):
        path = tmp_path / "seq.csv"
        path.write_text(f"{HEADER}\nM1,4,3,3,3,3,f,30,c0,2\nM1,4,3,3,3,3,f,30,c0,2\nM1,4,3,3,3,3,f,30,c1,1\n")
        loaded = load_records(path)
        assert len(loaded.records) == 2
        assert "seq" in loaded.diagnostics[0].message

    def test_thousand_row_round_trip_checksum_stable(self, tmp_path):
        records = generate_synthetic(default_generator_config(apps=1, records_per_app=1000), seed=5)
        path = tmp_path / "synthetic.csv"
        write_records(records, path)
        loaded = load_records(path)
        assert len(loaded.records) == 1000 and not loaded.diagnostics
        assert loaded.records == records
        assert dataset_checksum(loaded.records) == dataset_checksum(records)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError):
            load_records(path)


class TestAnonymize:
    def test_ten_names_permute_m1_to_m10(self):
        names = [f"messenger{i}" for i in range(10)]
        mapping = anonymize(names, seed=3)
        assert sorted(mapping.values(), key=lambda c: int(c[1:])) == [f"M{i}" for i in range(1, 11)]
        assert len(set(mapping.values())) == 10

    def test_single_name_maps_to_m1(self):
        for seed in range(5):
            assert anonymize(["alpha"], seed) == {"alpha": "M1"}

    def test_deterministic_per_seed(self):
        names = ["a", "b", "c", "d"]
        assert anonymize(names, 9) == anonymize(names, 9)
        assert anonymize(names, 9) != anonymize(names, 10) or len(names) == 1

    def test_more_than_ten_continues_pattern(self):
        mapping = anonymize([f"n{i}" for i in range(12)], seed=0)
        assert "M11" in mapping.values() and "M12" in mapping.values()

    def test_no_raw_name_leaks_into_export(self):
        raw = ["bluebird", "quicktalk"]
        mapping = anonymize(raw, seed=1)
        records = [rec(app=mapping[name], community=f"{mapping[name]}_c0", seq=i + 1) for i, name in enumerate(raw)]
        text = records_to_csv(records)
        assert all(name not in text for name in raw)


class TestRunningAverage:
    def test_constant_series(self):
        assert running_average([2.0] * 10, 4) == [2.0] * 7

    def test_hand_example(self):
        assert running_average([1, 2, 3, 4], 2) == [1.5, 2.5, 3.5]

    def test_size_error(self):
        with pytest.raises(SizeError):
            running_average([1, 2], 3)
        with pytest.raises(SizeError):
            running_average([1, 2], 0)

    def test_matches_prefix_sum_oracle(self):
        rng = random.Random(11)
        series = [rng.randint(1, 5) for _ in range(200)]
        window = 20
        prefix = [0.0]
        for v in series:
            prefix.append(prefix[-1] + v)
        oracle = [(prefix[i + window] - prefix[i]) / window for i in range(len(series) - window + 1)]
        got = running_average(series, window)
        assert len(got) == len(series) - window + 1
        assert all(abs(a - b) < 1e-12 for a, b in zip(got, oracle))

    @given(st.lists(st.integers(min_value=1, max_value=5), min_size=1, max_size=60), st.integers(1, 60))
    def test_output_length_and_bounds(self, series, window):
        if window > len(series):
            with pytest.raises(SizeError):
                running_average(series, window)
            return
        out = running_average(series, window)
        assert len(out) == len(series) - window + 1
        assert all(1.0 <= v <= 5.0 for v in out)


class TestHistogram:
    def test_no_matches_is_zeroes(self):
        assert histogram([], "M1", "absolute_quality") == [0, 0, 0, 0, 0]

    def test_hand_counts(self):
        records = [rec(q=3, seq=1), rec(q=3, seq=2), rec(q=5, seq=3)]
        assert histogram(records, "M1", "absolute_quality") == [0, 0, 2, 0, 1]

    def test_unknown_measure_rejected(self):
        with pytest.raises(MeasureError):
            histogram([rec()], "M1", "charisma")

    def test_empty_app_id_rejected(self):
        with pytest.raises(MeasureError):
            histogram([rec()], "", "absolute_quality")

    def test_matches_brute_force_tally_on_synthetic(self):
        records = generate_synthetic(default_generator_config(), seed=13)
        for measure in ("absolute_quality", "usability"):
            got = histogram(records, "M1", measure)
            tally = [0] * 5
            for r in records:
                if r.app_id == "M1":
                    tally[getattr(r, measure) - 1] += 1
            assert got == tally
            assert sum(got) == sum(1 for r in records if r.app_id == "M1")


class TestCorrelationPoints:
    def test_single_uniform_window(self):
        records = [rec(q=4, ef=4, seq=i + 1) for i in range(20)]
        points = correlation_points(records, "absolute_quality", "error_freeness", 20)
        assert len(points.points) == 1
        assert points.xy() == [(4.0, 4.0)]

    def test_windows_never_cross_communities(self):
        a = [rec(q=1, community="c0", seq=i + 1) for i in range(20)]
        b = [rec(q=5, community="c1", seq=i + 1) for i in range(20)]
        points = correlation_points(a + b, "absolute_quality", "error_freeness", 20)
        assert len(points.points) == 2  # one per community, none straddling
        assert {p.community_id for p in points.points} == {"c0", "c1"}
        assert {p.means["absolute_quality"] for p in points.points} == {1.0, 5.0}

    def test_identical_measures_sit_on_diagonal(self):
        rng = random.Random(3)
        records = []
        for c in range(5):
            for s in range(25):
                q = rng.randint(1, 5)
                records.append(rec(q=q, ef=q, community=f"c{c}", seq=s + 1))
        points = correlation_points(records, "absolute_quality", "error_freeness", 10)
        assert all(abs(x - y) < 1e-12 for x, y in points.xy())

    def test_matches_independent_window_oracle(self):
        records = generate_synthetic(default_generator_config(apps=2, records_per_app=200), seed=21)
        window = 20
        points = correlation_points(records, "absolute_quality", "usability", window)
        # independent oracle: group then enumerate windows with plain loops
        groups = {}
        for r in records:
            groups.setdefault(r.community_id, []).append(r)
        expected = []
        for cid in groups:
            rows = sorted(groups[cid], key=lambda r: r.seq)
            for start in range(0, len(rows) - window + 1):
                chunk = rows[start : start + window]
                expected.append(
                    (
                        cid,
                        start,
                        sum(r.absolute_quality for r in chunk) / window,
                        sum(r.usability for r in chunk) / window,
                    )
                )
        got = [(p.community_id, p.window_start, p.means["absolute_quality"], p.means["usability"]) for p in points.points]
        assert len(got) == len(expected)
        for g, e in zip(sorted(got), sorted(expected)):
            assert g[0] == e[0] and g[1] == e[1]
            assert abs(g[2] - e[2]) < 1e-12 and abs(g[3] - e[3]) < 1e-12

    def test_background_flag(self):
        records = generate_synthetic(default_generator_config(apps=2, records_per_app=40), seed=2)
        points = correlation_points(records, "absolute_quality", "usability", 20)
        inclusive = points.background("M1", inclusive=True)
        exclusive = points.background("M1", inclusive=False)
        assert len(inclusive) == len(points.points)
        assert len(exclusive) == len(points.points) - len(points.for_app("M1"))

    def test_short_community_yields_no_points(self):
        records = [rec(seq=1), rec(seq=2)]
        points = correlation_points(records, "absolute_quality", "usability", 20)
        assert points.points == []


class TestSegmentedSeries:
    def test_segment_means_within_scale(self):
        records = generate_synthetic(default_generator_config(apps=1, records_per_app=100), seed=4)
        points = segmented_running_average(records, ["absolute_quality"], 20)
        assert points and all(1.0 <= p.means["absolute_quality"] <= 5.0 for p in points)


class TestGenerateSynthetic:
    def test_zero_noise_neutral_weights_gives_constant(self):
        profile = AppProfile("M1", 3.0, {f: 3.0 for f in ("error_freeness", "ui_complexity", "rationality", "usability")})
        config = GeneratorConfig(
            apps=[profile],
            records_per_app=50,
            context_weights={},
            quality_noise=0.0,
            context_noise=0.0,
            with_optional_measures=False,
        )
        records = generate_synthetic(config, seed=0)
        assert all(r.absolute_quality == 3 for r in records)

    def test_seed_replay_identical(self):
        config = default_generator_config(apps=2, records_per_app=100)
        assert generate_synthetic(config, 7) == generate_synthetic(config, 7)
        assert generate_synthetic(config, 7) != generate_synthetic(config, 8)

    def test_survey_scale_shape(self):
        # 7000 records in 350 communities of 20, across 10 apps
        config = default_generator_config(apps=10, records_per_app=700, community_size=20)
        records = generate_synthetic(config, seed=1)
        assert len(records) == 7000
        communities = {r.community_id for r in records}
        assert len(communities) == 350
        sizes = {}
        for r in records:
            sizes[r.community_id] = sizes.get(r.community_id, 0) + 1
        assert set(sizes.values()) == {20}

    def test_all_fields_valid(self):
        records = generate_synthetic(default_generator_config(apps=3, records_per_app=60), seed=9)
        for r in records:
            for m in ("absolute_quality", "error_freeness", "ui_complexity", "rationality", "usability"):
                assert getattr(r, m) in (1, 2, 3, 4, 5)
            assert r.seq >= 1

    def test_invalid_configs_rejected(self):
        base = default_generator_config()
        with pytest.raises(ConfigError):
            generate_synthetic(GeneratorConfig(apps=[]), 0)
        with pytest.raises(ConfigError):
            bad = GeneratorConfig(apps=base.apps, quality_noise=-1)
            generate_synthetic(bad, 0)
        with pytest.raises(ConfigError):
            generate_synthetic(GeneratorConfig(apps=[AppProfile("M1", 9.0, {})]), 0)
        with pytest.raises(ConfigError):
            generate_synthetic(GeneratorConfig(apps=[AppProfile("M1", 3.0, {"bogus": 3.0})]), 0)


def test_read_records_accepts_stream():
    import io

    stream = io.StringIO(f"{HEADER}\nM1,4,3,3,3,3,f,20,c0,1\n")
    assert len(read_records(stream).records) == 1
