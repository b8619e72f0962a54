from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ppmlab.errors import IntegrityError, ParseError, SchemaError, ValidityError
from ppmlab.eventlog import (
    AttributeSpec,
    Case,
    Event,
    SchemaSpec,
    compute_duration,
    order_events,
    parse_event_log,
    write_event_log,
)
from ppmlab.synth import bpi12_like_spec, generate_synthetic

UTC = timezone.utc


def ts(text):
    return datetime.fromisoformat(text).replace(tzinfo=UTC)


def write_csv(path, rows, header="case_id,activity,start_ts,end_ts,outcome"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


class TestParse:
    def test_minimal_two_row_case(self, tmp_path):
        path = write_csv(tmp_path / "log.csv", [
            "c1,A,2024-01-01T10:00:00,2024-01-01T10:05:00,ok",
            "c1,B,2024-01-01T10:10:00,2024-01-01T10:12:00,ok",
        ])
        log = parse_event_log(path, SchemaSpec())
        assert len(log.cases) == 1
        assert [e.activity for e in log.cases[0].events] == ["A", "B"]
        assert log.label_set == ["ok"]

    def test_rows_out_of_order_are_sorted_by_start(self, tmp_path):
        path = write_csv(tmp_path / "log.csv", [
            "c1,B,2024-01-01T10:10:00,2024-01-01T10:12:00,ok",
            "c1,A,2024-01-01T10:00:00,2024-01-01T10:05:00,ok",
        ])
        log = parse_event_log(path, SchemaSpec())
        assert [e.activity for e in log.cases[0].events] == ["A", "B"]

    def test_conflicting_outcomes_rejected(self, tmp_path):
        path = write_csv(tmp_path / "log.csv", [
            "c1,A,2024-01-01T10:00:00,2024-01-01T10:05:00,ok",
            "c1,B,2024-01-01T10:10:00,2024-01-01T10:12:00,bad",
        ])
        with pytest.raises(IntegrityError, match="c1"):
            parse_event_log(path, SchemaSpec())

    def test_malformed_timestamp_names_row(self, tmp_path):
        path = write_csv(tmp_path / "log.csv", [
            "c1,A,2024-01-01T10:00:00,2024-01-01T10:05:00,ok",
            "c1,B,not-a-time,2024-01-01T10:12:00,ok",
        ])
        with pytest.raises(ParseError, match="row 3"):
            parse_event_log(path, SchemaSpec())

    def test_schema_column_missing_in_csv(self, tmp_path):
        path = write_csv(tmp_path / "log.csv", [
            "c1,A,2024-01-01T10:00:00,2024-01-01T10:05:00,ok",
        ])
        schema = SchemaSpec((AttributeSpec("cost", "numeric", "event_universal"),))
        with pytest.raises(SchemaError, match="cost"):
            parse_event_log(path, schema)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            parse_event_log(tmp_path / "nope.csv", SchemaSpec())

    def test_empty_cell_is_missing_value(self, tmp_path):
        header = "case_id,activity,start_ts,end_ts,outcome,cost"
        path = write_csv(tmp_path / "log.csv", [
            "c1,A,2024-01-01T10:00:00,2024-01-01T10:05:00,ok,",
            "c1,B,2024-01-01T10:10:00,2024-01-01T10:12:00,ok,3.5",
        ], header=header)
        schema = SchemaSpec((AttributeSpec("cost", "numeric", "event_universal"),))
        log = parse_event_log(path, schema)
        costs = [e.universal_attrs["cost"] for e in log.cases[0].events]
        assert costs == [None, 3.5]


class TestDuration:
    def test_four_and_a_half_minutes_rounds_up(self):
        assert compute_duration(ts("2024-01-01T10:00:00"), ts("2024-01-01T10:04:31")) == 5

    def test_twenty_seconds_rounds_to_zero(self):
        assert compute_duration(ts("2024-01-01T10:00:00"), ts("2024-01-01T10:00:20")) == 0

    def test_zero_length_event(self):
        t = ts("2024-01-01T10:00:00")
        assert compute_duration(t, t) == 0

    def test_exact_half_minute_rounds_away_from_zero(self):
        assert compute_duration(ts("2024-01-01T10:00:00"), ts("2024-01-01T10:04:30")) == 5

    def test_end_before_start_rejected(self):
        with pytest.raises(ValidityError):
            compute_duration(ts("2024-01-01T10:00:01"), ts("2024-01-01T10:00:00"))


def make_case(starts, ends=None):
    base = ts("2024-01-01T00:00:00")
    events = []
    for i, s in enumerate(starts):
        start = base + timedelta(minutes=s)
        end = base + timedelta(minutes=ends[i] if ends else s + 1)
        events.append(Event(activity=f"a{i}", start_ts=start, end_ts=end))
    return Case(case_id="c", events=events, outcome="x")


class TestOrdering:
    def test_sorts_by_start(self):
        case = order_events(make_case([5, 1, 3]))
        assert [e.activity for e in case.events] == ["a1", "a2", "a0"]

    def test_equal_start_breaks_by_end(self):
        case = order_events(make_case([0, 0], ends=[9, 4]))
        assert [e.end_ts for e in case.events] == sorted(e.end_ts for e in case.events)
        assert case.events[0].activity == "a1"

    def test_idempotent(self):
        case = order_events(make_case([4, 2, 7]))
        once = list(case.events)
        assert order_events(case).events == once

    def test_long_early_event_stays_first(self):
        # overlapping long event starts earlier, so it stays ahead
        case = order_events(make_case([0, 5], ends=[60, 6]))
        assert case.events[0].end_ts > case.events[1].start_ts

    @given(st.lists(st.integers(min_value=0, max_value=500), min_size=1, max_size=12))
    def test_permutation_property(self, starts):
        case = make_case(starts)
        before = set(id(e) for e in case.events)
        order_events(case)
        assert set(id(e) for e in case.events) == before
        keys = [(e.start_ts, e.end_ts) for e in case.events]
        assert keys == sorted(keys)


class TestRoundTrip:
    def test_parse_write_parse_identity(self, tmp_path):
        log = generate_synthetic(bpi12_like_spec(n_cases=20, seed=7))
        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        write_event_log(log, first)
        parsed = parse_event_log(first, log.schema)
        write_event_log(parsed, second)
        reparsed = parse_event_log(second, log.schema)
        assert parsed.cases == reparsed.cases
        assert parsed.label_set == reparsed.label_set
        assert first.read_bytes() == second.read_bytes()

    def test_durations_match_recomputation(self):
        log = generate_synthetic(bpi12_like_spec(n_cases=10, seed=3))
        for case in log.cases:
            for event in case.events:
                assert event.duration_min == compute_duration(event.start_ts, event.end_ts)
