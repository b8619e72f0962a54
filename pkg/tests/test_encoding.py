from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from ppmlab.encoding import DURATION_ATTR, EventEncoder
from ppmlab.eventlog import AttributeSpec, Case, Event, EventLog, SchemaSpec

UTC = timezone.utc
T0 = datetime(2024, 1, 1, tzinfo=UTC)


def make_log():
    schema = SchemaSpec((
        AttributeSpec("load", "numeric", "event_universal"),
        AttributeSpec("tool", "categorical", "event_specific"),
        AttributeSpec("age", "numeric", "case"),
        AttributeSpec("ward", "categorical", "case"),
    ))
    cases = []
    values = [(1.0, "b"), (3.0, "a"), (7.0, "c")]
    for i, (load, tool) in enumerate(values):
        event = Event(activity="go", start_ts=T0, end_ts=T0 + timedelta(minutes=i))
        event.universal_attrs["load"] = load
        event.specific_attrs["tool"] = tool
        case = Case(case_id=f"c{i}", events=[event],
                    case_attrs={"age": float(i * 2), "ward": "w1" if i else "w2"},
                    outcome="ok" if i else "bad")
        cases.append(case)
    return EventLog(cases=cases, schema=schema, label_set=["bad", "ok"])


@pytest.fixture
def fitted():
    log = make_log()
    return log, EventEncoder().fit(log)


class TestFitStats:
    def test_min_median_max(self, fitted):
        _, enc = fitted
        stats = enc.numeric_stats_["load"]
        assert (stats.min, stats.max, stats.median) == (1.0, 7.0, 3.0)

    def test_categories_lexicographic(self, fitted):
        _, enc = fitted
        assert enc.categories_["tool"] == ["a", "b", "c"]

    def test_single_case_constant_numeric_warns(self):
        log = make_log()
        with pytest.warns(UserWarning, match="constant"):
            enc = EventEncoder().fit(log, train_ids=["c0"])
        assert enc.numeric_stats_["load"].scale(1.0) == 0.0

    def test_activity_block_first_in_layout(self, fitted):
        _, enc = fitted
        assert enc.layout_[0][0] == "activity"
        assert enc.layout_[0][1].start == 0

    def test_duration_is_last_universal_slot(self, fitted):
        _, enc = fitted
        assert enc.layout_[-1][0] == DURATION_ATTR

    def test_layout_slices_cover_width(self, fitted):
        _, enc = fitted
        covered = sorted((sl.start, sl.stop) for _, sl in enc.layout_)
        assert covered[0][0] == 0 and covered[-1][1] == enc.event_dim_
        for (_, stop), (start, _) in zip(covered, covered[1:]):
            assert stop == start


class TestEncodeEvent:
    def test_one_hot_block(self, fitted):
        log, enc = fitted
        vec = enc.encode_event(log.cases[0].events[0])
        _, sl = next(e for e in enc.layout_ if e[0] == "tool")
        assert vec[sl].tolist() == [0.0, 1.0, 0.0]

    def test_numeric_midpoint(self):
        log = make_log()
        enc = EventEncoder().fit(log)
        # load in {1,3,7}: value 3 -> (3-1)/6
        vec = enc.encode_event(log.cases[1].events[0])
        _, sl = next(e for e in enc.layout_ if e[0] == "load")
        assert vec[sl][0] == pytest.approx((3 - 1) / 6)

    def test_missing_numeric_uses_median(self, fitted):
        log, enc = fitted
        event = Event(activity="go", start_ts=T0, end_ts=T0)
        event.universal_attrs["load"] = None
        vec = enc.encode_event(event)
        _, sl = next(e for e in enc.layout_ if e[0] == "load")
        assert vec[sl][0] == pytest.approx((3 - 1) / (7 - 1))

    def test_missing_categorical_is_pad_block(self, fitted):
        _, enc = fitted
        event = Event(activity="go", start_ts=T0, end_ts=T0)
        vec = enc.encode_event(event)
        _, sl = next(e for e in enc.layout_ if e[0] == "tool")
        assert vec[sl].tolist() == [-1.0, -1.0, -1.0]

    def test_unseen_category_pads_and_tallies(self, fitted):
        _, enc = fitted
        event = Event(activity="go", start_ts=T0, end_ts=T0)
        event.specific_attrs["tool"] = "zz"
        vec = enc.encode_event(event)
        _, sl = next(e for e in enc.layout_ if e[0] == "tool")
        assert vec[sl].tolist() == [-1.0] * 3
        assert enc.unseen_categories_["tool"] == 1

    def test_out_of_range_numeric_clamped(self, fitted):
        _, enc = fitted
        event = Event(activity="go", start_ts=T0, end_ts=T0)
        event.universal_attrs["load"] = 99.0
        vec = enc.encode_event(event)
        _, sl = next(e for e in enc.layout_ if e[0] == "load")
        assert vec[sl][0] == 1.0

    def test_pure_function(self, fitted):
        log, enc = fitted
        a = enc.encode_event(log.cases[2].events[0])
        b = enc.encode_event(log.cases[2].events[0])
        assert a.tobytes() == b.tobytes()

    def test_training_values_in_unit_interval(self, fitted):
        log, enc = fitted
        for case in log.cases:
            mat = enc.encode_case(case).node_matrix
            numeric = mat[mat != -1.0]
            assert np.all((numeric >= 0.0) & (numeric <= 1.0))

    def test_one_hot_sums_to_one_when_present(self, fitted):
        log, enc = fitted
        vec = enc.encode_event(log.cases[0].events[0])
        _, sl = next(e for e in enc.layout_ if e[0] == "tool")
        assert vec[sl].sum() == 1.0


class TestEncodeCase:
    def test_numeric_case_attr(self, fitted):
        log, enc = fitted
        # age in {0,2,4}: value 2 -> 0.5
        vec = enc.encode_case_attrs(log.cases[1])
        _, sl = next(e for e in enc.case_layout_ if e[0] == "age")
        assert vec[sl][0] == 0.5

    def test_categorical_case_attr_second_of_two(self, fitted):
        log, enc = fitted
        vec = enc.encode_case_attrs(log.cases[0])  # ward w2, categories [w1, w2]
        _, sl = next(e for e in enc.case_layout_ if e[0] == "ward")
        assert vec[sl].tolist() == [0.0, 1.0]

    def test_missing_categorical_case_attr(self, fitted):
        log, enc = fitted
        case = Case(case_id="cx", events=log.cases[0].events, case_attrs={}, outcome="ok")
        vec = enc.encode_case_attrs(case)
        _, sl = next(e for e in enc.case_layout_ if e[0] == "ward")
        assert vec[sl].tolist() == [-1.0, -1.0]

    def test_outcome_index_follows_label_set(self, fitted):
        log, enc = fitted
        encoded = enc.transform(log)
        assert [e.outcome_index for e in encoded] == [0, 1, 1]


class TestSerialization:
    def test_json_round_trip(self, fitted):
        log, enc = fitted
        clone = EventEncoder.from_json(enc.to_json())
        for case in log.cases:
            a = enc.encode_case(case)
            b = clone.encode_case(case)
            assert a.node_matrix.tobytes() == b.node_matrix.tobytes()
            assert a.case_vector.tobytes() == b.case_vector.tobytes()
