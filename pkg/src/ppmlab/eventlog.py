"""Event-log model and CSV ingestion.

An event log is a list of cases; each case is an ordered list of events with
start/end timestamps plus attributes at three levels: event-universal
(present on every event), event-specific (may be absent per event), and
case-level. Each case carries a single categorical outcome label.

Canonical event order within a case is a stable sort by
(start_ts, end_ts, original file order): early-starting events with long
durations stay ahead of later-starting events they overlap.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import IntegrityError, ParseError, SchemaError, ValidityError

CORE_COLUMNS = ("case_id", "activity", "start_ts", "end_ts", "outcome")

EVENT_UNIVERSAL = "event_universal"
EVENT_SPECIFIC = "event_specific"
CASE = "case"

_LEVELS = (EVENT_UNIVERSAL, EVENT_SPECIFIC, CASE)
_KINDS = ("numeric", "categorical")


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str  # numeric | categorical
    level: str  # event_universal | event_specific | case

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.level not in _LEVELS:
            raise SchemaError(f"attribute {self.name!r}: unknown level {self.level!r}")


@dataclass(frozen=True)
class SchemaSpec:
    """Declares the attribute columns of a log beyond the core five."""

    attributes: tuple[AttributeSpec, ...] = ()

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate attribute names in schema")
        for a in self.attributes:
            if a.name in CORE_COLUMNS:
                raise SchemaError(f"attribute name {a.name!r} collides with a core column")

    def at_level(self, level: str) -> tuple[AttributeSpec, ...]:
        return tuple(a for a in self.attributes if a.level == level)

    @property
    def event_attributes(self) -> tuple[AttributeSpec, ...]:
        return tuple(a for a in self.attributes if a.level != CASE)

    def to_dict(self) -> dict:
        return {"attributes": [{"name": a.name, "kind": a.kind, "level": a.level} for a in self.attributes]}

    @classmethod
    def from_dict(cls, d: dict) -> "SchemaSpec":
        attrs = tuple(AttributeSpec(a["name"], a["kind"], a["level"]) for a in d.get("attributes", ()))
        return cls(attrs)


@dataclass
class Event:
    activity: str
    start_ts: datetime
    end_ts: datetime
    duration_min: int = field(init=False)
    universal_attrs: dict = field(default_factory=dict)
    specific_attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.duration_min = compute_duration(self.start_ts, self.end_ts)


@dataclass
class Case:
    case_id: str
    events: list[Event]
    case_attrs: dict = field(default_factory=dict)
    outcome: str = ""

    def __len__(self) -> int:
        return len(self.events)


@dataclass
class EventLog:
    cases: list[Case]
    schema: SchemaSpec
    label_set: list[str]

    def __post_init__(self):
        ids = [c.case_id for c in self.cases]
        if len(ids) != len(set(ids)):
            raise IntegrityError("duplicate case ids in log")
        missing = {c.outcome for c in self.cases} - set(self.label_set)
        if missing:
            raise IntegrityError(f"outcomes {sorted(missing)} not in label set")

    def __len__(self) -> int:
        return len(self.cases)

    def case_by_id(self, case_id: str) -> Case:
        for c in self.cases:
            if c.case_id == case_id:
                return c
        raise KeyError(case_id)

    def select(self, case_ids) -> list[Case]:
        wanted = set(case_ids)
        return [c for c in self.cases if c.case_id in wanted]

    def label_histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {label: 0 for label in self.label_set}
        for c in self.cases:
            hist[c.outcome] += 1
        return hist


def parse_timestamp(text: str, *, row: int | None = None) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are interpreted as UTC."""
    try:
        ts = datetime.fromisoformat(text.strip())
    except ValueError as exc:
        where = f" at row {row}" if row is not None else ""
        raise ParseError(f"malformed timestamp {text!r}{where}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts.isoformat(sep="T")


def compute_duration(start_ts: datetime, end_ts: datetime) -> int:
    """Minutes between start and end, rounded half-away-from-zero."""
    if end_ts < start_ts:
        raise ValidityError(f"event ends before it starts: {start_ts} > {end_ts}")
    seconds = (end_ts - start_ts).total_seconds()
    return int(math.floor(seconds / 60.0 + 0.5))


def order_events(case: Case) -> Case:
    """Return the case with events in canonical order.

    Stable sort by (start_ts, end_ts, original index); idempotent, and a
    permutation of the input events.
    """
    decorated = sorted(enumerate(case.events), key=lambda p: (p[1].start_ts, p[1].end_ts, p[0]))
    case.events = [e for _, e in decorated]
    return case


def _parse_attr_value(raw: str | None, spec: AttributeSpec, row: int):
    if raw is None or raw == "":
        return None
    if spec.kind == "numeric":
        try:
            return float(raw)
        except ValueError as exc:
            raise ParseError(f"non-numeric value {raw!r} for attribute {spec.name!r} at row {row}") from exc
    return raw


def parse_event_log(path, schema: SchemaSpec) -> EventLog:
    """Parse a CSV event log into a validated in-memory model.

    Required columns: case_id, activity, start_ts, end_ts, outcome, plus one
    column per schema attribute. Empty cells are missing values. Rows are
    grouped by case_id; events are sorted canonically; durations computed;
    the outcome (and each case-level attribute) must agree across all rows
    of a case.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in CORE_COLUMNS:
            if col not in header:
                raise SchemaError(f"missing required column {col!r}")
        for attr in schema.attributes:
            if attr.name not in header:
                raise SchemaError(f"schema column {attr.name!r} not present in CSV")

        cases: dict[str, Case] = {}
        for row_no, row in enumerate(reader, start=2):  # 1-based, after header
            case_id = (row["case_id"] or "").strip()
            if not case_id:
                raise ParseError(f"empty case_id at row {row_no}")
            start = parse_timestamp(row["start_ts"], row=row_no)
            end = parse_timestamp(row["end_ts"], row=row_no)
            try:
                event = Event(activity=row["activity"], start_ts=start, end_ts=end)
            except ValidityError as exc:
                raise ParseError(f"row {row_no}: {exc}") from exc
            case_attrs = {}
            for attr in schema.attributes:
                value = _parse_attr_value(row.get(attr.name), attr, row_no)
                if attr.level == EVENT_UNIVERSAL:
                    event.universal_attrs[attr.name] = value
                elif attr.level == EVENT_SPECIFIC:
                    if value is not None:
                        event.specific_attrs[attr.name] = value
                else:
                    case_attrs[attr.name] = value

            outcome = row["outcome"]
            case = cases.get(case_id)
            if case is None:
                cases[case_id] = Case(case_id=case_id, events=[event], case_attrs=case_attrs, outcome=outcome)
            else:
                if case.outcome != outcome:
                    raise IntegrityError(
                        f"case {case_id!r} has conflicting outcomes {case.outcome!r} and {outcome!r} (row {row_no})"
                    )
                for name, value in case_attrs.items():
                    if case.case_attrs.get(name) != value:
                        raise IntegrityError(
                            f"case {case_id!r}: case attribute {name!r} differs across rows (row {row_no})"
                        )
                case.events.append(event)

    if not cases:
        raise ParseError(f"{path}: no event rows")

    ordered = [order_events(c) for c in cases.values()]
    labels = sorted({c.outcome for c in ordered})
    return EventLog(cases=ordered, schema=schema, label_set=labels)


def write_event_log(log: EventLog, path) -> None:
    """Serialize a log back to the CSV layout accepted by parse_event_log."""
    path = Path(path)
    attr_names = [a.name for a in log.schema.attributes]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(CORE_COLUMNS) + attr_names)
        for case in log.cases:
            for event in case.events:
                row = [
                    case.case_id,
                    event.activity,
                    format_timestamp(event.start_ts),
                    format_timestamp(event.end_ts),
                    case.outcome,
                ]
                for attr in log.schema.attributes:
                    if attr.level == EVENT_UNIVERSAL:
                        value = event.universal_attrs.get(attr.name)
                    elif attr.level == EVENT_SPECIFIC:
                        value = event.specific_attrs.get(attr.name)
                    else:
                        value = case.case_attrs.get(attr.name)
                    row.append("" if value is None else (repr(value) if isinstance(value, float) else str(value)))
                writer.writerow(row)
