"""Attribute encoders for event- and case-level feature vectors.

Every event becomes a composite vector: activity one-hot first, then the
specific attributes, then the universal attributes with duration appended as
the final universal numeric. Categoricals are one-hot over the categories
seen in training (lexicographic order); numerics are min-max scaled to [0,1]
and clamped at inference. Missing numerics are median-imputed before
scaling. Missing, irrelevant, or unseen categoricals become a padding block
with every slot set to -1.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ContractError, ValidityError
from .eventlog import CASE, EVENT_SPECIFIC, EVENT_UNIVERSAL, Case, EventLog

PAD_VALUE = -1.0
DURATION_ATTR = "__duration__"


@dataclass
class NumericStats:
    min: float
    max: float
    median: float

    def scale(self, value: float | None) -> float:
        if value is None:
            value = self.median
        if self.max == self.min:
            return 0.0
        scaled = (value - self.min) / (self.max - self.min)
        return float(min(1.0, max(0.0, scaled)))


@dataclass
class EncodedCase:
    """Model-facing encoding of one case.

    node_matrix rows follow the case's canonical event order; start_minutes
    and activities are carried along so downstream builders can derive edge
    weights and pseudo-embedding rows without re-reading the raw log.
    """

    case_id: str
    node_matrix: np.ndarray  # (n_events, event_dim)
    case_vector: np.ndarray  # (case_dim,)
    outcome_index: int
    start_minutes: np.ndarray  # (n_events,) float minutes since case start
    activities: list[str]
    durations: np.ndarray = field(default_factory=lambda: np.zeros(0))


class EventEncoder(BaseEstimator, TransformerMixin):
    """Fits per-attribute encoders on training cases and encodes cases.

    Fitted attributes (trailing underscore) hold category lists, numeric
    min/max/median statistics, the vector layout, and the label set. The
    encoder is immutable after fit apart from ``unseen_categories_``, a
    tally of out-of-vocabulary categorical values met during transform.
    """

    # -- fitting -----------------------------------------------------------

    def fit(self, log: EventLog, y=None, train_ids=None):
        cases = log.cases if train_ids is None else log.select(train_ids)
        if not cases:
            raise ValidityError("cannot fit encoders on an empty training set")

        self.schema_ = log.schema
        self.label_set_ = list(log.label_set)
        self.categories_: dict[str, list[str]] = {}
        self.numeric_stats_: dict[str, NumericStats] = {}
        self.unseen_categories_: dict[str, int] = {}

        activities = sorted({e.activity for c in cases for e in c.events})
        self.categories_["activity"] = activities

        for attr in log.schema.attributes:
            values = []
            for c in cases:
                if attr.level == CASE:
                    values.append(c.case_attrs.get(attr.name))
                else:
                    for e in c.events:
                        source = e.universal_attrs if attr.level == EVENT_UNIVERSAL else e.specific_attrs
                        values.append(source.get(attr.name))
            present = [v for v in values if v is not None]
            if attr.kind == "categorical":
                self.categories_[attr.name] = sorted({str(v) for v in present})
            else:
                self._fit_numeric(attr.name, present)

        durations = [float(e.duration_min) for c in cases for e in c.events]
        self._fit_numeric(DURATION_ATTR, durations)

        self.layout_ = self._build_layout()
        self.case_layout_ = self._build_case_layout()
        self.event_dim_ = self.layout_[-1][1].stop if self.layout_ else 0
        self.case_dim_ = self.case_layout_[-1][1].stop if self.case_layout_ else 0
        return self

    def _fit_numeric(self, name: str, present: list[float]) -> None:
        if not present:
            self.numeric_stats_[name] = NumericStats(0.0, 0.0, 0.0)
            warnings.warn(f"numeric attribute {name!r} has no observed values; scaling to 0.0")
            return
        arr = np.asarray(present, dtype=float)
        stats = NumericStats(float(arr.min()), float(arr.max()), float(np.median(arr)))
        if stats.max == stats.min:
            warnings.warn(f"numeric attribute {name!r} is constant in training; scaling to 0.0")
        self.numeric_stats_[name] = stats

    def _block_width(self, attr_name: str, kind: str) -> int:
        return len(self.categories_[attr_name]) if kind == "categorical" else 1

    def _build_layout(self) -> list[tuple[str, slice]]:
        layout = [("activity", slice(0, len(self.categories_["activity"])))]
        offset = layout[0][1].stop
        for level in (EVENT_SPECIFIC, EVENT_UNIVERSAL):
            for attr in self.schema_.at_level(level):
                width = self._block_width(attr.name, attr.kind)
                layout.append((attr.name, slice(offset, offset + width)))
                offset += width
        layout.append((DURATION_ATTR, slice(offset, offset + 1)))
        return layout

    def _build_case_layout(self) -> list[tuple[str, slice]]:
        layout = []
        offset = 0
        for attr in self.schema_.at_level(CASE):
            width = self._block_width(attr.name, attr.kind)
            layout.append((attr.name, slice(offset, offset + width)))
            offset += width
        return layout

    # -- encoding ----------------------------------------------------------

    def _encode_categorical(self, out: np.ndarray, sl: slice, name: str, value) -> None:
        categories = self.categories_[name]
        if value is None:
            out[sl] = PAD_VALUE
            return
        value = str(value)
        try:
            idx = categories.index(value)
        except ValueError:
            out[sl] = PAD_VALUE
            self.unseen_categories_[name] = self.unseen_categories_.get(name, 0) + 1
            return
        out[sl.start + idx] = 1.0

    def encode_event(self, event) -> np.ndarray:
        check_is_fitted(self, "layout_")
        out = np.zeros(self.event_dim_)
        by_name = {a.name: a for a in self.schema_.attributes}
        for name, sl in self.layout_:
            if name == "activity":
                self._encode_categorical(out, sl, "activity", event.activity)
            elif name == DURATION_ATTR:
                out[sl.start] = self.numeric_stats_[DURATION_ATTR].scale(float(event.duration_min))
            else:
                attr = by_name[name]
                source = event.universal_attrs if attr.level == EVENT_UNIVERSAL else event.specific_attrs
                value = source.get(name)
                if attr.kind == "categorical":
                    self._encode_categorical(out, sl, name, value)
                else:
                    out[sl.start] = self.numeric_stats_[name].scale(value)
        return out

    def encode_case_attrs(self, case: Case) -> np.ndarray:
        check_is_fitted(self, "case_layout_")
        out = np.zeros(self.case_dim_)
        by_name = {a.name: a for a in self.schema_.attributes}
        for name, sl in self.case_layout_:
            attr = by_name[name]
            value = case.case_attrs.get(name)
            if attr.kind == "categorical":
                self._encode_categorical(out, sl, name, value)
            else:
                out[sl.start] = self.numeric_stats_[name].scale(value)
        return out

    def encode_case(self, case: Case) -> EncodedCase:
        check_is_fitted(self, "layout_")
        if not case.events:
            raise ValidityError(f"case {case.case_id!r} has no events")
        node_matrix = np.stack([self.encode_event(e) for e in case.events])
        origin = case.events[0].start_ts
        starts = np.array([(e.start_ts - origin).total_seconds() / 60.0 for e in case.events])
        try:
            outcome_index = self.label_set_.index(case.outcome)
        except ValueError as exc:
            raise ContractError(f"outcome {case.outcome!r} not in fitted label set") from exc
        return EncodedCase(
            case_id=case.case_id,
            node_matrix=node_matrix,
            case_vector=self.encode_case_attrs(case),
            outcome_index=outcome_index,
            start_minutes=starts,
            activities=[e.activity for e in case.events],
            durations=np.array([e.duration_min for e in case.events]),
        )

    def transform(self, X) -> list[EncodedCase]:
        cases = X.cases if isinstance(X, EventLog) else list(X)
        return [self.encode_case(c) for c in cases]

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        check_is_fitted(self, "layout_")
        payload = {
            "schema": self.schema_.to_dict(),
            "label_set": self.label_set_,
            "categories": self.categories_,
            "numeric_stats": {k: [v.min, v.max, v.median] for k, v in self.numeric_stats_.items()},
            "layout": [[name, sl.start, sl.stop] for name, sl in self.layout_],
            "case_layout": [[name, sl.start, sl.stop] for name, sl in self.case_layout_],
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "EventEncoder":
        from .eventlog import SchemaSpec

        payload = json.loads(text)
        enc = cls()
        enc.schema_ = SchemaSpec.from_dict(payload["schema"])
        enc.label_set_ = payload["label_set"]
        enc.categories_ = payload["categories"]
        enc.numeric_stats_ = {k: NumericStats(*v) for k, v in payload["numeric_stats"].items()}
        enc.layout_ = [(name, slice(a, b)) for name, a, b in payload["layout"]]
        enc.case_layout_ = [(name, slice(a, b)) for name, a, b in payload["case_layout"]]
        enc.event_dim_ = enc.layout_[-1][1].stop if enc.layout_ else 0
        enc.case_dim_ = enc.case_layout_[-1][1].stop if enc.case_layout_ else 0
        enc.unseen_categories_ = {}
        return enc
