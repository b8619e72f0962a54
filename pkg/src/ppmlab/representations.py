"""Model-facing case representations: chain graphs and padded sequences.

A case graph links consecutive start-ordered events with edges weighted by
the normalized start-time gap (zero for simultaneous events). A case
sequence stacks the same event vectors in start order, appends the
normalized gap to the previous event as an extra column (0 for the first
event), and pads to a fixed length with a boolean mask.

Gap normalization is min-max over the training gaps, global across cases,
and clamped to [0, 1] at inference.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .binning import PseudoEmbedder
from .encoding import EncodedCase
from .errors import AlignmentError, ValidityError


@dataclass
class CaseGraph:
    case_id: str
    node_matrix: np.ndarray  # (n, d_N)
    edge_index: np.ndarray  # (2, n-1) int, column k = (k, k+1)
    edge_weight: np.ndarray  # (n-1,) in [0, 1]
    case_vector: np.ndarray  # (d_G,)
    outcome_index: int
    activities: list[str]
    pseudo_matrix: np.ndarray | None = None  # (n, bin_count)

    @property
    def n_events(self) -> int:
        return self.node_matrix.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "graph",
            "case_id": self.case_id,
            "node_matrix": self.node_matrix.tolist(),
            "edge_index": self.edge_index.tolist(),
            "edge_weight": self.edge_weight.tolist(),
            "case_vector": self.case_vector.tolist(),
            "outcome_index": self.outcome_index,
            "activities": self.activities,
            "pseudo_matrix": None if self.pseudo_matrix is None else self.pseudo_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseGraph":
        return cls(
            case_id=d["case_id"],
            node_matrix=np.asarray(d["node_matrix"], dtype=float),
            edge_index=np.asarray(d["edge_index"], dtype=int).reshape(2, -1),
            edge_weight=np.asarray(d["edge_weight"], dtype=float),
            case_vector=np.asarray(d["case_vector"], dtype=float),
            outcome_index=d["outcome_index"],
            activities=list(d["activities"]),
            pseudo_matrix=None if d["pseudo_matrix"] is None else np.asarray(d["pseudo_matrix"], dtype=float),
        )


@dataclass
class CaseSequence:
    case_id: str
    seq_matrix: np.ndarray  # (max_len, d_N + 1); last column is the gap flag
    mask: np.ndarray  # (max_len,) bool, prefix-true
    case_vector: np.ndarray
    outcome_index: int
    activities: list[str]
    pseudo_seq: np.ndarray | None = None  # (max_len, bin_count)

    @property
    def n_events(self) -> int:
        return int(self.mask.sum())

    def to_dict(self) -> dict:
        return {
            "kind": "sequence",
            "case_id": self.case_id,
            "seq_matrix": self.seq_matrix.tolist(),
            "mask": self.mask.astype(int).tolist(),
            "case_vector": self.case_vector.tolist(),
            "outcome_index": self.outcome_index,
            "activities": self.activities,
            "pseudo_seq": None if self.pseudo_seq is None else self.pseudo_seq.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseSequence":
        return cls(
            case_id=d["case_id"],
            seq_matrix=np.asarray(d["seq_matrix"], dtype=float),
            mask=np.asarray(d["mask"], dtype=int).astype(bool),
            case_vector=np.asarray(d["case_vector"], dtype=float),
            outcome_index=d["outcome_index"],
            activities=list(d["activities"]),
            pseudo_seq=None if d["pseudo_seq"] is None else np.asarray(d["pseudo_seq"], dtype=float),
        )


class _GapNormalizer:
    """Shared min-max scaling of start-time gaps."""

    def fit_gaps(self, cases: list[EncodedCase]) -> tuple[float, float]:
        gaps = []
        for case in cases:
            starts = case.start_minutes
            gaps.extend(np.diff(starts).tolist())
        if not gaps:
            return 0.0, 0.0
        return float(min(gaps)), float(max(gaps))

    def normalize(self, gaps: np.ndarray, lo: float, hi: float) -> np.ndarray:
        if hi == lo:
            return np.zeros_like(gaps)
        return np.clip((gaps - lo) / (hi - lo), 0.0, 1.0)


class GraphBuilder(BaseEstimator, TransformerMixin, _GapNormalizer):
    """Builds chain CaseGraphs from encoded cases.

    Fit learns the global (min, max) of start-time gaps over training cases;
    transform emits one graph per case. Pass a fitted ``embedder`` to attach
    the pseudo-embedding channel at build time.
    """

    def __init__(self, embedder: PseudoEmbedder | None = None):
        self.embedder = embedder

    def fit(self, X, y=None):
        cases = list(X)
        self.gap_min_, self.gap_max_ = self.fit_gaps(cases)
        if self.gap_max_ == self.gap_min_:
            warnings.warn("training gaps are constant; all edge weights will be 0")
        return self

    def build(self, case: EncodedCase) -> CaseGraph:
        check_is_fitted(self, "gap_min_")
        n = case.node_matrix.shape[0]
        if n == 1:
            edge_index = np.zeros((2, 0), dtype=int)
            weights = np.zeros(0)
        else:
            ks = np.arange(n - 1)
            edge_index = np.stack([ks, ks + 1])
            raw = np.diff(case.start_minutes)
            weights = self.normalize(raw, self.gap_min_, self.gap_max_)
        graph = CaseGraph(
            case_id=case.case_id,
            node_matrix=case.node_matrix.copy(),
            edge_index=edge_index,
            edge_weight=weights,
            case_vector=case.case_vector.copy(),
            outcome_index=case.outcome_index,
            activities=list(case.activities),
        )
        if self.embedder is not None:
            graph.pseudo_matrix = self.embedder.case_pseudo_rows(case)
        return graph

    def transform(self, X) -> list[CaseGraph]:
        return [self.build(c) for c in X]


class SequenceBuilder(BaseEstimator, TransformerMixin, _GapNormalizer):
    """Builds padded CaseSequences from encoded cases.

    ``max_len`` defaults to the longest training case; longer cases at
    transform time are rejected rather than truncated.
    """

    def __init__(self, max_len: int | None = None, embedder: PseudoEmbedder | None = None):
        self.max_len = max_len
        self.embedder = embedder

    def fit(self, X, y=None):
        cases = list(X)
        self.gap_min_, self.gap_max_ = self.fit_gaps(cases)
        if self.gap_max_ == self.gap_min_:
            warnings.warn("training gaps are constant; all gap flags will be 0")
        self.max_len_ = self.max_len if self.max_len is not None else max(len(c.activities) for c in cases)
        return self

    def build(self, case: EncodedCase) -> CaseSequence:
        check_is_fitted(self, "max_len_")
        n, d = case.node_matrix.shape
        if n > self.max_len_:
            raise ValidityError(f"case {case.case_id!r} has {n} events; max_len is {self.max_len_}")
        seq = np.zeros((self.max_len_, d + 1))
        seq[:n, :d] = case.node_matrix
        if n > 1:
            raw = np.diff(case.start_minutes)
            seq[1:n, d] = self.normalize(raw, self.gap_min_, self.gap_max_)
        mask = np.zeros(self.max_len_, dtype=bool)
        mask[:n] = True
        rep = CaseSequence(
            case_id=case.case_id,
            seq_matrix=seq,
            mask=mask,
            case_vector=case.case_vector.copy(),
            outcome_index=case.outcome_index,
            activities=list(case.activities),
        )
        if self.embedder is not None:
            pseudo = np.zeros((self.max_len_, self.embedder.bin_count_))
            pseudo[:n] = self.embedder.case_pseudo_rows(case)
            rep.pseudo_seq = pseudo
        return rep

    def transform(self, X) -> list[CaseSequence]:
        return [self.build(c) for c in X]


def attach_pseudo(rep: CaseGraph | CaseSequence, embedder: PseudoEmbedder, case: EncodedCase):
    """Attach the pseudo-embedding channel to an already-built representation.

    Rows align one-to-one with the primary channel; padding rows stay zero.
    """
    if rep.case_id != case.case_id:
        raise AlignmentError(f"representation {rep.case_id!r} vs encoded case {case.case_id!r}")
    rows = embedder.case_pseudo_rows(case)
    if isinstance(rep, CaseGraph):
        if rows.shape[0] != rep.n_events:
            raise AlignmentError(f"pseudo rows {rows.shape[0]} != graph nodes {rep.n_events}")
        rep.pseudo_matrix = rows
    else:
        if rows.shape[0] != rep.n_events:
            raise AlignmentError(f"pseudo rows {rows.shape[0]} != unmasked rows {rep.n_events}")
        pseudo = np.zeros((rep.seq_matrix.shape[0], embedder.bin_count_))
        pseudo[: rows.shape[0]] = rows
        rep.pseudo_seq = pseudo
    return rep


def split_train_val(log, ratio: float, stratify: bool = True, seed: int = 0):
    """Deterministic train/validation split of case ids.

    With stratification, per-class proportions are preserved within one
    case; a class with a single case goes to train with a warning.
    """
    if not 0.0 < ratio < 1.0:
        raise ValidityError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    cases = log.cases

    def _split_ids(ids: list[str]) -> tuple[list[str], list[str]]:
        ids = list(ids)
        rng.shuffle(ids)
        n_train = int(round(ratio * len(ids)))
        n_train = min(max(n_train, 1), len(ids) - 1) if len(ids) > 1 else len(ids)
        return ids[:n_train], ids[n_train:]

    if not stratify:
        train, val = _split_ids([c.case_id for c in cases])
        return sorted(train), sorted(val)

    by_label: dict[str, list[str]] = {}
    for c in cases:
        by_label.setdefault(c.outcome, []).append(c.case_id)

    train: list[str] = []
    val: list[str] = []
    for label in sorted(by_label):
        ids = by_label[label]
        if len(ids) == 1:
            warnings.warn(f"class {label!r} has a single case; assigning it to train")
            train.extend(ids)
            continue
        t, v = _split_ids(ids)
        train.extend(t)
        val.extend(v)
    return sorted(train), sorted(val)


def reps_to_json(reps: list) -> str:
    """Binary-free JSON layout for a list of representations."""
    return json.dumps([r.to_dict() for r in reps], sort_keys=True)


def reps_from_json(text: str) -> list:
    out = []
    for d in json.loads(text):
        out.append(CaseGraph.from_dict(d) if d["kind"] == "graph" else CaseSequence.from_dict(d))
    return out
