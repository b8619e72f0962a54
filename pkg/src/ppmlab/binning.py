"""Hybrid duration binning and TF-IDF pseudo-embeddings.

Binning is adaptive: durations below a cut-off each get their own bin
(preserving granularity for short events), durations at or above it are
grouped by quantiles. A feedback loop checks whether the quantile-bin
frequencies are balanced (coefficient of variation below a threshold) and,
if not, halves the quantile count and raises the cut-off on alternating
iterations until balance or the iteration cap.

Each event then maps to an (activity, bin) pair. Treating cases as documents
and pairs as terms, a TF-IDF weighting turns every case into a matrix with
one row per activity and one column per bin: in-case frequency of a pair
against its rarity across cases. These matrices are the non-learned
"pseudo-embedding" channel consumed by the duration-aware models.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .encoding import EncodedCase
from .errors import ValidityError


def _interp_quantile(sorted_values: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile of an ascending array, q in [0, 1]."""
    m = len(sorted_values)
    if m == 1:
        return float(sorted_values[0])
    pos = q * (m - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, m - 1)
    frac = pos - lo
    return float(sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]))


def quantile_edges(sorted_values: np.ndarray, n_bins: int) -> list[float]:
    """Edges at the k/n quantiles, duplicates removed.

    Returns an ascending list covering [min, max]; len(edges) - 1 is the
    usable bin count and may shrink below n_bins on skewed data.
    """
    raw = [_interp_quantile(sorted_values, k / n_bins) for k in range(n_bins + 1)]
    edges: list[float] = []
    for e in raw:
        if not edges or e > edges[-1]:
            edges.append(e)
    return edges


class DurationBinner(BaseEstimator, TransformerMixin):
    """Adaptive hybrid duration discretizer.

    Parameters
    ----------
    t_cut : initial cut-off in minutes; durations below it get unique bins.
    n_quant : initial number of quantile bins for durations >= t_cut.
    balance_threshold : maximum coefficient of variation of the quantile-bin
        frequencies accepted as balanced.
    max_iterations : cap on the rebalance loop.

    After ``fit``: ``unique_bins_`` maps sub-cut durations to bin ids,
    ``edges_`` are the quantile edges, ``bin_count_`` is the total number of
    bins, ``frequencies_`` the per-bin training counts, and ``t_cut_`` /
    ``n_quant_`` the final loop values.
    """

    def __init__(self, t_cut: int = 5, n_quant: int = 24,
                 balance_threshold: float = 0.5, max_iterations: int = 20):
        self.t_cut = t_cut
        self.n_quant = n_quant
        self.balance_threshold = balance_threshold
        self.max_iterations = max_iterations

    @classmethod
    def patients_policy(cls) -> "DurationBinner":
        """Sub-5-minute durations unique, the rest in 24 quantile bins."""
        return cls(t_cut=5, n_quant=24)

    @classmethod
    def zero_nonzero_policy(cls) -> "DurationBinner":
        """Two bins: zero duration and everything else."""
        return cls(t_cut=1, n_quant=1)

    # -- fitting -----------------------------------------------------------

    def _build(self, durations: np.ndarray, t_cut: int, n_quant: int):
        unique_bins: dict[int, int] = {}
        for d in durations:
            if d < t_cut and int(d) not in unique_bins:
                unique_bins[int(d)] = len(unique_bins)
        above = np.sort(durations[durations >= t_cut])
        edges = quantile_edges(above, n_quant) if len(above) else []
        return unique_bins, edges

    @staticmethod
    def _quantile_bin_count(edges: list[float]) -> int:
        # a degenerate single-point edge list still spans one bin
        return 0 if not edges else max(1, len(edges) - 1)

    def _assign(self, duration: float, unique_bins: dict, edges: list[float], t_cut: int) -> int:
        n_unique = len(unique_bins)
        if duration < t_cut:
            bin_id = unique_bins.get(int(duration))
            if bin_id is not None:
                return bin_id
            # sub-cut value never seen in training: fall through to the
            # quantile region, or to the nearest unique bin when there is none
            if not edges:
                if not unique_bins:
                    raise ValidityError("binning has no bins to assign to")
                nearest = min(unique_bins, key=lambda u: (abs(u - duration), u))
                return unique_bins[nearest]
        if not edges:
            nearest = min(unique_bins, key=lambda u: (abs(u - duration), u))
            return unique_bins[nearest]
        if len(edges) == 1:
            return n_unique
        idx = int(np.searchsorted(np.asarray(edges), duration, side="right")) - 1
        idx = min(max(idx, 0), len(edges) - 2)
        return n_unique + idx

    def fit(self, X, y=None):
        durations = np.asarray(list(X), dtype=float)
        if durations.size == 0:
            raise ValidityError("cannot fit duration bins on an empty multiset")
        if np.any(durations < 0):
            raise ValidityError("negative durations are invalid")

        t_cut, n_quant = int(self.t_cut), int(self.n_quant)
        if n_quant < 1 or self.max_iterations < 1:
            raise ValidityError("n_quant and max_iterations must be >= 1")

        shrink_next = True  # alternate: halve n_quant first, then raise t_cut
        for iteration in range(self.max_iterations):
            used_t_cut, used_n_quant = t_cut, n_quant
            unique_bins, edges = self._build(durations, t_cut, n_quant)
            quantile_counts = self._quantile_frequencies(durations, unique_bins, edges, t_cut)
            if self._balanced(quantile_counts):
                break
            if shrink_next:
                n_quant = max(1, n_quant // 2)
            else:
                t_cut += 1
            shrink_next = not shrink_next

        self.t_cut_ = used_t_cut
        self.n_quant_ = used_n_quant
        self.unique_bins_ = unique_bins
        self.edges_ = edges
        self.bin_count_ = len(unique_bins) + self._quantile_bin_count(edges)
        self.iterations_ = iteration + 1
        counts: dict[int, int] = {}
        for d in durations:
            b = self._assign(float(d), unique_bins, edges, used_t_cut)
            counts[b] = counts.get(b, 0) + 1
        self.frequencies_ = counts
        return self

    def _quantile_frequencies(self, durations, unique_bins, edges, t_cut) -> list[int]:
        n_bins = self._quantile_bin_count(edges)
        if n_bins == 0:
            return []
        counts = [0] * n_bins
        for d in durations:
            if d >= t_cut:
                b = self._assign(float(d), unique_bins, edges, t_cut) - len(unique_bins)
                counts[b] += 1
        return counts

    def _balanced(self, quantile_counts: list[int]) -> bool:
        if len(quantile_counts) <= 1:
            return True
        arr = np.asarray(quantile_counts, dtype=float)
        mean = arr.mean()
        if mean == 0:
            return True
        return float(arr.std() / mean) <= self.balance_threshold

    # -- application -------------------------------------------------------

    def assign(self, duration: float) -> int:
        check_is_fitted(self, "bin_count_")
        if duration < 0:
            raise ValidityError(f"negative duration {duration}")
        return self._assign(float(duration), self.unique_bins_, self.edges_, self.t_cut_)

    def transform(self, X) -> np.ndarray:
        return np.asarray([self.assign(float(d)) for d in X], dtype=int)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        check_is_fitted(self, "bin_count_")
        payload = {
            "params": {
                "t_cut": self.t_cut, "n_quant": self.n_quant,
                "balance_threshold": self.balance_threshold,
                "max_iterations": self.max_iterations,
            },
            "t_cut_final": self.t_cut_,
            "n_quant_final": self.n_quant_,
            "unique_bins": {str(k): v for k, v in self.unique_bins_.items()},
            "edges": self.edges_,
            "bin_count": self.bin_count_,
            "frequencies": {str(k): v for k, v in self.frequencies_.items()},
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DurationBinner":
        payload = json.loads(text)
        binner = cls(**payload["params"])
        binner.t_cut_ = payload["t_cut_final"]
        binner.n_quant_ = payload["n_quant_final"]
        binner.unique_bins_ = {int(k): v for k, v in payload["unique_bins"].items()}
        binner.edges_ = list(payload["edges"])
        binner.bin_count_ = payload["bin_count"]
        binner.frequencies_ = {int(k): v for k, v in payload["frequencies"].items()}
        binner.iterations_ = 0
        return binner


@dataclass
class CaseTerms:
    """(activity, bin) term counts for one case."""

    case_id: str
    counts: dict[tuple[str, int], int]
    n_events: int


def _case_terms(case: EncodedCase, binner: DurationBinner) -> CaseTerms:
    counts: dict[tuple[str, int], int] = {}
    for activity, duration in zip(case.activities, case.durations):
        term = (activity, binner.assign(float(duration)))
        counts[term] = counts.get(term, 0) + 1
    return CaseTerms(case.case_id, counts, len(case.activities))


class PseudoEmbedder(BaseEstimator, TransformerMixin):
    """Builds per-case (activity x bin) TF-IDF matrices.

    tf(term, case) is the in-case term count divided by the case's event
    count; idf(term) = ln(N / (1 + df)) + 1 over the training corpus, which
    is smoothed and strictly positive. Document frequencies come from the
    training cases only; other cases are scored as queries, and terms or
    activities unseen in training contribute zeros.
    """

    def __init__(self, binner: DurationBinner | None = None):
        self.binner = binner

    def fit(self, X, y=None):
        if self.binner is None:
            raise ValidityError("PseudoEmbedder requires a fitted binner")
        check_is_fitted(self.binner, "bin_count_")
        cases = list(X)
        if not cases:
            raise ValidityError("cannot fit a pseudo-embedding on zero cases")
        doc_freq: dict[tuple[str, int], int] = {}
        for case in cases:
            for term in _case_terms(case, self.binner).counts:
                doc_freq[term] = doc_freq.get(term, 0) + 1
        self.vocabulary_ = sorted(doc_freq)
        self.doc_freq_ = doc_freq
        self.n_documents_ = len(cases)
        self.activities_ = sorted({a for a, _ in self.vocabulary_})
        self.activity_index_ = {a: i for i, a in enumerate(self.activities_)}
        self.bin_count_ = self.binner.bin_count_
        self.idf_ = {t: math.log(self.n_documents_ / (1 + df)) + 1.0 for t, df in doc_freq.items()}
        return self

    def case_matrix(self, case: EncodedCase) -> np.ndarray:
        """TF-IDF matrix of one case: rows = training activities, cols = bins."""
        check_is_fitted(self, "vocabulary_")
        matrix = np.zeros((len(self.activities_), self.bin_count_))
        terms = _case_terms(case, self.binner)
        for (activity, bin_id), count in terms.counts.items():
            idf = self.idf_.get((activity, bin_id))
            if idf is None:
                continue
            tf = count / terms.n_events
            matrix[self.activity_index_[activity], bin_id] = tf * idf
        return matrix

    def transform(self, X) -> dict[str, np.ndarray]:
        return {case.case_id: self.case_matrix(case) for case in X}

    def event_vector(self, activity: str, case_matrix: np.ndarray) -> np.ndarray:
        """Row of a case matrix for one event's activity; zeros when unseen."""
        row = self.activity_index_.get(activity)
        if row is None:
            return np.zeros(self.bin_count_)
        return case_matrix[row]

    def case_pseudo_rows(self, case: EncodedCase) -> np.ndarray:
        """Per-event pseudo vectors, aligned with the case's event order."""
        matrix = self.case_matrix(case)
        return np.stack([self.event_vector(a, matrix) for a in case.activities])

    def matrix_to_csv(self, case_matrix: np.ndarray) -> str:
        """One row per activity, one column per bin, for inspection."""
        header = "activity," + ",".join(f"bin_{b}" for b in range(self.bin_count_))
        lines = [header]
        for activity, row in zip(self.activities_, case_matrix):
            lines.append(activity + "," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        check_is_fitted(self, "vocabulary_")
        payload = {
            "binner": json.loads(self.binner.to_json()),
            "vocabulary": [[a, b] for a, b in self.vocabulary_],
            "doc_freq": [[a, b, df] for (a, b), df in sorted(self.doc_freq_.items())],
            "n_documents": self.n_documents_,
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PseudoEmbedder":
        payload = json.loads(text)
        binner = DurationBinner.from_json(json.dumps(payload["binner"]))
        emb = cls(binner=binner)
        emb.vocabulary_ = [(a, int(b)) for a, b in payload["vocabulary"]]
        emb.doc_freq_ = {(a, int(b)): df for a, b, df in payload["doc_freq"]}
        emb.n_documents_ = payload["n_documents"]
        emb.activities_ = sorted({a for a, _ in emb.vocabulary_})
        emb.activity_index_ = {a: i for i, a in enumerate(emb.activities_)}
        emb.bin_count_ = binner.bin_count_
        emb.idf_ = {t: math.log(emb.n_documents_ / (1 + df)) + 1.0 for t, df in emb.doc_freq_.items()}
        return emb
