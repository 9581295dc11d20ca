"""Keyphrase prediction metrics: F1@M, F1@5, DupRatio, unique counts.

All matching happens on stemmed token sequences. Duplicated predictions
(and duplicated gold phrases) are removed after stemming, keeping first
occurrences; the raw generation order is preserved separately because the
duplication ratio is computed over it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .stem import stem_phrase
from .text import RawSample, find_subsequence, tokenize

F1_CUTOFF = 5
_PLACEHOLDER = "<fake-kp-{}>"

Phrase = list[str]


def match(pred_phrase: Phrase, gold_phrase: Phrase) -> bool:
    """Equality of stemmed token sequences."""
    return stem_phrase(pred_phrase) == stem_phrase(gold_phrase)


def _stem_key(phrase: Phrase) -> tuple[str, ...]:
    return tuple(stem_phrase(phrase))


def dedup_stemmed(phrases: list[Phrase]) -> list[Phrase]:
    """Ordered dedup after stemming; first occurrence wins."""
    seen: dict[tuple[str, ...], None] = {}
    out = []
    for phrase in phrases:
        key = _stem_key(phrase)
        if key not in seen:
            seen[key] = None
            out.append(phrase)
    return out


def dup_ratio(raw_ordered: list[Phrase]) -> float:
    """(#predictions - #unique after stemming) / #predictions; 0 if empty."""
    if not raw_ordered:
        return 0.0
    unique = len({_stem_key(p) for p in raw_ordered})
    return (len(raw_ordered) - unique) / len(raw_ordered)


def _precision_recall_f1(
    preds: list[Phrase], gold: list[Phrase], precision_denominator: int | None,
) -> float:
    gold_keys = {_stem_key(g) for g in gold}
    matches = sum(1 for p in preds if _stem_key(p) in gold_keys)
    denom = precision_denominator if precision_denominator else len(preds)
    precision = matches / denom if denom else 0.0
    recall = matches / len(gold) if gold else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_at_m(unique_preds: list[Phrase], gold: list[Phrase]) -> float:
    """F1 over all unique predictions, no cutoff."""
    return _precision_recall_f1(unique_preds, gold, None)


def f1_at_5(unique_preds: list[Phrase], gold: list[Phrase]) -> float:
    """F1 at cutoff five; short prediction lists are padded to exactly five
    with reserved placeholder phrases that can never match gold."""
    preds = list(unique_preds[:F1_CUTOFF])
    n = 1
    while len(preds) < F1_CUTOFF:
        preds.append([_PLACEHOLDER.format(n)])
        n += 1
    return _precision_recall_f1(preds, gold, F1_CUTOFF)


@dataclass
class PredictionSet:
    """One document's predictions: raw order plus per-split dedup."""

    raw_ordered: list[Phrase]
    present_raw: list[Phrase]
    absent_raw: list[Phrase]

    @property
    def present_unique(self) -> list[Phrase]:
        return dedup_stemmed(self.present_raw)

    @property
    def absent_unique(self) -> list[Phrase]:
        return dedup_stemmed(self.absent_raw)

    @property
    def unique_stemmed(self) -> list[Phrase]:
        return dedup_stemmed(self.raw_ordered)

    @classmethod
    def from_record(cls, record: dict) -> "PredictionSet":
        return cls(
            raw_ordered=[p.split() for p in record.get("raw_sequence", [])],
            present_raw=[p.split() for p in record.get("present", [])],
            absent_raw=[p.split() for p in record.get("absent", [])],
        )


def gold_partition(sample: RawSample) -> tuple[list[Phrase], list[Phrase]]:
    """Split gold keyphrases into present/absent against the document text
    (stemmed contiguous-subsequence rule), deduplicating after stemming."""
    doc_tokens = tokenize(sample.title) + tokenize(sample.abstract)
    stemmed_doc = stem_phrase(doc_tokens)
    present: list[Phrase] = []
    absent: list[Phrase] = []
    for phrase in sample.keyphrases:
        words = tokenize(phrase)
        if not words:
            continue
        if find_subsequence(stemmed_doc, stem_phrase(words)) >= 0:
            present.append(words)
        else:
            absent.append(words)
    return dedup_stemmed(present), dedup_stemmed(absent)


@dataclass
class MetricsReport:
    docs: int
    present_f1_at_m: float
    present_f1_at_5: float
    absent_f1_at_m: float
    absent_f1_at_5: float
    dup_ratio: float
    avg_present_unique: float  # #PK
    avg_absent_unique: float   # #AK
    present_docs_counted: int
    absent_docs_counted: int
    per_document: list[dict] = field(default_factory=list)

    def to_dict(self, include_per_document: bool = True) -> dict:
        out = {
            "docs": self.docs,
            "present": {
                "f1_at_m": self.present_f1_at_m,
                "f1_at_5": self.present_f1_at_5,
                "docs_counted": self.present_docs_counted,
            },
            "absent": {
                "f1_at_m": self.absent_f1_at_m,
                "f1_at_5": self.absent_f1_at_5,
                "docs_counted": self.absent_docs_counted,
            },
            "dup_ratio": self.dup_ratio,
            "avg_present_unique": self.avg_present_unique,
            "avg_absent_unique": self.avg_absent_unique,
        }
        if include_per_document:
            out["per_document"] = self.per_document
        return out

    def format_table(self, label: str = "") -> str:
        header = (
            f"{'model':<14} {'F1@M(P)':>8} {'F1@5(P)':>8} "
            f"{'F1@M(A)':>8} {'F1@5(A)':>8} {'DupRatio':>9} "
            f"{'#PK':>6} {'#AK':>6}"
        )
        row = (
            f"{label or 'run':<14} {self.present_f1_at_m:>8.3f} "
            f"{self.present_f1_at_5:>8.3f} {self.absent_f1_at_m:>8.3f} "
            f"{self.absent_f1_at_5:>8.3f} {self.dup_ratio:>9.3f} "
            f"{self.avg_present_unique:>6.2f} {self.avg_absent_unique:>6.2f}"
        )
        return header + "\n" + row


def corpus_report(
    predictions: list[PredictionSet], gold_corpus: list[RawSample],
) -> MetricsReport:
    """Macro-averaged metrics over aligned documents. Documents whose gold
    split is empty do not contribute to that split's F1 average."""
    if len(predictions) != len(gold_corpus):
        raise DataError(
            f"prediction/gold count mismatch: {len(predictions)} vs "
            f"{len(gold_corpus)}"
        )
    per_document = []
    present_f1m, present_f15 = [], []
    absent_f1m, absent_f15 = [], []
    dup_ratios = []
    pk_counts, ak_counts = [], []
    for idx, (pred, sample) in enumerate(zip(predictions, gold_corpus)):
        gold_present, gold_absent = gold_partition(sample)
        record = {
            "doc": idx,
            "dup_ratio": dup_ratio(pred.raw_ordered),
            "num_present_unique": len(pred.present_unique),
            "num_absent_unique": len(pred.absent_unique),
        }
        dup_ratios.append(record["dup_ratio"])
        pk_counts.append(record["num_present_unique"])
        ak_counts.append(record["num_absent_unique"])
        if gold_present:
            f1m = f1_at_m(pred.present_unique, gold_present)
            f15 = f1_at_5(pred.present_unique, gold_present)
            present_f1m.append(f1m)
            present_f15.append(f15)
            record["present_f1_at_m"] = f1m
            record["present_f1_at_5"] = f15
        if gold_absent:
            f1m = f1_at_m(pred.absent_unique, gold_absent)
            f15 = f1_at_5(pred.absent_unique, gold_absent)
            absent_f1m.append(f1m)
            absent_f15.append(f15)
            record["absent_f1_at_m"] = f1m
            record["absent_f1_at_5"] = f15
        per_document.append(record)

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    return MetricsReport(
        docs=len(predictions),
        present_f1_at_m=mean(present_f1m),
        present_f1_at_5=mean(present_f15),
        absent_f1_at_m=mean(absent_f1m),
        absent_f1_at_5=mean(absent_f15),
        dup_ratio=mean(dup_ratios),
        avg_present_unique=mean([float(c) for c in pk_counts]),
        avg_absent_unique=mean([float(c) for c in ak_counts]),
        present_docs_counted=len(present_f1m),
        absent_docs_counted=len(absent_f1m),
        per_document=per_document,
    )


def load_predictions(path: str | Path) -> list[PredictionSet]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"predictions file not found: {p}")
    out = []
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{p}:{lineno}: invalid JSON ({exc})") from exc
            out.append(PredictionSet.from_record(record))
    return out
