"""Exact Match scoring and model-to-model EM deltas.

Answer normalization follows the usual open-domain QA convention
(lowercase, strip punctuation, drop English articles, squeeze spaces);
a strict byte-equality mode is available for sensitivity checks.  Deltas
are computed through decimal-faithful arithmetic so scores transcribed
at two decimals subtract without float noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from kgprep import _kernels
from kgprep.errors import RecordError
from kgprep.qa_align import QAItem

logger = logging.getLogger(__name__)

SPLITS = ("dev", "test")

_ARTICLES = frozenset({"a", "an", "the"})


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    id: str
    prediction: str


@dataclass(frozen=True, slots=True)
class EMResult:
    task: str
    split: str
    model: str
    em: float
    n: int


def normalize_answer(text: str) -> str:
    """Lowercase, remove punctuation, drop whole-token articles, collapse
    whitespace."""
    norm = _kernels.normalize_text(text)[0]
    if not norm:
        return ""
    return " ".join(tok for tok in norm.split(" ") if tok not in _ARTICLES)


def exact_match(prediction: str, golds: Sequence[str], *, strict: bool = False) -> bool:
    """True iff the prediction equals some gold answer after
    normalization (or byte-for-byte under strict)."""
    if not golds:
        raise ValueError("golds must be non-empty")
    if strict:
        return any(prediction == g for g in golds)
    p = normalize_answer(prediction)
    return any(p == normalize_answer(g) for g in golds)


def score(
    preds: Iterable[PredictionRecord],
    items: Iterable[QAItem],
    *,
    task: str,
    split: str,
    model: str,
    strict: bool = False,
) -> EMResult:
    """EM over all items; items without a prediction count as misses (a
    warning lists them).  Duplicate or unknown prediction ids and
    duplicate item ids are errors.
    """
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    gold: dict[str, QAItem] = {}
    for item in items:
        if item.id in gold:
            raise ValueError(f"duplicate item id {item.id!r}")
        gold[item.id] = item
    if not gold:
        raise ValueError("no items to score")

    seen: set[str] = set()
    matches = 0
    for p in preds:
        if p.id in seen:
            raise ValueError(f"duplicate prediction id {p.id!r}")
        seen.add(p.id)
        item = gold.get(p.id)
        if item is None:
            raise ValueError(f"prediction for unknown id {p.id!r}")
        if exact_match(p.prediction, item.answers, strict=strict):
            matches += 1

    missing = [i for i in gold if i not in seen]
    if missing:
        shown = ", ".join(missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        logger.warning("%d items have no prediction, scored as wrong: %s%s",
                       len(missing), shown, more)
    n = len(gold)
    return EMResult(task, split, model, 100.0 * matches / n, n)


@dataclass(frozen=True, slots=True)
class DeltaRow:
    task: str
    split: str
    delta_em: float


@dataclass(frozen=True, slots=True)
class DeltaReport:
    rows: tuple[DeltaRow, ...]
    average: float


def _decimal(value: float) -> Fraction:
    # str() of a float is its shortest round-tripping decimal, so table
    # values like 28.38 subtract exactly
    return Fraction(str(value))


def delta_report(results: Sequence[EMResult], baseline: str, treatment: str) -> DeltaReport:
    """Per-(task, split) EM difference treatment - baseline, plus the
    unweighted mean across rows.  Every (task, split) seen for either
    model must exist for both; results for other models are ignored."""
    table: dict[tuple[str, str, str], float] = {}
    for r in results:
        key = (r.task, r.split, r.model)
        if key in table:
            raise ValueError(f"duplicate result for task={r.task} split={r.split} model={r.model}")
        table[key] = r.em

    pairs = sorted(
        {(t, s) for t, s, m in table if m == baseline}
        | {(t, s) for t, s, m in table if m == treatment}
    )
    if not pairs:
        raise ValueError(f"no results for models {baseline!r} or {treatment!r}")

    rows = []
    deltas = []
    for task, split in pairs:
        for model in (baseline, treatment):
            if (task, split, model) not in table:
                raise ValueError(f"missing result for task={task} split={split} model={model}")
        d = _decimal(table[(task, split, treatment)]) - _decimal(table[(task, split, baseline)])
        deltas.append(d)
        rows.append(DeltaRow(task, split, float(d)))
    average = float(sum(deltas) / len(deltas))
    return DeltaReport(tuple(rows), average)


def parse_prediction_record(obj: dict) -> PredictionRecord:
    """Validate one {"id", "prediction"} input record."""
    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object")
    pred_id = obj.get("id")
    prediction = obj.get("prediction")
    if not isinstance(pred_id, str) or not pred_id:
        raise RecordError("missing or empty 'id'")
    if not isinstance(prediction, str):
        raise RecordError("missing or non-string 'prediction'")
    return PredictionRecord(pred_id, prediction)
