"""Knowledge-answerable QA subset construction.

An item is kept iff the graph holds a witness triple: one entity equals
a gold answer (name comparison on normalized text) and the triple's
other entity is mentioned in the question as a token-boundary substring
of the normalized question.  The attached witness makes every accepted
item independently re-checkable against the raw triple list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

from kgprep import _kernels
from kgprep.errors import RecordError
from kgprep.kg_store import KnowledgeGraph, Triple, lookup_entity
from kgprep.matcher import ROLES


@dataclass(frozen=True, slots=True)
class QAItem:
    id: str
    question: str
    answers: tuple[str, ...]

    def __post_init__(self):
        if not self.question:
            raise ValueError("question is empty")
        if not self.answers:
            raise ValueError("answers list is empty")


@dataclass(frozen=True, slots=True)
class Witness:
    """The triple certifying an item: the gold answer sits in answer_role,
    question_entity is the triple's other entity (the one the question
    mentions)."""

    triple: Triple
    answer_role: str
    question_entity: str


@dataclass(frozen=True, slots=True)
class MatchVerdict:
    matched: bool
    witness: Witness | None = None


@lru_cache(maxsize=65536)
def _norm(text: str) -> str:
    return _kernels.normalize_text(text)[0]


def is_matched(item: QAItem, kg: KnowledgeGraph) -> MatchVerdict:
    """First witness by (answer order, triple ordinal, subject-before-
    object); the verdict itself does not depend on the tie-break."""
    q_norm = _kernels.normalize_text(item.question)[0]
    for answer in item.answers:
        hits = lookup_entity(kg, answer)
        for ordinal, role in sorted(hits, key=lambda h: (h[0], ROLES.index(h[1]))):
            t = kg.triples[ordinal]
            other = t.object if role == "subject" else t.subject
            other_norm = _norm(other)
            if other_norm and _kernels.find_token_spans(q_norm, other_norm):
                return MatchVerdict(True, Witness(t, role, other))
    return MatchVerdict(False, None)


@dataclass
class FilterReport:
    total: int = 0
    matched: int = 0


def filter_dataset(
    items: Iterable[QAItem], kg: KnowledgeGraph, report: FilterReport | None = None
) -> Iterator[tuple[QAItem, Witness]]:
    """Matched items with witnesses, input order preserved."""
    if report is None:
        report = FilterReport()
    for item in items:
        report.total += 1
        verdict = is_matched(item, kg)
        if verdict.matched:
            report.matched += 1
            yield item, verdict.witness


def split_tail(items: Iterable, fraction) -> tuple[list, list]:
    """Split off the last ceil(fraction x N) items (e.g. a dev split cut
    from the tail of train).  Ceiling keeps the tail non-empty whenever
    the input is.  fraction must be strictly between 0 and 1; floats are
    read at their decimal face value so 0.1 of 10 items is exactly 1.
    """
    frac = Fraction(str(fraction)) if isinstance(fraction, float) else Fraction(fraction)
    if not 0 < frac < 1:
        raise ValueError("fraction must be strictly between 0 and 1")
    seq = list(items)
    tail_n = math.ceil(frac * len(seq))
    head_n = len(seq) - tail_n
    return seq[:head_n], seq[head_n:]


def parse_qa_record(obj: dict) -> QAItem:
    """Validate one {"id", "question", "answers"} input record."""
    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object")
    item_id = obj.get("id")
    question = obj.get("question")
    answers = obj.get("answers")
    if not isinstance(item_id, str) or not item_id:
        raise RecordError("missing or empty 'id'")
    if not isinstance(question, str):
        raise RecordError("missing or non-string 'question'")
    if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
        raise RecordError("'answers' must be a list of strings")
    try:
        return QAItem(item_id, question, tuple(answers))
    except ValueError as exc:
        raise RecordError(str(exc)) from exc


def matched_item_to_obj(item: QAItem, witness: Witness) -> dict:
    """External JSON shape of one matched item."""
    t = witness.triple
    return {
        "id": item.id,
        "question": item.question,
        "answers": list(item.answers),
        "witness": {
            "triple": [t.subject, t.relation, t.object],
            "answer_role": witness.answer_role,
            "question_entity": witness.question_entity,
        },
    }
