"""Triple dump parsing and the in-memory entity index.

Dumps are plain TSV: one triple per line, three tab-separated fields
(subject, relation, object), UTF-8.  The index key is the matcher's
normalized form, so "case-insensitive entity lookup" here and the
question-side mention test in qa_align agree by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from kgprep import _kernels
from kgprep.errors import RecordError


@dataclass(frozen=True, slots=True)
class Triple:
    """One (subject, relation, object) fact."""

    subject: str
    relation: str
    object: str

    def __post_init__(self):
        for name in ("subject", "relation", "object"):
            value = getattr(self, name)
            if not isinstance(value, str):
                raise ValueError(f"{name} must be a string, got {type(value).__name__}")
            if not value.strip():
                raise ValueError(f"{name} is empty or whitespace-only")
            if "\t" in value or "\n" in value or "\r" in value:
                raise ValueError(f"{name} contains a tab or newline")


def to_tsv_line(t: Triple) -> str:
    return f"{t.subject}\t{t.relation}\t{t.object}\n"


@dataclass
class ParseSummary:
    """Running counts for one parse pass."""

    lines: int = 0
    triples: int = 0
    skipped: int = 0


def parse_triples(
    lines: Iterable[str | bytes],
    *,
    strict: bool = False,
    summary: ParseSummary | None = None,
) -> Iterator[Triple]:
    """Stream triples out of TSV lines, in input order.

    Malformed lines (wrong field count, empty field, bad field content)
    are skipped and counted unless strict, in which case the first one
    raises RecordError.  Non-UTF-8 bytes always abort with the line
    number.  Blank lines are ignored entirely.
    """
    if summary is None:
        summary = ParseSummary()
    for line_no, line in enumerate(lines, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise RecordError(f"not valid UTF-8: {exc}", line_no) from None
        line = line.rstrip("\r\n")
        if not line:
            continue
        summary.lines += 1
        fields = line.split("\t")
        if len(fields) != 3:
            if strict:
                raise RecordError(f"expected 3 tab-separated fields, got {len(fields)}", line_no)
            summary.skipped += 1
            continue
        try:
            t = Triple(*fields)
        except ValueError as exc:
            if strict:
                raise RecordError(str(exc), line_no) from None
            summary.skipped += 1
            continue
        summary.triples += 1
        yield t


def read_triples_file(
    path, *, strict: bool = False, summary: ParseSummary | None = None
) -> Iterator[Triple]:
    """parse_triples over a file, decoding per line so encoding errors
    carry a line number."""
    with open(path, "rb") as fh:
        yield from parse_triples(fh, strict=strict, summary=summary)


def _normalize(name: str) -> str:
    # same normalization as matcher.preprocess, minus the offset wrapper
    return _kernels.normalize_text(name)[0]


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable triple list plus an index from normalized entity name to
    every (triple ordinal, role) where that entity appears.  Entities
    whose name normalizes to nothing are unindexed (unfindable by name).
    Safe for concurrent readers once built."""

    triples: tuple[Triple, ...]
    entity_index: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.triples)


def build_index(triples: Iterable[Triple]) -> KnowledgeGraph:
    """Deterministic for a given input order; duplicates keep their own
    ordinals."""
    frozen = tuple(triples)
    index: dict[str, set[tuple[int, str]]] = {}
    for i, t in enumerate(frozen):
        for role, name in (("subject", t.subject), ("object", t.object)):
            key = _normalize(name)
            if not key:
                continue
            index.setdefault(key, set()).add((i, role))
    return KnowledgeGraph(frozen, index)


def lookup_entity(kg: KnowledgeGraph, name: str) -> set[tuple[int, str]]:
    """All (triple ordinal, role) slots where `name` appears, compared on
    the normalized form; empty set for unknown names."""
    key = _normalize(name)
    if not key:
        return set()
    return set(kg.entity_index.get(key, ()))


def neighbors(kg: KnowledgeGraph, entity: str, relation: str | None = None) -> set[str]:
    """Entity names (original surface forms) appearing opposite `entity`
    in any triple, optionally restricted to one relation name."""
    out = set()
    for i, role in lookup_entity(kg, entity):
        t = kg.triples[i]
        if relation is not None and t.relation != relation:
            continue
        out.add(t.object if role == "subject" else t.subject)
    return out


@dataclass(frozen=True, slots=True)
class CorpusStats:
    triple_count: int
    distinct_entities: int
    distinct_relations: int


def stats(kg: KnowledgeGraph) -> CorpusStats:
    """Counts, with entities and relations deduplicated on normalized
    names (so "Palme d'Or" and "palme dor" are one entity)."""
    entities = set()
    relations = set()
    for t in kg.triples:
        entities.add(_normalize(t.subject))
        entities.add(_normalize(t.object))
        relations.add(_normalize(t.relation))
    entities.discard("")
    return CorpusStats(len(kg.triples), len(entities), len(relations))
