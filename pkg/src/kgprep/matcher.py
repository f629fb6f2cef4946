"""Entity mention matching in sentences.

Entities and sentences are compared on a normalized form (lowercased,
punctuation removed, whitespace collapsed) with offsets mapped back to
the original sentence, so reported spans slice real text.  Three routes,
in order:

1. date route: when the entity itself is a date, any token window of the
   sentence expressing a compatible date matches, across surface formats
   ("1994-05-23" finds "23 May 1994");
2. exact route: token-boundary occurrences of the normalized entity;
3. bracket fallback, only when the first two found nothing: a trailing
   parenthetical qualifier is dropped from the entity ("John Doe (born
   1990)" retries as "John Doe").

Relations are never matched, only subject and object entities.
"""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

from kgprep import _kernels
from kgprep.errors import RecordError

if TYPE_CHECKING:
    from kgprep.kg_store import Triple

ROLES = ("subject", "object")

# longest supported date shape is "23 may 1994" / "may 23 1994"
_MAX_DATE_TOKENS = 3

_MONTHS = {
    "january": 1,
    "february": 2,
    "march": 3,
    "april": 4,
    "may": 5,
    "june": 6,
    "july": 7,
    "august": 8,
    "september": 9,
    "october": 10,
    "november": 11,
    "december": 12,
}

_ISO_RE = re.compile(r"(\d{4})-(\d{2})-(\d{2})")
# the image of an ISO date after punctuation removal
_COMPACT_RE = re.compile(r"(\d{4})(\d{2})(\d{2})")
_DMY_RE = re.compile(r"(\d{1,2})\s+([A-Za-z]+)\s+(\d{4})")
_MDY_RE = re.compile(r"([A-Za-z]+)\s+(\d{1,2}),?\s+(\d{4})")
_YEAR_RE = re.compile(r"[12]\d{3}")

_BRACKET_RE = re.compile(r"(.+) \([^()]*\)", re.DOTALL)


@dataclass(frozen=True, slots=True)
class NormalizedText:
    """Normalized string plus, per normalized character, the UTF-8 byte
    range of the source character it came from."""

    text: str
    offset_map: tuple[int, ...]
    end_map: tuple[int, ...]


def preprocess(text: str) -> NormalizedText:
    """Lowercase, strip Unicode punctuation, collapse whitespace runs to
    single spaces, trim the ends; offsets point back into the source."""
    norm, starts, ends = _kernels.normalize_text(text)
    return NormalizedText(norm, tuple(starts), tuple(ends))


@dataclass(frozen=True, slots=True)
class CalendarDate:
    """A possibly partial date; month and day may be unknown."""

    year: int
    month: int | None = None
    day: int | None = None

    def compatible(self, other: CalendarDate) -> bool:
        """True when no component populated on both sides disagrees, so a
        bare year is compatible with any full date in that year.  Not
        transitive; deliberately not __eq__."""
        if self.year != other.year:
            return False
        if self.month is not None and other.month is not None and self.month != other.month:
            return False
        if self.day is not None and other.day is not None and self.day != other.day:
            return False
        return True


def _checked_date(year: int, month: int, day: int) -> CalendarDate | None:
    if not 1 <= month <= 12:
        return None
    if not 1 <= day <= calendar.monthrange(year, month)[1]:
        return None
    return CalendarDate(year, month, day)


def parse_date(text: str) -> CalendarDate | None:
    """Parse a date-shaped string, or None.

    Supported: "1994-05-23", "19940523" (an ISO date after punctuation
    removal), "23 May 1994", "May 23, 1994" (comma optional), and a bare
    4-digit year 1000-2999.  English month names, case-insensitive.
    Impossible calendar days are rejected.
    """
    s = text.strip()
    m = _ISO_RE.fullmatch(s) or _COMPACT_RE.fullmatch(s)
    if m:
        return _checked_date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    m = _DMY_RE.fullmatch(s)
    if m:
        month = _MONTHS.get(m.group(2).lower())
        if month is None:
            return None
        return _checked_date(int(m.group(3)), month, int(m.group(1)))
    m = _MDY_RE.fullmatch(s)
    if m:
        month = _MONTHS.get(m.group(1).lower())
        if month is None:
            return None
        return _checked_date(int(m.group(3)), month, int(m.group(2)))
    m = _YEAR_RE.fullmatch(s)
    if m:
        return CalendarDate(int(m.group()))
    return None


@dataclass(frozen=True, slots=True)
class Span:
    """Byte range [start, end) in the original sentence; surface is the
    text that range covers."""

    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class MatchedSentence:
    """One sentence with its aligned triples and every entity span found.

    entity_spans holds only non-empty span sets, keyed by (triple index
    within the record, role); spans under one key never overlap.
    """

    sentence: str
    triples: tuple
    entity_spans: dict

    @property
    def matched(self) -> bool:
        return bool(self.entity_spans)


class _PreparedSentence:
    """Per-sentence state shared across entity lookups."""

    __slots__ = ("raw", "norm", "starts", "ends", "raw_bytes", "_tokens")

    def __init__(self, sentence: str):
        self.raw = sentence
        self.norm, self.starts, self.ends = _kernels.normalize_text(sentence)
        self.raw_bytes = sentence.encode("utf-8")
        self._tokens: list[tuple[int, int]] | None = None

    def tokens(self) -> list[tuple[int, int]]:
        if self._tokens is None:
            toks = []
            text = self.norm
            n = len(text)
            i = 0
            while i < n:
                j = text.find(" ", i)
                if j == -1:
                    j = n
                toks.append((i, j))
                i = j + 1
            self._tokens = toks
        return self._tokens


@lru_cache(maxsize=65536)
def _entity_prep(entity: str) -> tuple[str, CalendarDate | None, str | None]:
    """Normalized form, date value, and normalized bracket-stripped form."""
    norm, _, _ = _kernels.normalize_text(entity)
    date = parse_date(entity)
    stripped = None
    m = _BRACKET_RE.fullmatch(entity)
    if m:
        s_norm, _, _ = _kernels.normalize_text(m.group(1))
        stripped = s_norm or None
    return norm, date, stripped


def clear_caches() -> None:
    """Drop cached per-entity preparations (after a kernel backend swap)."""
    _entity_prep.cache_clear()


def _date_candidates(prep: _PreparedSentence, date: CalendarDate) -> list[tuple[int, int]]:
    toks = prep.tokens()
    count = len(toks)
    hits = []
    for a in range(count):
        for b in range(a, min(a + _MAX_DATE_TOKENS, count)):
            window = prep.norm[toks[a][0] : toks[b][1]]
            parsed = parse_date(window)
            if parsed is not None and date.compatible(parsed):
                hits.append((toks[a][0], toks[b][1]))
    # keep only windows not contained in another matching window
    return [
        c
        for c in hits
        if not any(d != c and d[0] <= c[0] and c[1] <= d[1] for d in hits)
    ]


def _candidates(
    prep: _PreparedSentence,
    norm_entity: str,
    date: CalendarDate | None,
    stripped: str | None,
) -> set[tuple[int, int]]:
    cands: set[tuple[int, int]] = set()
    if date is not None:
        cands.update(_date_candidates(prep, date))
    if norm_entity:
        cands.update(_kernels.find_token_spans(prep.norm, norm_entity))
    if not cands and stripped:
        cands.update(_kernels.find_token_spans(prep.norm, stripped))
    return cands


def _resolve_leftmost(cands: set[tuple[int, int]]) -> list[tuple[int, int]]:
    """Non-overlapping subset: scan by start, prefer longer on ties."""
    picked = []
    last_end = -1
    for s, e in sorted(cands, key=lambda c: (c[0], -c[1])):
        if s >= last_end:
            picked.append((s, e))
            last_end = e
    return picked


def _to_spans(prep: _PreparedSentence, ranges: list[tuple[int, int]]) -> tuple[Span, ...]:
    out = []
    for s, e in ranges:
        b0 = prep.starts[s]
        b1 = prep.ends[e - 1]
        out.append(Span(b0, b1, prep.raw_bytes[b0:b1].decode("utf-8")))
    return tuple(out)


def _match_prepared(prep: _PreparedSentence, entity: str) -> tuple[Span, ...]:
    norm_entity, date, stripped = _entity_prep(entity)
    cands = _candidates(prep, norm_entity, date, stripped)
    if not cands:
        return ()
    return _to_spans(prep, _resolve_leftmost(cands))


def match_entity(entity: str, sentence: str) -> tuple[Span, ...]:
    """All spans of `entity` in `sentence`, ordered by start, mutually
    non-overlapping (overlapping candidates resolve leftmost-greedy).
    Empty when the entity normalizes to nothing or simply isn't there.
    """
    return _match_prepared(_PreparedSentence(sentence), entity)


def match_record(sentence: str, triples: Sequence["Triple"]) -> MatchedSentence:
    """Match the subject and object of every aligned triple against the
    sentence.  Relations are skipped by design.  A record counts as
    matched when at least one (triple, role) found spans."""
    prep = _PreparedSentence(sentence)
    memo: dict[str, tuple[Span, ...]] = {}
    entity_spans: dict[tuple[int, str], tuple[Span, ...]] = {}
    for idx, t in enumerate(triples):
        for role in ROLES:
            entity = t.subject if role == "subject" else t.object
            spans = memo.get(entity)
            if spans is None:
                spans = _match_prepared(prep, entity)
                memo[entity] = spans
            if spans:
                entity_spans[(idx, role)] = spans
    return MatchedSentence(sentence, tuple(triples), entity_spans)


def parse_kelm_record(obj: dict) -> tuple[str, list["Triple"]]:
    """Validate one {"sentence", "triples"} input record."""
    from kgprep.kg_store import Triple

    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object")
    sentence = obj.get("sentence")
    raw_triples = obj.get("triples")
    if not isinstance(sentence, str):
        raise RecordError("missing or non-string 'sentence'")
    if not isinstance(raw_triples, list):
        raise RecordError("missing or non-list 'triples'")
    triples = []
    for entry in raw_triples:
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise RecordError(f"triple is not a 3-element array: {entry!r}")
        try:
            triples.append(Triple(*entry))
        except (TypeError, ValueError) as exc:
            raise RecordError(f"invalid triple {entry!r}: {exc}") from exc
    return sentence, triples


def matched_to_obj(m: MatchedSentence) -> dict:
    """External JSON shape of a matched record."""
    return {
        "sentence": m.sentence,
        "triples": [[t.subject, t.relation, t.object] for t in m.triples],
        "entity_spans": [
            {
                "triple": idx,
                "role": role,
                "spans": [[sp.start, sp.end] for sp in spans],
            }
            for (idx, role), spans in sorted(
                m.entity_spans.items(), key=lambda kv: (kv[0][0], ROLES.index(kv[0][1]))
            )
        ],
    }


def matched_from_obj(obj: dict) -> MatchedSentence:
    """Rebuild a MatchedSentence from its JSON shape, revalidating spans."""
    sentence, triples = parse_kelm_record(obj)
    raw = sentence.encode("utf-8")
    entity_spans: dict[tuple[int, str], tuple[Span, ...]] = {}
    for entry in obj.get("entity_spans", []):
        if not isinstance(entry, dict):
            raise RecordError("entity_spans entry is not an object")
        idx = entry.get("triple")
        role = entry.get("role")
        if not isinstance(idx, int) or not 0 <= idx < len(triples):
            raise RecordError(f"entity_spans entry references unknown triple {idx!r}")
        if role not in ROLES:
            raise RecordError(f"entity_spans entry has unknown role {role!r}")
        spans = []
        for pair in entry.get("spans", []):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise RecordError(f"span is not a [start, end] pair: {pair!r}")
            s, e = pair
            if not (isinstance(s, int) and isinstance(e, int) and 0 <= s < e <= len(raw)):
                raise RecordError(f"span out of range: {pair!r}")
            try:
                surface = raw[s:e].decode("utf-8")
            except UnicodeDecodeError as exc:
                raise RecordError(f"span {pair!r} is not on character boundaries") from exc
            spans.append(Span(s, e, surface))
        if spans:
            entity_spans[(idx, role)] = tuple(spans)
    return MatchedSentence(sentence, tuple(triples), entity_spans)
