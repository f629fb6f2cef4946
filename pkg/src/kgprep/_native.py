"""Pure-Python text kernels.

Reference implementation of the two hot functions behind entity matching:
character-level normalization with source-offset tracking, and
token-boundary substring search. kgprep._speedups is the compiled twin;
both must produce identical output on identical input (property-tested),
so any semantic change here has to land in the .pyx file as well.

The ASCII classification tables below are built from unicodedata / str
methods at import time and are shared with the compiled module, which
keeps the fast paths of both implementations in lockstep by construction.
"""

from __future__ import annotations

import unicodedata

BACKEND = "python"

# Per-character tables for the ASCII fast path.  Non-ASCII characters go
# through unicodedata.category / str.isspace / str.lower directly.
ASCII_PUNCT = tuple(unicodedata.category(chr(i)).startswith("P") for i in range(128))
ASCII_SPACE = tuple(chr(i).isspace() for i in range(128))
ASCII_LOWER = tuple(chr(i).lower() for i in range(128))


def _utf8_len(cp: int) -> int:
    if cp < 0x80:
        return 1
    if cp < 0x800:
        return 2
    if cp < 0x10000:
        return 3
    return 4


def normalize_text(text: str) -> tuple[str, list[int], list[int]]:
    """Lowercase, strip punctuation, collapse whitespace; keep byte offsets.

    Returns (normalized, starts, ends) where starts[i] / ends[i] are the
    UTF-8 byte range in ``text`` of the source character that produced
    normalized character i.  A whitespace run (possibly interleaved with
    removed punctuation) collapses to one space carrying the offsets of
    the run's first whitespace character; leading and trailing runs are
    dropped.  Lowercasing is applied per character, so multi-character
    expansions map every expanded character to the same source range.
    """
    chars: list[str] = []
    starts: list[int] = []
    ends: list[int] = []
    space_start = -1
    space_end = -1
    pos = 0
    for ch in text:
        cp = ord(ch)
        start = pos
        pos += _utf8_len(cp)
        if cp < 128:
            if ASCII_PUNCT[cp]:
                continue
            if ASCII_SPACE[cp]:
                if chars and space_start < 0:
                    space_start = start
                    space_end = pos
                continue
            low = ASCII_LOWER[cp]
        else:
            if unicodedata.category(ch).startswith("P"):
                continue
            if ch.isspace():
                if chars and space_start < 0:
                    space_start = start
                    space_end = pos
                continue
            low = ch.lower()
        if space_start >= 0:
            chars.append(" ")
            starts.append(space_start)
            ends.append(space_end)
            space_start = -1
        for out in low:
            chars.append(out)
            starts.append(start)
            ends.append(pos)
    return "".join(chars), starts, ends


def find_token_spans(haystack: str, needle: str) -> list[tuple[int, int]]:
    """All occurrences of needle in haystack that start and end on token
    boundaries (string edges or single spaces).  Character offsets, in
    order; overlapping occurrences are all reported.
    """
    if not needle:
        return []
    spans: list[tuple[int, int]] = []
    n = len(haystack)
    m = len(needle)
    i = haystack.find(needle)
    while i != -1:
        j = i + m
        if (i == 0 or haystack[i - 1] == " ") and (j == n or haystack[j] == " "):
            spans.append((i, j))
        i = haystack.find(needle, i + 1)
    return spans
