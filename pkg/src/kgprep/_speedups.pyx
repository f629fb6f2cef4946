# cython: language_level=3
"""Compiled text kernels.

Mirrors kgprep._native exactly: same functions, same output, same edge
cases.  The ASCII classification tables are imported from _native at
module init so the two implementations cannot drift on the fast path;
non-ASCII characters use the same unicodedata / str calls as _native.
"""

from libc.stdlib cimport malloc, free

cdef extern from "Python.h":
    object PyUnicode_FromKindAndData(int kind, const void *buffer, Py_ssize_t size)
    enum:
        PyUnicode_4BYTE_KIND

import unicodedata

from kgprep import _native

BACKEND = "c"

cdef bint[128] _IS_PUNCT
cdef bint[128] _IS_SPACE
cdef Py_UCS4[128] _LOWER


def _load_tables():
    for i in range(128):
        _IS_PUNCT[i] = _native.ASCII_PUNCT[i]
        _IS_SPACE[i] = _native.ASCII_SPACE[i]
        _LOWER[i] = ord(_native.ASCII_LOWER[i])


_load_tables()
del _load_tables

_category = unicodedata.category


def normalize_text(str text):
    """See kgprep._native.normalize_text; identical contract and output."""
    cdef Py_ssize_t n = len(text)
    # lowercase expansion is at most a few characters; 3x is safe headroom
    cdef Py_UCS4 *out = <Py_UCS4 *>malloc((3 * n + 1) * sizeof(Py_UCS4))
    if out == NULL:
        raise MemoryError()
    starts = []
    ends = []
    cdef Py_ssize_t out_len = 0
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t start
    cdef Py_ssize_t space_start = -1
    cdef Py_ssize_t space_end = -1
    cdef Py_ssize_t i
    cdef unsigned long cp
    cdef Py_UCS4 ch, d
    cdef str ch_s, low_s
    try:
        for i in range(n):
            ch = text[i]
            cp = <unsigned long>ch
            start = pos
            pos += 1 if cp < 0x80 else (2 if cp < 0x800 else (3 if cp < 0x10000 else 4))
            if cp < 128:
                if _IS_PUNCT[cp]:
                    continue
                if _IS_SPACE[cp]:
                    if out_len > 0 and space_start < 0:
                        space_start = start
                        space_end = pos
                    continue
                if space_start >= 0:
                    out[out_len] = u' '
                    out_len += 1
                    starts.append(space_start)
                    ends.append(space_end)
                    space_start = -1
                out[out_len] = _LOWER[cp]
                out_len += 1
                starts.append(start)
                ends.append(pos)
            else:
                ch_s = chr(ch)
                if _category(ch_s)[0] == "P":
                    continue
                if ch_s.isspace():
                    if out_len > 0 and space_start < 0:
                        space_start = start
                        space_end = pos
                    continue
                if space_start >= 0:
                    out[out_len] = u' '
                    out_len += 1
                    starts.append(space_start)
                    ends.append(space_end)
                    space_start = -1
                low_s = ch_s.lower()
                for d in low_s:
                    out[out_len] = d
                    out_len += 1
                    starts.append(start)
                    ends.append(pos)
        normalized = PyUnicode_FromKindAndData(PyUnicode_4BYTE_KIND, out, out_len)
    finally:
        free(out)
    return normalized, starts, ends


def find_token_spans(str haystack, str needle):
    """See kgprep._native.find_token_spans; identical contract and output."""
    if not needle:
        return []
    spans = []
    cdef Py_ssize_t n = len(haystack)
    cdef Py_ssize_t m = len(needle)
    cdef Py_ssize_t j
    cdef Py_ssize_t i = haystack.find(needle)
    while i != -1:
        j = i + m
        if (i == 0 or haystack[i - 1] == u' ') and (j == n or haystack[j] == u' '):
            spans.append((i, j))
        i = haystack.find(needle, i + 1)
    return spans
