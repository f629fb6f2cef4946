"""Salient-span masking of triples and matched sentences.

A triple is rendered "subject, relation, object" and one entity field is
replaced by the sentinel; a matched sentence has every span of one
chosen entity replaced.  Relations are never masked.  Every emitted
example is reconstruction-safe: substituting the target back at the
sentinel positions reproduces the source text byte for byte, which is
verified at build time so a sentinel colliding with record text fails
loudly instead of corrupting a corpus.

Randomness (role coins, key choice) derives from (policy.seed, record
ordinal), so output is identical however the work is partitioned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from kgprep._rand import SplitMix64, derive
from kgprep.matcher import ROLES, MatchedSentence, Span

if TYPE_CHECKING:
    from kgprep.kg_store import Triple

ROLE_CHOICES = ("random", "subject", "object", "both")

SOURCES = ("kg", "kelm", "natural")


@dataclass(frozen=True, slots=True)
class MaskPolicy:
    sentinel: str = "[MASK]"
    role_choice: str = "random"
    seed: int = 0

    def __post_init__(self):
        if not self.sentinel or "\t" in self.sentinel or "\n" in self.sentinel:
            raise ValueError("sentinel must be non-empty without tabs or newlines")
        if self.role_choice not in ROLE_CHOICES:
            raise ValueError(f"role_choice must be one of {ROLE_CHOICES}")


@dataclass(frozen=True, slots=True)
class MaskedExample:
    """One (input, target) training record with provenance."""

    input: str
    target: str
    source: str
    triple: "Triple | None" = None
    masked_role: str | None = None
    spans: tuple[Span, ...] | None = None


def serialize_triple(t: Triple) -> str:
    """Comma-space join, no escaping; entity names containing ", " are
    rendered verbatim (input-side ambiguity accepted, targets unaffected)."""
    return f"{t.subject}, {t.relation}, {t.object}"


def _check_reconstruction(input_text: str, target: str, source_text: str, sentinel: str, n: int):
    if input_text.count(sentinel) != n or input_text.replace(sentinel, target) != source_text:
        raise ValueError(
            f"sentinel {sentinel!r} collides with record text; "
            "masking would not be reversible"
        )


def mask_triple(t: Triple, policy: MaskPolicy, ordinal: int = 0) -> list[MaskedExample]:
    """Mask one entity of a serialized triple (two under role_choice=both,
    subject first).  Under "random" the role is a fair coin derived from
    (policy.seed, ordinal)."""
    if policy.role_choice == "both":
        roles = ["subject", "object"]
    elif policy.role_choice == "random":
        coin = SplitMix64(derive(policy.seed, ordinal)).coin()
        roles = ["subject" if coin == 0 else "object"]
    else:
        roles = [policy.role_choice]

    base = serialize_triple(t)
    out = []
    for role in roles:
        if role == "subject":
            input_text = f"{policy.sentinel}, {t.relation}, {t.object}"
            target = t.subject
        else:
            input_text = f"{t.subject}, {t.relation}, {policy.sentinel}"
            target = t.object
        _check_reconstruction(input_text, target, base, policy.sentinel, 1)
        out.append(MaskedExample(input_text, target, "kg", t, role))
    return out


def _splice(raw: bytes, spans: tuple[Span, ...], sentinel: bytes) -> str:
    parts = []
    prev = 0
    for sp in spans:
        parts.append(raw[prev : sp.start])
        parts.append(sentinel)
        prev = sp.end
    parts.append(raw[prev:])
    return b"".join(parts).decode("utf-8")


def mask_sentence(m: MatchedSentence, policy: MaskPolicy, ordinal: int = 0) -> MaskedExample | None:
    """Mask every span of one matched entity in the sentence.

    The (triple, role) key is picked uniformly (seeded by policy.seed and
    the record ordinal) among keys whose spans all show one surface form,
    so the single target reconstructs the sentence exactly.  role_choice
    subject/object restricts the pick to that role, falling back to the
    other role rather than dropping the record; "random" and "both" treat
    all keys alike.  Returns None when nothing is maskable (counted as a
    drop by callers).
    """
    keys = sorted(m.entity_spans, key=lambda k: (k[0], ROLES.index(k[1])))
    if policy.role_choice in ROLES:
        preferred = [k for k in keys if k[1] == policy.role_choice]
        keys = preferred or keys
    # only keys whose spans agree on a surface form are reconstructible
    keys = [k for k in keys if len({sp.surface for sp in m.entity_spans[k]}) == 1]
    if not keys:
        return None

    rng = SplitMix64(derive(policy.seed, ordinal))
    idx, role = keys[rng.below(len(keys))]
    spans = tuple(sorted(m.entity_spans[(idx, role)], key=lambda sp: sp.start))
    target = spans[0].surface
    input_text = _splice(m.sentence.encode("utf-8"), spans, policy.sentinel.encode("utf-8"))
    _check_reconstruction(input_text, target, m.sentence, policy.sentinel, len(spans))
    return MaskedExample(input_text, target, "kelm", m.triples[idx], role, spans)


def example_to_obj(ex: MaskedExample) -> dict:
    """External JSON shape of one masked example."""
    t = ex.triple
    return {
        "input": ex.input,
        "target": ex.target,
        "source": ex.source,
        "triple": [t.subject, t.relation, t.object] if t is not None else None,
        "masked_role": ex.masked_role,
    }
