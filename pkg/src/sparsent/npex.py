"""Candidate noun-phrase extraction over POS tag sequences.

The pattern, applied greedily left to right:

    NP  = JJs NNs CDs
    JJs = zero or more capitalized adjectives (surface ~ [A-Z]\\w+, tag JJ)
    NNs = one or more tokens whose tag matches N[A-Z]*
    CDs = optionally one token tagged CD with surface ~ \\w+

Matching runs over (token, tag) pairs but is behavior-equivalent to
running the serialized ``w/pos`` string form through a regex engine
(leftmost-longest); the test suite checks the equivalence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Set

from .corpus import Pool, Sentence, bio_spans

_CAP_WORD = re.compile(r"[A-Z]\w+")
_NOUN_TAG = re.compile(r"N[A-Z]*")
_CD_WORD = re.compile(r"\w+")


@dataclass(frozen=True)
class NPSpan:
    sentence_id: int
    start: int
    end: int  # exclusive
    surface: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad span [{self.start}, {self.end})")


@dataclass
class NounPhrase:
    surface: str
    occurrences: List[NPSpan] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.occurrences)


def extract_nps(sentence: Sentence, relax_jj_case: bool = False) -> List[NPSpan]:
    """Maximal non-overlapping matches of the NP pattern, left to right."""
    toks = sentence.tokens
    n = len(toks)
    spans: List[NPSpan] = []
    i = 0
    while i < n:
        j = i
        while j < n and toks[j].pos == "JJ" and (
            relax_jj_case or _CAP_WORD.fullmatch(toks[j].surface)
        ):
            j += 1
        k = j
        while k < n and _NOUN_TAG.fullmatch(toks[k].pos):
            k += 1
        if k == j:  # no noun head: the JJ run alone is not an NP
            i += 1
            continue
        if k < n and toks[k].pos == "CD" and _CD_WORD.fullmatch(toks[k].surface):
            k += 1
        surface = " ".join(t.surface for t in toks[i:k])
        spans.append(NPSpan(sentence.id, i, k, surface))
        i = k
    return spans


def collect_nps(pool: Pool, relax_jj_case: bool = False) -> List[NounPhrase]:
    """Group NP spans by exact (case-sensitive) surface across the pool.

    Deterministic order: descending count, then lexicographic surface.
    """
    groups: Dict[str, NounPhrase] = {}
    for sentence in pool:
        for span in extract_nps(sentence, relax_jj_case=relax_jj_case):
            groups.setdefault(span.surface, NounPhrase(span.surface)).occurrences.append(span)
    return sorted(groups.values(), key=lambda np_: (-np_.count, np_.surface))


def gold_surfaces(pool: Pool) -> Set[str]:
    """Distinct surface forms of gold entity spans in the pool."""
    out: Set[str] = set()
    for s in pool:
        if s.gold is None:
            continue
        for start, end, _cls in bio_spans(s.gold):
            out.add(" ".join(t.surface for t in s.tokens[start:end]))
    return out


def extraction_recall(pool: Pool, nps: List[NounPhrase]) -> float:
    """Fraction of gold entity surface forms returned as candidate NPs."""
    gold = gold_surfaces(pool)
    if not gold:
        return 0.0
    candidates = {np_.surface for np_ in nps}
    return len(gold & candidates) / len(gold)


def serialize_tagged(sentence: Sentence) -> str:
    """Sentence as the ``w/pos`` string form (for regex-equivalence checks)."""
    return " ".join(f"{t.surface}/{t.pos}" for t in sentence.tokens)
