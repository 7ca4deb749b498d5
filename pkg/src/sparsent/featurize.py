"""Coarse feature families for candidate noun phrases.

Families:

* LF_OF  - orthographic form (char class + case class)
* LF_WS  - long and short word shapes
* LS     - lexico-syntactic context pattern prev_NP_next
* SF     - dependency roles of the NP head token
* SeF    - sense classes from a pluggable lemma -> sense lexicon
* CF     - discretized count-based context embeddings (PPMI + SVD)

Each family yields (np, feature) co-occurrence counts that feed the
bipartite ranking graph.
"""

from __future__ import annotations

import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Pool, Sentence
from .npex import NounPhrase, NPSpan

FAMILIES = ("LF_OF", "LF_WS", "LS", "SF", "SeF", "CF")

BOS = "⟨S⟩"    # sentence-start sentinel
EOS = "⟨/S⟩"   # sentence-end sentinel


@dataclass(frozen=True)
class Feature:
    family: str
    value: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")
        if not self.value:
            raise ValueError("feature value must be non-empty")


@dataclass(frozen=True)
class FeatureCooc:
    np_surface: str
    feature: Feature
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("co-occurrence count must be >= 1")


@dataclass
class FeaturizeConfig:
    cf_dims: int = 50
    cf_buckets: int = 10
    cf_window: int = 2
    relax_jj_case: bool = False
    rng_seed: int = 0
    families: Tuple[str, ...] = FAMILIES


class SenseLexicon:
    """Lemma -> sense-class mapping loaded from a two-column TSV."""

    def __init__(self, entries: Optional[Dict[str, List[str]]] = None):
        self._map: Dict[str, List[str]] = {}
        for lemma, classes in (entries or {}).items():
            self._map[lemma] = sorted(set(classes))

    @classmethod
    def load(cls, path: str) -> "SenseLexicon":
        entries: Dict[str, List[str]] = defaultdict(list)
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(
                        f"{path}:{lineno}: expected lemma<TAB>senseClass, got {line!r}")
                entries[parts[0]].append(parts[1])
        return cls(entries)

    def senses(self, lemma: str) -> List[str]:
        return self._map.get(lemma, [])

    def __len__(self) -> int:
        return len(self._map)


# ---------------------------------------------------------------------------
# Lexical features


def _char_class(word: str) -> str:
    if word.isdigit():
        return "numeric"
    if word.isalpha():
        return "alpha"
    if word.isalnum():
        return "alphanumeric"
    return "other"


def _case_class(word: str) -> Optional[str]:
    letters = [c for c in word if c.isalpha()]
    if not letters:
        return None  # no case information exists for letterless tokens
    if all(c.isupper() for c in letters):
        return "all-upper"
    if all(c.islower() for c in letters):
        return "all-lower"
    if word[0].isupper() and all(c.islower() for c in letters[1:]):
        return "title"
    return "mixed"


def orthographic_form(word: str) -> List[Feature]:
    """Char-class and (when the word carries letters) case-class features."""
    if not word:
        raise ValueError("word must be non-empty")
    feats = [Feature("LF_OF", f"of:{_char_class(word)}")]
    case = _case_class(word)
    if case is not None:
        feats.append(Feature("LF_OF", f"case:{case}"))
    return feats


def long_word_shape(word: str) -> str:
    return "".join("L" if c.isalpha() else "D" if c.isdigit() else c for c in word)


def short_word_shape(word: str) -> str:
    lws = long_word_shape(word)
    out = []
    for c in lws:
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def word_shape(word: str) -> List[Feature]:
    """Long and short word-shape features."""
    if not word:
        raise ValueError("word must be non-empty")
    return [Feature("LF_WS", f"lws:{long_word_shape(word)}"),
            Feature("LF_WS", f"sws:{short_word_shape(word)}")]


def lexical_features(span_tokens: Sequence[str], surface: str) -> List[Feature]:
    """LF features for each token of the NP plus the joined surface."""
    feats: List[Feature] = []
    targets = list(span_tokens)
    if len(targets) > 1:
        targets.append(surface)
    for word in targets:
        feats.extend(orthographic_form(word))
        feats.extend(word_shape(word))
    return feats


# ---------------------------------------------------------------------------
# Contextual pattern / dependency / sense features


def lexico_syntactic(np_span: NPSpan, sentence: Sentence) -> Feature:
    """Pattern ``<prev>_NP_<next>`` with boundary sentinels.

    The NP slot is the literal placeholder "NP" so that distinct phrases
    occurring in identical contexts share the feature.
    """
    prev = sentence.tokens[np_span.start - 1].surface if np_span.start > 0 else BOS
    nxt = (sentence.tokens[np_span.end].surface
           if np_span.end < len(sentence.tokens) else EOS)
    return Feature("LS", f"{prev}_NP_{nxt}")


def syntactic(np_span: NPSpan, sentence: Sentence) -> List[Feature]:
    """Dependency-role features of the NP head (last) token.

    Returns an empty list when the sentence carries no dependency columns.
    """
    head_idx = np_span.end - 1  # 0-based position of the NP head token
    head_tok = sentence.tokens[head_idx]
    if head_tok.head is None or head_tok.deprel is None:
        return []
    feats = [Feature("SF", f"dep:{head_tok.deprel}")]
    children = sorted(
        t.deprel for i, t in enumerate(sentence.tokens)
        if t.head is not None and t.head == head_idx + 1 and t.deprel is not None
    )
    feats.extend(Feature("SF", f"gov:{rel}") for rel in children)
    return feats


def semantic(np_: NounPhrase, lexicon: SenseLexicon) -> List[Feature]:
    """One sense feature per sense class of the NP head lemma (lowercased)."""
    head = np_.surface.split()[-1].lower()
    return [Feature("SeF", f"sense:{cls}") for cls in lexicon.senses(head)]


# ---------------------------------------------------------------------------
# Contextual embeddings (count-based, deterministic)


def _ppmi_svd_embeddings(pool: Pool, dims: int, window: int) -> Dict[str, np.ndarray]:
    """Positive-PMI token/context matrix factorized by truncated SVD."""
    vocab = sorted({t.surface for s in pool for t in s.tokens})
    index = {w: i for i, w in enumerate(vocab)}
    if not vocab:
        return {}
    counts = np.zeros((len(vocab), len(vocab)))
    for sentence in pool:
        words = sentence.surfaces
        for i, w in enumerate(words):
            wi = index[w]
            for j in range(max(0, i - window), min(len(words), i + window + 1)):
                if j != i:
                    counts[wi, index[words[j]]] += 1.0
    total = counts.sum()
    if total == 0:
        return {w: np.zeros(1) for w in vocab}
    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log(counts * total / (row @ col))
    pmi[~np.isfinite(pmi)] = 0.0
    pmi[pmi < 0] = 0.0
    k = min(dims, len(vocab))
    u, s, _vt = np.linalg.svd(pmi, full_matrices=False)
    emb = u[:, :k] * np.sqrt(s[:k])
    return {w: emb[index[w]] for w in vocab}


def contextual(pool: Pool, nps: Sequence[NounPhrase], dims: int = 50,
               buckets: int = 10, window: int = 2) -> List[FeatureCooc]:
    """CF features: per-NP mean token embedding, quantile-bucketed per dim.

    Converting dense vectors to ``cf:<dim>:<bin>`` keys lets the
    contextual family participate in the bipartite graph like any other.
    """
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if buckets < 2:
        raise ValueError("buckets must be >= 2")
    if len(pool) < 2:
        warnings.warn("pool too small to estimate co-occurrences; no CF features")
        return []
    if not nps:
        return []
    emb = _ppmi_svd_embeddings(pool, dims, window)
    dim = len(next(iter(emb.values())))
    vectors = np.stack([
        np.mean([emb[w] for w in np_.surface.split() if w in emb], axis=0)
        if any(w in emb for w in np_.surface.split()) else np.zeros(dim)
        for np_ in nps
    ])
    coocs: List[FeatureCooc] = []
    quantiles = np.linspace(0, 1, buckets + 1)[1:-1]
    for d in range(vectors.shape[1]):
        edges = np.quantile(vectors[:, d], quantiles)
        bins = np.digitize(vectors[:, d], edges)
        for np_, b in zip(nps, bins):
            coocs.append(FeatureCooc(np_.surface, Feature("CF", f"cf:{d}:{int(b)}"),
                                     np_.count))
    return coocs


# ---------------------------------------------------------------------------
# Full pipeline


def featurize_all(pool: Pool, nps: Sequence[NounPhrase],
                  lexicon: Optional[SenseLexicon] = None,
                  config: Optional[FeaturizeConfig] = None) -> List[FeatureCooc]:
    """Union of all enabled families over all NP occurrences.

    Counts aggregate across occurrences; output order is deterministic
    (np surface, family, value).
    """
    lexicon = lexicon or SenseLexicon()
    config = config or FeaturizeConfig()
    counter: Counter = Counter()

    for np_ in nps:
        per_occurrence: List[Feature] = []
        if "LF_OF" in config.families or "LF_WS" in config.families:
            lf = lexical_features(np_.surface.split(), np_.surface)
            per_occurrence.extend(f for f in lf if f.family in config.families)
        if "SeF" in config.families:
            per_occurrence.extend(semantic(np_, lexicon))
        for feat in per_occurrence:
            counter[(np_.surface, feat)] += np_.count
        for span in np_.occurrences:
            sentence = pool.by_id(span.sentence_id)
            if "LS" in config.families:
                counter[(np_.surface, lexico_syntactic(span, sentence))] += 1
            if "SF" in config.families:
                for feat in syntactic(span, sentence):
                    counter[(np_.surface, feat)] += 1

    coocs = [FeatureCooc(surface, feat, count)
             for (surface, feat), count in counter.items()]
    if "CF" in config.families:
        with warnings.catch_warnings():
            if len(pool) < 2:
                warnings.simplefilter("ignore")
            coocs.extend(contextual(pool, nps, config.cf_dims,
                                    config.cf_buckets, config.cf_window))
    coocs.sort(key=lambda c: (c.np_surface, c.feature.family, c.feature.value))
    return coocs
