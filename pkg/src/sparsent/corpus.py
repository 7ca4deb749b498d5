"""Corpus ingestion, BIO label utilities, and session persistence.

Supported input formats:

* CoNLL-2003: whitespace-separated columns ``TOKEN POS CHUNK NER``,
  blank line = sentence break, ``-DOCSTART-`` lines skipped.
* CoNLL-U: 10 tab-separated columns; FORM, UPOS (or XPOS), HEAD and
  DEPREL are consumed; NER spans optionally in MISC as ``NE=B-<class>``.

Session files are single versioned JSON documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Tuple

SESSION_SCHEMA_VERSION = 1

UNLABELED = "unlabeled"
HUMAN = "human-labeled"
AUTO = "auto-labeled"

_STATES = (UNLABELED, HUMAN, AUTO)


class CorpusFormatError(ValueError):
    """Raised when an input file does not parse as the declared format."""


class SessionFileError(ValueError):
    """Raised when a persisted session file is corrupt or version-mismatched."""


@dataclass
class Token:
    surface: str
    pos: str
    lemma: Optional[str] = None
    head: Optional[int] = None  # 1-based index into the sentence, 0 = root
    deprel: Optional[str] = None

    def __post_init__(self):
        if not self.surface:
            raise ValueError("token surface must be non-empty")
        if not self.pos:
            raise ValueError("token pos must be non-empty")


@dataclass
class Sentence:
    id: int
    tokens: List[Token]
    gold: Optional[List[str]] = None  # tag per token; harness-only
    state: str = UNLABELED
    working: Optional[List[str]] = None

    def __post_init__(self):
        if self.state not in _STATES:
            raise ValueError(f"unknown sentence state {self.state!r}")
        if (self.working is not None) != (self.state != UNLABELED):
            raise ValueError("working labels present iff sentence is labeled")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def surfaces(self) -> List[str]:
        return [t.surface for t in self.tokens]


@dataclass
class Pool:
    sentences: List[Sentence]
    entity_class: str = ""

    def __post_init__(self):
        ids = [s.id for s in self.sentences]
        if ids != list(range(len(ids))):
            raise ValueError("sentence ids must be unique and dense from 0")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def by_id(self, sid: int) -> Sentence:
        return self.sentences[sid]

    def unlabeled(self) -> List[Sentence]:
        return [s for s in self.sentences if s.state == UNLABELED]

    def labeled(self) -> List[Sentence]:
        return [s for s in self.sentences if s.state != UNLABELED]

    def stripped(self) -> "Pool":
        """Copy with gold labels removed (leakage guard for model code)."""
        return Pool(
            [replace(s, gold=None, tokens=list(s.tokens),
                     working=list(s.working) if s.working else None)
             for s in self.sentences],
            self.entity_class,
        )


# ---------------------------------------------------------------------------
# BIO utilities


def bio_spans(labels: Iterable[str]) -> List[Tuple[int, int, str]]:
    """BIO tags -> (start, end, class) spans, end exclusive.

    Accepts both classed tags (``B-LOC``) and plain single-class tags
    (``B``/``I``/``O``, class reported as ""). A dangling I (after O or a
    span of another class) opens a new span, the standard CoNLL repair.
    """
    labels = list(labels)
    spans: List[Tuple[int, int, str]] = []
    start = None
    cls = None
    for i, tag in enumerate(labels):
        if tag == "O":
            if start is not None:
                spans.append((start, i, cls))
                start = None
            continue
        prefix, _, tagcls = tag.partition("-")
        if prefix == "B" or start is None or tagcls != cls:
            if start is not None:
                spans.append((start, i, cls))
            start, cls = i, tagcls
    if start is not None:
        spans.append((start, len(labels), cls))
    return spans


def spans_to_bio(spans: Iterable[Tuple[int, int]], length: int) -> List[str]:
    """Non-overlapping (start, end) spans -> single-class BIO tags."""
    labels = ["O"] * length
    for start, end in sorted(spans):
        if not (0 <= start < end <= length):
            raise ValueError(f"span ({start}, {end}) out of bounds for length {length}")
        if any(l != "O" for l in labels[start:end]):
            raise ValueError(f"span ({start}, {end}) overlaps another span")
        labels[start] = "B"
        for i in range(start + 1, end):
            labels[i] = "I"
    return labels


def is_valid_bio(labels: Iterable[str]) -> bool:
    prev = "O"
    for tag in labels:
        if tag not in ("B", "I", "O"):
            return False
        if tag == "I" and prev == "O":
            return False
        prev = tag
    return True


def repair_bio(labels: Iterable[str]) -> List[str]:
    """Turn any I that follows O (or starts the sentence) into B."""
    out = []
    prev = "O"
    for tag in labels:
        if tag == "I" and prev == "O":
            tag = "B"
        out.append(tag)
        prev = tag
    return out


def bio_to_io(labels: Iterable[str]) -> List[str]:
    return ["I" if t in ("B", "I") else "O" for t in labels]


def io_to_bio(labels: Iterable[str]) -> List[str]:
    out = []
    prev = "O"
    for tag in labels:
        out.append("B" if tag == "I" and prev == "O" else tag)
        prev = tag
    return out


# ---------------------------------------------------------------------------
# Loading


def load_corpus(path: str, format: str = "conll2003", use_xpos: bool = False) -> Pool:
    """Parse a pre-tagged corpus file into a Pool of unlabeled sentences.

    Gold NER tags (if present in the file) are kept verbatim per token;
    use restrict_to_class to reduce them to single-class BIO.
    """
    if format == "conll2003":
        return _load_conll2003(path)
    if format == "conllu":
        return _load_conllu(path, use_xpos=use_xpos)
    raise CorpusFormatError(f"unknown corpus format {format!r}")


def _load_conll2003(path: str) -> Pool:
    sentences: List[Sentence] = []
    tokens: List[Token] = []
    tags: List[str] = []
    any_tags = False

    def flush():
        nonlocal tokens, tags, any_tags
        if tokens:
            sentences.append(Sentence(len(sentences), tokens,
                                      gold=tags if any_tags else None))
        tokens, tags, any_tags = [], [], False

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            parts = line.split()
            if parts[0] == "-DOCSTART-":
                flush()
                continue
            if len(parts) < 2:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected at least TOKEN POS columns, got {line!r}")
            surface, pos = parts[0], parts[1]
            ner = parts[3] if len(parts) >= 4 else "O"
            if ner != "O" and not ner.startswith(("B-", "I-")):
                raise CorpusFormatError(
                    f"{path}:{lineno}: unknown label column value {ner!r}")
            tokens.append(Token(surface, pos))
            tags.append(ner)
            if len(parts) >= 4:
                any_tags = True  # an explicit label column means gold annotations
    flush()
    return Pool(sentences)


def _load_conllu(path: str, use_xpos: bool = False) -> Pool:
    sentences: List[Sentence] = []
    tokens: List[Token] = []
    tags: List[str] = []
    any_tags = False

    def flush():
        nonlocal tokens, tags, any_tags
        if tokens:
            sentences.append(Sentence(len(sentences), tokens,
                                      gold=tags if any_tags else None))
        tokens, tags, any_tags = [], [], False

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise CorpusFormatError(
                    f"{path}:{lineno}: expected 10 tab-separated columns, got {len(cols)}")
            if "-" in cols[0] or "." in cols[0]:
                continue  # multiword-token / empty-node lines
            form = cols[1]
            pos = cols[4] if use_xpos else cols[3]
            lemma = cols[2] if cols[2] != "_" else None
            head = int(cols[6]) if cols[6] != "_" else None
            deprel = cols[7] if cols[7] != "_" else None
            ner = "O"
            for item in cols[9].split("|"):
                if item.startswith("NE="):
                    ner = item[3:]
            if ner != "O" and not ner.startswith(("B-", "I-")):
                raise CorpusFormatError(
                    f"{path}:{lineno}: unknown NE value {ner!r} in MISC")
            tokens.append(Token(form, pos, lemma=lemma, head=head, deprel=deprel))
            tags.append(ner)
            if ner != "O":
                any_tags = True
    flush()
    return Pool(sentences)


def restrict_to_class(pool: Pool, entity_class: str) -> Pool:
    """Keep only gold spans of `entity_class`, as plain single-class BIO.

    Idempotent: a pool already restricted to `entity_class` is unchanged.
    """
    out: List[Sentence] = []
    for s in pool.sentences:
        gold = None
        if s.gold is not None:
            keep = []
            for start, end, cls in bio_spans(s.gold):
                effective = cls if cls else pool.entity_class
                if effective == entity_class:
                    keep.append((start, end))
            gold = spans_to_bio(keep, len(s.tokens))
        out.append(replace(s, gold=gold, tokens=list(s.tokens),
                           working=list(s.working) if s.working else None))
    return Pool(out, entity_class)


def write_conll2003(pool: Pool, path: str, scheme: str = "bio",
                    use_working: bool = True) -> None:
    """Emit TOKEN POS CHUNK NER lines; NER from working labels (or gold)."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in pool.sentences:
            labels = s.working if (use_working and s.working) else (s.gold or ["O"] * len(s))
            if scheme == "io":
                labels = bio_to_io(labels)
            for tok, tag in zip(s.tokens, labels):
                if tag in ("B", "I") and pool.entity_class:
                    tag = f"{tag}-{pool.entity_class}"
                fh.write(f"{tok.surface} {tok.pos} O {tag}\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# Serialization helpers (sessions are saved by active.SessionState via these)


def token_to_json(t: Token) -> dict:
    d = {"surface": t.surface, "pos": t.pos}
    if t.lemma is not None:
        d["lemma"] = t.lemma
    if t.head is not None:
        d["head"] = t.head
    if t.deprel is not None:
        d["deprel"] = t.deprel
    return d


def token_from_json(d: dict) -> Token:
    return Token(d["surface"], d["pos"], d.get("lemma"), d.get("head"), d.get("deprel"))


def sentence_to_json(s: Sentence) -> dict:
    return {
        "id": s.id,
        "tokens": [token_to_json(t) for t in s.tokens],
        "gold": s.gold,
        "state": s.state,
        "working": s.working,
    }


def sentence_from_json(d: dict) -> Sentence:
    return Sentence(d["id"], [token_from_json(t) for t in d["tokens"]],
                    d.get("gold"), d.get("state", UNLABELED), d.get("working"))


def pool_to_json(pool: Pool) -> dict:
    return {"entity_class": pool.entity_class,
            "sentences": [sentence_to_json(s) for s in pool.sentences]}


def pool_from_json(d: dict) -> Pool:
    return Pool([sentence_from_json(s) for s in d["sentences"]], d["entity_class"])


def save_session(state, path: str) -> None:
    """Persist a SessionState as a versioned JSON document."""
    doc = {"schema_version": SESSION_SCHEMA_VERSION, "session": state.to_json()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_session(path: str):
    """Load a SessionState; raises SessionFileError on corruption/version skew."""
    from .active import SessionState

    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SessionFileError(f"{path}: not a valid session file: {exc}") from exc
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise SessionFileError(f"{path}: missing schema_version")
    if doc["schema_version"] != SESSION_SCHEMA_VERSION:
        raise SessionFileError(
            f"{path}: schema version {doc['schema_version']} != {SESSION_SCHEMA_VERSION}")
    try:
        return SessionState.from_json(doc["session"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SessionFileError(f"{path}: corrupt session payload: {exc}") from exc
