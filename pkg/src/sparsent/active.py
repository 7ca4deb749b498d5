"""Incremental learning controller: sampling, auto-annotation, feedback.

Annotation modes:

* AR        - uniform random sampling (baseline)
* EAL       - entropy-based sampling after an ESE bootstrap
* FA/HFA/UFA - EAL plus thresholded auto-annotation at t = 0.10/0.15/0.20

Feedback signals: sigma = 1 - mean normalized sequence entropy over the
evaluation set, and estimated coverage = fraction of expected entities
already annotated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set

import numpy as np

from . import corpus, crf
from .corpus import AUTO, HUMAN, UNLABELED, Pool, Sentence, bio_spans, is_valid_bio, repair_bio
from .crf import SequenceModel, TrainConfig
from .npex import NounPhrase

MODES = ("AR", "EAL", "FA", "HFA", "UFA")
MODE_THRESHOLDS = {"FA": 0.10, "HFA": 0.15, "UFA": 0.20}
AUTO_MODES = tuple(MODE_THRESHOLDS)


class NoModelError(RuntimeError):
    """Entropy-based operations need a trained model; bootstrap via ESE first."""


@dataclass
class MetricPoint:
    iteration: int
    labeled_count: int
    auto_count: int
    sigma: float
    estimated_coverage: float
    f_score: Optional[float] = None  # populated by the harness only

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "labeled_count": self.labeled_count,
            "auto_count": self.auto_count,
            "sigma": self.sigma,
            "estimated_coverage": self.estimated_coverage,
            "f_score": self.f_score,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MetricPoint":
        return cls(d["iteration"], d["labeled_count"], d["auto_count"],
                   d["sigma"], d["estimated_coverage"], d.get("f_score"))


@dataclass
class SessionState:
    pool: Pool
    mode: str = "EAL"
    batch_size: int = 100
    n: int = 10  # n-best depth for entropy scoring
    threshold: Optional[float] = None
    rng_seed: int = 0
    model: Optional[SequenceModel] = None
    confirmed_entities: Set[str] = field(default_factory=set)
    history: List[MetricPoint] = field(default_factory=list)
    pending_batch: List[int] = field(default_factory=list)
    iteration: int = 0
    train_config: TrainConfig = field(default_factory=TrainConfig)
    sigma_over_full_pool: bool = False
    warm_start: bool = False
    # n-best results keyed by sentence id, valid for the current model only;
    # never serialized
    _nbest_cache: Dict[int, crf.NBest] = field(default_factory=dict, repr=False,
                                               compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.mode in AUTO_MODES and self.threshold is None:
            self.threshold = MODE_THRESHOLDS[self.mode]
        if self.mode not in AUTO_MODES and self.threshold is not None:
            raise ValueError(f"mode {self.mode} takes no auto-annotation threshold")

    # --- counters ---------------------------------------------------------
    @property
    def human_count(self) -> int:
        return sum(1 for s in self.pool if s.state == HUMAN)

    @property
    def auto_count(self) -> int:
        return sum(1 for s in self.pool if s.state == AUTO)

    # --- persistence --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "pool": corpus.pool_to_json(self.pool),
            "mode": self.mode,
            "batch_size": self.batch_size,
            "n": self.n,
            "threshold": self.threshold,
            "rng_seed": self.rng_seed,
            "model": self.model.to_json() if self.model else None,
            "confirmed_entities": sorted(self.confirmed_entities),
            "history": [p.to_json() for p in self.history],
            "pending_batch": list(self.pending_batch),
            "iteration": self.iteration,
            "train_config": {"l2_sigma": self.train_config.l2_sigma,
                             "max_iter": self.train_config.max_iter,
                             "tol": self.train_config.tol},
            "sigma_over_full_pool": self.sigma_over_full_pool,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SessionState":
        tc = d["train_config"]
        return cls(
            pool=corpus.pool_from_json(d["pool"]),
            mode=d["mode"],
            batch_size=d["batch_size"],
            n=d["n"],
            threshold=d["threshold"],
            rng_seed=d["rng_seed"],
            model=SequenceModel.from_json(d["model"]) if d["model"] else None,
            confirmed_entities=set(d["confirmed_entities"]),
            history=[MetricPoint.from_json(p) for p in d["history"]],
            pending_batch=list(d["pending_batch"]),
            iteration=d["iteration"],
            train_config=TrainConfig(tc["l2_sigma"], tc["max_iter"], tc["tol"]),
            sigma_over_full_pool=d.get("sigma_over_full_pool", False),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SessionState):
            return NotImplemented
        return self.to_json() == other.to_json()


# ---------------------------------------------------------------------------
# Scoring helpers


def _sentence_nbest(state: SessionState, sentence: Sentence) -> crf.NBest:
    nb = state._nbest_cache.get(sentence.id)
    if nb is None:
        nb = crf.nbest(state.model, sentence, max(state.n, 2))
        state._nbest_cache[sentence.id] = nb
    return nb


def _sentence_nse(state: SessionState, sentence: Sentence) -> float:
    return crf.sequence_entropy(state.model, sentence, state.n,
                                nb=_sentence_nbest(state, sentence))


def sample_batch(state: SessionState) -> List[Sentence]:
    """Pick the next batch: random (AR) or highest-entropy-first (other modes)."""
    unlabeled = state.pool.unlabeled()
    if not unlabeled:
        raise ValueError("no unlabeled sentences remain")
    b = min(state.batch_size, len(unlabeled))
    if state.mode == "AR":
        rng = np.random.default_rng((state.rng_seed, state.iteration))
        picked = [unlabeled[i] for i in sorted(rng.choice(len(unlabeled), b, replace=False))]
    else:
        if state.model is None:
            raise NoModelError(
                "entropy sampling needs a trained model; run the ESE bootstrap first")
        scored = sorted(unlabeled,
                        key=lambda s: (-_sentence_nse(state, s), s.id))
        picked = scored[:b]
    state.pending_batch = [s.id for s in picked]
    return picked


def bootstrap_from_ese(state: SessionState, confirmed: Sequence[NounPhrase]) -> List[Sentence]:
    """Sentences containing confirmed NPs, most-covered first, up to b.

    Confirmed surfaces feed the model's confirmed-entity lexicon feature.
    """
    if not confirmed:
        raise ValueError("no confirmed noun phrases")
    coverage: Dict[int, int] = {}
    for np_ in confirmed:
        for span in np_.occurrences:
            coverage[span.sentence_id] = coverage.get(span.sentence_id, 0) + 1
    candidates = [sid for sid in coverage
                  if state.pool.by_id(sid).state == UNLABELED]
    candidates.sort(key=lambda sid: (-coverage[sid], sid))
    picked = [state.pool.by_id(sid) for sid in candidates[:state.batch_size]]
    for np_ in confirmed:
        state.confirmed_entities.add(np_.surface)
        for word in np_.surface.split():
            state.confirmed_entities.add(word.lower())
    state.pending_batch = [s.id for s in picked]
    return picked


def auto_annotate(state: SessionState) -> List[Sentence]:
    """Accept the model's own labeling where SE1/SE2 <= threshold.

    SE_i is the self-information of the i-th best sequence. SE2 == 0 is
    rejected (both top sequences certain is contradictory); SE1 == 0 with
    SE2 > 0 is accepted. Human labels are never overwritten.
    """
    if state.model is None:
        raise NoModelError("auto-annotation needs a trained model")
    if state.mode not in AUTO_MODES:
        raise ValueError(f"mode {state.mode} does not auto-annotate")
    accepted: List[Sentence] = []
    for sentence in state.pool.unlabeled():
        nb = _sentence_nbest(state, sentence)
        if len(nb.probs) < 2:
            continue
        se1 = -np.log(nb.probs[0])
        se2 = -np.log(nb.probs[1])
        if se2 <= 0.0:
            continue
        if se1 > 0.0 and se1 / se2 > state.threshold:
            continue
        sentence.working = repair_bio(nb.sequences[0])
        sentence.state = AUTO
        accepted.append(sentence)
    return accepted


def sigma(state: SessionState) -> float:
    """Online confidence: 1 - mean normalized sequence entropy."""
    if state.model is None:
        raise NoModelError("sigma needs a trained model")
    eval_set = (list(state.pool) if state.sigma_over_full_pool
                else state.pool.unlabeled())
    if not eval_set:
        warnings.warn("empty evaluation set; sigma defaults to 1.0")
        return 1.0
    mean_nse = float(np.mean([_sentence_nse(state, s) for s in eval_set]))
    return 1.0 - mean_nse


def _entity_count(labels: Sequence[str]) -> int:
    return len(bio_spans(labels))


def estimated_coverage(state: SessionState) -> float:
    """Annotated entities over expected total entities (annotated + unlabeled).

    The expected entity count of an unlabeled sentence sums, over its
    n-best sequences, probability times the sequence's entity count.
    """
    if state.model is None:
        raise NoModelError("estimated coverage needs a trained model")
    e_done = sum(_entity_count(s.working) for s in state.pool.labeled())
    unlabeled = state.pool.unlabeled()
    if not unlabeled:
        return 1.0
    e_expected = 0.0
    for sentence in unlabeled:
        nb = _sentence_nbest(state, sentence)
        e_expected += sum(p * _entity_count(seq)
                          for p, seq in zip(nb.probs[:state.n],
                                            nb.sequences[:state.n]))
    denom = e_done + e_expected
    if denom == 0.0:
        return 0.0 if e_done == 0 else 1.0
    return e_done / denom


def retrain(state: SessionState) -> None:
    """Fit the model from scratch on all labeled (human + auto) sentences."""
    labeled = [s for s in state.pool.stripped() if s.state != UNLABELED]
    state.model = crf.train(labeled, state.train_config,
                            lexicon=frozenset(state.confirmed_entities))
    state._nbest_cache.clear()


def record_metrics(state: SessionState, f_score: Optional[float] = None) -> MetricPoint:
    point = MetricPoint(
        iteration=state.iteration,
        labeled_count=state.human_count,
        auto_count=state.auto_count,
        sigma=sigma(state),
        estimated_coverage=estimated_coverage(state),
        f_score=f_score,
    )
    state.history.append(point)
    return point


def step(state: SessionState, labels: Dict[int, List[str]]) -> SessionState:
    """One iteration: merge human labels, auto-annotate (FA modes), retrain.

    `labels` must cover exactly the sentences returned by the last
    sample_batch/bootstrap_from_ese call.
    """
    if not state.pending_batch:
        if not state.pool.unlabeled():
            warnings.warn("pool exhausted; step is a no-op")
            return state
        raise ValueError("no batch pending; call sample_batch first")
    if set(labels) != set(state.pending_batch):
        unexpected = sorted(set(labels) - set(state.pending_batch))
        missing = sorted(set(state.pending_batch) - set(labels))
        raise ValueError(
            f"labels must cover exactly the sampled batch "
            f"(unexpected: {unexpected}, missing: {missing})")

    for sid, seq in sorted(labels.items()):
        sentence = state.pool.by_id(sid)
        if len(seq) != len(sentence):
            raise ValueError(f"sentence {sid}: label length mismatch")
        if not is_valid_bio(seq):
            raise ValueError(f"sentence {sid}: invalid BIO sequence")
        sentence.working = list(seq)
        sentence.state = HUMAN

    state.pending_batch = []
    state.iteration += 1
    if state.mode in AUTO_MODES and state.model is not None:
        auto_annotate(state)
    retrain(state)
    record_metrics(state)
    return state
