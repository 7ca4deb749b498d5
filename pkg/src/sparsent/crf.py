"""Linear-chain CRF for single-class BIO tagging.

Sequence score for labels y over a T-token sentence:

    score(y) = start[y_0] + sum_t emit(t, y_t) + sum_t trans[y_{t-1}, y_t]

with emit(t, l) = sum of weights of the token features firing at t for
label l. Training maximizes the L2-regularized conditional log-likelihood
with L-BFGS; decoding offers exact Viterbi and exact top-n sequences with
true conditional probabilities via the partition function.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .corpus import Sentence, is_valid_bio
from .featurize import long_word_shape, short_word_shape

LABELS = ("B", "I", "O")
N_LABELS = 3

MODEL_SCHEMA_VERSION = 1

ALL_TEMPLATES = (
    "word", "lower", "lws", "sws", "prefix", "suffix",
    "context-words", "context-shapes", "lexicon",
)


class ModelFileError(ValueError):
    """Raised when a persisted model file is corrupt or version-mismatched."""


@dataclass(frozen=True)
class FeatureTemplateSet:
    """Ordered token-feature templates; ordering fixes feature indices."""
    templates: Tuple[str, ...] = ALL_TEMPLATES
    window_radius: int = 2

    def __post_init__(self):
        unknown = set(self.templates) - set(ALL_TEMPLATES)
        if unknown:
            raise ValueError(f"unknown templates: {sorted(unknown)}")


@dataclass
class TrainConfig:
    l2_sigma: float = 1.0
    max_iter: int = 200
    tol: float = 1e-5


@dataclass
class NBest:
    sequences: List[List[str]]
    probs: List[float]  # conditional p(y|s), non-increasing, not renormalized


def token_features(sentence: Sentence, t: int, templates: FeatureTemplateSet,
                   lexicon: FrozenSet[str] = frozenset()) -> List[str]:
    """Feature strings firing at position t (label-independent)."""
    toks = sentence.tokens
    word = toks[t].surface
    feats: List[str] = []
    tset = templates.templates
    if "word" in tset:
        feats.append(f"w0={word}")
    if "lower" in tset:
        feats.append(f"low0={word.lower()}")
    if "lws" in tset:
        feats.append(f"lws0={long_word_shape(word)}")
    if "sws" in tset:
        feats.append(f"sws0={short_word_shape(word)}")
    if "prefix" in tset:
        for n in range(1, 5):
            if len(word) >= n:
                feats.append(f"pre{n}={word[:n]}")
    if "suffix" in tset:
        for n in range(1, 5):
            if len(word) >= n:
                feats.append(f"suf{n}={word[-n:]}")
    if "context-words" in tset:
        r = templates.window_radius
        for off in range(-r, r + 1):
            if off == 0:
                continue
            j = t + off
            w = toks[j].surface if 0 <= j < len(toks) else ("<BOS>" if j < 0 else "<EOS>")
            feats.append(f"w{off:+d}={w}")
    if "context-shapes" in tset:
        for off in (-1, 1):
            j = t + off
            w = toks[j].surface if 0 <= j < len(toks) else ("<BOS>" if j < 0 else "<EOS>")
            feats.append(f"lws{off:+d}={long_word_shape(w)}")
    if "lexicon" in tset and word.lower() in lexicon:
        feats.append("in-lexicon")
    return feats


@dataclass
class SequenceModel:
    feature_index: Dict[str, int]
    theta: np.ndarray  # flattened (emission (F,3), trans (3,3), start (3,))
    templates: FeatureTemplateSet = field(default_factory=FeatureTemplateSet)
    l2_sigma: float = 1.0
    lexicon: FrozenSet[str] = frozenset()

    def __post_init__(self):
        expected = len(self.feature_index) * N_LABELS + N_LABELS * N_LABELS + N_LABELS
        if self.theta.shape != (expected,):
            raise ValueError(
                f"theta has shape {self.theta.shape}, expected ({expected},)")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")

    # --- parameter views -------------------------------------------------
    @property
    def _n_feats(self) -> int:
        return len(self.feature_index)

    @property
    def emission_weights(self) -> np.ndarray:
        return self.theta[: self._n_feats * N_LABELS].reshape(self._n_feats, N_LABELS)

    @property
    def transition_weights(self) -> np.ndarray:
        o = self._n_feats * N_LABELS
        return self.theta[o: o + 9].reshape(N_LABELS, N_LABELS)

    @property
    def start_weights(self) -> np.ndarray:
        return self.theta[-N_LABELS:]

    # --- scoring ----------------------------------------------------------
    def feature_ids(self, sentence: Sentence) -> List[List[int]]:
        idx = self.feature_index
        return [
            [idx[f] for f in token_features(sentence, t, self.templates, self.lexicon)
             if f in idx]
            for t in range(len(sentence))
        ]

    def emissions(self, sentence: Sentence) -> np.ndarray:
        """(T, 3) emission score matrix."""
        fids = self.feature_ids(sentence)
        W = self.emission_weights
        out = np.zeros((len(fids), N_LABELS))
        for t, ids in enumerate(fids):
            if ids:
                out[t] = W[ids].sum(axis=0)
        return out

    def sequence_score(self, sentence: Sentence, labels: Sequence[str]) -> float:
        """Unnormalized log score of a label sequence."""
        if len(labels) != len(sentence):
            raise ValueError("label/token length mismatch")
        E = self.emissions(sentence)
        trans = self.transition_weights
        start = self.start_weights
        ids = [LABELS.index(l) for l in labels]
        score = start[ids[0]] + E[0, ids[0]]
        for t in range(1, len(ids)):
            score += trans[ids[t - 1], ids[t]] + E[t, ids[t]]
        return float(score)

    def log_partition(self, sentence: Sentence) -> float:
        return _forward_log_z(self.emissions(sentence), self.transition_weights,
                              self.start_weights)

    def log_prob(self, sentence: Sentence, labels: Sequence[str]) -> float:
        return self.sequence_score(sentence, labels) - self.log_partition(sentence)

    # --- persistence --------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "schema_version": MODEL_SCHEMA_VERSION,
            "feature_index": self.feature_index,
            "theta": self.theta.tolist(),
            "templates": list(self.templates.templates),
            "window_radius": self.templates.window_radius,
            "l2_sigma": self.l2_sigma,
            "lexicon": sorted(self.lexicon),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SequenceModel":
        if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ModelFileError(
                f"model schema version {doc.get('schema_version')} != {MODEL_SCHEMA_VERSION}")
        return cls(
            feature_index=dict(doc["feature_index"]),
            theta=np.asarray(doc["theta"], dtype=float),
            templates=FeatureTemplateSet(tuple(doc["templates"]), doc["window_radius"]),
            l2_sigma=doc["l2_sigma"],
            lexicon=frozenset(doc["lexicon"]),
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str) -> "SequenceModel":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ModelFileError(f"{path}: not a valid model file: {exc}") from exc
        return cls.from_json(doc)


# ---------------------------------------------------------------------------
# Training


def _build_feature_index(sentences: Sequence[Sentence], templates: FeatureTemplateSet,
                         lexicon: FrozenSet[str]) -> Dict[str, int]:
    index: Dict[str, int] = {}
    for sentence in sentences:
        for t in range(len(sentence)):
            for f in token_features(sentence, t, templates, lexicon):
                if f not in index:
                    index[f] = len(index)
    return index


def _forward_log_z(E: np.ndarray, trans: np.ndarray, start: np.ndarray) -> float:
    alpha = start + E[0]
    for t in range(1, len(E)):
        alpha = logsumexp(alpha[:, None] + trans, axis=0) + E[t]
    return float(logsumexp(alpha))


def _lse(M: np.ndarray, axis: int) -> np.ndarray:
    m = M.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.exp(M - m).sum(axis=axis))


class _Dataset:
    """Training sentences bucketed by length for vectorized forward-backward.

    Each bucket holds a sparse (S*T, F) token-feature incidence matrix and
    an (S, T) gold-label matrix.
    """

    def __init__(self, items: Sequence[Tuple[List[List[int]], List[int]]], n_feats: int):
        from scipy.sparse import csr_matrix

        self.n_feats = n_feats
        by_len: Dict[int, List[Tuple[List[List[int]], List[int]]]] = {}
        for fids, yids in items:
            by_len.setdefault(len(fids), []).append((fids, yids))
        self.buckets = []
        for T in sorted(by_len):
            group = by_len[T]
            S = len(group)
            rows, cols = [], []
            for si, (fids, _) in enumerate(group):
                for t, ids in enumerate(fids):
                    rows.extend([si * T + t] * len(ids))
                    cols.extend(ids)
            X = csr_matrix(
                (np.ones(len(rows)), (rows, cols)), shape=(S * T, max(n_feats, 1)))
            Y = np.array([yids for _, yids in group], dtype=int)
            self.buckets.append((T, S, X, Y))


def _neg_ll_and_grad(theta: np.ndarray, dataset: _Dataset, l2_sigma: float):
    """Negative penalized log-likelihood and its gradient."""
    n_feats = dataset.n_feats
    W = theta[: n_feats * N_LABELS].reshape(n_feats, N_LABELS)
    trans = theta[n_feats * N_LABELS: n_feats * N_LABELS + 9].reshape(N_LABELS, N_LABELS)
    start = theta[-N_LABELS:]

    ll = 0.0
    grad_W = np.zeros_like(W)
    grad_trans = np.zeros_like(trans)
    grad_start = np.zeros(N_LABELS)

    for T, S, X, Y in dataset.buckets:
        E = (X @ W).reshape(S, T, N_LABELS) if n_feats else np.zeros((S, T, N_LABELS))

        alphas = np.empty((S, T, N_LABELS))
        alphas[:, 0] = start + E[:, 0]
        for t in range(1, T):
            alphas[:, t] = _lse(alphas[:, t - 1, :, None] + trans, axis=1) + E[:, t]
        log_z = _lse(alphas[:, T - 1], axis=1)  # (S,)

        betas = np.zeros((S, T, N_LABELS))
        for t in range(T - 2, -1, -1):
            betas[:, t] = _lse(trans[None] + (E[:, t + 1] + betas[:, t + 1])[:, None, :],
                               axis=2)

        srange = np.arange(S)
        gold = start[Y[:, 0]] + E[srange[:, None], np.arange(T)[None, :], Y].sum(axis=1)
        if T > 1:
            gold += trans[Y[:, :-1], Y[:, 1:]].sum(axis=1)
        ll += float((gold - log_z).sum())

        node = np.exp(alphas + betas - log_z[:, None, None])  # (S, T, 3)
        np.add.at(grad_start, Y[:, 0], 1.0)
        grad_start -= node[:, 0].sum(axis=0)

        if n_feats:
            resid = -node.reshape(S * T, N_LABELS)
            resid[np.arange(S * T), Y.ravel()] += 1.0
            grad_W += X.T @ resid

        if T > 1:
            np.add.at(grad_trans, (Y[:, :-1].ravel(), Y[:, 1:].ravel()), 1.0)
            for t in range(1, T):
                edge = np.exp(alphas[:, t - 1, :, None] + trans[None]
                              + (E[:, t] + betas[:, t])[:, None, :]
                              - log_z[:, None, None])
                grad_trans -= edge.sum(axis=0)

    grad = np.concatenate([grad_W.ravel(), grad_trans.ravel(), grad_start])
    ll -= float(theta @ theta) / (2.0 * l2_sigma ** 2)
    grad -= theta / l2_sigma ** 2
    return -ll, -grad


def train(labeled: Sequence[Sentence], config: Optional[TrainConfig] = None,
          templates: Optional[FeatureTemplateSet] = None,
          lexicon: FrozenSet[str] = frozenset()) -> SequenceModel:
    """Fit weights by L-BFGS on the penalized conditional log-likelihood.

    Deterministic for identical inputs: the feature index is built in
    encounter order and optimization starts from zero.
    """
    if not labeled:
        raise ValueError("need at least one labeled sentence")
    config = config or TrainConfig()
    templates = templates or FeatureTemplateSet()

    for s in labeled:
        if s.working is None or not is_valid_bio(s.working):
            raise ValueError(f"sentence {s.id} lacks a valid BIO working labeling")
    if all(all(l == "O" for l in s.working) for s in labeled):
        warnings.warn("training set contains no entity labels; "
                      "the model will predict all O")

    index = _build_feature_index(labeled, templates, lexicon)
    data = []
    for s in labeled:
        fids = [[index[f] for f in token_features(s, t, templates, lexicon)]
                for t in range(len(s))]
        yids = [LABELS.index(l) for l in s.working]
        data.append((fids, yids))

    dataset = _Dataset(data, len(index))
    n_params = len(index) * N_LABELS + 9 + N_LABELS
    x0 = np.zeros(n_params)
    result = minimize(
        _neg_ll_and_grad, x0, args=(dataset, config.l2_sigma),
        method="L-BFGS-B", jac=True,
        options={"maxiter": config.max_iter, "gtol": config.tol, "ftol": 1e-12},
    )
    return SequenceModel(index, result.x, templates, config.l2_sigma, lexicon)


# ---------------------------------------------------------------------------
# Decoding


def decode(model: SequenceModel, sentence: Sentence) -> List[str]:
    """Viterbi argmax labeling; backpointer ties break by label order B<I<O."""
    if len(sentence) == 0:
        return []
    E = model.emissions(sentence)
    trans = model.transition_weights
    T = len(E)
    delta = model.start_weights + E[0]
    back = np.zeros((T, N_LABELS), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + trans  # (from, to)
        back[t] = np.argmax(cand, axis=0)  # argmax takes the first max: B<I<O
        delta = cand[back[t], np.arange(N_LABELS)] + E[t]
    best = int(np.argmax(delta))
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return [LABELS[i] for i in path]


def nbest(model: SequenceModel, sentence: Sentence, n: int) -> NBest:
    """Exact top-n distinct label sequences with true conditional probabilities.

    Standard k-best Viterbi over the trellis: each state (t, label) keeps
    its n best prefix scores with backpointers.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    T = len(sentence)
    if T == 0:
        return NBest([[]], [1.0])
    E = model.emissions(sentence)
    trans = model.transition_weights
    log_z = _forward_log_z(E, trans, model.start_weights)

    # lists[t][label] = list of (score, prev_label, prev_rank), best first
    lists: List[List[List[Tuple[float, int, int]]]] = [
        [[] for _ in range(N_LABELS)] for _ in range(T)
    ]
    for l in range(N_LABELS):
        lists[0][l] = [(float(model.start_weights[l] + E[0, l]), -1, -1)]
    for t in range(1, T):
        for l in range(N_LABELS):
            cands = [
                (entry[0] + trans[pl, l] + E[t, l], pl, r)
                for pl in range(N_LABELS)
                for r, entry in enumerate(lists[t - 1][pl])
            ]
            cands.sort(key=lambda c: (-c[0], c[1], c[2]))
            lists[t][l] = cands[:n]

    finals = [
        (entry[0], l, r)
        for l in range(N_LABELS)
        for r, entry in enumerate(lists[T - 1][l])
    ]
    finals.sort(key=lambda c: (-c[0], c[1], c[2]))

    sequences: List[List[str]] = []
    probs: List[float] = []
    for score, l, r in finals[:n]:
        path = []
        t, cur_l, cur_r = T - 1, l, r
        while t >= 0:
            path.append(cur_l)
            _score, pl, pr = lists[t][cur_l][cur_r]
            cur_l, cur_r = pl, pr
            t -= 1
        path.reverse()
        sequences.append([LABELS[i] for i in path])
        probs.append(math.exp(score - log_z))
    return NBest(sequences, probs)


def sequence_entropy(model: SequenceModel, sentence: Sentence, n: int,
                     nb: Optional[NBest] = None) -> float:
    """Entropy of the renormalized top-n sequence distribution, over log n.

    The division by log n maps the value into [0, 1] so that pool means
    (and the derived confidence score) stay comparable across n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        warnings.warn("sequence entropy of a single sequence is 0 by definition")
        return 0.0
    nb = nb or nbest(model, sentence, n)
    p = np.asarray(nb.probs[:n])
    q = p / p.sum()
    h = float(-(q * np.log(np.where(q > 0, q, 1.0))).sum())
    return h / math.log(n)


def sequence_self_info(model: SequenceModel, sentence: Sentence, i: int,
                       nb: Optional[NBest] = None) -> float:
    """Self-information -log p of the i-th best sequence (1-based rank)."""
    if i < 1:
        raise ValueError("rank must be >= 1")
    nb = nb or nbest(model, sentence, max(i, 2))
    if len(nb.probs) < i:
        raise ValueError(f"only {len(nb.probs)} sequences exist; rank {i} requested")
    return -math.log(nb.probs[i - 1])
