"""Shared fixtures: tiny corpora and a small trained model reused across tests."""

import pytest

from sparsent import crf
from sparsent.corpus import HUMAN, Pool, Sentence, Token, spans_to_bio


def sent(sid, pairs, spans=()):
    """Build a Sentence from (surface, pos) pairs and gold entity spans."""
    tokens = [Token(w, p) for w, p in pairs]
    return Sentence(sid, tokens, gold=spans_to_bio(spans, len(tokens)))


def labeled(sentence):
    """Mark a sentence human-labeled with its gold labels as working copy."""
    sentence.working = list(sentence.gold)
    sentence.state = HUMAN
    return sentence


@pytest.fixture
def tiny_pool():
    """Six sentences, two entity surfaces, enough signal to memorize."""
    sentences = [
        sent(0, [("Paris", "NNP"), ("is", "VBZ"), ("big", "JJ")], [(0, 1)]),
        sent(1, [("I", "PRP"), ("like", "VBP"), ("Paris", "NNP")], [(2, 3)]),
        sent(2, [("Lyon", "NNP"), ("is", "VBZ"), ("small", "JJ")], [(0, 1)]),
        sent(3, [("the", "DT"), ("river", "NN"), ("bends", "VBZ")], []),
        sent(4, [("we", "PRP"), ("saw", "VBD"), ("Lyon", "NNP")], [(2, 3)]),
        sent(5, [("a", "DT"), ("dull", "JJ"), ("day", "NN")], []),
    ]
    return Pool(sentences, "LOC")


@pytest.fixture(scope="session")
def memorizer_model():
    """Model trained to memorize one three-token sentence."""
    s = Sentence(0, [Token("Paris", "NNP"), Token("is", "VBZ"), Token("big", "JJ")],
                 state=HUMAN, working=["B", "O", "O"])
    return crf.train([s], crf.TrainConfig(max_iter=60))


def random_model(rng, n_feats=6, scale=1.0):
    """SequenceModel with a random feature index and random weights."""
    index = {f"w0=tok{i}": i for i in range(n_feats)}
    n_params = n_feats * 3 + 9 + 3
    theta = rng.normal(scale=scale, size=n_params)
    templates = crf.FeatureTemplateSet(("word",))
    return crf.SequenceModel(index, theta, templates)


def random_sentence(rng, sid, T, n_feats=6):
    toks = [Token(f"tok{int(rng.integers(0, n_feats + 2))}", "NN") for _ in range(T)]
    return Sentence(sid, toks)
