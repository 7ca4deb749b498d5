"""CRF exactness: enumeration oracles, gradients, entropy, persistence."""

import itertools
import math

import numpy as np
import pytest

from sparsent import crf
from sparsent.corpus import HUMAN, Sentence, Token
from sparsent.crf import (
    LABELS, FeatureTemplateSet, ModelFileError, NBest, SequenceModel, TrainConfig,
    decode, nbest, sequence_entropy, sequence_self_info, train,
)
from conftest import random_model, random_sentence


def enumerate_scores(model, sentence):
    """Brute-force (labels, score) over all 3^T sequences."""
    T = len(sentence)
    out = []
    for combo in itertools.product(LABELS, repeat=T):
        out.append((list(combo), model.sequence_score(sentence, combo)))
    return out


def softmax_probs(scores):
    arr = np.array([s for _, s in scores])
    z = np.exp(arr - arr.max())
    return z / z.sum()


class TestExhaustiveOracles:
    def test_partition_function(self):
        rng = np.random.default_rng(0)
        for case in range(25):
            model = random_model(rng)
            s = random_sentence(rng, case, int(rng.integers(1, 9)))
            scores = [sc for _, sc in enumerate_scores(model, s)]
            brute = math.log(sum(math.exp(x) for x in np.array(scores) - max(scores)))
            brute += max(scores)
            assert model.log_partition(s) == pytest.approx(brute, rel=1e-8)

    def test_decode_matches_brute_argmax(self):
        rng = np.random.default_rng(1)
        for case in range(40):
            model = random_model(rng)
            s = random_sentence(rng, case, int(rng.integers(1, 9)))
            scores = enumerate_scores(model, s)
            best = max(scores, key=lambda it: it[1])
            assert decode(model, s) == best[0]

    def test_nbest_matches_enumeration(self):
        rng = np.random.default_rng(2)
        for case in range(40):
            model = random_model(rng)
            s = random_sentence(rng, case, int(rng.integers(1, 9)))
            nb = nbest(model, s, 10)
            scores = enumerate_scores(model, s)
            probs = softmax_probs(scores)
            by_seq = {tuple(seq): float(p) for (seq, _), p in zip(scores, probs)}
            top = sorted(probs, reverse=True)[:10]
            assert len({tuple(seq) for seq in nb.sequences}) == len(nb.sequences)
            for got_seq, got_p, brute_p in zip(nb.sequences, nb.probs, top):
                # the i-th probability matches enumeration, and the returned
                # sequence really has the probability reported for it
                assert got_p == pytest.approx(float(brute_p), abs=1e-8)
                assert got_p == pytest.approx(by_seq[tuple(got_seq)], abs=1e-8)

    def test_nbest_covers_all_sequences_and_sums_to_one(self):
        rng = np.random.default_rng(3)
        model = random_model(rng)
        s = random_sentence(rng, 0, 3)
        nb = nbest(model, s, 100)  # n > 3^3
        assert len(nb.sequences) == 27
        assert sum(nb.probs) == pytest.approx(1.0, abs=1e-8)
        assert all(a >= b - 1e-12 for a, b in zip(nb.probs, nb.probs[1:]))

    def test_nbest_n1_equals_decode(self):
        rng = np.random.default_rng(4)
        model = random_model(rng)
        s = random_sentence(rng, 0, 6)
        assert nbest(model, s, 1).sequences == [decode(model, s)]

    def test_nbest_rejects_bad_n(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ValueError):
            nbest(random_model(rng), random_sentence(rng, 0, 2), 0)


class TestGradient:
    def _dataset(self, rng, n_sents=3):
        sentences = []
        for i in range(n_sents):
            T = int(rng.integers(1, 6))
            s = random_sentence(rng, i, T)
            labels = ["O"] * T
            j = 0
            while j < T:
                if rng.random() < 0.4:
                    labels[j] = "B"
                    if j + 1 < T and rng.random() < 0.5:
                        labels[j + 1] = "I"
                        j += 1
                j += 1
            s.working = labels
            s.state = HUMAN
            sentences.append(s)
        templates = FeatureTemplateSet(("word",))
        index = crf._build_feature_index(sentences, templates, frozenset())
        data = []
        for s in sentences:
            fids = [[index[f] for f in crf.token_features(s, t, templates, frozenset())]
                    for t in range(len(s))]
            data.append((fids, [LABELS.index(l) for l in s.working]))
        return crf._Dataset(data, len(index)), len(index) * 3 + 9 + 3

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        checked = 0
        for _ in range(21):
            dataset, n_params = self._dataset(rng)
            theta = rng.normal(scale=0.5, size=n_params)
            _f, grad = crf._neg_ll_and_grad(theta, dataset, 1.0)
            eps = 1e-6
            fd = np.empty_like(grad)
            for j in range(n_params):
                up, down = theta.copy(), theta.copy()
                up[j] += eps
                down[j] -= eps
                fd[j] = (crf._neg_ll_and_grad(up, dataset, 1.0)[0]
                         - crf._neg_ll_and_grad(down, dataset, 1.0)[0]) / (2 * eps)
            rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
            assert rel < 1e-4
            checked += 1
        assert checked >= 20


class TestTraining:
    def test_memorizes_single_sentence(self, memorizer_model):
        s = Sentence(0, [Token("Paris", "NNP"), Token("is", "VBZ"), Token("big", "JJ")])
        assert decode(memorizer_model, s) == ["B", "O", "O"]

    def test_empty_feature_space_is_uniform(self):
        model = SequenceModel({}, np.zeros(12), FeatureTemplateSet(()))
        s = Sentence(0, [Token("a", "DT"), Token("b", "NN")])
        nb = nbest(model, s, 9)
        assert all(p == pytest.approx(1 / 9, abs=1e-12) for p in nb.probs)

    def test_all_o_warns(self):
        s = Sentence(0, [Token("a", "DT")], state=HUMAN, working=["O"])
        with pytest.warns(UserWarning, match="no entity labels"):
            train([s], TrainConfig(max_iter=5))

    def test_invalid_bio_rejected(self):
        s = Sentence(0, [Token("a", "DT")], state=HUMAN, working=["I"])
        with pytest.raises(ValueError, match="BIO"):
            train([s])

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError):
            train([])

    def test_deterministic(self):
        def one():
            s = Sentence(0, [Token("Paris", "NNP"), Token("is", "VBZ")],
                         state=HUMAN, working=["B", "O"])
            return train([s], TrainConfig(max_iter=30))
        a, b = one(), one()
        assert a.feature_index == b.feature_index
        assert np.array_equal(a.theta, b.theta)

    def test_training_improves_likelihood(self):
        sentences = [
            Sentence(0, [Token("Paris", "NNP"), Token("is", "VBZ")],
                     state=HUMAN, working=["B", "O"]),
            Sentence(1, [Token("go", "VB"), Token("to", "TO"), Token("Paris", "NNP")],
                     state=HUMAN, working=["O", "O", "B"]),
        ]
        model = train(sentences, TrainConfig(max_iter=50))
        trained_ll = sum(model.log_prob(s, s.working) for s in sentences)
        zero = SequenceModel(model.feature_index, np.zeros_like(model.theta),
                             model.templates)
        assert trained_ll > sum(zero.log_prob(s, s.working) for s in sentences)

    def test_lexicon_feature_fires(self):
        s = Sentence(0, [Token("Paris", "NNP")], state=HUMAN, working=["B"])
        model = train([s], TrainConfig(max_iter=10), lexicon=frozenset({"paris"}))
        assert "in-lexicon" in model.feature_index


class TestEntropy:
    @pytest.fixture()
    def model_and_sentence(self):
        rng = np.random.default_rng(8)
        return random_model(rng), random_sentence(rng, 0, 4)

    def test_hand_value(self, model_and_sentence):
        model, s = model_and_sentence
        nb = NBest([["B"], ["O"]], [0.9, 0.1])
        expected = -(0.9 * math.log(0.9) + 0.1 * math.log(0.1)) / math.log(2)
        got = sequence_entropy(model, s, 2, nb=nb)
        assert got == pytest.approx(expected, abs=1e-12)
        assert round(got, 4) == 0.4690

    def test_equiprobable_is_one(self, model_and_sentence):
        model, s = model_and_sentence
        nb = NBest([["B"], ["I"], ["O"]], [0.2, 0.2, 0.2])
        assert sequence_entropy(model, s, 3, nb=nb) == pytest.approx(1.0)

    def test_point_mass_is_zero(self, model_and_sentence):
        model, s = model_and_sentence
        nb = NBest([["B"], ["O"]], [1.0, 0.0])
        assert sequence_entropy(model, s, 2, nb=nb) == pytest.approx(0.0)

    def test_n_one_warns_and_returns_zero(self, model_and_sentence):
        model, s = model_and_sentence
        with pytest.warns(UserWarning):
            assert sequence_entropy(model, s, 1) == 0.0

    def test_fuzz_range(self):
        rng = np.random.default_rng(9)
        for case in range(30):
            model = random_model(rng, scale=float(rng.uniform(0.1, 3)))
            s = random_sentence(rng, case, int(rng.integers(1, 7)))
            n = int(rng.integers(2, 12))
            val = sequence_entropy(model, s, n)
            assert 0.0 <= val <= 1.0 + 1e-12

    def test_majorization_direction(self, model_and_sentence):
        model, s = model_and_sentence
        peaked = NBest([["B"], ["O"]], [1.0, 1e-12])
        spread = NBest([["B"], ["O"]], [0.5, 0.5])
        assert sequence_entropy(model, s, 2, nb=peaked) < \
            sequence_entropy(model, s, 2, nb=spread)


class TestSelfInfo:
    def test_certain_sequence_zero(self):
        rng = np.random.default_rng(10)
        model, s = random_model(rng), random_sentence(rng, 0, 3)
        nb = NBest([["B"], ["O"]], [1.0, 0.5])
        assert sequence_self_info(model, s, 1, nb=nb) == 0.0

    def test_auto_annotation_hand_case(self):
        rng = np.random.default_rng(11)
        model, s = random_model(rng), random_sentence(rng, 0, 3)
        nb = NBest([["B"], ["O"]], [0.99, 0.005])
        se1 = sequence_self_info(model, s, 1, nb=nb)
        se2 = sequence_self_info(model, s, 2, nb=nb)
        assert se1 == pytest.approx(0.01005, abs=5e-6)
        assert se2 == pytest.approx(5.298, abs=5e-4)
        assert se1 / se2 == pytest.approx(0.0019, abs=1e-4)
        assert se1 / se2 <= 0.10

    def test_rank_beyond_available_rejected(self):
        rng = np.random.default_rng(12)
        model, s = random_model(rng), random_sentence(rng, 0, 1)
        nb = NBest([["B"]], [1.0])
        with pytest.raises(ValueError, match="rank"):
            sequence_self_info(model, s, 2, nb=nb)


class TestPersistence:
    def test_round_trip(self, tmp_path, memorizer_model):
        path = str(tmp_path / "model.json")
        memorizer_model.save(path)
        loaded = SequenceModel.load(path)
        assert loaded.feature_index == memorizer_model.feature_index
        assert np.allclose(loaded.theta, memorizer_model.theta)
        s = Sentence(0, [Token("Paris", "NNP"), Token("is", "VBZ"), Token("big", "JJ")])
        assert decode(loaded, s) == decode(memorizer_model, s)

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("garbage", encoding="utf-8")
        with pytest.raises(ModelFileError):
            SequenceModel.load(str(path))

    def test_version_mismatch(self, tmp_path, memorizer_model):
        import json
        path = tmp_path / "model.json"
        doc = memorizer_model.to_json()
        doc["schema_version"] = 42
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(ModelFileError, match="schema version"):
            SequenceModel.load(str(path))

    def test_theta_shape_validated(self):
        with pytest.raises(ValueError, match="theta"):
            SequenceModel({"f": 0}, np.zeros(5))
