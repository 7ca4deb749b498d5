"""Bipartite graph weighting, similarities, and ensemble ranking."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from sparsent import esegraph
from sparsent.esegraph import (
    DEFAULT_K, FeatureGraph, RankedList, SeedNotFoundError, build_graph, expand,
    precision_at_k, rank_ensemble, rank_plain, sim_context, sim_cosine,
)
from sparsent.featurize import Feature, FeatureCooc


def cooc(np_surface, family, value, count=1):
    return FeatureCooc(np_surface, Feature(family, value), count)


def graph_from(weights, scheme="count", counts=None):
    """FeatureGraph straight from an {np: {value: w}} dict (LS family)."""
    w = {np_: {("LS", v): float(x) for v, x in vec.items()}
         for np_, vec in weights.items()}
    return FeatureGraph(w, scheme, counts or {np_: 0 for np_ in weights})


class TestBuildGraph:
    def test_count_identity(self):
        g = build_graph([cooc("a", "LS", "f", 3), cooc("b", "LS", "g", 1)], "count")
        assert g.vector("a")[("LS", "f")] == 3.0

    def test_tfidf_hand_value(self):
        coocs = [cooc("a", "LS", "f", 1)]
        coocs += [cooc(f"n{i}", "LS", f"u{i}", 1) for i in range(9)]  # |N| = 10
        g = build_graph(coocs, "tfidf")
        expected = math.log(2) * math.log(10)  # ~1.5960
        assert g.vector("a")[("LS", "f")] == pytest.approx(expected, abs=1e-12)
        assert round(expected, 4) == 1.5960

    def test_tfidfsum_saturated_feature_is_zero(self):
        # one feature touching every NP with total count == |N|
        coocs = [cooc(f"n{i}", "LS", "f", 1) for i in range(4)]
        g = build_graph(coocs, "tfidfSum")
        assert all(g.vector(f"n{i}")[("LS", "f")] == 0.0 for i in range(4))

    def test_degenerate_idf_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            build_graph([cooc("a", "LS", "f")], "tfidf")

    def test_empty_coocs_rejected(self):
        with pytest.raises(ValueError):
            build_graph([], "count")

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError, match="scheme"):
            build_graph([cooc("a", "LS", "f")], "idf")

    def test_weights_never_negative(self):
        # a feature with total count far above |N| would go negative unclamped
        coocs = [cooc("a", "LS", "f", 50), cooc("b", "LS", "f", 50)]
        g = build_graph(coocs, "tfidfSum")
        assert all(w >= 0.0 for vec in g.weights.values() for w in vec.values())


class TestSimilarities:
    def test_cosine_hand_value(self):
        g = graph_from({"a": {"f1": 1, "f2": 1}, "b": {"f1": 1}})
        assert sim_cosine("a", "b", g) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_cosine_identical_and_disjoint(self):
        g = graph_from({"a": {"f1": 2, "f2": 1}, "b": {"f1": 2, "f2": 1},
                        "c": {"f3": 5}})
        assert sim_cosine("a", "b", g) == pytest.approx(1.0)
        assert sim_cosine("a", "c", g) == 0.0

    def test_context_hand_value(self):
        g = graph_from({"a": {"f1": 2, "f2": 1}, "b": {"f1": 1, "f2": 3}})
        assert sim_context("a", "b", g) == pytest.approx(0.4, abs=1e-12)

    def test_context_identical_and_disjoint(self):
        g = graph_from({"a": {"f1": 2}, "b": {"f1": 2}, "c": {"f2": 1}})
        assert sim_context("a", "b", g) == pytest.approx(1.0)
        assert sim_context("a", "c", g) == 0.0

    def test_all_zero_vector(self):
        g = graph_from({"a": {}, "b": {"f1": 1}})
        assert sim_cosine("a", "b", g) == 0.0
        assert sim_context("a", "a", g) == 0.0  # 0/0 convention


@st.composite
def random_graphs(draw):
    n_nps = draw(st.integers(2, 8))
    n_feats = draw(st.integers(1, 6))
    weights = {}
    for i in range(n_nps):
        vec = {}
        for j in range(n_feats):
            if draw(st.booleans()):
                vec[f"f{j}"] = draw(st.floats(0.01, 10.0))
        weights[f"np{i}"] = vec
    return graph_from(weights)


class TestSimilarityProperties:
    @given(random_graphs())
    @settings(max_examples=60, deadline=None)
    def test_symmetry_range_and_self_similarity(self, g):
        nps = g.nps
        for a in nps:
            for b in nps:
                for sim in (sim_cosine, sim_context):
                    ab, ba = sim(a, b, g), sim(b, a, g)
                    assert ab == pytest.approx(ba, abs=1e-12)
                    assert -1e-12 <= ab <= 1.0 + 1e-12
            if g.vector(a):
                assert sim_cosine(a, a, g) == pytest.approx(1.0)
                assert sim_context(a, a, g) == pytest.approx(1.0)


class TestRankPlain:
    def test_clone_ranked_first(self):
        g = graph_from({"seed": {"f1": 1, "f2": 2}, "clone": {"f1": 1, "f2": 2},
                        "other": {"f3": 1}})
        ranked = rank_plain("seed", g, sim_context)
        assert ranked.entries[0] == ("clone", pytest.approx(1.0))

    def test_seed_excluded_and_k_cap(self):
        g = graph_from({f"np{i}": {"f": 1} for i in range(5)})
        ranked = rank_plain("np0", g, sim_context, k=10)
        assert "np0" not in ranked.surfaces()
        assert len(ranked.entries) == 4

    def test_seed_not_found_suggests(self):
        g = graph_from({"insulin": {"f": 1}, "kinase": {"f": 1}})
        with pytest.raises(SeedNotFoundError) as err:
            rank_plain("insuline", g)
        assert "insulin" in err.value.suggestions

    def test_matches_brute_force_oracle(self):
        import numpy as np
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(3, 50))
            weights = {
                f"np{i}": {f"f{j}": float(rng.uniform(0.1, 5))
                           for j in range(int(rng.integers(1, 6)))}
                for i in range(n)
            }
            counts = {s: int(rng.integers(0, 9)) for s in weights}
            g = graph_from(weights, counts=counts)
            for sim in (sim_cosine, sim_context):
                got = rank_plain("np0", g, sim, k=n).entries
                brute = sorted(
                    ((s, sim("np0", s, g)) for s in weights if s != "np0"),
                    key=lambda it: (-it[1], -counts[it[0]], it[0]))
                assert [s for s, _ in got] == [s for s, _ in brute]
                for (_, a), (_, b) in zip(got, brute):
                    assert a == pytest.approx(b, abs=1e-10)

    def test_scale_invariance_of_order(self):
        import numpy as np
        rng = np.random.default_rng(11)
        weights = {f"np{i}": {f"f{j}": float(rng.uniform(0.1, 5)) for j in range(3)}
                   for i in range(12)}
        g = graph_from(weights)
        scaled = FeatureGraph({s: {f: w * 7.3 for f, w in vec.items()}
                               for s, vec in g.weights.items()}, "count", g.counts)
        for sim in (sim_cosine, sim_context):
            assert rank_plain("np0", g, sim).surfaces() == \
                rank_plain("np0", scaled, sim).surfaces()


def _three_family_coocs():
    """Three families where every family induces the same NP geometry."""
    coocs = []
    for fam, val in (("LF_OF", "of"), ("LS", "ls"), ("SeF", "se")):
        coocs += [
            cooc("seed", fam, f"{val}-x", 2), cooc("seed", fam, f"{val}-y", 1),
            cooc("near", fam, f"{val}-x", 2), cooc("near", fam, f"{val}-y", 1),
            cooc("mid", fam, f"{val}-x", 1),
            cooc("far", fam, f"{val}-z", 3),
        ]
    return coocs


class TestRankEnsemble:
    def test_mrr_hand_value(self, monkeypatch):
        # an NP placed at ranks 1, 2 and 4 of the three sublists scores 0.5833
        coocs = _three_family_coocs()
        sublists = iter([
            ["target", "a", "b", "c"],
            ["a", "target", "b", "c"],
            ["a", "b", "c", "target"],
        ])

        def fake_rank_plain(seed, graph, sim, k):
            return RankedList([(s, 1.0) for s in next(sublists)], k)

        monkeypatch.setattr(esegraph, "rank_plain", fake_rank_plain)
        ranked = rank_ensemble("seed", coocs, "count")
        score = dict(ranked.entries)["target"]
        assert score == pytest.approx((1 + 0.5 + 0.25) / 3, abs=1e-12)
        assert round(score, 4) == 0.5833

    def test_absent_np_excluded(self, monkeypatch):
        coocs = _three_family_coocs()
        monkeypatch.setattr(
            esegraph, "rank_plain",
            lambda seed, graph, sim, k: RankedList([("a", 1.0)], k))
        ranked = rank_ensemble("seed", coocs, "count")
        assert ranked.surfaces() == ["a"]

    def test_identical_family_rankings_degenerate_to_plain(self):
        coocs = _three_family_coocs()
        plain = rank_plain("seed", build_graph(coocs, "count"), sim_context)
        ens = rank_ensemble("seed", coocs, "count")
        assert ens.surfaces() == plain.surfaces()

    def test_single_family_falls_back_with_warning(self):
        coocs = [cooc("seed", "LS", "x"), cooc("other", "LS", "x")]
        with pytest.warns(UserWarning, match="fewer than two"):
            ranked = rank_ensemble("seed", coocs, "count")
        plain = rank_plain("seed", build_graph(coocs, "count"))
        assert ranked.surfaces() == plain.surfaces()

    def test_seed_not_found(self):
        with pytest.raises(SeedNotFoundError):
            rank_ensemble("ghost", _three_family_coocs(), "count")


class TestExpand:
    def test_single_seed_equals_ensemble(self):
        coocs = _three_family_coocs()
        assert expand(["seed"], coocs, "count").entries == \
            rank_ensemble("seed", coocs, "count").entries

    def test_empty_seeds_rejected(self):
        with pytest.raises(ValueError, match="empty seed"):
            expand([], _three_family_coocs())

    def test_seed_swap_symmetry(self):
        coocs = _three_family_coocs()
        a = expand(["seed", "near"], coocs, "count")
        b = expand(["near", "seed"], coocs, "count")
        assert a.entries == b.entries

    def test_seeds_excluded_from_output(self):
        coocs = _three_family_coocs()
        out = expand(["seed", "near"], coocs, "count").surfaces()
        assert "seed" not in out and "near" not in out

    def test_k_defaults_to_protocol_30(self):
        coocs = []
        for i in range(40):
            coocs.append(cooc(f"np{i}", "LS", "shared"))
            coocs.append(cooc(f"np{i}", "LF_OF", "shared"))
        ranked = expand(["np0"], coocs, "count")
        assert ranked.k == DEFAULT_K == 30
        assert len(ranked.entries) == 30


class TestPrecisionAtK:
    def test_all_gold(self):
        ranked = RankedList([(f"n{i}", 1.0) for i in range(30)], 30)
        assert precision_at_k(ranked, {f"n{i}" for i in range(30)}) == 1.0

    def test_none_gold(self):
        ranked = RankedList([(f"n{i}", 1.0) for i in range(30)], 30)
        assert precision_at_k(ranked, {"zzz"}) == 0.0

    def test_22_of_30(self):
        ranked = RankedList([(f"n{i}", 1.0) for i in range(30)], 30)
        gold = {f"n{i}" for i in range(22)}
        assert precision_at_k(ranked, gold) == pytest.approx(22 / 30)
        assert round(precision_at_k(ranked, gold), 4) == 0.7333
