"""NP-feature bipartite graph, edge weighting, similarity, and ranking.

Edge weighting schemes for a co-occurrence count C(n, f):

* count:    w = C(n, f)
* tfidf:    w = log(1 + C(n, f)) * (log|N| - log|N|_f)
* tfidfSum: w = log(1 + C(n, f)) * (log|N| - log sum_n' C(n', f))

where |N| is the number of NPs and |N|_f the number of NPs touching f.
Natural logarithms throughout.

Ranking offers a plain single-graph mode and a leave-one-family-out
ensemble combined by mean reciprocal rank.
"""

from __future__ import annotations

import difflib
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from .featurize import FAMILIES, Feature, FeatureCooc

SCHEMES = ("count", "tfidf", "tfidfSum")
DEFAULT_K = 30  # evaluation protocol fixes k at 30

FeatureKey = Tuple[str, str]  # (family, value)


class SeedNotFoundError(KeyError):
    def __init__(self, seed: str, suggestions: Sequence[str]):
        hint = f"; closest surfaces: {', '.join(suggestions)}" if suggestions else ""
        super().__init__(f"seed {seed!r} not among extracted noun phrases{hint}")
        self.seed = seed
        self.suggestions = list(suggestions)


@dataclass
class FeatureGraph:
    weights: Dict[str, Dict[FeatureKey, float]]  # np surface -> feature -> w
    scheme: str
    counts: Dict[str, int]  # np surface -> corpus count (tie-breaking)

    @property
    def nps(self) -> List[str]:
        return sorted(self.weights)

    def vector(self, surface: str) -> Dict[FeatureKey, float]:
        return self.weights[surface]


@dataclass
class RankedList:
    entries: List[Tuple[str, float]]  # (np surface, score), scores non-increasing
    k: int

    def surfaces(self) -> List[str]:
        return [s for s, _ in self.entries]


def build_graph(coocs: Sequence[FeatureCooc], scheme: str = "tfidf",
                counts: Optional[Dict[str, int]] = None) -> FeatureGraph:
    """Weight every (np, feature) edge according to the chosen scheme."""
    if not coocs:
        raise ValueError("cannot build a graph from an empty co-occurrence list")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown weighting scheme {scheme!r}")

    nps = sorted({c.np_surface for c in coocs})
    n_total = len(nps)
    if scheme != "count" and n_total < 2:
        raise ValueError(f"scheme {scheme!r} is degenerate with fewer than 2 NPs")

    touched: Dict[FeatureKey, Set[str]] = {}
    totals: Dict[FeatureKey, int] = {}
    for c in coocs:
        key = (c.feature.family, c.feature.value)
        touched.setdefault(key, set()).add(c.np_surface)
        totals[key] = totals.get(key, 0) + c.count

    weights: Dict[str, Dict[FeatureKey, float]] = {s: {} for s in nps}
    log_n = math.log(n_total) if n_total else 0.0
    for c in coocs:
        key = (c.feature.family, c.feature.value)
        if scheme == "count":
            w = float(c.count)
        elif scheme == "tfidf":
            w = math.log(1 + c.count) * (log_n - math.log(len(touched[key])))
        else:  # tfidfSum
            w = math.log(1 + c.count) * (log_n - math.log(totals[key]))
        weights[c.np_surface][key] = weights[c.np_surface].get(key, 0.0) + max(w, 0.0)

    if counts is None:
        counts = {s: 0 for s in nps}
    return FeatureGraph(weights, scheme, dict(counts))


def sim_cosine(n1: str, n2: str, graph: FeatureGraph) -> float:
    """Cosine similarity over the feature union; 0 for an all-zero vector."""
    v1, v2 = graph.vector(n1), graph.vector(n2)
    dot = sum(w * v2[f] for f, w in v1.items() if f in v2)
    norm1 = math.sqrt(sum(w * w for w in v1.values()))
    norm2 = math.sqrt(sum(w * w for w in v2.values()))
    if norm1 == 0.0 or norm2 == 0.0:
        return 0.0
    return dot / (norm1 * norm2)


def sim_context(n1: str, n2: str, graph: FeatureGraph) -> float:
    """Context-dependent similarity: sum min(w1, w2) / sum max(w1, w2)."""
    v1, v2 = graph.vector(n1), graph.vector(n2)
    num = 0.0
    den = 0.0
    for f in set(v1) | set(v2):
        w1 = v1.get(f, 0.0)
        w2 = v2.get(f, 0.0)
        num += min(w1, w2)
        den += max(w1, w2)
    if den == 0.0:
        return 0.0
    return num / den


SIMS: Dict[str, Callable[[str, str, FeatureGraph], float]] = {
    "cosine": sim_cosine,
    "context": sim_context,
}


def _order_key(graph: FeatureGraph):
    def key(item: Tuple[str, float]):
        surface, score = item
        return (-score, -graph.counts.get(surface, 0), surface)
    return key


def rank_plain(seed: str, graph: FeatureGraph,
               sim: Callable[[str, str, FeatureGraph], float] = sim_context,
               k: int = DEFAULT_K) -> RankedList:
    """Top-k NPs by similarity to the seed; the seed itself is excluded.

    Ties break by higher corpus count, then lexicographic surface.
    """
    if seed not in graph.weights:
        close = difflib.get_close_matches(seed, graph.nps, n=3)
        raise SeedNotFoundError(seed, close)
    scored = [(s, sim(seed, s, graph)) for s in graph.nps if s != seed]
    scored.sort(key=_order_key(graph))
    return RankedList(scored[:k], k)


def rank_ensemble(seed: str, coocs: Sequence[FeatureCooc], scheme: str = "tfidf",
                  sim: Callable[[str, str, FeatureGraph], float] = sim_context,
                  k: int = DEFAULT_K,
                  counts: Optional[Dict[str, int]] = None,
                  families: Optional[Sequence[str]] = None) -> RankedList:
    """Leave-one-family-out ensemble ranking combined by mean reciprocal rank.

    One sublist per family subset of size |families|-1; an NP outside a
    sublist's top-k contributes reciprocal rank 0.
    """
    present = [f for f in (families or FAMILIES)
               if any(c.feature.family == f for c in coocs)]
    if len(present) < 2:
        warnings.warn("fewer than two coarse families present; "
                      "falling back to plain ranking")
        return rank_plain(seed, build_graph(coocs, scheme, counts), sim, k)

    if seed not in {c.np_surface for c in coocs}:
        nps = sorted({c.np_surface for c in coocs})
        raise SeedNotFoundError(seed, difflib.get_close_matches(seed, nps, n=3))

    scores: Dict[str, float] = {}
    n_sublists = len(present)
    for left_out in present:
        subset = [c for c in coocs if c.feature.family != left_out]
        try:
            sub_graph = build_graph(subset, scheme, counts)
            sublist = rank_plain(seed, sub_graph, sim, k)
        except (ValueError, SeedNotFoundError):
            continue  # seed carries no features outside the left-out family
        for rank, (surface, _score) in enumerate(sublist.entries, start=1):
            scores[surface] = scores.get(surface, 0.0) + 1.0 / rank
    merged = [(s, total / n_sublists) for s, total in scores.items() if total > 0.0]
    graph_for_ties = build_graph(coocs, "count", counts)
    merged.sort(key=_order_key(graph_for_ties))
    return RankedList(merged[:k], k)


def expand(seeds: Sequence[str], coocs: Sequence[FeatureCooc], scheme: str = "tfidf",
           sim: Callable[[str, str, FeatureGraph], float] = sim_context,
           k: int = DEFAULT_K, ensemble: bool = True,
           counts: Optional[Dict[str, int]] = None) -> RankedList:
    """Multi-seed expansion: mean over seeds of the single-seed score."""
    if not seeds:
        raise ValueError("empty seed set")
    seeds = sorted(set(seeds))
    totals: Dict[str, float] = {}
    for seed in seeds:
        if ensemble:
            ranked = rank_ensemble(seed, coocs, scheme, sim, k, counts)
        else:
            ranked = rank_plain(seed, build_graph(coocs, scheme, counts), sim, k)
        for surface, score in ranked.entries:
            if surface in seeds:
                continue
            totals[surface] = totals.get(surface, 0.0) + score
    merged = [(s, total / len(seeds)) for s, total in totals.items()]
    graph_for_ties = build_graph(coocs, "count", counts)
    merged.sort(key=_order_key(graph_for_ties))
    return RankedList(merged[:k], k)


def precision_at_k(ranked: RankedList, gold_surfaces: Set[str]) -> float:
    """Fraction of the k slots filled with gold entity surfaces."""
    if ranked.k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for surface, _ in ranked.entries if surface in gold_surfaces)
    return hits / ranked.k
