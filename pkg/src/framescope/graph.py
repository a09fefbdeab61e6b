"""Typed information graph over articles, users, expressions, influencers, labels.

The graph is immutable after construction. Training-pair sampling draws
negatives uniformly from same-type non-neighbors of the anchor and is
deterministic given the caller's generator; callers must not share a
generator across threads.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, SocialEdges, extract_ngrams, LABELS
from .lexicon import SubframeMap

logger = logging.getLogger(__name__)

_warned_replacement: set = set()


class Relation(Enum):
    SHARE = "share"                    # user -> article
    FOLLOW = "follow"                  # user -> influencer
    AFFILIATION = "affiliation"        # influencer -> label
    CONTAINS = "contains"              # article -> subframe expression
    COHESION = "cohesion"              # node -> community centroid (training only)
    INFERRED_LABEL = "inferred_label"  # node -> label (training only)

    def __str__(self) -> str:  # stable names in reports
        return self.value


# anchor type, target type
RELATION_TYPES = {
    Relation.SHARE: ("user", "article"),
    Relation.FOLLOW: ("user", "influencer"),
    Relation.AFFILIATION: ("influencer", "label"),
    Relation.CONTAINS: ("article", "sf"),
}

BASE_RELATIONS = (Relation.SHARE, Relation.FOLLOW, Relation.AFFILIATION, Relation.CONTAINS)


class GraphError(ValueError):
    """Raised for dangling references or inconsistent graph inputs."""


def node_id(node_type: str, raw: str) -> str:
    return f"{node_type}:{raw}"


def strip_type(node: str) -> str:
    return node.split(":", 1)[1]


@dataclass(frozen=True)
class TrainingPair:
    relation: Relation
    anchor: str
    positive: str
    negatives: tuple[str, ...]


class InfoGraph:
    """Node sets by type plus relation-typed edge lists and adjacency."""

    def __init__(
        self,
        nodes: dict[str, Sequence[str]],
        edges: dict[Relation, Sequence[tuple[str, str]]],
    ):
        self.nodes: dict[str, tuple[str, ...]] = {
            t: tuple(sorted(ids)) for t, ids in nodes.items()
        }
        node_set = {n for ids in self.nodes.values() for n in ids}
        self.edges: dict[Relation, tuple[tuple[str, str], ...]] = {}
        self.adjacency: dict[Relation, dict[str, frozenset[str]]] = {}
        for rel, pairs in edges.items():
            uniq = sorted(set(pairs))
            for src, dst in uniq:
                if src not in node_set or dst not in node_set:
                    raise GraphError(f"edge ({src}, {dst}) references a missing node")
            self.edges[rel] = tuple(uniq)
            adj: dict[str, set[str]] = defaultdict(set)
            for src, dst in uniq:
                adj[src].add(dst)
            self.adjacency[rel] = {src: frozenset(v) for src, v in adj.items()}

    def neighbors(self, rel: Relation, anchor: str) -> frozenset[str]:
        return self.adjacency.get(rel, {}).get(anchor, frozenset())

    def edge_count(self, rel: Relation) -> int:
        return len(self.edges.get(rel, ()))

    def all_nodes(self) -> tuple[str, ...]:
        return tuple(n for t in sorted(self.nodes) for n in self.nodes[t])

    def dump_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rel in sorted(self.edges, key=lambda r: r.value):
                for src, dst in self.edges[rel]:
                    fh.write(json.dumps({"rel": rel.value, "src": src, "dst": dst}) + "\n")

    def stats(self) -> dict:
        return {
            "nodes": {t: len(ids) for t, ids in self.nodes.items()},
            "edges": {rel.value: len(pairs) for rel, pairs in self.edges.items()},
        }


def article_gram_set(doc, orders: Iterable[int]) -> set[str]:
    grams: set[str] = set()
    for para in doc.paragraphs:
        for n in orders:
            grams.update(extract_ngrams(para, n))
    return grams


def build_graph(corpus: Corpus, edges: SocialEdges, submap: SubframeMap) -> InfoGraph:
    """Assemble the information graph.

    One expression node per subframe indicator n-gram; contains edges by
    exact within-sentence n-gram match against article bodies. Dangling
    share/follow references raise GraphError.
    """
    articles = [node_id("article", d.id) for d in corpus]
    users = sorted(edges.users())
    influencers = sorted(set(edges.affiliations) | {p for _, p in edges.follows})
    indicators = submap.all_indicators()

    for _, doc_id in edges.shares:
        if doc_id not in corpus:
            raise GraphError(f"share edge references unknown document {doc_id!r}")
    for _, influencer in edges.follows:
        if influencer not in edges.affiliations:
            raise GraphError(f"follow edge references unaffiliated influencer {influencer!r}")

    share_edges = [
        (node_id("user", u), node_id("article", d)) for u, d in edges.shares
    ]
    follow_edges = [
        (node_id("user", u), node_id("influencer", p)) for u, p in edges.follows
    ]
    affiliation_edges = [
        (node_id("influencer", p), node_id("label", label))
        for p, label in edges.affiliations.items()
    ]

    orders = sorted({len(g.split()) for g in indicators})
    indicator_set = set(indicators)
    contains_edges = []
    for doc in corpus:
        present = article_gram_set(doc, orders) & indicator_set
        contains_edges.extend(
            (node_id("article", doc.id), node_id("sf", gram)) for gram in present
        )

    nodes = {
        "article": articles,
        "user": [node_id("user", u) for u in users],
        "influencer": [node_id("influencer", p) for p in influencers],
        "sf": [node_id("sf", g) for g in indicators],
        "label": [node_id("label", l) for l in LABELS],
    }
    return InfoGraph(
        nodes,
        {
            Relation.SHARE: share_edges,
            Relation.FOLLOW: follow_edges,
            Relation.AFFILIATION: affiliation_edges,
            Relation.CONTAINS: contains_edges,
        },
    )


def sample_pairs(
    graph: InfoGraph,
    relation: Relation,
    k_neg: int,
    rng: np.random.Generator,
) -> list[TrainingPair]:
    """One TrainingPair per edge; negatives are same-type non-neighbors.

    Fewer than k_neg candidates falls back to sampling with replacement
    (warned once per call); zero candidates skips the pair.
    """
    if k_neg < 1:
        raise ValueError("k_neg must be >= 1")
    target_type = RELATION_TYPES[relation][1]
    pool = graph.nodes[target_type]
    pairs: list[TrainingPair] = []
    warned_replacement = False
    for anchor, positive in graph.edges.get(relation, ()):
        neighbors = graph.neighbors(relation, anchor)
        candidates = [c for c in pool if c not in neighbors]
        if not candidates:
            logger.warning(
                "no negative candidates for %s anchor %s; pair skipped",
                relation.value,
                anchor,
            )
            continue
        if len(candidates) >= k_neg:
            idx = rng.choice(len(candidates), size=k_neg, replace=False)
        else:
            if not warned_replacement:
                # repeat occurrences (per-epoch resampling) drop to debug
                log = logger.debug if (relation, k_neg) in _warned_replacement else logger.warning
                log(
                    "relation %s: fewer than %d negative candidates; sampling with replacement",
                    relation.value,
                    k_neg,
                )
                _warned_replacement.add((relation, k_neg))
                warned_replacement = True
            idx = rng.integers(0, len(candidates), size=k_neg)
        negatives = tuple(candidates[i] for i in idx)
        pairs.append(TrainingPair(relation, anchor, positive, negatives))
    return pairs


def sample_base_pairs(
    graph: InfoGraph,
    relations: Sequence[Relation],
    k_neg: int,
    rng: np.random.Generator,
) -> dict[Relation, list[TrainingPair]]:
    return {rel: sample_pairs(graph, rel, k_neg, rng) for rel in relations}
