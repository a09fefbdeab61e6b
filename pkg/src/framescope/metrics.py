"""Evaluation analytics: polarity, purity, rankings, correlations, heatmaps.

Everything here is a pure function over frozen stores and models. Rankings
order by descending score with node id as the deterministic tie-break for
display; correlations use tie-averaged ranks. Each metric has a CSV/JSON
emission path in the report command.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, LABELS, LEFT, RIGHT
from .lexicon import FrameLexicon, SubframeMap, annotate_frames
from .embedding import EmbeddingStore, similarity
from .community import CommunityModel
from .graph import node_id, strip_type

logger = logging.getLogger(__name__)


class MetricError(ValueError):
    """Raised when a metric's preconditions fail."""


@dataclass(frozen=True)
class Ranking:
    """Scored nodes sorted by (-score, id); dense ranks start at 1."""

    entries: tuple[tuple[str, float], ...]

    @classmethod
    def from_scores(cls, scores: Mapping[str, float]) -> "Ranking":
        ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls(tuple(ordered))

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> tuple[str, ...]:
        return tuple(nid for nid, _ in self.entries)

    def position(self, node: str) -> int | None:
        for i, (nid, _) in enumerate(self.entries, start=1):
            if nid == node:
                return i
        return None

    def average_ranks(self) -> dict[str, float]:
        """Tie-averaged 1-based ranks, for rank correlations."""
        ranks: dict[str, float] = {}
        i = 0
        entries = self.entries
        while i < len(entries):
            j = i
            while j < len(entries) and entries[j][1] == entries[i][1]:
                j += 1
            avg = (i + 1 + j) / 2.0
            for nid, _ in entries[i:j]:
                ranks[nid] = avg
            i = j
        return ranks


def rank_score(rank: int, total: int) -> float:
    """(N - r + 1) / N for a node ranked r of N."""
    if not 1 <= rank <= total:
        raise MetricError(f"rank {rank} outside 1..{total}")
    return (total - rank + 1) / total


def rank_score_of(ranking: Ranking, node: str) -> float:
    """Rank score within a ranking; nodes absent from it score 0."""
    pos = ranking.position(node)
    if pos is None:
        return 0.0
    return rank_score(pos, len(ranking))


def spearman(r1: Ranking, r2: Ranking) -> float:
    """Spearman correlation over the shared id set (tie-averaged ranks)."""
    ids = sorted(set(r1.ids()) & set(r2.ids()))
    if len(ids) < len(r1) or len(ids) < len(r2):
        logger.info("spearman inner join kept %d ids", len(ids))
    if len(ids) < 2:
        raise MetricError(f"need at least 2 shared ids, got {len(ids)}")
    a_ranks = r1.average_ranks()
    b_ranks = r2.average_ranks()
    a = np.asarray([a_ranks[i] for i in ids])
    b = np.asarray([b_ranks[i] for i in ids])
    return _pearson(a, b)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0:
        raise MetricError("degenerate (constant) ranking")
    return float(a @ b) / denom


def spearman_from_scores(
    left: Mapping[str, float], right: Mapping[str, float]
) -> float | None:
    """Spearman between two score tables; None when degenerate."""
    try:
        return spearman(Ranking.from_scores(left), Ranking.from_scores(right))
    except MetricError:
        return None


# ---------------------------------------------------------------------------
# Community-level measures


def community_polarity(model: CommunityModel, store: EmbeddingStore) -> dict[int, float]:
    """cosine(centroid, Left label vector) per community, in [-1, 1]."""
    left = store.vector(node_id("label", LEFT))
    return {
        k: similarity(model.means[k], left, "cosine") for k in range(model.k)
    }


def polarity_order(polarity: Mapping[int, float]) -> list[int]:
    """Communities sorted most-left first."""
    return sorted(polarity, key=lambda k: (-polarity[k], k))


def purity(
    assignments: Mapping[object, Sequence[str]], labels: Mapping[str, str]
) -> float:
    """(1/N) sum over communities of the majority-label member count.

    `assignments` maps a community to its member nodes; a node assigned to
    two communities counts in both. Every counted node must carry a label.
    """
    total = 0
    majority_sum = 0
    for community in assignments:
        members = list(assignments[community])
        if not members:
            continue
        counts = Counter()
        for node in members:
            if node not in labels:
                raise MetricError(f"node {node!r} has no label")
            counts[labels[node]] += 1
        total += len(members)
        majority_sum += max(counts.values())
    if total == 0:
        raise MetricError("no assignments to score")
    return majority_sum / total


def similarity_ranking(
    ids: Sequence[str], centroid: np.ndarray, store: EmbeddingStore
) -> Ranking:
    """Politicians or articles ranked by cosine to the community centroid."""
    return Ranking.from_scores(
        {nid: similarity(store.vector(nid), centroid, "cosine") for nid in ids}
    )


def subframe_ranking(
    submap: SubframeMap, centroid: np.ndarray, store: EmbeddingStore
) -> Ranking:
    """Subframes scored by the mean cosine of their expression nodes."""
    scores = {}
    for name in submap.names():
        sf = submap.subframes[name]
        sims = [
            similarity(store.vector(node_id("sf", gram)), centroid, "cosine")
            for gram in sf.indicators
            if node_id("sf", gram) in store
        ]
        if sims:
            scores[name] = sum(sims) / len(sims)
    return Ranking.from_scores(scores)


def frame_ranking(
    community_articles: Sequence[str],
    article_frames: Mapping[str, Sequence[str]],
    centroid: np.ndarray,
    store: EmbeddingStore,
) -> Ranking:
    """Frames scored by the mean article-centroid similarity over the
    community's articles whose top-frame set contains the frame."""
    sums: dict[str, float] = defaultdict(float)
    counts: dict[str, int] = defaultdict(int)
    for article in community_articles:
        sim = similarity(store.vector(article), centroid, "cosine")
        for frame in article_frames.get(article, ()):
            sums[frame] += sim
            counts[frame] += 1
    return Ranking.from_scores({f: sums[f] / counts[f] for f in sums})


def importance_ranking(
    node_type: str,
    centroid: np.ndarray,
    store: EmbeddingStore,
    *,
    node_ids: Sequence[str] | None = None,
    submap: SubframeMap | None = None,
    article_frames: Mapping[str, Sequence[str]] | None = None,
    community_articles: Sequence[str] | None = None,
) -> Ranking:
    if node_type in ("politician", "influencer", "article"):
        if node_ids is None:
            raise MetricError(f"{node_type} ranking needs node_ids")
        return similarity_ranking(node_ids, centroid, store)
    if node_type == "subframe":
        if submap is None:
            raise MetricError("subframe ranking needs a SubframeMap")
        return subframe_ranking(submap, centroid, store)
    if node_type == "frame":
        if article_frames is None or community_articles is None:
            raise MetricError("frame ranking needs article frames and community articles")
        return frame_ranking(community_articles, article_frames, centroid, store)
    raise MetricError(f"unknown node type {node_type!r}")


def external_score_correlation(
    community_ranking: Ranking, external: Mapping[str, float]
) -> float:
    """Spearman between in-community politician importance and external scores.

    External scores rank conservative-to-liberal; the ranking ids must be
    raw influencer ids matching the score table.
    """
    shared = [nid for nid in community_ranking.ids() if strip_type(nid) in external]
    if len(shared) < 2:
        raise MetricError(
            f"need >= 2 overlapping influencers, got {len(shared)} "
            f"(ranking {len(community_ranking)}, external {len(external)})"
        )
    ext_ranking = Ranking.from_scores(
        {nid: external[strip_type(nid)] for nid in shared}
    )
    pruned = Ranking(tuple((n, s) for n, s in community_ranking.entries if n in set(shared)))
    return spearman(pruned, ext_ranking)


def subframe_polarity_scatter(
    rankings: Mapping[int, Ranking],
    polarity: Mapping[int, float],
    subframes: Sequence[str],
) -> dict[str, tuple[float | None, float | None]]:
    """Mean subframe rank score over left communities vs right communities.

    Sides are the sign of the community polarity; a side with no communities
    leaves that coordinate None.
    """
    left_ks = [k for k in rankings if polarity[k] >= 0]
    right_ks = [k for k in rankings if polarity[k] < 0]
    if not left_ks or not right_ks:
        logger.warning("subframe polarity scatter: one side has no communities")
    out = {}
    for name in subframes:
        def mean_side(ks):
            if not ks:
                return None
            return sum(rank_score_of(rankings[k], name) for k in ks) / len(ks)
        out[name] = (mean_side(left_ks), mean_side(right_ks))
    return out


@dataclass(frozen=True)
class SegregationEntry:
    community: int
    node_type: str
    corr_with_leftmost: float
    corr_with_rightmost: float


def segregation_profile(
    rankings: Mapping[int, Mapping[str, Ranking]],
    polarity: Mapping[int, float],
) -> list[SegregationEntry]:
    """Per community and node type, Spearman against the leftmost and the
    rightmost community's rankings. Entries without 2 shared items are
    omitted."""
    if len(rankings) < 3:
        raise MetricError("segregation profile needs at least 3 communities")
    order = polarity_order({k: polarity[k] for k in rankings})
    leftmost, rightmost = order[0], order[-1]
    entries: list[SegregationEntry] = []
    for k in order:
        for node_type in sorted(rankings[k]):
            try:
                cl = spearman(rankings[k][node_type], rankings[leftmost][node_type])
                cr = spearman(rankings[k][node_type], rankings[rightmost][node_type])
            except MetricError:
                logger.warning(
                    "segregation: community %s type %s lacks shared items", k, node_type
                )
                continue
            entries.append(SegregationEntry(k, node_type, cl, cr))
    return entries


def doc_community_heatmap(
    article_ids: Sequence[str],
    model: CommunityModel,
    store: EmbeddingStore,
) -> tuple[list[int], np.ndarray]:
    """|articles| x K cosine matrix, columns ordered left to right."""
    polarity = community_polarity(model, store)
    order = polarity_order(polarity)
    matrix = np.zeros((len(article_ids), model.k))
    for i, article in enumerate(article_ids):
        vec = store.vector(article)
        for j, k in enumerate(order):
            matrix[i, j] = similarity(vec, model.means[k], "cosine")
    return order, matrix


# ---------------------------------------------------------------------------
# Subframe usage over text


def article_subframe_scores(
    corpus: Corpus, store: EmbeddingStore, submap: SubframeMap
) -> dict[str, dict[str, float]]:
    """Per article, mean paragraph similarity to each subframe proxy vector
    (the mean of the subframe's expression embeddings)."""
    proxies = {}
    for name in submap.names():
        sf = submap.subframes[name]
        vecs = [
            store.vector(node_id("sf", g))
            for g in sf.indicators
            if node_id("sf", g) in store
        ]
        if vecs:
            proxies[name] = np.mean(vecs, axis=0)
    out: dict[str, dict[str, float]] = {}
    for doc in corpus:
        para_vecs = [
            store.encode_tokens(p.tokens) for p in doc.paragraphs if p.tokens
        ]
        scores = {}
        for name, proxy in proxies.items():
            sims = [similarity(v, proxy, "cosine") for v in para_vecs]
            scores[name] = sum(sims) / len(sims) if sims else 0.0
        out[doc.id] = scores
    return out


def article_top_subframes(
    scores: Mapping[str, Mapping[str, float]], top_n: int = 3
) -> dict[str, tuple[str, ...]]:
    out = {}
    for doc_id, table in scores.items():
        ranked = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
        out[doc_id] = tuple(name for name, _ in ranked[:top_n])
    return out


def article_top_frames(
    corpus: Corpus, lex: FrameLexicon, top_n: int = 3
) -> dict[str, tuple[str, ...]]:
    """Top frames per article by lexicon match counts over the whole body."""
    out = {}
    for doc in corpus:
        counts: Counter = Counter()
        for para in doc.paragraphs:
            for frame in annotate_frames(para, lex, top_n=1):
                counts[frame] += 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        out[doc.id] = tuple(f for f, _ in ranked[:top_n])
    return out


def subframe_cooccurrence(
    article_subframes: Mapping[str, Sequence[str]],
    subframes: Sequence[str],
    zero_below: float | None = None,
) -> np.ndarray:
    """Row-normalized fraction of articles sharing both subframes.

    Entry (i, j) is |articles with i and j| / |articles with i|. With
    `zero_below` set (the paper-compatible display mode), entries under the
    cutoff are zeroed; the diagonal is always kept.
    """
    names = list(subframes)
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    joint = np.zeros((n, n))
    base = np.zeros(n)
    for doc_id, sfs in article_subframes.items():
        present = sorted({index[s] for s in sfs if s in index})
        for i in present:
            base[i] += 1
            for j in present:
                joint[i, j] += 1
    matrix = np.zeros((n, n))
    nonzero = base > 0
    matrix[nonzero] = joint[nonzero] / base[nonzero, None]
    if zero_below is not None:
        mask = matrix < zero_below
        np.fill_diagonal(mask, False)
        matrix[mask] = 0.0
    return matrix


def party_context_pmi(
    subframe: str,
    side: str,
    corpus: Corpus,
    store: EmbeddingStore,
    submap: SubframeMap,
    article_subframes: Mapping[str, Sequence[str]],
    top_m: int = 5,
    min_df: float = 0.05,
    max_df: float = 0.60,
    context_n: int = 500,
    df_mode: str = "band",
) -> list[tuple[str, float]]:
    """Top PMI(word, side) over paragraphs argmax-assigned to the subframe.

    The slice keeps paragraphs of articles whose top-subframe set contains
    the subframe, where the paragraph's best subframe is this one, and which
    sit in the context_n most similar paragraphs to the subframe vector.
    df_mode "band" keeps words with min_df <= df <= max_df; "inverse-band"
    keeps the complement (the literal reading of the source procedure).
    """
    if df_mode not in ("band", "inverse-band"):
        raise MetricError("df_mode must be 'band' or 'inverse-band'")
    sf = submap.subframes.get(subframe)
    if sf is None:
        raise MetricError(f"unknown subframe {subframe!r}")
    proxy_vecs = [
        store.vector(node_id("sf", g)) for g in sf.indicators if node_id("sf", g) in store
    ]
    if not proxy_vecs:
        raise MetricError(f"subframe {subframe!r} has no embedded expressions")
    proxies = {}
    for name in submap.names():
        entry = submap.subframes[name]
        vecs = [
            store.vector(node_id("sf", g))
            for g in entry.indicators
            if node_id("sf", g) in store
        ]
        if vecs:
            proxies[name] = np.mean(vecs, axis=0)
    target_proxy = proxies[subframe]

    # candidate paragraphs: article top-subframes include the target and the
    # paragraph's argmax subframe is the target
    candidates = []
    for doc in corpus:
        if subframe not in article_subframes.get(doc.id, ()):
            continue
        for para in doc.paragraphs:
            if not para.tokens:
                continue
            vec = store.encode_tokens(para.tokens)
            sims = {
                name: similarity(vec, proxy, "cosine") for name, proxy in proxies.items()
            }
            best = max(sims, key=lambda nm: (sims[nm], nm == subframe))
            if best == subframe:
                candidates.append((doc.bias, para, sims[subframe]))

    candidates.sort(key=lambda row: -row[2])
    nearest = candidates[:context_n]
    if not nearest:
        raise MetricError(f"no paragraphs assigned to subframe {subframe!r}")

    n_paras = len(nearest)
    df: Counter = Counter()
    side_counts: Counter = Counter()
    side_total = 0
    all_counts: Counter = Counter()
    all_total = 0
    for bias, para, _ in nearest:
        df.update(set(para.tokens))
        all_counts.update(para.tokens)
        all_total += len(para.tokens)
        if bias == side:
            side_counts.update(para.tokens)
            side_total += len(para.tokens)
    if side_total == 0:
        raise MetricError(f"no {side} paragraphs in the context slice of {subframe!r}")

    scored = []
    for word, c_side in side_counts.items():
        fraction = df[word] / n_paras
        in_band = min_df <= fraction <= max_df
        keep = in_band if df_mode == "band" else not in_band
        if not keep:
            continue
        score = math.log((c_side / side_total) / (all_counts[word] / all_total))
        scored.append((word, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:top_m]


def ideology_rank_correlations(
    corpus: Corpus,
    article_frames: Mapping[str, Sequence[str]],
    article_subframes: Mapping[str, Sequence[str]],
) -> dict:
    """Yearly usage-frequency rank correlations between and within sides.

    Between: per year, Spearman of the left vs right ranking, averaged over
    years. Within: Spearman between consecutive years of the same side.
    Years with fewer than 2 shared items are skipped.
    """
    def usage(docs: Sequence, table: Mapping[str, Sequence[str]]) -> Ranking | None:
        counts: Counter = Counter()
        for doc in docs:
            for item in table.get(doc.id, ()):
                counts[item] += 1
        if len(counts) < 2:
            return None
        return Ranking.from_scores({k: float(v) for k, v in counts.items()})

    by_year_side: dict[int, dict[str, list]] = defaultdict(lambda: {LEFT: [], RIGHT: []})
    for doc in corpus:
        if doc.bias is None or doc.year is None:
            continue
        by_year_side[doc.year][doc.bias].append(doc)

    years = sorted(by_year_side)
    result = {
        "between": {"frame": [], "subframe": []},
        "within": {
            LEFT: {"frame": [], "subframe": []},
            RIGHT: {"frame": [], "subframe": []},
        },
    }
    tables = {"frame": article_frames, "subframe": article_subframes}

    for year in years:
        for kind, table in tables.items():
            left = usage(by_year_side[year][LEFT], table)
            right = usage(by_year_side[year][RIGHT], table)
            if left is None or right is None:
                continue
            try:
                result["between"][kind].append(spearman(left, right))
            except MetricError:
                continue
    for side in (LEFT, RIGHT):
        for y1, y2 in zip(years, years[1:]):
            for kind, table in tables.items():
                a = usage(by_year_side[y1][side], table)
                b = usage(by_year_side[y2][side], table)
                if a is None or b is None:
                    continue
                try:
                    result["within"][side][kind].append(spearman(a, b))
                except MetricError:
                    continue

    def summarize(values: list[float]) -> dict:
        if not values:
            return {"mean": None, "std": None, "n": 0}
        arr = np.asarray(values)
        return {"mean": float(arr.mean()), "std": float(arr.std()), "n": len(values)}

    return {
        "between": {k: summarize(v) for k, v in result["between"].items()},
        "within": {
            side: {k: summarize(v) for k, v in result["within"][side].items()}
            for side in (LEFT, RIGHT)
        },
    }


# ---------------------------------------------------------------------------
# Emission helpers


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_plot_json(path: str | Path, series: list[dict]) -> None:
    """Plot-ready JSON: a list of {x, y, label} point series."""
    Path(path).write_text(json.dumps(series, indent=1, sort_keys=True))
