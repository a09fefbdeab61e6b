"""Synthetic worlds with planted communities, biases, and subframe usage.

The generator is the oracle for the pipeline: every article, user, share and
follow has known ground truth. Article text is a token-pool model: mostly
background tokens, a slice of the planted subframe's pool, and a few exact
indicator bigram insertions. Off-community shares stay within the user's own
ideology (the homophily literature's behavior); off-fidelity follows go to
the opposite side. Generation is bitwise deterministic per seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Corpus, Document, SocialEdges, LABELS, LEFT, RIGHT
from .lexicon import POLICY_FRAMES, Subframe, SubframeMap
from .embedding import infer_bias
from .graph import node_id, strip_type
from .community import PipelineResult

logger = logging.getLogger(__name__)


class SynthError(ValueError):
    """Raised for invalid world specifications."""


@dataclass
class WorldSpec:
    k_true: int = 3
    users_per_community: int = 20
    articles_per_community: int = 100
    influencers_per_side: int = 8
    bias_mixture: tuple[float, ...] = (1.0, 0.5, 0.0)
    homophily: float = 0.9
    follow_fidelity: float = 0.9
    unshared_fraction: float = 0.5
    in_community_bias_preference: float = 0.9  # P(in-community share targets own-bias articles)
    seed: int = 7
    # text model
    subframes_per_side: int = 3
    pool_size: int = 40
    indicators_per_subframe: int = 6
    background_size: int = 150
    sentences_per_article: int = 8
    tokens_per_sentence: int = 12
    subframe_token_rate: float = 0.3
    unshared_token_rate: float = 0.3
    indicator_insertions: int = 3
    subframe_preference: float = 0.9   # P(article uses its community's preferred subframe)
    unshared_vocab_overlap: float = 1.0  # P(unshared filler token comes from the shared half)
    shares_per_user: int = 5
    follows_per_user: int = 3

    def __post_init__(self):
        if self.k_true < 2:
            raise SynthError("k_true must be >= 2")
        if len(self.bias_mixture) != self.k_true:
            raise SynthError("bias_mixture must list one value per community")
        for p in (self.homophily, self.follow_fidelity, self.unshared_fraction,
                  *self.bias_mixture):
            if not 0.0 <= p <= 1.0:
                raise SynthError(f"probability {p} outside [0, 1]")
        if self.pool_size < 2 * self.indicators_per_subframe + 1:
            raise SynthError("pool_size too small for the indicator count")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def from_dict(cls, raw: Mapping) -> "WorldSpec":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in raw.items() if k in known}
        if "bias_mixture" in kwargs:
            kwargs["bias_mixture"] = tuple(kwargs["bias_mixture"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "WorldSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def noiseless_spec(**overrides) -> WorldSpec:
    """The fully separable world: pure communities, no cross edges."""
    base = dict(
        bias_mixture=(1.0, 0.0, 1.0),
        homophily=1.0,
        follow_fidelity=1.0,
        unshared_fraction=0.0,
        seed=7,
    )
    base.update(overrides)
    return WorldSpec(**base)


@dataclass
class GroundTruth:
    user_community: dict[str, int]
    user_bias: dict[str, str]
    article_bias: dict[str, str]
    article_subframe: dict[str, str]
    bias_mixture: tuple[float, ...]

    def to_json(self, path: str | Path) -> None:
        payload = {
            "user_community": self.user_community,
            "user_bias": self.user_bias,
            "article_bias": self.article_bias,
            "article_subframe": self.article_subframe,
            "bias_mixture": list(self.bias_mixture),
        }
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "GroundTruth":
        raw = json.loads(Path(path).read_text())
        return cls(
            user_community={k: int(v) for k, v in raw["user_community"].items()},
            user_bias=dict(raw["user_bias"]),
            article_bias=dict(raw["article_bias"]),
            article_subframe=dict(raw["article_subframe"]),
            bias_mixture=tuple(raw["bias_mixture"]),
        )


@dataclass
class SynthWorld:
    spec: WorldSpec
    corpus: Corpus
    edges: SocialEdges
    submap: SubframeMap
    truth: GroundTruth
    external_scores: dict[str, float]


def _subframe_name(side: str, i: int) -> str:
    return f"{side} Point {i}"


def generate(spec: WorldSpec) -> SynthWorld:
    """Build the world: vocabulary, users, articles, edges, external scores."""
    rng = np.random.default_rng(spec.seed)
    background = [f"bg{i:03d}" for i in range(spec.background_size)]

    subframes: dict[str, Subframe] = {}
    side_subframes = {LEFT: [], RIGHT: []}
    pools: dict[str, dict[str, list[str]]] = {}
    indicators: dict[str, list[str]] = {}
    frame_cycle = 0
    for side, prefix in ((LEFT, "l"), (RIGHT, "r")):
        for s in range(spec.subframes_per_side):
            name = _subframe_name(side, s)
            tokens = [f"{prefix}{s}tok{j:02d}" for j in range(spec.pool_size)]
            grams = [
                f"{tokens[2 * m]} {tokens[2 * m + 1]}"
                for m in range(spec.indicators_per_subframe)
            ]
            # filler tokens never include indicator tokens, so indicator
            # bigrams appear only where planted; shared and unshared articles
            # draw filler from disjoint halves so the raw encoder cannot
            # memorize unshared vocabulary from social training signal alone
            filler = tokens[2 * spec.indicators_per_subframe :]
            half = len(filler) // 2
            pools[name] = {"shared": filler[:half], "unshared": filler[half:]}
            indicators[name] = grams
            frame = POLICY_FRAMES[frame_cycle % len(POLICY_FRAMES)]
            frame_cycle += 1
            subframes[name] = Subframe(name=name, frame=frame, indicators=tuple(grams))
            side_subframes[side].append(name)
    submap = SubframeMap(subframes)

    users: list[str] = []
    user_community: dict[str, int] = {}
    user_bias: dict[str, str] = {}
    for k in range(spec.k_true):
        for i in range(spec.users_per_community):
            user = f"user{k}_{i:02d}"
            users.append(user)
            user_community[user] = k
            user_bias[user] = LEFT if rng.random() < spec.bias_mixture[k] else RIGHT

    influencers: dict[str, str] = {}
    for side, prefix in ((LEFT, "polL"), (RIGHT, "polR")):
        for i in range(spec.influencers_per_side):
            influencers[f"{prefix}{i:02d}"] = side
    left_pols = sorted(p for p, s in influencers.items() if s == LEFT)
    right_pols = sorted(p for p, s in influencers.items() if s == RIGHT)

    external_scores = {}
    for p in left_pols:
        external_scores[p] = round(float(rng.uniform(0.0, 0.4)), 6)
    for p in right_pols:
        external_scores[p] = round(float(rng.uniform(0.6, 1.0)), 6)

    # articles; shared/unshared designation is drawn up front so bodies can
    # use the matching vocabulary half
    documents: list[Document] = []
    article_bias: dict[str, str] = {}
    article_subframe: dict[str, str] = {}
    article_community: dict[str, int] = {}
    shared_pool: dict[int, list[str]] = {k: [] for k in range(spec.k_true)}
    n_subframes = spec.subframes_per_side
    for k in range(spec.k_true):
        n_arts = spec.articles_per_community
        n_unshared = int(round(spec.unshared_fraction * n_arts))
        drop = set(rng.choice(n_arts, size=n_unshared, replace=False).tolist())
        preferred = k % n_subframes
        for i in range(n_arts):
            art = f"art{k}_{i:03d}"
            bias = LEFT if rng.random() < spec.bias_mixture[k] else RIGHT
            if rng.random() < spec.subframe_preference:
                sf_idx = preferred
            else:
                sf_idx = int(rng.integers(n_subframes))
            sf_name = side_subframes[bias][sf_idx]
            unshared_slot = i in drop
            body = _article_body(
                spec, rng, pools[sf_name], indicators[sf_name], background, unshared_slot
            )
            year = 2014 + int(rng.integers(0, 6))
            month = 1 + int(rng.integers(0, 12))
            documents.append(
                Document(
                    id=art,
                    topic="custom",
                    title=f"synthetic article {art}",
                    body=body,
                    source="synthetic",
                    bias=bias,
                    date=f"{year}-{month:02d}-15",
                    paragraphs=_paragraphs_from_body(art, body),
                )
            )
            article_bias[art] = bias
            article_subframe[art] = sf_name
            article_community[art] = k
            if i not in drop:
                shared_pool[k].append(art)
    corpus = Corpus(documents, "custom")

    # shares stay in-community with the homophily rate; in-community picks
    # prefer the user's own-bias articles, and out-of-community picks follow
    # the user's own ideology (homophilous cross-community sharing)
    shares: set[tuple[str, str]] = set()
    for user in users:
        k = user_community[user]
        own = shared_pool[k]
        own_same_bias = [a for a in own if article_bias[a] == user_bias[user]]
        foreign = [
            a
            for kk in range(spec.k_true)
            if kk != k
            for a in shared_pool[kk]
        ]
        foreign_same_bias = [a for a in foreign if article_bias[a] == user_bias[user]]
        drawn: set[str] = set()
        attempts = 0
        while len(drawn) < spec.shares_per_user and attempts < 50 * spec.shares_per_user:
            attempts += 1
            if rng.random() < spec.homophily or not foreign:
                if rng.random() < spec.in_community_bias_preference and own_same_bias:
                    pool = own_same_bias
                elif own:
                    pool = own
                else:
                    break
            else:
                pool = foreign_same_bias if foreign_same_bias else foreign
            drawn.add(pool[rng.integers(len(pool))])
        shares.update((user, a) for a in drawn)

    # a follow matches the community's bias distribution with the fidelity
    # rate: the intended side is a draw from the community mixture
    follows: set[tuple[str, str]] = set()
    for user in users:
        k = user_community[user]
        drawn = set()
        attempts = 0
        while len(drawn) < spec.follows_per_user and attempts < 50 * spec.follows_per_user:
            attempts += 1
            intended = LEFT if rng.random() < spec.bias_mixture[k] else RIGHT
            if rng.random() >= spec.follow_fidelity:
                intended = RIGHT if intended == LEFT else LEFT
            side = left_pols if intended == LEFT else right_pols
            drawn.add(side[rng.integers(len(side))])
        follows.update((user, p) for p in drawn)

    edges = SocialEdges(frozenset(shares), frozenset(follows), influencers)
    truth = GroundTruth(
        user_community=user_community,
        user_bias=user_bias,
        article_bias=article_bias,
        article_subframe=article_subframe,
        bias_mixture=spec.bias_mixture,
    )
    return SynthWorld(spec, corpus, edges, submap, truth, external_scores)


def _paragraphs_from_body(doc_id: str, body: str):
    from .corpus import Paragraph

    return tuple(
        Paragraph.from_text(doc_id, i, block)
        for i, block in enumerate(b for b in body.split("\n") if b.strip())
    )


def _article_body(
    spec: WorldSpec,
    rng: np.random.Generator,
    pool_halves: Mapping[str, Sequence[str]],
    grams: Sequence[str],
    background: Sequence[str],
    unshared: bool,
) -> str:
    rate = spec.unshared_token_rate if unshared else spec.subframe_token_rate
    sentences = []
    for _ in range(spec.sentences_per_article):
        tokens = []
        for _ in range(spec.tokens_per_sentence):
            if rng.random() < rate:
                if not unshared or rng.random() < spec.unshared_vocab_overlap:
                    pool = pool_halves["shared"]
                else:
                    pool = pool_halves["unshared"]
                tokens.append(pool[rng.integers(len(pool))])
            else:
                tokens.append(background[rng.integers(len(background))])
        sentences.append(tokens)
    for _ in range(spec.indicator_insertions):
        sent = sentences[rng.integers(len(sentences))]
        gram = grams[rng.integers(len(grams))]
        pos = int(rng.integers(0, len(sent) + 1))
        sent[pos:pos] = gram.split()
    rendered = [" ".join(s) + "." for s in sentences]
    # 4 sentences per paragraph
    paragraphs = [" ".join(rendered[i : i + 4]) for i in range(0, len(rendered), 4)]
    return "\n".join(paragraphs)


def write_world(world: SynthWorld, outdir: str | Path) -> dict[str, Path]:
    """Materialize the world in the corpus module's file formats."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": outdir / "corpus.jsonl",
        "shares": outdir / "shares.tsv",
        "follows": outdir / "follows.tsv",
        "affiliations": outdir / "affiliations.tsv",
        "external_scores": outdir / "external_scores.tsv",
        "subframe_map": outdir / "subframe_map.json",
        "truth": outdir / "truth.json",
        "worldspec": outdir / "worldspec.json",
    }
    world.corpus.to_jsonl(paths["corpus"])
    with open(paths["shares"], "w", encoding="utf-8") as fh:
        for user, art in sorted(world.edges.shares):
            fh.write(f"{user}\t{art}\n")
    with open(paths["follows"], "w", encoding="utf-8") as fh:
        for user, pol in sorted(world.edges.follows):
            fh.write(f"{user}\t{pol}\n")
    with open(paths["affiliations"], "w", encoding="utf-8") as fh:
        for pol in sorted(world.edges.affiliations):
            fh.write(f"{pol}\t{world.edges.affiliations[pol]}\n")
    with open(paths["external_scores"], "w", encoding="utf-8") as fh:
        for pol in sorted(world.external_scores):
            fh.write(f"{pol}\t{world.external_scores[pol]}\n")
    payload = {
        name: {"frame": sf.frame, "seeds": list(sf.indicators)}
        for name, sf in world.submap.subframes.items()
    }
    paths["subframe_map"].write_text(json.dumps(payload, indent=1, sort_keys=True))
    world.truth.to_json(paths["truth"])
    world.spec.to_json(paths["worldspec"])
    return paths


# ---------------------------------------------------------------------------
# Scoring against the planted truth


def match_communities(
    detected: Mapping[str, int], truth: Mapping[str, int]
) -> dict[int, int]:
    """Maximal-overlap matching of detected to planted communities.

    Hungarian assignment up to 32 communities, greedy above.
    """
    det_ids = sorted(set(detected.values()))
    true_ids = sorted(set(truth.values()))
    overlap = np.zeros((len(det_ids), len(true_ids)))
    for user, d in detected.items():
        t = truth.get(user)
        if t is None:
            continue
        overlap[det_ids.index(d), true_ids.index(t)] += 1
    if max(len(det_ids), len(true_ids)) <= 32:
        rows, cols = linear_sum_assignment(-overlap)
        return {det_ids[r]: true_ids[c] for r, c in zip(rows, cols)}
    mapping = {}
    used = set()
    order = np.argsort(-overlap, axis=None)
    for flat in order:
        r, c = divmod(int(flat), overlap.shape[1])
        if det_ids[r] in mapping or true_ids[c] in used:
            continue
        mapping[det_ids[r]] = true_ids[c]
        used.add(true_ids[c])
    return mapping


def score_against_truth(
    result: PipelineResult, truth: GroundTruth, edges: SocialEdges
) -> dict:
    """Accuracy and purity of the pipeline outputs vs the planted world.

    Invariant to community index permutations: purity maximizes per
    community, and the matched accuracy uses maximal-overlap matching.
    """
    shared_articles = {d for _, d in edges.shares}
    correct = {"shared": [0, 0], "unshared": [0, 0]}
    for art, bias in sorted(truth.article_bias.items()):
        node = node_id("article", art)
        predicted = result.article_labels.get(node)
        bucket = "shared" if art in shared_articles else "unshared"
        correct[bucket][1] += 1
        if predicted == bias:
            correct[bucket][0] += 1

    def ratio(pair):
        return pair[0] / pair[1] if pair[1] else None

    user_hits = 0
    user_total = 0
    for user, bias in sorted(truth.user_bias.items()):
        node = node_id("user", user)
        if node not in result.store:
            continue
        user_total += 1
        if infer_bias(node, result.store)[0] == bias:
            user_hits += 1

    out = {
        "label_accuracy_shared": ratio(correct["shared"]),
        "label_accuracy_unshared": ratio(correct["unshared"]),
        "label_accuracy_overall": ratio(
            [correct["shared"][0] + correct["unshared"][0],
             correct["shared"][1] + correct["unshared"][1]]
        ),
        "user_label_accuracy": user_hits / user_total if user_total else None,
        "k_error": None,
        "community_recovery_purity": None,
        "community_recovery_accuracy": None,
        "share_purity": None,
        "follow_purity": None,
    }
    if result.model is None or result.assignments is None:
        return out

    model = result.model
    out["k_error"] = abs(model.k - len(set(truth.user_community.values())))

    # user -> argmax community, for recovery scoring
    argmax_comm = {
        user: int(np.argmax(model.memberships[i]))
        for i, user in enumerate(model.user_ids)
    }
    members: dict[int, list[str]] = {k: [] for k in range(model.k)}
    for user, k in argmax_comm.items():
        members[k].append(user)
    truth_labels = {
        u: str(truth.user_community[strip_type(u)])
        for u in argmax_comm
        if strip_type(u) in truth.user_community
    }
    from .metrics import purity as purity_metric

    out["community_recovery_purity"] = purity_metric(
        {k: [u for u in v if u in truth_labels] for k, v in members.items()},
        truth_labels,
    )
    matching = match_communities(
        {u: k for u, k in argmax_comm.items() if strip_type(u) in truth.user_community},
        {u: truth.user_community[strip_type(u)] for u in argmax_comm
         if strip_type(u) in truth.user_community},
    )
    matched_hits = sum(
        1
        for u, k in argmax_comm.items()
        if strip_type(u) in truth.user_community
        and matching.get(k) == truth.user_community[strip_type(u)]
    )
    out["community_recovery_accuracy"] = matched_hits / len(argmax_comm)

    # share and follow purity over detected communities, truth labels
    share_members: dict[int, set[str]] = {k: set() for k in range(model.k)}
    follow_members: dict[int, set[str]] = {k: set() for k in range(model.k)}
    shares_of: dict[str, set[str]] = {}
    follows_of: dict[str, set[str]] = {}
    for u, a in edges.shares:
        shares_of.setdefault(u, set()).add(a)
    for u, p in edges.follows:
        follows_of.setdefault(u, set()).add(p)
    for user_node, communities in result.assignments.items():
        user = strip_type(user_node)
        for k in communities:
            share_members[k] |= shares_of.get(user, set())
            follow_members[k] |= follows_of.get(user, set())
    article_labels = dict(truth.article_bias)
    out["share_purity"] = purity_metric(
        {k: sorted(v) for k, v in share_members.items() if v}, article_labels
    )
    out["follow_purity"] = purity_metric(
        {k: sorted(v) for k, v in follow_members.items() if v},
        dict(edges.affiliations),
    )
    return out
