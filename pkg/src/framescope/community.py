"""Community detection: diagonal GMM over user embeddings inside an EM loop.

The outer loop alternates embedding training with mixture fitting. Each
iteration rebuilds two derived pair sets: cohesion pairs that pull members
(and the articles they share) toward their community centroid, and
inferred-label pairs that pull users and shared articles toward the ideology
label currently closest to them. The loop stops when the fraction of changed
article predictions stays under t_p for two consecutive iterations, or at
the iteration cap.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .corpus import Corpus, LABELS
from .graph import (
    BASE_RELATIONS,
    InfoGraph,
    Relation,
    TrainingPair,
    node_id,
    sample_base_pairs,
    strip_type,
)
from .embedding import (
    EmbeddingStore,
    TrainConfig,
    build_store,
    infer_bias,
    similarity,
    train,
)

logger = logging.getLogger(__name__)

_MODEL_MAGIC = b"FSGM"
_MODEL_VERSION = 1

VAR_FLOOR = 1e-6
MODES = ("label_propagation", "em", "em_sf")


def centroid_node(k: int) -> str:
    return node_id("community", str(k))


@dataclass
class CommunityModel:
    means: np.ndarray          # (K, d)
    variances: np.ndarray      # (K, d), diagonal covariances
    weights: np.ndarray        # (K,)
    memberships: np.ndarray    # (n, K) soft assignment rows summing to 1
    user_ids: tuple[str, ...]
    log_likelihood: float

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


class SelectKResult(NamedTuple):
    k: int
    model: CommunityModel
    bics: dict[int, float]


@dataclass
class CommunityConfig:
    k_min: int = 1
    k_max: int = 8
    t_n: float = 1.0
    t_p: float = 0.05
    assign_threshold: float = 0.5
    max_iterations: int = 20
    gmm_restarts: int = 3
    gmm_max_iters: int = 200
    gmm_tol: float = 1e-6
    change_scope: str = "both"  # shared | unshared | both
    iteration_lr_decay: float = 0.5  # geometric lr factor per EM iteration

    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, raw: Mapping) -> "CommunityConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in raw.items() if k in known})


# ---------------------------------------------------------------------------
# Gaussian mixture with diagonal covariance


def _log_gaussian_diag(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """(n, K) log densities of diagonal Gaussians."""
    n, d = x.shape
    out = np.empty((n, len(means)))
    for k in range(len(means)):
        diff = x - means[k]
        out[:, k] = -0.5 * (
            d * np.log(2.0 * np.pi)
            + np.sum(np.log(variances[k]))
            + np.sum(diff * diff / variances[k], axis=1)
        )
    return out


def _kmeanspp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(
            np.stack([np.sum((x - c) ** 2, axis=1) for c in centers]), axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(n)])
            continue
        probs = d2 / total
        centers.append(x[rng.choice(n, p=probs)])
    return np.stack(centers)


def fit_gmm(
    x: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iters: int = 200,
    tol: float = 1e-6,
    user_ids: Sequence[str] | None = None,
) -> CommunityModel:
    """EM for a diagonal-covariance mixture, k-means++ seeded.

    The log-likelihood is asserted non-decreasing at every iteration (1e-8
    slack for float noise). Collapsed components get their covariance floored
    with a warning.
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    means = _kmeanspp_centers(x, k, rng)
    base_var = np.maximum(x.var(axis=0), VAR_FLOOR)
    variances = np.tile(base_var, (k, 1))
    weights = np.full(k, 1.0 / k)

    prev_ll = -np.inf
    resp = np.full((n, k), 1.0 / k)
    floored = False
    for iteration in range(max_iters):
        # E step
        log_dens = _log_gaussian_diag(x, means, variances) + np.log(weights)
        norm = logsumexp(log_dens, axis=1)
        ll = float(norm.sum())
        resp = np.exp(log_dens - norm[:, None])
        if ll + 1e-8 < prev_ll:
            raise AssertionError(
                f"GMM log-likelihood decreased at iteration {iteration}: {prev_ll} -> {ll}"
            )
        if iteration > 0 and ll - prev_ll < tol:
            prev_ll = ll
            break
        prev_ll = ll
        # M step
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        for j in range(k):
            diff = x - means[j]
            var = (resp[:, j][:, None] * diff * diff).sum(axis=0) / nk[j]
            floored = floored or bool(np.any(var < VAR_FLOOR))
            variances[j] = np.maximum(var, VAR_FLOOR)
    if floored:
        logger.debug("k=%d fit touched the covariance floor %.0e", k, VAR_FLOOR)

    ids = tuple(user_ids) if user_ids is not None else tuple(
        f"u{i}" for i in range(n)
    )
    return CommunityModel(
        means=means,
        variances=variances,
        weights=weights,
        memberships=resp,
        user_ids=ids,
        log_likelihood=prev_ll,
    )


def model_log_likelihood(model: CommunityModel, x: np.ndarray) -> float:
    log_dens = _log_gaussian_diag(np.asarray(x, dtype=np.float64), model.means, model.variances)
    return float(logsumexp(log_dens + np.log(model.weights), axis=1).sum())


def bic(model: CommunityModel, x: np.ndarray) -> float:
    """p * ln n - 2 * ln L with p = K(2d+1) - 1 free parameters."""
    n, d = np.asarray(x).shape
    p = model.k * (2 * d + 1) - 1
    return p * np.log(n) - 2.0 * model_log_likelihood(model, x)


def select_k(
    x: np.ndarray,
    k_range: Sequence[int],
    t_n: float,
    rng: np.random.Generator,
    restarts: int = 3,
    max_iters: int = 200,
    tol: float = 1e-6,
    user_ids: Sequence[str] | None = None,
) -> SelectKResult:
    """Pick the component count at the BIC-curve knee.

    The knee is the interior K maximizing the discrete second difference of
    the BIC curve; it must exceed t_n, otherwise it is kept anyway with a
    warning. Degenerate ranges fall back to the minimum-BIC K.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range must be nonempty")
    n = len(x)
    ks = [k for k in ks if k <= n]
    if not ks:
        raise ValueError("all candidate K exceed the number of points")
    models: dict[int, CommunityModel] = {}
    bics: dict[int, float] = {}
    for k in ks:
        best = None
        for _ in range(restarts):
            model = fit_gmm(x, k, rng, max_iters=max_iters, tol=tol, user_ids=user_ids)
            if best is None or model.log_likelihood > best.log_likelihood:
                best = model
        models[k] = best
        bics[k] = bic(best, x)

    if len(ks) < 3:
        chosen = min(ks, key=lambda k: bics[k])
        logger.warning("k_range too small for knee detection; using min-BIC K=%d", chosen)
        return SelectKResult(chosen, models[chosen], bics)

    curvature = {}
    for i in range(1, len(ks) - 1):
        k_prev, k_mid, k_next = ks[i - 1], ks[i], ks[i + 1]
        curvature[k_mid] = bics[k_next] - 2.0 * bics[k_mid] + bics[k_prev]
    knee = max(curvature, key=lambda k: (curvature[k], -k))
    if curvature[knee] <= t_n:
        logger.warning(
            "BIC knee curvature %.3g does not exceed t_n=%.3g; keeping K=%d",
            curvature[knee],
            t_n,
            knee,
        )
    return SelectKResult(knee, models[knee], bics)


def assign_users(model: CommunityModel, threshold: float) -> dict[str, tuple[int, ...]]:
    """user -> communities with membership probability >= threshold."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    out: dict[str, tuple[int, ...]] = {}
    unassigned = 0
    for i, user in enumerate(model.user_ids):
        row = model.memberships[i]
        picked = tuple(int(k) for k in np.nonzero(row >= threshold)[0])
        if not picked:
            unassigned += 1
        out[user] = picked
    if unassigned:
        logger.info("%d users fall under no community at threshold %.2f", unassigned, threshold)
    return out


# ---------------------------------------------------------------------------
# Derived objectives


def update_centroid_nodes(store: EmbeddingStore, model: CommunityModel) -> list[str]:
    """(Re)write frozen centroid pseudo-nodes; retire stale ones."""
    stale = [n for n in store.nodes() if n.startswith("community:")]
    for node in stale:
        store.remove_node(node)
    names = []
    for k in range(model.k):
        name = centroid_node(k)
        store.add_direct(name, model.means[k], frozen=True)
        names.append(name)
    return names


def build_cohesion_pairs(
    assignments: Mapping[str, tuple[int, ...]],
    shares: Mapping[str, Sequence[str]],
    model: CommunityModel,
    k_neg: int,
    rng: np.random.Generator,
) -> list[TrainingPair]:
    """Member-to-centroid and shared-article-to-centroid pairs.

    Negatives come from the other centroids; with K - 1 < k_neg they are
    sampled with replacement (warned once).
    """
    all_centroids = [centroid_node(k) for k in range(model.k)]
    pairs: list[TrainingPair] = []
    seen_article: set[tuple[str, int]] = set()
    warned = False

    def negatives_for(k: int) -> tuple[str, ...] | None:
        nonlocal warned
        others = [c for i, c in enumerate(all_centroids) if i != k]
        if not others:
            return None
        if len(others) >= k_neg:
            idx = rng.choice(len(others), size=k_neg, replace=False)
        else:
            if not warned:
                logger.debug(
                    "only %d alternative centroids; sampling negatives with replacement",
                    len(others),
                )
                warned = True
            idx = rng.integers(0, len(others), size=k_neg)
        return tuple(others[i] for i in idx)

    for user in sorted(assignments):
        for k in assignments[user]:
            negs = negatives_for(k)
            if negs is None:
                continue
            pairs.append(TrainingPair(Relation.COHESION, user, centroid_node(k), negs))
            for article in sorted(shares.get(user, ())):
                if (article, k) in seen_article:
                    continue
                seen_article.add((article, k))
                negs_a = negatives_for(k)
                pairs.append(
                    TrainingPair(Relation.COHESION, article, centroid_node(k), negs_a)
                )
    return pairs


def label_communities(store: EmbeddingStore, model: CommunityModel, mode: str) -> dict[int, str]:
    """Community -> ideology label by centroid-label similarity."""
    out = {}
    for k in range(model.k):
        sims = {
            label: similarity(model.means[k], store.vector(node_id("label", label)), mode)
            for label in LABELS
        }
        out[k] = max(LABELS, key=lambda l: (sims[l], l == LABELS[0]))
    return out


def infer_labels(
    store: EmbeddingStore,
    model: CommunityModel,
    assignments: Mapping[str, tuple[int, ...]],
    shares_by_article: Mapping[str, Sequence[str]],
    mode: str,
):
    """Derive inferred-label pairs and per-article majority labels.

    Users pair with their own argmax-similar label. Each shared article gets
    the majority label over the communities of its sharers; ties skip the
    article for this iteration. The single negative is the opposite label.
    """
    community_label = label_communities(store, model, mode)
    pairs: list[TrainingPair] = []
    for user in sorted(assignments):
        label, _, tie = infer_bias(user, store, mode)
        if tie:
            continue
        other = LABELS[1] if label == LABELS[0] else LABELS[0]
        pairs.append(
            TrainingPair(
                Relation.INFERRED_LABEL,
                user,
                node_id("label", label),
                (node_id("label", other),),
            )
        )

    article_labels: dict[str, str] = {}
    skipped = 0
    for article in sorted(shares_by_article):
        votes = {LABELS[0]: 0, LABELS[1]: 0}
        for user in shares_by_article[article]:
            for k in assignments.get(user, ()):
                votes[community_label[k]] += 1
        if votes[LABELS[0]] == votes[LABELS[1]]:
            skipped += 1
            continue
        label = LABELS[0] if votes[LABELS[0]] > votes[LABELS[1]] else LABELS[1]
        article_labels[article] = label
        other = LABELS[1] if label == LABELS[0] else LABELS[0]
        pairs.append(
            TrainingPair(
                Relation.INFERRED_LABEL,
                article,
                node_id("label", label),
                (node_id("label", other),),
            )
        )
    if skipped:
        logger.info("%d shared articles skipped on tied community votes", skipped)
    return pairs, article_labels, community_label


# ---------------------------------------------------------------------------
# The outer loop


@dataclass
class PipelineResult:
    store: EmbeddingStore
    model: CommunityModel | None
    assignments: dict[str, tuple[int, ...]] | None
    article_labels: dict[str, str]
    community_labels: dict[int, str] | None
    report: list[dict] = field(default_factory=list)
    mode: str = "em_sf"


def shares_by_user(graph: InfoGraph) -> dict[str, list[str]]:
    table: dict[str, list[str]] = {}
    for user, article in graph.edges.get(Relation.SHARE, ()):
        table.setdefault(user, []).append(article)
    return table


def shares_by_article(graph: InfoGraph) -> dict[str, list[str]]:
    table: dict[str, list[str]] = {}
    for user, article in graph.edges.get(Relation.SHARE, ()):
        table.setdefault(article, []).append(user)
    return table


def relations_for_mode(mode: str) -> tuple[Relation, ...]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "em_sf":
        return BASE_RELATIONS
    return (Relation.SHARE, Relation.FOLLOW, Relation.AFFILIATION)


def predict_article_labels(
    store: EmbeddingStore,
    graph: InfoGraph,
    majority: Mapping[str, str] | None,
    mode: str,
) -> dict[str, str]:
    """Current label per article: community majority when available for a
    shared article, otherwise the embedding-space inference rule."""
    shared = set(shares_by_article(graph))
    out = {}
    for article in graph.nodes["article"]:
        if majority and article in shared and article in majority:
            out[article] = majority[article]
        else:
            out[article] = infer_bias(article, store, mode)[0]
    return out


def _changed_fraction(
    prev: Mapping[str, str],
    now: Mapping[str, str],
    shared: set[str],
    scope: str,
) -> float:
    if scope == "shared":
        keys = [a for a in now if a in shared]
    elif scope == "unshared":
        keys = [a for a in now if a not in shared]
    else:
        keys = list(now)
    if not keys:
        return 0.0
    changed = sum(1 for a in keys if prev.get(a) != now[a])
    return changed / len(keys)


def em_loop(
    graph: InfoGraph,
    corpus: Corpus,
    train_cfg: TrainConfig,
    comm_cfg: CommunityConfig,
    mode: str = "em_sf",
    store: EmbeddingStore | None = None,
) -> PipelineResult:
    """Interleave embedding training with community fitting until labels settle.

    Stops when the changed-label fraction is below t_p in two consecutive
    iterations, or at comm_cfg.max_iterations.
    """
    rng = np.random.default_rng(train_cfg.seed)
    if store is None:
        store = build_store(graph, corpus, train_cfg, rng)
    relations = relations_for_mode(mode)
    sampler = lambda r: sample_base_pairs(graph, relations, train_cfg.k_neg, r)
    user_shares = shares_by_user(graph)
    article_shares = shares_by_article(graph)
    shared_set = set(article_shares)
    users = list(graph.nodes["user"])

    prev_labels = predict_article_labels(store, graph, None, train_cfg.similarity)
    cohesion: list[TrainingPair] = []
    inferred: list[TrainingPair] = []
    report: list[dict] = []
    below_prev = False
    model = None
    assignments = None
    majority: dict[str, str] = {}
    community_labels: dict[int, str] | None = None

    for iteration in range(1, comm_cfg.max_iterations + 1):
        extra = {}
        if cohesion:
            extra[Relation.COHESION] = cohesion
        if inferred:
            extra[Relation.INFERRED_LABEL] = inferred
        history = train(
            store,
            sampler,
            train_cfg,
            rng,
            extra_pairs=extra or None,
            lr_scale=comm_cfg.iteration_lr_decay ** (iteration - 1),
        )

        x = store.matrix_for(users)
        result = select_k(
            x,
            comm_cfg.k_range(),
            comm_cfg.t_n,
            rng,
            restarts=comm_cfg.gmm_restarts,
            max_iters=comm_cfg.gmm_max_iters,
            tol=comm_cfg.gmm_tol,
            user_ids=users,
        )
        model = result.model
        assignments = assign_users(model, comm_cfg.assign_threshold)
        update_centroid_nodes(store, model)
        cohesion = build_cohesion_pairs(
            assignments, user_shares, model, train_cfg.k_neg, rng
        )
        inferred, majority, community_labels = infer_labels(
            store, model, assignments, article_shares, train_cfg.similarity
        )

        labels_now = predict_article_labels(store, graph, majority, train_cfg.similarity)
        change = _changed_fraction(prev_labels, labels_now, shared_set, comm_cfg.change_scope)
        report.append(
            {
                "iteration": iteration,
                "k": result.k,
                "bic_curve": {str(k): v for k, v in result.bics.items()},
                "label_change_fraction": change,
                "final_epoch_losses": history[-1]["losses"],
            }
        )
        prev_labels = labels_now
        if change < comm_cfg.t_p and below_prev:
            break
        below_prev = change < comm_cfg.t_p

    return PipelineResult(
        store=store,
        model=model,
        assignments=assignments,
        article_labels=prev_labels,
        community_labels=community_labels,
        report=report,
        mode=mode,
    )


def run_pipeline(
    graph: InfoGraph,
    corpus: Corpus,
    train_cfg: TrainConfig,
    comm_cfg: CommunityConfig,
    mode: str,
) -> PipelineResult:
    """Dispatch on mode: one embedding pass (label propagation) or the EM loop."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "label_propagation":
        rng = np.random.default_rng(train_cfg.seed)
        store = build_store(graph, corpus, train_cfg, rng)
        relations = relations_for_mode(mode)
        sampler = lambda r: sample_base_pairs(graph, relations, train_cfg.k_neg, r)
        history = train(store, sampler, train_cfg, rng)
        labels = predict_article_labels(store, graph, None, train_cfg.similarity)
        return PipelineResult(
            store=store,
            model=None,
            assignments=None,
            article_labels=labels,
            community_labels=None,
            report=[{"iteration": 1, "final_epoch_losses": history[-1]["losses"]}],
            mode=mode,
        )
    return em_loop(graph, corpus, train_cfg, comm_cfg, mode=mode)


# ---------------------------------------------------------------------------
# Model checkpoints


def save_model(model: CommunityModel, path: str | Path, manifest: Mapping | None = None) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<IIII", _MODEL_VERSION, model.k, model.dim, len(model.user_ids)))
        fh.write(np.asarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.asarray(model.means, dtype="<f8").tobytes())
        fh.write(np.asarray(model.variances, dtype="<f8").tobytes())
        fh.write(np.asarray(model.memberships, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.log_likelihood))
        for user in model.user_ids:
            raw = user.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)) + raw)
    if manifest is not None:
        path.with_suffix(path.suffix + ".manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True)
        )


def load_model(path: str | Path) -> CommunityModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MODEL_MAGIC:
            raise ValueError(f"{path} is not a community model checkpoint")
        version, k, d, n = struct.unpack("<IIII", fh.read(16))
        if version != _MODEL_VERSION:
            raise ValueError(f"unsupported model version {version}")
        weights = np.frombuffer(fh.read(8 * k), dtype="<f8").copy()
        means = np.frombuffer(fh.read(8 * k * d), dtype="<f8").reshape(k, d).copy()
        variances = np.frombuffer(fh.read(8 * k * d), dtype="<f8").reshape(k, d).copy()
        memberships = np.frombuffer(fh.read(8 * n * k), dtype="<f8").reshape(n, k).copy()
        (ll,) = struct.unpack("<d", fh.read(8))
        users = []
        for _ in range(n):
            (ln,) = struct.unpack("<I", fh.read(4))
            users.append(fh.read(ln).decode("utf-8"))
    return CommunityModel(means, variances, weights, memberships, tuple(users), ll)
