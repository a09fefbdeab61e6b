"""Node embeddings, relation-typed ranking losses, and the SGD trainer.

Vectors live in float64. Articles are never free parameters: their vectors
are the mean of the word vectors of the first `sentence_cap` sentences, so
gradients on an article flow into the shared word table. Community-centroid
pseudo-nodes are frozen (targets, not parameters). Training is single
threaded and bitwise deterministic given (seed, config, pair order).
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, Document, LABELS
from .graph import InfoGraph, Relation, TrainingPair, node_id

logger = logging.getLogger(__name__)

SIMILARITIES = ("cosine", "dot")

KIND_DIRECT = 0
KIND_ARTICLE = 1
KIND_FROZEN = 2

_MAGIC = b"FSCP"
_VERSION = 1


class TrainingDivergence(RuntimeError):
    """Raised when a non-finite loss or gradient shows up."""


@dataclass
class TrainConfig:
    dim: int = 300
    epochs: int = 30
    k_neg: int = 5
    learning_rate: float = 0.025
    lr_decay_floor: float = 0.1       # linear decay down to this fraction of the rate
    lambda_contains: float = 2.0      # article-to-expression relation weight
    lambdas: dict = field(default_factory=dict)
    similarity: str = "cosine"
    sentence_cap: int = 20
    seed: int = 0
    resample_each_epoch: bool = True

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"similarity must be one of {SIMILARITIES}")
        if self.sentence_cap < 1:
            raise ValueError("sentence_cap must be >= 1")
        if self.lambda_contains <= 0 or any(v <= 0 for v in self.lambdas.values()):
            raise ValueError("relation weights must be positive")

    def lambda_for(self, relation: Relation) -> float:
        if relation in self.lambdas:
            return self.lambdas[relation]
        if relation.value in self.lambdas:
            return self.lambdas[relation.value]
        if relation is Relation.CONTAINS:
            return self.lambda_contains
        return 1.0

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "epochs": self.epochs,
            "k_neg": self.k_neg,
            "learning_rate": self.learning_rate,
            "lr_decay_floor": self.lr_decay_floor,
            "lambda_contains": self.lambda_contains,
            "lambdas": {
                (k.value if isinstance(k, Relation) else k): v
                for k, v in self.lambdas.items()
            },
            "similarity": self.similarity,
            "sentence_cap": self.sentence_cap,
            "seed": self.seed,
            "resample_each_epoch": self.resample_each_epoch,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in raw.items() if k in known})


class DocumentEncoder:
    """Mean pooling over word vectors of the first `sentence_cap` sentences."""

    def __init__(self, vocab: Mapping[str, int], word_vecs: np.ndarray, sentence_cap: int):
        self.vocab = vocab
        self.word_vecs = word_vecs
        self.sentence_cap = sentence_cap

    def token_indices(self, doc: Document) -> np.ndarray:
        idx = []
        for n_sent, sent in enumerate(doc.sentences()):
            if n_sent >= self.sentence_cap:
                break
            for tok in sent:
                i = self.vocab.get(tok)
                if i is not None:
                    idx.append(i)
        return np.asarray(idx, dtype=np.int64)

    def encode_indices(self, idx: np.ndarray) -> np.ndarray:
        if idx.size == 0:
            return np.zeros(self.word_vecs.shape[1])
        return self.word_vecs[idx].mean(axis=0)

    def encode(self, doc: Document) -> np.ndarray:
        idx = self.token_indices(doc)
        if idx.size == 0:
            logger.warning("document %s has no in-vocabulary tokens; zero vector", doc.id)
        return self.encode_indices(idx)


def encode_document(doc: Document, encoder: DocumentEncoder) -> np.ndarray:
    return encoder.encode(doc)


class EmbeddingStore:
    """The embedding function: direct node vectors plus the shared word table."""

    def __init__(self, dim: int, vocab: Mapping[str, int], word_vecs: np.ndarray,
                 sentence_cap: int):
        self.dim = dim
        self.vocab = dict(vocab)
        self.word_vecs = word_vecs
        self.encoder = DocumentEncoder(self.vocab, self.word_vecs, sentence_cap)
        self._rows: dict[str, int] = {}
        self._kinds: dict[str, int] = {}
        self._matrix = np.zeros((0, dim))
        self.article_tokens: dict[str, np.ndarray] = {}

    # -- node management ---------------------------------------------------

    def add_direct(self, node: str, vector: np.ndarray, frozen: bool = False) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.dim,):
            raise ValueError(f"vector for {node} has shape {vector.shape}")
        if node in self._rows:
            self._matrix[self._rows[node]] = vector
        else:
            self._rows[node] = len(self._matrix)
            self._matrix = np.vstack([self._matrix, vector[None, :]])
        self._kinds[node] = KIND_FROZEN if frozen else KIND_DIRECT

    def add_article(self, node: str, token_idx: np.ndarray) -> None:
        self.article_tokens[node] = np.asarray(token_idx, dtype=np.int64)
        self._kinds[node] = KIND_ARTICLE
        if token_idx.size == 0:
            logger.warning("article %s has no in-vocabulary tokens; zero vector", node)

    def remove_node(self, node: str) -> None:
        # only used for retiring centroid pseudo-nodes between EM iterations
        if self._kinds.get(node) == KIND_ARTICLE:
            del self.article_tokens[node]
        elif node in self._rows:
            row = self._rows.pop(node)
            self._matrix = np.delete(self._matrix, row, axis=0)
            for other, r in self._rows.items():
                if r > row:
                    self._rows[other] = r - 1
        self._kinds.pop(node, None)

    def __contains__(self, node: str) -> bool:
        return node in self._kinds

    def nodes(self) -> tuple[str, ...]:
        return tuple(sorted(self._kinds))

    def kind(self, node: str) -> int:
        return self._kinds[node]

    def vector(self, node: str) -> np.ndarray:
        kind = self._kinds[node]
        if kind == KIND_ARTICLE:
            return self.encoder.encode_indices(self.article_tokens[node])
        return self._matrix[self._rows[node]]

    def set_vector(self, node: str, vector: np.ndarray) -> None:
        if self._kinds[node] == KIND_ARTICLE:
            raise ValueError("article vectors are derived from the encoder")
        self._matrix[self._rows[node]] = np.asarray(vector, dtype=np.float64)

    def matrix_for(self, ids: Sequence[str]) -> np.ndarray:
        return np.stack([self.vector(n) for n in ids]) if ids else np.zeros((0, self.dim))

    def encode_tokens(self, tokens: Iterable[str]) -> np.ndarray:
        idx = np.asarray(
            [self.vocab[t] for t in tokens if t in self.vocab], dtype=np.int64
        )
        return self.encoder.encode_indices(idx)

    # -- gradient application ----------------------------------------------

    def apply_gradient(self, node: str, grad: np.ndarray, step: float) -> None:
        kind = self._kinds[node]
        if kind == KIND_FROZEN:
            return
        if kind == KIND_ARTICLE:
            idx = self.article_tokens[node]
            if idx.size:
                np.add.at(self.word_vecs, idx, (-step / idx.size) * grad)
        else:
            self._matrix[self._rows[node]] -= step * grad


def build_store(
    graph: InfoGraph, corpus: Corpus, cfg: TrainConfig, rng: np.random.Generator
) -> EmbeddingStore:
    """Initialize vectors uniform in [-.5/d, .5/d]; articles get token indices."""
    vocab_words = sorted({tok for doc in corpus for tok in doc.tokens()})
    vocab = {w: i for i, w in enumerate(vocab_words)}
    scale = 0.5 / cfg.dim
    word_vecs = rng.uniform(-scale, scale, size=(len(vocab), cfg.dim))
    store = EmbeddingStore(cfg.dim, vocab, word_vecs, cfg.sentence_cap)
    direct_nodes = [
        n
        for t in sorted(graph.nodes)
        if t != "article"
        for n in graph.nodes[t]
    ]
    vectors = rng.uniform(-scale, scale, size=(len(direct_nodes), cfg.dim))
    for node, vec in zip(direct_nodes, vectors):
        store.add_direct(node, vec)
    for doc in corpus:
        store.add_article(node_id("article", doc.id), store.encoder.token_indices(doc))
    return store


# ---------------------------------------------------------------------------
# Losses and gradients


def pair_loss(sim_pos: float, sim_neg: float) -> float:
    """-ln(e^sp / (e^sp + e^sn)) via overflow-safe log-sum-exp."""
    return float(np.logaddexp(0.0, sim_neg - sim_pos))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _cosine_sims(a: np.ndarray, targets: np.ndarray):
    na = np.linalg.norm(a)
    nt = np.linalg.norm(targets, axis=1)
    denom = na * nt
    safe = denom > 0
    sims = np.zeros(len(targets))
    sims[safe] = (targets[safe] @ a) / denom[safe]
    return sims, na, nt, safe


def _pair_step(a, pos, negs, mode):
    """Loss and analytic gradients for one (anchor, positive, negatives) triple.

    Returns (loss, grad_anchor, grad_pos, grad_negs). Zero-norm vectors under
    cosine contribute similarity 0 with zero gradient.
    """
    k = len(negs)
    targets = np.vstack([pos[None, :], negs])
    if mode == "cosine":
        sims, na, nt, safe = _cosine_sims(a, targets)
    else:
        sims = targets @ a
    s_pos = sims[0]
    s_neg = sims[1:]
    z = s_neg - s_pos
    loss = float(np.mean(np.logaddexp(0.0, z)))
    g = _sigmoid(z) / k                      # dL/ds_j for each negative
    d_spos = -float(np.sum(g))               # dL/ds_pos

    if mode == "dot":
        grad_a = d_spos * pos + negs.T @ g
        grad_pos = d_spos * a
        grad_negs = np.outer(g, a)
        return loss, grad_a, grad_pos, grad_negs

    # cosine: ds/du = v/(|u||v|) - s*u/|u|^2 ; ds/dv symmetric
    grad_a = np.zeros_like(a)
    grad_negs = np.zeros_like(negs)
    grad_pos = np.zeros_like(pos)
    if na > 0:
        coeffs = np.concatenate(([d_spos], g))       # dL/ds per target row
        rows = safe & (coeffs != 0.0)
        if rows.any():
            w = coeffs[rows] / nt[rows]
            grad_a = (targets[rows].T @ w) / na
            grad_a -= (np.sum(coeffs[rows] * sims[rows]) / na**2) * a
            # target-side gradients
            tr = np.where(rows)[0]
            for j in tr:
                gt = coeffs[j] * (a / (na * nt[j]) - sims[j] * targets[j] / nt[j] ** 2)
                if j == 0:
                    grad_pos = gt
                else:
                    grad_negs[j - 1] = gt
    return loss, grad_a, grad_pos, grad_negs


def relation_loss(
    pairs: Sequence[TrainingPair], store: EmbeddingStore, cfg: TrainConfig
) -> float:
    """Mean pair loss over a relation's pairs and their negatives (no update)."""
    if not pairs:
        logger.warning("relation_loss called with an empty pair set")
        return 0.0
    total = 0.0
    for pair in pairs:
        a = store.vector(pair.anchor)
        pos = store.vector(pair.positive)
        negs = store.matrix_for(pair.negatives)
        loss, *_ = _pair_step(a, pos, negs, cfg.similarity)
        total += loss
    return total / len(pairs)


def total_objective(
    pairs_by_relation: Mapping[Relation, Sequence[TrainingPair]],
    store: EmbeddingStore,
    cfg: TrainConfig,
) -> float:
    """Sum over relations of lambda_r times the relation's mean loss."""
    return sum(
        cfg.lambda_for(rel) * relation_loss(pairs, store, cfg)
        for rel, pairs in pairs_by_relation.items()
    )


def objective_gradients(
    pairs_by_relation: Mapping[Relation, Sequence[TrainingPair]],
    store: EmbeddingStore,
    cfg: TrainConfig,
):
    """Analytic gradient of the total objective.

    Returns (loss, node gradients for direct nodes, word-table gradient).
    Frozen nodes are constants and get no entry.
    """
    node_grads: dict[str, np.ndarray] = {}
    word_grads = np.zeros_like(store.word_vecs)
    total = 0.0

    def accumulate(node: str, grad: np.ndarray, weight: float) -> None:
        kind = store.kind(node)
        if kind == KIND_FROZEN:
            return
        if kind == KIND_ARTICLE:
            idx = store.article_tokens[node]
            if idx.size:
                np.add.at(word_grads, idx, (weight / idx.size) * grad)
        else:
            if node not in node_grads:
                node_grads[node] = np.zeros(store.dim)
            node_grads[node] += weight * grad

    for rel, pairs in pairs_by_relation.items():
        if not pairs:
            continue
        lam = cfg.lambda_for(rel)
        weight = lam / len(pairs)
        rel_total = 0.0
        for pair in pairs:
            a = store.vector(pair.anchor)
            pos = store.vector(pair.positive)
            negs = store.matrix_for(pair.negatives)
            loss, ga, gp, gn = _pair_step(a, pos, negs, cfg.similarity)
            rel_total += loss
            accumulate(pair.anchor, ga, weight)
            accumulate(pair.positive, gp, weight)
            for neg, g in zip(pair.negatives, gn):
                accumulate(neg, g, weight)
        total += lam * rel_total / len(pairs)
    return total, node_grads, word_grads


def train_epoch(
    store: EmbeddingStore,
    pairs_by_relation: Mapping[Relation, Sequence[TrainingPair]],
    cfg: TrainConfig,
    rng: np.random.Generator,
    lr: float | None = None,
) -> dict[Relation, float]:
    """One SGD pass in shuffled pair order; per-pair updates scaled by lambda_r.

    Reported losses are the pre-update per-pair values averaged per relation.
    Non-finite values abort with the offending pair named.
    """
    lr = cfg.learning_rate if lr is None else lr
    tagged = [
        (rel, pair)
        for rel in sorted(pairs_by_relation, key=lambda r: r.value)
        for pair in pairs_by_relation[rel]
    ]
    totals: dict[Relation, float] = {rel: 0.0 for rel in pairs_by_relation}
    counts: dict[Relation, int] = {rel: 0 for rel in pairs_by_relation}
    order = rng.permutation(len(tagged))
    for i in order:
        rel, pair = tagged[i]
        a = store.vector(pair.anchor)
        pos = store.vector(pair.positive)
        negs = store.matrix_for(pair.negatives)
        loss, ga, gp, gn = _pair_step(a, pos, negs, cfg.similarity)
        if not np.isfinite(loss):
            raise TrainingDivergence(
                f"non-finite loss on {rel.value} pair ({pair.anchor}, {pair.positive})"
            )
        totals[rel] += loss
        counts[rel] += 1
        step = lr * cfg.lambda_for(rel)
        store.apply_gradient(pair.anchor, ga, step)
        store.apply_gradient(pair.positive, gp, step)
        for neg, g in zip(pair.negatives, gn):
            store.apply_gradient(neg, g, step)
    return {rel: (totals[rel] / counts[rel] if counts[rel] else 0.0) for rel in totals}


def train(
    store: EmbeddingStore,
    sampler,
    cfg: TrainConfig,
    rng: np.random.Generator,
    extra_pairs: Mapping[Relation, Sequence[TrainingPair]] | None = None,
    lr_scale: float = 1.0,
) -> list[dict]:
    """Run cfg.epochs SGD passes with linear learning-rate decay.

    `sampler(rng)` returns the base-relation pairs; it is re-invoked per
    epoch when cfg.resample_each_epoch is set. `extra_pairs` (cohesion and
    inferred-label sets) stay fixed across the call. `lr_scale` lets an
    outer loop continue a decay schedule across repeated calls.
    """
    history: list[dict] = []
    pairs = sampler(rng)
    for epoch in range(cfg.epochs):
        if cfg.resample_each_epoch and epoch > 0:
            pairs = sampler(rng)
        merged: dict[Relation, Sequence[TrainingPair]] = dict(pairs)
        if extra_pairs:
            for rel, ps in extra_pairs.items():
                if ps:
                    merged[rel] = ps
        frac = epoch / max(cfg.epochs - 1, 1)
        lr = lr_scale * cfg.learning_rate * (1.0 - (1.0 - cfg.lr_decay_floor) * frac)
        losses = train_epoch(store, merged, cfg, rng, lr=lr)
        history.append(
            {"epoch": epoch, "lr": lr, "losses": {r.value: v for r, v in losses.items()}}
        )
    return history


# ---------------------------------------------------------------------------
# Inference


def similarity(u: np.ndarray, v: np.ndarray, mode: str = "cosine") -> float:
    if mode == "dot":
        return float(u @ v)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


def infer_bias(node: str, store: EmbeddingStore, mode: str = "cosine"):
    """Label with maximal similarity, the margin over the other label, tie flag."""
    vec = store.vector(node)
    sims = {
        label: similarity(vec, store.vector(node_id("label", label)), mode)
        for label in LABELS
    }
    left, right = sims[LABELS[0]], sims[LABELS[1]]
    if left == right:
        return LABELS[0], 0.0, True
    if left > right:
        return LABELS[0], left - right, False
    return LABELS[1], right - left, False


# ---------------------------------------------------------------------------
# Checkpoints


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def save_store(store: EmbeddingStore, path: str | Path, cfg: TrainConfig | None = None) -> None:
    """Binary checkpoint: header, node table (f32), word table; JSON manifest."""
    path = Path(path)
    nodes = store.nodes()
    words = sorted(store.vocab, key=store.vocab.get)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, store.dim, len(nodes)))
        fh.write(struct.pack("<I", len(words)))
        for node in nodes:
            fh.write(_pack_str(node))
            fh.write(struct.pack("<B", store.kind(node)))
            fh.write(np.asarray(store.vector(node), dtype="<f4").tobytes())
        for word in words:
            fh.write(_pack_str(word))
            fh.write(np.asarray(store.word_vecs[store.vocab[word]], dtype="<f4").tobytes())
    if cfg is not None:
        manifest = path.with_suffix(path.suffix + ".manifest.json")
        manifest.write_text(json.dumps(cfg.to_dict(), indent=1, sort_keys=True))


def load_store(
    path: str | Path,
    corpus: Corpus | None = None,
    sentence_cap: int = 20,
) -> EmbeddingStore:
    """Load a checkpoint; with a corpus, article vectors rebind to the encoder."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not an embedding checkpoint")
        version, dim, n_nodes = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (n_words,) = struct.unpack("<I", fh.read(4))
        node_rows = []
        for _ in range(n_nodes):
            node = _read_str(fh)
            (kind,) = struct.unpack("<B", fh.read(1))
            vec = np.frombuffer(fh.read(4 * dim), dtype="<f4").astype(np.float64)
            node_rows.append((node, kind, vec))
        words = []
        vecs = np.zeros((n_words, dim))
        for i in range(n_words):
            word = _read_str(fh)
            vecs[i] = np.frombuffer(fh.read(4 * dim), dtype="<f4").astype(np.float64)
            words.append(word)
    vocab = {w: i for i, w in enumerate(words)}
    store = EmbeddingStore(dim, vocab, vecs, sentence_cap)
    docs = {node_id("article", d.id): d for d in corpus} if corpus is not None else {}
    for node, kind, vec in node_rows:
        if kind == KIND_ARTICLE and node in docs:
            store.add_article(node, store.encoder.token_indices(docs[node]))
        elif kind == KIND_ARTICLE:
            store.add_direct(node, vec, frozen=True)
        else:
            store.add_direct(node, vec, frozen=kind == KIND_FROZEN)
    return store


def load_word_table(path: str | Path) -> tuple[dict[str, int], np.ndarray]:
    """Text word-vector import: `word v1 ... vd` per line."""
    words: list[str] = []
    rows: list[np.ndarray] = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(f"{path}: line {line_no}: inconsistent dimension")
            words.append(parts[0])
            rows.append(vec)
    if not rows:
        raise ValueError(f"{path}: empty word table")
    return {w: i for i, w in enumerate(words)}, np.vstack(rows)
