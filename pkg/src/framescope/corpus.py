"""Corpus ingestion: documents, paragraphs, social edges, external scores.

Documents arrive as line-delimited JSON (one document per line). Bodies are
split into paragraphs on newlines, paragraphs into sentences on terminal
punctuation, sentences into lowercase tokens. Everything is immutable after
ingestion, so concurrent reads are safe.
"""

from __future__ import annotations

import json
import logging
import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

TOPICS = ("abortion", "gun_control", "immigration", "custom")

LEFT = "Left"
RIGHT = "Right"
LABELS = (LEFT, RIGHT)

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.?!])\s+")


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus inputs."""


def normalize_label(value: str) -> str:
    low = value.strip().lower()
    if low in ("l", "left"):
        return LEFT
    if low in ("r", "right"):
        return RIGHT
    raise CorpusError(f"unknown bias label {value!r}")


def tokenize_sentence(text: str) -> tuple[str, ...]:
    """Lowercase, split on whitespace, strip edge punctuation; drop empties."""
    out = []
    for raw in text.lower().split():
        tok = raw.strip(string.punctuation)
        if tok:
            out.append(tok)
    return tuple(out)


def split_sentences(text: str) -> list[str]:
    """Sentence boundary: terminal `.?!` followed by whitespace."""
    return [s for s in _SENTENCE_BOUNDARY.split(text) if s.strip()]


@dataclass(frozen=True)
class Paragraph:
    doc_id: str
    index: int
    sentences: tuple[tuple[str, ...], ...]
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, doc_id: str, index: int, text: str) -> "Paragraph":
        sentences = tuple(
            sent
            for sent in (tokenize_sentence(s) for s in split_sentences(text))
            if sent
        )
        tokens = tuple(t for sent in sentences for t in sent)
        return cls(doc_id=doc_id, index=index, sentences=sentences, tokens=tokens)


@dataclass(frozen=True)
class Document:
    id: str
    topic: str
    title: str
    body: str
    source: str = ""
    bias: str | None = None
    date: str | None = None          # ISO calendar date, optional
    frame: str | None = None         # only set for frame-labeled seed corpora
    paragraphs: tuple[Paragraph, ...] = field(default_factory=tuple)

    @property
    def year(self) -> int | None:
        if not self.date:
            return None
        return int(self.date[:4])

    def sentences(self) -> Iterator[tuple[str, ...]]:
        for para in self.paragraphs:
            yield from para.sentences

    def tokens(self) -> Iterator[str]:
        for para in self.paragraphs:
            yield from para.tokens


def _build_document(raw: dict, topic: str, line_no: int) -> Document:
    required = ("id", "body")
    for key in required:
        if key not in raw or raw[key] in (None, ""):
            raise CorpusError(f"line {line_no}: missing required field {key!r}")
    doc_topic = raw.get("topic") or topic
    if doc_topic != topic:
        raise CorpusError(
            f"line {line_no}: document topic {doc_topic!r} does not match requested {topic!r}"
        )
    bias = raw.get("bias")
    if bias is not None:
        bias = normalize_label(bias)
    doc_id = str(raw["id"])
    body = str(raw["body"])
    paragraphs = tuple(
        Paragraph.from_text(doc_id, i, block)
        for i, block in enumerate(b for b in body.split("\n") if b.strip())
    )
    return Document(
        id=doc_id,
        topic=doc_topic,
        title=str(raw.get("title", "")),
        body=body,
        source=str(raw.get("source", "")),
        bias=bias,
        date=raw.get("date"),
        frame=raw.get("frame"),
        paragraphs=paragraphs,
    )


class Corpus:
    """Immutable collection of documents indexed by id."""

    def __init__(self, documents: Iterable[Document], topic: str):
        docs = list(documents)
        by_id: dict[str, Document] = {}
        for doc in docs:
            if doc.id in by_id:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            by_id[doc.id] = doc
        self.topic = topic
        self.documents: tuple[Document, ...] = tuple(docs)
        self._by_id = by_id

    def __len__(self) -> int:
        return len(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def get(self, doc_id: str) -> Document:
        return self._by_id[doc_id]

    def paragraphs(self) -> Iterator[Paragraph]:
        for doc in self.documents:
            yield from doc.paragraphs

    def labeled(self, bias: str | None = None) -> list[Document]:
        docs = [d for d in self.documents if d.bias is not None]
        if bias is not None:
            docs = [d for d in docs if d.bias == bias]
        return docs

    def to_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for doc in self.documents:
                row = {
                    "id": doc.id,
                    "topic": doc.topic,
                    "bias": doc.bias,
                    "title": doc.title,
                    "body": doc.body,
                    "source": doc.source,
                    "date": doc.date,
                }
                if doc.frame is not None:
                    row["frame"] = doc.frame
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def ingest_corpus(path: str | Path, topic: str) -> Corpus:
    """Read a line-delimited JSON document file into a Corpus.

    Malformed lines and duplicate ids raise CorpusError naming the line.
    An empty file yields an empty corpus with a warning.
    """
    if topic not in TOPICS:
        raise CorpusError(f"unknown topic {topic!r}; expected one of {TOPICS}")
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            doc = _build_document(raw, topic, line_no)
            if doc.id in seen:
                raise CorpusError(f"line {line_no}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            docs.append(doc)
    if not docs:
        logger.warning("ingested empty corpus from %s", path)
    return Corpus(docs, topic)


@dataclass(frozen=True)
class SocialEdges:
    shares: frozenset[tuple[str, str]]        # (user_id, doc_id)
    follows: frozenset[tuple[str, str]]       # (user_id, influencer_id)
    affiliations: dict[str, str]              # influencer_id -> Left|Right

    def users(self) -> set[str]:
        return {u for u, _ in self.shares} | {u for u, _ in self.follows}

    def share_counts(self) -> Counter:
        return Counter(u for u, _ in self.shares)


def load_edges(
    shares_path: str | Path,
    follows_path: str | Path,
    affiliations_path: str | Path,
) -> SocialEdges:
    """Load tab-separated share, follow, and affiliation files."""
    shares = set(_read_pairs(shares_path))
    follows = set(_read_pairs(follows_path))
    affiliations = {}
    for influencer, label in _read_pairs(affiliations_path):
        affiliations[influencer] = normalize_label(label)
    return SocialEdges(frozenset(shares), frozenset(follows), affiliations)


def _read_pairs(path: str | Path) -> Iterator[tuple[str, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path}: line {line_no}: expected 2 tab-separated fields")
            yield parts[0], parts[1]


def filter_users(edges: SocialEdges, min_shares: int, max_shares: float) -> SocialEdges:
    """Keep users with min_shares <= share count <= max_shares.

    Follow edges of removed users are dropped; affiliations are untouched.
    Idempotent: applying the same bounds twice changes nothing.
    """
    if min_shares > max_shares:
        raise ValueError("min_shares must not exceed max_shares")
    counts = edges.share_counts()
    kept = {u for u, c in counts.items() if min_shares <= c <= max_shares}
    # users with zero shares pass a min_shares of 0
    if min_shares == 0:
        kept |= {u for u, _ in edges.follows}
    shares = frozenset((u, d) for u, d in edges.shares if u in kept)
    follows = frozenset((u, p) for u, p in edges.follows if u in kept)
    return SocialEdges(shares, follows, dict(edges.affiliations))


def extract_ngrams(paragraph: Paragraph, n: int) -> Counter:
    """Contiguous within-sentence n-grams with multiplicity, space-joined."""
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2 or 3, got {n}")
    grams: Counter = Counter()
    for sent in paragraph.sentences:
        for i in range(len(sent) - n + 1):
            grams[" ".join(sent[i : i + n])] += 1
    return grams


def load_external_scores(path: str | Path) -> dict[str, float]:
    """Influencer ideology scores (conservative-to-liberal scale), TSV."""
    scores: dict[str, float] = {}
    for influencer, value in _read_pairs(path):
        score = float(value)
        if not math.isfinite(score):
            raise CorpusError(f"non-finite external score for {influencer!r}")
        scores[influencer] = score
    if len(scores) < 2:
        logger.warning("external scores file %s has fewer than 2 entries", path)
    return scores
