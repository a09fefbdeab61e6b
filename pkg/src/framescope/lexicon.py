"""Frame and subframe indicator lexicons induced by PMI.

A frame lexicon maps each policy frame to its top unigram indicators, ranked
by PMI between the word and the frame's documents. Subframe indicators are
bi/tri-grams mined from frame-annotated paragraphs and assigned to their
argmax-PMI frame. PMI uses the natural log throughout; only rankings matter,
so the base is free.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, Document, Paragraph, extract_ngrams, LEFT, RIGHT

logger = logging.getLogger(__name__)

# The 15 policy frames, in fixed ordinal order (used for tie-breaking).
POLICY_FRAMES = (
    "Economic",
    "Capacity and Resources",
    "Morality",
    "Fairness and Equality",
    "Legality, Constitutionality, Jurisdiction",
    "Policy Prescription and Evaluation",
    "Crime and Punishment",
    "Security and Defense",
    "Health and Safety",
    "Quality of Life",
    "Cultural Identity",
    "Public Sentiment",
    "Political",
    "External Regulation and Reputation",
    "Other",
)

_FRAME_ORDINAL = {name: i for i, name in enumerate(POLICY_FRAMES)}

NEG_INF = float("-inf")


class LexiconError(ValueError):
    """Raised for invalid lexicon inputs or configs."""


def frame_order_key(frame: str) -> tuple[int, str]:
    """Canonical frames first by ordinal, then unknown frames alphabetically."""
    return (_FRAME_ORDINAL.get(frame, len(POLICY_FRAMES)), frame)


@dataclass(frozen=True)
class FrameLexicon:
    """frame -> ranked (unigram, pmi) list, descending by score."""

    frames: dict[str, tuple[tuple[str, float], ...]]

    def words(self, frame: str) -> tuple[str, ...]:
        return tuple(w for w, _ in self.frames[frame])

    def score_table(self, frame: str) -> dict[str, float]:
        return dict(self.frames[frame])

    def to_json(self, path: str | Path) -> None:
        payload = {f: [[w, s] for w, s in entries] for f, entries in self.frames.items()}
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "FrameLexicon":
        payload = json.loads(Path(path).read_text())
        return cls({f: tuple((w, float(s)) for w, s in rows) for f, rows in payload.items()})


@dataclass(frozen=True)
class SubframeIndicatorLexicon:
    """frame -> (n-gram, pmi) entries; every n-gram in exactly one frame."""

    frames: dict[str, tuple[tuple[str, float], ...]]

    def all_grams(self) -> set[str]:
        return {g for entries in self.frames.values() for g, _ in entries}

    def to_json(self, path: str | Path) -> None:
        payload = {f: [[g, s] for g, s in entries] for f, entries in self.frames.items()}
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "SubframeIndicatorLexicon":
        payload = json.loads(Path(path).read_text())
        return cls({f: tuple((g, float(s)) for g, s in rows) for f, rows in payload.items()})


@dataclass(frozen=True)
class Subframe:
    name: str
    frame: str
    indicators: tuple[str, ...]
    seed_only: frozenset[str] = frozenset()


@dataclass(frozen=True)
class SubframeMap:
    subframes: dict[str, Subframe]

    def __len__(self) -> int:
        return len(self.subframes)

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.subframes))

    def indicator_to_subframe(self) -> dict[str, str]:
        table = {}
        for sf in self.subframes.values():
            for gram in sf.indicators:
                table[gram] = sf.name
        return table

    def all_indicators(self) -> tuple[str, ...]:
        return tuple(sorted(self.indicator_to_subframe()))


# ---------------------------------------------------------------------------
# PMI counting


class GramStats:
    """Single-pass gram counts per frame and corpus-wide.

    `annotated` pairs each paragraph with the frames assigned to it; a
    paragraph annotated with two frames contributes its grams to both frame
    counts but only once to the global count.
    """

    def __init__(
        self,
        annotated: Iterable[tuple[Paragraph, Sequence[str]]],
        orders: Sequence[int] = (2, 3),
    ):
        self.orders = tuple(orders)
        self.frame_counts: dict[str, Counter] = defaultdict(Counter)
        self.frame_totals: Counter = Counter()
        self.global_counts: Counter = Counter()
        self.global_total = 0
        self.paragraph_df: Counter = Counter()
        self.n_paragraphs = 0
        for para, frames in annotated:
            grams: Counter = Counter()
            for n in self.orders:
                grams.update(extract_ngrams(para, n))
            if not grams and not para.tokens:
                continue
            self.n_paragraphs += 1
            total = sum(grams.values())
            self.global_counts.update(grams)
            self.global_total += total
            self.paragraph_df.update(grams.keys())
            for frame in frames:
                self.frame_counts[frame].update(grams)
                self.frame_totals[frame] += total

    def pmi(self, gram: str, frame: str) -> float:
        """ln(P(g|f) / P(g)); -inf when the gram never occurs under the frame."""
        c_global = self.global_counts.get(gram, 0)
        if c_global == 0:
            raise LexiconError(f"gram {gram!r} does not occur in the corpus")
        c_frame = self.frame_counts.get(frame, Counter()).get(gram, 0)
        if c_frame == 0:
            return NEG_INF
        p_gf = c_frame / self.frame_totals[frame]
        p_g = c_global / self.global_total
        return math.log(p_gf / p_g)

    def paragraph_frequency(self, gram: str) -> float:
        if self.n_paragraphs == 0:
            return 0.0
        return self.paragraph_df.get(gram, 0) / self.n_paragraphs


def pmi(gram: str, frame: str, annotated: Iterable[tuple[Paragraph, Sequence[str]]],
        orders: Sequence[int] = (2, 3)) -> float:
    """Convenience one-shot PMI; builds the counters and evaluates one gram."""
    return GramStats(annotated, orders=orders).pmi(gram, frame)


# ---------------------------------------------------------------------------
# Frame lexicon (step 1)


def build_frame_lexicon(
    seed_corpus: Iterable[Document],
    top_k: int = 250,
    min_df: float = 0.005,
    max_df: float = 0.98,
    frames: Sequence[str] | None = None,
) -> FrameLexicon:
    """Rank unigrams per frame by PMI over a frame-labeled seed corpus.

    Words outside the document-frequency band [min_df, max_df] are discarded.
    When `frames` is given, a frame with zero seed documents is an error.
    """
    if not 0 <= min_df < max_df <= 1:
        raise LexiconError("require 0 <= min_df < max_df <= 1")
    docs = [d for d in seed_corpus if d.frame is not None]
    if not docs:
        raise LexiconError("seed corpus has no frame-labeled documents")
    frame_names = list(frames) if frames is not None else sorted(
        {d.frame for d in docs}, key=frame_order_key
    )
    doc_count_per_frame = Counter(d.frame for d in docs)
    for frame in frame_names:
        if doc_count_per_frame.get(frame, 0) == 0:
            raise LexiconError(f"frame {frame!r} has zero seed documents")

    n_docs = len(docs)
    df: Counter = Counter()
    frame_counts: dict[str, Counter] = {f: Counter() for f in frame_names}
    frame_totals: Counter = Counter()
    global_counts: Counter = Counter()
    global_total = 0
    for doc in docs:
        tokens = list(doc.tokens())
        df.update(set(tokens))
        global_counts.update(tokens)
        global_total += len(tokens)
        if doc.frame in frame_counts:
            frame_counts[doc.frame].update(tokens)
            frame_totals[doc.frame] += len(tokens)

    result: dict[str, tuple[tuple[str, float], ...]] = {}
    for frame in frame_names:
        scored = []
        totals = frame_totals[frame]
        for word, c_frame in frame_counts[frame].items():
            fraction = df[word] / n_docs
            if fraction < min_df or fraction > max_df:
                continue
            score = math.log((c_frame / totals) / (global_counts[word] / global_total))
            scored.append((word, score))
        scored.sort(key=lambda item: (-item[1], item[0]))
        result[frame] = tuple(scored[:top_k])
    return FrameLexicon(result)


# ---------------------------------------------------------------------------
# Paragraph annotation (step 1 applied to the topic corpus)


def annotate_frames(
    paragraph: Paragraph, lex: FrameLexicon, top_n: int = 2
) -> list[str]:
    """Top frames for a paragraph by lexicon-match counts.

    Ties break by higher summed PMI of the matched indicators, then by the
    fixed frame ordinal. Paragraphs with zero matches come back empty.
    """
    if top_n < 1:
        raise LexiconError("top_n must be >= 1")
    token_counts = Counter(paragraph.tokens)
    ranked = []
    for frame, entries in lex.frames.items():
        hits = 0
        pmi_sum = 0.0
        for word, score in entries:
            c = token_counts.get(word, 0)
            if c:
                hits += c
                pmi_sum += score * c
        if hits:
            ranked.append((frame, hits, pmi_sum))
    ranked.sort(key=lambda item: (-item[1], -item[2], frame_order_key(item[0])))
    return [frame for frame, _, _ in ranked[:top_n]]


def annotate_corpus(
    corpus: Corpus, lex: FrameLexicon, top_n: int = 2
) -> list[tuple[Paragraph, list[str]]]:
    """Annotate every paragraph; unannotated paragraphs keep an empty list."""
    return [(para, annotate_frames(para, lex, top_n)) for para in corpus.paragraphs()]


# ---------------------------------------------------------------------------
# Subframe indicators (step 2)


def build_subframe_indicators(
    annotated: Sequence[tuple[Paragraph, Sequence[str]]],
    min_pf: float = 0.0002,
    max_pf: float = 0.5,
    orders: Sequence[int] = (2, 3),
) -> SubframeIndicatorLexicon:
    """Assign each in-band bi/tri-gram to its argmax-PMI frame.

    Paragraph frequency outside [min_pf, max_pf] discards the gram. Frame
    ties break on the fixed frame ordinal.
    """
    stats = GramStats(annotated, orders=orders)
    frames = sorted(stats.frame_counts, key=frame_order_key)
    per_frame: dict[str, list[tuple[str, float]]] = {f: [] for f in frames}
    for gram in sorted(stats.global_counts):
        pf = stats.paragraph_frequency(gram)
        if pf < min_pf or pf > max_pf:
            continue
        best_frame = None
        best_score = NEG_INF
        for frame in frames:
            score = stats.pmi(gram, frame)
            if score > best_score:
                best_frame, best_score = frame, score
        if best_frame is None or best_score == NEG_INF:
            continue
        per_frame[best_frame].append((gram, best_score))
    for frame in frames:
        per_frame[frame].sort(key=lambda item: (-item[1], item[0]))
    return SubframeIndicatorLexicon({f: tuple(v) for f, v in per_frame.items() if v})


# ---------------------------------------------------------------------------
# Manual subframe grouping


def load_subframe_map(
    path: str | Path, lex: SubframeIndicatorLexicon | None = None
) -> SubframeMap:
    """Load a subframe config: {name: {"frame": ..., "seeds": [...]}}.

    Indicator sets must be disjoint across subframes. Seeds absent from the
    induced lexicon are kept but flagged seed-only.
    """
    payload = json.loads(Path(path).read_text())
    return build_subframe_map(payload, lex)


def build_subframe_map(
    payload: Mapping[str, Mapping], lex: SubframeIndicatorLexicon | None = None
) -> SubframeMap:
    known = lex.all_grams() if lex is not None else None
    owner: dict[str, str] = {}
    subframes: dict[str, Subframe] = {}
    for name in payload:
        entry = payload[name]
        seeds = []
        for gram in entry["seeds"]:
            if gram in seeds:
                continue
            if gram in owner:
                raise LexiconError(
                    f"n-gram {gram!r} assigned to both {owner[gram]!r} and {name!r}"
                )
            owner[gram] = name
            seeds.append(gram)
        seed_only = frozenset(
            g for g in seeds if known is not None and g not in known
        )
        subframes[name] = Subframe(
            name=name,
            frame=entry["frame"],
            indicators=tuple(seeds),
            seed_only=seed_only,
        )
    return SubframeMap(subframes)


def bundled_subframe_map_path(topic: str) -> Path:
    path = Path(__file__).parent / "data" / f"subframes_{topic}.json"
    if not path.exists():
        raise LexiconError(f"no bundled subframe map for topic {topic!r}")
    return path


# ---------------------------------------------------------------------------
# Step 3: validation against bias labels


def _doc_gram_counts(doc: Document, orders: Sequence[int]) -> tuple[Counter, int]:
    counts: Counter = Counter()
    for para in doc.paragraphs:
        for n in orders:
            counts.update(extract_ngrams(para, n))
    return counts, sum(counts.values())


def indicator_bias_correlation(
    corpus: Corpus,
    lex: FrameLexicon | SubframeIndicatorLexicon,
    orders: Sequence[int] | None = None,
) -> dict[str, float]:
    """Per-frame Spearman correlation between left and right indicator ranks.

    Each side ranks the frame's indicators by mean tf-idf over its labeled
    documents: tf is the in-document count normalized by the document's gram
    count, idf = ln(N_docs / df). Frames with fewer than two usable
    indicators are omitted with a warning.
    """
    from .metrics import spearman_from_scores

    left_docs = corpus.labeled(LEFT)
    right_docs = corpus.labeled(RIGHT)
    if not left_docs or not right_docs:
        raise LexiconError("corpus must contain both Left and Right documents")
    if orders is None:
        sample = next((g for rows in lex.frames.values() for g, _ in rows), None)
        orders = (1,) if sample is None or " " not in sample else (2, 3)

    docs = left_docs + right_docs
    n_docs = len(docs)
    per_doc: list[tuple[str, Counter, int]] = []
    df: Counter = Counter()
    for doc in docs:
        counts, total = _doc_gram_counts(doc, orders)
        per_doc.append((doc.bias, counts, total))
        df.update(counts.keys())

    def side_scores(side: str, grams: Sequence[str]) -> dict[str, float]:
        side_rows = [(c, t) for bias, c, t in per_doc if bias == side]
        out = {}
        for gram in grams:
            d = df.get(gram, 0)
            if d == 0:
                out[gram] = 0.0
                continue
            idf = math.log(n_docs / d)
            tfidf = [
                (counts.get(gram, 0) / total) * idf if total else 0.0
                for counts, total in side_rows
            ]
            out[gram] = sum(tfidf) / len(tfidf)
        return out

    result: dict[str, float] = {}
    for frame in sorted(lex.frames, key=frame_order_key):
        grams = [g for g, _ in lex.frames[frame]]
        if len(grams) < 2:
            logger.warning("frame %s has fewer than 2 indicators; omitted", frame)
            continue
        left = side_scores(LEFT, grams)
        right = side_scores(RIGHT, grams)
        rho = spearman_from_scores(left, right)
        if rho is None:
            logger.warning("frame %s has degenerate rankings; omitted", frame)
            continue
        result[frame] = rho
    return result
