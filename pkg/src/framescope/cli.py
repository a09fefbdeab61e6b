"""Command-line front end: ingest, lexicon, graph, train, communities, report, synth.

One JSON config drives a run; a few flags override it. Exit codes: 0 on
success, 2 for input errors, 3 for numeric failures. The FRAMESCOPE_SEED
environment variable overrides the configured seed. Two runs with the same
config and seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import community as community_mod
from . import embedding as embedding_mod
from . import graph as graph_mod
from . import lexicon as lexicon_mod
from . import metrics as metrics_mod
from . import synth as synth_mod
from .corpus import CorpusError, LABELS, LEFT, RIGHT
from .community import CommunityConfig, MODES
from .embedding import TrainConfig, TrainingDivergence
from .graph import Relation, node_id, strip_type

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


class RunConfig:
    """Resolved run configuration; relative paths anchor at the config file."""

    def __init__(self, raw: dict, base: Path):
        self.raw = raw
        self.base = base
        self.topic = raw.get("topic", "custom")
        self.mode = raw.get("mode", "em_sf")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        self.train = TrainConfig.from_dict(raw.get("train", {}))
        self.community = CommunityConfig.from_dict(raw.get("community", {}))
        self.lexicon = {
            "top_k": 250,
            "min_df": 0.005,
            "max_df": 0.98,
            "min_pf": 0.0002,
            "max_pf": 0.5,
            "top_frames": 2,
        }
        self.lexicon.update(raw.get("lexicon", {}))
        self.report = {
            "pmi_df_mode": "band",
            "cooccurrence_zero_below": 0.2,
            "context_n": 500,
            "top_m": 5,
        }
        self.report.update(raw.get("report", {}))
        self.paths = {k: self._resolve(v) for k, v in raw.get("paths", {}).items()}
        env_seed = os.environ.get("FRAMESCOPE_SEED")
        if env_seed is not None:
            self.train.seed = int(env_seed)
        if self.mode == "em_sf" and "subframe_map" not in self.paths:
            raise ConfigError("mode em_sf requires paths.subframe_map")

    def _resolve(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else (self.base / path)

    def path(self, key: str, required: bool = True) -> Path | None:
        if key not in self.paths:
            if required:
                raise ConfigError(f"config is missing paths.{key}")
            return None
        path = self.paths[key]
        return path

    def existing_path(self, key: str, required: bool = True) -> Path | None:
        path = self.path(key, required=required)
        if path is not None and required and not path.exists():
            raise ConfigError(f"paths.{key} does not exist: {path}")
        return path

    def output_dir(self) -> Path:
        out = self.paths.get("output_dir", self.base / "out")
        out.mkdir(parents=True, exist_ok=True)
        return out

    def manifest(self) -> dict:
        return {
            "topic": self.topic,
            "mode": self.mode,
            "train": self.train.to_dict(),
            "community": self.community.to_dict(),
            "lexicon": self.lexicon,
            "report": self.report,
            "paths": {k: str(v) for k, v in sorted(self.paths.items())},
        }


def load_config(path: str, overrides: argparse.Namespace) -> RunConfig:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {config_path}")
    raw = json.loads(config_path.read_text())
    cfg = RunConfig(raw, config_path.parent.resolve())
    if getattr(overrides, "mode", None):
        if overrides.mode not in MODES:
            raise ConfigError(f"unknown mode {overrides.mode!r}")
        cfg.mode = overrides.mode
    if getattr(overrides, "seed", None) is not None:
        cfg.train.seed = overrides.seed
    if getattr(overrides, "output_dir", None):
        cfg.paths["output_dir"] = Path(overrides.output_dir)
    if getattr(overrides, "pmi_df_mode", None):
        cfg.report["pmi_df_mode"] = overrides.pmi_df_mode
    return cfg


def _write_manifest(cfg: RunConfig, outdir: Path) -> None:
    (outdir / "run_manifest.json").write_text(
        json.dumps(cfg.manifest(), indent=1, sort_keys=True)
    )


def _load_inputs(cfg: RunConfig, need_edges: bool = True, need_map: bool = True):
    corpus = corpus_mod.ingest_corpus(cfg.existing_path("corpus"), cfg.topic)
    edges = None
    if need_edges:
        edges = corpus_mod.load_edges(
            cfg.existing_path("shares"),
            cfg.existing_path("follows"),
            cfg.existing_path("affiliations"),
        )
    submap = None
    if need_map:
        map_path = cfg.existing_path("subframe_map", required=cfg.mode == "em_sf")
        if map_path is not None and map_path.exists():
            submap = lexicon_mod.load_subframe_map(map_path)
        else:
            submap = lexicon_mod.SubframeMap({})
    return corpus, edges, submap


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args) -> int:
    cfg = load_config(args.config, args)
    outdir = cfg.output_dir()
    corpus = corpus_mod.ingest_corpus(cfg.existing_path("corpus"), cfg.topic)
    corpus.to_jsonl(outdir / "corpus.normalized.jsonl")
    summary = {
        "documents": len(corpus),
        "labeled": {
            LEFT: len(corpus.labeled(LEFT)),
            RIGHT: len(corpus.labeled(RIGHT)),
        },
        "paragraphs": sum(len(d.paragraphs) for d in corpus),
        "topic": cfg.topic,
    }
    (outdir / "corpus_summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    _write_manifest(cfg, outdir)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_lexicon(args) -> int:
    cfg = load_config(args.config, args)
    outdir = cfg.output_dir()
    seed_path = cfg.existing_path("seed_corpus")
    seed_corpus = corpus_mod.ingest_corpus(seed_path, cfg.topic)
    lex = lexicon_mod.build_frame_lexicon(
        seed_corpus,
        top_k=cfg.lexicon["top_k"],
        min_df=cfg.lexicon["min_df"],
        max_df=cfg.lexicon["max_df"],
    )
    lex.to_json(outdir / "frame_lexicon.json")

    corpus = corpus_mod.ingest_corpus(cfg.existing_path("corpus"), cfg.topic)
    annotated = lexicon_mod.annotate_corpus(corpus, lex, top_n=cfg.lexicon["top_frames"])
    indicators = lexicon_mod.build_subframe_indicators(
        annotated, min_pf=cfg.lexicon["min_pf"], max_pf=cfg.lexicon["max_pf"]
    )
    indicators.to_json(outdir / "subframe_indicators.json")

    validation = {}
    if args.validate:
        validation = {
            "frame_indicators": lexicon_mod.indicator_bias_correlation(corpus, lex),
            "subframe_indicators": lexicon_mod.indicator_bias_correlation(corpus, indicators),
        }
    (outdir / "lexicon_validation.json").write_text(
        json.dumps(validation, indent=1, sort_keys=True)
    )
    _write_manifest(cfg, outdir)
    print(f"frame lexicon: {sum(len(v) for v in lex.frames.values())} unigrams; "
          f"subframe indicators: {sum(len(v) for v in indicators.frames.values())} n-grams")
    return EXIT_OK


def cmd_graph(args) -> int:
    cfg = load_config(args.config, args)
    outdir = cfg.output_dir()
    corpus, edges, submap = _load_inputs(cfg)
    graph = graph_mod.build_graph(corpus, edges, submap)
    (outdir / "graph_stats.json").write_text(
        json.dumps(graph.stats(), indent=1, sort_keys=True)
    )
    if args.dump:
        graph.dump_jsonl(outdir / "graph.jsonl")
    _write_manifest(cfg, outdir)
    print(json.dumps(graph.stats(), sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, args)
    outdir = cfg.output_dir()
    corpus, edges, submap = _load_inputs(cfg)
    graph = graph_mod.build_graph(corpus, edges, submap)
    try:
        result = community_mod.run_pipeline(
            graph, corpus, cfg.train, cfg.community, cfg.mode
        )
    except TrainingDivergence as exc:
        dump = outdir / "state_dump.json"
        dump.write_text(json.dumps({"error": str(exc), "mode": cfg.mode}, indent=1))
        print(f"training diverged: {exc} (state dump at {dump})", file=sys.stderr)
        return EXIT_NUMERIC
    embedding_mod.save_store(result.store, outdir / "embedding.bin", cfg.train)
    with open(outdir / "report.jsonl", "w", encoding="utf-8") as fh:
        for row in result.report:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    if result.model is not None:
        community_mod.save_model(
            result.model, outdir / "model.bin", manifest=cfg.community.to_dict()
        )
    _write_manifest(cfg, outdir)
    print(f"mode={cfg.mode} iterations={len(result.report)} "
          f"k={result.model.k if result.model else None}")
    return EXIT_OK


def cmd_communities(args) -> int:
    cfg = load_config(args.config, args)
    outdir = cfg.output_dir()
    store_path = outdir / "embedding.bin"
    if not store_path.exists():
        raise ConfigError(f"embedding checkpoint not found: {store_path}")
    corpus, edges, submap = _load_inputs(cfg)
    store = embedding_mod.load_store(store_path, corpus, cfg.train.sentence_cap)
    users = sorted(n for n in store.nodes() if n.startswith("user:"))
    x = store.matrix_for(users)
    rng = np.random.default_rng(cfg.train.seed)
    result = community_mod.select_k(
        x,
        cfg.community.k_range(),
        cfg.community.t_n,
        rng,
        restarts=cfg.community.gmm_restarts,
        user_ids=users,
    )
    community_mod.save_model(result.model, outdir / "model.bin",
                             manifest=cfg.community.to_dict())
    assignments = community_mod.assign_users(result.model, cfg.community.assign_threshold)
    (outdir / "communities.json").write_text(
        json.dumps(
            {
                "k": result.k,
                "bic_curve": {str(k): v for k, v in result.bics.items()},
                "assignments": {u: list(v) for u, v in sorted(assignments.items())},
            },
            indent=1,
            sort_keys=True,
        )
    )
    print(f"k={result.k}")
    return EXIT_OK


def _macro_f1(pairs: list[tuple[str, str]]) -> float | None:
    """Macro F1 over the two labels for (gold, predicted) pairs."""
    if not pairs:
        return None
    scores = []
    for label in LABELS:
        tp = sum(1 for g, p in pairs if g == label and p == label)
        fp = sum(1 for g, p in pairs if g != label and p == label)
        fn = sum(1 for g, p in pairs if g == label and p != label)
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return sum(scores) / len(scores)


def cmd_report(args) -> int:
    cfg = load_config(args.config, args)
    outdir = cfg.output_dir()
    store_path = outdir / "embedding.bin"
    if not store_path.exists():
        raise ConfigError(f"embedding checkpoint not found: {store_path}")
    corpus, edges, submap = _load_inputs(cfg)
    graph = graph_mod.build_graph(corpus, edges, submap)
    store = embedding_mod.load_store(store_path, corpus, cfg.train.sentence_cap)
    model_path = outdir / "model.bin"
    model = community_mod.load_model(model_path) if model_path.exists() else None

    assignments = None
    majority = {}
    community_labels = None
    if model is not None:
        assignments = community_mod.assign_users(model, cfg.community.assign_threshold)
        _, majority, community_labels = community_mod.infer_labels(
            store, model, assignments, community_mod.shares_by_article(graph),
            cfg.train.similarity,
        )
    labels = community_mod.predict_article_labels(
        store, graph, majority, cfg.train.similarity
    )

    # bias predictions with margins
    rows = []
    for article in graph.nodes["article"]:
        label, margin, tie = embedding_mod.infer_bias(article, store, cfg.train.similarity)
        rows.append((strip_type(article), labels[article], label, margin, int(tie)))
    metrics_mod.write_csv(
        outdir / "predictions.csv",
        ("article", "predicted", "embedding_label", "margin", "tie"),
        rows,
    )

    bundle: dict = {"mode": cfg.mode}
    shared_set = set(community_mod.shares_by_article(graph))

    if args.gold:
        gold_pairs = {"shared": [], "unshared": [], "overall": []}
        for doc in corpus:
            if doc.bias is None:
                continue
            node = node_id("article", doc.id)
            pair = (doc.bias, labels[node])
            bucket = "shared" if node in shared_set else "unshared"
            gold_pairs[bucket].append(pair)
            gold_pairs["overall"].append(pair)
        bundle["gold_macro_f1"] = {k: _macro_f1(v) for k, v in gold_pairs.items()}

    if model is not None:
        _report_community_metrics(
            cfg, outdir, bundle, corpus, edges, submap, graph, store, model, assignments
        )

    truth_path = cfg.existing_path("truth", required=False)
    if truth_path is not None and truth_path.exists():
        truth = synth_mod.GroundTruth.from_json(truth_path)
        result = community_mod.PipelineResult(
            store=store,
            model=model,
            assignments=assignments,
            article_labels=labels,
            community_labels=community_labels,
            mode=cfg.mode,
        )
        bundle["truth_scores"] = synth_mod.score_against_truth(result, truth, edges)

    (outdir / "report_bundle.json").write_text(json.dumps(bundle, indent=1, sort_keys=True))
    _write_manifest(cfg, outdir)
    print(json.dumps({k: bundle[k] for k in sorted(bundle) if k != "rankings"},
                     sort_keys=True, default=str))
    return EXIT_OK


def _report_community_metrics(
    cfg, outdir, bundle, corpus, edges, submap, graph, store, model, assignments
):
    polarity = metrics_mod.community_polarity(model, store)
    metrics_mod.write_csv(
        outdir / "polarity.csv",
        ("community", "polarity"),
        sorted(polarity.items()),
    )
    metrics_mod.write_plot_json(
        outdir / "polarity.json",
        [{"x": k, "y": v, "label": f"community {k}"} for k, v in sorted(polarity.items())],
    )
    bundle["polarity"] = {str(k): v for k, v in polarity.items()}

    shares_of = community_mod.shares_by_user(graph)
    follows_of: dict[str, set[str]] = {}
    for user, pol in graph.edges.get(Relation.FOLLOW, ()):
        follows_of.setdefault(user, set()).add(pol)

    share_members: dict[int, set[str]] = {k: set() for k in range(model.k)}
    follow_members: dict[int, set[str]] = {k: set() for k in range(model.k)}
    for user, communities in (assignments or {}).items():
        for k in communities:
            share_members[k] |= set(shares_of.get(user, ()))
            follow_members[k] |= follows_of.get(user, set())

    gold_article = {
        node_id("article", d.id): d.bias for d in corpus if d.bias is not None
    }
    affiliation = {
        node_id("influencer", p): label for p, label in edges.affiliations.items()
    }
    purities = {}
    try:
        purities["share"] = metrics_mod.purity(
            {k: sorted(v & set(gold_article)) for k, v in share_members.items() if v},
            gold_article,
        )
    except metrics_mod.MetricError:
        purities["share"] = None
    try:
        purities["follow"] = metrics_mod.purity(
            {k: sorted(v) for k, v in follow_members.items() if v}, affiliation
        )
    except metrics_mod.MetricError:
        purities["follow"] = None
    bundle["purity"] = purities

    # per-community rankings over four node types
    sf_scores = metrics_mod.article_subframe_scores(corpus, store, submap)
    top_subframes = metrics_mod.article_top_subframes(sf_scores)
    article_frames = {
        doc_id: tuple(
            dict.fromkeys(
                submap.subframes[sf].frame for sf in sfs if sf in submap.subframes
            )
        )
        for doc_id, sfs in top_subframes.items()
    }
    frame_lex_path = cfg.existing_path("frame_lexicon", required=False)
    if frame_lex_path is not None and frame_lex_path.exists():
        lex = lexicon_mod.FrameLexicon.from_json(frame_lex_path)
        article_frames = metrics_mod.article_top_frames(corpus, lex)

    rankings: dict[int, dict[str, metrics_mod.Ranking]] = {}
    ranking_rows = []
    for k in range(model.k):
        centroid = model.means[k]
        arts = sorted(share_members[k])
        pols = sorted(follow_members[k])
        per_type = {}
        if pols:
            per_type["politicians"] = metrics_mod.similarity_ranking(pols, centroid, store)
        if arts:
            per_type["articles"] = metrics_mod.similarity_ranking(arts, centroid, store)
        per_type["subframes"] = metrics_mod.subframe_ranking(submap, centroid, store)
        frames_ranking = metrics_mod.frame_ranking(
            arts, {node_id("article", a): f for a, f in article_frames.items()}, centroid, store
        ) if arts else metrics_mod.Ranking(())
        if len(frames_ranking):
            per_type["frames"] = frames_ranking
        rankings[k] = per_type
        for node_type, ranking in per_type.items():
            for rank, (nid, score) in enumerate(ranking.entries, start=1):
                ranking_rows.append((k, node_type, rank, nid, score,
                                     metrics_mod.rank_score(rank, len(ranking))))
    metrics_mod.write_csv(
        outdir / "rankings.csv",
        ("community", "node_type", "rank", "node", "score", "rank_score"),
        ranking_rows,
    )

    # external score correlations
    scores_path = cfg.existing_path("external_scores", required=False)
    if scores_path is not None and scores_path.exists():
        external = corpus_mod.load_external_scores(scores_path)
        corr = {}
        for k in range(model.k):
            ranking = rankings[k].get("politicians")
            if ranking is None:
                continue
            try:
                corr[str(k)] = metrics_mod.external_score_correlation(ranking, external)
            except metrics_mod.MetricError:
                corr[str(k)] = None
        bundle["external_score_correlation"] = corr

    # segregation profile
    try:
        profile = metrics_mod.segregation_profile(rankings, polarity)
        metrics_mod.write_csv(
            outdir / "segregation.csv",
            ("community", "node_type", "corr_leftmost", "corr_rightmost"),
            [(e.community, e.node_type, e.corr_with_leftmost, e.corr_with_rightmost)
             for e in profile],
        )
        metrics_mod.write_plot_json(
            outdir / "segregation.json",
            [
                {"x": polarity[e.community], "y": e.corr_with_leftmost,
                 "label": f"{e.node_type}/leftmost"}
                for e in profile
            ]
            + [
                {"x": polarity[e.community], "y": e.corr_with_rightmost,
                 "label": f"{e.node_type}/rightmost"}
                for e in profile
            ],
        )
    except metrics_mod.MetricError as exc:
        logger.warning("segregation profile skipped: %s", exc)

    # subframe polarity scatter
    sf_rankings = {k: rankings[k]["subframes"] for k in rankings}
    scatter = metrics_mod.subframe_polarity_scatter(
        sf_rankings, polarity, submap.names()
    )
    metrics_mod.write_csv(
        outdir / "subframe_polarity.csv",
        ("subframe", "left_rank_score", "right_rank_score"),
        [(name, xy[0], xy[1]) for name, xy in sorted(scatter.items())],
    )
    metrics_mod.write_plot_json(
        outdir / "subframe_polarity.json",
        [
            {"x": xy[0], "y": xy[1], "label": name}
            for name, xy in sorted(scatter.items())
            if xy[0] is not None and xy[1] is not None
        ],
    )

    # document-community heatmap
    heat_order, heat = metrics_mod.doc_community_heatmap(
        list(graph.nodes["article"]), model, store
    )
    metrics_mod.write_csv(
        outdir / "heatmap.csv",
        ("article", *[f"community_{k}" for k in heat_order]),
        [
            (strip_type(a), *heat[i].tolist())
            for i, a in enumerate(graph.nodes["article"])
        ],
    )

    # subframe co-occurrence per side
    zero_below = cfg.report.get("cooccurrence_zero_below")
    for side in (LEFT, RIGHT):
        side_docs = {d.id for d in corpus.labeled(side)}
        side_table = {d: top_subframes[d] for d in top_subframes if d in side_docs}
        matrix = metrics_mod.subframe_cooccurrence(
            side_table, submap.names(), zero_below=zero_below
        )
        metrics_mod.write_csv(
            outdir / f"cooccurrence_{side.lower()}.csv",
            ("subframe", *submap.names()),
            [(name, *matrix[i].tolist()) for i, name in enumerate(submap.names())],
        )

    # contextual PMI per subframe and side
    context = {}
    for name in submap.names():
        for side in (LEFT, RIGHT):
            try:
                context[f"{name}|{side}"] = metrics_mod.party_context_pmi(
                    name, side, corpus, store, submap, top_subframes,
                    top_m=cfg.report["top_m"],
                    context_n=cfg.report["context_n"],
                    df_mode=cfg.report["pmi_df_mode"],
                )
            except metrics_mod.MetricError:
                continue
    (outdir / "context_pmi.json").write_text(json.dumps(context, indent=1, sort_keys=True))

    # yearly frame/subframe rank correlations
    corr = metrics_mod.ideology_rank_correlations(corpus, article_frames, top_subframes)
    (outdir / "ideology_correlations.json").write_text(
        json.dumps(corr, indent=1, sort_keys=True)
    )
    bundle["ideology_correlations"] = corr


def cmd_synth(args) -> int:
    if args.spec:
        spec = synth_mod.WorldSpec.from_json(args.spec)
    else:
        spec = synth_mod.WorldSpec()
    if args.seed is not None:
        spec.seed = args.seed
    world = synth_mod.generate(spec)
    paths = synth_mod.write_world(world, args.out)
    print(json.dumps({k: str(v) for k, v in sorted(paths.items())}, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framescope",
        description="Frame lexicons, information-graph embedding, and community analytics",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=fn)
        return p

    common = dict(config=lambda p: p.add_argument("--config", required=True),
                  seed=lambda p: p.add_argument("--seed", type=int),
                  mode=lambda p: p.add_argument("--mode"),
                  out=lambda p: p.add_argument("--output-dir"))

    p = add("ingest", cmd_ingest, help="normalize and summarize a corpus")
    for k in ("config", "seed", "mode", "out"):
        common[k](p)

    p = add("lexicon", cmd_lexicon, help="build frame and subframe indicator lexicons")
    for k in ("config", "seed", "mode", "out"):
        common[k](p)
    p.add_argument("--validate", action="store_true",
                   help="add left/right indicator rank correlations")

    p = add("graph", cmd_graph, help="assemble the information graph")
    for k in ("config", "seed", "mode", "out"):
        common[k](p)
    p.add_argument("--dump", action="store_true", help="write the edge list as JSON lines")

    p = add("train", cmd_train, help="train embeddings (and communities, per mode)")
    for k in ("config", "seed", "mode", "out"):
        common[k](p)

    p = add("communities", cmd_communities, help="fit communities on an existing embedding")
    for k in ("config", "seed", "mode", "out"):
        common[k](p)

    p = add("report", cmd_report, help="emit the metrics bundle")
    for k in ("config", "seed", "mode", "out"):
        common[k](p)
    p.add_argument("--gold", action="store_true",
                   help="score predictions against gold bias labels")
    p.add_argument("--pmi-df-mode", choices=("band", "inverse-band"))

    p = add("synth", cmd_synth, help="generate a synthetic world with ground truth")
    p.add_argument("--spec", help="WorldSpec JSON (defaults used when omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, CorpusError, lexicon_mod.LexiconError,
            graph_mod.GraphError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except TrainingDivergence as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
