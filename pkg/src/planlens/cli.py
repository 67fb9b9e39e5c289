"""Command-line pipeline: ingest, predict, topics, factors, report,
expand-lexicon.

All settings live in an INI config file (--config or the PLANLENS_CONFIG
environment variable); --seed, --threads, and --out override their config
counterparts. Every command writes a manifest recording the config
snapshot, input digests, and output digests, and all emitted floats carry
12 significant digits, so a rerun with the same inputs is byte-identical
(manifest timing blocks aside).

Exit codes: 0 success, 2 input or config error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, corpus as corpus_mod, evaluation, factors as factors_mod, featurizer, glm, topics as topics_mod
from ._format import dumps_json, fmt_float, sha256_file, sha256_text, write_csv, write_json
from .errors import DegeneracyError, InputError


@dataclass(frozen=True)
class RunConfig:
    """Typed view of the INI config."""

    # [paths]
    docs_dir: str = "docs"
    labels: str = "labels.csv"
    lexicon: str = ""
    embeddings: str = ""
    stopwords: str = ""
    out_dir: str = "out"
    # [preprocessing]
    min_df: float = 0.10
    bigrams: bool = True
    drop_capitalized: bool = True
    capitalized_threshold: float = 0.8
    tfidf_mode: str = "paper"
    # [glm]
    weight_mode: str = "balanced"
    tol: float = 1e-7
    max_iters: int = 10_000
    penalize_intercept: bool = False
    standardize: bool = False
    # [eval]
    n_splits: int = 50
    test_fraction: float = 0.2
    grid_size: int = 30
    grid_min_ratio: float = 1e-3
    loocv_weighted: bool = False
    # [topics]
    top_n_wordcloud: int = 10
    expand_k: int = 10
    expand_min_sim: float = 0.35
    # [factors]
    extraction: str = "paf"
    rotation: str = "varimax"
    # [run]
    seed: int = 0
    threads: int = 1


_SECTIONS: dict[str, tuple[str, ...]] = {
    "paths": ("docs_dir", "labels", "lexicon", "embeddings", "stopwords", "out_dir"),
    "preprocessing": (
        "min_df",
        "bigrams",
        "drop_capitalized",
        "capitalized_threshold",
        "tfidf_mode",
    ),
    "glm": ("weight_mode", "tol", "max_iters", "penalize_intercept", "standardize"),
    "eval": ("n_splits", "test_fraction", "grid_size", "grid_min_ratio", "loocv_weighted"),
    "topics": ("top_n_wordcloud", "expand_k", "expand_min_sim"),
    "factors": ("extraction", "rotation"),
    "run": ("seed", "threads"),
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(section: str, key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise InputError(f"config [{section}] {key}: {exc}") from exc


def load_config(path: Path | str) -> RunConfig:
    """Parse and validate an INI config; unknown sections or keys are
    errors rather than silent typos."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise InputError(f"config {path} is not valid INI: {exc}") from exc
    values: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise InputError(f"config {path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise InputError(f"config {path}: unknown key {key!r} in [{section}]")
            values[key] = _parse_value(section, key, raw)
    cfg = RunConfig(**values)
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig) -> None:
    if cfg.tfidf_mode not in featurizer.TFIDF_MODES:
        raise InputError(f"config: tfidf_mode must be one of {featurizer.TFIDF_MODES}")
    if cfg.weight_mode not in glm.WEIGHT_MODES:
        raise InputError(f"config: weight_mode must be one of {glm.WEIGHT_MODES}")
    if cfg.extraction not in factors_mod.EXTRACTIONS:
        raise InputError(f"config: extraction must be one of {factors_mod.EXTRACTIONS}")
    if cfg.rotation not in factors_mod.ROTATIONS:
        raise InputError(f"config: rotation must be one of {factors_mod.ROTATIONS}")
    if not 0.0 <= cfg.min_df <= 1.0:
        raise InputError("config: min_df must be in [0, 1]")
    if not 0.0 < cfg.capitalized_threshold <= 1.0:
        raise InputError("config: capitalized_threshold must be in (0, 1]")
    if cfg.threads < 1:
        raise InputError("config: threads must be >= 1")
    if cfg.n_splits < 1:
        raise InputError("config: n_splits must be >= 1")
    if not 0.0 < cfg.test_fraction < 1.0:
        raise InputError("config: test_fraction must be in (0, 1)")
    if cfg.grid_size < 1:
        raise InputError("config: grid_size must be >= 1")
    if not 0.0 < cfg.grid_min_ratio < 1.0:
        raise InputError("config: grid_min_ratio must be in (0, 1)")
    if cfg.top_n_wordcloud < 0 or cfg.expand_k < 0:
        raise InputError("config: top_n_wordcloud and expand_k must be >= 0")


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        section: {key: getattr(cfg, key) for key in keys}
        for section, keys in _SECTIONS.items()
    }


def _stopword_source(cfg: RunConfig) -> tuple[frozenset[str], str]:
    if cfg.stopwords:
        stops = corpus_mod.load_stopwords(cfg.stopwords)
        return stops, sha256_file(cfg.stopwords)
    return corpus_mod.bundled_stopwords(), "bundled"


def _docs_digest(doc_dir: Path) -> str:
    names = sorted(p.name for p in doc_dir.glob("*.txt"))
    lines = [f"{n}:{sha256_file(doc_dir / n)}" for n in names]
    return sha256_text("\n".join(lines))


def _corpus_cache_key(cfg: RunConfig) -> str:
    doc_dir = Path(cfg.docs_dir)
    if not doc_dir.is_dir():
        raise InputError(f"document directory {doc_dir} does not exist")
    labels = Path(cfg.labels)
    if not labels.is_file():
        raise InputError(f"labels file {labels} does not exist")
    _, stop_digest = _stopword_source(cfg)
    payload = dumps_json(
        {
            "docs": _docs_digest(doc_dir),
            "labels": sha256_file(labels),
            "stopwords": stop_digest,
            "bigrams": cfg.bigrams,
            "drop_capitalized": cfg.drop_capitalized,
            "capitalized_threshold": cfg.capitalized_threshold,
        }
    )
    return sha256_text(payload)[:16]


def _cache_path(cfg: RunConfig) -> Path:
    return Path(cfg.out_dir) / "cache" / f"corpus-{_corpus_cache_key(cfg)}.json"


def _load_cached_corpus(cfg: RunConfig) -> corpus_mod.Corpus:
    path = _cache_path(cfg)
    if not path.is_file():
        raise InputError(
            f"no ingested corpus for the current inputs and settings ({path}); "
            "run `planlens ingest` first"
        )
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read corpus cache {path}: {exc}") from exc
    return corpus_mod.corpus_from_dict(data)


def _input_digests(cfg: RunConfig) -> dict:
    digests: dict[str, str] = {"docs": _docs_digest(Path(cfg.docs_dir)), "labels": sha256_file(cfg.labels)}
    digests["stopwords"] = _stopword_source(cfg)[1]
    digests["lexicon"] = sha256_file(cfg.lexicon) if cfg.lexicon else "bundled"
    if cfg.embeddings:
        digests["embeddings"] = sha256_file(cfg.embeddings)
    return digests


def _write_manifest(
    command: str,
    cfg: RunConfig,
    out_dir: Path,
    outputs: list[Path],
    timings: dict[str, float],
    extra: dict | None = None,
) -> Path:
    manifest = {
        "tool": "planlens",
        "version": __version__,
        "command": command,
        "config": config_to_dict(cfg),
        "inputs": _input_digests(cfg),
        "outputs": {
            str(p.relative_to(out_dir)): sha256_file(p) for p in sorted(outputs)
        },
        "timings_seconds": {k: round(v, 6) for k, v in timings.items()},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / f"{command.replace('-', '_')}_manifest.json"
    write_json(path, manifest)
    return path


def _featurize(cfg: RunConfig, corpus: corpus_mod.Corpus):
    vocab = featurizer.build_vocabulary(corpus, min_df=cfg.min_df)
    counts = featurizer.count_matrix(corpus, vocab)
    X = featurizer.tfidf_transform(counts, vocab, mode=cfg.tfidf_mode)
    return vocab, counts, X


def cmd_ingest(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    stops, _ = _stopword_source(cfg)
    corpus = corpus_mod.load_corpus(
        cfg.docs_dir,
        cfg.labels,
        stopwords=stops,
        bigrams=cfg.bigrams,
        drop_capitalized=cfg.drop_capitalized,
        capitalized_threshold=cfg.capitalized_threshold,
    )
    load_s = time.perf_counter() - t0
    cache = _cache_path(cfg)
    cache.parent.mkdir(parents=True, exist_ok=True)
    write_json(cache, corpus_mod.corpus_to_dict(corpus))
    exclusions_path = out_dir / "exclusions.json"
    write_json(exclusions_path, {"excluded": corpus.exclusions})
    _write_manifest(
        "ingest",
        cfg,
        out_dir,
        [cache, exclusions_path],
        {"load": load_s},
        extra={"n_cities": corpus.n_docs, "n_excluded": len(corpus.exclusions)},
    )
    print(
        f"ingest: retained {corpus.n_docs} cities, excluded {len(corpus.exclusions)}; "
        f"cache {cache}"
    )
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = _load_cached_corpus(cfg)
    t0 = time.perf_counter()
    vocab, counts, X = _featurize(cfg, corpus)
    featurize_s = time.perf_counter() - t0

    vocab_path = out_dir / "vocabulary.csv"
    featurizer.save_vocabulary(vocab, vocab_path)
    matrix_path = out_dir / "matrix.csv"
    header_path = out_dir / "matrix_meta.json"
    featurizer.save_matrix(X, vocab, matrix_path, header_path, cfg.tfidf_mode)

    fit_cfg = glm.FitConfig(
        lam=0.0,
        weight_mode=cfg.weight_mode,
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        penalize_intercept=cfg.penalize_intercept,
        standardize=cfg.standardize,
    )
    plan = evaluation.SplitPlan(
        n_splits=cfg.n_splits, test_fraction=cfg.test_fraction, seed=cfg.seed
    )
    t0 = time.perf_counter()
    report = evaluation.evaluate_repeated(
        X,
        corpus.labels(),
        fit_cfg,
        plan,
        terms=vocab.terms,
        grid_size=cfg.grid_size,
        grid_min_ratio=cfg.grid_min_ratio,
        loocv_weighted=cfg.loocv_weighted,
        threads=cfg.threads,
    )
    eval_s = time.perf_counter() - t0

    eval_path = out_dir / "evaluation.json"
    write_json(eval_path, report.to_dict())
    terms_path = out_dir / "predictive_terms.csv"
    write_csv(
        terms_path,
        ["term", "avg_coefficient", "p_value"],
        evaluation.predictive_terms_rows(report),
    )
    final = glm.fit(X, corpus.labels(), replace(fit_cfg, lam=report.selected_lambda))
    model_path = out_dir / "model.json"
    write_json(model_path, glm.model_to_dict(final, vocab.terms))

    _write_manifest(
        "predict",
        cfg,
        out_dir,
        [vocab_path, matrix_path, header_path, eval_path, terms_path, model_path],
        {"featurize": featurize_s, "evaluate": eval_s},
        extra={
            "n_cities": corpus.n_docs,
            "n_terms": len(vocab),
            "mean_f1": report.mean_f1,
        },
    )
    print(
        f"predict: {report.n_splits} splits, mean f1 {fmt_float(report.mean_f1)}, "
        f"selected lambda {fmt_float(report.selected_lambda)}"
    )
    return 0


_TOPIC_HEADERS = [topics_mod.TOPIC_COLUMNS[t] for t in topics_mod.CANONICAL_TOPICS]


def cmd_topics(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = _load_cached_corpus(cfg)
    lexicon = topics_mod.load_lexicon(cfg.lexicon or None)
    t0 = time.perf_counter()
    raw, ids = topics_mod.topic_matrix(corpus, lexicon)
    lengths = topics_mod.sequence_lengths(corpus)
    rates = topics_mod.length_normalize(raw, lengths)
    medians = topics_mod.median_topic_counts(raw)

    counts_path = out_dir / "topic_counts.csv"
    write_csv(
        counts_path,
        ["city_id"] + _TOPIC_HEADERS,
        [[ids[i]] + [int(v) for v in raw[i]] for i in range(len(ids))],
    )
    rates_path = out_dir / "topic_rates.csv"
    write_csv(
        rates_path,
        ["city_id"] + _TOPIC_HEADERS,
        [[ids[i]] + [float(v) for v in rates[i]] for i in range(len(ids))],
    )
    medians_path = out_dir / "topic_medians.csv"
    write_csv(
        medians_path,
        ["topic", "median_count"],
        [[_TOPIC_HEADERS[j], float(medians[j])] for j in range(len(_TOPIC_HEADERS))],
    )

    vocab, counts, X = _featurize(cfg, corpus)
    dense = X.to_dense()
    clouds = {
        ids[i]: topics_mod.wordcloud_data(dense[i], vocab.terms, lexicon, cfg.top_n_wordcloud)
        for i in range(len(ids))
    }
    clouds_path = out_dir / "wordclouds.json"
    write_json(clouds_path, clouds)
    topics_s = time.perf_counter() - t0

    _write_manifest(
        "topics",
        cfg,
        out_dir,
        [counts_path, rates_path, medians_path, clouds_path],
        {"topics": topics_s},
        extra={"n_cities": len(ids), "n_lexicon_terms": len(lexicon)},
    )
    print(f"topics: scored {len(ids)} cities against {len(lexicon)} lexicon terms")
    return 0


def _read_rates_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    if not path.is_file():
        raise InputError(f"{path} not found; run `planlens topics` first")
    lines = path.read_text(encoding="utf-8").splitlines()
    expected_header = ",".join(["city_id"] + _TOPIC_HEADERS)
    if not lines or lines[0] != expected_header:
        raise InputError(f"{path} has an unexpected header")
    ids: list[str] = []
    rows: list[list[float]] = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 1 + len(_TOPIC_HEADERS):
            raise InputError(f"{path}: malformed row {ln!r}")
        ids.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    return np.array(rows, dtype=np.float64), ids


def cmd_factors(cfg: RunConfig, svg: bool = False) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = _load_cached_corpus(cfg)
    rates, ids = _read_rates_csv(out_dir / "topic_rates.csv")
    if ids != corpus.city_ids():
        raise InputError("topic_rates.csv does not match the ingested corpus; rerun topics")
    t0 = time.perf_counter()
    corr = factors_mod.topic_correlations(rates, list(topics_mod.CANONICAL_TOPICS))
    model = factors_mod.fit_factor_model(
        rates,
        list(topics_mod.CANONICAL_TOPICS),
        extraction=cfg.extraction,
        rotation=cfg.rotation,
    )
    scores = factors_mod.factor_scores(model, rates, ids)
    fit_s = time.perf_counter() - t0

    corr_path = out_dir / "topic_correlations.csv"
    write_csv(
        corr_path,
        ["topic"] + _TOPIC_HEADERS,
        [
            [_TOPIC_HEADERS[i]] + [float(v) for v in corr.values[i]]
            for i in range(len(_TOPIC_HEADERS))
        ],
    )
    loadings_path = out_dir / "factor_loadings.csv"
    write_csv(
        loadings_path,
        ["topic", model.factor_names[0], model.factor_names[1], "communality"],
        [
            [_TOPIC_HEADERS[j]] + row[1:]
            for j, row in enumerate(model.loading_rows())
        ],
    )
    scores_path = out_dir / "factor_scores.csv"
    write_csv(
        scores_path,
        ["city_id", model.factor_names[0], model.factor_names[1], "quadrant"],
        scores.rows(),
    )
    summary_path = out_dir / "factor_summary.json"
    write_json(
        summary_path,
        {
            "factor_names": list(model.factor_names),
            "extraction": model.extraction,
            "rotation": model.rotation,
            "converged": model.converged,
            "n_iters": model.n_iters,
            "eigenvalues": model.eigenvalues,
            "heywood": model.heywood,
            "no_factor_structure": model.no_factor_structure,
            "quadrant_counts": {
                q: scores.quadrants.count(q) for q in ("I", "II", "III", "IV")
            },
        },
    )
    stats_path = out_dir / "summary_stats.csv"
    stats = factors_mod.summary_stats(corpus.records)
    write_csv(
        stats_path,
        ["column", "n", "mean", "sd", "min", "p25", "p75", "max"],
        [
            [s["column"], s["n"], s["mean"], s["sd"], s["min"], s["p25"], s["p75"], s["max"]]
            for s in stats
        ],
    )
    quality_path = out_dir / "data_quality.json"
    write_json(quality_path, factors_mod.data_quality(corpus.records))

    outputs = [
        corr_path,
        loadings_path,
        scores_path,
        summary_path,
        stats_path,
        quality_path,
    ]
    if svg:
        svg_path = out_dir / "factor_scores.svg"
        svg_path.write_text(_scores_svg(scores), encoding="utf-8")
        outputs.append(svg_path)
    _write_manifest("factors", cfg, out_dir, outputs, {"fit": fit_s})
    print(
        f"factors: {model.factor_names[0]}/{model.factor_names[1]} model on "
        f"{len(ids)} cities; converged={model.converged}"
    )
    return 0


def _scores_svg(scores: "factors_mod.FactorScores", size: int = 480) -> str:
    """Hand-rolled scatter of factor scores with quadrant shading."""
    S = scores.scores
    span = float(np.max(np.abs(S))) if S.size else 1.0
    span = span * 1.1 if span > 0 else 1.0
    half = size / 2.0

    def px(v: float) -> str:
        return fmt_float(half + (v / span) * (half - 20.0))

    def py(v: float) -> str:
        return fmt_float(half - (v / span) * (half - 20.0))

    colors = {"I": "#5778a4", "II": "#6a9f58", "III": "#b8b0ac", "IV": "#e49444"}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="0" y1="{half}" x2="{size}" y2="{half}" stroke="#999"/>',
        f'<line x1="{half}" y1="0" x2="{half}" y2="{size}" stroke="#999"/>',
        f'<text x="{size - 14}" y="{half - 6}" font-size="11">{scores.factor_names[0]}</text>',
        f'<text x="{half + 6}" y="12" font-size="11">{scores.factor_names[1]}</text>',
    ]
    for i, cid in enumerate(scores.city_ids):
        q = scores.quadrants[i]
        parts.append(
            f'<circle cx="{px(float(S[i, 0]))}" cy="{py(float(S[i, 1]))}" r="4" '
            f'fill="{colors[q]}" fill-opacity="0.8"><title>{cid} ({q})</title></circle>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_report(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    cmd_ingest(cfg)
    cmd_predict(cfg)
    cmd_topics(cfg)
    cmd_factors(cfg)
    evaluation_data = json.loads((out_dir / "evaluation.json").read_text("utf-8"))
    factor_summary = json.loads((out_dir / "factor_summary.json").read_text("utf-8"))
    exclusions = json.loads((out_dir / "exclusions.json").read_text("utf-8"))
    medians_lines = (out_dir / "topic_medians.csv").read_text("utf-8").splitlines()[1:]
    report = {
        "n_cities_excluded": len(exclusions["excluded"]),
        "evaluation": {
            "mean_precision": evaluation_data["mean_precision"],
            "mean_recall": evaluation_data["mean_recall"],
            "mean_f1": evaluation_data["mean_f1"],
            "selected_lambda": evaluation_data["selected_lambda"],
            "n_splits": evaluation_data["n_splits"],
        },
        "topic_medians": {
            ln.split(",")[0]: float(ln.split(",")[1]) for ln in medians_lines
        },
        "factors": factor_summary,
    }
    report_path = out_dir / "report.json"
    write_json(report_path, report)
    _write_manifest("report", cfg, out_dir, [report_path], {})
    print(f"report: wrote {report_path}")
    return 0


def cmd_expand_lexicon(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not cfg.embeddings:
        raise InputError("expand-lexicon needs [paths] embeddings in the config")
    table = topics_mod.load_word_vectors(cfg.embeddings)
    lexicon = topics_mod.load_lexicon(cfg.lexicon or None)
    t0 = time.perf_counter()
    rows: list[list] = []
    skipped: list[str] = []
    for topic in lexicon.topics:
        seeds = lexicon.by_topic[topic]
        try:
            cands = topics_mod.expand_seeds(table, seeds, cfg.expand_k, cfg.expand_min_sim)
        except InputError:
            skipped.append(topic)
            continue
        for term, score in cands:
            rows.append([topics_mod.TOPIC_COLUMNS[topic], term, float(score)])
    expand_s = time.perf_counter() - t0
    cands_path = out_dir / "expanded_lexicon_candidates.csv"
    write_csv(cands_path, ["topic", "term", "score"], rows)
    _write_manifest(
        "expand-lexicon",
        cfg,
        out_dir,
        [cands_path],
        {"expand": expand_s},
        extra={"topics_without_seeds": skipped},
    )
    print(
        f"expand-lexicon: {len(rows)} candidates across "
        f"{len(lexicon.topics) - len(skipped)} topics (candidates only; nothing merged)"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (or set PLANLENS_CONFIG)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--threads", type=int, help="override [run] threads")
    common.add_argument("--out", help="override [paths] out_dir")
    parser = argparse.ArgumentParser(
        prog="planlens", description="Corpus analytics for city climate-action plans."
    )
    parser.add_argument("--version", action="version", version=f"planlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="read documents and labels into the corpus cache")
    sub.add_parser("predict", parents=[common], help="featurize and run the repeated-split evaluation")
    sub.add_parser("topics", parents=[common], help="count lexicon topics per city")
    fp = sub.add_parser("factors", parents=[common], help="fit the two-factor model and score cities")
    fp.add_argument("--svg", action="store_true", help="also draw the score scatter as SVG")
    sub.add_parser("report", parents=[common], help="run the whole pipeline and summarize")
    sub.add_parser(
        "expand-lexicon", parents=[common], help="propose lexicon candidates from word vectors"
    )
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get("PLANLENS_CONFIG")
    if not path:
        raise InputError("a config file is required: pass --config or set PLANLENS_CONFIG")
    cfg = load_config(path)
    overrides: dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        overrides["threads"] = args.threads
    if args.out:
        overrides["out_dir"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "topics":
            return cmd_topics(cfg)
        if args.command == "factors":
            return cmd_factors(cfg, svg=args.svg)
        if args.command == "report":
            return cmd_report(cfg)
        if args.command == "expand-lexicon":
            return cmd_expand_lexicon(cfg)
        raise InputError(f"unknown command {args.command!r}")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"degeneracy: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
