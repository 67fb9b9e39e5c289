"""Nine-topic lexicon analysis and embedding-driven lexicon expansion.

Topic counting walks each city's term sequence and matches elements
(unigrams and the separately-stored adjacent bigrams) against the
lexicon. Because bigram elements are distinct sequence entries, matching
a bigram never consumes its unigrams: counts are additive over any
concatenation of sequences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .corpus import Corpus, lemmatize
from .errors import InputError

CANONICAL_TOPICS = (
    "land use",
    "offsets",
    "transportation",
    "heating",
    "energy",
    "pollution/waste",
    "building",
    "climate impacts",
    "industry",
)

# CSV header forms: lowercase with underscores, no slashes.
TOPIC_COLUMNS = {
    "land use": "land_use",
    "offsets": "offsets",
    "transportation": "transportation",
    "heating": "heating",
    "energy": "energy",
    "pollution/waste": "pollution_waste",
    "building": "building",
    "climate impacts": "climate_impacts",
    "industry": "industry",
}


@dataclass
class Lexicon:
    """Terms in lemma form, each assigned to exactly one topic."""

    topics: tuple[str, ...]
    term_topic: dict[str, str]
    by_topic: dict[str, list[str]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        by: dict[str, list[str]] = {t: [] for t in self.topics}
        for term, topic in self.term_topic.items():
            if topic not in by:
                raise InputError(f"lexicon term {term!r} names unknown topic {topic!r}")
            by[topic].append(term)
        for t in by:
            by[t].sort()
        empty = [t for t in self.topics if not by[t]]
        if empty:
            raise InputError(f"lexicon has no terms for topic(s): {', '.join(empty)}")
        self.by_topic = by

    def __len__(self) -> int:
        return len(self.term_topic)

    def topic_index(self, topic: str) -> int:
        return self.topics.index(topic)


def _normalize_term(raw: str) -> str:
    """Lowercase and lemmatize each word of a 1- or 2-gram."""
    words = raw.strip().lower().split()
    if not 1 <= len(words) <= 2:
        raise InputError(f"lexicon term {raw!r} must be one or two words")
    return " ".join(lemmatize(w) for w in words)


def load_lexicon(path: Path | str | None = None) -> Lexicon:
    """Read a topic,term CSV. Terms are lemmatized on load; duplicates
    within a topic collapse silently, duplicates across topics are an
    error. All nine canonical topics must be present and nonempty."""
    if path is None:
        text = resources.files("planlens").joinpath("data/lexicon.csv").read_text("utf-8")
        source = "bundled lexicon"
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read lexicon {path}: {exc}") from exc
        source = str(path)
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["topic", "term"]:
        raise InputError(f"{source}: expected header 'topic,term'")
    term_topic: dict[str, str] = {}
    for ln, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise InputError(f"{source} line {ln}: expected 2 fields, got {len(row)}")
        topic = row[0].strip()
        if topic not in CANONICAL_TOPICS:
            raise InputError(f"{source} line {ln}: unknown topic {topic!r}")
        term = _normalize_term(row[1])
        if not term:
            raise InputError(f"{source} line {ln}: empty term")
        prior = term_topic.get(term)
        if prior is not None and prior != topic:
            raise InputError(
                f"{source} line {ln}: term {term!r} is assigned to both "
                f"{prior!r} and {topic!r}"
            )
        term_topic[term] = topic
    return Lexicon(topics=CANONICAL_TOPICS, term_topic=term_topic)


def topic_counts(sequence, lexicon: Lexicon) -> np.ndarray:
    """Occurrences per topic (canonical order) with multiplicity."""
    out = np.zeros(len(lexicon.topics), dtype=np.int64)
    idx = {t: i for i, t in enumerate(lexicon.topics)}
    for element in sequence:
        topic = lexicon.term_topic.get(element)
        if topic is not None:
            out[idx[topic]] += 1
    return out


def topic_matrix(corpus: Corpus, lexicon: Lexicon) -> tuple[np.ndarray, list[str]]:
    """Counts per city (rows, in city_id order) by topic (columns)."""
    ids = corpus.city_ids()
    mat = np.zeros((len(ids), len(lexicon.topics)), dtype=np.int64)
    for i, cid in enumerate(ids):
        mat[i] = topic_counts(corpus.term_sequences[cid], lexicon)
    return mat, ids


def sequence_lengths(corpus: Corpus) -> np.ndarray:
    """Total sequence elements per city, in city_id order."""
    return np.array([len(corpus.term_sequences[c]) for c in corpus.city_ids()], dtype=np.int64)


def length_normalize(matrix: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Counts divided by the city's sequence length; zero-length rows
    stay zero."""
    matrix = np.asarray(matrix, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.float64)
    if matrix.shape[0] != lengths.shape[0]:
        raise InputError("matrix rows and lengths disagree")
    safe = np.where(lengths > 0.0, lengths, 1.0)
    return matrix / safe[:, None]


def median_topic_counts(matrix: np.ndarray) -> np.ndarray:
    """Column medians (linear interpolation at even counts)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0:
        raise InputError("cannot take medians of an empty matrix")
    return np.median(matrix, axis=0)


@dataclass
class EmbeddingTable:
    """Token vectors from a text file, one token per row."""

    tokens: list[str]
    vectors: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise InputError("embedding vectors must be one row per token")
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def load_word_vectors(path: Path | str) -> EmbeddingTable:
    """Parse whitespace-separated vectors: `token v1 v2 ... vd` per line.

    An optional first line `<count> <dim>` (two integers) is accepted and
    checked. Inconsistent dimensions, malformed numbers, and duplicate
    tokens are hard errors naming the line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read word vectors {path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise InputError(f"{path}: no vectors found")
    start = 0
    declared: tuple[int, int] | None = None
    head = lines[0].split()
    if len(head) == 2:
        try:
            declared = (int(head[0]), int(head[1]))
            start = 1
        except ValueError:
            declared = None
    tokens: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    seen: set[str] = set()
    for ln_no, ln in enumerate(lines[start:], start=start + 1):
        parts = ln.split()
        if len(parts) < 2:
            raise InputError(f"{path} line {ln_no}: expected a token and vector values")
        token = parts[0]
        if token in seen:
            raise InputError(f"{path} line {ln_no}: duplicate token {token!r}")
        try:
            vec = [float(v) for v in parts[1:]]
        except ValueError as exc:
            raise InputError(f"{path} line {ln_no}: malformed vector value ({exc})") from exc
        if not all(np.isfinite(vec)):
            raise InputError(f"{path} line {ln_no}: non-finite vector value")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise InputError(
                f"{path} line {ln_no}: dimension {len(vec)} differs from {dim}"
            )
        seen.add(token)
        tokens.append(token)
        rows.append(vec)
    if not tokens:
        raise InputError(f"{path}: no vectors found")
    if declared is not None and declared[0] != len(tokens):
        raise InputError(
            f"{path}: header declares {declared[0]} vectors, found {len(tokens)}"
        )
    if declared is not None and declared[1] != dim:
        raise InputError(f"{path}: header declares dimension {declared[1]}, found {dim}")
    return EmbeddingTable(tokens=tokens, vectors=np.array(rows))


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between u and v; 0.0 if either has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(u @ v) / (nu * nv)


def expand_seeds(
    table: EmbeddingTable, seeds, k: int, min_sim: float
) -> list[tuple[str, float]]:
    """Top-k candidate terms by max cosine similarity to any seed.

    Seeds themselves are excluded from candidates. Candidates below
    min_sim are dropped. Ties sort lexicographically. Seeds missing from
    the table are skipped; if none are present, that is an error."""
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    seed_list = list(seeds)
    if not seed_list:
        raise InputError("no seed terms given")
    present = [s for s in seed_list if s in table.index]
    if not present:
        raise InputError(
            f"none of the seed terms are in the vector table: {', '.join(sorted(seed_list))}"
        )
    if k == 0:
        return []
    seed_rows = table.vectors[[table.index[s] for s in present]]
    seed_norms = np.linalg.norm(seed_rows, axis=1)
    all_norms = np.linalg.norm(table.vectors, axis=1)
    # Cosine matrix candidates x seeds with zero-norm rows pinned to 0.
    dots = table.vectors @ seed_rows.T
    denom = np.outer(all_norms, seed_norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.where(denom > 0.0, dots / np.where(denom > 0.0, denom, 1.0), 0.0)
    best = cos.max(axis=1)
    seed_set = set(seed_list)
    scored = [
        (tok, float(best[i]))
        for i, tok in enumerate(table.tokens)
        if tok not in seed_set and best[i] >= min_sim
    ]
    scored.sort(key=lambda r: (-r[1], r[0]))
    return scored[:k]


def wordcloud_data(
    values: np.ndarray, terms: list[str], lexicon: Lexicon, top_n: int = 10
) -> list[dict]:
    """The top_n terms of one city row by weight, tagged with their topic
    (null when the term is outside the lexicon). Ties sort by term."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(terms),):
        raise InputError("values and terms must have the same length")
    if top_n < 0:
        raise InputError(f"top_n must be >= 0, got {top_n}")
    order = sorted(range(len(terms)), key=lambda j: (-values[j], terms[j]))
    out = []
    for j in order[:top_n]:
        if values[j] <= 0.0:
            break
        out.append(
            {
                "term": terms[j],
                "value": float(values[j]),
                "topic": lexicon.term_topic.get(terms[j]),
            }
        )
    return out
