"""Corpus ingestion and text preprocessing.

The preprocessing pipeline is: tokenize, lemmatize, stopword filter, then
emission of all 1-grams plus adjacent 2-grams. Documents sharing a city id
are concatenated in lexicographic filename order; 2-grams never span file
boundaries.
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import InputError

# Maximal runs of letters; digits, underscores and punctuation break tokens.
_TOKEN_RE = re.compile(r"[^\W\d_]+", re.UNICODE)

# A city whose concatenated raw text is shorter than this is excluded.
MIN_TEXT_CHARS = 50

# Final letters undoubled after stripping -ing/-ed ("planning" -> "plan").
# d, l, s, z stay doubled ("added" -> "add", "telling" -> "tell").
_UNDOUBLE = frozenset("bgmnprt")

_lemma_table_cache: dict[str, str] | None = None
_stopwords_cache: frozenset[str] | None = None


def _data_text(name: str) -> str:
    return (resources.files("planlens") / "data" / name).read_text(encoding="utf-8")


def bundled_lemma_table() -> dict[str, str]:
    """Surface-form to lemma mapping shipped with the package."""
    global _lemma_table_cache
    if _lemma_table_cache is None:
        table: dict[str, str] = {}
        for line in _data_text("lemmas.txt").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            surface, lemma = line.split()
            table[surface] = lemma
        _lemma_table_cache = table
    return _lemma_table_cache


def bundled_stopwords() -> frozenset[str]:
    """Stopword list shipped with the package, applied after lemmatization."""
    global _stopwords_cache
    if _stopwords_cache is None:
        words = []
        for line in _data_text("stopwords.txt").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                words.append(line)
        _stopwords_cache = frozenset(words)
    return _stopwords_cache


def load_stopwords(path: Path | str) -> frozenset[str]:
    """Read a user-supplied stopword file (one entry per line, '#' comments)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read stopword file {path}: {exc}") from exc
    words = [ln.strip() for ln in text.splitlines()]
    return frozenset(w for w in words if w and not w.startswith("#"))


def tokenize(text: str) -> list[str]:
    """Lowercased alphabetic tokens of length >= 2, in document order."""
    return [t.lower() for t in _TOKEN_RE.findall(text) if len(t) > 1]


def _strip_suffix(token: str) -> str:
    """Apply at most one suffix rule; returns the token unchanged if none fit."""
    n = len(token)
    if token.endswith("ies") and n - 3 >= 3:
        return token[:-3] + "y"
    if token.endswith("ied") and n - 3 >= 3:
        return token[:-3] + "y"
    if token.endswith("es") and n - 2 >= 3:
        stem = token[:-2]
        if stem.endswith(("x", "z", "ch", "sh", "ss", "o")):
            return stem
    if token.endswith("s") and n - 1 >= 3 and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    for suffix in ("ing", "ed"):
        if token.endswith(suffix) and n - len(suffix) >= 3:
            if suffix == "ed" and token.endswith("eed"):
                continue
            stem = token[: -len(suffix)]
            if stem[-1] == stem[-2] and stem[-1] in _UNDOUBLE:
                stem = stem[:-1]
            return stem
    return token


def lemmatize(token: str) -> str:
    """Reduce a token to its lemma.

    The bundled lemma table wins over the suffix rules. Rules are applied
    until a fixed point, which makes the map idempotent: table values are
    themselves fixed points, and a token no rule touches is returned as is.
    """
    table = bundled_lemma_table()
    current = token
    while True:
        if current in table:
            return table[current]
        nxt = _strip_suffix(current)
        if nxt == current:
            return current
        current = nxt


@dataclass(frozen=True)
class RawDocument:
    """One input text with the city it belongs to."""

    city_id: str
    text: str
    source_path: str = ""

    def __post_init__(self) -> None:
        if not self.city_id:
            raise InputError("document has an empty city_id")


def preprocess(
    raw: RawDocument,
    stopwords: frozenset[str],
    *,
    drop_tokens: frozenset[str] = frozenset(),
    bigrams: bool = True,
) -> list[str]:
    """Turn one document into its term sequence.

    Returns the filtered 1-gram lemmas in order, followed by the adjacent
    2-grams formed on that filtered sequence (space-joined). `drop_tokens`
    removes raw lowercased tokens before lemmatization; it carries the
    corpus-level capitalization filter.
    """
    kept: list[str] = []
    for tok in tokenize(raw.text):
        if tok in drop_tokens:
            continue
        lemma = lemmatize(tok)
        if lemma in stopwords:
            continue
        kept.append(lemma)
    if not bigrams:
        return kept
    return kept + [f"{a} {b}" for a, b in zip(kept, kept[1:])]


@dataclass
class CityRecord:
    """Label and optional metadata for one retained city."""

    city_id: str
    label: int
    population: float | None = None
    baseline_year: float | None = None
    percent_reduction: float | None = None
    emis_per_capita: float | None = None

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise InputError(f"city {self.city_id!r}: label must be 0 or 1, got {self.label!r}")
        if self.population is not None and self.population < 0:
            raise InputError(f"city {self.city_id!r}: population must be nonnegative")
        if self.baseline_year is not None and not (1900 <= self.baseline_year <= 2100):
            raise InputError(
                f"city {self.city_id!r}: baseline_year {self.baseline_year} outside [1900, 2100]"
            )
        if self.percent_reduction is not None and self.percent_reduction < 0:
            raise InputError(f"city {self.city_id!r}: percent_reduction must be nonnegative")


@dataclass
class Corpus:
    """Retained cities with their term sequences and the exclusion report."""

    records: list[CityRecord]
    term_sequences: dict[str, list[str]]
    exclusions: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def city_ids(self) -> list[str]:
        return [r.city_id for r in self.records]

    def labels(self) -> list[int]:
        return [r.label for r in self.records]

    @property
    def n_docs(self) -> int:
        return len(self.records)


_METADATA_COLUMNS = ("population", "baseline_year", "percent_reduction", "emis_per_capita")


def _parse_optional_float(city_id: str, column: str, cell: str | None) -> float | None:
    if cell is None or cell.strip() == "":
        return None
    try:
        return float(cell)
    except ValueError as exc:
        raise InputError(f"city {city_id!r}: column {column!r} has non-numeric value {cell!r}") from exc


def read_labels(path: Path | str) -> dict[str, CityRecord]:
    """Parse the labels table (city_id, label, optional metadata columns)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read labels file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"labels file {path} is not valid UTF-8: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    if reader.fieldnames is None or "city_id" not in reader.fieldnames or "label" not in reader.fieldnames:
        raise InputError(f"labels file {path} must have a header with city_id and label columns")
    records: dict[str, CityRecord] = {}
    for row in reader:
        city_id = (row.get("city_id") or "").strip()
        if not city_id:
            raise InputError(f"labels file {path}: row with empty city_id")
        if city_id in records:
            raise InputError(f"labels file {path}: duplicate rows for city {city_id!r}")
        raw_label = (row.get("label") or "").strip()
        if raw_label not in ("0", "1"):
            raise InputError(f"city {city_id!r}: label must be 0 or 1, got {raw_label!r}")
        extra = {
            col: _parse_optional_float(city_id, col, row.get(col)) for col in _METADATA_COLUMNS
        }
        records[city_id] = CityRecord(city_id=city_id, label=int(raw_label), **extra)
    return records


def _capitalization_drop_set(texts: list[str], threshold: float) -> frozenset[str]:
    """Lowercased tokens whose raw occurrences are capitalized more often
    than `threshold`; a crude proper-noun filter."""
    total: Counter[str] = Counter()
    capped: Counter[str] = Counter()
    for text in texts:
        for tok in _TOKEN_RE.findall(text):
            if len(tok) < 2:
                continue
            low = tok.lower()
            total[low] += 1
            if tok[0].isupper():
                capped[low] += 1
    return frozenset(t for t, n in total.items() if capped[t] / n > threshold)


def load_corpus(
    doc_dir: Path | str,
    labels_path: Path | str,
    *,
    stopwords: frozenset[str] | None = None,
    bigrams: bool = True,
    drop_capitalized: bool = True,
    capitalized_threshold: float = 0.8,
) -> Corpus:
    """Read a document directory plus labels table into a Corpus.

    Files are named `<city_id>.txt` or `<city_id>__<suffix>.txt`; files
    sharing a city id are concatenated in lexicographic filename order.
    Cities whose concatenated raw text is shorter than MIN_TEXT_CHARS are
    dropped and listed in the exclusion report. Every retained city must
    have a label row.
    """
    doc_dir = Path(doc_dir)
    if not doc_dir.is_dir():
        raise InputError(f"document directory {doc_dir} does not exist")
    paths = sorted(doc_dir.glob("*.txt"))
    if not paths:
        raise InputError(f"document directory {doc_dir} contains no .txt files")
    if stopwords is None:
        stopwords = bundled_stopwords()

    docs_by_city: dict[str, list[tuple[str, str]]] = {}
    for path in paths:
        city_id = path.stem.split("__", 1)[0]
        if not city_id:
            raise InputError(f"document {path} has an empty city_id prefix")
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"document {path} is not valid UTF-8: {exc}") from exc
        except OSError as exc:
            raise InputError(f"cannot read document {path}: {exc}") from exc
        docs_by_city.setdefault(city_id, []).append((path.name, text))

    labels = read_labels(labels_path)

    exclusions: list[dict] = []
    retained: dict[str, list[tuple[str, str]]] = {}
    for city_id in sorted(docs_by_city):
        files = docs_by_city[city_id]
        n_chars = sum(len(text) for _, text in files)
        if n_chars < MIN_TEXT_CHARS:
            exclusions.append(
                {
                    "city_id": city_id,
                    "reason": f"concatenated text has {n_chars} characters, "
                    f"below the {MIN_TEXT_CHARS}-character minimum",
                }
            )
            continue
        retained[city_id] = files

    missing = [c for c in retained if c not in labels]
    if missing:
        raise InputError(f"no label row for city {missing[0]!r} (and {len(missing) - 1} more)"
                         if len(missing) > 1 else f"no label row for city {missing[0]!r}")

    drop_tokens: frozenset[str] = frozenset()
    if drop_capitalized:
        all_texts = [text for files in retained.values() for _, text in files]
        drop_tokens = _capitalization_drop_set(all_texts, capitalized_threshold)

    term_sequences: dict[str, list[str]] = {}
    for city_id, files in retained.items():
        seq: list[str] = []
        for name, text in files:
            seq.extend(
                preprocess(
                    RawDocument(city_id=city_id, text=text, source_path=name),
                    stopwords,
                    drop_tokens=drop_tokens,
                    bigrams=bigrams,
                )
            )
        term_sequences[city_id] = seq

    records = [labels[c] for c in sorted(retained)]
    meta = {
        "n_files": len(paths),
        "bigrams": bigrams,
        "drop_capitalized": drop_capitalized,
        "capitalized_threshold": capitalized_threshold,
        "dropped_capitalized_terms": sorted(drop_tokens),
        "n_stopwords": len(stopwords),
        "min_text_chars": MIN_TEXT_CHARS,
    }
    return Corpus(records=records, term_sequences=term_sequences, exclusions=exclusions, meta=meta)


def corpus_to_dict(corpus: Corpus) -> dict:
    """JSON-ready snapshot of a corpus (used by the on-disk cache)."""
    return {
        "records": [
            {
                "city_id": r.city_id,
                "label": r.label,
                "population": r.population,
                "baseline_year": r.baseline_year,
                "percent_reduction": r.percent_reduction,
                "emis_per_capita": r.emis_per_capita,
            }
            for r in corpus.records
        ],
        "term_sequences": corpus.term_sequences,
        "exclusions": corpus.exclusions,
        "meta": corpus.meta,
    }


def corpus_from_dict(data: dict) -> Corpus:
    """Inverse of corpus_to_dict."""
    try:
        records = [CityRecord(**r) for r in data["records"]]
        return Corpus(
            records=records,
            term_sequences={k: list(v) for k, v in data["term_sequences"].items()},
            exclusions=list(data.get("exclusions", [])),
            meta=dict(data.get("meta", {})),
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed corpus snapshot: {exc}") from exc
