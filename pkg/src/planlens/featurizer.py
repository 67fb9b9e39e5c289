"""Term-document featurization: vocabulary building, counts, tf-idf.

The default tf-idf variant divides each count by the term's total corpus
frequency, so every retained column sums to exactly 1 over the documents.
A classic count * ln(n_docs / doc_freq) variant is available for
sensitivity runs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ._format import fmt_float, write_csv, write_json
from .corpus import Corpus
from .errors import ConsistencyError, InputError

TFIDF_MODES = ("paper", "classic")


@dataclass
class Vocabulary:
    """Retained terms with their document and corpus frequencies."""

    terms: list[str]
    doc_freq: np.ndarray
    corpus_freq: np.ndarray
    n_docs: int
    min_df: float
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if list(self.terms) != sorted(self.terms):
            raise ConsistencyError("vocabulary terms must be sorted lexicographically")
        if len(set(self.terms)) != len(self.terms):
            raise ConsistencyError("vocabulary terms must be unique")
        self.doc_freq = np.asarray(self.doc_freq, dtype=np.int64)
        self.corpus_freq = np.asarray(self.corpus_freq, dtype=np.int64)
        if len(self.doc_freq) != len(self.terms) or len(self.corpus_freq) != len(self.terms):
            raise ConsistencyError("vocabulary frequency arrays must match the term list")
        self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)


def build_vocabulary(corpus: Corpus, min_df: float = 0.10) -> Vocabulary:
    """Terms appearing in at least ceil(min_df * n_docs) documents, sorted.

    doc_freq counts documents containing the term; corpus_freq counts total
    occurrences across all term sequences.
    """
    if not 0.0 <= min_df <= 1.0:
        raise InputError(f"min_df must be in [0, 1], got {min_df}")
    n_docs = corpus.n_docs
    if n_docs == 0:
        raise InputError("corpus has no retained cities")
    doc_freq: Counter[str] = Counter()
    corpus_freq: Counter[str] = Counter()
    for seq in corpus.term_sequences.values():
        corpus_freq.update(seq)
        doc_freq.update(set(seq))
    threshold = max(1, math.ceil(min_df * n_docs))
    terms = sorted(t for t, d in doc_freq.items() if d >= threshold)
    if not terms:
        raise InputError(
            f"no term meets the document-frequency threshold "
            f"({threshold} of {n_docs} documents at min_df={min_df})"
        )
    return Vocabulary(
        terms=terms,
        doc_freq=np.array([doc_freq[t] for t in terms], dtype=np.int64),
        corpus_freq=np.array([corpus_freq[t] for t in terms], dtype=np.int64),
        n_docs=n_docs,
        min_df=min_df,
    )


@dataclass
class SparseFeatureMatrix:
    """Row-major sparse matrix with one row per city.

    Stored values are finite and nonnegative; each (row, col) appears at
    most once. Backed by CSR storage.
    """

    matrix: sp.csr_matrix
    row_ids: list[str]

    def __post_init__(self) -> None:
        self.matrix = sp.csr_matrix(self.matrix)
        if self.matrix.shape[0] != len(self.row_ids):
            raise ConsistencyError("row_ids length must equal the number of rows")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise ConsistencyError("row_ids must be unique")
        if self.matrix.data.size:
            if not np.all(np.isfinite(self.matrix.data)):
                raise ConsistencyError("matrix values must be finite")
            if np.any(self.matrix.data < 0):
                raise ConsistencyError("matrix values must be nonnegative")
        self.matrix.sort_indices()

    @classmethod
    def from_triplets(
        cls,
        n_rows: int,
        n_cols: int,
        rows: np.ndarray,
        cols: np.ndarray,
        values: np.ndarray,
        row_ids: list[str] | None = None,
    ) -> "SparseFeatureMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if len({(int(r), int(c)) for r, c in zip(rows, cols)}) != len(rows):
            raise ConsistencyError("duplicate (row, col) entry in triplets")
        mat = sp.csr_matrix((values, (rows, cols)), shape=(n_rows, n_cols))
        if row_ids is None:
            row_ids = [f"row{i}" for i in range(n_rows)]
        return cls(matrix=mat, row_ids=row_ids)

    @classmethod
    def from_dense(cls, array: np.ndarray, row_ids: list[str] | None = None) -> "SparseFeatureMatrix":
        array = np.asarray(array, dtype=np.float64)
        if row_ids is None:
            row_ids = [f"row{i}" for i in range(array.shape[0])]
        return cls(matrix=sp.csr_matrix(array), row_ids=row_ids)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def triplets(self):
        """Yield (row, col, value) in row-major order."""
        mat = self.matrix
        for i in range(mat.shape[0]):
            for k in range(mat.indptr[i], mat.indptr[i + 1]):
                yield i, int(mat.indices[k]), float(mat.data[k])

    def take_rows(self, indices) -> "SparseFeatureMatrix":
        indices = np.asarray(indices, dtype=np.int64)
        return SparseFeatureMatrix(
            matrix=self.matrix[indices], row_ids=[self.row_ids[i] for i in indices]
        )


def count_matrix(corpus: Corpus, vocab: Vocabulary) -> SparseFeatureMatrix:
    """Occurrence counts of each vocabulary term per city."""
    row_ids = corpus.city_ids()
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, city_id in enumerate(row_ids):
        counts = Counter(t for t in corpus.term_sequences[city_id] if t in vocab.index)
        for term in sorted(counts):
            rows.append(i)
            cols.append(vocab.index[term])
            vals.append(float(counts[term]))
    mat = sp.csr_matrix(
        (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)))
        if rows
        else ([], ([], [])),
        shape=(len(row_ids), len(vocab)),
    )
    return SparseFeatureMatrix(matrix=mat, row_ids=row_ids)


def tfidf_transform(
    counts: SparseFeatureMatrix, vocab: Vocabulary, mode: str = "paper"
) -> SparseFeatureMatrix:
    """Reweight a count matrix.

    mode="paper": value = count / corpus_freq, so each column of the full
    corpus matrix sums to 1. mode="classic": value = count *
    ln(n_docs / doc_freq).
    """
    if mode not in TFIDF_MODES:
        raise InputError(f"tfidf mode must be one of {TFIDF_MODES}, got {mode!r}")
    if counts.n_cols != len(vocab):
        raise ConsistencyError("count matrix width does not match the vocabulary")
    mat = counts.matrix.copy().astype(np.float64)
    col_of_entry = mat.indices
    if mode == "paper":
        cf = vocab.corpus_freq[col_of_entry].astype(np.float64)
        if np.any((cf == 0) & (mat.data != 0)):
            raise ConsistencyError("nonzero count for a term with zero corpus frequency")
        mat.data = mat.data / cf
    else:
        df = vocab.doc_freq[col_of_entry].astype(np.float64)
        if np.any(df == 0):
            raise ConsistencyError("zero document frequency for a stored term")
        mat.data = mat.data * np.log(vocab.n_docs / df)
    return SparseFeatureMatrix(matrix=mat, row_ids=list(counts.row_ids))


def save_vocabulary(vocab: Vocabulary, path: Path | str) -> None:
    write_csv(
        path,
        ["term", "doc_freq", "corpus_freq"],
        [[t, int(vocab.doc_freq[i]), int(vocab.corpus_freq[i])] for i, t in enumerate(vocab.terms)],
    )


def load_vocabulary(path: Path | str, n_docs: int, min_df: float) -> Vocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "term,doc_freq,corpus_freq":
        raise InputError(f"vocabulary file {path} has an unexpected header")
    terms, dfs, cfs = [], [], []
    for ln in lines[1:]:
        term, df, cf = ln.rsplit(",", 2)
        terms.append(term)
        dfs.append(int(df))
        cfs.append(int(cf))
    return Vocabulary(
        terms=terms,
        doc_freq=np.array(dfs, dtype=np.int64),
        corpus_freq=np.array(cfs, dtype=np.int64),
        n_docs=n_docs,
        min_df=min_df,
    )


def save_matrix(
    X: SparseFeatureMatrix,
    vocab: Vocabulary,
    csv_path: Path | str,
    header_path: Path | str,
    mode: str,
) -> None:
    """Triplet CSV (city_id, term, value) plus a JSON sidecar header."""
    rows = [[X.row_ids[i], vocab.terms[j], fmt_float(v)] for i, j, v in X.triplets()]
    write_csv(csv_path, ["city_id", "term", "value"], rows)
    write_json(
        header_path,
        {"n_rows": X.n_rows, "n_cols": X.n_cols, "mode": mode, "min_df": vocab.min_df},
    )
