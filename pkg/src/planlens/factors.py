"""Topic correlations, two-factor principal-axis model, varimax, scores.

The factor model runs on length-normalized topic rates: a 9x9 correlation
matrix is factored by iterated principal-axis extraction (communalities
initialized from squared multiple correlations), rotated by
Kaiser-normalized varimax, and the factor whose absolute loadings
concentrate on the ecological topics is named "ecology", the other
"infrastructure". Regression scores place each city in a quadrant of the
(ecology, infrastructure) plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import CityRecord
from .errors import DegeneracyError, InputError
from .topics import CANONICAL_TOPICS

# Topics whose absolute loadings identify the ecology factor.
ECOLOGY_TOPICS = ("pollution/waste", "land use", "climate impacts", "offsets")

EXTRACTIONS = ("paf", "pca")
ROTATIONS = ("varimax", "none")

# Communality change threshold for stopping the principal-axis iteration.
_PAF_TOL = 1e-6
_PAF_MAX_ITER = 200
# Below this max communality the matrix is treated as having no factor
# structure at all (e.g. an identity correlation matrix).
_NO_STRUCTURE_EPS = 1e-8


@dataclass
class CorrelationMatrix:
    """Pearson correlations between topic columns."""

    labels: list[str]
    values: np.ndarray
    zero_variance: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        k = len(self.labels)
        if self.values.shape != (k, k):
            raise InputError("correlation matrix shape does not match labels")


def topic_correlations(matrix: np.ndarray, labels: list[str] | None = None) -> CorrelationMatrix:
    """Correlations between columns of a cities-by-topics matrix.

    Zero-variance columns are flagged; their off-diagonal correlations
    are set to 0 and the diagonal stays 1.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("topic matrix must be 2-D")
    n, k = X.shape
    if n < 3:
        raise InputError(f"need at least 3 cities to correlate topics, got {n}")
    if labels is None:
        labels = list(CANONICAL_TOPICS) if k == len(CANONICAL_TOPICS) else [f"col{j}" for j in range(k)]
    if len(labels) != k:
        raise InputError("labels length does not match matrix columns")
    if not np.all(np.isfinite(X)):
        raise InputError("topic matrix contains non-finite values")
    centered = X - X.mean(axis=0)
    sd = np.sqrt((centered**2).sum(axis=0))
    flat = sd == 0.0
    safe = np.where(flat, 1.0, sd)
    Z = centered / safe
    R = Z.T @ Z
    R = np.clip(R, -1.0, 1.0)
    R[flat, :] = 0.0
    R[:, flat] = 0.0
    np.fill_diagonal(R, 1.0)
    R = (R + R.T) / 2.0
    return CorrelationMatrix(
        labels=list(labels),
        values=R,
        zero_variance=tuple(labels[j] for j in np.flatnonzero(flat)),
    )


def _validate_corr(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise InputError("correlation matrix must be square")
    if not np.all(np.isfinite(R)):
        raise InputError("correlation matrix contains non-finite values")
    if np.max(np.abs(R - R.T)) > 1e-10:
        raise InputError("correlation matrix must be symmetric")
    if np.max(np.abs(np.diag(R) - 1.0)) > 1e-10:
        raise InputError("correlation matrix must have a unit diagonal")
    return (R + R.T) / 2.0


def _squared_multiple_correlations(R: np.ndarray) -> np.ndarray:
    """SMC_j = 1 - 1 / (R^-1)_jj, the usual communality initializer."""
    try:
        inv = np.linalg.inv(R)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError(
            "correlation matrix is singular; cannot initialize communalities"
        ) from exc
    d = np.diag(inv)
    if np.any(d <= 0.0):
        raise DegeneracyError("correlation matrix inverse has a non-positive diagonal")
    return np.clip(1.0 - 1.0 / d, 0.0, 1.0)


def _top_eigen_loadings(reduced: np.ndarray, n_factors: int) -> tuple[np.ndarray, np.ndarray]:
    """Loadings from the top eigenpairs, eigenvalues floored at zero."""
    vals, vecs = np.linalg.eigh(reduced)
    order = np.argsort(vals)[::-1][:n_factors]
    top_vals = np.maximum(vals[order], 0.0)
    L = vecs[:, order] * np.sqrt(top_vals)[None, :]
    return L, top_vals


def varimax(
    loadings: np.ndarray, tol: float = 1e-8, max_iter: int = 1000, kaiser: bool = True
) -> tuple[np.ndarray, int]:
    """Orthogonal varimax rotation (SVD form), optionally on
    Kaiser-normalized rows. Returns (rotated, n_iters)."""
    L = np.asarray(loadings, dtype=np.float64).copy()
    p, k = L.shape
    if k < 2:
        return L, 0
    row_norm = np.sqrt((L**2).sum(axis=1))
    scale = np.where(row_norm > 0.0, row_norm, 1.0) if kaiser else np.ones(p)
    L = L / scale[:, None]
    rot = np.eye(k)
    d_old = 0.0
    iters = 0
    for iters in range(1, max_iter + 1):
        Lr = L @ rot
        tmp = L.T @ (Lr**3 - Lr @ np.diag((Lr**2).sum(axis=0)) / p)
        u, s, vt = np.linalg.svd(tmp)
        rot = u @ vt
        d_new = float(s.sum())
        if d_new <= d_old * (1.0 + tol) and iters > 1:
            break
        d_old = d_new
    out = (L @ rot) * scale[:, None]
    return out, iters


@dataclass
class FactorModel:
    """Extracted and rotated loadings with diagnostics."""

    labels: list[str]
    loadings: np.ndarray
    communalities: np.ndarray
    factor_names: tuple[str, ...]
    extraction: str
    rotation: str
    converged: bool
    n_iters: int
    eigenvalues: np.ndarray
    heywood: bool = False
    no_factor_structure: bool = False
    correlation: np.ndarray | None = field(default=None, repr=False)

    def loading_rows(self) -> list[list]:
        rows = []
        for j, lab in enumerate(self.labels):
            rows.append(
                [lab, float(self.loadings[j, 0]), float(self.loadings[j, 1]), float(self.communalities[j])]
            )
        return rows


def _apply_sign_convention(L: np.ndarray) -> np.ndarray:
    """Flip each factor so its largest-magnitude loading is positive."""
    L = L.copy()
    for f in range(L.shape[1]):
        col = L[:, f]
        if col.size and col[int(np.argmax(np.abs(col)))] < 0.0:
            L[:, f] = -col
    return L


def _order_factors(L: np.ndarray, labels: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Put the ecology factor first.

    Ecology is the factor with the larger summed |loading| over the
    ecological topics; ties keep the original first column.
    """
    eco_rows = [j for j, lab in enumerate(labels) if lab in ECOLOGY_TOPICS]
    if not eco_rows or L.shape[1] != 2:
        return L, tuple(f"factor{i + 1}" for i in range(L.shape[1]))
    strength = np.abs(L[eco_rows, :]).sum(axis=0)
    if strength[1] > strength[0]:
        L = L[:, [1, 0]]
    return L, ("ecology", "infrastructure")


def fit_factor_model_from_corr(
    R: np.ndarray,
    labels: list[str] | None = None,
    n_factors: int = 2,
    extraction: str = "paf",
    rotation: str = "varimax",
) -> FactorModel:
    """Factor a correlation matrix directly."""
    R = _validate_corr(R)
    k = R.shape[0]
    if labels is None:
        labels = list(CANONICAL_TOPICS) if k == len(CANONICAL_TOPICS) else [f"col{j}" for j in range(k)]
    if len(labels) != k:
        raise InputError("labels length does not match the correlation matrix")
    if not 1 <= n_factors < k:
        raise InputError(f"n_factors must be in [1, {k - 1}], got {n_factors}")
    if extraction not in EXTRACTIONS:
        raise InputError(f"extraction must be one of {EXTRACTIONS}, got {extraction!r}")
    if rotation not in ROTATIONS:
        raise InputError(f"rotation must be one of {ROTATIONS}, got {rotation!r}")

    heywood = False
    if extraction == "pca":
        L, eigvals = _top_eigen_loadings(R, n_factors)
        h2 = (L**2).sum(axis=1)
        converged = True
        n_iters = 1
    else:
        h2 = _squared_multiple_correlations(R)
        converged = False
        n_iters = 0
        L = np.zeros((k, n_factors))
        eigvals = np.zeros(n_factors)
        for n_iters in range(1, _PAF_MAX_ITER + 1):
            reduced = R.copy()
            np.fill_diagonal(reduced, h2)
            L, eigvals = _top_eigen_loadings(reduced, n_factors)
            h2_new = (L**2).sum(axis=1)
            if np.any(h2_new > 1.0):
                heywood = True
                h2_new = np.minimum(h2_new, 1.0)
            delta = float(np.max(np.abs(h2_new - h2)))
            h2 = h2_new
            if delta < _PAF_TOL:
                converged = True
                break

    no_structure = bool(np.max(h2) <= _NO_STRUCTURE_EPS) if k else True
    rotation_used = rotation
    if no_structure:
        L = np.zeros((k, n_factors))
        factor_names: tuple[str, ...] = ("ecology", "infrastructure") if n_factors == 2 else tuple(
            f"factor{i + 1}" for i in range(n_factors)
        )
    else:
        if rotation == "varimax":
            L, _ = varimax(L)
        L = _apply_sign_convention(L)
        L, factor_names = _order_factors(L, labels)
    communalities = (L**2).sum(axis=1)
    return FactorModel(
        labels=list(labels),
        loadings=L,
        communalities=communalities,
        factor_names=factor_names,
        extraction=extraction,
        rotation=rotation_used,
        converged=converged,
        n_iters=n_iters,
        eigenvalues=np.asarray(eigvals, dtype=np.float64),
        heywood=heywood,
        no_factor_structure=no_structure,
        correlation=R,
    )


def fit_factor_model(
    matrix: np.ndarray,
    labels: list[str] | None = None,
    n_factors: int = 2,
    extraction: str = "paf",
    rotation: str = "varimax",
) -> FactorModel:
    """Correlate a cities-by-topics matrix and factor it.

    Zero-variance topic columns make the model undefined and raise a
    degeneracy error naming them.
    """
    corr = topic_correlations(matrix, labels)
    if corr.zero_variance:
        raise DegeneracyError(
            "topic column(s) with zero variance: " + ", ".join(corr.zero_variance)
        )
    return fit_factor_model_from_corr(
        corr.values, corr.labels, n_factors=n_factors, extraction=extraction, rotation=rotation
    )


def quadrant(ecology: float, infrastructure: float) -> str:
    """Quadrant label; a coordinate of exactly 0 counts as negative."""
    e_pos = ecology > 0.0
    i_pos = infrastructure > 0.0
    if e_pos and i_pos:
        return "II"
    if not e_pos and i_pos:
        return "I"
    if not e_pos and not i_pos:
        return "III"
    return "IV"


@dataclass
class FactorScores:
    """Regression factor scores per city with quadrant labels."""

    city_ids: list[str]
    scores: np.ndarray
    quadrants: list[str]
    factor_names: tuple[str, ...]

    def rows(self) -> list[list]:
        return [
            [cid, float(self.scores[i, 0]), float(self.scores[i, 1]), self.quadrants[i]]
            for i, cid in enumerate(self.city_ids)
        ]


def factor_scores(
    model: FactorModel, matrix: np.ndarray, city_ids: list[str] | None = None
) -> FactorScores:
    """Regression-method scores: Z R^-1 Lambda on standardized columns.

    Columns standardize with the sample standard deviation (ddof=1);
    zero-variance columns contribute zeros. A singular correlation matrix
    falls back to the pseudoinverse.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.labels):
        raise InputError("score matrix columns must match the model's topics")
    n = X.shape[0]
    if city_ids is None:
        city_ids = [f"row{i}" for i in range(n)]
    if len(city_ids) != n:
        raise InputError("city_ids length does not match matrix rows")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1) if n > 1 else np.zeros(X.shape[1])
    safe = np.where(sd > 0.0, sd, 1.0)
    Z = (X - mean) / safe
    Z[:, sd == 0.0] = 0.0
    R = model.correlation
    if R is None:
        R = topic_correlations(X, model.labels).values
    try:
        weights = np.linalg.solve(R, model.loadings)
    except np.linalg.LinAlgError:
        weights = np.linalg.pinv(R) @ model.loadings
    S = Z @ weights
    quads = [quadrant(float(S[i, 0]), float(S[i, 1])) for i in range(n)]
    return FactorScores(
        city_ids=list(city_ids), scores=S, quadrants=quads, factor_names=model.factor_names
    )


_SUMMARY_FIELDS = ("population", "baseline_year", "percent_reduction", "emis_per_capita")


def _percentile_linear(sorted_vals: np.ndarray, q: float) -> float:
    """Linear-interpolation percentile (the numpy default), kept explicit."""
    return float(np.percentile(sorted_vals, q, method="linear"))


def summary_stats(records: list[CityRecord]) -> list[dict]:
    """Per-column descriptive statistics over cities reporting a value.

    Columns: N, mean, sd (ddof=1; null when N=1), min, p25, p75, max.
    """
    out = []
    for name in _SUMMARY_FIELDS:
        vals = np.array(
            [getattr(r, name) for r in records if getattr(r, name) is not None],
            dtype=np.float64,
        )
        if vals.size == 0:
            continue
        out.append(
            {
                "column": name,
                "n": int(vals.size),
                "mean": float(vals.mean()),
                "sd": float(vals.std(ddof=1)) if vals.size > 1 else None,
                "min": float(vals.min()),
                "p25": _percentile_linear(vals, 25.0),
                "p75": _percentile_linear(vals, 75.0),
                "max": float(vals.max()),
            }
        )
    return out


def data_quality(records: list[CityRecord]) -> dict:
    """Flags suspicious metadata without altering it.

    percent_reduction above 100 is physically possible only for
    beyond-net-zero pledges, so such cities are listed for review.
    """
    over = sorted(
        r.city_id
        for r in records
        if r.percent_reduction is not None and r.percent_reduction > 100.0
    )
    missing_any = sorted(
        r.city_id
        for r in records
        if any(getattr(r, f) is None for f in _SUMMARY_FIELDS)
    )
    return {
        "percent_reduction_over_100": over,
        "cities_missing_metadata": missing_any,
    }
