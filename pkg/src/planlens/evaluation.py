"""Repeated stratified splits, LOOCV penalty selection, metrics, chi-square.

The evaluation protocol: draw n_splits stratified train/test partitions,
select the penalty on each training set by leave-one-out accuracy over a
log-spaced grid, fit at the winner, score the held-out set, then average
metrics and coefficients across splits.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import glm
from .errors import ConsistencyError, InputError
from .featurizer import SparseFeatureMatrix


@dataclass(frozen=True)
class SplitPlan:
    """How to draw repeated stratified train/test partitions."""

    n_splits: int = 50
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_splits < 1:
            raise InputError(f"n_splits must be >= 1, got {self.n_splits}")
        if not 0.0 < self.test_fraction < 1.0:
            raise InputError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


def _test_allocation(n_test: int, n0: int, n1: int) -> tuple[int, int]:
    """Per-class test-set sizes by largest-remainder apportionment.

    Each class present gets at least one test sample when n_test allows,
    and at least one sample of each class stays in training.
    """
    n = n0 + n1
    q0 = n_test * n0 / n
    q1 = n_test * n1 / n
    t0, t1 = math.floor(q0), math.floor(q1)
    if t0 + t1 < n_test:
        # One seat left over; give it to the larger fractional remainder,
        # biggest class breaking ties.
        r0, r1 = q0 - t0, q1 - t1
        if r0 > r1 or (r0 == r1 and n0 >= n1):
            t0 += 1
        else:
            t1 += 1
    if n_test >= 2:
        if t0 == 0 and n0 >= 1:
            t0, t1 = 1, n_test - 1
        if t1 == 0 and n1 >= 1:
            t1, t0 = 1, n_test - 1
    # Keep at least one of each class in training.
    if t0 > n0 - 1:
        t1 += t0 - (n0 - 1)
        t0 = n0 - 1
    if t1 > n1 - 1:
        t0 += t1 - (n1 - 1)
        t1 = n1 - 1
    if t0 < 1 or t1 < 1 or t0 > n0 - 1 or t1 > n1 - 1:
        raise InputError(
            f"cannot stratify a test set of {n_test} from class sizes ({n0}, {n1}) "
            "while keeping both classes on both sides"
        )
    return t0, t1


def make_splits(labels, plan: SplitPlan) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified (train_indices, test_indices) pairs, seeded.

    The test size is round(test_fraction * n). Both classes must appear
    on both sides of every split; class counts below 2 are an error.
    Index arrays are sorted ascending (the randomness is in membership).
    """
    y = glm._validate_labels(labels)
    n = y.size
    n_test = int(round(plan.test_fraction * n))
    if n_test < 1 or n_test > n - 1:
        raise InputError(
            f"test_fraction {plan.test_fraction} gives an unusable test size {n_test} for n={n}"
        )
    idx0 = np.flatnonzero(y == 0.0)
    idx1 = np.flatnonzero(y == 1.0)
    if len(idx0) < 2 or len(idx1) < 2:
        raise InputError(
            f"each class needs at least 2 samples to stratify, got ({len(idx0)}, {len(idx1)})"
        )
    t0, t1 = _test_allocation(n_test, len(idx0), len(idx1))
    rng = np.random.default_rng(plan.seed)
    splits: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(plan.n_splits):
        pick0 = rng.permutation(idx0)[:t0]
        pick1 = rng.permutation(idx1)[:t1]
        test = np.sort(np.concatenate([pick0, pick1]))
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        train = np.flatnonzero(mask)
        splits.append((train, test))
    return splits


def lambda_grid(lam_max: float, n_points: int = 30, min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced strictly decreasing penalties from lam_max down to
    lam_max * min_ratio."""
    if n_points < 1:
        raise InputError(f"n_points must be >= 1, got {n_points}")
    if not 0.0 < min_ratio < 1.0:
        raise InputError(f"min_ratio must be in (0, 1), got {min_ratio}")
    if not math.isfinite(lam_max) or lam_max < 0.0:
        raise InputError(f"lam_max must be finite and >= 0, got {lam_max}")
    if lam_max == 0.0:
        return np.zeros(1)
    if n_points == 1:
        return np.array([lam_max])
    return lam_max * np.logspace(0.0, math.log10(min_ratio), n_points)


def _fold_weight_matrix(y: np.ndarray, mode: str) -> np.ndarray:
    """Per-fold sample weights for leave-one-out, one row per fold.

    Row f holds the class weights of the training set that excludes
    sample f (the diagonal is zero, which removes that sample from every
    weighted sum). Class counts shift by one depending on the held-out
    label, so the rows are not all equal.
    """
    n = y.size
    is0 = y == 0.0
    n1 = int(y.sum())
    n0 = n - n1
    if mode == "uniform":
        C = np.ones((n, n))
    elif mode == "balanced":
        if n0 < 2 or n1 < 2:
            raise InputError(
                f"leave-one-out with balanced weights needs >= 2 samples per class, got ({n0}, {n1})"
            )
        w0 = (n - 1) / (2.0 * (n0 - is0.astype(np.float64)))
        w1 = (n - 1) / (2.0 * (n1 - (~is0).astype(np.float64)))
        C = np.where(is0[None, :], w0[:, None], w1[:, None])
    elif mode == "literal_eq4":
        c0 = (n0 - is0.astype(np.float64)) / (n - 1)
        c1 = (n1 - (~is0).astype(np.float64)) / (n - 1)
        C = np.where(is0[None, :], c0[:, None], c1[:, None])
    else:
        raise InputError(f"unknown weight mode {mode!r}")
    np.fill_diagonal(C, 0.0)
    return C


def _sigmoid_block(M: np.ndarray) -> np.ndarray:
    e = np.exp(np.negative(M))
    e += 1.0
    return np.reciprocal(e, out=e)


def _loocv_margins_serial(mat, y: np.ndarray, config: glm.FitConfig, grid: np.ndarray) -> np.ndarray:
    """Held-out decision margins, one fold at a time (reference route).

    Fold fits warm-start from the full-data fit at the same penalty,
    which changes nothing at convergence (the objective is convex and
    every fit is KKT-certified) but saves almost all the sweeps.
    """
    n = y.size
    ctx_full = glm._context_for(mat, y, config)
    full_fits: list[glm.ModelFit] = []
    prev = None
    for lam in grid:
        m = glm.fit(mat, y, replace(config, lam=float(lam)), init=prev, context=ctx_full)
        full_fits.append(m)
        prev = m
    margins = np.empty((n, grid.size))
    all_idx = np.arange(n)
    for i in range(n):
        keep = np.delete(all_idx, i)
        Xi = mat[keep]
        yi = y[keep]
        ctx_i = glm._context_for(Xi, yi, config)
        xi_row = mat[i]
        for gi, lam in enumerate(grid):
            m = glm.fit(Xi, yi, replace(config, lam=float(lam)), init=full_fits[gi], context=ctx_i)
            margins[i, gi] = float((xi_row @ m.coefficients)[0]) + m.intercept
    return margins


def _loocv_margins_batched(mat, y: np.ndarray, config: glm.FitConfig, grid: np.ndarray) -> np.ndarray:
    """Held-out decision margins with all folds advanced together.

    Each fold is an independent L1 problem differing only in one removed
    sample, so every fold's coordinate-descent update (the same quadratic
    majorization step fit() takes) vectorizes across folds: the fold
    dimension rides along as rows of the margin/coefficient matrices,
    with a zero on the weight diagonal removing each fold's held-out
    sample from all weighted sums. Fold solutions are identical to the
    one-at-a-time route because each fold stops at the same KKT
    certificate; only the schedule differs.
    """
    n, p = mat.shape
    tol = config.tol
    inner_tol = 0.1 * tol
    penalize_intercept = config.penalize_intercept
    C = _fold_weight_matrix(y, config.weight_mode)
    csc = mat.tocsc()
    csc.sort_indices()
    indptr, indices, data = csc.indptr, csc.indices, csc.data
    rows = [indices[indptr[j] : indptr[j + 1]] for j in range(p)]
    vals = [data[indptr[j] : indptr[j + 1]] for j in range(p)]
    CX = [C[:, rows[j]] * vals[j][None, :] for j in range(p)]
    gyF = [CX[j] @ y[rows[j]] for j in range(p)]
    HF = np.zeros((n, p))
    for j in range(p):
        if vals[j].size:
            HF[:, j] = 0.25 * (CX[j] @ vals[j])
    invHF = np.where(HF > 0.0, np.divide(1.0, HF, where=HF > 0.0, out=np.ones_like(HF)), 0.0)
    col_has_data = HF.max(axis=0) > 0.0 if p else np.zeros(0, dtype=bool)
    S = 1.0 - 2.0 * y
    csum = C.sum(axis=1)
    cy = C @ y
    Y = y[None, :]
    H0F = 0.25 * csum

    # Anchor all folds at the full-data solution for each penalty: a
    # fold's optimum differs from it by one sample's influence, which is
    # far closer than the fold's own solution at the previous penalty.
    anchor_fits = []
    prev = None
    ctx_full = glm._context_for(mat, y, config)
    for lam_ in grid:
        m = glm.fit(mat, y, replace(config, lam=float(lam_)), init=prev, context=ctx_full)
        anchor_fits.append(m)
        prev = m

    Bfull = np.zeros((n, p))
    B0full = np.zeros(n)
    Mfull = np.zeros((n, n))
    out = np.empty((n, grid.size))
    dense = mat.toarray()

    with np.errstate(over="ignore"):
        for gi, lam_ in enumerate(grid):
            lam = float(lam_)
            anchor = anchor_fits[gi]
            Bfull[:] = anchor.coefficients[None, :]
            B0full[:] = anchor.intercept
            anchor_margins = dense @ anchor.coefficients + anchor.intercept
            Mfull[:] = anchor_margins[None, :]
            # A fold whose column has no data locally must hold that
            # coefficient at its exact optimum, zero.
            if p:
                Bfull[HF == 0.0] = 0.0
                off = anchor.coefficients[None, :] - Bfull
                nzoff = np.flatnonzero(np.any(off != 0.0, axis=1))
                for f in nzoff.tolist():
                    Mfull[f] -= mat @ off[f]
            # Working set: folds still being solved at this penalty.
            # Converged folds are scattered back and dropped, so late
            # sweeps only pay for the stragglers.
            ids = np.arange(n)
            B, B0, M = Bfull.copy(), B0full.copy(), Mfull.copy()
            Cw, cyw, csumw = C, cy, csum
            CXw, gyFw, invHw = CX, gyF, invHF
            thrw = lam * invHF
            H0w = H0F

            def loss_rows(Mx: np.ndarray, Cx: np.ndarray) -> np.ndarray:
                t = S[None, :] * Mx
                sp = np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))
                return np.einsum("fi,fi->f", Cx, sp)

            def newton_intercepts() -> np.ndarray:
                nonlocal B0, M
                entry = None
                for k in range(50):
                    P = _sigmoid_block(M)
                    g0 = np.einsum("fi,fi->f", Cw, P) - cyw
                    a = np.abs(g0)
                    if k == 0:
                        entry = a.copy()
                    move = a > inner_tol
                    if not move.any():
                        break
                    h0 = np.einsum("fi,fi->f", Cw, P * (1.0 - P))
                    h0 = np.maximum(h0, 1e-300)
                    step = np.where(move, -g0 / h0, 0.0)
                    base = loss_rows(M, Cw)
                    for _ in range(60):
                        cand = loss_rows(M + step[:, None], Cw)
                        bad = move & (cand > base + glm._MONOTONE_SLACK * (1.0 + np.abs(base)))
                        if not bad.any():
                            break
                        step[bad] *= 0.5
                    M += step[:, None]
                    B0 = B0 + step
                return entry

            prev_obj = loss_rows(M, Cw) + lam * np.abs(B).sum(axis=1)
            n_sweeps = 0
            while True:
                # Full certification pass over the working folds.
                P = _sigmoid_block(M)
                W = Cw * (P - Y)
                G = np.asarray(W @ mat) if p else np.zeros((ids.size, 0))
                g0 = W.sum(axis=1)
                nz = B != 0.0
                resid = np.abs(G) - lam
                np.maximum(resid, 0.0, out=resid)
                resid[nz] = np.abs(G[nz] + lam * np.sign(B[nz]))
                kkt = resid.max(axis=1) if p else np.zeros(ids.size)
                if penalize_intercept:
                    r0 = np.where(
                        B0 != 0.0,
                        np.abs(g0 + lam * np.sign(B0)),
                        np.maximum(np.abs(g0) - lam, 0.0),
                    )
                else:
                    r0 = np.abs(g0)
                kkt = np.maximum(kkt, r0)
                done = kkt <= tol
                exhausted = n_sweeps >= config.max_iters
                if done.any() or exhausted:
                    if exhausted:
                        done = np.ones(ids.size, dtype=bool)  # scatter honest non-converged state
                    put = ids[done]
                    Bfull[put] = B[done]
                    B0full[put] = B0[done]
                    Mfull[put] = M[done]
                    if done.all():
                        break
                    keep = ~done
                    ids = ids[keep]
                    B, B0, M = B[keep], B0[keep], M[keep]
                    Cw = Cw[keep]
                    cyw, csumw = cyw[keep], csumw[keep]
                    H0w = H0w[keep]
                    CXw = [a[keep] for a in CXw]
                    gyFw = [a[keep] for a in gyFw]
                    invHw = invHw[keep]
                    thrw = thrw[keep]
                    resid, nz, prev_obj = resid[keep], nz[keep], prev_obj[keep]
                act_cols = ((resid > tol).any(axis=0) | nz.any(axis=0)) & col_has_data
                act = np.flatnonzero(act_cols).tolist()

                while n_sweeps < config.max_iters:
                    # One sweep: intercepts, then each active column.
                    if penalize_intercept:
                        P = _sigmoid_block(M)
                        g0 = np.einsum("fi,fi->f", Cw, P) - cyw
                        rmax = np.where(
                            B0 != 0.0,
                            np.abs(g0 + lam * np.sign(B0)),
                            np.maximum(np.abs(g0) - lam, 0.0),
                        )
                        z0 = B0 - g0 / H0w
                        thr0 = lam / H0w
                        nb0 = np.sign(z0) * np.maximum(np.abs(z0) - thr0, 0.0)
                        shift = nb0 - B0
                        if np.any(shift != 0.0):
                            M += shift[:, None]
                            B0 = nb0
                    else:
                        rmax = newton_intercepts()
                    for j in act:
                        rj = rows[j]
                        Mj = M[:, rj]
                        Pj = _sigmoid_block(Mj)
                        g = np.einsum("fk,fk->f", CXw[j], Pj) - gyFw[j]
                        bj = B[:, j]
                        r = np.where(
                            bj != 0.0,
                            np.abs(g + lam * np.sign(bj)),
                            np.maximum(np.abs(g) - lam, 0.0),
                        )
                        np.maximum(rmax, r, out=rmax)
                        z = bj - g * invHw[:, j]
                        nb = np.sign(z) * np.maximum(np.abs(z) - thrw[:, j], 0.0)
                        d = nb - bj
                        if np.any(d != 0.0):
                            M[:, rj] = Mj + d[:, None] * vals[j][None, :]
                            B[:, j] = nb
                    n_sweeps += 1
                    obj = loss_rows(M, Cw) + lam * np.abs(B).sum(axis=1)
                    if not np.all(np.isfinite(obj)):
                        raise ConsistencyError("objective became non-finite during optimization")
                    if np.any(obj > prev_obj + glm._MONOTONE_SLACK * (1.0 + np.abs(prev_obj))):
                        raise ConsistencyError("objective increased during a sweep")
                    prev_obj = obj
                    if (rmax <= tol).all():
                        break
            out[:, gi] = np.einsum("fj,fj->f", dense, Bfull) + B0full
    return out


def select_lambda_loocv(
    X: SparseFeatureMatrix,
    labels,
    config: glm.FitConfig,
    grid: np.ndarray,
    *,
    weighted: bool = False,
    engine: str = "batched",
) -> tuple[float, np.ndarray]:
    """Penalty with the best leave-one-out accuracy; ties go to the
    largest penalty (the earliest grid entry).

    Returns (selected_lam, accuracy_per_grid_point). Both engines fit
    every (fold, penalty) problem to the same KKT certificate; "batched"
    advances all folds together (much faster), "serial" is the
    one-fold-at-a-time reference. Standardized fits always take the
    serial route because per-fold column scales do not batch.
    """
    y = glm._validate_labels(labels)
    n = y.size
    if n < 2:
        raise InputError(f"leave-one-out needs at least 2 samples, got {n}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise InputError("penalty grid is empty")
    if grid.size > 1 and np.any(np.diff(grid) >= 0):
        raise InputError("penalty grid must be strictly decreasing")
    if engine not in ("batched", "serial"):
        raise InputError(f"unknown LOOCV engine {engine!r}")
    mat = X.matrix if isinstance(X, SparseFeatureMatrix) else glm._as_csr(X)
    if engine == "batched" and not config.standardize:
        margins = _loocv_margins_batched(mat, y, config, grid)
    else:
        margins = _loocv_margins_serial(mat, y, config, grid)
    if weighted:
        sample_w = glm.class_weights(y, config.weight_mode)
    else:
        sample_w = np.ones(n)
    # sigmoid(m) >= 0.5 exactly when m >= 0.
    correct = (margins >= 0.0) == (y[:, None] == 1.0)
    score = sample_w @ correct
    best = int(np.argmax(score))  # argmax takes the first (largest) penalty on ties
    return float(grid[best]), score / float(sample_w.sum())


class Metrics(NamedTuple):
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()


def metrics(y_true, y_pred) -> Metrics:
    """Precision, recall, F1 for the positive class.

    A 0/0 ratio is reported as 0.0 and the metric name is listed in
    `degenerate` rather than being silently dropped.
    """
    yt = glm._validate_labels(y_true)
    yp = glm._validate_labels(y_pred)
    if yt.size != yp.size:
        raise InputError("y_true and y_pred must have the same length")
    tp = float(np.sum((yt == 1.0) & (yp == 1.0)))
    fp = float(np.sum((yt == 0.0) & (yp == 1.0)))
    fn = float(np.sum((yt == 1.0) & (yp == 0.0)))
    flags: list[str] = []
    if tp + fp > 0.0:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        flags.append("precision")
    if tp + fn > 0.0:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        flags.append("recall")
    if precision + recall > 0.0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        flags.append("f1")
    return Metrics(precision=precision, recall=recall, f1=f1, degenerate=tuple(flags))


def _regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).

    Series expansion for x < a + 1, Lentz continued fraction otherwise.
    Both iterate to float precision, far inside the 1e-10 requirement.
    """
    if a <= 0.0 or x < 0.0 or not (math.isfinite(a) and math.isfinite(x)):
        raise InputError(f"invalid incomplete gamma arguments a={a}, x={x}")
    if x == 0.0:
        return 1.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        # P(a,x) series: sum_k x^k Gamma(a) / Gamma(a+1+k)
        term = 1.0 / a
        total = term
        ak = a
        for _ in range(10_000):
            ak += 1.0
            term *= x / ak
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        else:
            raise ConsistencyError("incomplete gamma series did not converge")
        return 1.0 - total * math.exp(log_prefactor)
    # Modified Lentz continued fraction for Q(a,x).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    else:
        raise ConsistencyError("incomplete gamma continued fraction did not converge")
    return math.exp(log_prefactor) * h


def chi2_sf(statistic: float, dof: int = 1) -> float:
    """Survival function of the chi-square distribution."""
    if dof < 1:
        raise InputError(f"dof must be >= 1, got {dof}")
    if statistic < 0.0:
        raise InputError(f"chi-square statistic must be >= 0, got {statistic}")
    return _regularized_gamma_q(dof / 2.0, statistic / 2.0)


class Chi2Result(NamedTuple):
    statistic: float
    p_value: float
    degenerate: bool


def chi_square_term(presence, labels) -> Chi2Result:
    """Pearson chi-square (1 dof, no continuity correction) for the 2x2
    table of term presence against the label.

    A zero row or column margin makes the test undefined; that returns
    statistic 0, p-value 1, degenerate=True.
    """
    pres = np.asarray(presence)
    y = glm._validate_labels(labels)
    if pres.shape != y.shape:
        raise InputError("presence and labels must have the same length")
    pres = (pres != 0).astype(np.float64)
    n = y.size
    obs = np.array(
        [
            [float(np.sum((pres == 0) & (y == 0))), float(np.sum((pres == 0) & (y == 1)))],
            [float(np.sum((pres == 1) & (y == 0))), float(np.sum((pres == 1) & (y == 1)))],
        ]
    )
    row = obs.sum(axis=1)
    col = obs.sum(axis=0)
    if np.any(row == 0.0) or np.any(col == 0.0):
        return Chi2Result(statistic=0.0, p_value=1.0, degenerate=True)
    expected = np.outer(row, col) / n
    stat = float(np.sum((obs - expected) ** 2 / expected))
    return Chi2Result(statistic=stat, p_value=chi2_sf(stat, dof=1), degenerate=False)


@dataclass
class EvaluationReport:
    """Aggregated results of the repeated-split protocol."""

    n_splits: int
    mean_precision: float
    mean_recall: float
    mean_f1: float
    selected_lambda: float
    averaged_coefficients: dict[str, float]
    averaged_intercept: float
    term_pvalues: dict[str, float]
    per_split: list[dict] = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_splits": self.n_splits,
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_f1": self.mean_f1,
            "selected_lambda": self.selected_lambda,
            "averaged_intercept": self.averaged_intercept,
            "averaged_coefficients": dict(self.averaged_coefficients),
            "term_pvalues": dict(self.term_pvalues),
            "per_split": list(self.per_split),
        }


def _modal_lambda(lams: list[float]) -> float:
    counts = Counter(lams)
    top = max(counts.values())
    return max(l for l, k in counts.items() if k == top)


def evaluate_repeated(
    X: SparseFeatureMatrix,
    labels,
    config: glm.FitConfig,
    plan: SplitPlan,
    *,
    terms: list[str] | None = None,
    grid: np.ndarray | None = None,
    grid_size: int = 30,
    grid_min_ratio: float = 1e-3,
    loocv_weighted: bool = False,
    threads: int = 1,
) -> EvaluationReport:
    """Run the full repeated-split protocol.

    Per split: LOOCV selects the penalty on the training set (over `grid`
    if given, else a grid_size-point log grid from that training set's
    lambda_max down to lambda_max * grid_min_ratio), the model refits at
    the winner, and the held-out set is scored. Coefficients are averaged
    across splits with zeros included. The report's selected_lambda is the
    modal per-split winner, ties to the larger value.

    With threads > 1 the splits run on a thread pool; results are ordered
    by split index, so thread count cannot change any output.
    """
    y = glm._validate_labels(labels)
    if X.n_rows != y.size:
        raise InputError("matrix rows and labels disagree")
    if threads < 1:
        raise InputError(f"threads must be >= 1, got {threads}")
    splits = make_splits(y, plan)
    names = terms if terms is not None else [f"col{j}" for j in range(X.n_cols)]
    if len(names) != X.n_cols:
        raise InputError("terms length does not match matrix columns")

    def run_one(k: int) -> dict:
        train, test = splits[k]
        Xtr = X.take_rows(train)
        ytr = y[train]
        g = grid
        if g is None:
            lmax = glm.lambda_max(Xtr, ytr, config.weight_mode)
            g = lambda_grid(lmax, grid_size, grid_min_ratio)
        lam_k, _ = select_lambda_loocv(Xtr, ytr, config, g, weighted=loocv_weighted)
        model = glm.fit(Xtr, ytr, replace(config, lam=lam_k))
        yhat = glm.predict(model, X.take_rows(test))
        met = metrics(y[test], yhat)
        return {
            "split": k,
            "lambda": lam_k,
            "precision": met.precision,
            "recall": met.recall,
            "f1": met.f1,
            "degenerate": list(met.degenerate),
            "_intercept": model.intercept,
            "_coefficients": model.coefficients,
        }

    if threads == 1:
        results = [run_one(k) for k in range(len(splits))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, range(len(splits))))

    coef_sum = np.zeros(X.n_cols)
    intercept_sum = 0.0
    for r in results:
        coef_sum += r.pop("_coefficients")
        intercept_sum += r.pop("_intercept")
    n_s = len(results)
    avg_coef = coef_sum / n_s
    presence = X.to_dense() > 0
    pvals = {}
    for j, name in enumerate(names):
        pvals[name] = chi_square_term(presence[:, j], y).p_value
    return EvaluationReport(
        n_splits=n_s,
        mean_precision=float(np.mean([r["precision"] for r in results])),
        mean_recall=float(np.mean([r["recall"] for r in results])),
        mean_f1=float(np.mean([r["f1"] for r in results])),
        selected_lambda=_modal_lambda([r["lambda"] for r in results]),
        averaged_coefficients={names[j]: float(avg_coef[j]) for j in range(X.n_cols)},
        averaged_intercept=intercept_sum / n_s,
        term_pvalues=pvals,
        per_split=results,
    )


def predictive_terms_rows(report: EvaluationReport) -> list[list]:
    """Rows (term, avg_coefficient, p_value) for nonzero averaged
    coefficients, sorted by |avg_coefficient| descending, term ascending."""
    items = [
        (t, v, report.term_pvalues.get(t, 1.0))
        for t, v in report.averaged_coefficients.items()
        if v != 0.0
    ]
    items.sort(key=lambda r: (-abs(r[1]), r[0]))
    return [[t, v, p] for t, v, p in items]
