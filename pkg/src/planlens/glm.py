"""Weighted L1-regularized logistic regression via cyclic coordinate descent.

Objective, with labels y in {0,1} mapped to yt = 2y - 1:

    F(beta0, beta) = lam * sum_j |beta_j|
                   + sum_i c_i * log(1 + exp(-yt_i * (x_i . beta + beta0)))

The intercept is unpenalized by default. Coordinate steps use the global
curvature bound H_j = 0.25 * sum_i c_i x_ij^2 (the logistic second
derivative never exceeds 1/4), which makes every step a majorization step,
so the objective never increases. Convergence is certified by the KKT
residual over all coordinates plus the intercept gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import ConsistencyError, InputError
from .featurizer import SparseFeatureMatrix

WEIGHT_MODES = ("balanced", "literal_eq4", "uniform")

# Relative slack when checking that a step did not increase the objective.
_MONOTONE_SLACK = 1e-9


def _softplus(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def sigmoid(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    pos = m >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-m[pos]))
    em = np.exp(m[~pos])
    out[~pos] = em / (1.0 + em)
    return out


@dataclass(frozen=True)
class FitConfig:
    """Solver settings. lam is the L1 penalty weight."""

    lam: float
    weight_mode: str = "balanced"
    tol: float = 1e-7
    max_iters: int = 10_000
    penalize_intercept: bool = False
    standardize: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise InputError(f"lam must be a finite value >= 0, got {self.lam}")
        if self.weight_mode not in WEIGHT_MODES:
            raise InputError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        if not (math.isfinite(self.tol) and self.tol > 0.0):
            raise InputError(f"tol must be a finite value > 0, got {self.tol}")
        if self.max_iters < 1:
            raise InputError(f"max_iters must be >= 1, got {self.max_iters}")


def _validate_labels(labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise InputError("labels must be a nonempty 1-D array")
    if not np.all(np.isfinite(y)) or not np.all((y == 0.0) | (y == 1.0)):
        raise InputError("labels must contain only 0 and 1")
    return y


def class_weights(labels, mode: str = "balanced") -> np.ndarray:
    """Per-sample weights c_i.

    balanced: c_i = n / (2 * n_{y_i}), so each class contributes equal
    total weight n/2. literal_eq4: c_i = n_{y_i} / n (the raw class share,
    which up-weights the majority). uniform: c_i = 1.
    """
    if mode not in WEIGHT_MODES:
        raise InputError(f"weight mode must be one of {WEIGHT_MODES}, got {mode!r}")
    y = _validate_labels(labels)
    n = y.size
    if mode == "uniform":
        return np.ones(n, dtype=np.float64)
    n1 = float(y.sum())
    n0 = float(n - n1)
    if n0 == 0.0 or n1 == 0.0:
        raise InputError(f"weight mode {mode!r} requires both classes present")
    if mode == "balanced":
        w1, w0 = n / (2.0 * n1), n / (2.0 * n0)
    else:
        w1, w0 = n1 / n, n0 / n
    return np.where(y == 1.0, w1, w0)


def _as_csr(X) -> sp.csr_matrix:
    if isinstance(X, SparseFeatureMatrix):
        return X.matrix
    if sp.issparse(X):
        return sp.csr_matrix(X)
    arr = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError("feature matrix contains non-finite values")
    return sp.csr_matrix(arr)


def _smooth_loss(margins: np.ndarray, y: np.ndarray, c: np.ndarray) -> float:
    # loss_i = c_i * softplus(-yt_i * m_i); -yt*m is m where y=0 and -m where y=1
    t = np.where(y == 1.0, -margins, margins)
    return float(c @ _softplus(t))


def objective(beta0: float, beta: np.ndarray, X, y, c: np.ndarray, lam: float) -> float:
    """Full penalized objective at the given parameters."""
    mat = _as_csr(X)
    y = _validate_labels(y)
    margins = mat @ np.asarray(beta, dtype=np.float64) + beta0
    return _smooth_loss(margins, y, c) + lam * float(np.abs(beta).sum())


def lambda_max(X, labels, weight_mode: str = "balanced") -> float:
    """Smallest penalty at which every coefficient is zero at the optimum.

    At beta = 0 with the intercept at its optimum beta0 = logit(pbar),
    pbar = sum(c*y)/sum(c), the smooth gradient is g_j =
    sum_i c_i x_ij (pbar - y_i); the feature stays zero iff |g_j| <= lam.
    """
    mat = _as_csr(X)
    y = _validate_labels(labels)
    c = class_weights(y, weight_mode)
    pbar = float(c @ y) / float(c.sum())
    g = mat.T @ (c * (pbar - y))
    return float(np.max(np.abs(g))) if g.size else 0.0


@dataclass
class ModelFit:
    """Solution of one fit, with convergence diagnostics."""

    intercept: float
    coefficients: np.ndarray
    lam: float
    weight_mode: str
    converged: bool
    n_iters: int
    kkt_residual: float
    objective_value: float
    objective_path: list[float] = field(default_factory=list, repr=False)

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.coefficients))

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


def model_to_dict(model: ModelFit, terms: list[str] | None = None) -> dict:
    """JSON-ready summary. Only nonzero coefficients are listed."""
    coefs = []
    for j in model.support():
        name = terms[j] if terms is not None else f"col{j}"
        coefs.append({"term": name, "value": float(model.coefficients[j])})
    return {
        "intercept": float(model.intercept),
        "lambda": float(model.lam),
        "weight_mode": model.weight_mode,
        "converged": bool(model.converged),
        "n_iters": int(model.n_iters),
        "kkt_residual": float(model.kkt_residual),
        "objective_value": float(model.objective_value),
        "n_nonzero": model.n_nonzero,
        "coefficients": coefs,
    }


def _newton_intercept(
    beta0: float,
    margins: np.ndarray,
    y: np.ndarray,
    c: np.ndarray,
    inner_tol: float,
    max_steps: int = 50,
) -> tuple[float, float]:
    """Drive the intercept gradient below inner_tol in place.

    Guarded Newton: a step that would increase the smooth loss is halved
    until it does not. Returns (updated intercept, |gradient| on entry);
    margins are updated in place.
    """
    entry_res = math.inf
    for k in range(max_steps):
        e = np.exp(np.negative(margins))
        e += 1.0
        p = np.reciprocal(e, out=e)
        g0 = float(c @ p) - float(c @ y)
        if k == 0:
            entry_res = abs(g0)
        if abs(g0) <= inner_tol:
            break
        h0 = float(c @ (p * (1.0 - p)))
        if h0 <= 1e-300:
            # Flat curvature: the loss is essentially piecewise-linear here
            # (saturated probabilities); no productive Newton step exists.
            break
        step = -g0 / h0
        base = _smooth_loss(margins, y, c)
        for _ in range(60):
            cand = _smooth_loss(margins + step, y, c)
            if cand <= base + _MONOTONE_SLACK * (1.0 + abs(base)):
                break
            step *= 0.5
        margins += step
        beta0 += step
    return beta0, entry_res


def _kkt_residual(
    grad: np.ndarray,
    g0: float,
    beta0: float,
    beta: np.ndarray,
    lam: float,
    penalize_intercept: bool,
) -> float:
    """Max violation of the first-order conditions.

    Active coordinates must satisfy grad_j = -lam*sign(beta_j); zero
    coordinates must satisfy |grad_j| <= lam. The intercept gradient is
    included (as a penalized coordinate when configured).
    """
    nz = beta != 0.0
    res = 0.0
    if np.any(nz):
        res = float(np.max(np.abs(grad[nz] + lam * np.sign(beta[nz]))))
    z = ~nz
    if np.any(z):
        res = max(res, float(np.max(np.maximum(0.0, np.abs(grad[z]) - lam))))
    if not penalize_intercept:
        res = max(res, abs(g0))
    elif beta0 != 0.0:
        res = max(res, abs(g0 + lam * math.copysign(1.0, beta0)))
    else:
        res = max(res, max(0.0, abs(g0) - lam))
    return res


class _FitContext:
    """Presliced design-matrix pieces reused across fits on the same data.

    Building one of these per (matrix, labels, weight_mode) and passing it
    to fit() makes warm-started penalty paths and leave-one-out loops
    cheap: slicing, weight computation, and curvature bounds happen once.
    """

    __slots__ = (
        "csc",
        "csT",
        "n",
        "p",
        "y",
        "c",
        "sfull",
        "rows",
        "vals",
        "cx",
        "gy",
        "H",
        "pbar",
        "weight_mode",
        "col_scale",
    )

    def __init__(self, mat, y: np.ndarray, weight_mode: str):
        n, p = mat.shape
        if y.size != n:
            raise InputError(f"labels length {y.size} does not match matrix rows {n}")
        if mat.data.size and not np.all(np.isfinite(mat.data)):
            raise InputError("feature matrix contains non-finite values")
        c = class_weights(y, weight_mode)
        csc = mat.tocsc()
        csc.sort_indices()
        self.csc = csc
        self.csT = csc.T  # transpose view built once; used by gradient passes
        self.n, self.p = n, p
        self.y = y
        self.c = c
        self.weight_mode = weight_mode
        # Margin sign per row: +1 for label 0, -1 for label 1.
        self.sfull = 1.0 - 2.0 * y
        indptr, indices, data = csc.indptr, csc.indices, csc.data
        self.rows = [indices[indptr[j] : indptr[j + 1]] for j in range(p)]
        self.vals = [data[indptr[j] : indptr[j + 1]] for j in range(p)]
        if data.size:
            cw = data * c[indices]  # c_i x_ij per stored entry
            owner = np.repeat(np.arange(p), np.diff(indptr))
            # Global curvature bound per column: H_j = 0.25 * sum_i c_i x_ij^2
            # (the logistic second derivative never exceeds 1/4).
            self.H = 0.25 * np.bincount(owner, weights=cw * data, minlength=p)
            # Constant part of each coordinate gradient: sum_i c_i x_ij y_i.
            self.gy = np.bincount(owner, weights=cw * y[indices], minlength=p)
        else:
            cw = np.zeros(0)
            self.H = np.zeros(p)
            self.gy = np.zeros(p)
        self.cx = [cw[indptr[j] : indptr[j + 1]] for j in range(p)]
        self.pbar = float(c @ y) / float(c.sum())
        self.col_scale: np.ndarray | None = None


def _context_for(X, labels, config: FitConfig) -> _FitContext:
    mat = _as_csr(X)
    y = _validate_labels(labels)
    if config.standardize and mat.shape[1]:
        # Scale-only standardization (no centering, which would densify).
        n = mat.shape[0]
        csc = mat.tocsc().copy()
        sum1 = np.asarray(csc.sum(axis=0)).ravel()
        sq = csc.copy()
        sq.data = sq.data**2
        sum2 = np.asarray(sq.sum(axis=0)).ravel()
        var = sum2 / n - (sum1 / n) ** 2
        scale = np.where(var > 0.0, np.sqrt(np.maximum(var, 0.0)), 1.0)
        csc.data = csc.data / np.repeat(scale, np.diff(csc.indptr))
        ctx = _FitContext(csc.tocsr(), y, config.weight_mode)
        ctx.col_scale = scale
    else:
        ctx = _FitContext(mat, y, config.weight_mode)
    return ctx


def fit(
    X,
    labels,
    config: FitConfig,
    *,
    init: ModelFit | None = None,
    context: _FitContext | None = None,
) -> ModelFit:
    """Minimize the penalized objective by cyclic coordinate descent.

    Each sweep re-optimizes the unpenalized intercept by guarded Newton,
    then visits the active coordinates in fixed column order. A
    coordinate step minimizes the quadratic majorizer built from the
    curvature bound H_j = 0.25 * sum_i c_i x_ij^2 under the L1 penalty
    (one soft-threshold step), which can never increase the objective.
    The active set is swept repeatedly until every visited coordinate and
    the intercept satisfy the optimality conditions to within tol; then a
    full gradient computation certifies the KKT conditions over all
    coordinates. Convergence is declared only from that certificate, and
    any coordinate it catches violating joins the next round of sweeps.
    Soft-thresholding produces exact zeros.
    """
    if context is None:
        context = _context_for(X, labels, config)
    ctx = context
    if ctx.weight_mode != config.weight_mode:
        raise InputError("fit context was built for a different weight mode")
    y, c, n, p = ctx.y, ctx.c, ctx.n, ctx.p
    rows, vals, cx = ctx.rows, ctx.vals, ctx.cx
    H = ctx.H
    gy = ctx.gy.tolist()
    col_scale = ctx.col_scale
    lam = float(config.lam)
    tol = config.tol
    penalize_intercept = config.penalize_intercept

    beta_arr = np.zeros(p, dtype=np.float64)
    if init is not None:
        if init.coefficients.shape != (p,):
            raise InputError("warm start has the wrong number of coefficients")
        beta_arr = init.coefficients.astype(np.float64)
        if col_scale is not None:
            beta_arr = beta_arr * col_scale
        # A column with no data here (possible when warm-starting across
        # row subsets) has 0 as its exact optimum; no step can move it.
        if p:
            beta_arr[H == 0.0] = 0.0
        beta0 = float(init.intercept)
    elif penalize_intercept or not 0.0 < ctx.pbar < 1.0:
        beta0 = 0.0
    else:
        # Cold start at the beta = 0 optimum of the unpenalized intercept.
        beta0 = math.log(ctx.pbar / (1.0 - ctx.pbar))
    margins = (ctx.csc @ beta_arr + beta0) if np.any(beta_arr != 0.0) else np.full(n, beta0)
    beta = beta_arr.tolist()  # mutated by the sweeps; plain floats are faster

    inner_tol = 0.1 * tol
    H0 = 0.25 * float(c.sum())
    # Per-column inverse curvature and threshold, skipping empty columns.
    inv_h = [1.0 / hj if hj > 0.0 else 0.0 for hj in H.tolist()]
    thr = [lam * ih for ih in inv_h]
    objective_path: list[float] = []
    prev_obj = _smooth_loss(margins, y, c) + lam * sum(map(abs, beta))
    converged = False
    kkt = math.inf
    n_sweeps = 0

    def one_sweep(act: list[int]) -> float:
        """Visit the intercept then each active coordinate once; returns
        the largest optimality residual measured at the visits."""
        nonlocal beta0, margins
        if penalize_intercept:
            e = np.exp(np.negative(margins))
            e += 1.0
            p0 = np.reciprocal(e, out=e)
            g0 = float(c @ p0) - float(c @ y)
            if beta0 > 0.0:
                rmax = abs(g0 + lam)
            elif beta0 < 0.0:
                rmax = abs(g0 - lam)
            else:
                rmax = max(0.0, abs(g0) - lam)
            z0 = beta0 - g0 / H0
            thr0 = lam / H0
            new0 = 0.0 if abs(z0) <= thr0 else (z0 - thr0 if z0 > 0.0 else z0 + thr0)
            if new0 != beta0:
                margins += new0 - beta0
                beta0 = new0
        else:
            beta0, rmax = _newton_intercept(beta0, margins, y, c, inner_tol)
        for j in act:
            rj = rows[j]
            mj = margins[rj]
            e = np.exp(np.negative(mj))
            e += 1.0
            pj = np.reciprocal(e, out=e)
            g = float(cx[j] @ pj) - gy[j]
            bj = beta[j]
            if bj > 0.0:
                r = abs(g + lam)
            elif bj < 0.0:
                r = abs(g - lam)
            else:
                r = abs(g) - lam
                if r <= 0.0:
                    continue  # optimal at zero; nothing to do
            if r > rmax:
                rmax = r
            z = bj - g * inv_h[j]
            tj = thr[j]
            if z > tj:
                nb = z - tj
            elif z < -tj:
                nb = z + tj
            else:
                nb = 0.0
            if nb != bj:
                d = nb - bj
                buf = vals[j] * d
                buf += mj
                margins[rj] = buf
                beta[j] = nb
        return rmax

    with np.errstate(over="ignore"):
        while True:
            # Full certification pass over every coordinate.
            w = c * (sigmoid(margins) - y)
            grad_full = (ctx.csT @ w) if p else np.zeros(0)
            g0 = float(w.sum())
            beta_arr = np.fromiter(beta, dtype=np.float64, count=p)
            kkt = _kkt_residual(grad_full, g0, beta0, beta_arr, lam, penalize_intercept)
            if kkt <= tol:
                converged = True
                break
            if n_sweeps >= config.max_iters:
                break
            nz = beta_arr != 0.0
            viol = np.abs(grad_full) - lam > tol
            viol[nz] = np.abs(grad_full[nz] + lam * np.sign(beta_arr[nz])) > tol
            act = np.flatnonzero((viol | nz) & (H > 0.0)).tolist()

            # Sweep the active set until it is locally optimal, then
            # return to the full pass to certify (and catch newcomers).
            while n_sweeps < config.max_iters:
                rmax = one_sweep(act)
                n_sweeps += 1
                obj = _smooth_loss(margins, y, c) + lam * sum(map(abs, beta))
                if not math.isfinite(obj):
                    raise ConsistencyError("objective became non-finite during optimization")
                if obj > prev_obj + _MONOTONE_SLACK * (1.0 + abs(prev_obj)):
                    raise ConsistencyError(
                        f"objective increased during a sweep ({prev_obj!r} -> {obj!r})"
                    )
                objective_path.append(obj)
                prev_obj = obj
                if rmax <= tol:
                    break

    beta_arr = np.fromiter(beta, dtype=np.float64, count=p)
    beta_out = beta_arr / col_scale if col_scale is not None else beta_arr
    return ModelFit(
        intercept=float(beta0),
        coefficients=beta_out,
        lam=lam,
        weight_mode=config.weight_mode,
        converged=converged,
        n_iters=n_sweeps,
        kkt_residual=float(kkt),
        objective_value=float(prev_obj),
        objective_path=objective_path,
    )


def fit_path(
    X, labels, config: FitConfig, lams: np.ndarray, *, context: _FitContext | None = None
) -> list[ModelFit]:
    """Fit a decreasing penalty sequence with warm starts."""
    lams = np.asarray(lams, dtype=np.float64)
    if lams.size == 0:
        raise InputError("penalty sequence is empty")
    if np.any(np.diff(lams) >= 0):
        raise InputError("penalty sequence must be strictly decreasing")
    if context is None:
        context = _context_for(X, labels, config)
    fits: list[ModelFit] = []
    prev: ModelFit | None = None
    for lam in lams:
        m = fit(X, labels, replace(config, lam=float(lam)), init=prev, context=context)
        fits.append(m)
        prev = m
    return fits


def predict_proba(model: ModelFit, X) -> np.ndarray:
    """P(y=1) per row, clipped away from exact 0 and 1."""
    mat = _as_csr(X)
    if mat.shape[1] != model.coefficients.shape[0]:
        raise InputError(
            f"matrix has {mat.shape[1]} columns, model has {model.coefficients.shape[0]}"
        )
    p = sigmoid(mat @ model.coefficients + model.intercept)
    eps = np.finfo(np.float64).tiny
    return np.clip(p, eps, 1.0 - eps)


def predict(model: ModelFit, X) -> np.ndarray:
    """Hard labels: 1 where P(y=1) >= 0.5."""
    return (predict_proba(model, X) >= 0.5).astype(np.int64)
