"""Multi-output LOWESS surrogates: local linear regression with kernel
weights, leave-one-out cross-validation values, and selection of the kernel
shape and type by the aggregate order error (AOECV).

One model jointly predicts all m+1 outputs (objective first, then the
constraints). The local weight of training point x_i at query xi is
``phi(lambda * ||xi - x_i|| / d_np1(xi))`` where d_np1 estimates the
distance to the (n+1)-th closest training point through a Gamma fit of the
squared distances.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaincinv

from .core import INF

#: Normalization constant of the inverse multi-quadratic kernel (L2-closest
#: to the inverse quadratic kernel among that family).
INVERSE_MULTI_QUADRATIC_CONST = 52.015

#: Shape-parameter search grid: 13 logarithmically spaced values.
LAMBDA_GRID = tuple(float(v) for v in np.geomspace(0.1, 10.0, 13))

#: Cross-validation rows used for AOECV are capped at this many; beyond it
#: a fixed-seed subsample keeps refits reproducible regardless of context.
AOECV_ROW_CAP = 200
_AOECV_SUBSAMPLE_SEED = 0x0A0ECF

_RANK_TOL = 1e-12
_RIDGE_REL = 1e-10


class Kernel(enum.Enum):
    """The seven weight kernels, all normalized so that phi(0) = 1."""

    TRI_CUBIC = "tri-cubic"
    EPANECHNIKOV = "epanechnikov"
    BI_QUADRATIC = "bi-quadratic"
    GAUSSIAN = "gaussian"
    INVERSE_QUADRATIC = "inverse-quadratic"
    INVERSE_MULTI_QUADRATIC = "inverse-multi-quadratic"
    EXP_ROOT = "exp-root"


KERNEL_ORDER = tuple(Kernel)

#: Support radius of the compact-domain kernels (None = unbounded domain).
KERNEL_SUPPORT = {
    Kernel.TRI_CUBIC: 140.0 / 162.0,
    Kernel.EPANECHNIKOV: 3.0 / 4.0,
    Kernel.BI_QUADRATIC: 15.0 / 16.0,
    Kernel.GAUSSIAN: None,
    Kernel.INVERSE_QUADRATIC: None,
    Kernel.INVERSE_MULTI_QUADRATIC: None,
    Kernel.EXP_ROOT: None,
}


def kernel_eval(kernel: Kernel, d) -> np.ndarray | float:
    """Evaluate a kernel at (signed) distance d. Even in d; exactly zero on
    and outside the boundary of a compact support."""
    d = np.asarray(d, dtype=float)
    ad = np.abs(d)
    if kernel is Kernel.TRI_CUBIC:
        t = np.clip(1.0 - ((162.0 / 140.0) * ad) ** 3, 0.0, None) ** 3
        out = np.where(ad >= 140.0 / 162.0, 0.0, t)
    elif kernel is Kernel.EPANECHNIKOV:
        t = np.clip(1.0 - (16.0 / 9.0) * d * d, 0.0, None)
        out = np.where(ad >= 0.75, 0.0, t)
    elif kernel is Kernel.BI_QUADRATIC:
        t = np.clip(1.0 - ((16.0 / 15.0) * ad) ** 2, 0.0, None) ** 2
        out = np.where(ad >= 15.0 / 16.0, 0.0, t)
    elif kernel is Kernel.GAUSSIAN:
        out = np.exp(-np.pi * d * d)
    elif kernel is Kernel.INVERSE_QUADRATIC:
        out = 1.0 / (1.0 + (np.pi * np.pi) * d * d)
    elif kernel is Kernel.INVERSE_MULTI_QUADRATIC:
        out = 1.0 / np.sqrt(1.0 + INVERSE_MULTI_QUADRATIC_CONST * d * d)
    elif kernel is Kernel.EXP_ROOT:
        out = np.exp(-2.0 * np.sqrt(ad))
    else:  # pragma: no cover
        raise ValueError(f"unknown kernel {kernel!r}")
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LocalScale:
    """Moments of the squared distances to a query point and the resulting
    (n+1)-th-neighbor distance estimate."""

    mu: float
    sigma2: float
    d_np1: float


def _dnp1_from_d2(d2: np.ndarray, n: int) -> np.ndarray:
    """Batched local scale: d2 has shape (B, p) of squared distances.

    The Gamma-quantile route needs non-degenerate moments; when the variance
    vanishes (relative to mu^2) the empirical (n+1)-th smallest distance is
    used instead, then the smallest positive distance.
    """
    d2 = np.asarray(d2, dtype=float)
    b, p = d2.shape
    mu = d2.mean(axis=1)
    sig2 = d2.var(axis=1)
    q = min((n + 1) / p, 1.0 - 1e-6)
    degenerate = (mu <= 0.0) | (sig2 <= 1e-12 * mu * mu)
    n_deg = int(degenerate.sum())
    if n_deg == 0:
        return np.sqrt(gammaincinv(mu * mu / sig2, q) * (sig2 / mu))
    out = np.empty(b)
    reg = ~degenerate
    if n_deg < b:
        k = mu[reg] ** 2 / sig2[reg]
        theta = sig2[reg] / mu[reg]
        out[reg] = np.sqrt(gammaincinv(k, q) * theta)
    idx = np.nonzero(degenerate)[0]
    kth = min(n, p - 1)
    part = np.partition(d2[idx], kth, axis=1)
    emp = part[:, kth]
    for j, row in enumerate(idx):
        if emp[j] <= 0.0:
            pos = d2[row][d2[row] > 0.0]
            emp[j] = pos.min() if pos.size else 1.0
    out[idx] = np.sqrt(emp)
    return out


def local_scale(X, xi) -> LocalScale:
    """Local scaling coefficient d_np1 at query point xi over training X."""
    X = np.asarray(X, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if xi.ndim == 0:
        xi = xi[None]
    p, n = X.shape
    if p < 2:
        raise ValueError("local_scale requires at least two training points")
    diff = X - xi[None, :]
    d2 = np.einsum("ij,ij->i", diff, diff)
    d_np1 = float(_dnp1_from_d2(d2[None, :], n)[0])
    return LocalScale(mu=float(d2.mean()), sigma2=float(d2.var()), d_np1=d_np1)


def _apply_pinv(evals: np.ndarray, evecs: np.ndarray, good: np.ndarray,
                rhs: np.ndarray) -> np.ndarray:
    """x = V diag(1/evals on good) V^T rhs, batched."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        proj = np.einsum("...jk,...j->...k", evecs, rhs)
        proj = np.where(good, proj / evals, 0.0)
    return np.einsum("...kj,...j->...k", evecs, proj)


def _solve_first_column(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched solve of A u = e1 for symmetric PSD A of shape (..., k, k).

    Rank is revealed by an orthogonal eigendecomposition; rank-deficient
    systems get one ridge of 1e-10 * trace on the diagonal, and systems that
    remain deficient are flagged as failures. One step of iterative
    refinement keeps moderately conditioned systems near machine accuracy.
    """
    k = A.shape[-1]
    e1 = np.zeros(k)
    e1[0] = 1.0
    evals, evecs = np.linalg.eigh(A)
    emax = evals[..., -1]
    good = (evals > np.maximum(emax[..., None], 0.0) * _RANK_TOL) & (evals > 0.0)
    ok = good.all(axis=-1) & (emax > 0.0)
    u = _apply_pinv(evals, evecs, good, np.broadcast_to(e1, A.shape[:-1]))
    with np.errstate(invalid="ignore", over="ignore"):
        resid = e1 - np.einsum("...ij,...j->...i", A, u)
        u = u + _apply_pinv(evals, evecs, good, resid)
    ok &= np.isfinite(u).all(axis=-1)
    if not ok.all():
        bad = np.nonzero(~ok)
        tr = np.trace(A[bad], axis1=-2, axis2=-1)
        a2 = A[bad] + (_RIDGE_REL * tr)[..., None, None] * np.eye(k)
        evals2, evecs2 = np.linalg.eigh(a2)
        emax2 = evals2[..., -1]
        good2 = (evals2 > np.maximum(emax2[..., None], 0.0) * _RANK_TOL) & (evals2 > 0.0)
        ok2 = good2.all(axis=-1) & (emax2 > 0.0)
        u2 = _apply_pinv(evals2, evecs2, good2,
                         np.broadcast_to(e1, a2.shape[:-1]))
        ok2 &= np.isfinite(u2).all(axis=-1)
        u[bad] = u2
        ok = ok.copy()
        ok[bad] = ok2
    return u, ok


class PredictionFailure(Exception):
    """Raised by single-point prediction when the weighted system stays
    singular after the ridge fallback."""


@dataclass
class FitDiagnostics:
    aoecv: float
    lam: float
    kernel: Kernel
    p: int
    cv_rows: int

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "kernel": self.kernel.value,
            "aoecv": self.aoecv,
            "p": self.p,
            "cv_rows": self.cv_rows,
        }


class LowessModel:
    """A fitted multi-output LOWESS model.

    Immutable after construction; predictions for distinct query points may
    run concurrently.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, lam: float, kernel: Kernel,
                 diagnostics: Optional[FitDiagnostics] = None) -> None:
        self.x = np.ascontiguousarray(x, dtype=float)
        self.y = np.ascontiguousarray(y, dtype=float)
        if self.x.ndim != 2 or self.y.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError("training arrays must be (p, n) and (p, m+1)")
        if lam <= 0.0:
            raise ValueError("lambda must be positive")
        self.lam = float(lam)
        self.kernel = kernel
        self.diagnostics = diagnostics
        self.p, self.n = self.x.shape
        self.n_outputs = self.y.shape[1]
        self._sqnorm = np.einsum("ij,ij->i", self.x, self.x)

    # ---------------------------------------------------------------- utils
    def _sq_dists(self, xq: np.ndarray) -> np.ndarray:
        d2 = (
            np.einsum("ij,ij->i", xq, xq)[:, None]
            + self._sqnorm[None, :]
            - 2.0 * (xq @ self.x.T)
        )
        return np.maximum(d2, 0.0)

    def weights(self, xi) -> np.ndarray:
        """Kernel weights of every training point at query xi.

        Computed with elementwise distances so a training point bitwise
        equal to xi gets weight exactly phi(0) = 1.
        """
        xi = np.asarray(xi, dtype=float)
        diff = self.x - xi[None, :]
        d2 = np.einsum("ij,ij->i", diff, diff)
        dnp1 = _dnp1_from_d2(d2[None, :], self.n)[0]
        return np.asarray(kernel_eval(self.kernel, self.lam * np.sqrt(d2) / dnp1))

    # ----------------------------------------------------------- prediction
    def _predict_core(self, xq: np.ndarray, exclude: Optional[np.ndarray] = None,
                      self_rows: Optional[np.ndarray] = None,
                      refine: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Predict at a block of query points; exclude[i], when given, is a
        training-row index whose weight is forced to zero for query i, and
        self_rows[i] marks a training row coincident with query i (its
        distance is pinned to exactly zero).

        With ``refine`` the system is solved through a QR factorization of
        sqrt(W) Z, whose conditioning is the square root of the normal
        system's; without it (bulk surrogate-search traffic, where only the
        induced order matters) the cheaper normal-equations route is used.
        Rank-deficient systems fall back to the ridged normal path.
        """
        b = xq.shape[0]
        d2 = self._sq_dists(xq)
        if self_rows is not None:
            d2[np.arange(b), self_rows] = 0.0
        dnp1 = _dnp1_from_d2(d2, self.n)
        w = np.asarray(kernel_eval(self.kernel, self.lam * np.sqrt(d2) / dnp1[:, None]))
        if exclude is not None:
            w[np.arange(b), exclude] = 0.0
        k = self.n + 1
        zs = np.empty((b, self.p, k))
        zs[:, :, 0] = 1.0
        zs[:, :, 1:] = self.x[None, :, :] - xq[:, None, :]
        pred = np.full((b, self.n_outputs), INF)
        if refine:
            sw = np.sqrt(w)
            bz = zs * sw[:, :, None]
            q_mat, r_mat = np.linalg.qr(bz)
            rdiag = np.abs(np.diagonal(r_mat, axis1=-2, axis2=-1))
            rmax = rdiag.max(axis=-1)
            ok = (rdiag > rmax[:, None] * _RANK_TOL).all(axis=-1) & (rmax > 0.0)
            if ok.any():
                by = sw[ok, :, None] * self.y[None, :, :]
                rhs = np.matmul(q_mat[ok].transpose(0, 2, 1), by)
                with np.errstate(invalid="ignore", over="ignore"):
                    beta = np.linalg.solve(r_mat[ok], rhs)
                row_ok = np.isfinite(beta[:, 0, :]).all(axis=1)
                sel = np.nonzero(ok)[0]
                pred[sel[row_ok]] = beta[row_ok, 0, :]
                ok = ok.copy()
                ok[sel[~row_ok]] = False
        else:
            ok = np.zeros(b, dtype=bool)
        if not ok.all():
            bad = ~ok
            wz = zs[bad] * w[bad][:, :, None]
            a = np.matmul(wz.transpose(0, 2, 1), zs[bad])
            rhs_n = np.matmul(wz.transpose(0, 2, 1), self.y)
            u, ok_ridge = _solve_first_column(a)
            with np.errstate(invalid="ignore", over="ignore"):
                pred_bad = np.einsum("bk,bko->bo", u, rhs_n)
            pred_bad[~ok_ridge] = INF
            nonfinite = ~np.isfinite(pred_bad).all(axis=1)
            pred_bad[nonfinite] = INF
            ok_ridge = ok_ridge & ~nonfinite
            pred[bad] = pred_bad
            ok = ok.copy()
            ok[bad] = ok_ridge
        return pred, ok

    def predict_batch(self, xq, chunk: int = 2048,
                      refine: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Predict all outputs at each row of xq. Returns (pred, ok) where
        failed rows carry +inf predictions and ok = False."""
        xq = np.atleast_2d(np.asarray(xq, dtype=float))
        b = xq.shape[0]
        if b <= chunk:
            return self._predict_core(xq, refine=refine)
        preds = np.empty((b, self.n_outputs))
        oks = np.empty(b, dtype=bool)
        for s in range(0, b, chunk):
            p_chunk, ok_chunk = self._predict_core(xq[s:s + chunk], refine=refine)
            preds[s:s + chunk] = p_chunk
            oks[s:s + chunk] = ok_chunk
        return preds, oks

    def predict(self, xi) -> np.ndarray:
        """Predict [f, c_1, ..., c_m] at a single point; raises
        PredictionFailure on a singular weighted system."""
        pred, ok = self._predict_core(np.asarray(xi, dtype=float)[None, :])
        if not ok[0]:
            raise PredictionFailure("weighted regression system is singular")
        return pred[0]

    def cross_validate(self, i: int) -> np.ndarray:
        """Model value at training point i with that point's weight zeroed.

        Costs the same as a prediction; no shortcut exists. Raises
        PredictionFailure when the reduced system is singular.
        """
        rows = np.array([i])
        pred, ok = self._predict_core(self.x[rows], exclude=rows, self_rows=rows)
        if not ok[0]:
            raise PredictionFailure("cross-validation system is singular")
        return pred[0]

    def cross_validate_batch(self, rows) -> tuple[np.ndarray, np.ndarray]:
        rows = np.asarray(rows, dtype=int)
        return self._predict_core(self.x[rows], exclude=rows, self_rows=rows)

    def diagnostics_dict(self) -> dict:
        if self.diagnostics is not None:
            return self.diagnostics.as_dict()
        return {"lambda": self.lam, "kernel": self.kernel.value, "aoecv": None,
                "p": self.p, "cv_rows": 0}


class FitError(Exception):
    """Raised when no LOWESS model can be fitted from the given data."""


def _order_matrix(h: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Boolean matrix P[i, j] = point i strictly precedes point j."""
    h_lt = h[:, None] < h[None, :]
    h_eq = h[:, None] == h[None, :]
    f_lt = f[:, None] < f[None, :]
    return h_lt | (h_eq & f_lt)


def _violation_rows(c: np.ndarray) -> np.ndarray:
    """Aggregate violation per row of a (r, m) constraint array (m may be 0)."""
    if c.shape[1] == 0:
        return np.zeros(c.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.maximum(0.0, c)
        h = np.einsum("ij,ij->i", v, v)
    h[~np.isfinite(h)] = INF
    return h


def _cv_rows_for(p: int, cap: int) -> np.ndarray:
    if p <= cap:
        return np.arange(p)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(_AOECV_SUBSAMPLE_SEED)))
    return np.sort(rng.choice(p, size=cap, replace=False))


def _grid_cv_orders(x: np.ndarray, y: np.ndarray, rows: np.ndarray,
                    candidates: Sequence[tuple[float, Kernel]]) -> np.ndarray:
    """AOECV of every (lambda, kernel) candidate over the given CV rows.

    All candidates share the per-row geometry (distances, local scales,
    design matrices); only the weights differ.
    """
    p, n = x.shape
    r = rows.size
    k = n + 1
    g = len(candidates)

    sqn = np.einsum("ij,ij->i", x, x)
    xr = x[rows]
    d2 = np.maximum(sqn[rows][:, None] + sqn[None, :] - 2.0 * (xr @ x.T), 0.0)
    d2[np.arange(r), rows] = 0.0
    dnp1 = _dnp1_from_d2(d2, n)
    u_arg = np.sqrt(d2) / dnp1[:, None]

    zs = np.empty((r, p, k))
    zs[:, :, 0] = 1.0
    zs[:, :, 1:] = x[None, :, :] - xr[:, None, :]
    outer = zs[:, :, :, None] * zs[:, :, None, :]
    outer_flat = outer.reshape(r, p, k * k)
    del outer

    w_all = np.empty((r, g, p))
    for gi, (lam, kernel) in enumerate(candidates):
        w_all[:, gi, :] = np.asarray(kernel_eval(kernel, lam * u_arg))
    w_all[np.arange(r), :, rows] = 0.0

    a_all = np.matmul(w_all, outer_flat).reshape(r, g, k, k)
    u, ok = _solve_first_column(a_all)
    with np.errstate(invalid="ignore", over="ignore"):
        t = np.matmul(u, zs.transpose(0, 2, 1)) * w_all
        pred = np.matmul(t, y)

    f_cv = pred[:, :, 0].T.copy()
    h_cv = np.empty((g, r))
    for gi in range(g):
        h_cv[gi] = _violation_rows(pred[:, gi, 1:])
    bad = ~ok.T
    f_cv[bad] = INF
    h_cv[bad] = INF

    f_true = y[rows, 0]
    h_true = _violation_rows(y[rows, 1:])
    prec_true = _order_matrix(h_true, f_true)

    scores = np.empty(g)
    for gi in range(g):
        prec_cv = _order_matrix(h_cv[gi], f_cv[gi])
        scores[gi] = np.count_nonzero(prec_true != prec_cv) / float(r * r)
    return scores


def fit(x, y, *, lambda_grid: Sequence[float] = LAMBDA_GRID,
        cv_cap: int = AOECV_ROW_CAP) -> LowessModel:
    """Fit a LOWESS model, choosing (lambda, kernel) to minimize AOECV.

    Ties go to the smallest lambda (the smoother model), then to kernel
    order. Rows with non-finite outputs are dropped before fitting; raises
    FitError when fewer than n + 2 usable rows remain.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    finite = np.all(np.isfinite(y), axis=1) & np.all(np.isfinite(x), axis=1)
    x, y = x[finite], y[finite]
    p, n = x.shape
    if p < n + 2:
        raise FitError(f"need at least n + 2 = {n + 2} usable rows, got {p}")

    rows = _cv_rows_for(p, cv_cap)
    candidates = [(lam, kern) for lam in lambda_grid for kern in KERNEL_ORDER]
    scores = _grid_cv_orders(x, y, rows, candidates)

    lams = np.array([c[0] for c in candidates])
    kidx = np.array([KERNEL_ORDER.index(c[1]) for c in candidates])
    best = int(np.lexsort((kidx, lams, scores))[0])
    lam, kernel = candidates[best]
    diag = FitDiagnostics(aoecv=float(scores[best]), lam=lam, kernel=kernel,
                          p=p, cv_rows=int(rows.size))
    return LowessModel(x, y, lam, kernel, diagnostics=diag)


def aoecv(model: LowessModel, cv_cap: int = AOECV_ROW_CAP) -> float:
    """Aggregate order error with cross-validation of a fitted model."""
    rows = _cv_rows_for(model.p, cv_cap)
    score = _grid_cv_orders(model.x, model.y, rows, [(model.lam, model.kernel)])
    return float(score[0])
