# services/solver.py
"""
Weighted elastic-net by cyclic coordinate descent.

Criterion (no 1/2 factors):

    ||y - X b||^2 + lambda2 ||b||^2 + lambda1 * sum_j w_j |b_j|

so the soft threshold on z_j = x_j'r_{-j} is lambda1*w_j/2. Coordinates with
w_j = +inf are frozen at zero. The final estimator is (1 + lambda2/n) times the
argmin, or (1 + lambda2) for standardized designs.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..core import (
    Dataset, Penalty, FitResult, ValidationError, DegenerateColumnError,
    env_float, env_int,
)

TOL = env_float("ADENET_TOL", 1e-8)
MAX_SWEEPS = env_int("ADENET_MAX_SWEEPS", 10000)
KKT_FACTOR = 100.0          # converged fits satisfy scaled KKT <= KKT_FACTOR * tol
SCAD_A = 3.7
EXHAUSTIVE_MAX_P = 12


@dataclass(frozen=True)
class SolverConfig:
    tol: float = TOL
    max_sweeps: int = MAX_SWEEPS
    rescale: bool = True
    standardized: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")

    def prefactor(self, lambda2: float, n: int) -> float:
        if not self.rescale:
            return 1.0
        return 1.0 + lambda2 if self.standardized else 1.0 + lambda2 / n


# ---------------- Helpers ----------------
@dataclass(frozen=True, eq=False)
class Gram:
    """X'X, X'y and y'y of a dataset, shared by all fits on it."""
    G: np.ndarray
    c: np.ndarray
    yy: float

    @classmethod
    def of(cls, data: Dataset) -> "Gram":
        X, y = data.X, data.y
        return cls(X.T @ X, X.T @ y, float(y @ y))


def kkt_scale(data: Dataset) -> float:
    """max(1, ||X'y||_inf), the yardstick for relative KKT residuals."""
    return max(1.0, float(np.max(np.abs(data.X.T @ data.y))))


def _require_centered(data: Dataset):
    if not data.centered:
        raise ValidationError("data must be centered; call core.center() first")


def _check_penalty(data: Dataset, penalty: Penalty):
    if penalty.weights.shape[0] != data.p:
        raise ValidationError(f"penalty has {penalty.weights.shape[0]} weights, data has p={data.p}")


def soft_threshold(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def coordinate_update(z: float, denom: float, threshold: float) -> float:
    """argmin_b  -2 z b + denom b^2 + 2 threshold |b|  =  S(z, threshold) / denom."""
    if not denom > 0:
        raise DegenerateColumnError(f"coordinate denominator {denom} is not positive")
    if threshold < 0:
        raise ValidationError("threshold must be nonnegative")
    return soft_threshold(z, threshold) / denom


def _l1_term(thresholds: np.ndarray, beta: np.ndarray) -> float:
    nz = beta != 0
    return float(np.sum(thresholds[nz] * np.abs(beta[nz])))


def penalized_objective(data: Dataset, penalty: Penalty, beta_raw) -> float:
    beta_raw = np.asarray(beta_raw, dtype=float)
    r = data.y - data.X @ beta_raw
    return float(r @ r + penalty.lambda2 * beta_raw @ beta_raw + _l1_term(penalty.thresholds(), beta_raw))


def _kkt_from_gradient(grad: np.ndarray, thresholds: np.ndarray, lambda2: float, beta: np.ndarray) -> float:
    # grad = -2 X'(y - X b)
    zero = beta == 0
    viol = np.zeros_like(beta)
    if np.any(zero):
        excess = np.abs(grad[zero]) - thresholds[zero]
        viol[zero] = np.maximum(excess, 0.0)
    nz = ~zero
    if np.any(nz):
        viol[nz] = np.abs(grad[nz] + 2.0 * lambda2 * beta[nz] + thresholds[nz] * np.sign(beta[nz]))
    return float(np.max(viol)) if viol.size else 0.0


def kkt_check(data: Dataset, penalty: Penalty, beta_raw) -> float:
    beta = np.asarray(beta_raw, dtype=float)
    if beta.shape != (data.p,):
        raise ValidationError(f"beta has shape {beta.shape}, expected ({data.p},)")
    _check_penalty(data, penalty)
    if not np.all(np.isfinite(beta)):
        raise ValidationError("non-finite beta")
    grad = -2.0 * data.X.T @ (data.y - data.X @ beta)
    return _kkt_from_gradient(grad, penalty.thresholds(), penalty.lambda2, beta)


# ---------------- Coordinate descent ----------------
def _cd(data: Dataset, gram: Gram, penalty: Penalty, config: SolverConfig, init=None):
    p = data.p
    t = penalty.thresholds()
    excluded = penalty.excluded
    lambda2 = penalty.lambda2
    G, c = gram.G, gram.c
    diag = np.diag(G) + lambda2

    beta = np.zeros(p) if init is None else np.array(init, dtype=float)
    beta[excluded] = 0.0

    free = []
    for j in range(p):
        if excluded[j]:
            continue
        if diag[j] <= 0:
            if t[j] == 0:
                raise DegenerateColumnError(f"column {j} has zero norm and no penalty")
            beta[j] = 0.0        # z_j = 0 for a zero column, the coordinate stays at 0
            continue
        free.append(j)

    half = t / 2.0
    scale = max(1.0, float(np.max(np.abs(c))))
    trace = [penalized_objective(data, penalty, beta)]
    converged = False
    sweeps = 0
    for sweeps in range(1, config.max_sweeps + 1):
        q = G @ beta
        max_delta = 0.0
        for j in free:
            bj = beta[j]
            z = c[j] - q[j] + G[j, j] * bj
            new = coordinate_update(z, diag[j], half[j])
            delta = new - bj
            if delta != 0.0:
                beta[j] = new
                q += G[:, j] * delta
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        trace.append(penalized_objective(data, penalty, beta))
        if max_delta < config.tol:
            grad = -2.0 * (c - G @ beta)
            if _kkt_from_gradient(grad, t, lambda2, beta) / scale <= KKT_FACTOR * config.tol:
                converged = True
                break
    return beta, sweeps, converged, trace


def weighted_enet_fit(data: Dataset, penalty: Penalty, config: SolverConfig | None = None,
                      init=None, gram: Gram | None = None) -> FitResult:
    config = config or SolverConfig()
    _require_centered(data)
    _check_penalty(data, penalty)
    gram = gram or Gram.of(data)
    beta, sweeps, converged, trace = _cd(data, gram, penalty, config, init)
    if not converged:
        logging.warning("coordinate descent stopped after %d sweeps without converging "
                        "(lambda1=%.4g, lambda2=%.4g)", sweeps, penalty.lambda1, penalty.lambda2)
    return FitResult.build(
        beta, config.prefactor(penalty.lambda2, data.n), trace[-1], sweeps, converged,
        kkt_check(data, penalty, beta), trace,
    )


def enet_path(data: Dataset, lambda1_values: Sequence[float], lambda2: float, weights=None,
              config: SolverConfig | None = None, gram: Gram | None = None) -> List[FitResult]:
    """Fits along a descending lambda1 grid, each warm-started from the previous one."""
    lam = np.asarray(lambda1_values, dtype=float)
    if lam.size == 0:
        raise ValidationError("empty lambda1 grid")
    if np.any(np.diff(lam) >= 0):
        raise ValidationError("lambda1 grid must be strictly descending")
    weights = np.ones(data.p) if weights is None else np.asarray(weights, dtype=float)
    gram = gram or Gram.of(data)
    fits, init = [], None
    for l1 in lam:
        fit = weighted_enet_fit(data, Penalty(l1, lambda2, weights), config, init=init, gram=gram)
        fits.append(fit)
        init = fit.beta_raw
    return fits


# ---------------- Augmented-data oracle ----------------
def _augmented(data: Dataset, penalty: Penalty):
    p = data.p
    root = np.sqrt(penalty.lambda2)
    Xa = np.vstack([data.X, root * np.eye(p)])
    ya = np.concatenate([data.y, np.zeros(p)])
    return Xa, ya


def _lasso_objective(A: np.ndarray, b: np.ndarray, yy: float, t: np.ndarray, beta: np.ndarray) -> float:
    return float(yy - 2.0 * b @ beta + beta @ A @ beta + _l1_term(t, beta))


def _enumerate_active_sets(A: np.ndarray, b: np.ndarray, yy: float, t: np.ndarray,
                           free: np.ndarray, slack: float):
    """Exact weighted lasso min yy - 2b'B + B'AB + sum t|B| by trying every
    (active set, sign pattern) pair and keeping KKT-consistent candidates."""
    p = b.shape[0]
    best, best_obj, tried = None, np.inf, 0
    free_idx = np.flatnonzero(free)
    for k in range(len(free_idx) + 1):
        for S in itertools.combinations(free_idx, k):
            S = list(S)
            beta = np.zeros(p)
            if k:
                signs = np.array(list(itertools.product((-1.0, 1.0), repeat=k))).T
                rhs = b[S][:, None] - (t[S] / 2.0)[:, None] * signs
                try:
                    sol = np.linalg.solve(A[np.ix_(S, S)], rhs)
                except np.linalg.LinAlgError:
                    continue
                ok = np.all(np.sign(sol) == signs, axis=0)
                cols = np.flatnonzero(ok)
            else:
                sol, cols = None, [0]
            for col in cols:
                tried += 1
                beta = np.zeros(p)
                if k:
                    beta[S] = sol[:, col]
                grad = 2.0 * (A @ beta - b)
                out = np.ones(p, dtype=bool)
                out[S] = False
                out &= free
                if np.any(np.abs(grad[out]) > t[out] + slack):
                    continue
                obj = _lasso_objective(A, b, yy, t, beta)
                if obj < best_obj:
                    best, best_obj = beta, obj
    return best, tried


def _proximal_gradient(A: np.ndarray, b: np.ndarray, t: np.ndarray, free: np.ndarray,
                       max_iter: int = 200000, tol: float = 1e-14):
    """FISTA with gradient restart on the same criterion."""
    p = b.shape[0]
    L = 2.0 * float(np.linalg.eigvalsh(A)[-1])
    if L <= 0:
        return np.zeros(p), 0
    step_t = np.where(free, t, 0.0) / L
    x = np.zeros(p)
    v = x.copy()
    mom = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (A @ v - b)
        u = v - grad / L
        x_new = np.sign(u) * np.maximum(np.abs(u) - step_t, 0.0)
        x_new[~free] = 0.0
        if np.dot(v - x_new, x_new - x) > 0:
            mom = 1.0                       # restart
        mom_new = (1.0 + np.sqrt(1.0 + 4.0 * mom * mom)) / 2.0
        v = x_new + ((mom - 1.0) / mom_new) * (x_new - x)
        done = np.max(np.abs(x_new - x)) <= tol * max(1.0, np.max(np.abs(x_new)))
        x, mom = x_new, mom_new
        if done:
            break
    return x, it


def augmented_oracle_fit(data: Dataset, penalty: Penalty, config: SolverConfig | None = None) -> FitResult:
    """Independent check of weighted_enet_fit: the ridge term becomes sqrt(lambda2)*I
    rows appended to X, leaving a weighted lasso that is solved exactly by
    active-set enumeration (p <= 12) or by proximal gradient."""
    config = config or SolverConfig()
    _require_centered(data)
    _check_penalty(data, penalty)
    Xa, ya = _augmented(data, penalty)
    A = Xa.T @ Xa
    b = Xa.T @ ya
    yy = float(ya @ ya)
    t = penalty.thresholds()
    free = ~penalty.excluded
    zero_cols = free & (np.diag(A) <= 0) & (t == 0)
    if np.any(zero_cols):
        raise DegenerateColumnError(f"column {int(np.flatnonzero(zero_cols)[0])} has zero norm and no penalty")

    beta, iters = None, 0
    if data.p <= EXHAUSTIVE_MAX_P:
        slack = 1e-9 * max(1.0, float(np.max(np.abs(b))))
        beta, iters = _enumerate_active_sets(A, b, yy, t, free, slack)
    if beta is None:
        beta, iters = _proximal_gradient(A, b, t, free)
    obj = penalized_objective(data, penalty, beta)
    return FitResult.build(beta, config.prefactor(penalty.lambda2, data.n), obj, iters, True,
                           kkt_check(data, penalty, beta), (obj,))


# ---------------- SCAD ----------------
def scad_penalty(t, lam: float, a: float = SCAD_A):
    t = np.abs(np.asarray(t, dtype=float))
    return np.where(
        t <= lam,
        lam * t,
        np.where(t <= a * lam, (2 * a * lam * t - t ** 2 - lam ** 2) / (2 * (a - 1)), (a + 1) * lam ** 2 / 2),
    )


def scad_derivative(t, lam: float, a: float = SCAD_A):
    t = np.abs(np.asarray(t, dtype=float))
    return np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1))


def scad_threshold(z: float, v: float, lam: float, a: float = SCAD_A) -> float:
    """Global minimizer over b of (v/2) b^2 - z b + p_lam(|b|).

    For v = 1 this is the three-piece SCAD rule: soft threshold for |z| <= 2 lam,
    ((a-1) z - sign(z) a lam) / (a-2) up to a lam, z beyond. General v compares
    the stationary point of each piece.
    """
    if not v > 0:
        raise DegenerateColumnError(f"coordinate curvature {v} is not positive")
    if lam == 0:
        return z / v
    az = abs(z)
    cands = [0.0, min(max(az - lam, 0.0) / v, lam)]
    k = v - 1.0 / (a - 1.0)
    if k > 0:
        cands.append(min(max((az - a * lam / (a - 1.0)) / k, lam), a * lam))
    else:
        cands.extend([lam, a * lam])
    cands.append(max(az / v, a * lam))

    def g(b):
        return 0.5 * v * b * b - az * b + float(scad_penalty(b, lam, a))

    best = min(cands, key=lambda b: (g(b), b))
    return float(np.copysign(best, z)) if best else 0.0


def scad_objective(data: Dataset, lam: float, beta) -> float:
    """||y - X b||^2 + 2n sum_j p_lam(|b_j|)."""
    beta = np.asarray(beta, dtype=float)
    r = data.y - data.X @ beta
    return float(r @ r + 2.0 * data.n * np.sum(scad_penalty(beta, lam)))


def scad_stationarity(data: Dataset, lam: float, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    n = data.n
    grad = -2.0 * data.X.T @ (data.y - data.X @ beta)
    zero = beta == 0
    viol = np.zeros_like(beta)
    viol[zero] = np.maximum(np.abs(grad[zero]) - 2.0 * n * lam, 0.0)
    nz = ~zero
    viol[nz] = np.abs(grad[nz] + 2.0 * n * scad_derivative(beta[nz], lam) * np.sign(beta[nz]))
    return float(np.max(viol)) if viol.size else 0.0


def scad_fit(data: Dataset, lam: float, config: SolverConfig | None = None,
             init=None, gram: Gram | None = None) -> FitResult:
    """Coordinate descent on ||y - X b||^2 + 2n sum p_lam(|b_j|), a = 3.7.

    With columns of squared norm n the kill zone is |x_j'y|/n <= lam, the same
    zero pattern as the lasso with lambda1 = 2 n lam. Returns a stationary point.
    """
    config = config or SolverConfig()
    _require_centered(data)
    if not lam >= 0:
        raise ValidationError("lambda must be nonnegative")
    gram = gram or Gram.of(data)
    n, p = data.n, data.p
    G, c = gram.G, gram.c
    diag = np.diag(G)
    beta = np.zeros(p) if init is None else np.array(init, dtype=float)
    free = []
    for j in range(p):
        if diag[j] <= 0:
            if lam == 0:
                raise DegenerateColumnError(f"column {j} has zero norm and no penalty")
            beta[j] = 0.0
            continue
        free.append(j)

    trace = [scad_objective(data, lam, beta)]
    converged, sweeps = False, 0
    for sweeps in range(1, config.max_sweeps + 1):
        q = G @ beta
        max_delta = 0.0
        for j in free:
            bj = beta[j]
            z = c[j] - q[j] + G[j, j] * bj
            new = scad_threshold(z / n, diag[j] / n, lam)
            delta = new - bj
            if delta != 0.0:
                beta[j] = new
                q += G[:, j] * delta
                max_delta = max(max_delta, abs(delta))
        trace.append(scad_objective(data, lam, beta))
        if max_delta < config.tol:
            converged = True
            break
    if not converged:
        logging.warning("SCAD coordinate descent stopped after %d sweeps (lambda=%.4g)", sweeps, lam)
    return FitResult.build(beta, 1.0, trace[-1], sweeps, converged, scad_stationarity(data, lam, beta), trace)


def scad_path(data: Dataset, lambdas: Sequence[float], config: SolverConfig | None = None,
              gram: Gram | None = None) -> List[FitResult]:
    lam = np.asarray(lambdas, dtype=float)
    if lam.size == 0:
        raise ValidationError("empty lambda grid")
    if np.any(np.diff(lam) >= 0):
        raise ValidationError("lambda grid must be strictly descending")
    gram = gram or Gram.of(data)
    fits, init = [], None
    for l in lam:
        fit = scad_fit(data, l, config, init=init, gram=gram)
        fits.append(fit)
        init = fit.beta_raw
    return fits
