# services/tuning.py
"""BIC selection of (lambda1, lambda2) over a grid, per method."""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core import Dataset, FitResult, ValidationError
from .adaptive import AdaptiveConfig, adaptive_weights
from .solver import SolverConfig, Gram, enet_path, scad_path

METHODS = ("lasso", "enet", "alasso", "aenet", "scad")
DEFAULT_LAMBDA2 = (0.0, 0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_N_LAMBDA1 = 50
DEFAULT_LAMBDA1_RATIO = 1e-4


@dataclass(frozen=True)
class Grid:
    lambda1_values: Optional[Tuple[float, ...]] = None
    lambda2_values: Tuple[float, ...] = DEFAULT_LAMBDA2
    n_lambda1: int = DEFAULT_N_LAMBDA1
    lambda1_ratio: float = DEFAULT_LAMBDA1_RATIO

    def __post_init__(self):
        if self.lambda1_values is not None:
            l1 = tuple(float(v) for v in self.lambda1_values)
            if not l1:
                raise ValidationError("empty lambda1 grid")
            if any(v <= 0 for v in l1):
                raise ValidationError("lambda1 values must be positive")
            if any(b >= a for a, b in zip(l1, l1[1:])):
                raise ValidationError("lambda1 values must be strictly descending")
            object.__setattr__(self, "lambda1_values", l1)
        l2 = tuple(float(v) for v in self.lambda2_values)
        if not l2:
            raise ValidationError("empty lambda2 grid")
        if any(v < 0 or not math.isfinite(v) for v in l2):
            raise ValidationError("lambda2 values must be finite and nonnegative")
        object.__setattr__(self, "lambda2_values", l2)
        if self.n_lambda1 < 1:
            raise ValidationError("n_lambda1 must be >= 1")
        if not 0 < self.lambda1_ratio < 1:
            raise ValidationError("lambda1_ratio must lie in (0, 1)")

    def lambda1_for(self, data: Dataset, weights=None) -> np.ndarray:
        """Explicit lambda1 values, or n_lambda1 log-spaced points from
        2 * max_j |x_j'y| / w_j down to lambda1_ratio times that."""
        if self.lambda1_values is not None:
            return np.array(self.lambda1_values)
        c = np.abs(data.X.T @ data.y)
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            ok = np.isfinite(w) & (w > 0)
            c = c[ok] / w[ok]
        top = 2.0 * float(np.max(c)) if c.size else 0.0
        if not top > 0:
            top = 1.0
        if self.n_lambda1 == 1:
            return np.array([top])
        return np.geomspace(top, top * self.lambda1_ratio, self.n_lambda1)


@dataclass(frozen=True)
class Chosen:
    method: str
    lambda1: float
    lambda2: float
    bic: float
    lambda1_enet: Optional[float] = None     # stage 1 of the adaptive methods
    gamma: Optional[float] = None


def bic_score(data: Dataset, fit: FitResult) -> float:
    """n log(RSS/n) + |active| log n on the final (rescaled) beta; -inf when RSS = 0."""
    beta = np.asarray(fit.beta)
    if beta.shape != (data.p,):
        raise ValidationError(f"fit has {beta.shape[0]} coefficients, data has p={data.p}")
    r = data.y - data.X @ beta
    rss = float(r @ r)
    n = data.n
    if rss <= 0:
        logging.warning("BIC degenerate: zero residual sum of squares")
        return -math.inf
    return n * math.log(rss / n) + len(fit.active_set) * math.log(n)


def _better(cand, best) -> bool:
    # (bic, lambda1, lambda2): lower bic, then larger lambda1, then larger lambda2
    if best is None:
        return True
    if cand[0] != best[0]:
        return cand[0] < best[0]
    if cand[1] != best[1]:
        return cand[1] > best[1]
    return cand[2] > best[2]


def _scan_enet(data, gram, grid, lambda2_values, weights, solver_config):
    best = None
    for l2 in lambda2_values:
        lam1 = grid.lambda1_for(data, weights)
        for l1, fit in zip(lam1, enet_path(data, lam1, l2, weights, solver_config, gram=gram)):
            cand = (bic_score(data, fit), float(l1), float(l2), fit)
            if _better(cand, best):
                best = cand
    return best


def _two_stage(data, gram, grid, lambda2_values, adaptive_config, solver_config, method):
    # each lambda2 runs both stages; the final fit's BIC picks lambda2
    best = None
    for l2 in lambda2_values:
        _, l1_enet, _, fit1 = _scan_enet(data, gram, grid, (l2,), None, solver_config)
        weights = adaptive_weights(fit1.beta, adaptive_config, data.n)
        # an all-excluded stage 2 is fine: every fit on its path is exactly zero
        bic, l1_star, _, fit = _scan_enet(data, gram, grid, (l2,), weights, solver_config)
        cand = (bic, l1_star, float(l2), fit, l1_enet)
        if _better(cand, best):
            best = cand
    bic, l1_star, l2, fit, l1_enet = best
    return fit, Chosen(method, l1_star, l2, bic, l1_enet, adaptive_config.gamma)


def tune(data: Dataset, method: str, grid: Grid | None = None,
         adaptive_config: AdaptiveConfig | None = None,
         solver_config: SolverConfig | None = None) -> Tuple[FitResult, Chosen]:
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    grid = grid or Grid()
    solver_config = solver_config or SolverConfig()
    adaptive_config = adaptive_config or AdaptiveConfig()
    gram = Gram.of(data)

    if method == "lasso":
        bic, l1, l2, fit = _scan_enet(data, gram, grid, (0.0,), None, solver_config)
        return fit, Chosen(method, l1, l2, bic)
    if method == "enet":
        bic, l1, l2, fit = _scan_enet(data, gram, grid, grid.lambda2_values, None, solver_config)
        return fit, Chosen(method, l1, l2, bic)
    if method == "alasso":
        return _two_stage(data, gram, grid, (0.0,), adaptive_config, solver_config, method)
    if method == "aenet":
        return _two_stage(data, gram, grid, grid.lambda2_values, adaptive_config, solver_config, method)

    # scad: lambda = lambda1 / (2n) gives the lasso's zero pattern at each grid point
    lam1 = grid.lambda1_for(data)
    lams = lam1 / (2.0 * data.n)
    best = None
    for l1, lam, fit in zip(lam1, lams, scad_path(data, lams, solver_config, gram=gram)):
        cand = (bic_score(data, fit), float(l1), 0.0, fit)
        if _better(cand, best):
            best = cand
    bic, l1, _, fit = best
    return fit, Chosen(method, float(l1 / (2.0 * data.n)), 0.0, bic)


def grid_scores(data: Dataset, lambda1_values: Sequence[float], lambda2: float,
                weights=None, solver_config: SolverConfig | None = None):
    """(lambda1, bic) for every point of one lambda2 slice, for audits of tune()."""
    lam1 = np.asarray(lambda1_values, dtype=float)
    fits = enet_path(data, lam1, lambda2, weights, solver_config)
    return [(float(l1), bic_score(data, f)) for l1, f in zip(lam1, fits)]
