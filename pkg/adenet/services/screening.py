# services/screening.py
"""Sure Independence Screening and the screen-then-fit pipelines."""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core import Dataset, FitResult, ValidationError
from .adaptive import AdaptiveConfig, choose_gamma, default_gamma
from .solver import SolverConfig
from .tuning import Grid, Chosen, tune


@dataclass(frozen=True, eq=False)
class ScreenResult:
    kept: Tuple[int, ...]
    scores: np.ndarray
    zero_columns: Tuple[int, ...] = ()

    @property
    def d_n(self) -> int:
        return len(self.kept)


def d_default(n: int) -> int:
    """floor(5.5 n^(2/3))."""
    d = int(math.floor(5.5 * n ** (2.0 / 3.0)))
    # exact integer fix-up: d <= 5.5 n^(2/3)  <=>  8 d^3 <= 1331 n^2
    while 8 * (d + 1) ** 3 <= 1331 * n * n:
        d += 1
    while d > 0 and 8 * d ** 3 > 1331 * n * n:
        d -= 1
    return d


def sis_screen(data: Dataset, d_n: int) -> ScreenResult:
    if d_n < 1:
        raise ValidationError("d_n must be >= 1")
    norms = np.sqrt(np.sum(data.X ** 2, axis=0))
    raw = np.abs(data.X.T @ data.y)
    zero = norms == 0
    scores = np.zeros(data.p)
    scores[~zero] = raw[~zero] / norms[~zero]
    zero_cols = tuple(int(j) for j in np.flatnonzero(zero))
    if zero_cols:
        logging.warning("SIS: %d zero-norm column(s) scored 0: %s", len(zero_cols), list(zero_cols)[:10])
    # stable sort of -score: ties go to the lower index
    order = np.argsort(-scores, kind="stable")
    kept = tuple(sorted(int(j) for j in order[:min(d_n, data.p)]))
    scores.setflags(write=False)
    return ScreenResult(kept, scores, zero_cols)


def _screened(data: Dataset, d_n: int):
    screen = sis_screen(data, d_n)
    return screen, data.select(screen.kept)


def sis_aenet(data: Dataset, d_n: int, grid: Grid | None = None,
              adaptive_config: AdaptiveConfig | None = None,
              solver_config: SolverConfig | None = None,
              nu: Optional[float] = None) -> FitResult:
    fit, _ = sis_aenet_tuned(data, d_n, grid, adaptive_config, solver_config, nu)
    return fit


def sis_aenet_tuned(data: Dataset, d_n: int, grid: Grid | None = None,
                    adaptive_config: AdaptiveConfig | None = None,
                    solver_config: SolverConfig | None = None,
                    nu: Optional[float] = None) -> Tuple[FitResult, Chosen]:
    """SIS down to d_n columns, tuned adaptive elastic-net on them, zeros elsewhere.

    Without an adaptive_config, gamma = choose_gamma(nu), or default_gamma over
    the kept columns when nu is not given.
    """
    screen, reduced = _screened(data, d_n)
    if adaptive_config is None:
        gamma = default_gamma(data.n, len(screen.kept)) if nu is None else choose_gamma(nu)
        adaptive_config = AdaptiveConfig(gamma=gamma)
    fit, chosen = tune(reduced, "aenet", grid, adaptive_config, solver_config)
    return fit.scatter(screen.kept, data.p), chosen


def sis_scad(data: Dataset, d_n: int, grid: Grid | None = None,
             solver_config: SolverConfig | None = None) -> Tuple[FitResult, Chosen]:
    screen, reduced = _screened(data, d_n)
    fit, chosen = tune(reduced, "scad", grid, None, solver_config)
    return fit.scatter(screen.kept, data.p), chosen
