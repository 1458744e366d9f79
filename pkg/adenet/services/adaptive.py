# services/adaptive.py
import math
import logging
from dataclasses import dataclass

import numpy as np

from ..core import Dataset, Penalty, FitResult, ValidationError, DomainError
from .solver import SolverConfig, weighted_enet_fit

ZERO_MODES = ("ridge_offset", "hard_exclude")
ZERO_MODE_ALIASES = {"offset": "ridge_offset", "exclude": "hard_exclude"}
# largest growth rate the studies use; choose_gamma gives 5 there
NU_CAP = 2.0 / 3.0


@dataclass(frozen=True)
class AdaptiveConfig:
    gamma: float = 1.0
    zero_mode: str = "ridge_offset"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")
        mode = ZERO_MODE_ALIASES.get(self.zero_mode, self.zero_mode)
        if mode not in ZERO_MODES:
            raise ValidationError(f"unknown zero_mode {self.zero_mode!r}")
        object.__setattr__(self, "zero_mode", mode)


def choose_gamma(nu: float) -> float:
    """ceil(2nu/(1-nu)) + 1, the smallest integer exponent safely above 2nu/(1-nu)."""
    if not 0 <= nu < 1:
        raise DomainError(f"nu must lie in [0, 1), got {nu}")
    # rounding guard: 2*(2/3)/(1/3) evaluates to 4.000000000000001
    return float(math.ceil(round(2 * nu / (1 - nu), 12)) + 1)


def nu_hat(n: int, p: int) -> float:
    """Plug-in growth rate log(p)/log(n) for real data."""
    if n < 2 or p < 1:
        raise DomainError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    return math.log(p) / math.log(n)


def default_gamma(n: int, p: int) -> float:
    """choose_gamma at the plug-in rate, with the rate capped at NU_CAP.

    Wide data (p >= n) has nu_hat >= 1, where no exponent qualifies and huge
    exponents overflow the offset weights.
    """
    nu = nu_hat(n, p)
    if nu > NU_CAP:
        logging.info("growth rate %.3f capped at %.3f for the adaptive exponent", nu, NU_CAP)
        nu = NU_CAP
    return choose_gamma(nu)


def adaptive_weights(beta_enet, config: AdaptiveConfig, n: int) -> np.ndarray:
    beta = np.asarray(beta_enet, dtype=float)
    if beta.ndim != 1 or not np.all(np.isfinite(beta)):
        raise ValidationError("beta_enet must be a finite vector")
    if n < 1:
        raise ValidationError("n must be >= 1")
    mag = np.abs(beta)
    with np.errstate(divide="ignore", over="ignore"):
        if config.zero_mode == "ridge_offset":
            return (mag + 1.0 / n) ** (-config.gamma)
        w = np.full(beta.shape, np.inf)
        nz = mag > 0
        w[nz] = mag[nz] ** (-config.gamma)
    return w


def adaptive_fit(data: Dataset, weights, lambda1_star: float, lambda2: float,
                 solver_config: SolverConfig | None = None, init=None, gram=None) -> FitResult:
    """Stage 2 of the adaptive elastic-net for given weights."""
    return weighted_enet_fit(data, Penalty(lambda1_star, lambda2, weights), solver_config, init=init, gram=gram)


def adaptive_enet_fit(data: Dataset, lambda2: float, lambda1_enet: float, lambda1_star: float,
                      config: AdaptiveConfig, solver_config: SolverConfig | None = None) -> FitResult:
    solver_config = solver_config or SolverConfig()
    stage1 = weighted_enet_fit(data, Penalty.unit(data.p, lambda1_enet, lambda2), solver_config)
    weights = adaptive_weights(stage1.beta, config, data.n)
    # the same lambda2 in both stages
    return adaptive_fit(data, weights, lambda1_star, lambda2, solver_config)
