# services/diagnostics.py
"""
Computable checks of the theory: eigen bounds of X'X/n, the nonasymptotic
risk bound of the elastic-net, the normality statistic of the adaptive
elastic-net, and the Monte Carlo drivers built on them.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from ..core import Dataset, FitResult, Penalty, Scenario, DomainError, ValidationError, center
from .adaptive import AdaptiveConfig, nu_hat
from .simulation import THREADS, STREAM_DESIGN, STREAM_DIAG, gen_design, replicate, rng_for
from .solver import SolverConfig, Gram, weighted_enet_fit
from .tuning import Chosen, Grid, tune

EIGEN_TOL = 1e-8
EIGEN_MAX_ITER = 100000


# ---------------- Eigen bounds ----------------
def _power_iteration(M: np.ndarray, tol: float = EIGEN_TOL, max_iter: int = EIGEN_MAX_ITER) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix.

    Stops once the eigen-residual |Mv - lam v| is within tol * max(1, |lam|).
    """
    p = M.shape[0]
    v = np.random.default_rng(0).standard_normal(p)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        lam = float(v @ w)
        if np.linalg.norm(w - lam * v) <= tol * max(1.0, abs(lam)):
            return lam
        v = w / norm
    logging.warning("power iteration stopped after %d steps", max_iter)
    return lam


def eigen_bounds(X, n: int | None = None) -> Tuple[float, float]:
    """(b, B) = extreme eigenvalues of X'X/n.

    B by power iteration on G = X'X/n, b as B - mu with mu the top eigenvalue
    of B*I - G. p > n gives b = 0.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValidationError("X must be a finite matrix")
    n = X.shape[0] if n is None else int(n)
    if n < 1:
        raise DomainError("n must be positive")
    p = X.shape[1]
    G = X.T @ X / n
    B = max(_power_iteration(G), 0.0)
    if p > n or B == 0.0:
        return 0.0, B
    mu = _power_iteration(B * np.eye(p) - G)
    b = min(max(B - mu, 0.0), B)
    return b, B


# ---------------- Conditions ----------------
@dataclass(frozen=True)
class ConditionsReport:
    b: float
    B: float
    nu_hat: float
    a1_holds: bool
    eta: float
    descriptive: Dict[str, float] = field(default_factory=dict)


def conditions_report(data: Dataset, scenario: Scenario | None = None,
                      lambdas: Chosen | None = None) -> ConditionsReport:
    """Eigen bounds plus descriptive values of the other regularity conditions.

    The asymptotic conditions get no pass/fail verdict; their finite-n ratios
    are reported under `descriptive`.
    """
    b, B = eigen_bounds(data.X, data.n)
    n, p = data.n, data.p
    nh = nu_hat(n, p)
    eta = math.nan
    desc = {"max_row_norm_sq_over_n": float(np.max(np.sum(data.X ** 2, axis=1)) / n)}
    if scenario is not None:
        eta = float(np.min(np.abs(scenario.beta_star[list(scenario.support)]))) if scenario.support else math.nan
    if lambdas is not None:
        l2 = lambdas.lambda2
        l1 = lambdas.lambda1_enet if lambdas.lambda1_enet is not None else lambdas.lambda1
        desc["lambda2_over_n"] = l2 / n
        desc["lambda1_over_sqrt_n"] = l1 / math.sqrt(n)
        if lambdas.lambda1_enet is not None:
            l1s = lambdas.lambda1
            gamma = lambdas.gamma if lambdas.gamma is not None else (scenario.gamma if scenario else 1.0)
            nu = scenario.nu if scenario is not None else nh
            desc["lambda1_star_over_sqrt_n"] = l1s / math.sqrt(n)
            desc["lambda1_star_growth"] = l1s / math.sqrt(n) * n ** (((1 - nu) * (1 + gamma) - 1) / 2)
            if scenario is not None:
                norm_a = float(np.linalg.norm(scenario.beta_star[list(scenario.support)]))
                desc["lambda2_signal"] = l2 / math.sqrt(n) * norm_a
                if l1 > 0 and l1s > 0:
                    desc["signal_separation"] = min(
                        n / (l1 * math.sqrt(p)), (math.sqrt(n) / (math.sqrt(p) * l1s)) ** (1 / gamma)
                    ) * eta
    return ConditionsReport(b, B, nh, b > 0, eta, desc)


# ---------------- Risk bound ----------------
def risk_bound(lambda1: float, lambda2: float, weights_sq_sum: float, beta_star_norm_sq: float,
               b: float, B: float, p: int, n: int, sigma: float) -> float:
    """4 (lambda2^2 |b*|^2 + B p n sigma^2 + lambda1^2 sum w^2) / (b n + lambda2)^2."""
    if b < 0 or lambda2 < 0 or lambda1 < 0 or B < 0 or sigma < 0:
        raise ValidationError("risk_bound arguments must be nonnegative")
    den = (b * n + lambda2) ** 2
    if den == 0:
        raise DomainError("risk bound needs b > 0 or lambda2 > 0")
    num = lambda2 ** 2 * beta_star_norm_sq + B * p * n * sigma ** 2 + lambda1 ** 2 * weights_sq_sum
    return 4.0 * num / den


@dataclass(frozen=True)
class RiskBoundResult:
    mean_sq_error: float
    se: float
    bound: float
    b: float
    B: float
    lambda1: float
    lambda2: float

    @property
    def holds(self) -> bool:
        return self.mean_sq_error <= self.bound


def risk_bound_study(scenario: Scenario, lambda1: Optional[float] = None, lambda2: Optional[float] = None,
                     replications: Optional[int] = None, seed: Optional[int] = None,
                     grid: Grid | None = None, solver_config: SolverConfig | None = None) -> RiskBoundResult:
    """Mean |b_raw - b*|^2 of the unit-weight elastic-net over fresh noise on one fixed design.

    Missing lambdas are tuned by BIC (enet) on the first replication.
    """
    seed = scenario.seed if seed is None else seed
    R = replications or scenario.replications
    solver_config = solver_config or SolverConfig()
    beta_star = np.array(scenario.beta_star)
    rho = 0.0 if scenario.design == "iid" else scenario.rho
    X = gen_design(scenario.n, scenario.p, rho, rng_for(seed, 0, STREAM_DESIGN))

    def data_for(r):
        eps = scenario.sigma * rng_for(seed, r, STREAM_DIAG).standard_normal(scenario.n)
        return center(Dataset(X @ beta_star + eps, X))

    first = data_for(0)
    if lambda1 is None or lambda2 is None:
        _, chosen = tune(first, "enet", grid, None, solver_config)
        lambda1 = chosen.lambda1 if lambda1 is None else lambda1
        lambda2 = chosen.lambda2 if lambda2 is None else lambda2

    gram = None
    errs = np.empty(R)
    for r in range(R):
        data = first if r == 0 else data_for(r)
        if gram is None:
            gram = Gram.of(data)
        else:
            gram = Gram(gram.G, data.X.T @ data.y, float(data.y @ data.y))
        fit = weighted_enet_fit(data, Penalty.unit(scenario.p, lambda1, lambda2), solver_config, gram=gram)
        d = fit.beta_raw - beta_star
        errs[r] = float(d @ d)

    b, B = eigen_bounds(first.X, scenario.n)
    bound = risk_bound(lambda1, lambda2, float(scenario.p), float(beta_star @ beta_star),
                       b, B, scenario.p, scenario.n, scenario.sigma)
    se = float(errs.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    out = RiskBoundResult(float(errs.mean()), se, bound, b, B, float(lambda1), float(lambda2))
    logging.info("risk bound %s n=%d seed=%d: mean=%.4f bound=%.4f", scenario.name, scenario.n, seed,
                 out.mean_sq_error, out.bound)
    return out


# ---------------- Normality ----------------
def _normality_matrix(S: np.ndarray, lambda2: float, n: int) -> np.ndarray:
    """(I + lambda2 S^-1) S^(1/2) / (1 + lambda2/n) through the eigendecomposition of S."""
    e, V = np.linalg.eigh(S)
    if e[0] <= 1e-12 * max(e[-1], 1.0):
        raise DomainError("X_A'X_A is singular")
    root = np.sqrt(e)
    return (V * ((root + lambda2 / root) / (1.0 + lambda2 / n))) @ V.T


def support_covered(fit: FitResult, scenario: Scenario) -> bool:
    """True when the fit kept every true predictor."""
    return set(scenario.support) <= set(fit.active_set)


def normality_stat(data: Dataset, fit: FitResult, scenario: Scenario, alpha, lambda2: float,
                   beta_star=None) -> float:
    """Projected standardized error z_n of the fit on the true support.

    A fit that misses true predictors still gets a value, with a warning;
    support_covered tells the two cases apart.
    """
    A = list(scenario.support)
    if not A:
        raise DomainError("empty true support")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (len(A),):
        raise ValidationError(f"alpha must have length |A|={len(A)}")
    if abs(float(np.linalg.norm(alpha)) - 1.0) > 1e-8:
        raise ValidationError("alpha must be a unit vector")
    beta_star = np.asarray(scenario.beta_star if beta_star is None else beta_star, dtype=float)
    if not support_covered(fit, scenario):
        logging.warning("normality statistic: fit misses %d true predictor(s)", len(set(A) - set(fit.active_set)))
    XA = data.X[:, A]
    M = _normality_matrix(XA.T @ XA, lambda2, data.n)
    z = float(alpha @ (M @ (np.asarray(fit.beta)[A] - beta_star[A])))
    return z


@dataclass(frozen=True, eq=False)
class NormalityResult:
    z: np.ndarray
    covered_rate: float
    sigma: float

    @property
    def mean(self) -> float:
        return float(self.z.mean())

    @property
    def sd(self) -> float:
        return float(self.z.std(ddof=1))


def normality_study(scenario: Scenario, replications: Optional[int] = None, alpha=None,
                    grid: Grid | None = None, adaptive_config: AdaptiveConfig | None = None,
                    solver_config: SolverConfig | None = None, threads: int | None = None) -> NormalityResult:
    """z_n of BIC-tuned AEnet over replications of a scenario (fixed alpha, default e_1)."""
    R = replications or scenario.replications
    k = scenario.support_size
    alpha = np.eye(k)[0] if alpha is None else np.asarray(alpha, dtype=float)
    adaptive_config = adaptive_config or AdaptiveConfig(gamma=scenario.gamma)

    def one(r):
        data, beta_star = replicate(scenario, r)
        fit, chosen = tune(data, "aenet", grid, adaptive_config, solver_config)
        return normality_stat(data, fit, scenario, alpha, chosen.lambda2, beta_star), support_covered(fit, scenario)

    threads = max(1, min(threads or THREADS, R))
    if threads == 1:
        out = [one(r) for r in range(R)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, range(R)))
    z = np.array([o[0] for o in out])
    z.setflags(write=False)
    return NormalityResult(z, float(np.mean([o[1] for o in out])), scenario.sigma)
