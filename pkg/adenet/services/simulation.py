# services/simulation.py
"""
Simulation designs, replicated fits and MSE / C / IC tables.

Random numbers: numpy PCG64 seeded by SeedSequence([base_seed, replication, stream]);
normals come from numpy's ziggurat standard_normal. Every replication owns its
streams, so results do not depend on thread count or scheduling.
"""
import math
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..core import Dataset, Scenario, StudyError, ValidationError, DomainError, center, env_int
from ..storage.cache import cache_key, get_cache_json, set_cache_json
from .adaptive import AdaptiveConfig
from .screening import d_default, sis_aenet_tuned, sis_scad
from .solver import SolverConfig, kkt_scale
from .tuning import Grid, tune

THREADS = env_int("ADENET_THREADS", os.cpu_count() or 1)

STREAM_DESIGN = 0
STREAM_NOISE = 1
STREAM_COEF = 2
STREAM_DIAG = 3

EXAMPLE_SIGMA = 6.0
EXAMPLE_COEF = 3.0
SIS_SIGMA = 1.5
SIS_SUPPORT = 8
SIS_SIGN_PROB = 0.4

METHODS = ("truth", "lasso", "alasso", "enet", "aenet", "scad", "sis_aenet", "sis_scad")


def rng_for(seed: int, replication: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(replication), int(stream)])))


# ---------------- Designs ----------------
def _ar1(z: np.ndarray, rho: float) -> np.ndarray:
    """x_1 = z_1, x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j along the last axis."""
    x = np.empty_like(z)
    x[..., 0] = z[..., 0]
    s = math.sqrt(1.0 - rho * rho)
    for j in range(1, z.shape[-1]):
        x[..., j] = rho * x[..., j - 1] + s * z[..., j]
    return x


def gen_ar1_row(p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= rho < 1:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    return _ar1(rng.standard_normal(p), rho)


def gen_design(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """n independent rows, each with the law of gen_ar1_row."""
    if not 0 <= rho < 1:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    return _ar1(rng.standard_normal((n, p)), rho)


# ---------------- Scenarios ----------------
def p_sqrt(n: int) -> int:
    """floor(4 n^(1/2)) - 5."""
    return math.isqrt(16 * n) - 5


def p_two_thirds(n: int) -> int:
    """floor(4 n^(2/3)) - 5, exact in integers: k <= 4 n^(2/3) <=> k^3 <= 64 n^2."""
    k = int(math.floor(4.0 * n ** (2.0 / 3.0)))
    while (k + 1) ** 3 <= 64 * n * n:
        k += 1
    while k > 0 and k ** 3 > 64 * n * n:
        k -= 1
    return k - 5


def _example_scenario(name: str, n: int, p: int, rho: float, seed: int, nu: float, gamma: float,
                      replications: int) -> Scenario:
    if p <= 0:
        raise DomainError(f"n={n} gives p={p}")
    q = p // 9
    beta = np.zeros(p)
    beta[:3 * q] = EXAMPLE_COEF
    return Scenario(n=n, p=p, rho=rho, sigma=EXAMPLE_SIGMA, beta_star=beta, support=tuple(range(3 * q)),
                    gamma=gamma, nu=nu, seed=seed, replications=replications, name=name)


def example1_scenario(n: int, rho: float, seed: int = 0, replications: int = 100) -> Scenario:
    return _example_scenario("example1", n, p_sqrt(n), rho, seed, 0.5, 3.0, replications)


def example2_scenario(n: int, rho: float, seed: int = 0, replications: int = 100) -> Scenario:
    return _example_scenario("example2", n, p_two_thirds(n), rho, seed, 2.0 / 3.0, 5.0, replications)


def a_n(n: int) -> float:
    return 4.0 * math.log(n) / math.sqrt(n)


def draw_sis_beta(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """(-1)^u (a_n + |z|) on the first 8 coordinates, u ~ Ber(0.4), z ~ N(0, 1)."""
    u = rng.random(SIS_SUPPORT) < SIS_SIGN_PROB
    z = rng.standard_normal(SIS_SUPPORT)
    beta = np.zeros(p)
    beta[:SIS_SUPPORT] = np.where(u, -1.0, 1.0) * (a_n(n) + np.abs(z))
    return beta


def sis_scenario(n: int, p: int, seed: int = 0, replications: int = 100) -> Scenario:
    if n < 2 or p < SIS_SUPPORT:
        raise DomainError(f"sis scenario needs p >= {SIS_SUPPORT}, got p={p}")
    beta = draw_sis_beta(n, p, rng_for(seed, 0, STREAM_COEF))
    # d_n = floor(5.5 n^(2/3)) grows like n^(2/3)
    nu = 2.0 / 3.0
    return Scenario(n=n, p=p, rho=0.0, sigma=SIS_SIGMA, beta_star=beta, support=tuple(range(SIS_SUPPORT)),
                    gamma=5.0, nu=nu, seed=seed, replications=replications, name="sis", design="iid",
                    redraw_beta=True, screen_size=min(d_default(n), p))


def replicate(scenario: Scenario, r: int) -> Tuple[Dataset, np.ndarray]:
    """Centered data and the true coefficients of replication r."""
    s = scenario
    beta = draw_sis_beta(s.n, s.p, rng_for(s.seed, r, STREAM_COEF)) if s.redraw_beta else np.array(s.beta_star)
    rho = 0.0 if s.design == "iid" else s.rho
    X = gen_design(s.n, s.p, rho, rng_for(s.seed, r, STREAM_DESIGN))
    eps = s.sigma * rng_for(s.seed, r, STREAM_NOISE).standard_normal(s.n)
    return center(Dataset(X @ beta + eps, X)), beta


# ---------------- Metrics ----------------
def metrics(beta_hat, scenario: Scenario, beta_star=None) -> Tuple[float, int, int]:
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_star = np.asarray(scenario.beta_star if beta_star is None else beta_star, dtype=float)
    if beta_hat.shape != beta_star.shape or beta_hat.shape != (scenario.p,):
        raise ValidationError(f"beta_hat has shape {beta_hat.shape}, expected ({scenario.p},)")
    d = beta_hat - beta_star
    if scenario.design == "iid" or scenario.rho == 0:
        mse = float(d @ d)
    else:
        mse = float(d @ scenario.covariance() @ d)
    truth = beta_star != 0
    zero = beta_hat == 0
    c = int(np.sum(zero & ~truth))
    ic = int(np.sum(zero & truth))
    return max(mse, 0.0), c, ic


@dataclass(frozen=True)
class MetricsRow:
    method: str
    mse_mean: float
    mse_se: float
    c_mean: float
    ic_mean: float
    exact_support_rate: float


@dataclass(frozen=True, eq=False)
class MetricsTable:
    scenario: Scenario
    rows: Tuple[MetricsRow, ...]
    nonconverged: int = 0
    max_kkt: float = 0.0

    def row(self, method: str) -> MetricsRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


# ---------------- Study ----------------
def _solver_key(cfg: SolverConfig) -> dict:
    return asdict(cfg)


def _grid_key(grid: Grid) -> dict:
    return asdict(grid)


def fit_method(data: Dataset, method: str, scenario: Scenario, beta_star, grid: Grid,
               adaptive_config: AdaptiveConfig, solver_config: SolverConfig) -> dict:
    """One method on one replication: metrics plus convergence record."""
    if method == "truth":
        beta, converged, kkt = np.asarray(beta_star, dtype=float), True, 0.0
    else:
        if method == "sis_aenet":
            d_n = scenario.screen_size or d_default(data.n)
            fit, _ = sis_aenet_tuned(data, d_n, grid, adaptive_config, solver_config, nu=scenario.nu)
        elif method == "sis_scad":
            fit, _ = sis_scad(data, scenario.screen_size or d_default(data.n), grid, solver_config)
        else:
            fit, _ = tune(data, method, grid, adaptive_config, solver_config)
        beta, converged = fit.beta, fit.converged
        kkt = fit.kkt_residual / kkt_scale(data)
    mse, c, ic = metrics(beta, scenario, beta_star)
    support = set(int(j) for j in np.flatnonzero(beta_star))
    exact = set(int(j) for j in np.flatnonzero(beta)) == support
    return {"mse": mse, "c": c, "ic": ic, "exact": bool(exact), "converged": bool(converged), "kkt": float(kkt)}


def _replication(scenario, r, methods, grid, adaptive_config, solver_config, use_cache) -> List[dict]:
    keys = {}
    out: Dict[str, dict] = {}
    if use_cache:
        for m in methods:
            keys[m] = cache_key("rep", {
                "scenario": scenario.key(), "method": m, "r": r, "grid": _grid_key(grid),
                "adaptive": asdict(adaptive_config), "solver": _solver_key(solver_config),
            })
            hit = get_cache_json(keys[m])
            if hit is not None:
                out[m] = hit
    todo = [m for m in methods if m not in out]
    if todo:
        try:
            data, beta_star = replicate(scenario, r)
            for m in todo:
                rec = fit_method(data, m, scenario, beta_star, grid, adaptive_config, solver_config)
                out[m] = rec
                if use_cache:
                    set_cache_json(keys[m], rec)
        except Exception as e:
            raise StudyError(f"replication {r} of {scenario.name} (seed {scenario.seed}) failed: {e}",
                             seed=scenario.seed, replication=r) from e
    return [out[m] for m in methods]


def run_study(scenario: Scenario, methods: Sequence[str], grid: Grid | None = None,
              adaptive_config: AdaptiveConfig | None = None,
              solver_config: SolverConfig | None = None,
              threads: int | None = None, use_cache: bool = True) -> MetricsTable:
    if scenario.replications < 2:
        raise ValidationError("a study needs at least 2 replications")
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise ValidationError(f"unknown or empty methods: {unknown}")
    grid = grid or Grid()
    adaptive_config = adaptive_config or AdaptiveConfig(gamma=scenario.gamma)
    solver_config = solver_config or SolverConfig()
    threads = max(1, min(threads or THREADS, scenario.replications))
    R = scenario.replications

    logging.info("study %s: n=%d p=%d |A|=%d rho=%.2f reps=%d methods=%s threads=%d",
                 scenario.name, scenario.n, scenario.p, scenario.support_size, scenario.rho, R,
                 ",".join(methods), threads)

    def task(r):
        return _replication(scenario, r, list(methods), grid, adaptive_config, solver_config, use_cache)

    if threads == 1:
        per_rep = [task(r) for r in range(R)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(task, range(R)))

    rows, nonconv, max_kkt = [], 0, 0.0
    for i, m in enumerate(methods):
        recs = [per_rep[r][i] for r in range(R)]
        mse = np.array([rec["mse"] for rec in recs])
        rows.append(MetricsRow(
            method=m,
            mse_mean=float(mse.mean()),
            mse_se=float(mse.std(ddof=1) / math.sqrt(R)),
            c_mean=float(np.mean([rec["c"] for rec in recs])),
            ic_mean=float(np.mean([rec["ic"] for rec in recs])),
            exact_support_rate=float(np.mean([rec["exact"] for rec in recs])),
        ))
        bad = sum(1 for rec in recs if not rec["converged"])
        if bad:
            logging.warning("study %s: %s did not converge in %d of %d replications", scenario.name, m, bad, R)
        nonconv += bad
        max_kkt = max(max_kkt, max(rec["kkt"] for rec in recs))
    logging.info("study %s n=%d done", scenario.name, scenario.n)
    return MetricsTable(scenario, tuple(rows), nonconv, max_kkt)


def support_trend(ns: Sequence[int], rho: float, method: str = "aenet", replications: int = 100,
                  seed: int = 0, factory=example1_scenario, **kwargs) -> List[Tuple[int, float]]:
    """Exact-support rate of one method across sample sizes."""
    out = []
    for n in ns:
        table = run_study(factory(n, rho, seed, replications), [method], **kwargs)
        out.append((n, table.rows[0].exact_support_rate))
    return out


# ---------------- Paper tables ----------------
@dataclass(frozen=True)
class TableLayout:
    factory: str                       # example1 | example2 | sis
    rhos: Tuple[float, ...]
    desk_ns: Tuple[int, ...]
    full_ns: Tuple[int, ...]
    methods: Tuple[str, ...]
    p: int | None = None               # fixed p for the screening table


TABLES = {
    "table1": TableLayout("example1", (0.5, 0.75), (100, 200), (100, 200, 400),
                          ("truth", "lasso", "alasso", "enet", "aenet", "scad")),
    "table2": TableLayout("example2", (0.5, 0.75), (100,), (100, 200, 800),
                          ("truth", "lasso", "alasso", "enet", "aenet", "scad")),
    "table3": TableLayout("sis", (0.0,), (200,), (200,), ("truth", "sis_aenet", "sis_scad"), p=1000),
}


def table_scenarios(table: str, scale: str = "desk", replications: int = 100, seed: int = 0) -> List[Scenario]:
    if table not in TABLES:
        raise ValidationError(f"unknown table {table!r}")
    if scale not in ("desk", "full"):
        raise ValidationError(f"unknown scale {scale!r}")
    layout = TABLES[table]
    ns = layout.desk_ns if scale == "desk" else layout.full_ns
    out = []
    for rho in layout.rhos:
        for n in ns:
            if layout.factory == "example1":
                out.append(example1_scenario(n, rho, seed, replications))
            elif layout.factory == "example2":
                out.append(example2_scenario(n, rho, seed, replications))
            else:
                out.append(sis_scenario(n, layout.p, seed, replications))
    return out
