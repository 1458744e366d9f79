# adenet/core.py
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np

CENTER_TOL = 1e-10


# ---------------- Errors ----------------
class ValidationError(ValueError):
    """Bad shapes, non-finite data, bad configuration."""


class InputFormatError(ValidationError):
    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.column = column


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateColumnError(ArithmeticError):
    """A coordinate subproblem has no unique minimizer."""


class StudyError(RuntimeError):
    def __init__(self, message: str, seed: int | None = None, replication: int | None = None):
        super().__init__(message)
        self.seed = seed
        self.replication = replication


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------- Dataset ----------------
@dataclass(frozen=True, eq=False)
class Dataset:
    y: np.ndarray
    X: np.ndarray
    centered: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if y.ndim != 1:
            raise ValidationError("y must be a vector")
        if X.ndim != 2:
            raise ValidationError("X must be a matrix")
        n, p = X.shape
        if y.shape[0] != n:
            raise ValidationError(f"y has {y.shape[0]} rows, X has {n}")
        if n < 2 or p < 1:
            raise ValidationError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValidationError("non-finite entries in y or X")
        if self.centered:
            scale = max(1.0, float(np.max(np.abs(y))), float(np.max(np.abs(X))))
            if abs(y.mean()) > CENTER_TOL * scale or np.max(np.abs(X.mean(axis=0))) > CENTER_TOL * scale:
                raise ValidationError("dataset flagged centered but means are not zero")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "X", _frozen(X))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def select(self, columns) -> "Dataset":
        idx = np.asarray(columns, dtype=int)
        return Dataset(self.y, self.X[:, idx], centered=self.centered)


def center(dataset: Dataset) -> Dataset:
    y = dataset.y - dataset.y.mean()
    X = dataset.X - dataset.X.mean(axis=0)
    # a second pass removes the rounding left by the first one
    y = y - y.mean()
    X = X - X.mean(axis=0)
    return Dataset(y, X, centered=True)


def standardize(dataset: Dataset) -> Tuple[Dataset, np.ndarray]:
    """Scale columns to unit L2 norm. Returns the scaled dataset and the column norms;
    zero columns are left as they are (norm reported as 0)."""
    norms = np.sqrt(np.sum(dataset.X ** 2, axis=0))
    safe = np.where(norms > 0, norms, 1.0)
    return Dataset(dataset.y, dataset.X / safe, centered=dataset.centered), norms


# ---------------- Penalty ----------------
@dataclass(frozen=True, eq=False)
class Penalty:
    lambda1: float
    lambda2: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValidationError("weights must be a vector")
        if np.isnan(self.lambda1) or np.isnan(self.lambda2) or np.any(np.isnan(w)):
            raise ValidationError("NaN in penalty")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValidationError("lambda1 and lambda2 must be nonnegative")
        if np.any(w < 0):
            raise ValidationError("weights must be nonnegative")
        if not np.isfinite(self.lambda1) or not np.isfinite(self.lambda2):
            raise ValidationError("lambda1 and lambda2 must be finite")
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def unit(cls, p: int, lambda1: float, lambda2: float = 0.0) -> "Penalty":
        return cls(lambda1, lambda2, np.ones(p))

    @property
    def excluded(self) -> np.ndarray:
        """Coordinates frozen at zero (weight +inf)."""
        return np.isinf(self.weights)

    def thresholds(self) -> np.ndarray:
        """Per-coordinate lambda1*w_j with excluded coordinates mapped to +inf."""
        w = np.where(self.excluded, 0.0, self.weights)
        t = self.lambda1 * w
        return np.where(self.excluded, np.inf, t)


# ---------------- FitResult ----------------
@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    beta_raw: np.ndarray
    active_set: Tuple[int, ...]
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    objective_trace: Tuple[float, ...] = ()

    @classmethod
    def build(cls, beta_raw, prefactor: float, objective: float, iterations: int,
              converged: bool, kkt_residual: float, objective_trace=()) -> "FitResult":
        beta_raw = np.asarray(beta_raw, dtype=float)
        beta = prefactor * beta_raw if prefactor != 1.0 else beta_raw.copy()
        active = tuple(int(j) for j in np.flatnonzero(beta))
        return cls(_frozen(beta), _frozen(beta_raw), active, float(objective), int(iterations),
                   bool(converged), float(kkt_residual), tuple(float(v) for v in objective_trace))

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def scatter(self, kept, p: int) -> "FitResult":
        """Embed a fit on a column subset back into length p (zeros elsewhere)."""
        kept = np.asarray(kept, dtype=int)
        beta = np.zeros(p)
        raw = np.zeros(p)
        beta[kept] = self.beta
        raw[kept] = self.beta_raw
        active = tuple(int(j) for j in np.flatnonzero(beta))
        return FitResult(_frozen(beta), _frozen(raw), active, self.objective, self.iterations,
                         self.converged, self.kkt_residual, self.objective_trace)


# ---------------- Scenario ----------------
@dataclass(frozen=True, eq=False)
class Scenario:
    n: int
    p: int
    rho: float
    sigma: float
    beta_star: np.ndarray
    support: Tuple[int, ...]
    gamma: float
    nu: float
    seed: int
    replications: int
    name: str = "custom"
    design: str = "ar1"                    # ar1 | iid
    redraw_beta: bool = False              # sis: coefficients drawn per replication
    screen_size: int | None = None         # d_n for screening scenarios

    def __post_init__(self):
        b = np.asarray(self.beta_star, dtype=float)
        if self.n < 2 or self.p < 1:
            raise ValidationError(f"bad scenario size n={self.n}, p={self.p}")
        if b.shape != (self.p,):
            raise ValidationError("beta_star must have length p")
        if not 0 <= self.rho < 1:
            raise ValidationError("rho must lie in [0, 1)")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if not 0 <= self.nu < 1:
            raise ValidationError("nu must lie in [0, 1)")
        if not self.gamma > 2 * self.nu / (1 - self.nu):
            raise ValidationError(f"gamma={self.gamma} must exceed 2nu/(1-nu) for nu={self.nu}")
        if self.replications < 1:
            raise ValidationError("replications must be positive")
        if self.design not in ("ar1", "iid"):
            raise ValidationError(f"unknown design {self.design!r}")
        support = tuple(sorted(int(j) for j in self.support))
        if support != tuple(int(j) for j in np.flatnonzero(b)):
            raise ValidationError("support does not match beta_star")
        if len(support) > self.p:
            raise ValidationError("support larger than p")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "beta_star", _frozen(b))

    @property
    def support_size(self) -> int:
        return len(self.support)

    def covariance(self) -> np.ndarray:
        """Population covariance of one predictor row."""
        if self.design == "iid" or self.rho == 0:
            return np.eye(self.p)
        idx = np.arange(self.p)
        return self.rho ** np.abs(np.subtract.outer(idx, idx))

    def key(self) -> dict:
        """JSON-able identity of the scenario, used for cache keys."""
        return {
            "name": self.name, "n": self.n, "p": self.p, "rho": self.rho, "sigma": self.sigma,
            "beta_star": [float(v) for v in self.beta_star], "gamma": self.gamma, "nu": self.nu,
            "seed": self.seed, "design": self.design, "redraw_beta": self.redraw_beta,
            "screen_size": self.screen_size,
        }


# ---------------- Env helpers ----------------
def env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        logging.warning("%s=%r is not an integer, using %s", name, raw, default)
        return default


def env_float(name: str, default: float) -> float:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return float(raw)
    except ValueError:
        logging.warning("%s=%r is not a number, using %s", name, raw, default)
        return default


def env_flag(name: str, default: str = "0") -> bool:
    return os.getenv(name, default).strip().lower() in ("1", "true", "on", "yes")
