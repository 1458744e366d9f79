import numpy as np
import pytest

from adenet.core import Dataset, Penalty, DegenerateColumnError, ValidationError, center
from adenet.services.solver import (
    SolverConfig, augmented_oracle_fit, coordinate_update, enet_path, kkt_check, kkt_scale,
    penalized_objective, scad_fit, scad_objective, scad_penalty, scad_stationarity, scad_threshold,
    soft_threshold, weighted_enet_fit,
)

from conftest import random_instance, orthogonal_instance


@pytest.mark.parametrize("z,t,expected", [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (0.5, 1.0, 0.0), (1.0, 1.0, 0.0)])
def test_soft_threshold(z, t, expected):
    assert soft_threshold(z, t) == expected


def test_coordinate_update():
    assert coordinate_update(5.0, 2.0, 1.0) == 2.0
    assert coordinate_update(-0.5, 2.0, 1.0) == 0.0
    with pytest.raises(DegenerateColumnError):
        coordinate_update(1.0, 0.0, 0.0)


def test_uncentered_data_is_rejected():
    d = Dataset(np.array([1.0, 2.0, 4.0]), np.array([[1.0], [2.0], [5.0]]))
    with pytest.raises(ValidationError):
        weighted_enet_fit(d, Penalty.unit(1, 1.0))


def test_matches_oracle_on_random_instances():
    rng = np.random.default_rng(11)
    for k in range(200):
        p = int(rng.integers(2, 7))
        data = random_instance(1000 + k, n=int(rng.integers(15, 31)), p=p, sparsity=min(2, p))
        weights = rng.uniform(0.2, 3.0, p)
        if k % 5 == 0:
            weights[0] = np.inf
        pen = Penalty(float(rng.uniform(0.1, 20.0)), float(rng.choice([0.0, 0.5, 5.0])), weights)
        cfg = SolverConfig(tol=1e-12)
        fit = weighted_enet_fit(data, pen, cfg)
        oracle = augmented_oracle_fit(data, pen, cfg)
        assert fit.converged
        assert np.max(np.abs(fit.beta - oracle.beta)) < 1e-6


def test_oracle_proximal_branch_agrees():
    data = random_instance(5, n=40, p=14, sparsity=4)
    pen = Penalty.unit(14, 15.0, 1.0)
    fit = weighted_enet_fit(data, pen, SolverConfig(tol=1e-12))
    oracle = augmented_oracle_fit(data, pen)
    assert np.max(np.abs(fit.beta - oracle.beta)) < 1e-6


def test_kkt_holds_at_convergence(instance):
    pen = Penalty.unit(instance.p, 5.0, 0.5)
    cfg = SolverConfig()
    fit = weighted_enet_fit(instance, pen, cfg)
    assert fit.converged
    assert fit.kkt_residual / kkt_scale(instance) <= 100 * cfg.tol
    assert kkt_check(instance, pen, fit.beta_raw) == pytest.approx(fit.kkt_residual)


def test_objective_trace_is_nonincreasing(instance):
    fit = weighted_enet_fit(instance, Penalty.unit(instance.p, 2.0, 1.0))
    trace = np.array(fit.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * max(1.0, trace[0]))
    assert fit.objective == pytest.approx(penalized_objective(instance, Penalty.unit(instance.p, 2.0, 1.0), fit.beta_raw))


def test_large_lambda1_gives_zero(instance):
    top = 2.0 * float(np.max(np.abs(instance.X.T @ instance.y)))
    fit = weighted_enet_fit(instance, Penalty.unit(instance.p, top * 1.001, 3.0))
    assert fit.active_set == ()
    assert np.all(fit.beta == 0)


def test_infinite_weight_keeps_coordinate_at_zero(instance):
    w = np.ones(instance.p)
    w[0] = np.inf
    fit = weighted_enet_fit(instance, Penalty(0.0, 0.0, w))
    assert fit.beta[0] == 0.0
    assert 0 not in fit.active_set


def test_rescaling_prefactor(instance):
    pen = Penalty.unit(instance.p, 1.0, 6.0)
    fit = weighted_enet_fit(instance, pen)
    assert np.allclose(fit.beta, (1 + 6.0 / instance.n) * fit.beta_raw)
    raw = weighted_enet_fit(instance, pen, SolverConfig(rescale=False))
    assert np.allclose(raw.beta, raw.beta_raw)
    std = SolverConfig(standardized=True)
    assert std.prefactor(6.0, instance.n) == 7.0


def test_zero_column_without_penalty_is_degenerate():
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [2.0, 0.0], [-2.0, 0.0]])
    d = Dataset(np.array([1.0, -1.0, 1.0, -1.0]), X, centered=True)
    with pytest.raises(DegenerateColumnError):
        weighted_enet_fit(d, Penalty.unit(2, 0.0))
    fit = weighted_enet_fit(d, Penalty.unit(2, 0.1))
    assert fit.beta[1] == 0.0


def test_orthogonal_design_is_lambda2_invariant():
    data = orthogonal_instance(2)
    w = np.array([0.5, 1.0, 2.0, 1.5, 3.0])
    fits = [weighted_enet_fit(data, Penalty(4.0, l2, w), SolverConfig(tol=1e-12)) for l2 in (0.0, 1.0, 100.0)]
    for f in fits[1:]:
        assert np.max(np.abs(f.beta - fits[0].beta)) < 1e-10


def test_enet_path_warm_starts_and_validates(instance):
    lam = np.geomspace(50.0, 0.5, 8)
    fits = enet_path(instance, lam, 1.0)
    assert len(fits) == 8
    assert len(fits[-1].active_set) >= len(fits[0].active_set)
    single = weighted_enet_fit(instance, Penalty.unit(instance.p, lam[4], 1.0))
    assert np.max(np.abs(single.beta - fits[4].beta)) < 1e-6
    with pytest.raises(ValidationError):
        enet_path(instance, [1.0, 2.0], 0.0)


# ---------------- SCAD ----------------
def test_scad_penalty_pieces():
    lam, a = 1.0, 3.7
    assert scad_penalty(0.5, lam) == pytest.approx(0.5)
    assert scad_penalty(10.0, lam) == pytest.approx((a + 1) / 2)
    mid = 2.0
    assert scad_penalty(mid, lam) == pytest.approx((2 * a * mid - mid ** 2 - 1) / (2 * (a - 1)))


@pytest.mark.parametrize("z", [0.3, 0.9, 1.5, 2.0, 2.5, 3.5, 5.0, -1.7, -6.0])
@pytest.mark.parametrize("v", [1.0, 0.6, 2.5])
def test_scad_threshold_is_global_minimizer(z, v):
    lam = 1.0
    grid = np.linspace(-8, 8, 160001)
    g = 0.5 * v * grid ** 2 - z * grid + scad_penalty(grid, lam)
    b = scad_threshold(z, v, lam)
    assert 0.5 * v * b * b - z * b + float(scad_penalty(b, lam)) <= g.min() + 1e-9


def test_scad_threshold_unit_scale_rule():
    lam, a = 1.0, 3.7
    assert scad_threshold(0.8, 1.0, lam) == 0.0
    assert scad_threshold(1.5, 1.0, lam) == pytest.approx(0.5)
    assert scad_threshold(3.0, 1.0, lam) == pytest.approx(((a - 1) * 3.0 - a * lam) / (a - 2))
    assert scad_threshold(5.0, 1.0, lam) == 5.0


def test_scad_fit_is_stationary_and_descends(instance):
    lam = 0.3
    fit = scad_fit(instance, lam)
    assert fit.converged
    assert scad_stationarity(instance, lam, fit.beta) / kkt_scale(instance) < 1e-5
    assert fit.objective <= scad_objective(instance, lam, np.zeros(instance.p))
    trace = np.array(fit.objective_trace)
    assert np.all(np.diff(trace) <= 1e-9 * max(1.0, trace[0]))


def test_scad_kills_everything_above_marginal_scale(instance):
    Xs = instance.X / np.linalg.norm(instance.X, axis=0) * np.sqrt(instance.n)
    d = center(Dataset(instance.y, Xs))
    lam = float(np.max(np.abs(d.X.T @ d.y))) / d.n * 1.01
    assert scad_fit(d, lam).active_set == ()


# ---------------- Closed forms ----------------
@pytest.mark.parametrize("l2", [0.0, 3.0])
def test_orthogonal_closed_form_and_its_kkt(l2):
    data = orthogonal_instance(4)
    pen = Penalty.unit(data.p, 6.0, l2)
    z = data.X.T @ data.y
    expected = np.sign(z) * np.maximum(np.abs(z) - 3.0, 0.0) / data.n
    fit = weighted_enet_fit(data, pen, SolverConfig(tol=1e-12))
    assert np.max(np.abs(fit.beta - expected)) < 1e-10
    raw = expected * data.n / (data.n + l2)
    assert kkt_check(data, pen, raw) <= 1e-10
    bumped = raw.copy()
    bumped[0] += 0.1
    assert kkt_check(data, pen, bumped) > 0.0


def test_oracle_ridge_closed_form_single_column():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((12, 1))
    data = center(Dataset(2.0 * x[:, 0] + rng.standard_normal(12), x))
    fit = augmented_oracle_fit(data, Penalty.unit(1, 0.0, 4.0))
    xc = data.X[:, 0]
    assert fit.beta_raw[0] == pytest.approx(float(xc @ data.y) / (float(xc @ xc) + 4.0))


def test_scad_without_penalty_is_least_squares(instance):
    fit = scad_fit(instance, 0.0, SolverConfig(tol=1e-12))
    ols, *_ = np.linalg.lstsq(instance.X, instance.y, rcond=None)
    assert np.max(np.abs(fit.beta - ols)) < 1e-8


def test_scad_leaves_large_signals_unshrunk():
    data = orthogonal_instance(1)
    lam = 0.3
    z = data.X.T @ data.y / data.n
    fit = scad_fit(data, lam, SolverConfig(tol=1e-12))
    big = np.abs(z) > 3.7 * lam
    assert big[0] and big[1]
    assert np.allclose(fit.beta[big], z[big], atol=1e-10)
    assert np.all(fit.beta[np.abs(z) <= lam] == 0.0)
