import math

import numpy as np
import pytest

from adenet.core import FitResult, ValidationError
from adenet.services.adaptive import AdaptiveConfig
from adenet.services.tuning import Grid, _better, bic_score, grid_scores, tune

from conftest import random_instance


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid(lambda1_values=(1.0, 2.0))
    with pytest.raises(ValidationError):
        Grid(lambda1_values=())
    with pytest.raises(ValidationError):
        Grid(lambda2_values=())
    with pytest.raises(ValidationError):
        Grid(lambda2_values=(-1.0,))
    assert Grid(lambda1_values=[3, 2, 1]).lambda1_values == (3.0, 2.0, 1.0)


def test_default_lambda1_grid(instance):
    lam = Grid().lambda1_for(instance)
    top = 2.0 * float(np.max(np.abs(instance.X.T @ instance.y)))
    assert len(lam) == 50
    assert lam[0] == pytest.approx(top)
    assert lam[-1] == pytest.approx(top * 1e-4)
    assert np.all(np.diff(lam) < 0)


def test_weighted_lambda1_grid(instance):
    w = np.full(instance.p, 2.0)
    w[0] = np.inf
    lam = Grid().lambda1_for(instance, w)
    c = np.abs(instance.X.T @ instance.y)
    assert lam[0] == pytest.approx(2.0 * float(np.max(c[1:])) / 2.0)


def test_bic_score():
    data = random_instance(4)
    beta = np.zeros(data.p)
    beta[1] = 0.5
    fit = FitResult.build(beta, 1.0, 0.0, 1, True, 0.0)
    r = data.y - data.X @ beta
    expected = data.n * math.log(float(r @ r) / data.n) + math.log(data.n)
    assert bic_score(data, fit) == pytest.approx(expected)


def test_tie_break_prefers_larger_lambdas():
    assert _better((1.0, 5.0, 0.0), None)
    assert _better((0.5, 1.0, 0.0), (1.0, 5.0, 0.0))
    assert _better((1.0, 5.0, 0.0), (1.0, 2.0, 9.0))
    assert _better((1.0, 5.0, 1.0), (1.0, 5.0, 0.0))
    assert not _better((1.0, 5.0, 0.0), (1.0, 5.0, 1.0))


def test_unknown_method(instance):
    with pytest.raises(ValidationError):
        tune(instance, "ridge")


def test_lasso_picks_the_bic_minimum(instance):
    grid = Grid(n_lambda1=20)
    fit, chosen = tune(instance, "lasso", grid)
    assert chosen.lambda2 == 0.0
    scores = grid_scores(instance, grid.lambda1_for(instance), 0.0)
    best = min(b for _, b in scores)
    assert chosen.bic == pytest.approx(best)
    assert bic_score(instance, fit) == pytest.approx(chosen.bic)


def test_enet_and_adaptive_choices(instance):
    grid = Grid(n_lambda1=15, lambda2_values=(0.0, 1.0, 10.0))
    _, enet = tune(instance, "enet", grid)
    assert enet.lambda2 in grid.lambda2_values
    _, alasso = tune(instance, "alasso", grid, AdaptiveConfig(gamma=2.0))
    assert alasso.lambda2 == 0.0
    assert alasso.gamma == 2.0
    _, aenet = tune(instance, "aenet", grid, AdaptiveConfig(gamma=2.0))
    assert aenet.lambda1_enet is not None
    assert aenet.lambda2 in grid.lambda2_values


def test_scad_reports_its_own_lambda(instance):
    grid = Grid(n_lambda1=10)
    fit, chosen = tune(instance, "scad", grid)
    lams = grid.lambda1_for(instance) / (2.0 * instance.n)
    assert np.min(np.abs(lams - chosen.lambda1)) < 1e-12
    assert chosen.lambda2 == 0.0


def test_aenet_keeps_strong_signals():
    data = random_instance(1, n=100, p=8, sparsity=3, noise=0.5)
    fit, chosen = tune(data, "aenet", Grid(n_lambda1=30), AdaptiveConfig(gamma=1.0))
    assert {0, 1, 2} <= set(fit.active_set)
    assert fit.converged


def test_tuning_is_deterministic(instance):
    a, ca = tune(instance, "aenet", Grid(n_lambda1=10))
    b, cb = tune(instance, "aenet", Grid(n_lambda1=10))
    assert np.array_equal(a.beta, b.beta)
    assert ca == cb


def test_bic_of_null_model_on_unit_residual():
    from adenet.core import Dataset
    y = np.array([1.0, -1.0, 1.0, -1.0])
    X = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    data = Dataset(y, X, centered=True)
    assert bic_score(data, FitResult.build(np.zeros(1), 1.0, 0.0, 1, True, 0.0)) == pytest.approx(0.0)


def test_single_point_grid(instance):
    grid = Grid(lambda1_values=(3.0,), lambda2_values=(0.5,))
    fit, chosen = tune(instance, "enet", grid)
    assert (chosen.lambda1, chosen.lambda2) == (3.0, 0.5)
    from adenet.core import Penalty
    from adenet.services.solver import weighted_enet_fit
    direct = weighted_enet_fit(instance, Penalty.unit(instance.p, 3.0, 0.5))
    assert np.allclose(fit.beta, direct.beta)


def test_null_data_gives_small_models():
    from adenet.core import Dataset, center
    small = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        data = center(Dataset(rng.standard_normal(100), rng.standard_normal((100, 10))))
        fit, _ = tune(data, "lasso", Grid(n_lambda1=30))
        small += len(fit.active_set) <= 2
    assert small >= 18


def test_aenet_lambda2_is_chosen_by_the_final_fit():
    from adenet.core import Penalty
    from adenet.services.adaptive import adaptive_weights
    from adenet.services.solver import weighted_enet_fit

    data = random_instance(6, n=60, p=8, sparsity=3, noise=1.0)
    grid = Grid(n_lambda1=12, lambda2_values=(0.0, 1.0, 100.0))
    cfg = AdaptiveConfig(gamma=2.0)
    fit, chosen = tune(data, "aenet", grid, cfg)
    finals = []
    for l2 in grid.lambda2_values:
        _, enet_l2 = tune(data, "enet", Grid(n_lambda1=12, lambda2_values=(l2,)))
        stage1 = weighted_enet_fit(data, Penalty.unit(data.p, enet_l2.lambda1, l2))
        w = adaptive_weights(stage1.beta, cfg, data.n)
        scores = grid_scores(data, grid.lambda1_for(data, w), l2, w)
        finals.append((min(b for _, b in scores), l2))
    assert chosen.bic == pytest.approx(min(b for b, _ in finals))
    assert chosen.bic <= min(b for b, l2 in finals if l2 == 100.0) + 1e-9
    assert bic_score(data, fit) == pytest.approx(chosen.bic)


def test_tuned_bic_never_beats_best_subset():
    from itertools import combinations

    data = random_instance(9, n=10, p=3, sparsity=2)
    best = math.inf
    for k in range(4):
        for cols in combinations(range(3), k):
            if cols:
                coef, *_ = np.linalg.lstsq(data.X[:, cols], data.y, rcond=None)
                r = data.y - data.X[:, cols] @ coef
            else:
                r = data.y
            best = min(best, data.n * math.log(float(r @ r) / data.n) + k * math.log(data.n))
    for method in ("lasso", "enet"):
        _, chosen = tune(data, method, Grid(n_lambda1=20))
        assert chosen.bic >= best - 1e-9
