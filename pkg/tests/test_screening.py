import numpy as np
import pytest

from adenet.core import Dataset, ValidationError, center
from adenet.services.adaptive import AdaptiveConfig
from adenet.services.screening import d_default, sis_aenet, sis_aenet_tuned, sis_scad, sis_screen
from adenet.services.tuning import Grid, tune


@pytest.mark.parametrize("n,d", [(200, 188), (100, 118), (1, 5), (8, 22)])
def test_d_default(n, d):
    assert d_default(n) == d


def _wide(seed=0, n=50, p=200):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    # the strong columns wrap around for narrow p
    beta[np.array([3, 17, 60]) % p] = (4.0, -3.0, 3.5)
    return center(Dataset(X @ beta + 0.5 * rng.standard_normal(n), X))


def test_screen_keeps_strong_marginals():
    data = _wide()
    screen = sis_screen(data, 20)
    assert screen.d_n == 20
    assert {3, 17, 60} <= set(screen.kept)
    assert list(screen.kept) == sorted(screen.kept)
    with pytest.raises(ValidationError):
        sis_screen(data, 0)


def test_screen_ties_and_zero_columns():
    X = np.array([[1.0, 1.0, 0.0, 2.0], [-1.0, -1.0, 0.0, -2.0], [0.0, 0.0, 0.0, 0.0]])
    y = np.array([1.0, -1.0, 0.0])
    screen = sis_screen(Dataset(y, X, centered=True), 2)
    # columns 0, 1 and 3 tie after normalization; the lowest indices win
    assert screen.kept == (0, 1)
    assert screen.zero_columns == (2,)
    assert screen.scores[2] == 0.0


def test_screen_larger_than_p_keeps_everything():
    data = _wide(p=10)
    assert sis_screen(data, 50).kept == tuple(range(10))


def test_sis_aenet_on_wide_data():
    data = _wide()
    grid = Grid(n_lambda1=20, lambda2_values=(0.0, 1.0))
    fit, chosen = sis_aenet_tuned(data, 20, grid, AdaptiveConfig(gamma=2.0))
    assert fit.p == data.p
    assert {3, 17, 60} <= set(fit.active_set)
    assert chosen.method == "aenet"
    plain = sis_aenet(data, 20, grid, AdaptiveConfig(gamma=2.0))
    assert np.array_equal(plain.beta, fit.beta)


def test_sis_aenet_default_gamma_from_growth_rate():
    data = _wide()
    _, chosen = sis_aenet_tuned(data, 20, Grid(n_lambda1=10, lambda2_values=(0.0,)), nu=2.0 / 3.0)
    assert chosen.gamma == 5.0


def test_sis_scad_on_wide_data():
    data = _wide()
    fit, chosen = sis_scad(data, 20, Grid(n_lambda1=20))
    assert fit.p == data.p
    assert {3, 17, 60} <= set(fit.active_set)
    assert chosen.method == "scad"


def test_perfect_marginal_wins():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 6))
    y = X[:, 0].copy()
    assert sis_screen(center(Dataset(y, X)), 1).kept == (0,)


def test_sure_screening_rate_on_sis_design():
    from adenet.services.simulation import replicate, sis_scenario
    s = sis_scenario(200, 1000, seed=11, replications=100)
    hits = 0
    for r in range(100):
        data, _ = replicate(s, r)
        hits += set(range(8)) <= set(sis_screen(data, d_default(200)).kept)
    assert hits >= 95


@pytest.mark.parametrize("p,d_n", [(40, 40), (60, 30)])
def test_sis_aenet_on_data_wider_than_tall(p, d_n):
    data = _wide(seed=2, n=30, p=p)
    fit, chosen = sis_aenet_tuned(data, d_n, Grid(n_lambda1=10, lambda2_values=(0.0, 1.0)))
    assert chosen.gamma == 5.0
    assert fit.p == p
    assert np.all(np.isfinite(fit.beta))


def test_kept_set_ignores_response_scale_and_nests():
    data = _wide(seed=3)
    tripled = Dataset(3.0 * data.y, data.X, centered=True)
    assert sis_screen(data, 15).kept == sis_screen(tripled, 15).kept
    for d in (1, 5, 20, 60):
        assert set(sis_screen(data, d).kept) <= set(sis_screen(data, d + 1).kept)


def test_screening_everything_is_plain_aenet():
    data = _wide(p=12)
    grid = Grid(n_lambda1=10, lambda2_values=(0.0, 1.0))
    cfg = AdaptiveConfig(gamma=2.0)
    fit = sis_aenet(data, 12, grid, cfg)
    plain, _ = tune(data, "aenet", grid, cfg)
    assert np.allclose(fit.beta, plain.beta)


def test_tiny_screen_misses_most_of_the_support():
    from adenet.services.simulation import metrics, replicate, sis_scenario
    s = sis_scenario(50, 100, seed=2, replications=2)
    data, beta_star = replicate(s, 0)
    fit = sis_aenet(data, 1, Grid(n_lambda1=10, lambda2_values=(0.0,)), AdaptiveConfig(gamma=5.0))
    assert len(fit.active_set) <= 1
    assert metrics(fit.beta, s, beta_star)[2] >= 7
