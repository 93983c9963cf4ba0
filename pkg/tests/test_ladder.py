import numpy as np
import pytest

from aptmc.ladder import TemperatureLadder, betas_from_rho, project_rho, rho_from_betas


def test_zero_rho_gives_e_powers():
    ladder = betas_from_rho(np.zeros(4))
    np.testing.assert_allclose(ladder.betas, np.exp(-np.arange(5.0)), rtol=1e-15)


def test_loglog2_gives_half():
    ladder = betas_from_rho(np.array([np.log(np.log(2.0))]))
    np.testing.assert_allclose(ladder.betas, [1.0, 0.5], rtol=1e-15)
    np.testing.assert_allclose(ladder.gaps(), [0.5], rtol=1e-12)


def test_monotone_for_wide_random_rho():
    rng = np.random.default_rng(0)
    tiny = np.finfo(float).tiny
    for _ in range(200):
        rho = rng.uniform(-10, 10, size=rng.integers(1, 8))
        ladder = betas_from_rho(rho)
        betas = ladder.betas
        assert betas[0] == 1.0
        assert np.all(np.diff(ladder.log_betas) < 0)   # always finite and strict
        diffs = np.diff(betas)
        assert np.all(diffs <= 0)
        # exp() underflows at wide spacings; strictness is only guaranteed
        # while the smaller beta is still a normal double
        assert np.all(diffs[betas[1:] >= tiny] < 0)
        assert betas[-1] >= 0.0


def test_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(100):
        rho = rng.uniform(-6, 3, size=rng.integers(1, 6))
        back = rho_from_betas(betas_from_rho(rho))
        np.testing.assert_allclose(back, rho, atol=1e-10)


def test_gaps_match_beta_differences():
    rng = np.random.default_rng(2)
    for _ in range(50):
        ladder = betas_from_rho(rng.uniform(-4, 2, size=5))
        np.testing.assert_allclose(ladder.gaps(), -np.diff(ladder.betas),
                                   rtol=1e-12, atol=1e-300)
        assert np.all(ladder.gaps() > 0)


def test_increasing_one_rho_lowers_only_later_betas():
    rho = np.array([0.3, -0.5, 0.1, 0.9])
    base = betas_from_rho(rho).betas
    bumped = rho.copy()
    bumped[1] += 0.7
    moved = betas_from_rho(bumped).betas
    np.testing.assert_array_equal(moved[:2], base[:2])
    assert np.all(moved[2:] < base[2:])


def test_ladder_validation():
    with pytest.raises(ValueError):
        TemperatureLadder(log_betas=np.array([0.1, -1.0]))   # top must be exact 0
    with pytest.raises(ValueError):
        TemperatureLadder(log_betas=np.array([0.0, -1.0, -1.0]))
    with pytest.raises(ValueError):
        TemperatureLadder(log_betas=np.array([0.0, -1.0, -0.5]))
    one = TemperatureLadder(log_betas=np.zeros(1))
    assert one.levels == 1


def test_project_rho():
    rho = np.array([-12.0, 0.0, 11.0])
    np.testing.assert_array_equal(project_rho(rho, (-10.0, 10.0)),
                                  [-10.0, 0.0, 10.0])
    inside = np.array([-1.0, 2.0])
    np.testing.assert_array_equal(project_rho(inside, (-10.0, 10.0)), inside)
    with pytest.raises(ValueError):
        project_rho(rho, (5.0, -5.0))
