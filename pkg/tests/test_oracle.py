"""Numerical oracle: stationary swap-acceptance curve, equilibrium ladder
solve, and the exact invariance / detailed-balance audits."""
import numpy as np
import pytest

from aptmc.oracle import (
    detailed_balance_audit,
    equilibrium_rho,
    exact_swap_invariance,
    log_partition,
    stationary_swap_accept,
    stationary_swap_accept_mc,
)
from aptmc.targets import IsotropicGaussian

# Quadrature values computed once at high precision and frozen here; the MC
# cross-check below guards the quadrature path against silent regressions.
H_HALF = 0.7836531040612145
H_QUARTER = 0.5903344706017331
H_GRID = {
    0.1: 0.389964, 0.2: 0.535441, 0.3: 0.638011, 0.4: 0.718034,
    0.5: 0.783653, 0.6: 0.839139, 0.7: 0.887064, 0.8: 0.929118,
    0.9: 0.966478,
}
RHO_HAT_UNIT_NORMAL = 1.2135174870491028
BETA2_UNIT_NORMAL = 0.03455160547849863

UNIT_NORMAL = IsotropicGaussian()


def test_swap_accept_frozen_values():
    assert stationary_swap_accept(UNIT_NORMAL, 0.5, 1.0) == pytest.approx(H_HALF, abs=1e-9)
    assert stationary_swap_accept(UNIT_NORMAL, 0.25, 1.0) == pytest.approx(H_QUARTER, abs=1e-9)


def test_swap_accept_grid_strictly_increasing():
    values = [stationary_swap_accept(UNIT_NORMAL, u, 1.0) for u in sorted(H_GRID)]
    for u, value in zip(sorted(H_GRID), values):
        assert value == pytest.approx(H_GRID[u], abs=1e-5)
    assert all(a < b for a, b in zip(values, values[1:]))


def test_swap_accept_symmetric_and_unit_diagonal():
    assert stationary_swap_accept(UNIT_NORMAL, 0.7, 0.7) == 1.0
    ab = stationary_swap_accept(UNIT_NORMAL, 0.3, 0.7)
    ba = stationary_swap_accept(UNIT_NORMAL, 0.7, 0.3)
    assert ab == pytest.approx(ba, abs=1e-9)


def test_swap_accept_validation():
    with pytest.raises(ValueError, match="u must"):
        stationary_swap_accept(UNIT_NORMAL, 0.0, 1.0)
    with pytest.raises(ValueError, match="v must"):
        stationary_swap_accept(UNIT_NORMAL, 0.5, 1.2)
    with pytest.raises(ValueError, match="method"):
        stationary_swap_accept(UNIT_NORMAL, 0.5, 1.0, method="guess")


def test_swap_accept_mc_agrees_with_quadrature():
    rng = np.random.default_rng(7)
    mean, se = stationary_swap_accept_mc(UNIT_NORMAL, 0.5, 1.0, 100_000, rng)
    assert se < 0.01
    assert abs(mean - H_HALF) < 4 * se
    via_dispatch = stationary_swap_accept(UNIT_NORMAL, 0.5, 1.0, method="mc",
                                          samples=10_000, rng=np.random.default_rng(8))
    assert abs(via_dispatch - H_HALF) < 0.05


def test_log_partition_matches_gaussian_closed_form():
    for beta in (1.0, 0.25, 3.0):
        expected = 0.5 * np.log(2 * np.pi / beta)
        assert log_partition(UNIT_NORMAL, beta) == pytest.approx(expected, abs=1e-8)
    with pytest.raises(ValueError, match="positive"):
        log_partition(UNIT_NORMAL, 0.0)


def test_equilibrium_rho_unit_normal_frozen():
    sol = equilibrium_rho(UNIT_NORMAL, levels=2)
    assert not sol.saturated.any()
    assert sol.rho[0] == pytest.approx(RHO_HAT_UNIT_NORMAL, abs=1e-5)
    assert sol.residuals[0] < 1e-5
    betas = sol.betas
    assert betas[0] == 1.0
    assert betas[1] == pytest.approx(BETA2_UNIT_NORMAL, abs=1e-6)


def test_equilibrium_rho_tighter_target_smaller_spacing():
    loose = equilibrium_rho(UNIT_NORMAL, levels=2, tol=1e-2)
    tight = equilibrium_rho(UNIT_NORMAL, levels=2, accept_target=0.5, tol=1e-2)
    assert tight.rho[0] < loose.rho[0]
    assert tight.betas[1] > loose.betas[1]


def test_equilibrium_rho_saturates_without_interior_root():
    # Even the tightest allowed spacing undershoots a 0.99999 target.
    sol = equilibrium_rho(UNIT_NORMAL, levels=2, accept_target=0.99999,
                          rho_bounds=(-3.0, 10.0), tol=1e-2)
    assert sol.saturated[0]
    assert sol.rho[0] == -3.0
    # And the loosest allowed spacing overshoots a near-zero target.
    sol = equilibrium_rho(UNIT_NORMAL, levels=2, accept_target=1e-6,
                          rho_bounds=(-3.0, -2.0), tol=1e-2)
    assert sol.saturated[0]
    assert sol.rho[0] == -2.0


def test_equilibrium_rho_validation():
    with pytest.raises(ValueError, match="two levels"):
        equilibrium_rho(UNIT_NORMAL, levels=1)
    with pytest.raises(ValueError, match="accept_target"):
        equilibrium_rho(UNIT_NORMAL, levels=2, accept_target=1.0)


def test_exact_swap_invariance_uniform_weights():
    report = exact_swap_invariance(np.zeros(4), np.array([1.0, 0.5]))
    assert report.states == 16
    assert report.stationary_violation < 1e-14
    assert report.row_sum_violation < 1e-14


def test_exact_swap_invariance_random_cases():
    rng = np.random.default_rng(40)
    for _ in range(10):
        n_points = int(rng.integers(2, 6))
        levels = int(rng.integers(2, 4))
        log_weights = rng.normal(size=n_points)
        betas = np.concatenate([[1.0], np.sort(rng.uniform(0.05, 0.95, levels - 1))[::-1]])
        report = exact_swap_invariance(log_weights, betas)
        assert report.states == n_points ** levels
        assert report.stationary_violation <= 1e-12
        assert report.row_sum_violation <= 1e-12


def test_exact_swap_invariance_guards():
    weights = np.zeros(3)
    with pytest.raises(ValueError, match="decrease"):
        exact_swap_invariance(weights, np.array([1.0, 0.5, 0.7]))
    with pytest.raises(ValueError, match="decrease"):
        exact_swap_invariance(weights, np.array([0.9, 0.5]))
    with pytest.raises(ValueError, match="decrease"):
        exact_swap_invariance(weights, np.array([1.0, 0.0]))
    with pytest.raises(ValueError, match="cap"):
        exact_swap_invariance(np.zeros(100), np.array([1.0, 0.5, 0.2]), max_states=10 ** 5)


def test_detailed_balance_audit_small():
    rng = np.random.default_rng(41)
    target = IsotropicGaussian(dim=2)
    shapes = [np.linalg.cholesky(np.array([[2.0, 0.3], [0.3, 0.5]])), np.eye(2)]
    worst = detailed_balance_audit(target, [1.0, 0.2], shapes, 500, rng)
    assert worst <= 1e-10
