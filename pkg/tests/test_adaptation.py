"""Stochastic-approximation recursions: step schedules, projections, the
covariance and rank-one shape updates, and the per-run adaptation classes."""
import logging

import numpy as np
import pytest

from aptmc.adaptation import (
    CovAdaptation,
    PooledCovAdaptation,
    RamAdaptation,
    StepSizes,
    _chol_rank1_py,
    am_update,
    chol_rank1_inplace,
    clamp_spd,
    make_shape_adaptation,
    pooled_am_update,
    ram_update,
    scale_update,
    temperature_update,
)


def random_spd(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim))
    return a @ a.T + dim * np.eye(dim)


# ---------------------------------------------------------------------------
# step sizes


def test_gammas_formula():
    sizes = StepSizes()
    np.testing.assert_allclose(sizes.gammas(1), 2.0 ** -0.6 * np.ones(3), rtol=1e-15)
    np.testing.assert_allclose(sizes.gammas(0), np.ones(3), rtol=1e-15)
    sizes = StepSizes(c=(0.5, 1.0, 2.0), xi=(0.6, 0.8, 1.0))
    n = 99
    expected = [0.5 * 100.0 ** -0.6, 100.0 ** -0.8, 2.0 / 100.0]
    np.testing.assert_allclose(sizes.gammas(n), expected, rtol=1e-15)


def test_ram_gamma_capped_then_polynomial():
    sizes = StepSizes()
    assert sizes.ram_gamma(0, 4) == 0.9
    assert sizes.ram_gamma(1, 8) == 0.9
    n, dim = 10_000, 8
    expected = dim * (n + 1.0) ** -0.6
    assert expected < 0.9
    assert sizes.ram_gamma(n, dim) == pytest.approx(expected, rel=1e-15)


def test_step_size_validation():
    with pytest.raises(ValueError, match=">= 0"):
        StepSizes(c=(-1.0, 1.0, 1.0))
    with pytest.raises(ValueError, match="<= 1"):
        StepSizes(c=(1.0, 1.5, 1.0))
    with pytest.raises(ValueError, match="exponents"):
        StepSizes(xi=(0.5, 0.6, 0.6))
    with pytest.raises(ValueError, match="exponents"):
        StepSizes(xi=(0.6, 0.6, 1.01))
    with pytest.raises(ValueError, match="three"):
        StepSizes(c=(1.0, 1.0))
    # boundary cases that must be allowed
    StepSizes(c=(0.0, 0.0, 0.0))
    StepSizes(xi=(1.0, 1.0, 1.0))


# ---------------------------------------------------------------------------
# projections


def test_clamp_spd_floors_and_ceilings_eigenvalues():
    eps = 1e-3
    out = clamp_spd(np.diag([2.0, 1e-9]), eps)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(out)), [eps, 2.0], rtol=1e-12)
    out = clamp_spd(np.array([[1e9]]), eps)
    np.testing.assert_allclose(out, [[1.0 / eps]], rtol=1e-12)


def test_clamp_spd_symmetrizes():
    mat = np.array([[1.0, 1.0], [0.0, 1.0]])
    out = clamp_spd(mat, 1e-6)
    # eigenvalues of the symmetrized matrix are 0.5 and 1.5, inside the band
    np.testing.assert_allclose(out, [[1.0, 0.5], [0.5, 1.0]], atol=1e-12)


def test_clamp_spd_batched_matches_loop():
    rng = np.random.default_rng(3)
    mats = rng.normal(size=(4, 3, 3))
    batched = clamp_spd(mats, 1e-2)
    for i in range(4):
        np.testing.assert_allclose(batched[i], clamp_spd(mats[i], 1e-2), atol=1e-12)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.5, 2.0])
def test_clamp_spd_rejects_bad_eps(eps):
    with pytest.raises(ValueError, match="eps"):
        clamp_spd(np.eye(2), eps)


# ---------------------------------------------------------------------------
# one-step recursions


def test_temperature_update_formula_and_clipping():
    rho = np.array([0.0, 1.0, 2.5])
    probs = np.array([0.5, 0.1, 0.9])
    out = temperature_update(rho, probs, 0.5, 0.234, (-10.0, 10.0))
    np.testing.assert_allclose(out, rho + 0.5 * (probs - 0.234), rtol=1e-15)
    out = temperature_update(rho, probs, 100.0, 0.234, (-1.0, 1.0))
    np.testing.assert_allclose(out, [1.0, -1.0, 1.0], rtol=1e-15)


def test_scale_update_formula_and_clipping():
    ls = np.array([-0.5, 0.5])
    probs = np.array([0.9, 0.0])
    out = scale_update(ls, probs, 0.25, 0.234, (-20.0, 20.0))
    np.testing.assert_allclose(out, ls + 0.25 * (probs - 0.234), rtol=1e-15)
    out = scale_update(ls, probs, 1e3, 0.234, (-2.0, 2.0))
    np.testing.assert_allclose(out, [2.0, -2.0], rtol=1e-15)


def test_am_update_single_step_uses_pre_update_mean():
    mu = np.zeros(2)
    cov = np.eye(2)
    x = np.array([1.0, 2.0])
    mu1, cov1 = am_update(mu, cov, x, 0.25, 1e-6)
    np.testing.assert_allclose(mu1, 0.25 * x, rtol=1e-15)
    # outer product around the old mean (zero), not the new one
    expected = 0.75 * np.eye(2) + 0.25 * np.outer(x, x)
    np.testing.assert_allclose(cov1, expected, atol=1e-12)


def test_am_update_flat_schedule_recovers_sample_mean():
    rng = np.random.default_rng(10)
    xs = rng.normal(size=(200, 3))
    mu = np.full(3, 123.0)  # forgotten at n=1 because gamma_1 = 1
    cov = np.eye(3)
    for n, x in enumerate(xs, start=1):
        mu, cov = am_update(mu, cov, x, 1.0 / n, 1e-6)
    np.testing.assert_allclose(mu, xs.mean(axis=0), atol=1e-12)


def test_am_update_converges_to_true_covariance():
    rng = np.random.default_rng(11)
    true_cov = np.array([[2.0, 0.8], [0.8, 1.0]])
    chol = np.linalg.cholesky(true_cov)
    mu = np.zeros(2)
    cov = np.eye(2)
    for n in range(1, 100_001):
        x = chol @ rng.normal(size=2)
        mu, cov = am_update(mu, cov, x, (n + 1.0) ** -0.6, 1e-6)
    err = np.linalg.norm(cov - true_cov) / np.linalg.norm(true_cov)
    assert err < 0.10, f"relative Frobenius error {err:.3f}"


def test_am_update_batched_over_levels():
    rng = np.random.default_rng(12)
    mu = rng.normal(size=(4, 3))
    cov = np.broadcast_to(np.eye(3), (4, 3, 3)).copy()
    xs = rng.normal(size=(4, 3))
    mu1, cov1 = am_update(mu, cov, xs, 0.3, 1e-6)
    for level in range(4):
        m, c = am_update(mu[level], cov[level], xs[level], 0.3, 1e-6)
        np.testing.assert_allclose(mu1[level], m, atol=1e-14)
        np.testing.assert_allclose(cov1[level], c, atol=1e-12)


def test_pooled_am_update_averages_levels():
    rng = np.random.default_rng(13)
    mu = rng.normal(size=3)
    cov = random_spd(rng, 3)
    xs = rng.normal(size=(5, 3))
    mu1, cov1 = pooled_am_update(mu, cov, xs, 0.3, 1e-6)
    np.testing.assert_allclose(mu1, 0.7 * mu + 0.3 * xs.mean(axis=0), atol=1e-14)
    outer = np.zeros((3, 3))
    for x in xs:
        outer += np.outer(x - mu, x - mu)
    outer /= len(xs)
    np.testing.assert_allclose(cov1, clamp_spd(0.7 * cov + 0.3 * outer, 1e-6), atol=1e-12)


# ---------------------------------------------------------------------------
# rank-one factor updates


def test_chol_rank1_update_matches_refactorization():
    rng = np.random.default_rng(20)
    for _ in range(50):
        a = random_spd(rng, 5)
        w = rng.normal(size=5)
        tril = np.linalg.cholesky(a)
        assert chol_rank1_inplace(tril, w.copy(), downdate=False)
        np.testing.assert_allclose(tril, np.linalg.cholesky(a + np.outer(w, w)),
                                   atol=1e-10)


def test_chol_rank1_downdate_matches_refactorization():
    rng = np.random.default_rng(21)
    for _ in range(50):
        a = random_spd(rng, 5)
        w = 0.3 * rng.normal(size=5)
        assert np.linalg.eigvalsh(a - np.outer(w, w)).min() > 0
        tril = np.linalg.cholesky(a)
        assert chol_rank1_inplace(tril, w.copy(), downdate=True)
        np.testing.assert_allclose(tril, np.linalg.cholesky(a - np.outer(w, w)),
                                   atol=1e-10)


def test_chol_rank1_downdate_reports_lost_definiteness():
    tril = np.eye(3)
    assert not chol_rank1_inplace(tril, np.array([2.0, 0.0, 0.0]), downdate=True)


def test_chol_rank1_python_fallback_agrees():
    rng = np.random.default_rng(22)
    a = random_spd(rng, 4)
    w = rng.normal(size=4)
    via_dispatch = np.linalg.cholesky(a)
    via_python = via_dispatch.copy()
    assert chol_rank1_inplace(via_dispatch, w.copy(), downdate=False)
    assert _chol_rank1_py(via_python, w.copy(), 1.0)
    np.testing.assert_allclose(via_python, via_dispatch, atol=1e-13)


def test_ram_update_matches_dense_right_hand_side():
    rng = np.random.default_rng(23)
    gamma, target = 0.3, 0.234
    for _ in range(100):
        factor = np.linalg.cholesky(random_spd(rng, 4))
        inc = rng.normal(size=4)
        prob = rng.uniform()
        out = ram_update(factor, inc, prob, gamma, target)
        u = inc / np.linalg.norm(inc)
        rhs = factor @ (np.eye(4) + gamma * (prob - target) * np.outer(u, u)) @ factor.T
        np.testing.assert_allclose(out @ out.T, rhs, atol=1e-10)
        assert np.all(np.diag(out) > 0)
        assert np.allclose(out, np.tril(out))


def test_ram_update_degenerate_inputs_leave_factor_unchanged():
    factor = np.linalg.cholesky(random_spd(np.random.default_rng(24), 3))
    out = ram_update(factor, np.zeros(3), 0.9, 0.3, 0.234)
    assert out is not factor
    np.testing.assert_array_equal(out, factor)
    out = ram_update(factor, np.ones(3), 0.234, 0.3, 0.234)
    np.testing.assert_array_equal(out, factor)


def test_ram_update_skips_step_on_failed_downdate(caplog):
    # gamma*(prob - target) < -1 makes I + coef*uu^T indefinite
    factor = np.eye(2)
    with caplog.at_level(logging.WARNING, logger="aptmc.adaptation"):
        out = ram_update(factor, np.array([1.0, 0.0]), 0.0, 5.0, 0.234)
    np.testing.assert_array_equal(out, factor)
    assert any("downdate" in rec.message for rec in caplog.records)


# ---------------------------------------------------------------------------
# adaptation classes


def make_inputs(levels, dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(levels, dim))
    probs = rng.uniform(size=levels)
    incs = rng.normal(size=(levels, dim))
    return x, probs, incs


def test_cov_adaptation_tracks_component_recursions():
    levels, dim = 3, 2
    adapt = CovAdaptation(levels, dim, 1e-6, (-20.0, 20.0), 0.234)
    np.testing.assert_array_equal(adapt.trils, np.broadcast_to(np.eye(dim), (levels, dim, dim)))
    sizes = StepSizes()
    x, probs, incs = make_inputs(levels, dim, 30)
    mu0, cov0, ls0 = adapt.mu.copy(), adapt.cov.copy(), adapt.log_scale.copy()
    adapt.update(sizes, 5, x, probs, incs)
    _, g2, g3 = sizes.gammas(5)
    mu_ref, cov_ref = am_update(mu0, cov0, x, g2, 1e-6)
    ls_ref = scale_update(ls0, probs, g3, 0.234, (-20.0, 20.0))
    np.testing.assert_allclose(adapt.mu, mu_ref, atol=1e-14)
    np.testing.assert_allclose(adapt.cov, cov_ref, atol=1e-12)
    np.testing.assert_allclose(adapt.log_scale, ls_ref, atol=1e-14)
    for level in range(levels):
        implied = adapt.trils[level] @ adapt.trils[level].T
        np.testing.assert_allclose(implied, np.exp(adapt.log_scale[level]) * adapt.cov[level],
                                   atol=1e-12)


def test_cov_adaptation_zero_gains_do_nothing():
    adapt = CovAdaptation(2, 2, 1e-6, (-20.0, 20.0), 0.234)
    x, probs, incs = make_inputs(2, 2, 31)
    adapt.update(StepSizes(c=(1.0, 0.0, 0.0)), 5, x, probs, incs)
    np.testing.assert_array_equal(adapt.mu, np.zeros((2, 2)))
    np.testing.assert_array_equal(adapt.log_scale, np.zeros(2))
    np.testing.assert_array_equal(adapt.trils, np.broadcast_to(np.eye(2), (2, 2, 2)))


def test_pooled_adaptation_shares_shape_across_levels():
    levels, dim = 4, 3
    adapt = PooledCovAdaptation(levels, dim, 1e-6, (-20.0, 20.0), 0.234)
    sizes = StepSizes()
    x, probs, incs = make_inputs(levels, dim, 32)
    mu0, cov0 = adapt.mu.copy(), adapt.cov.copy()
    adapt.update(sizes, 7, x, probs, incs)
    _, g2, g3 = sizes.gammas(7)
    mu_ref, cov_ref = pooled_am_update(mu0, cov0, x, g2, 1e-6)
    np.testing.assert_allclose(adapt.mu, mu_ref, atol=1e-14)
    np.testing.assert_allclose(adapt.cov, cov_ref, atol=1e-12)
    assert adapt.mu.shape == (dim,) and adapt.cov.shape == (dim, dim)
    base = np.linalg.cholesky(adapt.cov)
    for level in range(levels):
        np.testing.assert_allclose(adapt.trils[level],
                                   base * np.exp(0.5 * adapt.log_scale[level]),
                                   atol=1e-12)


def test_ram_adaptation_matches_per_level_helper():
    levels, dim = 3, 4
    adapt = RamAdaptation(levels, dim, 0.234)
    assert adapt.log_scale is None
    sizes = StepSizes()
    x, probs, incs = make_inputs(levels, dim, 33)
    old = adapt.trils.copy()
    adapt.update(sizes, 9, x, probs, incs)
    gamma = sizes.ram_gamma(9, dim)
    for level in range(levels):
        expected = ram_update(old[level], incs[level], float(probs[level]), gamma, 0.234)
        np.testing.assert_allclose(adapt.trils[level], expected, atol=1e-13)


def test_make_shape_adaptation_dispatch():
    args = (3, 2, 1e-6, (-20.0, 20.0), 0.234)
    assert isinstance(make_shape_adaptation("cov", *args), CovAdaptation)
    assert isinstance(make_shape_adaptation("covg", *args), PooledCovAdaptation)
    assert isinstance(make_shape_adaptation("ram", *args), RamAdaptation)
    assert make_shape_adaptation("none", *args) is None
    with pytest.raises(ValueError, match="bogus"):
        make_shape_adaptation("bogus", *args)
