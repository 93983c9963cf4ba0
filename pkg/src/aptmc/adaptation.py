"""Stochastic-approximation updates for ladder spacings, proposal
covariances, and proposal scales.

Three shape-adaptation families share one interface: per-level covariance
estimation with per-level log-scale tuning ("cov"), a pooled covariance
common to all levels with per-level scales ("covg"), and a rank-one
factor recursion that folds scale tuning into the factor itself ("ram").
All recursions are Rao-Blackwellized: they consume acceptance
probabilities, never accept/reject indicators.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None


# ---------------------------------------------------------------------------
# step sizes

@dataclass(frozen=True)
class StepSizes:
    """Polynomially decaying gains c_i * (n+1)^(-xi_i) for the temperature,
    shape, and scale recursions (i = 1, 2, 3).  A zero coefficient switches
    that recursion off."""

    c: tuple[float, float, float] = (1.0, 1.0, 1.0)
    xi: tuple[float, float, float] = (0.6, 0.6, 0.6)

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        object.__setattr__(self, "xi", tuple(float(v) for v in self.xi))
        if len(self.c) != 3 or len(self.xi) != 3:
            raise ValueError("need exactly three coefficients and exponents")
        if any(v < 0 for v in self.c):
            raise ValueError("step size coefficients must be >= 0")
        if self.c[1] > 1:
            raise ValueError("shape step coefficient must be <= 1 "
                             "(the covariance recursion is a convex combination)")
        if any(not 0.5 < x <= 1.0 for x in self.xi):
            raise ValueError("step size exponents must lie in (1/2, 1]")

    def gammas(self, n: int) -> np.ndarray:
        """(gamma_1, gamma_2, gamma_3) at iteration n >= 1."""
        return np.asarray(self.c) * float(n + 1) ** (-np.asarray(self.xi))

    def ram_gamma(self, n: int, dim: int) -> float:
        """Shape gain for the rank-one recursion: the dimension-boosted
        schedule min(0.9, dim * c_2 * (n+1)^(-xi_2))."""
        return min(0.9, dim * self.c[1] * float(n + 1) ** (-self.xi[1]))


# ---------------------------------------------------------------------------
# projections

def clamp_spd(mats: np.ndarray, eps: float) -> np.ndarray:
    """Symmetrize and clamp eigenvalues into [eps, 1/eps]; batched over
    leading axes."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    sym = 0.5 * (mats + np.swapaxes(mats, -1, -2))
    w, v = np.linalg.eigh(sym)
    w = np.clip(w, eps, 1.0 / eps)
    return (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)


# ---------------------------------------------------------------------------
# recursions (pure functions, one step each)

def temperature_update(rho: np.ndarray, swap_probs: np.ndarray, gamma1: float,
                       accept_target: float, bounds: tuple[float, float]) -> np.ndarray:
    """All L-1 spacing parameters move together, driven by that iteration's
    adjacent-pair acceptance probabilities at the current state."""
    return np.clip(rho + gamma1 * (np.asarray(swap_probs) - accept_target), *bounds)


def am_update(mu: np.ndarray, cov: np.ndarray, x: np.ndarray, gamma2: float,
              eps: float) -> tuple[np.ndarray, np.ndarray]:
    """One covariance-estimation step.  The outer product is taken around the
    pre-update mean, and the mean moves second; batched over leading axes."""
    diff = x - mu
    cov_new = clamp_spd((1.0 - gamma2) * cov + gamma2 * (diff[..., :, None] * diff[..., None, :]), eps)
    mu_new = (1.0 - gamma2) * mu + gamma2 * x
    return mu_new, cov_new


def pooled_am_update(mu: np.ndarray, cov: np.ndarray, xs: np.ndarray, gamma2: float,
                     eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Covariance step pooling all levels: level-averaged outer products
    around the pre-update mean, then the mean moves to the level average."""
    diff = xs - mu[None, :]
    outer = diff.T @ diff / xs.shape[0]
    cov_new = clamp_spd((1.0 - gamma2) * cov + gamma2 * outer, eps)
    mu_new = (1.0 - gamma2) * mu + gamma2 * xs.mean(axis=0)
    return mu_new, cov_new


def scale_update(log_scale: np.ndarray, accept_probs: np.ndarray, gamma3: float,
                 accept_target: float, bounds: tuple[float, float]) -> np.ndarray:
    """Per-level log proposal scale chasing the target acceptance rate."""
    return np.clip(log_scale + gamma3 * (np.asarray(accept_probs) - accept_target), *bounds)


def _chol_rank1_py(tril: np.ndarray, w: np.ndarray, sign: float) -> bool:
    d = tril.shape[0]
    for k in range(d):
        r2 = tril[k, k] * tril[k, k] + sign * w[k] * w[k]
        if r2 <= 0.0:
            return False
        r = np.sqrt(r2)
        c = r / tril[k, k]
        s = w[k] / tril[k, k]
        tril[k, k] = r
        if k + 1 < d:
            tail = (tril[k + 1:, k] + sign * s * w[k + 1:]) / c
            tril[k + 1:, k] = tail
            w[k + 1:] = c * w[k + 1:] - s * tail
    return True


if njit is not None:
    @njit(cache=True)
    def _chol_rank1_nb(tril, w, sign):  # pragma: no cover - compiled
        d = tril.shape[0]
        for k in range(d):
            r2 = tril[k, k] * tril[k, k] + sign * w[k] * w[k]
            if r2 <= 0.0:
                return False
            r = np.sqrt(r2)
            c = r / tril[k, k]
            s = w[k] / tril[k, k]
            tril[k, k] = r
            for i in range(k + 1, d):
                tail = (tril[i, k] + sign * s * w[i]) / c
                tril[i, k] = tail
                w[i] = c * w[i] - s * tail
        return True

    _chol_rank1 = _chol_rank1_nb
else:  # pragma: no cover - exercised only without numba
    _chol_rank1 = _chol_rank1_py


def chol_rank1_inplace(tril: np.ndarray, w: np.ndarray, downdate: bool) -> bool:
    """Rank-one update (or downdate) of a lower Cholesky factor in place:
    tril tril^T +/- w w^T.  ``w`` is consumed as workspace.  Returns False,
    leaving ``tril`` partially modified, if a downdate loses positive
    definiteness; callers treat that as 'skip the step'."""
    return bool(_chol_rank1(tril, w, -1.0 if downdate else 1.0))


def ram_update(factor: np.ndarray, increment: np.ndarray, accept_prob: float,
               gamma: float, accept_target: float) -> np.ndarray:
    """One rank-one shape step: with u the unit proposal direction, the new
    factor satisfies F F^T = F_old (I + gamma*(prob - target) u u^T) F_old^T,
    computed as a rank-one update/downdate (never a refactorization)."""
    norm = float(np.sqrt(increment @ increment))
    coef = gamma * (accept_prob - accept_target)
    if norm == 0.0 or coef == 0.0:
        return factor.copy()
    w = (factor @ increment) * (np.sqrt(abs(coef)) / norm)
    out = factor.copy()
    if not chol_rank1_inplace(out, w, downdate=coef < 0.0):
        logger.warning("rank-one downdate lost positive definiteness; step skipped")
        return factor.copy()
    return out


# ---------------------------------------------------------------------------
# per-run adaptation state, one instance per sampler

class ShapeAdaptation:
    """Interface: ``trils`` holds per-level lower factors of the proposal
    covariance, ``update`` advances them from one iteration's moves."""

    mode: str
    trils: np.ndarray
    log_scale: np.ndarray | None

    def update(self, sizes: StepSizes, n: int, x: np.ndarray,
               accept_probs: np.ndarray, increments: np.ndarray) -> None:
        raise NotImplementedError


class CovAdaptation(ShapeAdaptation):
    """Per-level covariance and mean estimates, per-level log scales."""

    mode = "cov"

    def __init__(self, levels: int, dim: int, eps: float,
                 scale_bounds: tuple[float, float], accept_target: float):
        self.eps = eps
        self.scale_bounds = scale_bounds
        self.accept_target = accept_target
        self.mu = np.zeros((levels, dim))
        self.cov = np.broadcast_to(np.eye(dim), (levels, dim, dim)).copy()
        self.log_scale = np.zeros(levels)
        self.trils = self.cov.copy()

    def update(self, sizes, n, x, accept_probs, increments):
        _, g2, g3 = sizes.gammas(n)
        if g2 > 0:
            self.mu, self.cov = am_update(self.mu, self.cov, x, g2, self.eps)
        if g3 > 0:
            self.log_scale = scale_update(self.log_scale, accept_probs, g3,
                                          self.accept_target, self.scale_bounds)
        if g2 > 0 or g3 > 0:
            self.trils = np.linalg.cholesky(self.cov) * np.exp(0.5 * self.log_scale)[:, None, None]


class PooledCovAdaptation(ShapeAdaptation):
    """One covariance and mean shared by all levels, per-level log scales."""

    mode = "covg"

    def __init__(self, levels: int, dim: int, eps: float,
                 scale_bounds: tuple[float, float], accept_target: float):
        self.eps = eps
        self.scale_bounds = scale_bounds
        self.accept_target = accept_target
        self.levels = levels
        self.mu = np.zeros(dim)
        self.cov = np.eye(dim)
        self.log_scale = np.zeros(levels)
        self.trils = np.broadcast_to(np.eye(dim), (levels, dim, dim)).copy()

    def update(self, sizes, n, x, accept_probs, increments):
        _, g2, g3 = sizes.gammas(n)
        if g2 > 0:
            self.mu, self.cov = pooled_am_update(self.mu, self.cov, x, g2, self.eps)
        if g3 > 0:
            self.log_scale = scale_update(self.log_scale, accept_probs, g3,
                                          self.accept_target, self.scale_bounds)
        if g2 > 0 or g3 > 0:
            base = np.linalg.cholesky(self.cov)
            self.trils = base[None, :, :] * np.exp(0.5 * self.log_scale)[:, None, None]


class RamAdaptation(ShapeAdaptation):
    """Per-level rank-one factor recursion; the factors are themselves the
    proposal factors, with no separate scale parameter."""

    mode = "ram"
    log_scale = None

    def __init__(self, levels: int, dim: int, accept_target: float):
        self.accept_target = accept_target
        self.dim = dim
        self.trils = np.broadcast_to(np.eye(dim), (levels, dim, dim)).copy()

    def update(self, sizes, n, x, accept_probs, increments):
        gamma = sizes.ram_gamma(n, self.dim)
        if gamma <= 0:
            return
        for level in range(self.trils.shape[0]):
            z = increments[level]
            norm = float(np.sqrt(z @ z))
            coef = gamma * (float(accept_probs[level]) - self.accept_target)
            if norm == 0.0 or coef == 0.0:
                continue
            w = (self.trils[level] @ z) * (np.sqrt(abs(coef)) / norm)
            if coef > 0.0:
                chol_rank1_inplace(self.trils[level], w, downdate=False)
            else:
                # Downdates can fail in principle, so run them on a scratch
                # copy and keep the old factor when they do.
                scratch = self.trils[level].copy()
                if chol_rank1_inplace(scratch, w, downdate=True):
                    self.trils[level] = scratch
                else:
                    logger.warning("rank-one downdate lost positive definiteness "
                                   "at level %d, iteration %d; step skipped",
                                   level + 1, n)


def make_shape_adaptation(mode: str, levels: int, dim: int, eps: float,
                          scale_bounds: tuple[float, float],
                          accept_target: float) -> ShapeAdaptation | None:
    if mode == "cov":
        return CovAdaptation(levels, dim, eps, scale_bounds, accept_target)
    if mode == "covg":
        return PooledCovAdaptation(levels, dim, eps, scale_bounds, accept_target)
    if mode == "ram":
        return RamAdaptation(levels, dim, accept_target)
    if mode == "none":
        return None
    raise ValueError(f"unknown adaptation mode {mode!r}")
