"""Independent numerical ground truth for the swap mechanics.

Three instruments, none sharing code with the sampler: the stationary swap
acceptance rate between two tempering exponents (a double integral over the
tempered densities, by adaptive quadrature or Monte Carlo); the equilibrium
ladder solving acceptance = target level by level; and exact finite-state /
randomized detailed-balance checks of the kernel algebra.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class OracleError(RuntimeError):
    """Quadrature failed to converge to the requested accuracy."""


def _quad(fn, lo, hi, epsabs=1e-11, epsrel=1e-10, what="integral"):
    value, err = integrate.quad(fn, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=200)
    if err > max(1e-8, 1e-6 * abs(value)):
        raise OracleError(f"{what}: estimated error {err:.3e} for value {value:.6e}")
    return value


def log_partition(target, beta: float) -> float:
    """log of the normalizing constant of the 1-D density exp(beta * log pi)."""
    if beta <= 0:
        raise ValueError("tempering exponent must be positive")
    # Peel off the density's maximum so the integrand is O(1).
    peak = target.log_density(np.zeros(target.dim))
    value = _quad(lambda x: np.exp(beta * (target.log_density(np.array([x])) - peak)),
                  -np.inf, np.inf, what=f"partition at beta={beta}")
    return float(np.log(value) + beta * peak)


def stationary_swap_accept(target, u: float, v: float, method: str = "quadrature",
                           samples: int = 10 ** 6,
                           rng: np.random.Generator | None = None) -> float:
    """Mean acceptance probability of a swap between independent states drawn
    from the tempered densities with exponents u and v:

        E[ 1 ^ (pi(Y)/pi(X))^(v-u) ],   X ~ pi^v / Z(v),  Y ~ pi^u / Z(u).

    Symmetric in (u, v); equals 1 at u = v.  The target must be 1-D for the
    quadrature method and must provide ``sample_tempered`` for the MC method.
    """
    for name, val in (("u", u), ("v", v)):
        if not 0 < val <= 1:
            raise ValueError(f"{name} must lie in (0, 1], got {val}")
    if u == v:
        return 1.0
    if method == "mc":
        mean, _ = stationary_swap_accept_mc(target, u, v, samples, rng)
        return mean
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if target.dim != 1:
        raise ValueError("quadrature path requires a 1-D target")
    gap = v - u
    log_zu = log_partition(target, u)
    log_zv = log_partition(target, v)

    def inner(x: float) -> float:
        lx = target.log_density(np.array([x]))

        def f(y: float) -> float:
            ly = target.log_density(np.array([y]))
            return np.exp(min(0.0, gap * (ly - lx)) + u * ly - log_zu)

        # Split at +-|x|: for symmetric unimodal targets the acceptance kink
        # sits there, and adaptive panels on smooth pieces converge fast.
        # The split is merely a panel boundary, so it stays correct (just
        # less economical) for targets where the kink lies elsewhere.
        ax = abs(x)
        total = 0.0
        for lo, hi in ((-np.inf, -ax), (-ax, ax), (ax, np.inf)):
            if lo < hi:
                total += integrate.quad(f, lo, hi, epsabs=1e-11, epsrel=1e-9,
                                        limit=200)[0]
        return total

    def outer(x: float) -> float:
        return inner(x) * np.exp(v * target.log_density(np.array([x])) - log_zv)

    value, err = integrate.quad(outer, -np.inf, np.inf, epsabs=1e-9, epsrel=1e-8,
                                limit=200)
    if err > 1e-6:
        raise OracleError(f"swap-rate quadrature error {err:.3e} at (u={u}, v={v})")
    return float(min(1.0, max(0.0, value)))


def stationary_swap_accept_mc(target, u: float, v: float, samples: int,
                              rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Monte Carlo version, returning (estimate, standard error)."""
    if rng is None:
        rng = np.random.default_rng(0)
    x = target.sample_tempered(v, samples, rng)
    y = target.sample_tempered(u, samples, rng)
    vals = np.exp(np.minimum(0.0, (v - u) * (target.log_density_many(y)
                                             - target.log_density_many(x))))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))


@dataclass
class LadderSolution:
    """Equilibrium spacings, the acceptance residual at each, and whether the
    root escaped the bracket (a saturated level, clamped at the bound)."""

    rho: np.ndarray
    residuals: np.ndarray
    saturated: np.ndarray
    accept_target: float

    @property
    def betas(self) -> np.ndarray:
        log_betas = np.concatenate([[0.0], -np.cumsum(np.exp(self.rho))])
        return np.exp(log_betas)


def equilibrium_rho(target, levels: int, accept_target: float = 0.234,
                    rho_bounds: tuple[float, float] = (-10.0, 10.0),
                    tol: float = 1e-6, method: str = "quadrature") -> LadderSolution:
    """Solve, level by level, for the spacing making the stationary swap rate
    of each adjacent pair equal to ``accept_target``.

    The rate is strictly decreasing in the spacing, so plain bisection on
    each rho component converges; a bracket end with the wrong sign means no
    interior root (the recursion would saturate at the clamp) and is
    reported, not raised.
    """
    if levels < 2:
        raise ValueError("need at least two levels")
    if not 0 < accept_target < 1:
        raise ValueError("accept_target must lie in (0, 1)")
    lo_bound, hi_bound = rho_bounds
    rho = np.empty(levels - 1)
    residuals = np.empty(levels - 1)
    saturated = np.zeros(levels - 1, dtype=bool)
    v = 1.0
    for level in range(levels - 1):
        def excess(r: float) -> float:
            u = v * np.exp(-np.exp(r))
            if u < 1e-12 * v:
                # Spacing so wide the acceptance rate is numerically zero;
                # skip the quadrature, whose scales would be degenerate.
                return -accept_target
            return stationary_swap_accept(target, u, v, method=method) - accept_target

        lo, hi = lo_bound, hi_bound
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo < 0 or f_hi > 0:
            # No sign change: the tightest (loosest) allowed spacing still
            # under(over)shoots; the recursion parks at the nearer bound.
            root = lo if abs(f_lo) <= abs(f_hi) else hi
            saturated[level] = True
            residuals[level] = min(abs(f_lo), abs(f_hi))
        else:
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if excess(mid) >= 0:
                    lo = mid
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
            residuals[level] = abs(excess(root))
        rho[level] = root
        v *= np.exp(-np.exp(root))
    return LadderSolution(rho, residuals, saturated, accept_target)


@dataclass
class InvarianceReport:
    stationary_violation: float
    row_sum_violation: float
    states: int


def exact_swap_invariance(log_weights: np.ndarray, betas: np.ndarray,
                          max_states: int = 10 ** 5) -> InvarianceReport:
    """Assemble the exact swap transition matrix on the L-fold product of a
    finite state space and measure how far it is from leaving the tempered
    product measure invariant.  Everything here is dense linear algebra,
    independent of the sampler's incremental code paths.
    """
    log_weights = np.asarray(log_weights, float)
    betas = np.asarray(betas, float)
    if log_weights.ndim != 1 or betas.ndim != 1 or betas.size < 2:
        raise ValueError("need a weight vector and at least two betas")
    if not (np.diff(betas) < 0).all() or betas[0] != 1.0 or betas[-1] <= 0:
        raise ValueError("betas must decrease strictly from 1 and stay positive")
    n_points = log_weights.size
    levels = betas.size
    size = n_points ** levels
    if size > max_states:
        raise ValueError(f"product space has {size} states, above the cap {max_states}")

    states = np.array(list(itertools.product(range(n_points), repeat=levels)))
    log_prob = (betas[None, :] * log_weights[states]).sum(axis=1)
    prob = np.exp(log_prob - log_prob.max())
    prob /= prob.sum()

    place = n_points ** np.arange(levels - 1, -1, -1)
    flat = states @ place
    matrix = np.zeros((size, size))
    pair_weight = 1.0 / (levels - 1)
    for j in range(levels - 1):
        gap = betas[j] - betas[j + 1]
        accept = np.exp(np.minimum(0.0, gap * (log_weights[states[:, j + 1]]
                                               - log_weights[states[:, j]])))
        swapped = flat + (states[:, j + 1] - states[:, j]) * (place[j] - place[j + 1])
        matrix[flat, swapped] += pair_weight * accept
        matrix[flat, flat] += pair_weight * (1.0 - accept)
    return InvarianceReport(
        stationary_violation=float(np.abs(prob @ matrix - prob).max()),
        row_sum_violation=float(np.abs(matrix.sum(axis=1) - 1.0).max()),
        states=size,
    )


def detailed_balance_audit(target, betas, shapes, sample_count: int,
                           rng: np.random.Generator) -> float:
    """Max log violation of the Metropolis flow identity

        pi^b(x) q_S(y - x) a(x, y)  =  pi^b(y) q_S(x - y) a(y, x)

    over random tuples (x, y, b, S), with far-apart pairs mixed in to
    exercise the log-space underflow guards."""
    betas = list(betas)
    shapes = [np.asarray(s, float) for s in shapes]
    dim = shapes[0].shape[0]
    worst = 0.0
    for k in range(sample_count):
        beta = betas[int(rng.integers(len(betas)))]
        tril = shapes[int(rng.integers(len(shapes)))]
        x = 4.0 * rng.standard_normal(dim)
        stretch = 50.0 if k % 7 == 0 else 1.0
        y = x + stretch * (tril @ rng.standard_normal(dim))
        log_pi_x = target.log_density(x)
        log_pi_y = target.log_density(y)
        diff = y - x
        sol = np.linalg.solve(tril, diff)
        log_q = -0.5 * float(sol @ sol)
        sol_back = np.linalg.solve(tril, -diff)
        log_q_back = -0.5 * float(sol_back @ sol_back)
        forward = beta * log_pi_x + log_q + min(0.0, beta * (log_pi_y - log_pi_x))
        backward = beta * log_pi_y + log_q_back + min(0.0, beta * (log_pi_x - log_pi_y))
        worst = max(worst, abs(forward - backward))
    return worst
