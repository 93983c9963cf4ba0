"""The adaptive parallel tempering sampler.

Each iteration applies, in order: one attempted adjacent swap under the
previous ladder; per-level tempered moves under the previous proposal
shapes; the ladder-spacing update driven by that iteration's adjacent
acceptance probabilities at the new state; then the proposal shape and
scale updates.  Parameters consumed at step n are always those produced at
step n-1.

Every random draw comes from a counter-based stream addressed by
(seed, iteration, level), with stream 0 reserved for the swap, so traces
are pure functions of (config, seed) no matter how replications are
scheduled across workers.
"""
from __future__ import annotations

import multiprocessing
import time
from dataclasses import dataclass, field, replace

import numpy as np

from aptmc import adaptation, kernels
from aptmc.adaptation import StepSizes
from aptmc.rng import StreamSet, SWAP_STREAM, INIT_ITERATION
from aptmc.targets import ContinuousTarget, IsingPosterior

ADAPTATION_MODES = ("cov", "covg", "ram", "none")
PIXEL_ESTIMATORS = ("conditional", "empirical")


@dataclass
class SamplerConfig:
    """Everything a run depends on; two equal configs give identical traces."""

    target: object
    levels: int
    iterations: int
    burnin: int | None = None          # default: half the iterations
    seed: int = 0
    adaptation: str = "cov"
    adapt_temperatures: bool = True
    step_sizes: StepSizes = field(default_factory=StepSizes)
    accept_target: float = 0.234       # for both swaps and within-level moves
    rho_bounds: tuple[float, float] = (-10.0, 10.0)
    scale_bounds: tuple[float, float] = (-20.0, 20.0)
    cov_clamp_eps: float = 1e-6
    thin: int = 10
    init_box: tuple[float, float] | None = None
    freeze_after_burnin: bool = False
    keep_beta_history: bool = True
    pixel_estimator: str = "conditional"
    extra_estimators: dict = field(default_factory=dict)

    @property
    def resolved_burnin(self) -> int:
        return self.iterations // 2 if self.burnin is None else self.burnin

    @property
    def is_lattice(self) -> bool:
        return isinstance(self.target, IsingPosterior)

    def validate(self) -> None:
        """Raise ValueError naming the offending field."""
        if not isinstance(self.target, (ContinuousTarget, IsingPosterior)):
            raise ValueError("target: must be a continuous target or an Ising posterior")
        if self.levels < 1:
            raise ValueError("levels: must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations: must be >= 1")
        if not 0 <= self.resolved_burnin < self.iterations:
            raise ValueError("burnin: must satisfy 0 <= burnin < iterations")
        if self.seed < 0:
            raise ValueError("seed: must be >= 0")
        if self.adaptation not in ADAPTATION_MODES:
            raise ValueError(f"adaptation: must be one of {ADAPTATION_MODES}")
        if self.is_lattice and self.adaptation != "none":
            raise ValueError("adaptation: single-flip lattice proposals have no "
                             "shape to adapt; use adaptation='none'")
        if not isinstance(self.step_sizes, StepSizes):
            raise ValueError("step_sizes: must be a StepSizes instance")
        if not 0.0 < self.accept_target < 1.0:
            raise ValueError("accept_target: must lie in (0, 1)")
        for name in ("rho_bounds", "scale_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name}: must satisfy lo < hi")
        if not 0.0 < self.cov_clamp_eps < 1.0:
            raise ValueError("cov_clamp_eps: must lie in (0, 1)")
        if self.thin < 1:
            raise ValueError("thin: must be >= 1")
        if self.init_box is not None and not self.init_box[0] < self.init_box[1]:
            raise ValueError("init_box: must satisfy lo < hi")
        if self.pixel_estimator not in PIXEL_ESTIMATORS:
            raise ValueError(f"pixel_estimator: must be one of {PIXEL_ESTIMATORS}")
        if self.is_lattice and self.extra_estimators:
            raise ValueError("extra_estimators: supported for continuous targets only")


@dataclass
class IterationRecord:
    """One trace row; betas and scales are the values produced by this
    iteration's updates, probabilities the ones realized during it."""

    n: int
    betas: tuple
    swap_pair: int | None
    swap_prob: float | None
    swap_accepted: bool | None
    move_probs: tuple
    move_accepted: tuple
    log_scales: tuple | None
    x1: tuple | None


@dataclass
class RunSummary:
    """Level-1 ergodic estimates and ladder diagnostics for one run."""

    seed: int
    levels: int
    iterations: int
    burnin: int
    adaptation: str
    sample_count: int
    est_mean: np.ndarray | None
    est_second: np.ndarray | None
    swap_rate: np.ndarray
    swap_rate_proposed: np.ndarray
    swap_proposal_counts: np.ndarray
    final_betas: np.ndarray
    final_rho: np.ndarray
    final_log_scales: np.ndarray | None
    pixel_mean: np.ndarray | None
    extra: dict
    wall_time: float


@dataclass
class RunResult:
    summary: RunSummary
    records: list
    beta_history: np.ndarray | None


class Sampler:
    """Single-owner sampler instance; ``step`` advances one iteration."""

    def __init__(self, config: SamplerConfig):
        config.validate()
        self.config = config
        self.n = 0
        self._target = config.target
        self._levels = config.levels
        self._burnin = config.resolved_burnin
        self._streams = StreamSet(config.seed)
        self._rho = np.ones(self._levels - 1)
        self._refresh_ladder()
        self._swap_drive_sum = np.zeros(max(self._levels - 1, 0))
        self._pair_prob_sum = np.zeros(max(self._levels - 1, 0))
        self._pair_counts = np.zeros(max(self._levels - 1, 0), dtype=np.int64)
        self._pair_accepts = np.zeros(max(self._levels - 1, 0), dtype=np.int64)
        self._sample_count = 0
        self._extra_sums = {name: 0.0 for name in config.extra_estimators}
        if config.keep_beta_history:
            self._beta_history = np.empty((config.iterations, self._levels))
        else:
            self._beta_history = None
        if config.is_lattice:
            self._init_lattice()
            self.step = self._step_lattice
        else:
            self._init_continuous()
            self.step = self._step_continuous

    # -- initialization ----------------------------------------------------

    def _init_continuous(self) -> None:
        config = self.config
        dim = self._target.dim
        self._dim = dim
        lo, hi = config.init_box if config.init_box is not None else self._target.init_box
        x = np.empty((self._levels, dim))
        for level in range(self._levels):
            g = self._streams.stream(INIT_ITERATION, level + 1)
            x[level] = lo + (hi - lo) * g.random(dim)
        self._x = x
        self._log_pi = self._target.log_density_many(x)
        if not np.isfinite(self._log_pi).all():
            raise RuntimeError("startup error: initial state has non-finite log density")
        self._adapt = adaptation.make_shape_adaptation(
            config.adaptation, self._levels, dim, config.cov_clamp_eps,
            config.scale_bounds, config.accept_target)
        if self._adapt is None:
            self._trils = np.broadcast_to(np.eye(dim), (self._levels, dim, dim)).copy()
        self._sum_x = np.zeros(dim)
        self._sum_x2 = np.zeros(dim)

    def _init_lattice(self) -> None:
        target = self._target
        self._adapt = None
        self._n_sites = target.n_sites
        self._ext = [target.extended(target.observed) for _ in range(self._levels)]
        match, agree = target.counts(target.observed)
        self._match = np.full(self._levels, match, dtype=np.int64)
        self._agree = np.full(self._levels, agree, dtype=np.int64)
        self._log_pi = np.full(self._levels, target.log_from_counts(match, agree))
        self._pixel_sum = np.zeros(target.shape)

    def _refresh_ladder(self) -> None:
        # Inline ladder arithmetic: betas and adjacent gaps from rho.
        log_betas = np.empty(self._levels)
        log_betas[0] = 0.0
        if self._levels > 1:
            np.cumsum(-np.exp(self._rho), out=log_betas[1:])
        self._log_betas = log_betas
        self._betas = np.exp(log_betas)
        self._gaps = -self._betas[:-1] * np.expm1(np.diff(log_betas))

    # -- iteration pieces shared by both state layouts ---------------------

    def _attempt_swap(self, n: int) -> kernels.SwapOutcome | None:
        if self._levels < 2:
            return None
        g = self._streams.stream(n, SWAP_STREAM)
        pair, u = kernels.propose_swap(self._levels, g)
        j = pair - 1
        prob = float(np.exp(min(0.0, self._gaps[j] * (self._log_pi[j + 1] - self._log_pi[j]))))
        accepted = u < prob
        if accepted:
            self._swap_levels(j)
        if n > self._burnin:
            self._pair_prob_sum[j] += prob
            self._pair_counts[j] += 1
            self._pair_accepts[j] += accepted
        return kernels.SwapOutcome(pair, prob, bool(accepted))

    def _adapt_temperatures(self, n: int) -> np.ndarray:
        """Compute the adjacent-pair acceptance drive at the post-move state
        under the pre-update ladder, then advance rho with it."""
        if self._levels < 2:
            return np.empty(0)
        log_pi = self._log_pi
        drive = np.exp(np.minimum(0.0, self._gaps * (log_pi[1:] - log_pi[:-1])))
        if self.config.adapt_temperatures and not self._frozen(n):
            gamma1 = self.config.step_sizes.gammas(n)[0]
            if gamma1 > 0:
                self._rho = adaptation.temperature_update(
                    self._rho, drive, gamma1, self.config.accept_target,
                    self.config.rho_bounds)
                self._refresh_ladder()
        if n > self._burnin:
            self._swap_drive_sum += drive
        return drive

    def _frozen(self, n: int) -> bool:
        return self.config.freeze_after_burnin and n > self._burnin

    # -- continuous state iteration ----------------------------------------

    def _step_continuous(self) -> IterationRecord | None:
        self.n = n = self.n + 1
        config = self.config
        swap = self._attempt_swap(n)
        x, log_pi = self._x, self._log_pi
        levels, dim = self._levels, self._dim
        noise = np.empty((levels, dim))
        uniforms = np.empty(levels)
        for level in range(levels):
            g = self._streams.stream(n, level + 1)
            noise[level] = g.standard_normal(dim)
            uniforms[level] = g.random()
        trils = self._adapt.trils if self._adapt is not None else self._trils
        increments = np.einsum("lij,lj->li", trils, noise)
        proposals = x + increments
        log_pi_prop = self._target.log_density_many(proposals)
        probs = np.exp(np.minimum(0.0, self._betas * (log_pi_prop - log_pi)))
        accepted = uniforms < probs
        x[accepted] = proposals[accepted]
        log_pi[accepted] = log_pi_prop[accepted]
        self._adapt_temperatures(n)
        if self._adapt is not None and not self._frozen(n):
            self._adapt.update(config.step_sizes, n, x, probs, increments)
        if n > self._burnin:
            x1 = x[0]
            self._sum_x += x1
            self._sum_x2 += x1 * x1
            self._sample_count += 1
            for name, fn in config.extra_estimators.items():
                self._extra_sums[name] += fn(x1)
        if self._beta_history is not None:
            self._beta_history[n - 1] = self._betas
        if n % config.thin == 0:
            return self._make_record(n, swap, probs, accepted, tuple(x[0]))
        return None

    def _swap_levels(self, j: int) -> None:
        if self.config.is_lattice:
            self._ext[j], self._ext[j + 1] = self._ext[j + 1], self._ext[j]
            for arr in (self._match, self._agree, self._log_pi):
                arr[[j, j + 1]] = arr[[j + 1, j]]
        else:
            self._x[[j, j + 1]] = self._x[[j + 1, j]]
            self._log_pi[[j, j + 1]] = self._log_pi[[j + 1, j]]

    # -- lattice state iteration -------------------------------------------

    def _step_lattice(self) -> IterationRecord | None:
        self.n = n = self.n + 1
        config = self.config
        target = self._target
        swap = self._attempt_swap(n)
        levels = self._levels
        probs = np.empty(levels)
        accepted = np.empty(levels, dtype=bool)
        for level in range(levels):
            g = self._streams.stream(n, level + 1)
            site = int(g.integers(self._n_sites))
            u = float(g.random())
            ext = self._ext[level]
            dmatch, dagree = target.flip_count_delta(ext, site)
            new_log = target.log_from_counts(self._match[level] + dmatch,
                                             self._agree[level] + dagree)
            prob = float(np.exp(min(0.0, self._betas[level] * (new_log - self._log_pi[level]))))
            probs[level] = prob
            accepted[level] = ok = u < prob
            if ok:
                ext[site] ^= 1
                self._match[level] += dmatch
                self._agree[level] += dagree
                self._log_pi[level] = new_log
        self._adapt_temperatures(n)
        if n > self._burnin:
            self._sample_count += 1
            level1 = self._ext[0][:-1].reshape(target.shape)
            if config.pixel_estimator == "conditional":
                self._pixel_sum += target.conditional_one_prob(level1, beta=self._betas[0])
            else:
                self._pixel_sum += level1
        if self._beta_history is not None:
            self._beta_history[n - 1] = self._betas
        if n % config.thin == 0:
            return self._make_record(n, swap, probs, accepted, None)
        return None

    # -- bookkeeping -------------------------------------------------------

    def _make_record(self, n, swap, probs, accepted, x1) -> IterationRecord:
        if self._adapt is not None and self._adapt.log_scale is not None:
            scales = tuple(self._adapt.log_scale)
        else:
            scales = None
        return IterationRecord(
            n=n,
            betas=tuple(self._betas),
            swap_pair=None if swap is None else swap.pair,
            swap_prob=None if swap is None else swap.accept_prob,
            swap_accepted=None if swap is None else swap.accepted,
            move_probs=tuple(probs),
            move_accepted=tuple(bool(a) for a in accepted),
            log_scales=scales,
            x1=x1,
        )

    def audit_log_pi_cache(self) -> bool:
        """True when every cached log density equals a fresh evaluation."""
        if self.config.is_lattice:
            for level in range(self._levels):
                image = self._target.image_of(self._ext[level])
                if self._target.log_density(image) != self._log_pi[level]:
                    return False
                if self._target.counts(image) != (int(self._match[level]),
                                                  int(self._agree[level])):
                    return False
            return True
        return bool(np.array_equal(self._target.log_density_many(self._x), self._log_pi))

    def summary(self, wall_time: float = 0.0) -> RunSummary:
        count = max(self._sample_count, 1)
        lattice = self.config.is_lattice
        with np.errstate(invalid="ignore"):
            proposed_rate = np.where(self._pair_counts > 0,
                                     self._pair_prob_sum / np.maximum(self._pair_counts, 1),
                                     np.nan)
        if self._adapt is not None and self._adapt.log_scale is not None:
            log_scales = self._adapt.log_scale.copy()
        else:
            log_scales = None
        return RunSummary(
            seed=self.config.seed,
            levels=self._levels,
            iterations=self.config.iterations,
            burnin=self._burnin,
            adaptation=self.config.adaptation,
            sample_count=self._sample_count,
            est_mean=None if lattice else self._sum_x / count,
            est_second=None if lattice else self._sum_x2 / count,
            swap_rate=self._swap_drive_sum / count,
            swap_rate_proposed=proposed_rate,
            swap_proposal_counts=self._pair_counts.copy(),
            final_betas=self._betas.copy(),
            final_rho=self._rho.copy(),
            final_log_scales=log_scales,
            pixel_mean=self._pixel_sum / count if lattice else None,
            extra={name: s / count for name, s in self._extra_sums.items()},
            wall_time=wall_time,
        )


def run(config: SamplerConfig) -> RunResult:
    """Execute a full run; estimators accumulate over the post-burn-in
    window, trace rows are emitted at the thinning interval."""
    start = time.perf_counter()
    sampler = Sampler(config)
    records = []
    for _ in range(config.iterations):
        record = sampler.step()
        if record is not None:
            records.append(record)
    summary = sampler.summary(wall_time=time.perf_counter() - start)
    assert summary.sample_count == config.iterations - config.resolved_burnin
    return RunResult(summary, records, sampler._beta_history)


@dataclass
class ReplicationTable:
    """Across-replication statistics of the level-1 moment estimators."""

    estimators: list
    per_run: np.ndarray            # (replications, n_estimators)
    mean: np.ndarray
    std: np.ndarray                # sample std; zero and flagged when R = 1
    rmse: np.ndarray | None        # vs configured truths, else None
    truths: np.ndarray | None
    degenerate_std: bool
    summaries: list


def _run_summary_only(config: SamplerConfig) -> RunSummary:
    return run(config).summary


def replicate(config: SamplerConfig, replications: int, workers: int = 1,
              true_means: np.ndarray | None = None,
              true_seconds: np.ndarray | None = None) -> ReplicationTable:
    """Run ``replications`` independent copies with seeds seed, seed+1, ...
    and tabulate the level-1 moment estimators across them.

    Results do not depend on ``workers``: replication r is a pure function
    of its own derived seed, and rows are assembled in replication order.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if config.is_lattice:
        raise ValueError("replication tables cover continuous targets only")
    configs = [replace(config, seed=config.seed + r, keep_beta_history=False)
               for r in range(replications)]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            summaries = pool.map(_run_summary_only, configs, chunksize=1)
    else:
        summaries = [_run_summary_only(c) for c in configs]
    dim = config.target.dim
    estimators = ([f"mean_x{i + 1}" for i in range(dim)]
                  + [f"second_x{i + 1}" for i in range(dim)])
    per_run = np.array([np.concatenate([s.est_mean, s.est_second]) for s in summaries])
    mean = per_run.mean(axis=0)
    std = per_run.std(axis=0, ddof=1) if replications > 1 else np.zeros(2 * dim)
    truths = None
    rmse = None
    if true_means is not None and true_seconds is not None:
        truths = np.concatenate([np.asarray(true_means, float),
                                 np.asarray(true_seconds, float)])
        rmse = np.sqrt(((per_run - truths) ** 2).mean(axis=0))
    return ReplicationTable(
        estimators=estimators,
        per_run=per_run,
        mean=mean,
        std=std,
        rmse=rmse,
        truths=truths,
        degenerate_std=replications == 1,
        summaries=list(summaries),
    )
