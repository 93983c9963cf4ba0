"""Desk-scale experiment protocols and their table formatting.

Each protocol builds configs, runs replications, and returns structured
results; the write_* helpers lay them out as aligned text plus CSV.  The
protocols are sized so each reproduces on a single core in minutes.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .sampler import ReplicationTable, SamplerConfig, replicate, run
from .targets import GaussianMixture, IsingPosterior, canonical_mixture, synthetic_floe_image, write_pgm
from .traceio import replication_summary_rows, write_summary_csv

MODE_LABELS = {"cov": "Cov", "covg": "Cov(g)", "ram": "RAM"}


def mixture_truths(target: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    return target.coordinate_means(), target.coordinate_second_moments()


def easy_mixture_config(adaptation: str = "cov", *, levels: int = 5,
                        iterations: int = 5000, burnin: int = 2500,
                        seed: int = 0, thin: int = 10) -> tuple[SamplerConfig, GaussianMixture]:
    """Well-separated 20-component mixture in 2 dimensions, short runs."""
    target = canonical_mixture()
    config = SamplerConfig(target=target, levels=levels, iterations=iterations,
                           burnin=burnin, adaptation=adaptation, seed=seed, thin=thin)
    return config, target

def hard_mixture_config(adaptation: str = "cov", *, iterations: int = 40000,
                        levels: int = 8, seed: int = 0,
                        thin: int = 50) -> tuple[SamplerConfig, GaussianMixture]:
    """Same means embedded in 8 dimensions with variance 0.001: the modes are
    nearly point masses, so everything rides on the temperature ladder."""
    target = canonical_mixture(dim=8, variance=0.001)
    config = SamplerConfig(target=target, levels=levels, iterations=iterations,
                           burnin=iterations // 2, adaptation=adaptation,
                           seed=seed, thin=max(1, iterations // 1000))
    return config, target


def lattice_rho_bounds(levels: int) -> tuple[float, float]:
    """Spacing projection interval for lattice ladders.

    The upper bound caps every spacing so the whole ladder stays strictly
    positive in double precision even with all spacings at the cap
    (sum of exp(rho) stays below -log of the smallest normal double).
    Beyond that point a level's beta underflows to exact zero, the level
    samples the uniform distribution, and its pair's acceptance locks at 1
    no matter what rho is, which stalls the spacing recursion.
    """
    return (-10.0, float(np.log(708.0 / max(levels - 1, 1))))


def ising_config(image: np.ndarray | None = None, *, match_weight: float = 1.0,
                 smooth_weight: float = 0.7, levels: int = 10,
                 iterations: int = 100000, seed: int = 0,
                 thin: int = 1000) -> tuple[SamplerConfig, IsingPosterior]:
    """Binary image posterior on the synthetic floe scene by default."""
    if image is None:
        image = synthetic_floe_image()
    target = IsingPosterior(observed=image, match_weight=match_weight,
                            smooth_weight=smooth_weight)
    config = SamplerConfig(target=target, levels=levels, iterations=iterations,
                           burnin=iterations // 2, adaptation="none",
                           seed=seed, thin=thin,
                           rho_bounds=lattice_rho_bounds(levels))
    return config, target


@dataclass(frozen=True)
class MomentStudy:
    """Replicated moment estimates for one config family, all three modes."""
    tables: dict[str, ReplicationTable]
    true_means: np.ndarray
    true_seconds: np.ndarray
    dim: int


def run_moment_study(base: SamplerConfig, target: GaussianMixture, *,
                     modes: tuple[str, ...] = ("cov", "covg", "ram"),
                     replications: int = 100, workers: int = 1) -> MomentStudy:
    truths_m, truths_s = mixture_truths(target)
    tables = {}
    for mode in modes:
        config = replace(base, adaptation=mode)
        tables[mode] = replicate(config, replications=replications, workers=workers,
                                 true_means=truths_m, true_seconds=truths_s)
    return MomentStudy(tables=tables, true_means=truths_m,
                       true_seconds=truths_s, dim=target.dim)


def grouped_rmse(table: ReplicationTable, dim: int) -> tuple[float, float]:
    """Euclidean norm of per-coordinate RMSEs, split into first and second
    moment groups.  The norm commutes with the replication average, so this
    equals the RMSE of the stacked coordinate vector."""
    if table.rmse is None:
        raise ValueError("replication table carries no error references")
    r = np.asarray(table.rmse)
    return float(np.sqrt(np.sum(r[:dim] ** 2))), float(np.sqrt(np.sum(r[dim:] ** 2)))


def _cell(mean: float, std: float) -> str:
    return f"{mean:.3f} ({std:.3f})"


def moment_table_text(study: MomentStudy, title: str) -> str:
    """Aligned text table: one row of truths, then mean (std) per mode."""
    dim = study.dim
    headers = [f"E[X{i + 1}]" for i in range(dim)] + [f"E[X{i + 1}^2]" for i in range(dim)]
    rows = [("True value", [f"{v:.3f}" for v in
                            np.concatenate([study.true_means, study.true_seconds])])]
    for mode, table in study.tables.items():
        cells = [_cell(table.mean[i], table.std[i]) for i in range(2 * dim)]
        rows.append((MODE_LABELS.get(mode, mode), cells))
    widths = [max(len(headers[c]), *(len(r[1][c]) for r in rows)) for c in range(len(headers))]
    label_w = max(len(r[0]) for r in rows)
    lines = [title,
             " " * label_w + "  " + "  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for label, cells in rows:
        lines.append(label.ljust(label_w) + "  "
                     + "  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def write_moment_study(out_dir: str, name: str, study: MomentStudy, title: str) -> str:
    """Write per-mode summary CSVs and the aligned table; returns table path."""
    os.makedirs(out_dir, exist_ok=True)
    for mode, table in study.tables.items():
        comments = (f"replications={len(table.per_run)}",)
        if table.degenerate_std:
            comments += ("single replication: std degenerate",)
        write_summary_csv(os.path.join(out_dir, f"{name}_{mode}.csv"),
                          replication_summary_rows(table), comments)
    path = os.path.join(out_dir, f"{name}.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(moment_table_text(study, title))
    return path


@dataclass(frozen=True)
class RmseStudy:
    """RMSE against run length for the hard mixture, per adaptation mode."""
    sizes: tuple[int, ...]
    modes: tuple[str, ...]
    first_moment: np.ndarray   # (sizes, modes)
    second_moment: np.ndarray


def run_rmse_study(*, sizes: tuple[int, ...] = (10000, 20000, 40000, 80000, 160000),
                   modes: tuple[str, ...] = ("cov", "covg", "ram"),
                   replications: int = 20, workers: int = 1,
                   seed: int = 0) -> RmseStudy:
    first = np.empty((len(sizes), len(modes)))
    second = np.empty_like(first)
    for si, size in enumerate(sizes):
        base, target = hard_mixture_config(iterations=size, seed=seed)
        study = run_moment_study(base, target, modes=modes,
                                 replications=replications, workers=workers)
        for mi, mode in enumerate(modes):
            first[si, mi], second[si, mi] = grouped_rmse(study.tables[mode], target.dim)
    return RmseStudy(sizes=tuple(sizes), modes=tuple(modes),
                     first_moment=first, second_moment=second)


def rmse_table_text(study: RmseStudy) -> str:
    labels = [MODE_LABELS.get(m, m) for m in study.modes]
    lines = ["RMSE against run length, 8-dimensional mixture",
             "iterations  " + "  ".join(f"{lab:>14}" for lab in labels)
             + "    (first moments | second moments)"]
    for si, size in enumerate(study.sizes):
        cells = [f"{study.first_moment[si, mi]:.3f} | {study.second_moment[si, mi]:.3f}"
                 for mi in range(len(study.modes))]
        lines.append(f"{size:>10}  " + "  ".join(f"{c:>14}" for c in cells))
    return "\n".join(lines) + "\n"


def write_rmse_study(out_dir: str, study: RmseStudy) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "rmse_by_size.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# aptmc-rmse v1\n")
        fh.write("iterations,mode,rmse_first_moments,rmse_second_moments\n")
        for si, size in enumerate(study.sizes):
            for mi, mode in enumerate(study.modes):
                fh.write(f"{size},{mode},{float(study.first_moment[si, mi])!r},"
                         f"{float(study.second_moment[si, mi])!r}\n")
    with open(os.path.join(out_dir, "rmse_by_size.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(rmse_table_text(study))
    return path


@dataclass(frozen=True)
class IsingStudy:
    pixel_mean: np.ndarray          # posterior one-probability per pixel
    swap_rate: np.ndarray           # per-pair realized acceptance probability
    final_betas: np.ndarray
    observed: np.ndarray


def run_ising_study(config: SamplerConfig, target: IsingPosterior, *,
                    replications: int = 1) -> IsingStudy:
    """Averages the per-run posterior pixel means over replications; the
    generic replication driver handles only continuous targets."""
    pixel = np.zeros(target.observed.shape)
    swap = None
    betas = None
    for r in range(replications):
        config_r = replace(config, seed=config.seed + r, keep_beta_history=False)
        summary = run(config_r).summary
        pixel += summary.pixel_mean
        swap = summary.swap_rate if swap is None else swap + summary.swap_rate
        betas = summary.final_betas
    return IsingStudy(pixel_mean=pixel / replications, swap_rate=swap / replications,
                      final_betas=betas, observed=target.observed)


def write_ising_study(out_dir: str, study: IsingStudy) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "posterior_mean.pgm")
    write_pgm(path, study.pixel_mean)
    write_pgm(os.path.join(out_dir, "observed.pgm"), study.observed.astype(float))
    rows = [(f"swap_rate_pair{j + 1}", float(v), 0.0, None)
            for j, v in enumerate(study.swap_rate)]
    rows += [(f"final_beta_{l + 1}", float(v), 0.0, None)
             for l, v in enumerate(study.final_betas)]
    write_summary_csv(os.path.join(out_dir, "ising_summary.csv"), rows)
    return path
