"""Command-line front end: run configs, reproduce the bundled experiment
protocols, and query the temperature oracle.

Config files are flat ``key = value`` text; the manifest a run writes is
itself a valid config with every default materialized, so any run can be
repeated bit-for-bit from its manifest.
"""
from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np

from . import __version__
from .adaptation import StepSizes
from .experiments import (easy_mixture_config, ising_config, moment_table_text,
                          rmse_table_text, run_ising_study, run_moment_study,
                          run_rmse_study, write_ising_study, write_moment_study,
                          write_rmse_study)
from .oracle import OracleError, equilibrium_rho, stationary_swap_accept
from .sampler import SamplerConfig, run
from .targets import (GaussianMixture, IsingPosterior, IsotropicGaussian,
                      canonical_mixture, load_mixture_spec, read_binary_image,
                      synthetic_floe_image, write_pgm)
from . import traceio
from .traceio import (parse_keyvalues, summary_rows, write_beta_table,
                      write_manifest, write_scatter_table, write_summary_csv,
                      write_trace)


class ConfigError(ValueError):
    """Bad configuration: maps to exit code 2."""


_BOOLS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}

_TARGET_KEYS = {"target", "mixture_file", "dim", "variance", "image", "image_size",
                "match_weight", "smooth_weight", "pixel_estimator"}
_SAMPLER_KEYS = {"levels", "iterations", "burnin", "seed", "adaptation",
                 "adapt_temperatures", "accept_target", "step_c", "step_xi",
                 "rho_bounds", "scale_bounds", "cov_clamp_eps", "thin",
                 "init_box", "freeze_after_burnin"}

RMSE_SIZES = (10000, 20000, 40000, 80000, 160000)


def _parse(values: dict[str, str], key: str, kind, default=None):
    if key not in values:
        if default is None:
            raise ConfigError(f"config key '{key}' is required")
        return default
    raw = values[key]
    try:
        if kind is bool:
            if raw.lower() not in _BOOLS:
                raise ValueError(f"expected a boolean, got {raw!r}")
            return _BOOLS[raw.lower()]
        if kind in (int, float, str):
            return kind(raw)
        if isinstance(kind, tuple):          # (element type, count)
            elem, count = kind
            parts = [elem(p) for p in raw.split()]
            if len(parts) != count:
                raise ValueError(f"expected {count} values, got {len(parts)}")
            return tuple(parts)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': {exc}") from exc
    raise AssertionError(kind)


def _embed(mix: GaussianMixture, dim: int) -> GaussianMixture:
    if dim < mix.dim:
        raise ConfigError(f"config key 'dim': mixture file has dimension {mix.dim}")
    if dim == mix.dim:
        return mix
    padded = np.zeros((mix.means.shape[0], dim))
    padded[:, :mix.means.shape[1]] = mix.means
    return GaussianMixture(padded, variance=mix.variance, weights=mix.weights)


def _build_target(values: dict[str, str], base_dir: str):
    """Construct the target object plus its resolved manifest keys."""
    kind = _parse(values, "target", str)
    resolved: dict[str, str] = {"target": kind}
    if kind == "mixture":
        source = _parse(values, "mixture_file", str, "canonical")
        dim = _parse(values, "dim", int, 2)
        variance = values.get("variance")
        variance = None if variance is None else _parse(values, "variance", float)
        if source == "canonical":
            target = canonical_mixture(dim=dim, variance=variance)
        else:
            path = source if os.path.isabs(source) else os.path.join(base_dir, source)
            if not os.path.exists(path):
                raise ConfigError(f"config key 'mixture_file': no such file {path!r}")
            target = _embed(load_mixture_spec(path, variance=variance), dim)
            source = path
        resolved.update(mixture_file=source, dim=str(dim),
                        variance=repr(target.variance))
        return target, resolved
    if kind == "gaussian":
        dim = _parse(values, "dim", int, 1)
        variance = _parse(values, "variance", float, 1.0)
        resolved.update(dim=str(dim), variance=repr(variance))
        return IsotropicGaussian(dim=dim, variance=variance), resolved
    if kind == "ising":
        source = _parse(values, "image", str, "synthetic")
        size = _parse(values, "image_size", int, 40)
        if source == "synthetic":
            image = synthetic_floe_image(size)
            resolved.update(image=source, image_size=str(size))
        else:
            path = source if os.path.isabs(source) else os.path.join(base_dir, source)
            if not os.path.exists(path):
                raise ConfigError(f"config key 'image': no such file {path!r}")
            image = read_binary_image(path)
            resolved.update(image=path)
        mw = _parse(values, "match_weight", float, 1.0)
        sw = _parse(values, "smooth_weight", float, 0.7)
        resolved.update(match_weight=repr(mw), smooth_weight=repr(sw))
        return IsingPosterior(image, match_weight=mw, smooth_weight=sw), resolved
    raise ConfigError(f"config key 'target': unknown target {kind!r}")


def build_run_config(values: dict[str, str],
                     base_dir: str = ".") -> tuple[SamplerConfig, list[str]]:
    """Resolve a flat key-value mapping into a validated SamplerConfig and
    the fully materialized config lines for the manifest."""
    unknown = set(values) - _TARGET_KEYS - _SAMPLER_KEYS
    if unknown:
        raise ConfigError(f"unknown config key '{sorted(unknown)[0]}'")
    target, resolved = _build_target(values, base_dir)
    lattice = isinstance(target, IsingPosterior)

    iterations = _parse(values, "iterations", int)
    burnin = (_parse(values, "burnin", int)
              if "burnin" in values else iterations // 2)
    init_box = (_parse(values, "init_box", (float, 2))
                if "init_box" in values else None)
    config = SamplerConfig(
        target=target,
        levels=_parse(values, "levels", int, 5),
        iterations=iterations,
        burnin=burnin,
        seed=_parse(values, "seed", int, 0),
        adaptation=_parse(values, "adaptation", str,
                          "none" if lattice else "cov"),
        adapt_temperatures=_parse(values, "adapt_temperatures", bool, True),
        step_sizes=StepSizes(c=_parse(values, "step_c", (float, 3), (1.0, 1.0, 1.0)),
                             xi=_parse(values, "step_xi", (float, 3), (0.6, 0.6, 0.6))),
        accept_target=_parse(values, "accept_target", float, 0.234),
        rho_bounds=_parse(values, "rho_bounds", (float, 2), (-10.0, 10.0)),
        scale_bounds=_parse(values, "scale_bounds", (float, 2), (-20.0, 20.0)),
        cov_clamp_eps=_parse(values, "cov_clamp_eps", float, 1e-6),
        thin=_parse(values, "thin", int, 10),
        init_box=init_box,
        freeze_after_burnin=_parse(values, "freeze_after_burnin", bool, False),
        pixel_estimator=_parse(values, "pixel_estimator", str, "conditional"),
    )
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    lines = [f"{key} = {value}" for key, value in resolved.items()]
    if lattice:
        lines.append(f"pixel_estimator = {config.pixel_estimator}")
    lines += [
        f"levels = {config.levels}",
        f"iterations = {config.iterations}",
        f"burnin = {config.burnin}",
        f"seed = {config.seed}",
        f"adaptation = {config.adaptation}",
        f"adapt_temperatures = {str(config.adapt_temperatures).lower()}",
        f"accept_target = {config.accept_target!r}",
        "step_c = " + " ".join(repr(v) for v in config.step_sizes.c),
        "step_xi = " + " ".join(repr(v) for v in config.step_sizes.xi),
        "rho_bounds = " + " ".join(repr(v) for v in config.rho_bounds),
        "scale_bounds = " + " ".join(repr(v) for v in config.scale_bounds),
        f"cov_clamp_eps = {config.cov_clamp_eps!r}",
        f"thin = {config.thin}",
        f"freeze_after_burnin = {str(config.freeze_after_burnin).lower()}",
    ]
    if init_box is not None:
        lines.append("init_box = " + " ".join(repr(v) for v in init_box))
    return config, lines


def _trace_header(config: SamplerConfig) -> dict:
    target = config.target
    if isinstance(target, IsingPosterior):
        desc = {"kind": "ising", "shape": list(target.observed.shape)}
    elif isinstance(target, GaussianMixture):
        desc = {"kind": "mixture", "dim": target.dim}
    else:
        desc = {"kind": "gaussian", "dim": target.dim}
    return {"version": __version__, "seed": config.seed, "levels": config.levels,
            "iterations": config.iterations, "burnin": config.burnin,
            "adaptation": config.adaptation, "thin": config.thin, "target": desc}


def cmd_run(args) -> int:
    if not os.path.exists(args.config):
        print(f"config not found: {args.config}", file=sys.stderr)
        return 2
    try:
        values = parse_keyvalues(args.config)
        for key, flag in (("seed", args.seed), ("levels", args.levels),
                          ("iterations", args.iters), ("burnin", args.burnin),
                          ("adaptation", args.adaptation), ("thin", args.thin)):
            if flag is not None:
                values[key] = str(flag)
        config, config_lines = build_run_config(values, os.path.dirname(
            os.path.abspath(args.config)))
    except ValueError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    artifacts = ["manifest.cfg", "trace.jsonl", "summary.csv", "betas.csv",
                 "scatter.csv"]
    lattice = isinstance(config.target, IsingPosterior)
    if lattice:
        artifacts.append("posterior_mean.pgm")
    write_manifest(os.path.join(out_dir, "manifest.cfg"), config_lines,
                   comments=[f"tool: aptmc {__version__}",
                             "created: " + datetime.datetime.now(
                                 datetime.timezone.utc).isoformat(),
                             "artifacts: " + " ".join(artifacts)])

    result = run(config)
    summary = result.summary
    write_trace(os.path.join(out_dir, "trace.jsonl"), _trace_header(config),
                result.records)
    comments = ("single run: std column degenerate",)
    write_summary_csv(os.path.join(out_dir, "summary.csv"),
                      summary_rows(summary), comments)
    write_beta_table(os.path.join(out_dir, "betas.csv"), result.beta_history)
    dim = None if lattice else config.target.dim
    write_scatter_table(os.path.join(out_dir, "scatter.csv"), result.records, dim)
    if lattice:
        write_pgm(os.path.join(out_dir, "posterior_mean.pgm"), summary.pixel_mean)

    with np.printoptions(precision=4, suppress=True):
        print(f"run complete: {config.iterations} iterations, "
              f"{summary.sample_count} retained, {summary.wall_time:.1f}s")
        print(f"final betas: {summary.final_betas}")
        print(f"swap acceptance per pair: {summary.swap_rate}")
        if summary.est_mean is not None:
            print(f"level-1 mean estimate: {summary.est_mean}")
    print(f"artifacts in {out_dir}")
    return 0


def cmd_reproduce(args) -> int:
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    out_dir = args.out_dir
    seed = args.seed if args.seed is not None else 0
    if args.table in ("table1", "table2"):
        reps = args.replications or 100
        if args.table == "table1":
            base, target = easy_mixture_config(seed=seed)
            title = ("Moment estimates, 2-D mixture: 5 levels, 5000 iterations "
                     f"(2500 burn-in), {reps} replications")
        else:
            base, target = easy_mixture_config(levels=3, iterations=8333,
                                               burnin=4167, seed=seed)
            title = ("Moment estimates, 2-D mixture: 3 levels, 8333 iterations "
                     f"(4167 burn-in), {reps} replications")
        study = run_moment_study(base, target, replications=reps, workers=workers)
        write_moment_study(out_dir, args.table, study, title)
        print(moment_table_text(study, title))
    elif args.table == "table3":
        sizes = RMSE_SIZES[:2] if args.sizes is None else args.sizes
        reps = args.replications or 20
        study = run_rmse_study(sizes=sizes, replications=reps, workers=workers,
                               seed=seed)
        write_rmse_study(out_dir, study)
        print(rmse_table_text(study))
    elif args.table == "ising":
        reps = args.replications or 1
        config, target = ising_config(seed=seed)
        study = run_ising_study(config, target, replications=reps)
        write_ising_study(out_dir, study)
        with np.printoptions(precision=4, suppress=True):
            print(f"swap acceptance per pair: {study.swap_rate}")
            print(f"final betas: {study.final_betas}")
    else:
        raise AssertionError(args.table)
    print(f"artifacts in {out_dir}")
    return 0


def cmd_oracle(args) -> int:
    if args.target not in ("normal", "gaussian"):
        print(f"unsupported oracle target {args.target!r} "
              "(quadrature targets: normal)", file=sys.stderr)
        return 2
    target = IsotropicGaussian(dim=1, variance=1.0)
    print(f"target: standard normal, accept target {args.alpha_star}")
    grid = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    accepts = [stationary_swap_accept(target, u, 1.0) for u in grid]
    print("stationary swap acceptance against the untempered level:")
    for u, value in zip(grid, accepts):
        print(f"  h({u:.1f}, 1) = {value:.6f}")
    solution = equilibrium_rho(target, levels=args.levels,
                               accept_target=args.alpha_star)
    betas = solution.betas
    for level in range(args.levels - 1):
        if solution.saturated[level]:
            print(f"no interior root at level {level + 1} "
                  f"(spacing pinned at {solution.rho[level]:.1f})")
        else:
            print(f"level {level + 1}: rho_hat = {solution.rho[level]:.6f}, "
                  f"beta_{level + 2} = {betas[level + 1]:.6e}, "
                  f"residual = {solution.residuals[level]:.2e}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, "oracle.csv")
        traceio.write_oracle_csv(
            path,
            [(u, 1.0, value) for u, value in zip(grid, accepts)],
            [(level + 1, solution.rho[level], betas[level + 1],
              solution.residuals[level], solution.saturated[level])
             for level in range(args.levels - 1)])
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aptmc",
        description="Adaptive parallel tempering: run configs, reproduce the "
                    "bundled experiment protocols, query the temperature oracle.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one sampling run from a config file")
    p_run.add_argument("--config", required=True, help="flat key-value config file")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--levels", type=int, help="override the ladder size")
    p_run.add_argument("--iters", type=int, help="override the iteration count")
    p_run.add_argument("--burnin", type=int, help="override the burn-in length")
    p_run.add_argument("--adaptation", choices=["cov", "covg", "ram", "none"],
                       help="override the proposal adaptation mode")
    p_run.add_argument("--thin", type=int, help="override the trace thinning")
    p_run.add_argument("--out-dir", default="run_out", help="artifact directory")

    p_rep = sub.add_parser("reproduce", help="run a bundled experiment protocol")
    p_rep.add_argument("table", choices=["table1", "table2", "table3", "ising"],
                       help="table1/table2: 2-D mixture moment tables; "
                            "table3: RMSE against run length in 8 dimensions; "
                            "ising: binary image posterior mean")
    p_rep.add_argument("--replications", type=int,
                       help="independent repeats (default 100, table3 20, ising 1)")
    p_rep.add_argument("--workers", type=int,
                       help="worker processes (default: logical cores)")
    p_rep.add_argument("--seed", type=int, help="base seed (default 0)")
    p_rep.add_argument("--sizes", type=_sizes_arg,
                       help="table3 run lengths, comma-separated, from "
                            + ",".join(str(s) for s in RMSE_SIZES))
    p_rep.add_argument("--out-dir", default="reproduce_out",
                       help="artifact directory")

    p_or = sub.add_parser("oracle",
                          help="stationary swap rates and equilibrium spacings")
    p_or.add_argument("target", nargs="?", default="normal",
                      help="oracle target (normal)")
    p_or.add_argument("--levels", type=int, default=2, help="ladder size")
    p_or.add_argument("--alpha-star", type=float, default=0.234,
                      help="swap acceptance target")
    p_or.add_argument("--out-dir", help="also write oracle.csv here")
    return parser


def _sizes_arg(raw: str) -> tuple[int, ...]:
    sizes = []
    for part in raw.split(","):
        try:
            size = int(part)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {part!r}")
        if size not in RMSE_SIZES:
            raise argparse.ArgumentTypeError(
                f"size {size} not in {RMSE_SIZES}")
        sizes.append(size)
    return tuple(sizes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "reproduce":
            return cmd_reproduce(args)
        if args.command == "oracle":
            return cmd_oracle(args)
        raise AssertionError(args.command)
    except OracleError as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
