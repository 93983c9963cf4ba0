"""Run artifacts: JSON-lines traces, summary CSVs, plot tables, manifests.

Every format starts with a version line and round-trips through its own
parser.  Writers are deterministic: identical inputs give identical bytes,
which is what makes trace files a pure function of (config, seed).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict

import numpy as np

TRACE_SCHEMA = "aptmc-trace/1"
SUMMARY_VERSION = "# aptmc-summary v1"
BETAS_VERSION = "# aptmc-betas v1"
SCATTER_VERSION = "# aptmc-scatter v1"
MANIFEST_VERSION = "# aptmc-manifest v1"
ORACLE_VERSION = "# aptmc-oracle v1"


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_trace(path, header: dict, records) -> None:
    """JSON-lines trace: a schema header object, then one record per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_json_line({"schema": TRACE_SCHEMA, **header}) + "\n")
        for record in records:
            fh.write(_json_line(asdict(record)) + "\n")


def read_trace(path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("empty trace file")
    header = json.loads(lines[0])
    if header.get("schema") != TRACE_SCHEMA:
        raise ValueError(f"unrecognized trace schema {header.get('schema')!r}")
    return header, [json.loads(line) for line in lines[1:]]


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def summary_rows(summary) -> list[tuple[str, float, float, float | None]]:
    """(estimator, mean, std, rmse) rows for a single run; std degenerate."""
    rows = []
    if summary.est_mean is not None:
        for i, v in enumerate(summary.est_mean):
            rows.append((f"mean_x{i + 1}", float(v), 0.0, None))
        for i, v in enumerate(summary.est_second):
            rows.append((f"second_x{i + 1}", float(v), 0.0, None))
    for j, v in enumerate(summary.swap_rate):
        rows.append((f"swap_rate_pair{j + 1}", float(v), 0.0, None))
    for name, v in summary.extra.items():
        rows.append((name, float(v), 0.0, None))
    return rows


def write_summary_csv(path, rows, comments: tuple[str, ...] = ()) -> None:
    """Versioned CSV with columns (estimator, mean, std, rmse)."""
    buf = io.StringIO()
    buf.write(SUMMARY_VERSION + "\n")
    for comment in comments:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["estimator", "mean", "std", "rmse"])
    for estimator, mean, std, rmse in rows:
        writer.writerow([estimator, _fmt(mean), _fmt(std), _fmt(rmse)])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_summary_csv(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SUMMARY_VERSION:
        raise ValueError("unrecognized summary version line")
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(body):
        rows.append({
            "estimator": rec["estimator"],
            "mean": float(rec["mean"]),
            "std": float(rec["std"]),
            "rmse": float(rec["rmse"]) if rec["rmse"] else None,
        })
    return rows


def replication_summary_rows(table) -> list[tuple[str, float, float, float | None]]:
    rows = []
    for i, name in enumerate(table.estimators):
        rmse = None if table.rmse is None else float(table.rmse[i])
        rows.append((name, float(table.mean[i]), float(table.std[i]), rmse))
    return rows


def write_beta_table(path, beta_history: np.ndarray) -> None:
    """Per-iteration inverse temperatures, one row per iteration."""
    levels = beta_history.shape[1]
    buf = io.StringIO()
    buf.write(BETAS_VERSION + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n"] + [f"beta_{l + 1}" for l in range(levels)])
    for n, row in enumerate(beta_history, 1):
        writer.writerow([n] + [repr(float(v)) for v in row])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_beta_table(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != BETAS_VERSION:
        raise ValueError("unrecognized beta table version line")
    rows = list(csv.reader(lines[1:]))
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])


def write_scatter_table(path, records, dim: int | None) -> None:
    """Thinned level-1 states from the trace records; header only when the
    run has no continuous level-1 state (lattice targets)."""
    buf = io.StringIO()
    buf.write(SCATTER_VERSION + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    if dim is not None:
        writer.writerow(["n"] + [f"x{i + 1}" for i in range(dim)])
        for record in records:
            if record.x1 is not None:
                writer.writerow([record.n] + [repr(float(v)) for v in record.x1])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_scatter_table(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != SCATTER_VERSION:
        raise ValueError("unrecognized scatter version line")
    rows = list(csv.reader(lines[1:]))
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])


def write_manifest(path, config_lines: list[str], comments: list[str]) -> None:
    """Flat key-value manifest; comment lines carry provenance, key lines are
    themselves a complete, re-runnable configuration."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MANIFEST_VERSION + "\n")
        for comment in comments:
            fh.write(f"# {comment}\n")
        for line in config_lines:
            fh.write(line + "\n")


def write_oracle_csv(path, grid_rows, level_rows) -> None:
    """Two-section CSV: the stationary acceptance grid, then the per-level
    equilibrium spacings."""
    buf = io.StringIO()
    buf.write(ORACLE_VERSION + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["u", "v", "accept"])
    for u, v, accept in grid_rows:
        writer.writerow([repr(float(u)), repr(float(v)), repr(float(accept))])
    writer.writerow(["level", "rho_hat", "beta_next", "residual", "saturated"])
    for level, rho, beta, residual, saturated in level_rows:
        writer.writerow([int(level), repr(float(rho)), repr(float(beta)),
                         repr(float(residual)), str(bool(saturated)).lower()])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def read_oracle_csv(path) -> tuple[list[dict], list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != ORACLE_VERSION:
        raise ValueError("unrecognized oracle table version line")
    try:
        split = lines.index("level,rho_hat,beta_next,residual,saturated")
    except ValueError:
        raise ValueError("oracle table is missing its spacing section") from None
    grid = [{"u": float(u), "v": float(v), "accept": float(a)}
            for u, v, a in csv.reader(lines[2:split])]
    levels = [{"level": int(lv), "rho_hat": float(r), "beta_next": float(b),
               "residual": float(res), "saturated": sat == "true"}
              for lv, r, b, res, sat in csv.reader(lines[split + 1:])]
    return grid, levels


def parse_keyvalues(path) -> dict[str, str]:
    """Parse a flat 'key = value' config or manifest file."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {ln}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if not key:
                raise ValueError(f"line {ln}: empty key")
            if key in values:
                raise ValueError(f"line {ln}: duplicate key {key!r}")
            values[key] = value.strip()
    return values
