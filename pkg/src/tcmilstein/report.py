"""Delimited output and figure rendering for experiment artifacts.

All numeric fields are written with 15 significant digits so that identical
runs produce identical bytes; the optional timestamp comment is the only
non-reproducible line and can be suppressed.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

from .mc_harness import ErrorTable, RegressionResult
from .scheme import Trajectory
from .subordinator import TimeChangeGrid

ERROR_CSV_HEADER = "h,M,p_bar,error,stderr,log10_h,log10_error"
ASSUMPTION_CSV_HEADER = "assumption,samples,max_ratio,constant,fitted,violated,witness"


def _fmt(x) -> str:
    return f"{x:.15g}"


def error_table_lines(table: ErrorTable, reg: Optional[RegressionResult] = None,
                      timestamp: Optional[str] = None) -> list[str]:
    lines = []
    if timestamp is not None:
        lines.append(f"# generated: {timestamp}")
    lines.append(f"# problem: {table.problem}")
    lines.append(f"# subordinator: {table.subordinator}")
    lines.append(f"# scheme: {table.scheme}")
    lines.append(f"# seed: {table.seed}")
    lines.append(f"# h_ref: {_fmt(table.h_ref)}")
    lines.append(ERROR_CSV_HEADER)
    for row in table.rows:
        log_e = math.log10(row.error) if row.error > 0.0 else float("-inf")
        fields = (row.h, row.m, row.p_bar, row.error, row.stderr, math.log10(row.h), log_e)
        lines.append(",".join(_fmt(v) for v in fields))
    if reg is not None:
        lines.append(f"# slope: {_fmt(reg.slope)}")
        lines.append(f"# intercept: {_fmt(reg.intercept)}")
        for row, res in zip(table.rows, reg.residuals):
            lines.append(f"# residual h={_fmt(row.h)}: {_fmt(res)}")
    return lines


def write_error_table(table: ErrorTable, reg: Optional[RegressionResult], path,
                      timestamp: Optional[str] = None) -> None:
    Path(path).write_text("\n".join(error_table_lines(table, reg, timestamp)) + "\n")


def plot_convergence(table: ErrorTable, reg: Optional[RegressionResult], path) -> None:
    """Log-log error-versus-step figure with the fitted line, rendered to file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    hs = [row.h for row in table.rows]
    errs = [row.error for row in table.rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(hs, errs, "o-", label="measured strong error")
    title = f"{table.problem} ({table.scheme}, {table.subordinator})"
    if reg is not None:
        fit = [10.0**reg.intercept * h**reg.slope for h in hs]
        ax.loglog(hs, fit, "--", label=f"fit, slope {reg.slope:.4f}")
        title += f"\nempirical order {reg.slope:.4f}"
    ax.set_xlabel("step size h")
    ax.set_ylabel(f"strong error, p={table.p_bar:g}")
    ax.set_title(title)
    ax.grid(True, which="both", linestyle=":", alpha=0.5)
    ax.legend()
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def write_trajectory(traj: Trajectory, path) -> None:
    d = traj.states.shape[1]
    header = "n,tau,E_h," + ",".join(f"X_{i + 1}" for i in range(d))
    lines = [header]
    for n in range(traj.states.shape[0]):
        fields = [str(n), _fmt(traj.grid.tau[n]), _fmt(n * traj.grid.h)]
        fields += [_fmt(v) for v in traj.states[n]]
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def write_grid(grid: TimeChangeGrid, path) -> None:
    lines = ["i,tau_i"]
    lines += [f"{i},{_fmt(t)}" for i, t in enumerate(grid.tau)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_assumption_reports(reports, path) -> None:
    lines = [ASSUMPTION_CSV_HEADER]
    for rep in reports:
        witness = " ".join(_fmt(w) for w in rep.witness)
        lines.append(
            ",".join(
                (
                    rep.assumption,
                    str(rep.samples),
                    _fmt(rep.max_ratio),
                    _fmt(rep.constant),
                    str(rep.fitted).lower(),
                    str(rep.violated).lower(),
                    witness,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def format_assumption_table(reports) -> str:
    rows = [("assumption", "max ratio", "constant", "source", "violated")]
    for rep in reports:
        rows.append(
            (
                rep.assumption,
                f"{rep.max_ratio:.6g}",
                f"{rep.constant:.6g}",
                "fitted" if rep.fitted else "candidate",
                "YES" if rep.violated else "no",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for i, row in enumerate(rows):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)
