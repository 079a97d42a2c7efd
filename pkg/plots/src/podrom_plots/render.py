"""Render error-series curves, singular-value decay, and summary tables.

Input CSVs follow the solver package's documented schemas:

* ``errors.csv``   t, l2_rom, h1_rom, l2_proj, h1_proj, l2_rom_vs_proj, h1_rom_vs_proj
* ``eigs.csv``     k, lambda, sigma, tail
* ``summary.csv``  M, r, max_l2_rom, max_l2_proj, max_h1_rom, max_h1_proj

Error-series figures draw the projection error as a continuous blue line and
the reduced-order error as a dashed line.  Singular-value figures are
semilogarithmic with an optional horizontal dotted threshold line.  Rendering
is deterministic: fixed figure geometry, fonts and colors, no timestamps.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

ERROR_SERIES = "error_series"
SV_DECAY = "sv_decay"
TABLE = "table"

_KINDS = (ERROR_SERIES, SV_DECAY, TABLE)

_RC = {
    "figure.figsize": (9.0, 3.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class InputError(ValueError):
    """Missing or malformed CSV input; the message names the offender."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    output: str
    threshold: float | None = None
    log_y: bool = True
    labels: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise InputError("no input CSVs given")


def _read_csv(path, required_columns):
    if not os.path.exists(path):
        raise InputError(f"input file {path} does not exist")
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise InputError(f"{path} has no data rows")
    header = [h.strip() for h in lines[0].split(",")]
    for col in required_columns:
        if col not in header:
            raise InputError(f"{path} is missing column {col!r}")
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise InputError(f"{path} has a non-numeric entry: {exc}") from exc
    if data.size == 0:
        raise InputError(f"{path} has a header but no rows")
    return {col: data[:, i] for i, col in enumerate(header)}


def _render_error_series(spec: FigureSpec, ax_l2, ax_h1):
    cols = _read_csv(spec.inputs[0], (
        "t", "l2_rom", "h1_rom", "l2_proj", "h1_proj"))
    for ax, rom, proj, title in (
        (ax_l2, cols["l2_rom"], cols["l2_proj"], "L2 errors"),
        (ax_h1, cols["h1_rom"], cols["h1_proj"], "H1 errors"),
    ):
        ax.plot(cols["t"], proj, "-", color="tab:blue", lw=1.0,
                label="projection error")
        ax.plot(cols["t"], rom, "--", color="tab:orange", lw=1.0,
                label="reduced-model error")
        if spec.log_y:
            positive = np.concatenate([proj[proj > 0], rom[rom > 0]])
            if positive.size:
                ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_title(title)
        ax.legend(loc="upper right", fontsize=7)


def _render_sv_decay(spec: FigureSpec, ax):
    labels = spec.labels or tuple(
        os.path.splitext(os.path.basename(p))[0] for p in spec.inputs
    )
    for path, label in zip(spec.inputs, labels):
        cols = _read_csv(path, ("k", "lambda", "sigma", "tail"))
        ax.semilogy(cols["k"], cols["sigma"], marker="o", ms=2.5, lw=1.0,
                    label=label)
    if spec.threshold is not None:
        ax.axhline(spec.threshold, color="red", linestyle=":", lw=1.2,
                   label=f"threshold {spec.threshold:g}")
    ax.set_xlabel("k")
    ax.set_ylabel("singular value")
    ax.legend(loc="upper right", fontsize=7)


_TABLE_COLUMNS = ("M", "r", "max_l2_rom", "max_l2_proj", "max_h1_rom", "max_h1_proj")


def _render_table(spec: FigureSpec) -> str:
    cols = _read_csv(spec.inputs[0], _TABLE_COLUMNS)
    head = ("M", "r", "max |u_h - u_r|_0", "max |u_h - P u_h|_0",
            "max |grad(u_h - u_r)|_0", "max |grad(I - P)u_h|_0")
    rows = []
    for i in range(cols["M"].size):
        rows.append(
            f"<tr><td>{int(cols['M'][i])}</td><td>{int(cols['r'][i])}</td>"
            + "".join(
                f"<td>{cols[c][i]:.3e}</td>"
                for c in _TABLE_COLUMNS[2:]
            )
            + "</tr>"
        )
    html = (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        "<style>table{border-collapse:collapse;font-family:sans-serif}"
        "td,th{border:1px solid #999;padding:4px 8px;text-align:right}</style>"
        "</head><body>\n<table>\n<tr>"
        + "".join(f"<th>{h}</th>" for h in head)
        + "</tr>\n" + "\n".join(rows) + "\n</table>\n</body></html>\n"
    )
    return html


def render(spec: FigureSpec) -> str:
    """Produce the figure or table file; returns the output path."""
    if spec.kind == TABLE:
        html = _render_table(spec)
        with open(spec.output, "w") as f:
            f.write(html)
        return spec.output

    with plt.rc_context(_RC):
        if spec.kind == ERROR_SERIES:
            fig, (ax_l2, ax_h1) = plt.subplots(1, 2)
            _render_error_series(spec, ax_l2, ax_h1)
        else:
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            _render_sv_decay(spec, ax)
        fig.tight_layout()
        fig.savefig(spec.output, metadata={"Software": "podrom-plots"})
        plt.close(fig)
    return spec.output
