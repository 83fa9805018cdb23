"""Render ntkln CSVs into figures.

Supported kinds and their input schemas (matching the ntkln CLI contract):

* curves      - x,mean,ci_half_width (one file per labelled line); an
                optional training CSV x,y is overlaid as red dots and the
                95% CI band is shaded around each mean line.
* heatmap     - x,x_prime,theta_mean,theta_std,n_seeds; one panel per input
                file, each with its own colour scale.
* variance    - norm,theta_xx (log-log).
* homogeneity - lambda,ratio (log x).

Rendering is deterministic for identical inputs: the style is fixed here
and the SVG hash salt is pinned.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ntkln"

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("curves", "heatmap", "variance", "homogeneity")

_REQUIRED_COLUMNS = {
    "curves": ("x", "mean", "ci_half_width"),
    "heatmap": ("x", "x_prime", "theta_mean"),
    "variance": ("norm", "theta_xx"),
    "homogeneity": ("lambda", "ratio"),
}


class SchemaError(ValueError):
    """Input CSV does not match the expected schema."""


@dataclass(frozen=True)
class PlotJob:
    inputs: tuple
    output: str
    kind: str
    labels: tuple = ()
    train_csv: str | None = None
    title: str = ""
    bare: bool = False  # draw the data only (used by the pixel checks)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown plot kind {self.kind!r}; "
                              f"expected one of {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "labels", tuple(self.labels))


def read_columns(path: str, required) -> dict:
    """Read a CSV into float columns, insisting on the required names."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [c for c in required if c not in names]
        if missing:
            raise SchemaError(
                f"{path}: missing required column(s) {', '.join(missing)}")
        cols = {name: [] for name in names}
        for row in reader:
            for name in names:
                try:
                    cols[name].append(float(row[name]))
                except (TypeError, ValueError):
                    raise SchemaError(
                        f"{path}: non-numeric value in column {name!r}") from None
    return {k: np.asarray(v) for k, v in cols.items()}


def heatmap_matrix(cols: dict):
    """Assemble the (grid, matrix) from long-format heatmap columns."""
    xs = np.unique(cols["x"])
    n = len(xs)
    if len(cols["x"]) != n * n:
        raise SchemaError("heatmap rows do not form a full square grid")
    index = {v: i for i, v in enumerate(xs)}
    mat = np.full((n, n), np.nan)
    for a, b, v in zip(cols["x"], cols["x_prime"], cols["theta_mean"]):
        mat[index[a], index[b]] = v
    if np.any(np.isnan(mat)):
        raise SchemaError("heatmap grid has missing (x, x_prime) pairs")
    return xs, mat


def _label(job: PlotJob, i: int) -> str:
    if i < len(job.labels):
        return job.labels[i]
    return f"series {i + 1}"


def _render_curves(job: PlotJob, ax) -> None:
    for i, path in enumerate(job.inputs):
        cols = read_columns(path, _REQUIRED_COLUMNS["curves"])
        order = np.argsort(cols["x"])
        x = cols["x"][order]
        mean = cols["mean"][order]
        ci = cols["ci_half_width"][order]
        line, = ax.plot(x, mean, label=_label(job, i))
        ax.fill_between(x, mean - ci, mean + ci,
                        color=line.get_color(), alpha=0.25, linewidth=0)
    if job.train_csv:
        cols = read_columns(job.train_csv, ("x", "y"))
        ax.scatter(cols["x"], cols["y"], s=12, color="red", zorder=5,
                   label="train")
    if not job.bare:
        ax.set_xlabel("x")
        ax.set_ylabel("prediction")
        ax.legend()


def _render_variance(job: PlotJob, ax) -> None:
    for i, path in enumerate(job.inputs):
        cols = read_columns(path, _REQUIRED_COLUMNS["variance"])
        order = np.argsort(cols["norm"])
        ax.loglog(cols["norm"][order], cols["theta_xx"][order],
                  label=_label(job, i))
    if not job.bare:
        ax.set_xlabel("input norm")
        ax.set_ylabel("Theta(x, x)")
        ax.legend()


def _render_homogeneity(job: PlotJob, ax) -> None:
    for i, path in enumerate(job.inputs):
        cols = read_columns(path, _REQUIRED_COLUMNS["homogeneity"])
        order = np.argsort(cols["lambda"])
        ax.semilogx(cols["lambda"][order], cols["ratio"][order],
                    marker="o", label=_label(job, i))
    if not job.bare:
        ax.set_xlabel("lambda")
        ax.set_ylabel("Theta ratio")
        ax.legend()


def render(job: PlotJob) -> str:
    """Render the job to its output path; returns the path."""
    if job.kind == "heatmap":
        n = len(job.inputs)
        fig, axes = plt.subplots(1, n, figsize=(4.2 * n, 4.0), squeeze=False)
        for i, path in enumerate(job.inputs):
            cols = read_columns(path, _REQUIRED_COLUMNS["heatmap"])
            xs, mat = heatmap_matrix(cols)
            ax = axes[0, i]
            # Each panel keeps its own colour scale: the no-LN kernel spans
            # orders of magnitude more than the LN ones.
            im = ax.imshow(mat, origin="lower",
                           extent=(xs[0], xs[-1], xs[0], xs[-1]))
            if job.bare:
                ax.set_axis_off()
            else:
                fig.colorbar(im, ax=ax, shrink=0.85)
                ax.set_title(_label(job, i))
                ax.set_xlabel("x'")
                ax.set_ylabel("x")
    else:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        if job.kind == "curves":
            _render_curves(job, ax)
        elif job.kind == "variance":
            _render_variance(job, ax)
        else:
            _render_homogeneity(job, ax)
        if job.bare:
            ax.set_axis_off()
    if job.title and not job.bare:
        fig.suptitle(job.title)
    fig.tight_layout()
    fig.savefig(job.output, dpi=120)
    plt.close(fig)
    return job.output
