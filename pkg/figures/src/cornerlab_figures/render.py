"""Render publication-style figures from experiment output directories.

The renderers are pure readers of the documented output formats
(result.json plus the headered CSVs); every number drawn or annotated
comes from those files verbatim, nothing is recomputed.  Output is SVG
with text kept as text and no embedded timestamp, so a fixed input
directory renders to identical bytes.
"""

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

FIGURE_KINDS = ("distribution-overlay", "correlation-curve")

_STYLE = {
    "svg.hashsalt": "cornerlab-figures",
    "svg.fonttype": "none",
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class FigureInputError(ValueError):
    """An input directory is missing a file, a column, or any usable rows."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    in_dir: str
    out_path: str
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}"
            )


def _read_csv(path, columns):
    """Rows of a headered CSV as column lists of floats."""
    if not os.path.isfile(path):
        raise FigureInputError(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(columns):
            raise FigureInputError(
                f"{path}: columns {header} do not match expected {list(columns)}"
            )
        out = {name: [] for name in columns}
        for row in reader:
            if len(row) != len(columns):
                raise FigureInputError(f"{path}: ragged row {row}")
            for name, cell in zip(columns, row):
                try:
                    out[name].append(float(cell))
                except ValueError:
                    raise FigureInputError(f"{path}: non-numeric cell {cell!r}")
    return out


def _read_result(path):
    if not os.path.isfile(path):
        raise FigureInputError(f"missing input file {path}")
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("metadata", "config", "statistics"):
        if key not in payload:
            raise FigureInputError(f"{path}: no {key!r} block")
    return payload


def _stat(payload, path, name, column="value"):
    for row in payload["statistics"]:
        if row["statistic"] == name:
            return row[column]
    raise FigureInputError(f"{path}: no statistic {name!r}")


def _save(fig, out_path):
    out_dir = os.path.dirname(out_path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    # a fixed Date would still vary run to run; None drops it entirely
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def render_distribution_overlay(spec):
    """Empirical CDF steps over the reference curve, KS annotation taken
    verbatim from result.json."""
    ecdf = _read_csv(
        os.path.join(spec.in_dir, "ecdf.csv"), ("lambda", "empirical_cdf")
    )
    if not ecdf["lambda"]:
        raise FigureInputError(f"{spec.in_dir}: ecdf.csv has no rows")
    result_path = os.path.join(spec.in_dir, "result.json")
    payload = _read_result(result_path)
    beta = int(payload["config"]["ensemble"]["beta"])
    tw = _read_csv(os.path.join(spec.in_dir, "tw.csv"), ("beta", "x", "F"))
    xs = [x for b, x in zip(tw["beta"], tw["x"]) if int(b) == beta]
    fs = [f for b, f in zip(tw["beta"], tw["F"]) if int(b) == beta]
    if not xs:
        raise FigureInputError(f"{spec.in_dir}: tw.csv has no beta={beta} rows")
    ks = _stat(payload, result_path, "ks_distance")

    with plt.rc_context({**_STYLE, **spec.style}):
        fig, ax = plt.subplots()
        ax.plot(xs, fs, color="#444444", lw=1.5, label=f"reference, beta={beta}")
        ax.step(
            ecdf["lambda"], ecdf["empirical_cdf"],
            where="post", color="#c44e52", lw=1.2,
            label=f"empirical ({len(ecdf['lambda'])} trials)",
        )
        lo, hi = min(ecdf["lambda"]), max(ecdf["lambda"])
        pad = 0.15 * (hi - lo)
        ax.set_xlim(lo - pad, hi + pad)
        ax.set_xlabel("scaled top eigenvalue")
        ax.set_ylabel("CDF")
        # the annotation must match result.json exactly: repr of the
        # parsed float round-trips the JSON literal
        ax.set_title(f"KS distance = {ks!r}")
        ax.legend(loc="lower right")
        return _save(fig, spec.out_path)


def _stationarity_runs(in_dir):
    runs = []
    for root, _, names in sorted(os.walk(in_dir)):
        if "result.json" not in names:
            continue
        path = os.path.join(root, "result.json")
        payload = _read_result(path)
        if payload["config"]["kind"] != "l1-stationarity":
            continue
        runs.append(
            {
                "delta": _stat(payload, path, "delta"),
                "corr_s": _stat(payload, path, "corr_s"),
                "corr_s_err": _stat(payload, path, "corr_s", "stderr"),
                "corr_t": _stat(payload, path, "corr_t"),
                "corr_t_err": _stat(payload, path, "corr_t", "stderr"),
            }
        )
    return sorted(runs, key=lambda run: run["delta"])


def render_correlation_curve(spec):
    """corr(lambda_1(0,0), lambda_1 at an l1-shift delta) for the s-axis
    and t-axis shifts, with error bars, over every stationarity run
    found under the input directory."""
    runs = _stationarity_runs(spec.in_dir)
    if not runs:
        raise FigureInputError(
            f"{spec.in_dir}: no l1-stationarity result.json found"
        )
    deltas = [run["delta"] for run in runs]

    with plt.rc_context({**_STYLE, **spec.style}):
        fig, ax = plt.subplots()
        for key, label, color, offset in (
            ("corr_s", "s-shift", "#4c72b0", -1.0),
            ("corr_t", "t-shift", "#dd8452", 1.0),
        ):
            jitter = offset * 0.004 * (max(deltas) - min(deltas) or 1.0)
            ax.errorbar(
                [d + jitter for d in deltas],
                [run[key] for run in runs],
                yerr=[run[f"{key}_err"] for run in runs],
                marker="o", capsize=3, lw=1.2, color=color, label=label,
            )
        ax.set_xlabel("l1 distance delta")
        ax.set_ylabel("correlation with lambda_1(0, 0)")
        ax.set_title(f"decorrelation across {len(runs)} run(s)")
        ax.legend()
        return _save(fig, spec.out_path)


RENDERERS = {
    "distribution-overlay": render_distribution_overlay,
    "correlation-curve": render_correlation_curve,
}


def render(spec):
    return RENDERERS[spec.kind](spec)
