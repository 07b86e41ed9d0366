"""Config-driven experiment runners: the limit theorems as desk-scale
statistical checks, with reproducible persistence.

Every runner consumes an ExperimentConfig, returns a ResultTable, and
(when the config names an output directory) writes result.csv,
result.json, and the per-trial sample files the plotting component
reads.  For a fixed (config, seed) every CSV byte is reproducible; the
timestamp lives only in result.json.
"""

import csv
import datetime
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import __version__
from .airy import reference_tables
from .chebyshev import mc_mixed_moments
from .entries import EntryProcessSpec, MatrixPath, snapshot_batch
from .pathsum import MomentSpec, OracleOutOfScope, exact_mixed_moment, exact_modified_moment
from .scaling import build_line_ensemble, evaluate_line, scale_spectrum, scaling_maps
from .spectra import corner_grid

EXPERIMENT_KINDS = (
    "edge-distribution",
    "l1-stationarity",
    "continuity-probe",
    "moment-convergence",
)
_DISTRIBUTIONAL = EXPERIMENT_KINDS[:3]
_CHUNK = 256
_CONTINUITY_STRIDES = (1, 2, 4, 8)
_CONTINUITY_JMAX = 3


def _schema():
    from importlib import resources

    source = resources.files("cornerlab.data") / "config_schema.json"
    return json.loads(source.read_text())


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    ensemble: EntryProcessSpec
    m: int
    trials: int
    points: tuple = ((0.0, 0.0),)
    j_indices: tuple = (1,)
    seed: int = 0
    out_dir: str = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 100:
            raise ValueError(f"trials must be >= 100, got {self.trials}")
        if self.kind in _DISTRIBUTIONAL and self.m < 50:
            raise ValueError("distributional experiments need M >= 50")
        if self.m < 8:
            raise ValueError("M must be at least 8")
        object.__setattr__(
            self, "points", tuple((float(s), float(t)) for s, t in self.points)
        )
        object.__setattr__(self, "j_indices", tuple(int(j) for j in self.j_indices))
        for s, t in self.points:
            _, n_real = scaling_maps(self.m, s, t)
            if n_real < 3:
                raise ValueError(f"query point (s={s}, t={t}) has N(t) = {n_real:.2f} < 3")
        if any(j < 1 for j in self.j_indices):
            raise ValueError("j indices are 1-based")

    @property
    def beta(self):
        return self.ensemble.beta

    def as_dict(self):
        return {
            "kind": self.kind,
            "ensemble": {
                "kind": self.ensemble.kind,
                "beta": self.ensemble.beta,
                "zero_diagonal": self.ensemble.zero_diagonal,
            },
            "m": self.m,
            "trials": self.trials,
            "points": [list(p) for p in self.points],
            "j_indices": list(self.j_indices),
            "seed": self.seed,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, obj, out_dir=None):
        import jsonschema

        jsonschema.validate(obj, _schema())
        ensemble = EntryProcessSpec(
            kind=obj["ensemble"]["kind"],
            beta=int(obj["ensemble"]["beta"]),
            zero_diagonal=obj["ensemble"].get("zero_diagonal"),
        )
        return cls(
            kind=obj["kind"],
            ensemble=ensemble,
            m=int(obj["m"]),
            trials=int(obj["trials"]),
            points=tuple(tuple(p) for p in obj.get("points", [[0.0, 0.0]])),
            j_indices=tuple(obj.get("j_indices", [1])),
            seed=int(obj.get("seed", 0)),
            out_dir=out_dir if out_dir is not None else obj.get("out_dir"),
        )

    @classmethod
    def from_json(cls, text, out_dir=None):
        return cls.from_dict(json.loads(text), out_dir=out_dir)

    def config_hash(self):
        # out_dir deliberately excluded: the hash names the experiment,
        # not where its files land
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ResultTable:
    metadata: dict
    statistics: tuple  # (name, value, stderr) triples

    def __post_init__(self):
        for key in ("config_hash", "seed", "timestamp", "version"):
            if key not in self.metadata:
                raise ValueError(f"metadata missing {key}")

    def value(self, name):
        for row, value, _ in self.statistics:
            if row == name:
                return value
        raise KeyError(name)

    def stderr(self, name):
        for row, _, err in self.statistics:
            if row == name:
                return err
        raise KeyError(name)


def _metadata(config):
    return {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }


def _cell(v):
    # exact round-trip text for floats; numpy scalars are floats too, but
    # their repr is not bare digits
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def write_result(config, table, files):
    """Persist a run: result.csv + result.json + the named sample files.

    files maps filename -> (header tuple, row iterable).  Returns the
    list of paths written.  The timestamp appears only in result.json;
    every CSV byte is a function of (config, seed).
    """
    out_dir = config.out_dir
    if out_dir is None:
        return []
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "result.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "value", "stderr"])
        for name, value, err in table.statistics:
            writer.writerow([name, _cell(float(value)), _cell(float(err))])
    written.append(path)
    for name, (header, rows) in sorted(files.items()):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
        written.append(path)
    path = os.path.join(out_dir, "result.json")
    payload = {
        "metadata": table.metadata,
        "config": config.as_dict(),
        "statistics": [
            {"statistic": n, "value": v, "stderr": e} for n, v, e in table.statistics
        ],
        "files": sorted(files),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


# ------------------------------------------------------------ statistics

def ks_distance(samples, cdf_table):
    """Sup distance between the empirical CDF and an interpolated table."""
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    if n < 100:
        raise ValueError(f"need at least 100 samples, got {n}")
    if samples[0] < cdf_table.xs[0] or samples[-1] > cdf_table.xs[-1]:
        raise ValueError(
            f"samples span [{samples[0]:.3f}, {samples[-1]:.3f}], "
            f"outside the table grid [{cdf_table.xs[0]}, {cdf_table.xs[-1]}]"
        )
    ref = cdf_table.evaluate(samples)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - ref), np.max(ref - (i - 1) / n)))


def two_sample_ks(a, b):
    """Two-sample sup distance between empirical CDFs."""
    from scipy.stats import ks_2samp

    return float(ks_2samp(a, b).statistic)


def _pearson(x, y):
    if np.array_equal(x, y):
        return 1.0
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))


def _jackknife_corr_diff_se(x, ys, yt):
    """Leave-one-out standard error of corr(x, ys) - corr(x, yt)."""
    n = len(x)

    def loo(a, b):
        sa, sb = a.sum(), b.sum()
        saa, sbb, sab = a @ a, b @ b, a @ b
        la, lb = sa - a, sb - b
        laa, lbb, lab = saa - a * a, sbb - b * b, sab - a * b
        cov = lab - la * lb / (n - 1)
        va = laa - la * la / (n - 1)
        vb = lbb - lb * lb / (n - 1)
        return cov / np.sqrt(va * vb)

    d = loo(x, ys) - loo(x, yt)
    return float(np.sqrt((n - 1) / n * np.sum((d - d.mean()) ** 2)))


# --------------------------------------------------------------- runners

def edge_samples(config):
    """Edge-scaled top eigenvalue at (s, t) = (0, 0), one per trial."""
    path = MatrixPath(config.ensemble, config.seed)
    out = np.empty(config.trials)
    # same float ops as scale_spectrum, element by element
    scale = np.sqrt(np.cbrt(float(config.m)))
    shift = 2.0 * np.sqrt(config.m)
    for start in range(0, config.trials, _CHUNK):
        idx = range(start, min(start + _CHUNK, config.trials))
        hs = snapshot_batch(path, 0.0, config.m, idx)
        top = np.linalg.eigvalsh(hs)[:, -1]
        out[start : start + len(idx)] = scale * (top - shift)
    return out


def run_edge_distribution(config):
    """Sample lambda_1(0, 0) and compare with the Tracy-Widom reference."""
    if config.kind != "edge-distribution":
        raise ValueError(f"config kind {config.kind!r} is not edge-distribution")
    samples = edge_samples(config)
    reference = reference_tables()[config.beta]
    ks = ks_distance(samples, reference)
    n = config.trials
    stats = (
        ("ks_distance", ks, 0.26 / math.sqrt(n)),  # null-scale fluctuation
        ("lambda1_mean", float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n))),
        ("lambda1_std", float(samples.std(ddof=1)), float(samples.std(ddof=1) / math.sqrt(2 * n))),
    )
    table = ResultTable(metadata=_metadata(config), statistics=stats)
    order = np.sort(samples)
    write_result(
        config,
        table,
        {
            "samples.csv": (("trial", "lambda1"), list(enumerate(samples))),
            "ecdf.csv": (
                ("lambda", "empirical_cdf"),
                [(v, (i + 1) / n) for i, v in enumerate(order)],
            ),
        },
    )
    return table


def stationarity_samples(config):
    """Per-trial triple (lambda1(0,0), lambda1(d,0), lambda1(0,d))."""
    delta = _stationarity_delta(config.points)
    m = config.m
    tau_query, n_real = scaling_maps(m, delta, delta)
    taus = [0.0] if delta == 0.0 else [0.0, tau_query]
    n_values = sorted({m, int(math.floor(n_real)), int(math.ceil(n_real))})
    path = MatrixPath(config.ensemble, config.seed)
    out = np.empty((config.trials, 3))
    for trial in range(config.trials):
        grid = corner_grid(path, taus, n_values, trial)
        ens = build_line_ensemble(grid, m, j_max=1)
        out[trial, 0] = evaluate_line(ens, 1, 0.0, 0.0)
        out[trial, 1] = evaluate_line(ens, 1, delta, 0.0)
        out[trial, 2] = evaluate_line(ens, 1, 0.0, delta)
    return delta, out


def _stationarity_delta(points):
    if len(points) != 3:
        raise ValueError("stationarity needs points ((0,0), (d,0), (0,d))")
    rest = [p for p in points if p != (0.0, 0.0)]
    if not rest:
        return 0.0
    deltas = {s + t for s, t in rest}
    shapes = {tuple(bool(c) for c in p) for p in rest}
    if len(rest) != 2 or len(deltas) != 1 or shapes != {(True, False), (False, True)}:
        raise ValueError("stationarity needs points ((0,0), (d,0), (0,d))")
    return deltas.pop()


def run_l1_stationarity(config):
    """Correlation of the top line across an s-shift vs a t-shift of
    equal l1 size; the limit says the two agree."""
    if config.kind != "l1-stationarity":
        raise ValueError(f"config kind {config.kind!r} is not l1-stationarity")
    delta, samples = stationarity_samples(config)
    base, shift_s, shift_t = samples.T
    corr_s = _pearson(base, shift_s)
    corr_t = _pearson(base, shift_t)
    if delta == 0.0:
        diff_se = 0.0
    else:
        diff_se = _jackknife_corr_diff_se(base, shift_s, shift_t)
    n = config.trials

    def se_single(r):
        return (1.0 - r * r) / math.sqrt(max(n - 3, 1))

    stats = (
        ("corr_s", corr_s, se_single(corr_s)),
        ("corr_t", corr_t, se_single(corr_t)),
        ("corr_diff", corr_s - corr_t, diff_se),
        ("delta", delta, 0.0),
    )
    table = ResultTable(metadata=_metadata(config), statistics=stats)
    write_result(
        config,
        table,
        {
            "samples.csv": (
                ("trial", "lambda1_base", "lambda1_s_shift", "lambda1_t_shift"),
                [(i, *row) for i, row in enumerate(samples)],
            )
        },
    )
    return table


def continuity_increments(config, stride):
    """Per-trial mean over disjoint h-grid steps of max_{j<=3}
    |lambda_j(0, t+h) - lambda_j(0, t)|, h = stride/(2 M^{2/3}).

    stride 0 compares each corner with itself and is identically 0.
    """
    m = config.m
    span = max(_CONTINUITY_STRIDES)
    path = MatrixPath(config.ensemble, config.seed)
    out = np.empty(config.trials)
    for trial in range(config.trials):
        grid = corner_grid(path, [0.0], list(range(m, m + span + 1)), trial)
        lines = np.stack(
            [
                scale_spectrum(m, grid.frames[(0.0, n)])[:_CONTINUITY_JMAX]
                for n in range(m, m + span + 1)
            ]
        )
        if stride == 0:
            out[trial] = 0.0
            continue
        starts = range(0, span + 1 - stride, stride)
        incs = [
            np.max(np.abs(lines[l + stride] - lines[l])) for l in starts
        ]
        out[trial] = float(np.mean(incs))
    return out


def run_continuity_probe(config):
    """Mean modulus of the top three lines over dyadic t-meshes, with a
    log-log slope fit; applies to the unimodular ensemble only."""
    if config.kind != "continuity-probe":
        raise ValueError(f"config kind {config.kind!r} is not continuity-probe")
    if config.ensemble.kind != "resampled-unimodular":
        raise ValueError("continuity probe requires the resampled-unimodular ensemble")
    m = config.m
    base = 1.0 / (2.0 * np.cbrt(float(m)) ** 2)
    n = config.trials
    per_stride = {k: continuity_increments(config, k) for k in _CONTINUITY_STRIDES}
    means = np.array([per_stride[k].mean() for k in _CONTINUITY_STRIDES])
    sems = np.array(
        [per_stride[k].std(ddof=1) / math.sqrt(n) for k in _CONTINUITY_STRIDES]
    )
    hs = base * np.array(_CONTINUITY_STRIDES, dtype=float)
    # weighted log-log fit; sigma of log(mean) is sem/mean
    w = (means / sems) ** 2
    lx = np.log(hs)
    ly = np.log(means)
    wx = np.sum(w * lx) / np.sum(w)
    wy = np.sum(w * ly) / np.sum(w)
    sxx = np.sum(w * (lx - wx) ** 2)
    slope = float(np.sum(w * (lx - wx) * (ly - wy)) / sxx)
    slope_se = float(1.0 / math.sqrt(sxx))
    stats = [("exponent", slope, slope_se)]
    stats.append(("exponent_ci95_low", slope - 1.96 * slope_se, 0.0))
    stats.append(("exponent_ci95_high", slope + 1.96 * slope_se, 0.0))
    for k, mean, sem in zip(_CONTINUITY_STRIDES, means, sems):
        stats.append((f"mean_increment_h{k}", float(mean), float(sem)))
    table = ResultTable(metadata=_metadata(config), statistics=tuple(stats))
    rows = [
        (i, *(per_stride[k][i] for k in _CONTINUITY_STRIDES)) for i in range(n)
    ]
    header = ("trial",) + tuple(f"increment_h{k}" for k in _CONTINUITY_STRIDES)
    write_result(config, table, {"samples.csv": (header, rows)})
    return table


def _catalan(p):
    return math.comb(2 * p, p) // (p + 1)


def _moment_battery(config):
    """(label, MomentSpec, benchmark) rows compared by run_moment_convergence."""
    rows = []
    for m in (2, 3, 4, 6):
        rows.append(
            (f"plain_m{m}_N4", MomentSpec("plain", (m,), (0.0,), (4,)), None)
        )
    for m in (2, 4):
        rows.append(
            (f"modified_m{m}_N4", MomentSpec("modified", (m,), (0.0,), (4,)), None)
        )
    rows.append(
        (
            "plain_m22_N33_twotime",
            MomentSpec("plain", (2, 2), (0.0, 0.4), (3, 3)),
            None,
        )
    )
    big = config.m
    for m in (2, 4):
        benchmark = big * _catalan(m // 2) / 4 ** (m // 2)
        rows.append(
            (
                f"plain_m{m}_N{big}_catalan",
                MomentSpec("plain", (m,), (0.0,), (big,)),
                benchmark,
            )
        )
    return rows


def run_moment_convergence(config):
    """Monte Carlo moments against the exact path oracle (where its
    expectation rules apply) and the large-N Catalan benchmark."""
    if config.kind != "moment-convergence":
        raise ValueError(f"config kind {config.kind!r} is not moment-convergence")
    stats = []
    comparison = []
    for label, spec, benchmark in _moment_battery(config):
        mc = mc_mixed_moments(spec, config.ensemble, config.trials, config.seed)
        try:
            if spec.kind == "plain":
                oracle = exact_mixed_moment(spec, config.ensemble)
            else:
                oracle = exact_modified_moment(spec, config.ensemble)
        except OracleOutOfScope:
            oracle = None
        stats.append((f"{label}_mc", mc["estimate"], mc["stderr"]))
        if oracle is not None:
            stats.append((f"{label}_oracle", float(oracle), 0.0))
        if benchmark is not None:
            stats.append((f"{label}_benchmark", float(benchmark), 0.0))
        comparison.append(
            (
                label,
                mc["estimate"],
                mc["stderr"],
                "" if oracle is None else float(oracle),
                "" if benchmark is None else float(benchmark),
            )
        )
    table = ResultTable(metadata=_metadata(config), statistics=tuple(stats))
    write_result(
        config,
        table,
        {
            "comparison.csv": (
                ("case", "mc", "mc_stderr", "oracle", "benchmark"),
                comparison,
            )
        },
    )
    return table


RUNNERS = {
    "edge-distribution": run_edge_distribution,
    "l1-stationarity": run_l1_stationarity,
    "continuity-probe": run_continuity_probe,
    "moment-convergence": run_moment_convergence,
}


def run(config):
    return RUNNERS[config.kind](config)
