"""Command-line front end: run experiments from JSON configs, query the
exact oracles, regenerate reference tables, and self-check an install.

Heavy imports happen inside the subcommands, after the group callback has
pinned the BLAS thread count; importing numpy first would lock it in.
"""

import json
import os

import click


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Experiment config (JSON, validated against the shipped schema).",
)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Directory for result.csv / result.json / sample files.",
)
@click.option("--threads", type=int, default=None, help="BLAS/OpenMP thread cap.")
@click.pass_context
def main(ctx, config_path, seed, out_dir, threads):
    """Simulation laboratory for corner processes of time-dependent
    Hermitian matrix ensembles."""
    if threads is not None:
        if threads < 1:
            raise click.UsageError("--threads must be positive")
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    ctx.obj = {"config_path": config_path, "seed": seed, "out_dir": out_dir}


def _load_config(obj, allowed, command):
    from cornerlab.experiments import ExperimentConfig

    if obj["config_path"] is None:
        raise click.UsageError(f"`{command}` needs a global --config <file>")
    with open(obj["config_path"]) as fh:
        data = json.load(fh)
    if obj["seed"] is not None:
        data["seed"] = obj["seed"]
    config = ExperimentConfig.from_dict(data, out_dir=obj["out_dir"])
    if config.kind not in allowed:
        raise click.UsageError(
            f"`{command}` handles {', '.join(allowed)}; config says {config.kind!r}"
        )
    return config


def _run_and_report(config):
    from cornerlab.experiments import run

    table = run(config)
    click.echo(f"kind: {config.kind}")
    click.echo(f"config hash: {table.metadata['config_hash']}")
    for name, value, err in table.statistics:
        if err:
            click.echo(f"{name} = {value:.8g} (stderr {err:.3g})")
        else:
            click.echo(f"{name} = {value:.8g}")
    if config.out_dir is not None:
        click.echo(f"wrote {os.path.join(config.out_dir, 'result.json')}")


@main.command()
@click.pass_obj
def simulate(obj):
    """Run a distributional experiment (edge-distribution,
    l1-stationarity, or continuity-probe)."""
    from cornerlab.experiments import EXPERIMENT_KINDS

    _run_and_report(_load_config(obj, EXPERIMENT_KINDS[:3], "simulate"))


@main.command()
@click.pass_obj
def moments(obj):
    """Run the moment-convergence battery (MC vs exact oracle vs the
    Catalan benchmark)."""
    _run_and_report(_load_config(obj, ("moment-convergence",), "moments"))


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


@main.command()
@click.option("--model", type=click.Choice(["plain", "modified"]), default="plain")
@click.option("--powers", required=True, help="Comma list of exponents, one per factor.")
@click.option("--times", required=True, help="Comma list of times tau_p.")
@click.option("--sizes", required=True, help="Comma list of corner sizes N_p.")
@click.option(
    "--ensemble",
    type=click.Choice(["gaussian-ou", "resampled-gaussian", "resampled-unimodular"]),
    default="resampled-unimodular",
)
@click.option("--beta", type=click.Choice(["1", "2"]), default="1")
def oracle(model, powers, times, sizes, ensemble, beta):
    """Exact mixed moment via closed-path enumeration (small sizes)."""
    from cornerlab.entries import EntryProcessSpec
    from cornerlab.pathsum import (
        MomentSpec,
        OracleOutOfScope,
        exact_mixed_moment,
        exact_modified_moment,
    )

    spec = MomentSpec(model, _floats(powers), _floats(times), _ints(sizes))
    entry_spec = EntryProcessSpec(ensemble, int(beta))
    compute = exact_mixed_moment if model == "plain" else exact_modified_moment
    try:
        value = compute(spec, entry_spec)
    except OracleOutOfScope as exc:
        raise click.ClickException(f"oracle out of scope: {exc}")
    click.echo(f"{value!r}")


def _diagram_from_flags(name, file):
    from cornerlab.diagrams import load_diagram

    if (name is None) == (file is None):
        raise click.UsageError("pass exactly one of --name / --file")
    try:
        return load_diagram(name if name is not None else file)
    except ValueError as exc:
        # load_diagram validates eagerly, so a malformed file surfaces here
        raise click.ClickException(str(exc))


@main.group()
def diagram():
    """Inspect and integrate pairing diagrams."""


@diagram.command("validate")
@click.option("--name", default=None, help="A builtin diagram name.")
@click.option(
    "--file", type=click.Path(exists=True, dir_okay=False), default=None,
    help="A diagram JSON file.",
)
def diagram_validate(name, file):
    """Check the combinatorial invariants; exit 1 on violations."""
    from cornerlab.diagrams import validate_diagram

    d = _diagram_from_flags(name, file)
    report = validate_diagram(d)
    if report.passed:
        click.echo(f"{d.name}: valid (k={d.k}, s={d.s}, orientable={d.orientable})")
        return
    for problem in report.problems:
        click.echo(f"{d.name}: {problem}")
    raise SystemExit(1)


@diagram.command("integrate")
@click.option("--name", default=None)
@click.option("--file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--alphas", required=True, help="Comma list, one per path.")
@click.option("--ss", required=True, help="Comma list of s coordinates.")
@click.option("--ts", required=True, help="Comma list of t coordinates.")
@click.option(
    "--method",
    type=click.Choice(["simplex-quadrature", "monte-carlo"]),
    default="simplex-quadrature",
)
@click.option("--budget", type=int, default=None, help="Monte Carlo sample budget.")
@click.option(
    "--beta", type=click.Choice(["1", "2"]), default=None,
    help="Route through the beta filter (beta=2 rejects non-orientable).",
)
@click.option("--seed", type=int, default=0)
def diagram_integrate(name, file, alphas, ss, ts, method, budget, beta, seed):
    """Integrate exp(-sum |dt|+|ds| l_e) over the length polytope."""
    from cornerlab.diagrams import integral_I, psi_sharp

    d = _diagram_from_flags(name, file)
    try:
        if beta is not None:
            value = psi_sharp(
                [d], int(beta), _floats(alphas), _floats(ss), _floats(ts),
                method=method, budget=budget, seed=seed,
            )
            click.echo(f"psi_sharp = {value!r}")
        else:
            out = integral_I(
                d, _floats(alphas), _floats(ss), _floats(ts),
                method=method, budget=budget, seed=seed,
            )
            click.echo(f"value = {out['value']!r}")
            click.echo(f"error_estimate = {out['error_estimate']!r}")
    except ValueError as exc:
        raise click.ClickException(str(exc))


@main.command()
@click.option(
    "--method", type=click.Choice(["painleve", "fredholm"]), default="painleve"
)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--nodes", type=int, default=None, help="Fredholm quadrature nodes.")
def tw(method, out_path, nodes):
    """Regenerate the Tracy-Widom reference CSV (beta 1 and 2 for the
    Painleve route; beta 2 only for the Fredholm route)."""
    from cornerlab.airy import FREDHOLM_NODES, tw_table, write_tables

    if method == "painleve":
        tables = [tw_table(1, method="painleve"), tw_table(2, method="painleve")]
    else:
        tables = [tw_table(2, method="fredholm", nodes=nodes or FREDHOLM_NODES)]
    write_tables(out_path, tables)
    betas = ", ".join(str(t.beta) for t in tables)
    click.echo(f"wrote {out_path} (method={method}, beta={betas})")


def _verify_battery():
    import numpy as np

    from cornerlab.airy import reference_tables, tw_cdf_fredholm
    from cornerlab.chebyshev import (
        P_eval,
        power_in_P_basis,
        trace_P_paths,
        trace_P_spectral,
    )
    from cornerlab.diagrams import (
        integral_I,
        load_diagram,
        phi_sharp,
        psi_from_sharp,
        sharp_from_psi,
    )
    from cornerlab.entries import (
        EntryProcessSpec,
        MatrixPath,
        covariance_check,
        hermitian_snapshot,
    )
    from cornerlab.experiments import ExperimentConfig, edge_samples
    from cornerlab.spectra import check_interlacing, corner_spectra

    def trace_identity():
        for beta in (1, 2):
            path = MatrixPath(EntryProcessSpec("resampled-unimodular", beta), seed=1)
            for trial in range(5):
                h = hermitian_snapshot(path, 0.0, 5, trial)
                for n in range(1, 6):
                    gap = abs(trace_P_paths(h, n) - trace_P_spectral(h, n))
                    assert gap <= 1e-9, f"beta={beta} n={n}: gap {gap:.2e}"

    def power_expansion():
        lams = np.linspace(-2.5, 2.5, 11)
        for n_size in (3, 10, 100):
            exp = power_in_P_basis(12, n_size)
            for lam in lams:
                gap = abs(exp.evaluate(lam) - lam**12)
                assert gap <= 1e-9 * max(1.0, abs(lam) ** 12), f"N={n_size}: {gap:.2e}"
        assert abs(P_eval(1, 6, 1.0) - 0.5) <= 1e-12

    def interlacing():
        for kind in ("gaussian-ou", "resampled-gaussian", "resampled-unimodular"):
            path = MatrixPath(EntryProcessSpec(kind, 2), seed=2)
            for trial in range(5):
                lower, upper = corner_spectra(path, 0.0, (29, 30), trial)
                report = check_interlacing(lower, upper)
                assert report.passed, f"{kind}: violation {report.worst_violation:.2e}"

    def covariance():
        for beta in (1, 2):
            spec = EntryProcessSpec("gaussian-ou", beta)
            out = covariance_check(spec, 0.1, 20_000, seed=3)
            gap = abs(out["empirical"] - out["model"])
            assert gap <= 3.0 * out["stderr"], f"beta={beta}: {gap:.3g}"
            if beta == 2:
                gap = abs(out["plain_empirical"])
                assert gap <= 3.0 * out["plain_stderr"]

    def tracy_widom():
        tables = reference_tables()
        for table in tables.values():
            table.validate()  # raises on any violated invariant
        f0 = float(tables[2].evaluate(np.array([0.0]))[0])
        assert abs(f0 - 0.9693728283) <= 1e-6, f"F2(0) = {f0:.10f}"
        assert abs(tw_cdf_fredholm(0.0) - f0) <= 1e-6

    def transforms():
        for alpha in (1.0, 2.5):
            got = phi_sharp(lambda a, s, t: 1.0, (alpha,), (0.0,), (0.0,))
            assert abs(got - 1.0 / np.sqrt(np.pi * alpha)) <= 1e-8
        psi = {(): 1.0, (1,): 0.7, (2,): 0.4, (1, 2): 0.3}
        rebuilt = psi_from_sharp(sharp_from_psi(psi))
        assert all(abs(rebuilt[k] - psi[k]) <= 1e-12 for k in psi)
        seg = load_diagram("one-path-projective")
        vol = integral_I(seg, (2.0,), (0.0,), (0.0,), method="simplex-quadrature")
        assert abs(vol["value"] - 1.0) <= 1e-9

    def edge_sanity():
        config = ExperimentConfig(
            "edge-distribution",
            EntryProcessSpec("resampled-unimodular", 2),
            m=50,
            trials=100,
            seed=4,
        )
        samples = edge_samples(config)
        assert -4.0 < samples.mean() < 0.0, f"mean {samples.mean():.3f}"
        assert 0.2 < samples.std() < 3.0

    return (
        ("chebyshev trace identity", trace_identity),
        ("power-in-P expansion", power_expansion),
        ("corner interlacing", interlacing),
        ("entry covariance", covariance),
        ("tracy-widom reference stack", tracy_widom),
        ("diagram transforms and volume", transforms),
        ("edge sample sanity", edge_sanity),
    )


@main.command()
def verify():
    """Fast self-check battery; exits nonzero on the first failure."""
    failures = 0
    for label, check in _verify_battery():
        try:
            check()
        except AssertionError as exc:
            failures += 1
            click.echo(f"FAIL {label}: {exc}")
        else:
            click.echo(f"ok   {label}")
    if failures:
        raise SystemExit(1)
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
