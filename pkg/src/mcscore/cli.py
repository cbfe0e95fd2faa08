"""Command-line front end.

Subcommands::

    mcscore run    --target himmelblau --T 3 --dt 0.01 --K 1000 --n 2000 --modes builtin
    mcscore probe  --target gauss-mix --mixture mix.json --theta 0 --t 0.5 --K 2000
    mcscore hist   --samples out/samples.csv --bins 80 --target tanh1d
    mcscore modes  --samples out/samples.csv --target himmelblau --modes builtin

Exit status is 0 on success, 2 for usage errors and 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .diffusion import make_time, perturbation_points
from .exceptions import DomainTooSmallError, MCScoreError, UsageError
from .io import read_json, read_samples, write_json, write_samples
from .oracle import (
    ModeSpec,
    analytic_score_gaussian_mixture,
    mode_report,
    quadrature_score_1d,
    true_density_1d,
)
from .sampler import RNG_SCHEME, SamplerConfig, sample_batch
from .score import SwitchPolicy, _softmax, score_s1, score_s2
from .target import (
    GaussianMixtureSpec,
    make_constant,
    make_gaussian_mixture,
    make_himmelblau,
    make_tanh_bumps_1d,
)

logger = logging.getLogger("mcscore")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
OUT_ENV = "MCSCORE_OUT"
TARGETS = ("tanh1d", "himmelblau", "gauss-mix", "constant")
# fraction of failed particles above which `run` exits non-zero
FAILURE_TOLERANCE = 0.01


def build_target(name, mixture=None, dim=1):
    """Construct a built-in target; ``mixture`` is a path or a parsed JSON document."""
    if name == "tanh1d":
        return make_tanh_bumps_1d()
    if name == "himmelblau":
        return make_himmelblau()
    if name == "constant":
        return make_constant(dim)
    if name == "gauss-mix":
        if mixture is None:
            raise UsageError("--target gauss-mix requires --mixture <path.json>")
        doc = read_json(mixture) if isinstance(mixture, (str, Path)) else mixture
        return make_gaussian_mixture(GaussianMixtureSpec.from_json(doc))
    raise UsageError(f"unknown target {name!r}; choose from {', '.join(TARGETS)}")


def _mixture_spec(target):
    if target.name == "gauss-mix":
        return GaussianMixtureSpec.from_json(target.params["mixture"])
    if target.name == "constant":
        return GaussianMixtureSpec(np.zeros((1, target.dim)), [1.0])
    return None


def build_modes(arg, target, half_width=None, pdf_samples=None):
    if arg is None:
        return None
    if arg == "builtin":
        if target.modes is None:
            raise UsageError(f"target {target.name} has no built-in mode list")
        doc = {"centers": target.modes}
    elif isinstance(arg, dict):
        doc = arg
    else:
        doc = read_json(arg)
    return ModeSpec.from_json(doc, half_width=half_width, pdf_samples_per_mode=pdf_samples)


def _modes_rng(seed):
    # separate from every particle stream, which are keyed (seed, i)
    return np.random.default_rng([int(seed), 0x6D6F646573])


def _out_dir(path):
    out = Path(path or os.environ.get(OUT_ENV) or "mcscore-out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_sample(args) -> int:
    if args.manifest:
        manifest = read_json(args.manifest)
        try:
            tdoc = manifest["target"]
            target = build_target(tdoc["name"], tdoc["params"].get("mixture"), tdoc["params"].get("dim", 1))
            config = SamplerConfig.from_dict(manifest["config"])
            modes = build_modes(manifest.get("modes"), target)
            fmt = manifest.get("format", "csv")
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed manifest {args.manifest}: {exc}") from exc
    else:
        for flag in ("T", "dt", "K", "n"):
            if getattr(args, flag) is None:
                raise UsageError(f"--{flag} is required unless --manifest is given")
        target = build_target(args.target, args.mixture, args.dim)
        config = SamplerConfig(
            T=args.T,
            delta=args.dt,
            K=args.K,
            n=args.n,
            switch_time=args.switch_time,
            seed=args.seed,
            dim=target.dim,
        )
        modes = build_modes(args.modes, target, args.half_width, args.pdf_samples)
        fmt = args.format
    out = _out_dir(args.out)

    started = _now()
    result = sample_batch(target, config, threads=args.threads)
    samples_path = write_samples(out / f"samples.{fmt}", result.samples, fmt)
    paths = {"samples": str(samples_path)}
    report = None
    if modes is not None:
        report = mode_report(result.samples, target, modes, _modes_rng(config.seed))
        paths["modes"] = str(write_json(out / "modes.json", report.to_json()))

    manifest = {
        "tool": "mcscore",
        "version": __version__,
        "rng_scheme": RNG_SCHEME,
        "config": config.to_dict(),
        "steps": config.steps,
        "target": {"name": target.name, "params": target.params},
        "modes": None if modes is None else modes.to_json(),
        "format": fmt,
        "started": started,
        "finished": _now(),
        "wall_time": result.wall_time,
        "f_evals": result.f_evals,
        "grad_evals": result.grad_evals,
        "failures": [vars(f) for f in result.failures],
        "outputs": paths,
    }
    write_json(out / "manifest.json", manifest)

    print(
        f"n={config.n} steps={config.steps} f_evals={result.f_evals} "
        f"grad_evals={result.grad_evals} wall={result.wall_time:.2f}s failed={result.n_failed}"
    )
    if report is not None:
        print("sampled_proportions", np.array2string(report.sampled_proportions, precision=3))
        print("pdf_proportions    ", np.array2string(report.pdf_proportions, precision=3))
    if result.n_failed:
        print(f"warning: {result.n_failed} particle(s) failed", file=sys.stderr)
        if result.n_failed >= FAILURE_TOLERANCE * config.n:
            return EXIT_RUNTIME
    return EXIT_OK


def _parse_vector(text, dim):
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse vector {text!r}") from exc
    if len(values) != dim:
        raise UsageError(f"expected {dim} comma-separated values, got {len(values)}")
    return np.array(values)


def probe_scores(target, theta, t, K, replicates, rng):
    """Both estimators on ``replicates`` independent pools of ``K`` draws.

    Returns ``(s1, s2)`` arrays of shape ``(replicates, d)``.
    """
    time = make_time(t)
    if time.t <= 0:
        raise UsageError("the score can only be probed at t > 0")
    draws = rng.standard_normal((replicates, K, target.dim))
    thetas = np.broadcast_to(theta, (replicates, target.dim))
    points = perturbation_points(thetas, time, draws)
    weights = _softmax(target.f_batch(points))
    s1 = score_s1(thetas, time, draws, weights)
    s2 = score_s2(thetas, time, target.grad_batch(points), weights)
    return s1, s2


def run_score_probe(args) -> int:
    target = build_target(args.target, args.mixture, args.dim)
    theta = _parse_vector(args.theta, target.dim)
    if args.K < 1 or args.replicates < 2:
        raise UsageError("--K must be >= 1 and --replicates >= 2")
    s1, s2 = probe_scores(target, theta, args.t, args.K, args.replicates, np.random.default_rng(args.seed))
    time = make_time(args.t)

    oracle, source = None, None
    spec = _mixture_spec(target)
    if spec is not None:
        oracle, source = analytic_score_gaussian_mixture(spec, theta, time), "analytic"
    elif target.dim == 1:
        try:
            oracle = np.array([quadrature_score_1d(target, theta[0], time, args.grid_lo, args.grid_hi, args.grid_step)])
            source = "quadrature"
        except DomainTooSmallError as exc:
            logger.warning("no quadrature oracle: %s", exc)

    def stats(s):
        return s.mean(axis=0), s.std(axis=0, ddof=1) / np.sqrt(len(s))

    (m1, e1), (m2, e2) = stats(s1), stats(s2)
    doc = {
        "target": target.name,
        "theta": theta.tolist(),
        "t": args.t,
        "K": args.K,
        "replicates": args.replicates,
        "dispatched": SwitchPolicy(args.switch_time).estimator_for(args.t),
        "s1_mean": m1.tolist(),
        "s1_stderr": e1.tolist(),
        "s2_mean": m2.tolist(),
        "s2_stderr": e2.tolist(),
        "oracle": None if oracle is None else oracle.tolist(),
        "oracle_source": source,
    }
    if args.json:
        print(json.dumps(doc))
    else:
        fmt = lambda v: ", ".join(f"{x:.6g}" for x in v)  # noqa: E731
        print(f"s1      mean [{fmt(m1)}]  stderr [{fmt(e1)}]")
        print(f"s2      mean [{fmt(m2)}]  stderr [{fmt(e2)}]")
        print(f"oracle  {'n/a' if oracle is None else '[' + fmt(oracle) + ']'}  ({source or 'none'})")
        print(f"dispatched estimator at t={args.t}: {doc['dispatched']}")
    return EXIT_OK


def histogram_table(samples, bins, value_range=None, column=0, target=None):
    """Bin one coordinate of ``samples``; returns a dict of equal-length columns."""
    x = np.asarray(samples, dtype=float)[:, column]
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise UsageError("no finite samples to bin")
    counts, edges = np.histogram(x, bins=bins, range=value_range)
    widths = np.diff(edges)
    table = {
        "bin_left": edges[:-1],
        "bin_right": edges[1:],
        "bin_center": 0.5 * (edges[:-1] + edges[1:]),
        "count": counts,
        "density": counts / (x.size * widths),
    }
    if target is not None:
        if target.dim != 1:
            raise UsageError("true-density overlay is only available for 1-D targets")
        table["true_density"] = true_density_1d(target, table["bin_center"])
    return table


def run_histogram(args) -> int:
    samples = read_samples(args.samples)
    if args.bins < 1:
        raise UsageError("--bins must be >= 1")
    if not 0 <= args.column < samples.shape[1]:
        raise UsageError(f"--column must be in [0, {samples.shape[1]})")
    target = build_target(args.target, args.mixture, samples.shape[1]) if args.target else None
    value_range = tuple(args.range) if args.range else None
    table = histogram_table(samples, args.bins, value_range, args.column, target)
    out = Path(args.output) if args.output else Path(args.samples).with_name("hist.csv")
    cols = list(table)
    try:
        with out.open("w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in zip(*(table[c] for c in cols)):
                fh.write(",".join(format(float(v), ".17g") if not isinstance(v, (int, np.integer)) else str(v) for v in row) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc
    print(f"wrote {len(table['count'])} bins to {out}")
    return EXIT_OK


def run_modes(args) -> int:
    samples = read_samples(args.samples)
    target = build_target(args.target, args.mixture, samples.shape[1])
    modes = build_modes(args.modes, target, args.half_width, args.pdf_samples)
    report = mode_report(samples, target, modes, _modes_rng(args.seed))
    doc = report.to_json()
    if args.output:
        write_json(args.output, doc)
    print(json.dumps(doc))
    return EXIT_OK


def _common(parser, sampling=True):
    parser.add_argument("--target", choices=TARGETS, default=None if not sampling else "tanh1d")
    parser.add_argument("--mixture", help="JSON list of {mean: [...], weight: w}")
    parser.add_argument("--dim", type=int, default=1, help="dimension of the constant target")
    parser.add_argument("--switch-time", dest="switch_time", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)


def _mode_flags(parser):
    parser.add_argument("--modes", help="'builtin' or a JSON file with centers")
    parser.add_argument("--half-width", dest="half_width", type=float, default=None)
    parser.add_argument("--pdf-samples", dest="pdf_samples", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcscore", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"mcscore {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="sample a target with the reverse SDE")
    _common(run)
    run.add_argument("--T", type=float)
    run.add_argument("--dt", type=float)
    run.add_argument("--K", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./mcscore-out)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--threads", type=int, default=0, help="0 = one per CPU; never changes results")
    run.add_argument("--manifest", help="re-run exactly the run described by a manifest.json")
    _mode_flags(run)
    run.set_defaults(func=run_sample)

    probe = sub.add_parser("probe", help="compare both score estimators against an oracle")
    _common(probe)
    probe.add_argument("--theta", required=True, help="comma-separated point")
    probe.add_argument("--t", type=float, required=True)
    probe.add_argument("--K", type=int, default=1000)
    probe.add_argument("--replicates", type=int, default=200)
    probe.add_argument("--grid-lo", dest="grid_lo", type=float, default=-12.0)
    probe.add_argument("--grid-hi", dest="grid_hi", type=float, default=12.0)
    probe.add_argument("--grid-step", dest="grid_step", type=float, default=1e-3)
    probe.add_argument("--json", action="store_true")
    probe.set_defaults(func=run_score_probe)

    hist = sub.add_parser("hist", help="histogram data (CSV) from a samples file")
    hist.add_argument("--samples", required=True)
    hist.add_argument("--bins", type=int, default=50)
    hist.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    hist.add_argument("--column", type=int, default=0)
    hist.add_argument("--target", choices=TARGETS, help="append the true density (1-D only)")
    hist.add_argument("--mixture")
    hist.add_argument("--output")
    hist.set_defaults(func=run_histogram)

    modes = sub.add_parser("modes", help="mode-proportion report for a samples file")
    _common(modes)
    _mode_flags(modes)
    modes.add_argument("--samples", required=True)
    modes.add_argument("--output")
    modes.set_defaults(func=run_modes, modes="builtin")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mcscore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MCScoreError, FloatingPointError) as exc:
        print(f"mcscore: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
