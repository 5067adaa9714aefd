"""Command line front end.

Five batch subcommands, all driven by one INI config plus a handful of
flags:

- predict: fixed points, Stieltjes values and a density profile -> CSV
- simulate: one sampled spectrum and its histogram -> CSV
- compare: Monte Carlo spectra against predictions -> CSV with summary
- conclab: concentration checks -> line-oriented report, gated exit status
- ingest: raw per-class sample files -> mixture descriptor

Commands exit 0 on success, 1 when a gated check fails or a solve does not
converge (diagnostics are still written), and 2 on configuration or data
errors (nothing is written).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import conc_lab
from .config import ExperimentConfig, load_config, parse_grid
from .equivalent import (
    atom_at_zero,
    density_prediction,
    stieltjes_from_delta,
)
from .errors import ConvergenceError, DataError, ParameterError, ShapeError
from .fixed_point import solve_delta
from .io import atomic_write_text, fmt_float, write_csv, write_matrix, read_matrix
from .model import estimate_class_model
from .sampler import empirical_spectrum, histogram, sample_mixture

__all__ = [
    "main",
    "cmd_predict",
    "cmd_simulate",
    "cmd_compare",
    "cmd_conclab",
    "cmd_ingest",
]


def _log(verbose: bool, message: str) -> None:
    if verbose:
        print(message, file=sys.stderr)


def _fixed_point_params(section) -> tuple[float, int]:
    tol = float(section.get("tol", 1e-12))
    max_iter = int(section.get("max_iter", 10_000))
    return tol, max_iter


def _auto_lambda_grid(mixture, count: int, workers: int) -> np.ndarray:
    """Locate the support by a coarse scan, then lay a linear grid over it."""
    cache = mixture.spectral()
    if cache is not None:
        top = float(cache.class_eigs.max(initial=0.0))
    else:
        top = max(
            float(np.linalg.eigvalsh(c.sigma)[-1]) for c in mixture.classes
        )
    if top <= 0.0:
        return np.linspace(1e-6, 1.0, count)
    bound = 4.0 * (1.0 + np.sqrt(mixture.gamma)) ** 2 * top
    coarse = np.geomspace(bound * 1e-4, bound, 120)
    scan = density_prediction(
        mixture, coarse, epsilon=1e-3 * bound, tol=1e-6, max_iter=500, workers=workers
    )
    peak = scan.density.max()
    if peak <= 0.0:
        return np.linspace(bound * 1e-4, bound, count)
    live = coarse[scan.density > 1e-4 * peak]
    lo = max(float(live.min()) * 0.5, bound * 1e-6)
    hi = float(live.max()) * 1.15
    return np.linspace(lo, hi, count)


def cmd_predict(
    config: ExperimentConfig,
    out_dir: str,
    seed: int | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> int:
    mixture = config.mixture()
    section = config.predict
    tol, max_iter = _fixed_point_params(section)
    z_grid = parse_grid(section.get("z_grid", "0.5:5:10"), "z_grid")
    if np.any(z_grid <= 0):
        raise ParameterError("z_grid must be strictly positive")

    delta_rows = []
    stieltjes_rows = []
    all_converged = True
    for z in z_grid:
        sol = solve_delta(mixture, float(z), tol=tol, max_iter=max_iter)
        all_converged &= sol.converged
        for l, d in enumerate(sol.delta):
            delta_rows.append((z, l, d, sol.residual, sol.iterations))
        m = stieltjes_from_delta(mixture, sol.delta, float(z))
        stieltjes_rows.append((z, m))
    _log(verbose, f"predict: solved {z_grid.size} z points")

    if "lambda_grid" in section:
        lambdas = parse_grid(section["lambda_grid"], "lambda_grid")
        if np.any(np.diff(lambdas) <= 0):
            raise ParameterError("lambda_grid must be strictly increasing")
    else:
        lambdas = _auto_lambda_grid(mixture, 200, threads)
    span = float(lambdas[-1] - lambdas[0]) or float(lambdas[-1]) or 1.0
    eps_text = section.get("epsilon", "auto")
    epsilon = 1e-3 * span if eps_text.strip() == "auto" else float(eps_text)
    pred = density_prediction(mixture, lambdas, epsilon, workers=threads)
    all_converged &= bool(pred.converged.all())
    _log(verbose, f"predict: density on {lambdas.size} points, epsilon={epsilon:g}")

    write_csv(
        os.path.join(out_dir, "delta.csv"),
        ("z", "class_index", "delta_prime", "residual", "iterations"),
        delta_rows,
    )
    write_csv(
        os.path.join(out_dir, "stieltjes.csv"), ("z", "m_pred"), stieltjes_rows
    )
    write_csv(
        os.path.join(out_dir, "density.csv"),
        ("lambda", "density", "converged"),
        [
            (lam, den, bool(conv))
            for lam, den, conv in zip(pred.lambdas, pred.density, pred.converged)
        ],
        comments=(
            f"atom_at_zero = {fmt_float(pred.atom_at_zero)}",
            f"epsilon = {fmt_float(pred.epsilon)}",
        ),
    )
    if not all_converged:
        print("predict: one or more solves did not converge", file=sys.stderr)
        return 1
    return 0


def _parse_bins(section):
    raw = section.get("bins", "20").strip()
    parts = raw.split()
    if len(parts) == 1:
        return int(parts[0])
    return np.array([float(v) for v in parts])


def cmd_simulate(
    config: ExperimentConfig,
    out_dir: str,
    seed: int | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> int:
    section = config.simulate
    if seed is None:
        seed = int(section.get("seed", 0))
    pairs = config.generator_pairs()
    sample = sample_mixture(pairs, seed)
    spectrum = empirical_spectrum(sample)
    bins = _parse_bins(section)
    transform = section.get("transform")
    hist = histogram(spectrum, bins, None if transform is None else float(transform))
    _log(verbose, f"simulate: seed={seed}, p={spectrum.p}, n={spectrum.n}")

    write_csv(
        os.path.join(out_dir, "spectrum.csv"),
        ("index", "eigenvalue"),
        list(enumerate(spectrum.values)),
        comments=(f"seed = {seed}",),
    )
    write_csv(
        os.path.join(out_dir, "histogram.csv"),
        ("bin_left", "bin_right", "mass"),
        [
            (hist.edges[i], hist.edges[i + 1], hist.masses[i])
            for i in range(hist.masses.size)
        ],
        comments=(f"seed = {seed}",),
    )
    return 0


def _binned_prediction(pred, edges: np.ndarray) -> np.ndarray:
    """Integrate a density profile over bins, adding the zero atom to its bin.

    Works from the cumulative trapezoid integral of the profile so that
    segments straddling a bin edge contribute their exact share.
    """
    lam = pred.lambdas
    den = pred.density
    cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * (den[1:] + den[:-1]) * np.diff(lam))]
    )
    at_edges = np.interp(edges, lam, cum, left=0.0, right=cum[-1])
    masses = np.diff(at_edges)
    zero_bin = np.searchsorted(edges, 0.0, side="right") - 1
    if 0 <= zero_bin < masses.size:
        masses[zero_bin] += pred.atom_at_zero
    elif zero_bin < 0 and edges[0] >= 0.0 and masses.size:
        # Support starting at the first edge keeps the atom in the first bin.
        masses[0] += pred.atom_at_zero
    return masses


def cmd_compare(
    config: ExperimentConfig,
    out_dir: str,
    seed: int | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> int:
    section = config.compare
    if seed is None:
        seed = int(section.get("seed", 0))
    trials = int(section.get("trials", 10))
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    tol, max_iter = _fixed_point_params(section)
    mixture = config.mixture()
    pairs = config.generator_pairs()
    z_grid = parse_grid(section.get("z_grid", "0.5:5:10"), "z_grid")
    if np.any(z_grid <= 0):
        raise ParameterError("z_grid must be strictly positive")

    from .sampler import derive_seed

    pooled = []
    m_emp = np.empty((trials, z_grid.size))
    for t in range(trials):
        sample = sample_mixture(pairs, derive_seed(seed, t))
        spectrum = empirical_spectrum(sample)
        pooled.append(spectrum.values)
        # Stieltjes values follow directly from the eigenvalues.
        m_emp[t] = [
            float(np.mean(1.0 / (spectrum.values + z))) for z in z_grid
        ]
    pooled = np.concatenate(pooled)
    _log(verbose, f"compare: {trials} trials sampled")

    all_converged = True
    m_pred = np.empty(z_grid.size)
    for i, z in enumerate(z_grid):
        sol = solve_delta(mixture, float(z), tol=tol, max_iter=max_iter)
        all_converged &= sol.converged
        m_pred[i] = stieltjes_from_delta(mixture, sol.delta, float(z))

    mean = m_emp.mean(axis=0)
    std = m_emp.std(axis=0, ddof=1) if trials > 1 else np.zeros(z_grid.size)
    abs_err = np.abs(mean - m_pred)
    sup_err = float(abs_err.max())

    nbins = _parse_bins(section)
    if np.ndim(nbins) == 0:
        top = float(pooled.max()) * (1.0 + 1e-9) or 1.0
        edges = np.linspace(0.0, top, int(nbins) + 1)
    else:
        edges = nbins
    counts, edges = np.histogram(pooled, bins=edges)
    emp_mass = counts / pooled.size

    if "lambda_grid" in section:
        lambdas = parse_grid(section["lambda_grid"], "lambda_grid")
    else:
        lo = max(float(edges[1]) * 1e-3, float(edges[-1]) * 1e-5)
        lambdas = np.linspace(lo, float(edges[-1]), max(200, 10 * (edges.size - 1)))
    span = float(lambdas[-1] - lambdas[0]) or 1.0
    eps_text = section.get("epsilon", "auto")
    epsilon = 1e-3 * span if eps_text.strip() == "auto" else float(eps_text)
    pred = density_prediction(mixture, lambdas, epsilon, workers=threads)
    all_converged &= bool(pred.converged.all())
    pred_mass = _binned_prediction(pred, edges)
    hist_l1 = float(np.abs(emp_mass - pred_mass).sum())
    _log(verbose, f"compare: sup_err={sup_err:g}, hist_l1={hist_l1:g}")

    write_csv(
        os.path.join(out_dir, "compare.csv"),
        ("z", "m_emp_mean", "m_emp_std", "m_pred", "abs_err"),
        [
            (z, mean[i], std[i], m_pred[i], abs_err[i])
            for i, z in enumerate(z_grid)
        ],
        comments=(
            f"sup_err = {fmt_float(sup_err)}",
            f"hist_l1 = {fmt_float(hist_l1)}",
            f"trials = {trials}",
            f"seed = {seed}",
        ),
    )
    if not all_converged:
        print("compare: one or more solves did not converge", file=sys.stderr)
        return 1
    return 0


def _record(name, value, stderr, n, seed, ok) -> str:
    err = fmt_float(stderr) if stderr is not None else "na"
    status = "pass" if ok else "fail"
    return (
        f"name={name} value={fmt_float(value)} stderr={err} "
        f"n={n} seed={seed} status={status}"
    )


def _check_tail_fit(params, seed):
    from .sampler import gaussian_class_spec, sample_class

    p = int(params.get("p", 256))
    samples = int(params.get("samples", 100_000))
    q_lo = float(params.get("q_lo", 1.6))
    q_hi = float(params.get("q_hi", 2.4))
    spec = gaussian_class_spec(np.eye(p))
    draws = sample_class(spec, samples, seed)
    norms = np.linalg.norm(draws, axis=0)
    dev = np.abs(norms - np.median(norms))
    grid = conc_lab.tail_thresholds(dev)
    profile = conc_lab.tail_profile(norms, grid)
    fit = conc_lab.fit_exponential_tail(profile)
    return [
        ("tail_q", fit.exponent_q, None, samples, seed, q_lo <= fit.exponent_q <= q_hi),
        ("tail_sigma", fit.tail_sigma, None, samples, seed, True),
        ("tail_r2", fit.r2, None, samples, seed, True),
    ]


def _check_diameter(params, seed):
    from .sampler import gaussian_class_spec

    p_list = [int(v) for v in params.get("p_list", "64 256 1024").split()]
    trials = int(params.get("trials", 2000))
    ratio_max = float(params.get("ratio_max", 2.0))
    values = []
    records = []
    for p in p_list:
        spec = gaussian_class_spec(np.eye(p))
        est = conc_lab.observable_diameter(
            spec, ["euclidean-norm"], trials, conc_lab.derive_seed(seed, p)
        )
        values.append(est.value)
        records.append((f"diameter_p{p}", est.value, est.stderr, trials, seed, True))
    ratio = max(values) / min(values)
    records.append(("diameter_ratio", ratio, None, trials, seed, ratio <= ratio_max))
    return records


def _check_quad_form(params, seed):
    from .sampler import gaussian_class_spec

    p = int(params.get("p", 100))
    trials = int(params.get("trials", 10_000))
    mean_tol = float(params.get("mean_tol", 0.5))
    std_rtol = float(params.get("std_rtol", 0.1))
    spec = gaussian_class_spec(np.eye(p))
    check = conc_lab.quadratic_form_check(spec, np.eye(p), trials, seed)
    std_target = np.sqrt(2.0 * p)
    return [
        (
            "quadform_mean",
            check.mean,
            check.stderr,
            trials,
            seed,
            abs(check.mean - p) <= mean_tol,
        ),
        (
            "quadform_std",
            check.std,
            None,
            trials,
            seed,
            abs(check.std - std_target) <= std_rtol * std_target,
        ),
    ]


def _check_delta_gap(params, seed):
    sizes = [int(v) for v in params.get("sizes", "100 200 400 800").split()]
    gamma = float(params.get("gamma", 0.5))
    z = float(params.get("z", 1.0))
    trials = int(params.get("trials", 200))
    slope_max = float(params.get("slope_max", -0.35))
    report = conc_lab.delta_gap_sweep(sizes, gamma, z, trials, seed)
    records = [
        (f"delta_gap_n{int(n)}", err, None, trials, seed, True)
        for n, err in zip(report.sizes, report.errors)
    ]
    records.append(
        ("delta_gap_slope", report.slope, None, trials, seed, report.slope <= slope_max)
    )
    return records


def _check_resolvent_error(params, seed):
    sizes = [int(v) for v in params.get("sizes", "100 200 400 800").split()]
    gamma = float(params.get("gamma", 0.5))
    z = float(params.get("z", 1.0))
    trials = int(params.get("trials", 100))
    slope_max = float(params.get("slope_max", -0.35))
    report = conc_lab.resolvent_error_sweep(sizes, gamma, z, trials, seed)
    records = [
        (f"resolvent_err_n{int(n)}", err, None, trials, seed, True)
        for n, err in zip(report.sizes, report.errors)
    ]
    decreasing = bool(np.all(np.diff(report.errors) < 0))
    records.append(
        (
            "resolvent_slope",
            report.slope,
            None,
            trials,
            seed,
            report.slope <= slope_max,
        )
    )
    records.append(
        ("resolvent_monotone", float(decreasing), None, trials, seed, decreasing)
    )
    return records


_CHECKS = {
    "tail_fit": _check_tail_fit,
    "diameter": _check_diameter,
    "quad_form": _check_quad_form,
    "delta_gap": _check_delta_gap,
    "resolvent_error": _check_resolvent_error,
}


def cmd_conclab(
    config: ExperimentConfig,
    out_dir: str,
    seed: int | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> int:
    section = config.conclab
    if seed is None:
        seed = int(section.get("seed", 0))
    names = section.get("checks", "").split()
    unknown = [n for n in names if n not in _CHECKS]
    if unknown:
        raise ParameterError(f"unknown conclab checks: {unknown}")
    lines = []
    all_ok = True
    for idx, name in enumerate(names):
        params = config.checks.get(name, {})
        _log(verbose, f"conclab: running {name}")
        records = _CHECKS[name](params, conc_lab.derive_seed(seed, idx))
        for rec in records:
            lines.append(_record(*rec))
            all_ok &= rec[5]
    atomic_write_text(
        os.path.join(out_dir, "conclab.txt"),
        "\n".join(lines) + ("\n" if lines else ""),
    )
    return 0 if all_ok else 1


def cmd_ingest(
    config: ExperimentConfig,
    out_dir: str,
    seed: int | None = None,
    threads: int = 1,
    verbose: bool = False,
) -> int:
    entries = config.ingest.get("classes")
    if not entries:
        raise ParameterError("ingest requires an [ingest] section with classes")
    delimiter = config.ingest.get("delimiter", ",")
    models = []
    for entry in entries:
        raw = read_matrix(entry["file"], delimiter=delimiter)
        model = estimate_class_model(raw, entry["n_l"])
        models.append((entry["label"], model))
        _log(verbose, f"ingest: {entry['label']} <- {raw.shape[1]} samples")
    p = models[0][1].p
    for label, model in models:
        if model.p != p:
            raise ShapeError(f"class {label} has dimension {model.p}, expected {p}")
    total = sum(m.n_l for _, m in models)
    lines = ["[mixture]", f"p = {p}", f"n = {total}",
             "classes = " + " ".join(label for label, _ in models), ""]
    for label, model in models:
        sigma_name = f"class_{label}_sigma.csv"
        mean_name = f"class_{label}_mean.csv"
        write_matrix(os.path.join(out_dir, sigma_name), model.sigma)
        write_matrix(os.path.join(out_dir, mean_name), model.mean[None, :])
        lines += [
            f"[class.{label}]",
            f"n_l = {model.n_l}",
            f"sigma = file {sigma_name}",
            f"mean = file {mean_name}",
            "generator = gaussian",
            "",
        ]
    atomic_write_text(os.path.join(out_dir, "mixture.ini"), "\n".join(lines))
    return 0


_COMMANDS = {
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "conclab": cmd_conclab,
    "ingest": cmd_ingest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covspec",
        description="Spectral predictions and concentration experiments "
        "for mixture sample covariances.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="INI experiment config")
        cmd.add_argument("--seed", type=int, default=None, help="64-bit seed override")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--threads", type=int, default=1, help="worker threads")
        cmd.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("seed must fit in 64 bits", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("threads must be at least 1", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](
            config,
            args.out,
            seed=args.seed,
            threads=args.threads,
            verbose=args.verbose,
        )
    except (ParameterError, ShapeError, DataError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
