"""Experiment kinds behind the ``lab`` command.

Each kind expands its configuration into independent tasks (one per grid
point and seed). Tasks run in a process pool, their rows are collected in
task order, and the table is streamed to CSV as tasks complete in order, so
the output does not depend on the worker count.
"""
import os
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from functools import lru_cache

import numpy as np

from . import __version__
from ._random import derive_seed
from .errors import InputError
from .feature_net import SingleIndexTask, feature_alignment, init_net, train_gd
from .gsm import PowerLawFamily, exact_risk, learning_curve
from .kernel_regression import kgf_predict, make_dataset, risk
from .opgsm import OpGsmConfig, simulate
from .rates import FIXED_D, HIGH_D_INTERP, HIGH_D_KRR, RateQuery, optimal_theta
from .spectral import K1, K2, eigensystem, project
from .tables import CsvStream, ResultTable, fit_slope

KGF_GSM_BAND = (0.7, 1.4)
TRUTH_TERMS = 1024

_KERNELS = {"k1": K1, "k2": K2}
# sin(2 pi x) has a finite expansion in the k1 basis and sits on the s = 1.5
# boundary for k2 (coefficients ~ j^-2 against eigenvalues ~ j^-2)
_SOURCE = {"k1": float("inf"), "k2": 1.5}
_BETA = {"k1": 2.0, "k2": 2.0}


def target(x):
    return np.sin(2.0 * np.pi * x)


def _kernel(name):
    try:
        return _KERNELS[name]
    except KeyError:
        raise InputError(f"kernel must be one of {', '.join(_KERNELS)}") from None


@lru_cache(maxsize=None)
def target_coefficients(kernel_name, J=TRUTH_TERMS):
    """L2 coefficients of ``sin(2 pi x)`` in the eigenbasis of the named kernel."""
    kernel = _kernel(kernel_name)
    return project(target, eigensystem(kernel, J))


def kernel_curve_theta(kernel_name):
    """Stopping-time exponent that balances bias and variance for ``sin(2 pi x)``."""
    return optimal_theta(_SOURCE[kernel_name], _BETA[kernel_name])


# ---------------------------------------------------------------- tasks


def _task_rates(regime, s, beta, gamma, theta, estimator):
    res = RateQuery(regime, s, beta, gamma, theta, estimator).evaluate()
    return [(regime, s, beta, gamma, theta, res.n_exponent, res.d_exponent, res.saturated,
             res.inconsistent, res.period, res.branch, res.label)]


def _task_gsm_curve(beta, s, theta_exponent, n, t_scale, N, noise_var):
    curve = learning_curve(PowerLawFamily(beta, s), n, theta_exponent, N=N, t_scale=t_scale,
                           noise_var=noise_var)
    return [(theta_exponent, int(ni), ti, b, v, b + v, curve.N)
            for ni, ti, b, v in zip(curve.n, curve.t, curve.bias, curve.variance)]


def _task_opgsm(seed, N, n, eta, steps, p, freeze_A, freeze_D, record_every):
    cfg = OpGsmConfig(N=N, n=n, eta=eta, steps=steps, p_list=tuple(p), seed=seed,
                      freeze_A=freeze_A, freeze_D=freeze_D)
    report = simulate(cfg)
    return [(seed, *row) for row in report.rows() if row[0] % record_every == 0 or row[0] == steps]


def kgf_vs_gsm_point(seed, n, t, sigma, kernel="k1", risk_method="basis", mc_points=200_000):
    """KGF risk on one sampled data set next to the matched sequence-model risk.

    The sequence model uses the truth's coefficients in the kernel eigenbasis,
    the kernel eigenvalues, the same ``n`` and ``t``, and noise variance
    ``sigma^2 / n`` per coordinate. ``kgf_bias`` is the risk of the flow fitted
    to noise-free labels on the same inputs.
    """
    kern = _kernel(kernel)
    truth = target_coefficients(kernel)
    data = make_dataset(target, n, sigma, seed, truth)
    est = kgf_predict(kern, data, t)
    kgf = risk(est, truth, method=risk_method, M=mc_points, seed=seed).value
    clean = make_dataset(target, n, 0.0, seed, truth)
    kgf_bias = risk(kgf_predict(kern, clean, t), truth, method=risk_method, M=mc_points, seed=seed).value
    theta = np.zeros(TRUTH_TERMS)
    theta[: len(truth)] = truth.coeffs
    lam = eigensystem(kern, TRUTH_TERMS).eigenvalues
    parts = exact_risk(theta, lam, t, n, noise_var=sigma**2)
    ratio = kgf / parts.total if parts.total > 0 else float("nan")
    return (seed, n, t, sigma, kgf, kgf_bias, parts.total, parts.bias, parts.variance, ratio)


def _task_kgf_vs_gsm(seed, n, t, sigma, kernel, risk_method, mc_points):
    return [kgf_vs_gsm_point(seed, n, t, sigma, kernel, risk_method, mc_points)]


def _task_net_align(seed, d, m, n, eta, steps, p, noise, init, record_every):
    task = SingleIndexTask(d, n, noise, seed)
    X, Y = task.sample()
    net = init_net(d, m, seed, symmetric=(init == "symmetric"))
    traj = train_gd(net, X, Y, eta, steps, record_every=record_every)
    rows = []
    for k, snap in zip(traj.steps, traj.nets):
        fr = feature_alignment(snap, X, Y, np.asarray(p))
        rows.append((seed, int(k), traj.losses[k], *fr))
    return rows


def _task_kernel_curve(seed, kernel, n, sigma, t):
    kern = _kernel(kernel)
    truth = target_coefficients(kernel)
    data = make_dataset(target, n, sigma, derive_seed(seed, n), truth)
    value = risk(kgf_predict(kern, data, t), truth).value
    return [(seed, n, t, value)]


_TASKS = {
    "rates": _task_rates,
    "gsm-curve": _task_gsm_curve,
    "opgsm-sim": _task_opgsm,
    "kgf-vs-gsm": _task_kgf_vs_gsm,
    "net-align": _task_net_align,
    "kernel-curve": _task_kernel_curve,
}


def _execute(job):
    kind, kwargs = job
    return _TASKS[kind](**kwargs)


# ------------------------------------------------------------- planning


def _plan_rates(cfg):
    jobs = []
    for regime in cfg["regime"]:
        if regime == FIXED_D:
            if not cfg["beta"]:
                raise InputError("fixed-d rates need 'beta'")
            thetas = cfg["theta"] or [None]
            grid = [(s, b, None, th) for s in cfg["s"] for b in cfg["beta"] for th in thetas]
        elif regime in (HIGH_D_KRR, HIGH_D_INTERP):
            if not cfg["gamma"]:
                raise InputError(f"{regime} rates need 'gamma'")
            grid = [(s, None, g, None) for s in cfg["s"] for g in cfg["gamma"]]
        else:
            raise InputError(f"unknown regime {regime!r}")
        for s, b, g, th in grid:
            jobs.append(dict(regime=regime, s=s, beta=b, gamma=g, theta=th, estimator=cfg["estimator"]))
    cols = ("regime", "s", "beta", "gamma", "theta", "n_exponent", "d_exponent", "saturated",
            "inconsistent", "period", "branch", "label")
    return cols, jobs


def _plan_gsm_curve(cfg):
    n = sorted(set(cfg["n"]))
    if len(n) < 4:
        raise InputError("gsm-curve needs at least 4 distinct n values")
    PowerLawFamily(cfg["beta"], cfg["s"])
    jobs = [dict(beta=cfg["beta"], s=cfg["s"], theta_exponent=th, n=tuple(n), t_scale=cfg["t_scale"],
                 N=cfg["N"], noise_var=cfg["noise_var"]) for th in cfg["theta_exponent"]]
    return ("theta_exponent", "n", "t", "bias", "variance", "risk", "N"), jobs


def _plan_opgsm(cfg, seeds):
    OpGsmConfig(N=cfg["N"], n=cfg["n"], eta=cfg["eta"], steps=cfg["steps"], p_list=tuple(cfg["p"]))
    if cfg["record_every"] < 1:
        raise InputError("record_every must be at least 1")
    cols = ("seed", "step", "loss", *(f"fraction_p{p}" for p in cfg["p"]), "min_diag", "max_diag",
            "orthogonality_drift")
    jobs = [dict(seed=s, **{k: cfg[k] for k in ("N", "n", "eta", "steps", "p", "freeze_A", "freeze_D",
                                                 "record_every")}) for s in seeds]
    return cols, jobs


def _plan_kgf_vs_gsm(cfg, seeds):
    _kernel(cfg["kernel"])
    if cfg["risk_method"] not in ("basis", "monte-carlo"):
        raise InputError("risk_method must be 'basis' or 'monte-carlo'")
    if cfg["sigma"] < 0 or any(t < 0 for t in cfg["t"]) or any(n < 1 for n in cfg["n"]):
        raise InputError("need sigma >= 0, t >= 0 and n >= 1")
    cols = ("seed", "n", "t", "sigma", "kgf_risk", "kgf_bias", "gsm_risk", "gsm_bias", "gsm_variance",
            "ratio")
    jobs = [dict(seed=s, n=n, t=t, sigma=cfg["sigma"], kernel=cfg["kernel"], risk_method=cfg["risk_method"],
                 mc_points=cfg["mc_points"]) for n in cfg["n"] for t in cfg["t"] for s in seeds]
    return cols, jobs


def _plan_net_align(cfg, seeds):
    if cfg["init"] not in ("standard", "symmetric"):
        raise InputError("init must be 'standard' or 'symmetric'")
    if any(not 1 <= p <= cfg["m"] for p in cfg["p"]):
        raise InputError("every p must lie in [1, m]")
    if cfg["init"] == "symmetric" and cfg["m"] % 2:
        raise InputError("symmetric initialisation needs an even width m")
    if cfg["eta"] < 0 or cfg["steps"] < 0 or cfg["record_every"] < 1:
        raise InputError("need eta >= 0, steps >= 0 and record_every >= 1")
    cols = ("seed", "step", "train_loss", *(f"fraction_p{p}" for p in cfg["p"]))
    jobs = [dict(seed=s, **{k: cfg[k] for k in ("d", "m", "n", "eta", "steps", "p", "noise", "init",
                                                 "record_every")}) for s in seeds]
    return cols, jobs


def _plan_kernel_curve(cfg, seeds):
    _kernel(cfg["kernel"])
    n = sorted(set(cfg["n"]))
    if len(n) - cfg["drop_smallest"] < 4:
        raise InputError("kernel-curve needs at least 4 n values after dropping")
    theta = cfg["theta_exponent"]
    if theta is None:
        theta = kernel_curve_theta(cfg["kernel"])
    jobs = [dict(seed=s, kernel=cfg["kernel"], n=ni, sigma=cfg["sigma"], t=cfg["t_scale"] * ni**theta)
            for ni in n for s in seeds]
    return ("seed", "n", "t", "risk"), jobs


def plan(cfg):
    """Column names and task list for a validated configuration."""
    if cfg.kind == "rates":
        return _plan_rates(cfg)
    if cfg.kind == "gsm-curve":
        return _plan_gsm_curve(cfg)
    planner = {"opgsm-sim": _plan_opgsm, "kgf-vs-gsm": _plan_kgf_vs_gsm, "net-align": _plan_net_align,
               "kernel-curve": _plan_kernel_curve}[cfg.kind]
    return planner(cfg, cfg.seeds)


# ------------------------------------------------------------ summaries


def _mean_by(table, key, value):
    keys = table.column(key)
    vals = table.array(value)
    uniq = sorted(set(keys))
    return uniq, np.array([vals[[k == u for k in keys]].mean() for u in uniq])


def summarize(cfg, table):
    """Derived quantities reported in the CSV footer."""
    out = {}
    if cfg.kind == "gsm-curve":
        for th in cfg["theta_exponent"]:
            sub = table.where(theta_exponent=th)
            fit = fit_slope(sub, "n", "risk", cfg["drop_smallest"])
            out[f"slope_theta{th!r}"] = fit.slope
            if cfg["s"] is not None:
                res = RateQuery(FIXED_D, cfg["s"], cfg["beta"], None, th).evaluate()
                out[f"predicted_theta{th!r}"] = "saturated" if res.saturated else res.n_exponent
    elif cfg.kind == "kernel-curve":
        n, mean = _mean_by(table, "n", "risk")
        fit = fit_slope(ResultTable(("n", "risk"), list(zip(n, mean))), "n", "risk", cfg["drop_smallest"])
        out.update(slope=fit.slope, intercept=fit.intercept, r2=fit.r2)
    elif cfg.kind == "kgf-vs-gsm":
        for n in cfg["n"]:
            for t in cfg["t"]:
                r = table.where(n=n, t=t).array("ratio")
                out[f"mean_ratio_n{n}_t{t!r}"] = float(np.mean(r))
        out["ratio_band"] = f"[{KGF_GSM_BAND[0]}, {KGF_GSM_BAND[1]}] (engineering calibration)"
    elif cfg.kind in ("opgsm-sim", "net-align"):
        step = table.array("step")
        for p in cfg["p"]:
            col = table.array(f"fraction_p{p}")
            gains = [col[(table.array("seed") == s) & (step == step.max())][0]
                     - col[(table.array("seed") == s) & (step == 0)][0] for s in cfg.seeds]
            out[f"mean_gain_p{p}"] = float(np.mean(gains))
        if cfg.kind == "opgsm-sim":
            out["max_orthogonality_drift"] = float(table.array("orthogonality_drift").max())
    return out


# ------------------------------------------------------------------ run


def resolve_workers(requested):
    env = os.environ.get("LAB_WORKERS")
    if env is not None and env.strip():
        try:
            requested = int(env)
        except ValueError:
            raise InputError(f"LAB_WORKERS must be an integer, got {env!r}") from None
    if requested < 1:
        raise InputError("worker count must be at least 1")
    return requested


def _label(job):
    kind, kwargs = job
    shown = {k: v for k, v in kwargs.items() if not isinstance(v, (tuple, list))}
    return f"{kind} " + ", ".join(f"{k}={v}" for k, v in shown.items())


def _results(jobs, workers):
    if workers == 1 or len(jobs) <= 1:
        for job in jobs:
            yield _execute(job)
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        yield from pool.map(_execute, jobs)


def run(cfg, tsv=False, stream=None):
    """Execute ``cfg``; stream CSV to ``cfg.out`` (or ``stream``) and return the table.

    All validation happens before any output file is opened.
    """
    cols, kwargs_list = plan(cfg)
    jobs = [(cfg.kind, kw) for kw in kwargs_list]
    workers = resolve_workers(cfg.workers)
    if tsv and not cfg.out:
        raise InputError("--tsv needs an output path")
    header = {"kind": cfg.kind, "config_hash": cfg.config_hash(), "version": __version__,
              "seeds": " ".join(str(s) for s in cfg.seeds)}
    table = ResultTable(cols, [], dict(header))
    start = time.perf_counter()
    with ExitStack() as stack:
        fh = stream
        if cfg.out:
            fh = stack.enter_context(open(cfg.out, "w", encoding="utf-8", newline=""))
        writer = CsvStream(fh, cols, header) if fh is not None else None
        done = 0
        try:
            for rows in _results(jobs, workers):
                for r in rows:
                    table.append(r)
                if writer is not None:
                    writer.write_rows(rows)
                done += 1
        except Exception as exc:
            # results arrive in task order, so the failing task is the next one
            exc.args = (f"task failed at grid point [{_label(jobs[done])}]: {exc.args[0] if exc.args else exc}",
                        *exc.args[1:])
            raise
        summary = summarize(cfg, table)
        summary["wall_time_s"] = round(time.perf_counter() - start, 3)
        table.metadata.update(summary)
        if writer is not None:
            writer.footer(summary)
    if tsv:
        with open(_tsv_path(cfg.out), "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_tsv())
    return table


def _tsv_path(out):
    root, ext = os.path.splitext(out)
    return (root if ext.lower() == ".csv" else out) + ".tsv"
