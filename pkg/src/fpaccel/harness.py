"""Experiment configuration, trial runner, aggregation and report output.

A configuration is one JSON document::

    {
      "name": "dirichlet16",
      "problem": {"family": "dirichlet", "params": {"sqrt_n": 16}},
      "method": {"name": "s-anderson", "depth": 10},
      "stopping": {"rel_residual_tol": 1e-14, "max_iter": 7000},
      "schedule": {"epsilon": 1e-10, "gamma": null, "sigma1": 0.6, "sigma2": 0.6},
      "kernel": "psi-new",
      "seeds": [0, 1, 2, 3, 4],
      "output": {"dir": "out", "format": "json"}
    }

Only ``problem``, ``method`` and ``seeds`` are required. ``depth`` is an
integer or ``{"m1": 1, "m2": 10}``. Unknown keys anywhere are rejected.
"""

import copy
import csv
import json
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .accelerate import (
    ABORTED,
    METHODS,
    DepthPolicy,
    MuSchedule,
    RunReport,
    StoppingRule,
    anderson_run,
    run_method,
)
from .errors import ConfigError, FPAccelError
from .numkernel import mid, solve_anderson_coeffs, solve_ediis_coeffs
from .problems import (
    FAMILIES,
    LcpData,
    gen_dirichlet,
    gen_lcp_option,
    gen_nash,
    lcp_bruteforce,
    lcp_recover,
    lcp_rescale,
    make_problem,
    random_dominant_lcp,
    toy_remark,
)
from .smoothing import NAMES, get_kernel

SEED_ENV = "FPACCEL_SEED"
CSV_HEADER = ["run_id", "seed", "k", "res_rel", "res_smooth", "mu", "depth", "alpha_l1", "wall_ns"]

# (type check, description) per family parameter
_NUM = ((int, float), "a number")
_INT = ((int,), "an integer")
FAMILY_PARAMS = {
    "nash": {"n1": _INT, "n2": _INT, "a": _NUM, "b": _NUM, "s1": _NUM, "s2": _NUM},
    "lcp-option": {"n": _INT, "theta": _NUM, "gamma_coeff": _NUM, "tau_coeff": _NUM},
    "dirichlet": {"sqrt_n": _INT, "lambda_coeff": _NUM, "beta_coeff": _NUM},
    "toy": {},
}
FAMILY_REQUIRED = {"nash": ("n1", "n2"), "lcp-option": ("n",), "dirichlet": ("sqrt_n",), "toy": ()}

_TOP_KEYS = {"name", "problem", "method", "stopping", "schedule", "kernel", "seeds", "output"}


@dataclass
class ExperimentConfig:
    family: str
    params: dict
    method: str
    policy: DepthPolicy
    seeds: list
    stopping: StoppingRule = field(default_factory=StoppingRule)
    schedule: MuSchedule = field(default_factory=MuSchedule)
    kernel: str = "psi-new"
    name: str = "experiment"
    out_dir: str = "."
    out_format: str = "json"

    def with_depth(self, policy):
        c = copy.copy(self)
        c.policy = policy
        return c

    def with_method(self, method):
        c = copy.copy(self)
        c.method = method
        return c

    def label(self):
        if self.method == "picard":
            return f"{self.family}/picard"
        return f"{self.family}/{self.method}({self.policy.label()})"


def _is_type(v, types):
    return isinstance(v, types) and not isinstance(v, bool)


def _check_keys(obj, allowed, where, problems):
    if not isinstance(obj, dict):
        problems.append(f"{where} must be an object")
        return False
    for k in sorted(set(obj) - set(allowed)):
        problems.append(f"unknown key {where}.{k}")
    return True


def parse_config(doc):
    """Validate a config document and build an :class:`ExperimentConfig`.

    Every violation is collected before raising, so one :class:`ConfigError`
    lists them all.
    """
    problems = []
    if not _check_keys(doc, _TOP_KEYS, "config", problems):
        raise ConfigError(problems)
    for req in ("problem", "method", "seeds"):
        if req not in doc:
            problems.append(f"missing required key config.{req}")

    family, params = None, {}
    prob = doc.get("problem", {})
    if _check_keys(prob, {"family", "params"}, "problem", problems):
        family = prob.get("family")
        params = prob.get("params", {})
        if family not in FAMILIES:
            problems.append(f"problem.family must be one of {list(FAMILIES)}, got {family!r}")
        elif _check_keys(params, FAMILY_PARAMS[family], "problem.params", problems):
            for k, v in params.items():
                spec = FAMILY_PARAMS[family].get(k)
                if spec and not _is_type(v, spec[0]):
                    problems.append(f"problem.params.{k} must be {spec[1]}")
            for k in FAMILY_REQUIRED[family]:
                if k not in params:
                    problems.append(f"missing required key problem.params.{k}")

    method_name, policy = None, None
    meth = doc.get("method", {})
    if _check_keys(meth, {"name", "depth"}, "method", problems):
        method_name = meth.get("name")
        if method_name not in METHODS:
            problems.append(f"method.name must be one of {list(METHODS)}, got {method_name!r}")
        depth = meth.get("depth", 0)
        try:
            if isinstance(depth, dict):
                if _check_keys(depth, {"m1", "m2"}, "method.depth", problems):
                    policy = DepthPolicy.dynamic(depth.get("m1"), depth.get("m2"))
            elif _is_type(depth, (int,)):
                policy = DepthPolicy.fixed(depth)
            else:
                problems.append("method.depth must be an integer or {m1, m2}")
        except (FPAccelError, TypeError) as exc:
            problems.append(f"method.depth: {exc}")

    stopping = StoppingRule()
    if "stopping" in doc and _check_keys(doc["stopping"], {"rel_residual_tol", "max_iter"}, "stopping", problems):
        try:
            stopping = StoppingRule(**doc["stopping"])
        except (FPAccelError, TypeError) as exc:
            problems.append(f"stopping: {exc}")

    schedule = MuSchedule()
    if "schedule" in doc and _check_keys(
        doc["schedule"], {"epsilon", "gamma", "sigma1", "sigma2"}, "schedule", problems
    ):
        try:
            schedule = MuSchedule(**doc["schedule"])
        except (FPAccelError, TypeError) as exc:
            problems.append(f"schedule: {exc}")

    kernel = doc.get("kernel", "psi-new")
    if kernel not in NAMES:
        problems.append(f"kernel must be one of {sorted(NAMES)}, got {kernel!r}")

    seeds = doc.get("seeds", [])
    if not isinstance(seeds, list) or not seeds:
        problems.append("seeds must be a nonempty list")
    elif not all(_is_type(s, (int,)) and s >= 0 for s in seeds):
        problems.append("seeds must be nonnegative integers")
    elif len(set(seeds)) != len(seeds):
        problems.append("seeds must be distinct")

    out_dir, out_format = ".", "json"
    if "output" in doc and _check_keys(doc["output"], {"dir", "format"}, "output", problems):
        out_dir = doc["output"].get("dir", ".")
        out_format = doc["output"].get("format", "json")
        if out_format not in ("json", "csv"):
            problems.append("output.format must be 'json' or 'csv'")

    name = doc.get("name", "experiment")
    if not isinstance(name, str) or not name:
        problems.append("name must be a nonempty string")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        family=family, params=dict(params), method=method_name, policy=policy,
        seeds=list(seeds), stopping=stopping, schedule=schedule, kernel=kernel,
        name=name, out_dir=out_dir, out_format=out_format,
    )


def load_config(path):
    """Read and validate a JSON config file. ``FPACCEL_SEED`` overrides the seeds."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return apply_seed_override(parse_config(doc))


def apply_seed_override(config, environ=None):
    env = os.environ if environ is None else environ
    raw = env.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return config
    try:
        seeds = [int(s) for s in raw.split(",")]
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV} must be a comma-separated integer list, got {raw!r}") from exc
    if any(s < 0 for s in seeds):
        raise ConfigError(f"{SEED_ENV} seeds must be nonnegative")
    c = copy.copy(config)
    c.seeds = seeds
    return c


def run_trial(config, seed):
    """One seeded trial. Failures become an ``aborted`` report instead of raising."""
    run_id = f"{config.name}:{config.label()}:seed={seed}"
    try:
        inst = make_problem(config.family, seed=seed, **config.params)
        report = run_method(
            inst.map, inst.u0, config.method, config.policy, config.stopping,
            config.schedule, get_kernel(config.kernel),
        )
    except FPAccelError as exc:
        return RunReport(
            method=config.method, status=ABORTED, message=str(exc), run_id=run_id, seed=seed,
            failure_stage=getattr(exc, "stage", None),
        )
    report.run_id = run_id
    report.seed = seed
    report.contraction_c = inst.contraction_c
    if report.u_final is not None:
        report.error_vs_planted = float(np.linalg.norm(report.u_final - inst.u_star))
    return report


def run_experiment(config, threads=1):
    """Run one trial per seed; reports come back in seed-list order."""
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if threads == 1 or len(config.seeds) == 1:
        return [run_trial(config, s) for s in config.seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: run_trial(config, s), config.seeds))


@dataclass
class AggregateReport:
    """Summary over the trials of one configuration.

    Iteration statistics use converged trials only; ``excluded`` counts the
    others. Rate statistics use every trial with a finite terminal rate.
    """

    label: str
    trials: int
    converged: int
    excluded: int
    iterations: list
    rates: list
    contraction_c: list
    mean_iterations: float = math.nan
    median_iterations: float = math.nan
    min_iterations: float = math.nan
    max_iterations: float = math.nan
    mean_rate: float = math.nan
    median_rate: float = math.nan
    min_rate: float = math.nan
    max_rate: float = math.nan
    mean_c: float = math.nan


def aggregate(reports, label=""):
    if not reports:
        raise ValueError("aggregate needs at least one report")
    methods = {r.method for r in reports}
    if len(methods) != 1:
        raise ValueError(f"reports mix methods {sorted(methods)}")
    conv = [r for r in reports if r.converged]
    iters = [r.iterations for r in conv]
    rates = [r.terminal_rate for r in reports if math.isfinite(r.terminal_rate)]
    cs = [r.contraction_c for r in reports if r.contraction_c is not None]
    agg = AggregateReport(
        label=label or reports[0].method, trials=len(reports), converged=len(conv),
        excluded=len(reports) - len(conv), iterations=iters, rates=rates, contraction_c=cs,
    )
    if iters:
        agg.mean_iterations = statistics.fmean(iters)
        agg.median_iterations = float(statistics.median(iters))
        agg.min_iterations = float(min(iters))
        agg.max_iterations = float(max(iters))
    if rates:
        agg.mean_rate = statistics.fmean(rates)
        agg.median_rate = float(statistics.median(rates))
        agg.min_rate = min(rates)
        agg.max_rate = max(rates)
    if cs:
        agg.mean_c = statistics.fmean(cs)
    return agg


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_float(x):
    # JSON has no NaN/inf literal
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def report_to_dict(report, include_timing=True):
    records = []
    for r in report.records:
        d = {
            "k": r.k,
            "res_rel": _json_float(r.res_rel),
            "res_smooth": _json_float(r.res_smooth),
            "mu": _json_float(r.mu),
            "depth": r.depth,
            "alpha_l1": _json_float(r.alpha_l1),
        }
        if include_timing:
            d["wall_ns"] = r.wall_ns
        records.append(d)
    return {
        "run_id": report.run_id,
        "seed": report.seed,
        "method": report.method,
        "status": report.status,
        "iterations": report.iterations,
        "terminal_rate": _json_float(report.terminal_rate),
        "res0_norm": _json_float(report.res0_norm),
        "error_vs_planted": _json_float(report.error_vs_planted),
        "contraction_c": _json_float(report.contraction_c),
        "failure_stage": report.failure_stage,
        "message": report.message,
        "records": records,
        "coefficients": [[float(a) for a in c] for c in report.coefficients],
    }


def emit_report(reports, fmt, path, include_timing=True):
    """Write reports as CSV (one row per iteration) or JSON.

    CSV floats use 17 significant digits and NaN becomes an empty field.
    JSON floats use Python's shortest round-trip repr and NaN becomes null.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_HEADER)
                for rep in reports:
                    for r in rep.records:
                        w.writerow([
                            rep.run_id, _fmt(rep.seed), r.k, _fmt(r.res_rel), _fmt(r.res_smooth),
                            _fmt(r.mu), r.depth, _fmt(r.alpha_l1),
                            r.wall_ns if include_timing else "",
                        ])
            else:
                doc = {"reports": [report_to_dict(r, include_timing) for r in reports]}
                json.dump(doc, fh, indent=1, allow_nan=False)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def parse_sweep(spec):
    """``"m=0,1,2"`` or ``"method=anderson,s-anderson"`` into ``(key, values)``."""
    key, sep, vals = spec.partition("=")
    key = key.strip()
    if not sep or not vals.strip():
        raise ConfigError(f"sweep must look like key=v1,v2,..., got {spec!r}")
    items = [v.strip() for v in vals.split(",")]
    if key == "m":
        try:
            depths = [int(v) for v in items]
        except ValueError as exc:
            raise ConfigError(f"sweep depths must be integers: {spec!r}") from exc
        if any(d < 0 for d in depths):
            raise ConfigError("sweep depths must be >= 0")
        return key, depths
    if key == "method":
        bad = [v for v in items if v not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods in sweep: {bad}")
        return key, items
    raise ConfigError(f"sweep key must be 'm' or 'method', got {key!r}")


def sweep_configs(config, sweeps):
    """Cartesian product of sweep axes applied to ``config``."""
    configs = [config]
    for key, values in sweeps:
        nxt = []
        for c in configs:
            for v in values:
                nxt.append(c.with_depth(DepthPolicy.fixed(v)) if key == "m" else c.with_method(v))
        configs = nxt
    return configs


def rate_table(config, sweeps, threads=1):
    """Aggregate one row per swept configuration."""
    rows = []
    for c in sweep_configs(config, sweeps):
        reports = run_experiment(c, threads)
        rows.append((c, aggregate(reports, c.label())))
    return rows


def format_table(rows):
    head = f"{'config':<36} {'trials':>6} {'conv':>5} {'mean_iter':>10} {'mean_rate':>10} {'mean_c':>10}"
    lines = [head, "-" * len(head)]
    for c, a in rows:
        lines.append(
            f"{a.label:<36} {a.trials:>6} {a.converged:>5} "
            f"{a.mean_iterations:>10.1f} {a.mean_rate:>10.4f} {a.mean_c:>10.6g}"
        )
    return "\n".join(lines)


def verify_suite():
    """Planted-solution and oracle checks. Returns ``[(name, passed, detail)]``."""
    results = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - report every failure
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))

    def planted(gen):
        def fn():
            inst = gen()
            r = inst.planted_residual()
            bound = 1e-10 * (1 + np.linalg.norm(inst.u_star))
            return r <= bound, f"||F(u*)|| = {r:.2e} (bound {bound:.2e})"
        return fn

    check("planted nash", planted(lambda: gen_nash(20, 10, seed=0)))
    check("planted lcp-option", planted(lambda: gen_lcp_option(50, seed=0)))
    check("planted dirichlet", planted(lambda: gen_dirichlet(8, seed=0)))
    check("planted toy", planted(toy_remark))

    def lcp_oracle():
        worst = 0.0
        for s in range(10):
            data = random_dominant_lcp(2 + s % 7, seed=s)
            cmap = lcp_rescale(data)
            rep = anderson_run(cmap, np.zeros(data.q.size), DepthPolicy.fixed(3))
            v = lcp_recover(cmap, rep.u_final)
            worst = max(worst, float(np.abs(v - lcp_bruteforce(data)).max()))
        return worst <= 1e-8, f"max |v - v_oracle| = {worst:.2e}"

    check("lcp oracle", lcp_oracle)

    def lcp_known():
        M = 3 * np.eye(3) - np.eye(3, k=1) - np.eye(3, k=-1)
        v = lcp_bruteforce(LcpData(M, -np.ones(3)))
        err = float(np.abs(v - np.array([4, 5, 4]) / 7).max())
        return err <= 1e-12, f"error {err:.2e}"

    check("lcp tridiag(-1,3,-1)", lcp_known)

    def coeffs():
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(200):
            f0, f1 = rng.standard_normal((2, 5))
            d = f1 - f0
            ak = f1 @ d / (d @ d)
            a = solve_anderson_coeffs([f0, f1])
            worst = max(worst, abs(a[0] - ak))
            e = solve_ediis_coeffs([f0, f1])
            worst = max(worst, abs(e[0] - mid(0.0, ak, 1.0)))
        return worst <= 1e-10, f"max coefficient gap {worst:.2e}"

    check("depth-1 coefficient closed forms", coeffs)
    return results
