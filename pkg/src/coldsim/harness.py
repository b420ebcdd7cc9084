"""Config-driven experiment runner.

Configs are line-oriented ``key=value`` text (``#`` comments, UTF-8).
Every field except ``task`` has a default; unknown keys are rejected and
*all* problems are reported at once.  One trace CSV is written per seed
plus a ``summary.csv`` with the seed-mean error per iteration and the
bits needed to reach the fixed accuracy thresholds.
"""

from __future__ import annotations

import datetime
import os
from dataclasses import dataclass, field, replace

import numpy as np

from coldsim import compress, consensus, objective as objective_mod, optim, theory, topology
from coldsim.consensus import ScalingSchedule
from coldsim.errors import ConfigError, InvalidParameterError
from coldsim.traces import read_csv, write_csv

TASKS = ("consensus", "optimize", "certify", "sweep")
CONSENSUS_ALGOS = ("gossip", "choco", "ccs")
OPTIMIZE_ALGOS = ("nids", "cold", "dyna_cold")
SCALED_ALGOS = ("ccs", "dyna_cold")
EPS_THRESHOLDS = (1e-2, 1e-4, 1e-6)

_KEYS = {
    "task", "algorithm", "graph", "graph_seed", "compressor", "objective", "d",
    "stepsizes", "schedule", "iters", "seeds", "out", "x0", "lyapunov",
    "trace", "theorem", "mode", "burn_in", "margin",
}


@dataclass
class ExperimentConfig:
    task: str
    algorithm: str = None
    graph: str = "er:20"
    graph_seed: int = 0
    compressor: str = "identity"
    objective: str = "quadratic:d=10,mu=1,L=10"
    d: int = 10
    stepsizes: str = "theorem"
    schedule: str = "theorem"
    iters: int = 200
    seeds: tuple = (0,)
    out: str = "runs"
    x0: str = None
    lyapunov: str = "auto"
    # certify-task fields
    trace: str = None
    theorem: str = None
    mode: str = "fitted_rate"
    burn_in: int = 10
    margin: float = 0.0
    raw: dict = field(default_factory=dict)


def parse_config(text: str, force: bool = False) -> ExperimentConfig:
    """Parse and fully default a config, reporting every error found.

    ``force`` downgrades algorithm/compressor contract mismatches from
    errors to runtime warnings, mirroring the CLI flag.
    """
    problems = []
    kv = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected key=value, got {line!r}")
            continue
        if key not in _KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in kv:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        kv[key] = value

    if "task" not in kv:
        problems.append("missing required key 'task'")
        raise ConfigError(problems)
    raw = dict(kv)
    cfg = ExperimentConfig(task=kv.pop("task"), raw=raw)
    if cfg.task not in TASKS:
        problems.append(f"unknown task {cfg.task!r}")

    def take_int(key, default):
        if key not in kv:
            return default
        try:
            return int(kv.pop(key))
        except ValueError:
            problems.append(f"key {key!r}: not an integer")
            return default

    def take_float(key, default):
        if key not in kv:
            return default
        try:
            return float(kv.pop(key))
        except ValueError:
            problems.append(f"key {key!r}: not a number")
            return default

    cfg.graph = kv.pop("graph", cfg.graph)
    cfg.graph_seed = take_int("graph_seed", cfg.graph_seed)
    cfg.compressor = kv.pop("compressor", cfg.compressor)
    cfg.objective = kv.pop("objective", cfg.objective)
    cfg.d = take_int("d", cfg.d)
    cfg.stepsizes = kv.pop("stepsizes", cfg.stepsizes)
    cfg.schedule = kv.pop("schedule", cfg.schedule)
    cfg.iters = take_int("iters", cfg.iters)
    cfg.out = kv.pop("out", cfg.out)
    cfg.lyapunov = kv.pop("lyapunov", cfg.lyapunov)
    cfg.trace = kv.pop("trace", cfg.trace)
    cfg.theorem = kv.pop("theorem", cfg.theorem)
    cfg.mode = kv.pop("mode", cfg.mode)
    cfg.burn_in = take_int("burn_in", cfg.burn_in)
    cfg.margin = take_float("margin", cfg.margin)
    if "seeds" in kv:
        try:
            cfg.seeds = tuple(int(s) for s in kv.pop("seeds").split(",") if s.strip() != "")
        except ValueError:
            problems.append("key 'seeds': expected comma-separated integers")
    cfg.x0 = kv.pop("x0", None)

    if cfg.task in ("consensus", "optimize", "sweep"):
        default_algo = "gossip" if cfg.task == "consensus" else "nids"
        cfg.algorithm = kv.pop("algorithm", cfg.algorithm or default_algo)
        allowed = CONSENSUS_ALGOS if cfg.task == "consensus" else (
            CONSENSUS_ALGOS + OPTIMIZE_ALGOS if cfg.task == "sweep" else OPTIMIZE_ALGOS
        )
        if cfg.algorithm not in allowed:
            problems.append(f"algorithm {cfg.algorithm!r} not valid for task {cfg.task!r}")
        if cfg.x0 is None:
            cfg.x0 = "gauss" if cfg.task == "consensus" else "zeros"
        try:
            spec = compress.parse_compressor(cfg.compressor)
            if not force:
                _check_contract(cfg, spec, problems)
        except InvalidParameterError as exc:
            problems.append(f"compressor: {exc}")
        if "schedule" in cfg.raw and cfg.algorithm not in SCALED_ALGOS:
            problems.append(
                f"contradictory fields: a scaling schedule makes no sense for {cfg.algorithm!r}"
            )
        try:
            _parse_graph(cfg.graph)
        except InvalidParameterError as exc:
            problems.append(f"graph: {exc}")
        try:
            _objective_params(cfg)
        except (InvalidParameterError, KeyError, ValueError) as exc:
            problems.append(f"objective: {exc}")
    elif cfg.task == "certify":
        if cfg.trace is None:
            problems.append("task=certify needs trace=<path>")

    if kv:
        problems.extend(f"unused key {k!r}" for k in kv)
    if problems:
        raise ConfigError(problems)
    return cfg


def _check_contract(cfg: ExperimentConfig, spec, problems):
    d = _dimension(cfg)
    if cfg.algorithm in ("choco", "cold") and spec.delta_contracted(d) is None:
        problems.append(
            f"contract mismatch: {cfg.algorithm} needs a delta-contracted compressor "
            f"(relative mean-square error bound), but {cfg.compressor!r} carries only the "
            "bounded-absolute (unit-ball) contract; rerun with --force to override"
        )
    if cfg.algorithm == "ccs" and spec.delta_absolute(d) is None:
        problems.append(
            f"contract mismatch: ccs needs a bounded-absolute compressor, but "
            f"{cfg.compressor!r} carries only the delta-contracted contract"
        )
    if cfg.algorithm == "dyna_cold" and spec.delta_absolute(d) is None and spec.delta_contracted(d) is None:
        problems.append(f"contract mismatch: {cfg.compressor!r} carries neither contract")


def _parse_graph(text: str):
    kind, _, arg = text.partition(":")
    aliases = {"er": "erdos_renyi", "erdos_renyi": "erdos_renyi", "ring": "ring",
               "path": "path", "complete": "complete"}
    if kind not in aliases:
        raise InvalidParameterError(f"unknown graph kind {kind!r}")
    if not arg:
        raise InvalidParameterError("graph needs a node count, e.g. ring:4")
    return aliases[kind], int(arg)


def _kvlist(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item:
            continue
        k, _, v = item.partition("=")
        if not _:
            raise InvalidParameterError(f"expected key=value, got {item!r}")
        out[k.strip()] = v.strip()
    return out


def _objective_params(cfg: ExperimentConfig):
    name, _, rest = cfg.objective.partition(":")
    kv = _kvlist(rest) if rest else {}
    if name == "consensus":
        return ("consensus", {"d": int(kv.get("d", cfg.d))})
    if name == "quadratic":
        return (
            "quadratic",
            {
                "d": int(kv.get("d", cfg.d)),
                "mu": float(kv.get("mu", 1.0)),
                "L": float(kv.get("L", 10.0)),
                "seed": int(kv.get("seed", 0)),
            },
        )
    if name == "logistic":
        return (
            "logistic",
            {
                "m": int(kv.get("m", 200)),
                "d": int(kv.get("d", cfg.d)),
                "r": float(kv.get("r", 0.1)),
                "partition": kv.get("partition", "label"),
                "seed": int(kv.get("seed", 0)),
            },
        )
    raise InvalidParameterError(f"unknown objective {name!r}")


def _dimension(cfg: ExperimentConfig) -> int:
    if cfg.task == "consensus":
        return cfg.d
    return _objective_params(cfg)[1]["d"]


def _build_objective(cfg: ExperimentConfig, n: int, X0: np.ndarray):
    name, kw = _objective_params(cfg)
    if name == "consensus":
        return objective_mod.quadratic_consensus(X0)
    if name == "quadratic":
        return objective_mod.synthetic_quadratic(n, kw["d"], kw["mu"], kw["L"], seed=kw["seed"])
    feats, labels = objective_mod.two_class_blobs(kw["m"], kw["d"], seed=kw["seed"])
    return objective_mod.logistic_objective(
        feats, labels, n, r=kw["r"], partition=kw["partition"], seed=kw["seed"]
    )


def _seed_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(stream,)))


def _resolve_stepsizes(cfg, spec, m, obj, d):
    """Returns (gamma, tau, certificate-or-None, certified: bool)."""
    text = cfg.stepsizes.strip()
    if text == "theorem":
        if cfg.algorithm == "gossip":
            return None, None, None, True
        if cfg.algorithm == "choco":
            cert = theory.choco_rate(spec.delta_contracted(d), m)
            return cert.gamma, None, cert, cert.valid
        if cfg.algorithm == "ccs":
            cert = theory.ccs_schedule(spec.delta_absolute(d), spec.p, m.n, d, m)
            return cert.gamma, None, cert, cert.valid
        if cfg.algorithm == "nids":
            return 1.0 / (2.0 * obj.L), None, None, True
        if cfg.algorithm == "cold":
            cert = theory.cold_rate_unbiased(obj.mu, obj.L, spec.delta_contracted(d), m)
            return cert.gamma, cert.tau, cert, cert.valid
        cert = theory.dyna_cold_schedule(
            obj.mu, obj.L, _dyna_delta(spec, d), spec.p, m.n, d, m
        )
        # the stepsize caps are sane even when the rate itself is uncertified
        return cert.gamma, cert.tau, cert, cert.valid
    if text == "default":
        if cfg.algorithm in ("gossip",):
            return None, None, None, False
        if cfg.algorithm in ("choco", "ccs"):
            cert = theory.choco_rate(0.0, m)
            return cert.gamma, None, None, False
        if cfg.algorithm == "dyna_cold":
            # the exploration pair tau*gamma*(1-lambda_n) = 1/2 feeds the
            # quantization error back too hard; use the schedule's caps
            tau = 2.0 * obj.mu * obj.L / (m.rho * (obj.mu + obj.L))
            gamma = min(
                2.0 / (obj.mu + obj.L),
                1.0 / (2.0 * tau * (1.0 - m.lambda_n)),
                tau * (1.0 - m.lambda_n) / obj.L**2,
            )
            return gamma, tau, None, False
        gamma = 1.0 / (2.0 * obj.L)
        if cfg.algorithm == "nids":
            return gamma, None, None, False
        return gamma, 1.0 / (2.0 * gamma * (1.0 - m.lambda_n)), None, False
    kv = _kvlist(text)
    gamma = float(kv["gamma"]) if "gamma" in kv else None
    tau = float(kv["tau"]) if "tau" in kv else None
    if gamma is None:
        raise ConfigError([f"stepsizes {text!r}: needs gamma=, tau= or 'theorem'"])
    if tau is None and cfg.algorithm in ("cold", "dyna_cold"):
        tau = 1.0 / (2.0 * gamma * (1.0 - m.lambda_n))
    return gamma, tau, None, False


def _dyna_delta(spec, d):
    delta = spec.delta_absolute(d)
    return delta if delta is not None else spec.delta_contracted(d)


def _make_lyapunov(cfg, m, obj, gamma, tau, spec, d):
    choice = cfg.lyapunov
    if choice == "none" or cfg.algorithm in ("nids",):
        return None
    variant = {"cold": "thm2", "dyna_cold": "thm5"}.get(cfg.algorithm) if choice == "auto" else choice
    if variant not in ("thm2", "thm3", "thm5"):
        return None
    delta = spec.delta_contracted(d)
    if cfg.algorithm == "dyna_cold" and delta is None:
        delta = spec.delta_absolute(d)
    if obj.optimum is None or delta is None or delta >= 1 or tau is None:
        return None
    try:
        return optim.LyapunovEvaluator(m, obj, gamma, tau, delta, variant)
    except InvalidParameterError:
        return None


def _run_one_seed(cfg, seed, m, spec, force):
    d = _dimension(cfg)
    n = m.n
    rng0 = _seed_rng(seed, 0)
    X0 = rng0.standard_normal((n, d)) if cfg.x0 == "gauss" else np.zeros((n, d))
    obj = _build_objective(cfg, n, X0) if cfg.task == "optimize" else None
    gamma, tau, cert, certified = _resolve_stepsizes(cfg, spec, m, obj, d)

    if cfg.algorithm == "gossip":
        trace = consensus.exact_gossip_run(m, X0, cfg.iters, seed=seed)
    elif cfg.algorithm == "choco":
        trace = consensus.choco_gossip_run(m, X0, spec, gamma, cfg.iters, seed=seed, force=force)
    elif cfg.algorithm == "ccs":
        schedule, env_beta, env_cs = _resolve_ccs_schedule(cfg, cert, X0, spec, d)
        trace = consensus.ccs_run(
            m, X0, spec, gamma, schedule, cfg.iters, seed=seed, force=force,
            envelope_beta=env_beta, envelope_c_s=env_cs,
        )
    elif cfg.algorithm == "nids":
        trace = optim.nids_run(m, obj, gamma, X0, cfg.iters, seed=seed)
    elif cfg.algorithm == "cold":
        lyap = _make_lyapunov(cfg, m, obj, gamma, tau, spec, d)
        trace = optim.cold_run(
            m, obj, spec, optim.ColdConfig(gamma, tau), X0, cfg.iters, seed=seed,
            force=force, lyapunov=lyap,
        )
    else:  # dyna_cold
        lyap = _make_lyapunov(cfg, m, obj, gamma, tau, spec, d)
        schedule, paper_default = _resolve_dyna_schedule(cfg, cert, m, obj, gamma, tau, X0, spec, d)
        trace = optim.dyna_cold_run(
            m, obj, spec, optim.ColdConfig(gamma, tau, schedule), X0, cfg.iters, seed=seed,
            force=force, lyapunov=lyap, paper_default_schedule=paper_default,
        )
    if cert is not None:
        for line in cert.serialize().splitlines():
            k, _, v = line.partition("=")
            trace.meta[f"cert.{k}"] = v
    if not certified:
        trace.meta["stepsizes"] = "uncertified"
    if cfg.algorithm in SCALED_ALGOS and cfg.schedule.strip() != "theorem":
        trace.meta["schedule"] = "uncertified"
    return trace


def _resolve_ccs_schedule(cfg, cert, X0, spec, d):
    text = cfg.schedule.strip()
    if text == "theorem":
        if cert is None:
            raise ConfigError(["schedule=theorem needs stepsizes=theorem for ccs"])
        xbar = X0.mean(axis=0, keepdims=True)
        c_s = theory.ccs_scale(
            cert, float(np.linalg.norm(X0 - xbar)), compress.max_norm(X0, spec.p)
        )
        cert.schedule_c = c_s
        return ScalingSchedule(c_s, cert.schedule_beta), cert.schedule_beta, c_s
    kv = _kvlist(text)
    return ScalingSchedule(float(kv["c"]), float(kv["beta"])), None, None


def _resolve_dyna_schedule(cfg, cert, m, obj, gamma, tau, X0, spec, d):
    text = cfg.schedule.strip()
    if text == "paper_default":
        return None, True
    if text == "theorem":
        if cert is None:
            raise ConfigError(["schedule=theorem needs stepsizes=theorem for dyna_cold"])
        if not cert.valid:
            # compression too coarse for a certified schedule on this graph;
            # fall back to the benchmark default rule (flagged uncertified)
            return None, True
        grad0 = obj.grad_matrix(X0)
        X1 = X0 - gamma * grad0
        ev = optim.LyapunovEvaluator(m, obj, gamma, tau, cert.constants["delta"], "thm5")
        e1 = ev.value(X1, np.zeros_like(X1))
        Y1 = X1 - gamma * obj.grad_matrix(X1)
        e2 = compress.max_norm(Y1, spec.p) ** 2
        _, _, schedule = theory.dyna_initial_constants(cert, e1, e2)
        return schedule, False
    kv = _kvlist(text)
    return ScalingSchedule(float(kv["c"]), float(kv["beta"])), False


def error_column(cfg: ExperimentConfig) -> str:
    return "consensus_error" if cfg.task == "consensus" else "optimality_gap"


def summarize(traces: list, errcol: str):
    """Seed-mean error and bits per iteration, plus bits-to-epsilon."""
    iters = min(len(t) for t in traces)
    err = np.stack([t.column(errcol)[:iters] for t in traces])
    bits = np.stack([t.column("bits_cumulative")[:iters] for t in traces])
    mean_err = err.mean(axis=0)
    mean_bits = bits.mean(axis=0)
    bits_to_eps = {}
    for eps in EPS_THRESHOLDS:
        hit = np.flatnonzero(mean_err <= eps)
        bits_to_eps[eps] = float(mean_bits[hit[0]]) if hit.size else None
    return mean_err, mean_bits, bits_to_eps


def write_summary(path, cfg_text_lines, mean_err, mean_bits, bits_to_eps, errcol):
    with open(path, "w", encoding="utf-8") as fp:
        for line in cfg_text_lines:
            fp.write(f"# {line}\n")
        for eps, bits in bits_to_eps.items():
            fp.write(f"# bits_to_{eps:g}={'' if bits is None else format(bits, '.17g')}\n")
        fp.write(f"iter,mean_{errcol},mean_bits_cumulative\n")
        for k in range(len(mean_err)):
            fp.write(f"{k},{format(mean_err[k], '.17g')},{format(mean_bits[k], '.17g')}\n")


def run(cfg: ExperimentConfig, force: bool = False, reproducible: bool = False, out: str = None):
    """Execute one experiment: per-seed trace CSVs plus summary.csv."""
    if cfg.task == "certify":
        return run_certify(cfg)
    out_dir = out or cfg.out
    os.makedirs(out_dir, exist_ok=True)
    kind, n = _parse_graph(cfg.graph)
    g = topology.build_graph(kind, n, seed=cfg.graph_seed)
    m = topology.metropolis_weights(g)
    spec = compress.parse_compressor(cfg.compressor)

    header = [f"{k}={v}" for k, v in sorted(cfg.raw.items())] or ["(defaults)"]
    # per-trace headers omit the seeds list so a trace's bytes depend only on
    # its own seed, not on how many others ran alongside it
    trace_header = [f"{k}={v}" for k, v in sorted(cfg.raw.items()) if k != "seeds"] or ["(defaults)"]
    traces, paths = [], []
    for seed in cfg.seeds:
        trace = _run_one_seed(cfg, seed, m, spec, force)
        trace.meta["config"] = ";".join(trace_header)
        if not reproducible:
            trace.meta["timestamp"] = datetime.datetime.now().isoformat()
        path = os.path.join(out_dir, f"trace_seed{seed}.csv")
        write_csv(trace, path)
        traces.append(trace)
        paths.append(path)

    errcol = error_column(cfg)
    mean_err, mean_bits, bits_to_eps = summarize(traces, errcol)
    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary(summary_path, header, mean_err, mean_bits, bits_to_eps, errcol)
    return {"traces": paths, "summary": summary_path, "bits_to_eps": bits_to_eps}


def run_certify(cfg: ExperimentConfig, trace_path: str = None):
    path = trace_path or cfg.trace
    trace = read_csv(path)
    cert_lines = [f"{k[5:]}={v}" for k, v in trace.meta.items() if k.startswith("cert.")]
    if not cert_lines:
        raise InvalidParameterError(f"{path}: no embedded certificate (run with stepsizes=theorem)")
    cert = theory.RateCertificate.from_text("\n".join(cert_lines))
    if cfg.theorem and cfg.theorem != cert.theorem:
        raise InvalidParameterError(
            f"trace was certified under {cert.theorem}, not {cfg.theorem}"
        )
    mode = {"fitted": "fitted_rate", "envelope": "per_step_envelope"}.get(cfg.mode, cfg.mode)
    report = theory.certify_trace(trace, cert, burn_in=cfg.burn_in, mode=mode, margin=cfg.margin)
    return report


def run_sweep(cfg: ExperimentConfig, vary: str, force: bool = False, reproducible: bool = False,
              out: str = None):
    """Run the base config once per value of ``--vary key=v1,v2,...``."""
    key, _, values = vary.partition("=")
    if not _ or key not in ("compressor", "algorithm", "graph_seed", "gamma"):
        raise InvalidParameterError(
            "--vary expects compressor=..., algorithm=..., graph_seed=... or gamma=..."
        )
    out_dir = out or cfg.out
    results = {}
    for value in values.split(","):
        if key == "gamma":
            sub = replace(cfg, stepsizes=f"gamma={value}")
        else:
            sub = replace(cfg, **{key: (int(value) if key == "graph_seed" else value)})
        sub.raw = dict(cfg.raw)
        sub.raw[key if key != "gamma" else "stepsizes"] = value if key != "gamma" else f"gamma={value}"
        results[value] = run(sub, force=force, reproducible=reproducible,
                             out=os.path.join(out_dir, f"{key}_{value}"))
    table_path = os.path.join(out_dir, "sweep_bits_to_eps.csv")
    os.makedirs(out_dir, exist_ok=True)
    with open(table_path, "w", encoding="utf-8") as fp:
        fp.write(f"{key}," + ",".join(f"bits_to_{eps:g}" for eps in EPS_THRESHOLDS) + "\n")
        for value, res in results.items():
            cells = [
                "" if res["bits_to_eps"][eps] is None else format(res["bits_to_eps"][eps], ".17g")
                for eps in EPS_THRESHOLDS
            ]
            fp.write(f"{value}," + ",".join(cells) + "\n")
    return {"results": results, "table": table_path}


def load_config(path: str, force: bool = False) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fp:
        return parse_config(fp.read(), force=force)
