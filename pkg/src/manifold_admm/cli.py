"""Batch command-line front end.

``solver maxbisect|mpca|community|synth|solve [options]``. Every run is fully
determined by its options and seed; outputs are CSV traces and JSON
summaries written under ``--out``. Exit status is 0 on success, 2 on input
errors and 3 when ``--strict`` parameters fall outside the admissible region.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .applications.community import (
    planted_partition,
    solve_community,
)
from .applications.graphs import (
    FormatError,
    WeightedGraph,
    format_graph,
    random_graph,
    read_graph,
    read_labels,
    read_tensor,
    write_labels,
    write_tensor,
)
from .applications.maxbisect import (
    DEFAULT_LIPSCHITZ_ESTIMATE,
    brute_force_bisection,
    solve_max_bisection,
)
from .applications.mpca import (
    DEFAULT_MPCA_LIPSCHITZ,
    MpcaParams,
    generate_mpca_data,
    init_mpca_state,
    mpca_lagrangian,
    mpca_metrics,
    mpca_potential,
    mpca_step,
)
from .engine import TraceRow, make_config, solve
from .params import InfeasibleParametersError, Variant
from .synthetic import build_synthetic_problem

__all__ = ["main", "build_parser", "parse_seeds", "verify_trace", "EXIT_INPUT", "EXIT_INFEASIBLE"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3


class InputError(ValueError):
    """Bad command-line or configuration input."""


# ---------------------------------------------------------------- helpers

def parse_seeds(text):
    """``"N"`` or ``"N..M"`` (inclusive) to a list of ints."""
    s = str(text).strip()
    try:
        if ".." in s:
            a, b = s.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s)]
    except ValueError:
        raise InputError(f"invalid seed range {text!r}; expected N or N..M") from None


def _int_tuple(text, name):
    if isinstance(text, (list, tuple)):
        vals = text
    else:
        vals = str(text).replace("x", ",").split(",")
    try:
        out = tuple(int(v) for v in vals)
    except ValueError:
        raise InputError(f"--{name}: expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise InputError(f"--{name}: sizes must be positive")
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Variant):
        return obj.value
    return obj


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _trace_rows(trace, timing):
    fields = TraceRow.FIELDS if timing else TraceRow.FIELDS[:-1]
    return fields, [r.as_tuple()[: len(fields)] for r in trace]


def verify_trace(path, column="psi", start=1, tol=1e-9):
    """Check that ``column`` of a trace CSV never increases by more than
    ``tol`` from row ``start`` on. Returns a list of offending ``k``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and column not in rows[0]:
        raise InputError(f"{path}: no {column!r} column")
    vals = [(int(r["k"]), float(r[column])) for r in rows]
    return [k for (_, a), (k, b) in zip(vals[start:], vals[start + 1:]) if b > a + tol]


def _workers(n_jobs):
    env = os.environ.get("SOLVER_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InputError(f"SOLVER_THREADS must be an integer, got {env!r}") from None
        cap = max(cap, 1)
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def _run_seeds(fn, seeds):
    """Run ``fn(seed)`` for every seed, possibly in parallel; results are
    returned in seed order."""
    n = _workers(len(seeds))
    if n == 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, seeds))


def _solver_overrides(opts):
    out = {
        "beta": opts.get("beta"),
        "gamma": opts.get("gamma"),
        "sigma_h": opts.get("sigma_h"),
        "batch": opts.get("batch"),
        "strict": bool(opts.get("strict")),
    }
    return {k: v for k, v in out.items() if v is not None}


def _summary_stats(values):
    a = np.asarray(values, float)
    sd = float(np.std(a, ddof=1)) if a.size > 1 else 0.0
    return {"mean": float(np.mean(a)), "sd": sd, "min": float(np.min(a)),
            "max": float(np.max(a))}


# ---------------------------------------------------------------- commands

def cmd_maxbisect(opts, out):
    if opts.get("graph"):
        g = read_graph(opts["graph"])
        source = str(opts["graph"])
    else:
        n = int(opts["n"])
        if n < 2:
            raise InputError("--n must be at least 2")
        g = random_graph(n, float(opts["density"]), np.random.default_rng(opts["graph_seed"]),
                         opts["weights"])
        source = f"random n={n} density={opts['density']} seed={opts['graph_seed']}"
    if g.n % 2:
        raise InputError("maximum bisection needs an even number of nodes")
    variant = opts.get("variant") or "exact"
    iters = int(opts.get("iters") or 30)
    lip = opts.get("lipschitz")
    lip = DEFAULT_LIPSCHITZ_ESTIMATE if lip is None else float(lip)
    over = _solver_overrides(opts)
    if opts.get("eps") is not None:
        over["eps"] = opts["eps"]

    def run(seed):
        res = solve_max_bisection(g, seed, opts["mu"], opts["nu"], variant, iters,
                                  lipschitz=lip, **over)
        fields, rows = _trace_rows(res.solve.trace, opts["timing"])
        _write_csv(out / f"maxbisect_trace_seed{seed}.csv", fields, rows)
        return res

    results = _run_seeds(run, opts["seeds"])
    cuts = [r.cut for r in results]
    summary = {"command": "maxbisect", "graph": source, "n": g.n, "edges": len(g.edges),
               "variant": Variant.parse(variant), "iterations": iters, "mu": opts["mu"],
               "nu": opts["nu"], "lipschitz": lip, "seeds": opts["seeds"],
               "cut": _summary_stats(cuts)}
    header = ["seed", "cut"]
    rows = [[s, c] for s, c in zip(opts["seeds"], cuts)]
    if opts.get("brute_force"):
        if g.n > 24:
            raise InputError("--brute-force is limited to graphs with at most 24 nodes")
        best, _ = brute_force_bisection(g.W)
        header.append("ratio")
        for r in rows:
            r.append(r[1] / best if best > 0 else 1.0)
        summary["optimum"] = best
        summary["ratio"] = _summary_stats([r[2] for r in rows])
    _write_csv(out / "maxbisect_cuts.csv", header, rows)
    _write_json(out / "maxbisect_summary.json", summary)
    print(f"maxbisect: mean cut {summary['cut']['mean']:.4f} (sd {summary['cut']['sd']:.4f})"
          + (f", ratio {summary['ratio']['mean']:.4f}" if "ratio" in summary else ""))
    return EXIT_OK


def _mpca_params(opts):
    lip = opts.get("lipschitz")
    try:
        return MpcaParams(
            alpha1=float(opts["alpha1"]), alpha2=float(opts["alpha2"]), mu=float(opts["mu"]),
            core_q=float(opts["core_q"]), factor_q=float(opts["factor_q"]),
            lipschitz=DEFAULT_MPCA_LIPSCHITZ if lip is None else float(lip),
            beta=opts.get("beta"), gamma=opts.get("gamma"), sigma=opts.get("sigma_h"),
            eta=opts.get("eta"),
        ).resolved()
    except InfeasibleParametersError:
        raise
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_mpca(opts, out):
    core = _int_tuple(opts["core"], "core")
    iters = int(opts.get("iters") or 100)
    params = _mpca_params(opts)
    if opts.get("tensors"):
        tensors = [read_tensor(p) for p in opts["tensors"]]
        shapes = {t.shape for t in tensors}
        if len(shapes) != 1:
            raise InputError("all tensor files must have the same shape")
        shape = tensors[0].shape
        fixed = np.stack(tensors)
    else:
        shape = _int_tuple(opts["shape"], "shape")
        fixed = None
    if len(shape) != len(core) or any(m > n for n, m in zip(shape, core)):
        raise InputError(f"core shape {core} is inconsistent with tensor shape {shape}")

    def run(seed):
        rng = np.random.default_rng(seed)
        if fixed is None:
            data = generate_mpca_data(rng, shape, core, int(opts["instances"]),
                                      noise_sd=float(opts["noise"]))
            T, truth = data.tensors, data.clean
        else:
            T = truth = fixed
        st = init_mpca_state(T, core, params, rng)
        rows = []
        for k in range(iters):
            st = mpca_step(st, T)
            rows.append([k, mpca_lagrangian(st, T), mpca_potential(st, T),
                         mpca_metrics(st, truth)["rel_err"]])
        _write_csv(out / f"mpca_trace_seed{seed}.csv", ["k", "lagrangian", "psi", "rel_err"],
                   rows)
        return mpca_metrics(st, truth)

    results = _run_seeds(run, opts["seeds"])
    cols = ["rel_err", "rel_err_sd", "orth_violation", "core_sparsity", "factor_sparsity"]
    _write_csv(out / "mpca_table.csv", ["seed"] + cols,
               [[s] + [m[c] for c in cols] for s, m in zip(opts["seeds"], results)])
    avg = {c: float(np.mean([m[c] for m in results])) for c in cols}
    summary = {"command": "mpca", "shape": shape, "core": core, "iterations": iters,
               "seeds": opts["seeds"], "params": vars(params), "average": avg,
               "per_seed": results}
    _write_json(out / "mpca_summary.json", summary)
    print("mpca: err1 {rel_err:.4g} SD {rel_err_sd:.4g} err2 {orth_violation:.3g} "
          "spars1 {core_sparsity:.4f} spars2 {factor_sparsity:.4f}".format(**avg))
    return EXIT_OK


def _relabel(labels):
    _, inv = np.unique(labels, return_inverse=True)
    return inv


def cmd_community(opts, out):
    if opts.get("graph"):
        g = read_graph(opts["graph"], default_weight=1.0)
        A = (g.W != 0).astype(float)
        truth = None
        if opts.get("labels"):
            truth = read_labels(opts["labels"])
            if truth.size != g.n:
                raise InputError(f"label file has {truth.size} labels but the graph has "
                                 f"{g.n} nodes")
            truth = _relabel(truth)
        k = opts.get("k")
        if k is None:
            if truth is None:
                raise InputError("--k is required when no label file is given")
            k = int(truth.max()) + 1
        graphs = None
    else:
        k = int(opts.get("k") or 2)
        A = truth = None
        graphs = {}
    k = int(k)
    variant = opts.get("variant") or "linearized"
    iters = int(opts.get("iters") or 300)
    over = _solver_overrides(opts)

    def run(seed):
        if graphs is not None:
            Ai, ti = planted_partition(int(opts["n"]), k, float(opts["p_in"]),
                                       float(opts["p_out"]), np.random.default_rng(seed))
        else:
            Ai, ti = A, truth
        res = solve_community(Ai, k, seed, ti, opts["mu"], opts["lipschitz"], iters,
                              variant, **over)
        fields, rows = _trace_rows(res.solve.trace, opts["timing"])
        _write_csv(out / f"community_trace_seed{seed}.csv", fields, rows)
        write_labels(out / f"community_labels_seed{seed}.txt", res.labels)
        return res.error

    errors = _run_seeds(run, opts["seeds"])
    summary = {"command": "community", "k": k, "iterations": iters, "mu": opts["mu"],
               "lipschitz": opts["lipschitz"], "variant": Variant.parse(variant),
               "seeds": opts["seeds"]}
    if errors[0] is not None:
        summary["error_rate"] = _summary_stats(errors)
        _write_csv(out / "community_errors.csv", ["seed", "error_rate"],
                   list(zip(opts["seeds"], errors)))
        print(f"community: average error rate {100 * summary['error_rate']['mean']:.2f}%")
    else:
        print("community: labels written (no ground truth)")
    _write_json(out / "community_summary.json", summary)
    return EXIT_OK


def cmd_synth(opts, out):
    kind = opts["kind"]
    written = []
    for seed in opts["seeds"]:
        rng = np.random.default_rng(seed)
        if kind == "graph":
            g = random_graph(int(opts["n"]), float(opts["density"]), rng, opts["weights"])
            p = out / f"graph_seed{seed}.txt"
            p.write_text(format_graph(g), encoding="utf-8")
            written.append(p)
        elif kind == "sbm":
            A, labels = planted_partition(int(opts["n"]), int(opts.get("k") or 2),
                                          float(opts["p_in"]), float(opts["p_out"]), rng)
            p = out / f"sbm_seed{seed}.txt"
            p.write_text(format_graph(WeightedGraph(A.shape[0], A)), encoding="utf-8")
            lp = out / f"sbm_labels_seed{seed}.txt"
            write_labels(lp, labels + 1)
            written += [p, lp]
        elif kind == "tensor":
            shape = _int_tuple(opts["shape"], "shape")
            core = _int_tuple(opts["core"], "core")
            if len(shape) != len(core) or any(m > n for n, m in zip(shape, core)):
                raise InputError(f"core shape {core} is inconsistent with tensor shape {shape}")
            data = generate_mpca_data(rng, shape, core, int(opts["instances"]),
                                      noise_sd=float(opts["noise"]))
            for i, t in enumerate(data.tensors):
                p = out / f"tensor_seed{seed}_{i}.txt"
                write_tensor(p, t)
                written.append(p)
        elif kind == "problem":
            spec = _problem_spec(opts, seed)
            build_synthetic_problem(**_problem_kwargs(spec))  # validate
            p = out / f"problem_seed{seed}.json"
            _write_json(p, spec)
            written.append(p)
        else:
            raise InputError(f"unknown synth kind {kind!r}")
    _write_json(out / "synth_summary.json",
                {"command": "synth", "kind": kind, "seeds": opts["seeds"],
                 "files": sorted(p.name for p in written)})
    print(f"synth: wrote {len(written)} file(s) to {out}")
    return EXIT_OK


def _problem_spec(opts, seed):
    return {"kind": "synthetic", "seed": int(seed), "n_blocks": int(opts["blocks"]),
            "dims": int(opts["dims"]), "n_rows": int(opts["rows"]),
            "manifold": opts["manifold"], "stiefel_cols": int(opts["stiefel_cols"]),
            "sigma2": opts.get("sigma2")}


def _problem_kwargs(spec):
    if spec.get("kind") != "synthetic":
        raise InputError("problem file must describe a 'synthetic' instance")
    try:
        return {"seed": int(spec["seed"]), "n_blocks": int(spec["n_blocks"]),
                "dims": int(spec["dims"]), "n_rows": int(spec["n_rows"]),
                "manifold": spec.get("manifold", "sphere"),
                "stiefel_cols": int(spec.get("stiefel_cols", 2)),
                "sigma2": spec.get("sigma2")}
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"incomplete problem description: {exc}") from None


def cmd_solve(opts, out):
    variant = Variant.parse(opts.get("variant") or "exact")
    if opts.get("problem"):
        try:
            spec = json.loads(Path(opts["problem"]).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read {opts['problem']}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{opts['problem']}: line {exc.lineno}: invalid JSON") from None
        specs = [spec]
        seeds = [int(spec.get("seed", 0))]
    else:
        seeds = opts["seeds"]
        specs = [_problem_spec(opts, s) for s in seeds]
    if variant.stochastic:
        for s in specs:
            if s.get("sigma2") is None:
                s["sigma2"] = 0.01
    iters = int(opts.get("iters") or 1000)
    eps = float(opts.get("eps") or 1e-3)
    over = _solver_overrides(opts)

    def run(pair):
        seed, spec = pair
        try:
            problem = build_synthetic_problem(**_problem_kwargs(spec))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        cfg = make_config(problem, variant, max_iter=iters, eps=eps, seed=seed, **over)
        res = solve(problem, cfg, timing=opts["timing"])
        path = out / f"solve_trace_seed{seed}.csv"
        fields, rows = _trace_rows(res.trace, opts["timing"])
        _write_csv(path, fields, rows)
        bad = verify_trace(path) if opts.get("verify_trace") else []
        rec = {"seed": seed, "iterations": res.iterations, "converged": res.converged,
               "k_star": res.k_star, "report": res.report.as_dict(),
               "budget": None if res.budget is None else vars(res.budget),
               "psi_increases": bad}
        if variant is Variant.LINESEARCH:
            rec["min_step"] = min(res.steps) if res.steps else None
            rec["gradient_bound"] = res.grad_bound
        return rec, cfg

    results = _run_seeds(run, list(zip(seeds, specs)))
    cfg = results[0][1]
    summary = {"command": "solve", "variant": variant, "iterations_max": iters, "eps": eps,
               "beta": cfg.beta, "gamma": cfg.gamma, "sigma_h": cfg.sigma_h,
               "runs": [r for r, _ in results]}
    _write_json(out / "solve_summary.json", summary)
    n_conv = sum(r["converged"] for r, _ in results)
    print(f"solve: {n_conv}/{len(results)} run(s) reached eps={eps:g}")
    if opts.get("verify_trace"):
        failing = [r["seed"] for r, _ in results if r["psi_increases"]]
        if failing and not variant.stochastic:
            print(f"verify-trace: potential increased for seed(s) {failing}", file=sys.stderr)
            return EXIT_FAIL
        print("verify-trace: potential nonincreasing")
    return EXIT_OK


COMMANDS = {
    "maxbisect": cmd_maxbisect,
    "mpca": cmd_mpca,
    "community": cmd_community,
    "synth": cmd_synth,
    "solve": cmd_solve,
}

DEFAULTS = {
    "maxbisect": {"n": 60, "density": 0.5, "weights": "unit", "graph_seed": 0, "mu": 0.01,
                  "nu": 1.0},
    "mpca": {"shape": "10,10,10", "core": "3,3,3", "instances": 20, "noise": 1e-3,
             "alpha1": 0.1, "alpha2": 0.01, "mu": 1e-6, "core_q": 2.0 / 3.0,
             "factor_q": 1.0},
    "community": {"n": 200, "p_in": 0.2, "p_out": 0.02, "mu": 50.0, "lipschitz": 100.0},
    "synth": {"kind": "graph", "n": 60, "density": 0.5, "weights": "unit", "p_in": 0.2,
              "p_out": 0.02, "shape": "10,10,10", "core": "3,3,3", "instances": 20,
              "noise": 1e-3, "blocks": 3, "dims": 4, "rows": 6, "manifold": "sphere",
              "stiefel_cols": 2},
    "solve": {"blocks": 3, "dims": 4, "rows": 6, "manifold": "sphere", "stiefel_cols": 2},
}


# ---------------------------------------------------------------- parsing

def _common(p):
    p.add_argument("--config", help="JSON file with flat option keys; flags override it")
    p.add_argument("--seed", type=int, help="single seed")
    p.add_argument("--seeds", help="inclusive seed range N..M")
    p.add_argument("--variant", help="exact|linearized|stochastic|linesearch|jacobi")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma-h", dest="sigma_h", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--out", help="output directory (default: current directory)")
    p.add_argument("--strict", action="store_true", default=None,
                   help="fail with exit status 3 on inadmissible parameters")
    p.add_argument("--timing", action="store_true", default=None,
                   help="add a wall-time column to traces (breaks byte reproducibility)")


def build_parser():
    parser = argparse.ArgumentParser(prog="solver", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maxbisect", help="maximum bisection via the sphere relaxation")
    _common(p)
    p.add_argument("--graph", help="graph file (first line 'n m', then 'i j w')")
    p.add_argument("--n", type=int, help="nodes of the generated graph")
    p.add_argument("--density", type=float)
    p.add_argument("--weights", choices=["unit", "int"])
    p.add_argument("--graph-seed", dest="graph_seed", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--lipschitz", type=float, help="Lipschitz estimate sizing the parameters")
    p.add_argument("--brute-force", dest="brute_force", action="store_true", default=None,
                   help="also report the ratio to the exhaustive optimum")

    p = sub.add_parser("mpca", help="sparse tensor PCA on synthetic or supplied tensors")
    _common(p)
    p.add_argument("--shape", help="tensor mode sizes, e.g. 10,10,10")
    p.add_argument("--core", help="core mode sizes, e.g. 3,3,3")
    p.add_argument("--instances", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--tensors", nargs="+", help="tensor files instead of generated data")
    p.add_argument("--alpha1", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--core-q", dest="core_q", type=float)
    p.add_argument("--factor-q", dest="factor_q", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--lipschitz", type=float)

    p = sub.add_parser("community", help="community detection")
    _common(p)
    p.add_argument("--graph", help="edge list (first line 'n m')")
    p.add_argument("--labels", help="ground-truth labels, one per line")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--p-in", dest="p_in", type=float)
    p.add_argument("--p-out", dest="p_out", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--lipschitz", type=float)

    p = sub.add_parser("synth", help="write synthetic instances")
    _common(p)
    p.add_argument("--kind", choices=["graph", "sbm", "tensor", "problem"])
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--weights", choices=["unit", "int"])
    p.add_argument("--p-in", dest="p_in", type=float)
    p.add_argument("--p-out", dest="p_out", type=float)
    p.add_argument("--shape")
    p.add_argument("--core")
    p.add_argument("--instances", type=int)
    p.add_argument("--noise", type=float)
    _problem_args(p)

    p = sub.add_parser("solve", help="run the solver on a synthetic multi-block problem")
    _common(p)
    p.add_argument("--problem", help="problem description written by 'synth --kind problem'")
    p.add_argument("--verify-trace", dest="verify_trace", action="store_true", default=None,
                   help="check that the potential column never increases")
    _problem_args(p)
    return parser


def _problem_args(p):
    p.add_argument("--blocks", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--rows", type=int)
    p.add_argument("--manifold", choices=["sphere", "stiefel"])
    p.add_argument("--stiefel-cols", dest="stiefel_cols", type=int)
    p.add_argument("--sigma2", type=float)


CONFIG_ALIASES = {"strict_params": "strict", "sigma-h": "sigma_h", "brute-force": "brute_force"}


def _load_config(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a JSON object")
    return {CONFIG_ALIASES.get(k, k).replace("-", "_"): v for k, v in data.items()}


def resolve_options(args):
    """Merge command defaults, the config file and explicit flags."""
    opts = dict(DEFAULTS[args.command])
    if args.config:
        opts.update(_load_config(args.config))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            opts[k] = v
    if args.seed is not None:
        seeds = [args.seed]
    elif args.seeds is not None:
        seeds = parse_seeds(args.seeds)
    elif "seeds" in opts and opts["seeds"] is not None:
        s = opts["seeds"]
        seeds = [int(v) for v in s] if isinstance(s, list) else parse_seeds(s)
    elif opts.get("seed") is not None:
        seeds = [int(opts["seed"])]
    else:
        seeds = [0]
    opts["seeds"] = seeds
    opts["timing"] = bool(opts.get("timing"))
    opts["strict"] = bool(opts.get("strict"))
    if opts.get("variant") is not None:
        try:
            opts["variant"] = Variant.parse(opts["variant"]).value
        except ValueError as exc:
            raise InputError(str(exc)) from None
    return opts


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(args)
        out = Path(opts.get("out") or ".")
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return COMMANDS[args.command](opts, out)
    except InfeasibleParametersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
