"""Command-line front end: generate benchmarks, solve, evaluate, compare.

Every command is deterministic given its flags and seeds; result files echo
the full configuration, and CSV rows follow a versioned column schema.  The
only non-reproducible field is the solve-time column.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .basis import BASIS_PRESETS, basis_preset
from .costnet import elimination_order, induced_width
from .mdp import FactoredMdp, ModelError, load_model, save_model
from .partition import (
    PartitionMatrix,
    PartitionError,
    heuristic_partition,
    load_partition,
    save_partition,
    single_space_partition,
)
from .policy import GreedyPolicy, rollout_eval, server_heuristic_policy
from .solvers import (
    SolveConfig,
    SolveError,
    prepare,
    solve_alp,
    solve_palp,
    solve_sampled_alp,
)

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "schema_version", "command", "model", "topology", "n", "method", "basis",
    "partition", "solve_seed", "eval_seed", "rollouts", "horizon",
    "initial_state", "objective", "cuts", "iterations", "termination",
    "reward_mean", "reward_stderr", "truncation_bias_bound", "solve_seconds",
]
TIMING_COLUMNS = ["solve_seconds"]

RESULT_SCHEMA_VERSION = 1


class CliError(RuntimeError):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    return str(value)


def metadata_path(model_path) -> Path:
    p = Path(model_path)
    return p.with_name(p.stem + ".meta.json")


def _load(model_path):
    mdp = load_model(model_path)
    meta = None
    mpath = metadata_path(model_path)
    if mpath.exists():
        meta = bench.load_metadata(mpath)
    return mdp, meta


def _bases_for(mdp, meta, preset: str):
    arrows = None
    if meta is not None:
        arrows = meta.arrows
        if preset == "singleton-pairwise" and meta.topology.kind == "grid":
            raise CliError("the singleton-pairwise preset applies to ring and "
                           "ring-of-rings topologies only")
    if preset == "singleton-pairwise" and arrows is None:
        raise CliError("singleton-pairwise needs the model's metadata sidecar "
                       "for its connection list")
    return basis_preset(mdp, preset, arrows)


def _partition_for(source: str, network) -> PartitionMatrix:
    if source == "heuristic":
        return heuristic_partition(network)
    if source == "single-space":
        return single_space_partition(network)
    path = Path(source)
    if not path.exists():
        raise CliError(f"partition file {source!r} does not exist")
    return load_partition(path, network)


def _csv_append(path, rows: list[dict]) -> None:
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def _base_row(command, args, mdp, meta) -> dict:
    return {
        "schema_version": CSV_SCHEMA_VERSION,
        "command": command,
        "model": Path(args.model).name,
        "topology": meta.topology.kind if meta else "",
        "n": mdp.num_vars,
    }


def _write_result(path, result, args, mdp, extra=None) -> None:
    doc = {"schema_version": RESULT_SCHEMA_VERSION,
           "model": str(args.model),
           "basis": args.basis,
           "gamma": mdp.gamma}
    doc.update(result.to_dict())
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _config_from(args) -> SolveConfig:
    return SolveConfig(max_iterations=args.max_iterations, oracle=args.oracle,
                       weight_bound=args.weight_bound)


def _solve_one(method, mdp, bases, prep, args, config):
    if method == "alp":
        return solve_alp(mdp, bases, config, prepared=prep)
    if method == "palp":
        matrix = _partition_for(args.partition, prep.network)
        return solve_palp(mdp, bases, matrix, config, prepared=prep)
    if method == "sampled-alp":
        count = args.samples or 100 * mdp.num_vars
        return solve_sampled_alp(mdp, bases, count, args.seed, config,
                                 prepared=prep)
    raise CliError(f"unknown solve method {method!r}")


# --- commands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.topology == "ring":
        topo = bench.ring(args.n)
    elif args.topology == "ring-of-rings":
        topo = bench.ring_of_rings(args.rings, args.ring_size)
    else:
        topo = bench.grid(args.rows, args.cols)
    dynamics = bench.DynamicsParams(reboot_success=args.reboot_success,
                                    base_up=args.base_up,
                                    neighbor_penalty=args.neighbor_penalty)
    mdp, meta = bench.generate(topo, dynamics, gamma=args.gamma)
    save_model(mdp, args.out)
    bench.save_metadata(meta, metadata_path(args.out))

    prep = prepare(mdp, basis_preset(mdp, "singleton"))
    order = elimination_order(prep.network.terms)
    width = induced_width(order, prep.network.terms)
    print(f"wrote {args.out} (+ {metadata_path(args.out).name}): "
          f"n={mdp.num_vars} actions={mdp.num_actions} "
          f"constraint-width~{width} (singleton basis)")
    return 0


def cmd_solve(args) -> int:
    mdp, meta = _load(args.model)
    bases = _bases_for(mdp, meta, args.basis)
    prep = prepare(mdp, bases)
    config = _config_from(args)
    result = _solve_one(args.method, mdp, bases, prep, args, config)
    extra = {"partition": args.partition if args.method == "palp" else None}
    _write_result(args.out, result, args, mdp, extra)
    print(f"{args.method}: objective={result.objective!r} "
          f"cuts={result.total_cuts} iterations={result.iterations} "
          f"termination={result.termination}")
    if result.termination != "optimal":
        print(f"error: solve terminated with {result.termination}", file=sys.stderr)
        return 3
    return 0


def _policy_from_result(mdp, meta, doc):
    bases = _bases_for(mdp, meta, doc["basis"])
    weights = np.asarray(doc["weights"], dtype=np.float64)
    return GreedyPolicy(mdp, bases, weights), doc


def cmd_eval(args) -> int:
    mdp, meta = _load(args.model)
    rows = []
    if args.method == "server-heuristic":
        policy = server_heuristic_policy(mdp, meta.server if meta else None)
        method, basis, objective, cuts, iters, term, seconds, solve_seed = (
            "server-heuristic", "", None, None, None, "", 0.0, None)
        partition = ""
    else:
        with open(args.result) as fh:
            doc = json.load(fh)
        policy, doc = _policy_from_result(mdp, meta, doc)
        method = doc["method"]
        basis = doc["basis"]
        objective = doc["objective"]
        cuts = sum(doc["cuts_per_space"])
        iters = doc["iterations"]
        term = doc["termination"]
        seconds = doc["wall_time_seconds"]
        solve_seed = doc.get("seed")
        partition = doc.get("partition") or ""
    report = rollout_eval(mdp, policy, rollouts=args.rollouts,
                          horizon=args.horizon, seed=args.seed,
                          initial_state_rule=args.initial_state)
    row = _base_row("eval", args, mdp, meta)
    row.update({
        "method": method, "basis": basis, "partition": partition,
        "solve_seed": solve_seed, "eval_seed": args.seed,
        "rollouts": report.rollouts, "horizon": report.horizon,
        "initial_state": report.initial_state_rule,
        "objective": objective, "cuts": cuts, "iterations": iters,
        "termination": term, "reward_mean": report.mean,
        "reward_stderr": report.stderr,
        "truncation_bias_bound": report.truncation_bias_bound,
        "solve_seconds": seconds,
    })
    rows.append(row)
    _csv_append(args.csv, rows)
    print(f"{method}: reward={report.mean!r} +- {report.stderr!r} "
          f"({report.rollouts} rollouts, horizon {report.horizon})")
    return 0


def cmd_compare(args) -> int:
    mdp, meta = _load(args.model)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    known = {"alp", "palp", "sampled-alp", "server-heuristic"}
    unknown = [m for m in methods if m not in known]
    if unknown:
        raise CliError(f"unknown compare methods: {unknown}")
    bases = _bases_for(mdp, meta, args.basis)
    prep = prepare(mdp, bases)
    config = _config_from(args)

    rows = []
    reward_by_method: dict[str, float] = {}
    sampled_rewards = []

    def evaluate(policy, method, solve_seed, result=None, partition=""):
        report = rollout_eval(mdp, policy, rollouts=args.rollouts,
                              horizon=args.horizon, seed=args.eval_seed,
                              initial_state_rule=args.initial_state)
        row = _base_row("compare", args, mdp, meta)
        row.update({
            "method": method, "basis": args.basis, "partition": partition,
            "solve_seed": solve_seed, "eval_seed": args.eval_seed,
            "rollouts": report.rollouts, "horizon": report.horizon,
            "initial_state": report.initial_state_rule,
            "objective": result.objective if result else None,
            "cuts": result.total_cuts if result else None,
            "iterations": result.iterations if result else None,
            "termination": result.termination if result else "",
            "reward_mean": report.mean, "reward_stderr": report.stderr,
            "truncation_bias_bound": report.truncation_bias_bound,
            "solve_seconds": result.wall_time if result else 0.0,
        })
        rows.append(row)
        return report

    for method in methods:
        if method == "server-heuristic":
            policy = server_heuristic_policy(mdp, meta.server if meta else None)
            report = evaluate(policy, method, None)
            reward_by_method[method] = report.mean
        elif method == "sampled-alp":
            count = args.samples or 100 * mdp.num_vars
            for k in range(args.sampled_seeds):
                seed = args.seed + k
                result = solve_sampled_alp(mdp, bases, count, seed, config,
                                           prepared=prep)
                policy = GreedyPolicy(mdp, bases, result.weights,
                                      prep.backprojections)
                report = evaluate(policy, method, seed, result)
                sampled_rewards.append(report.mean)
        else:
            result = _solve_one(method, mdp, bases, prep, args, config)
            policy = GreedyPolicy(mdp, bases, result.weights,
                                  prep.backprojections)
            partition = args.partition if method == "palp" else ""
            report = evaluate(policy, method, None, result, partition)
            reward_by_method[method] = report.mean

    _csv_append(args.csv, rows)

    summary: dict = {"model": Path(args.model).name, "methods": methods}
    if "alp" in reward_by_method and "palp" in reward_by_method:
        summary["palp_alp_reward_ratio"] = (
            reward_by_method["palp"] / reward_by_method["alp"])
    if sampled_rewards:
        arr = np.asarray(sampled_rewards)
        summary["sampled_alp_reward"] = {
            "min": float(arr.min()), "mean": float(arr.mean()),
            "max": float(arr.max()),
            "stdev": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
            "seeds": len(arr),
        }
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=1)
            fh.write("\n")
    print(json.dumps(summary, indent=1))
    return 0


def cmd_weights_dump(args) -> int:
    mdp, meta = _load(args.model)
    bases = _bases_for(mdp, meta, args.basis)
    prep = prepare(mdp, bases)
    config = _config_from(args)
    alp = solve_alp(mdp, bases, config, prepared=prep)
    matrix = _partition_for(args.partition, prep.network)
    palp = solve_palp(mdp, bases, matrix, config, prepared=prep)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["basis_id", "scope", "weight_alp", "weight_palp"])
        for b in bases:
            writer.writerow([b.id, " ".join(map(str, b.factor.scope)),
                             _fmt(float(alp.weights[b.id])),
                             _fmt(float(palp.weights[b.id]))])
    print(f"wrote {args.out} ({len(bases)} weights; "
          f"alp objective {alp.objective!r}, palp objective {palp.objective!r})")
    return 0


def cmd_partition_dump(args) -> int:
    mdp, meta = _load(args.model)
    bases = _bases_for(mdp, meta, args.basis)
    prep = prepare(mdp, bases)
    matrix = _partition_for(args.partition, prep.network)
    dense = matrix.to_dense()
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["space"] + [f"term_{i}" for i in range(dense.shape[1])])
        for k in range(dense.shape[0]):
            writer.writerow([k] + [_fmt(float(x)) for x in dense[k]])
    if args.network:
        with open(args.network, "w") as fh:
            json.dump(prep.network.to_dict(), fh, indent=1)
            fh.write("\n")
    print(f"wrote {args.out}: {dense.shape[0]} spaces x {dense.shape[1]} terms")
    return 0


# --- argument parsing ---------------------------------------------------------

def _add_solver_flags(p):
    p.add_argument("--basis", default="singleton", choices=BASIS_PRESETS)
    p.add_argument("--partition", default="heuristic",
                   help="heuristic | single-space | path to a partition file")
    p.add_argument("--max-iterations", type=int, default=10_000)
    p.add_argument("--oracle", default="ve", choices=["ve", "exhaustive"])
    p.add_argument("--weight-bound", type=float, default=1e6)
    p.add_argument("--seed", type=int, default=0,
                   help="seed for sampled constraints")
    p.add_argument("--samples", type=int, default=None,
                   help="sampled constraints (default 100n)")


def _add_eval_flags(p):
    p.add_argument("--rollouts", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=300)
    p.add_argument("--initial-state", default="all-up",
                   choices=["all-up", "uniform"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="palp",
        description="Plan in factored MDPs with full, partitioned, or sampled "
                    "linear-programming approximations.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate", help="write a network-administration model")
    p.add_argument("--topology", required=True, choices=bench.TOPOLOGY_KINDS)
    p.add_argument("--n", type=int, default=6, help="ring size")
    p.add_argument("--rings", type=int, default=4)
    p.add_argument("--ring-size", type=int, default=3)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--reboot-success", type=float, default=0.95)
    p.add_argument("--base-up", type=float, default=0.5)
    p.add_argument("--neighbor-penalty", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve one model with one method")
    p.add_argument("--model", required=True)
    p.add_argument("--method", required=True,
                   choices=["alp", "palp", "sampled-alp"])
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="evaluate a solved policy by rollouts")
    p.add_argument("--model", required=True)
    p.add_argument("--result", help="result file from `palp solve`")
    p.add_argument("--method", default=None,
                   help="server-heuristic (otherwise taken from --result)")
    p.add_argument("--seed", type=int, default=42)
    _add_eval_flags(p)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="run several methods on one model")
    p.add_argument("--model", required=True)
    p.add_argument("--methods", default="alp,palp,sampled-alp,server-heuristic")
    _add_solver_flags(p)
    p.add_argument("--sampled-seeds", type=int, default=5)
    p.add_argument("--eval-seed", type=int, default=42)
    _add_eval_flags(p)
    p.add_argument("--csv", required=True)
    p.add_argument("--summary", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("weights-dump", help="solve alp+palp and dump weights")
    p.add_argument("--model", required=True)
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weights_dump)

    p = sub.add_parser("partition-dump", help="dump a partition matrix")
    p.add_argument("--model", required=True)
    p.add_argument("--basis", default="singleton", choices=BASIS_PRESETS)
    p.add_argument("--partition", default="heuristic")
    p.add_argument("--out", required=True)
    p.add_argument("--network", default=None,
                   help="also dump the cost network as JSON")
    p.set_defaults(func=cmd_partition_dump)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd == "eval":
        if args.method == "server-heuristic":
            pass
        elif args.result is None:
            parser.error("eval needs --result or --method server-heuristic")
        elif args.method is not None:
            parser.error("--method is only for server-heuristic; weights come "
                         "from --result")
    try:
        return args.func(args)
    except (CliError, ModelError, PartitionError, SolveError, OSError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
