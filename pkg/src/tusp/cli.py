"""File-based pipeline: gen, solve, build-dataset, train, eval, policy-sim, estimate.

Every stage writes versioned JSON and prints the seeds it used. Reruns with
the same inputs produce byte-identical files; wall-clock measurements are
written only to ``*.timing.json`` side files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from multiprocessing import Pool
from pathlib import Path
from typing import Sequence

from .dataset import (
    STRATEGIES, balance_and_split, label_run, read_manifest, split_from_manifest, write_manifest,
)
from .errors import ConfigurationError, SchemaError, StructuralError
from .generator import ScenarioConfig, config_from_dict, config_to_dict, generate_instance
from .gnn import (
    Architecture, Metrics, architecture_from_dict, evaluate, model_from_dict, model_to_dict, train,
)
from .io import dumps, read_document, write_document
from .policy import (
    PolicyConfig, RuntimeModel, decision_proposal, empirical_runtime_model,
    estimate_expected_runtime, moving_average, policy_run,
)
from .search import LSParams
from .seeds import derive_seed
from .traces import read_trace, write_trace
from .yard import instance_from_dict, instance_to_dict

INSTANCE_KIND = "instance"
MODEL_KIND = "model"


def _load_json(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def _print_seeds(stage: str, seeds: dict) -> None:
    print(f"[{stage}] seeds: {dumps(seeds)}")


def _rel(path: Path, start: Path) -> str:
    return Path(os.path.relpath(path, start)).as_posix()


def _write_timing(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# gen

def cmd_gen(args) -> int:
    raw = _load_json(args.config)
    base = config_from_dict(raw) if raw else ScenarioConfig()
    base_seed = args.seed if args.seed is not None else base.seed
    out = Path(args.out)
    seeds = {}
    for i in range(args.n):
        s = derive_seed(base_seed, i)
        cfg = replace(base, seed=s)
        name = f"instance_{i:04d}"
        write_document(out / f"{name}.json", INSTANCE_KIND, {
            "name": name, "scenario": config_to_dict(cfg), "instance": instance_to_dict(generate_instance(cfg)),
        })
        seeds[name] = s
    _print_seeds("gen", {"base": base_seed, "instances": seeds})
    return 0


def _read_instance(path: str | Path):
    doc = read_document(path, INSTANCE_KIND)
    return doc["name"], instance_from_dict(doc["instance"])


# --------------------------------------------------------------------------
# solve

def _ls_params(args, seed: int) -> LSParams:
    raw = _load_json(getattr(args, "ls_config", None))
    params = LSParams(**raw) if raw else LSParams()
    if args.iterations is not None:
        params = replace(params, max_iterations=args.iterations)
        if params.restart_patience_iterations is None:
            params = replace(params, restart_patience_iterations=max(1, args.iterations // 5))
    if args.wall_seconds is not None:
        params = replace(params, max_runtime_seconds=args.wall_seconds)
    elif args.iterations is not None:
        params = replace(params, max_runtime_seconds=1e9)
    return replace(params, seed=seed)


def _solve_one(job):
    path, out, params = job
    from .experiment import solve_instance

    name, inst = _read_instance(path)
    trace = solve_instance(inst, params)
    target = Path(out) / f"trace_{name}.json"
    write_trace(target, trace, name, inst.horizon)
    return name, str(target), trace.feasible, trace.n_proposals, trace.wall_time_seconds


def _pool_map(fn, jobs, n_jobs: int):
    if n_jobs > 1 and len(jobs) > 1:
        with Pool(n_jobs) as pool:
            return pool.map(fn, jobs)
    return [fn(j) for j in jobs]


def cmd_solve(args) -> int:
    paths = sorted(args.instances)
    seeds = {Path(p).stem: derive_seed(args.seed, i) for i, p in enumerate(paths)}
    jobs = [(p, args.out, _ls_params(args, seeds[Path(p).stem])) for p in paths]
    _print_seeds("solve", {"base": args.seed, "runs": seeds})
    results = _pool_map(_solve_one, jobs, args.jobs)
    for name, target, feasible, n_prop, _ in results:
        print(f"{name}: {'feasible' if feasible else 'infeasible'} after {n_prop} proposals -> {target}")
    _write_timing(Path(args.out) / "solve.timing.json", {name: wall for name, _, _, _, wall in results})
    return 0


# --------------------------------------------------------------------------
# build-dataset / train / eval

def cmd_build_dataset(args) -> int:
    out = Path(args.out)
    paths = sorted(Path(p) for p in args.traces)
    runs = []
    for p in paths:
        trace, _ = read_trace(p)
        runs.append(label_run(trace, args.W, p.stem))
    split = balance_and_split(
        runs, per_run_cap=args.cap, test_fraction=args.test_fraction, seed=args.seed,
        strategy=args.strategy, first_fraction=args.first_fraction, W=args.W,
        batch_size=args.batch_size, epochs=args.epochs,
    )
    write_manifest(out, split, [_rel(p, out.parent) for p in paths], args.first_fraction)
    _print_seeds("build-dataset", {"split": args.seed})
    n0, n1 = split.class_counts("train")
    t0, t1 = split.class_counts("test")
    print(f"train {n0}+{n1} graphs from {len(split.train_runs)} runs; test {t0}+{t1} from {len(split.test_runs)} runs")
    return 0


def _load_split(manifest_path: str | Path):
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    traces, horizons = {}, set()
    for rel in manifest["traces"]:
        p = manifest_path.parent / rel
        trace, header = read_trace(p)
        traces[p.stem] = trace
        horizons.add(header["horizon"])
    if len(horizons) > 1:
        raise ConfigurationError(f"{manifest_path}: traces mix planning horizons {sorted(horizons)}")
    return split_from_manifest(manifest, traces), (horizons.pop() if horizons else 1440)


def cmd_train(args) -> int:
    split, horizon = _load_split(args.manifest)
    raw = _load_json(args.config)
    arch = architecture_from_dict(raw) if raw else Architecture()
    epochs = args.epochs if args.epochs is not None else split.epochs
    batch = args.batch_size if args.batch_size is not None else split.batch_size
    _print_seeds("train", {"init_and_batches": args.seed})
    result = train(split.train, arch, lr=args.lr, batch_size=batch, epochs=epochs, seed=args.seed,
                   temporal=not args.no_temporal, horizon=horizon)
    out = Path(args.out)
    write_document(out, MODEL_KIND, model_to_dict(result.model))
    write_document(out.with_suffix(".loss.json"), "loss_curve", {"losses": result.losses})
    print(f"final training loss {result.losses[-1]:.4f}; model -> {out}")
    return 0


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def _read_model(path):
    return model_from_dict(read_document(path, MODEL_KIND))


def cmd_eval(args) -> int:
    model = _read_model(args.model)
    split, _ = _load_split(args.manifest)
    report = {part: evaluate(model, getattr(split, part)).to_dict() for part in ("train", "test")}
    write_document(args.out, "metrics", report)
    _print_seeds("eval", {"split": split.seed, "model": model.seed})
    for part, m in report.items():
        print(f"{part}: " + " ".join(f"{k} {_fmt(m[k])}" for k in ("acc", "tpr", "tnr")))
    return 0


# --------------------------------------------------------------------------
# policy-sim / estimate

def _policy_one(job):
    path, model_path, params, policy = job
    from .experiment import solve_instance

    name, inst = _read_instance(path)
    model = _read_model(model_path)
    plain = solve_instance(inst, params)
    res = policy_run(inst, model, params, policy)
    return {
        "name": name,
        "ls_verdict": "feasible" if plain.feasible else "infeasible",
        "ls_proposals": plain.n_proposals,
        "verdict": res.verdict,
        "proposals": res.n_proposals,
        "iterations": res.iterations,
        "decision_score": res.decision_score,
        "decision_proposal": decision_proposal(plain, policy.K),
        "scores": res.scores,
        "smoothed_scores": moving_average(res.scores, 10),
    }, (name, plain.wall_time_seconds, res.wall_time), plain


def cmd_policy_sim(args) -> int:
    raw = _load_json(args.config)
    policy = PolicyConfig(**raw) if raw else PolicyConfig()
    overrides = {k: v for k, v in (("K", args.K), ("alpha_if", args.alpha)) if v is not None}
    policy = replace(policy, **overrides)
    paths = sorted(args.instances)
    seeds = {Path(p).stem: derive_seed(args.seed, i) for i, p in enumerate(paths)}
    _print_seeds("policy-sim", {"base": args.seed, "runs": seeds})
    jobs = [(p, args.model, _ls_params(args, seeds[Path(p).stem]), policy) for p in paths]
    outcomes = _pool_map(_policy_one, jobs, args.jobs)
    rows = [o[0] for o in outcomes]
    truth = [int(r["ls_verdict"] == "feasible") for r in rows]
    # a run counts as predicted feasible unless the policy halted it
    pred = [int(r["verdict"] != "infeasible_predicted") for r in rows]
    metrics = Metrics(
        tn=sum(1 for t, p in zip(truth, pred) if t == 0 and p == 0),
        fp=sum(1 for t, p in zip(truth, pred) if t == 0 and p == 1),
        fn=sum(1 for t, p in zip(truth, pred) if t == 1 and p == 0),
        tp=sum(1 for t, p in zip(truth, pred) if t == 1 and p == 1),
    )
    halted = [r["proposals"] if r["verdict"] == "infeasible_predicted" else r["decision_proposal"] for r in rows]
    rm = empirical_runtime_model([o[2] for o in outcomes], halted, metrics)
    est = estimate_expected_runtime(rm, policy)
    measured_without = sum(r["ls_proposals"] for r in rows)
    measured_with = sum(r["proposals"] for r in rows)
    write_document(args.out, "policy_report", {
        "policy": {"K": policy.K, "alpha_if": policy.alpha_if, "aggregator": policy.aggregator,
                   "window": policy.window, "lookahead": policy.lookahead},
        "instances": rows,
        "summary": {
            "confusion": metrics.to_dict(),
            "proposals_without": measured_without,
            "proposals_with": measured_with,
            "measured_reduction": 1 - measured_with / measured_without if measured_without else 0.0,
            "estimate": est.to_dict(),
        },
    })
    _write_timing(Path(args.out).with_suffix(".timing.json"),
                  {name: {"plain": a, "policy": b} for name, a, b in (o[1] for o in outcomes)})
    print(f"policy confusion {metrics.to_dict()}; proposals {measured_without} -> {measured_with}")
    return 0


def cmd_estimate(args) -> int:
    if args.metrics:
        doc = read_document(args.metrics, "metrics")
        part = doc[args.part]
        counts = (part["tn"], part["fp"], part["fn"], part["tp"])
    elif args.counts:
        counts = tuple(args.counts)
    else:
        raise ConfigurationError("estimate needs --metrics or --counts")
    rm = RuntimeModel.from_counts(*counts, prior_feasible=args.prior_feasible, t_feasible=args.t_feasible,
                                  t_infeasible=args.t_infeasible, t_decision=args.t_decision)
    est = estimate_expected_runtime(rm, PolicyConfig())
    table = {
        "counts": dict(zip(("tn", "fp", "fn", "tp"), counts)),
        "rates": {"tpr": rm.tpr, "tnr": rm.tnr, "fpr": rm.fpr, "fnr": rm.fnr},
        "times": {"t_feasible": rm.t_feasible, "t_infeasible": rm.t_infeasible, "t_decision": rm.t_decision},
        "prior_feasible": rm.prior_feasible,
        **est.to_dict(),
    }
    if args.out:
        write_document(args.out, "runtime_estimate", table)
    print(f"{'t_without':>14} {'t_with':>10} {'reduction':>10}")
    print(f"{est.t_without:14.2f} {est.t_with:10.2f} {est.reduction_fraction:10.2%}")
    return 0


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tusp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def budget(sp):
        sp.add_argument("--iterations", type=int, default=None, help="proposal cap per local-search run")
        sp.add_argument("--wall-seconds", type=float, default=None, help="wall-clock cap per run")
        sp.add_argument("--ls-config", default=None, help="JSON file with local-search parameters")
        sp.add_argument("--jobs", type=int, default=1)

    g = sub.add_parser("gen", help="generate instances from a scenario")
    g.add_argument("--config", default=None)
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run the local search on instances")
    s.add_argument("instances", nargs="+")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    budget(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("build-dataset", help="label traces and write a split manifest")
    b.add_argument("traces", nargs="+")
    b.add_argument("--W", type=int, default=150)
    b.add_argument("--strategy", choices=STRATEGIES, default="all")
    b.add_argument("--first-fraction", type=float, default=0.1)
    b.add_argument("--cap", type=int, default=32)
    b.add_argument("--test-fraction", type=float, default=0.2)
    b.add_argument("--batch-size", type=int, default=50)
    b.add_argument("--epochs", type=int, default=200)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_dataset)

    t = sub.add_parser("train", help="train a classifier on a manifest")
    t.add_argument("manifest")
    t.add_argument("--config", default=None, help="JSON architecture overrides")
    t.add_argument("--lr", type=float, default=1e-5)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--no-temporal", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="confusion metrics of a model on a manifest")
    e.add_argument("model")
    e.add_argument("manifest")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    ps = sub.add_parser("policy-sim", help="compare plain and policy-controlled runs")
    ps.add_argument("instances", nargs="+")
    ps.add_argument("--model", required=True)
    ps.add_argument("--config", default=None, help="JSON policy settings")
    ps.add_argument("--K", type=int, default=None)
    ps.add_argument("--alpha", type=float, default=None)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    budget(ps)
    ps.set_defaults(func=cmd_policy_sim)

    es = sub.add_parser("estimate", help="expected runtime with and without the policy")
    es.add_argument("--metrics", default=None)
    es.add_argument("--part", default="test")
    es.add_argument("--counts", type=int, nargs=4, metavar=("TN", "FP", "FN", "TP"))
    es.add_argument("--prior-feasible", type=float, default=0.28)
    es.add_argument("--t-feasible", type=float, default=157.0)
    es.add_argument("--t-infeasible", type=float, default=300.0)
    es.add_argument("--t-decision", type=float, default=80.0)
    es.add_argument("--out", default=None)
    es.set_defaults(func=cmd_estimate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ConfigurationError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
