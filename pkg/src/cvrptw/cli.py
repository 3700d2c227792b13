"""Command-line front end: train / solve / bench / sweep / make-data.

Config precedence: CLI flags > --config file (flat key=value) > defaults.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
failure. Wall-clock measurements are written to *_times.csv sidecars so that
re-running a command with the same config and seed reproduces the primary
output files byte for byte.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import os
import sys
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import datagen, net, solver, trainer
from .episode import PreparedInstance
from .features import features_to_csv, extract_batch
from .model import (ParseError, Solution, check_feasible, parse_solomon,
                    solution_to_csv, solution_to_json)
from .preprocess import clusters_to_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class DataError(Exception):
    pass


class InternalError(Exception):
    pass


def instance_seed(master: int, name: str) -> int:
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def load_config_file(path: str) -> Dict[str, str]:
    values = {}
    try:
        with open(path) as f:
            for line_no, raw in enumerate(f, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{line_no}: expected key=value")
                key, val = line.split("=", 1)
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file: {exc}")
    return values


def collect_instances(patterns: Sequence[str]) -> List[str]:
    paths: List[str] = []
    for pat in patterns:
        if os.path.isdir(pat):
            paths.extend(sorted(glob.glob(os.path.join(pat, "*.txt"))))
        else:
            paths.extend(sorted(glob.glob(pat)))
    seen = set()
    unique = []
    for p in paths:
        if p not in seen:
            seen.add(p)
            unique.append(p)
    return unique


def load_prepared(path: str, cluster_n: int) -> PreparedInstance:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    try:
        inst = parse_solomon(text)
    except ParseError as exc:
        raise DataError(f"{path}: {exc}")
    return PreparedInstance.build(inst, cluster_n)


def _require_instances(args) -> List[str]:
    paths = collect_instances(args.instances)
    if not paths:
        raise DataError(f"no instance files match {args.instances}")
    return paths


def _solve_config(args, kappa: Optional[int] = None) -> solver.SolveConfig:
    return solver.SolveConfig(
        seed=args.seed,
        kappa=kappa if kappa is not None else args.kappa,
        rollouts_per_branch=args.rollouts_per_branch,
        temperature=args.temperature,
        use_optimizer=not args.no_optimizer,
        delta=args.delta,
        delta_tighten=args.delta_tighten,
        timeout_ms=args.timeout_ms,
    )


def _train_config(args) -> net.TrainConfig:
    return net.TrainConfig(gamma=args.gamma, temperature=args.temperature,
                           epsilon_decay=args.epsilon_decay)


def _load_model(args) -> net.NetworkParams:
    if not args.model:
        raise DataError("--model is required for this command")
    try:
        return net.load(args.model)
    except (OSError, net.CheckpointError) as exc:
        raise DataError(str(exc))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_make_data(args) -> int:
    paths = datagen.write_suite(args.out)
    print(f"wrote {len(paths)} synthetic instances to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    paths = _require_instances(args)
    preps = [load_prepared(p, args.cluster_n) for p in paths]
    config = _train_config(args)
    sat_from = args.sat_from_episode
    if sat_from is None:
        sat_from = (2 * args.episodes) // 3
    tr = trainer.Trainer(preps=preps, config=config, seed=args.seed,
                         sat_from_episode=sat_from,
                         delta_tighten=args.delta_tighten,
                         timeout_ms=args.timeout_ms)
    tr.run(args.episodes)
    os.makedirs(args.out, exist_ok=True)
    model_path = os.path.join(args.out, "model.ckpt")
    net.save(tr.params, model_path)
    log_lines = [trainer.EpisodeLog.csv_header()] + [l.csv_row() for l in tr.logs]
    _write(os.path.join(args.out, "training_log.csv"), "\n".join(log_lines) + "\n")
    print(f"trained {args.episodes} episodes over {len(preps)} instances -> {model_path}")
    return EXIT_OK


def _solve_one(prep: PreparedInstance, params, cfg: solver.SolveConfig):
    result = solver.solve(prep, params, cfg)
    report = check_feasible(prep.inst, result.solution)
    if not report.ok:
        raise InternalError(f"{prep.inst.name}: infeasible solution produced: {report}")
    return result


def cmd_solve(args) -> int:
    paths = _require_instances(args)
    params = _load_model(args)
    os.makedirs(args.out, exist_ok=True)
    summary = ["instance,distance,vehicles,decisions"]
    times = ["instance,wall_time_s"]
    for path in paths:
        prep = load_prepared(path, args.cluster_n)
        cfg = _solve_config(args)
        cfg = solver.SolveConfig(**{**cfg.__dict__,
                                    "seed": instance_seed(args.seed, prep.inst.name)})
        if args.dump_features:
            _dump_first_decision_features(prep, os.path.join(
                args.out, f"{prep.inst.name}.features.csv"))
        if args.dump_clusters:
            _write(os.path.join(args.out, f"{prep.inst.name}.clusters.csv"),
                   clusters_to_csv(prep.pre))
        result = _solve_one(prep, params, cfg)
        sol = result.solution
        _write(os.path.join(args.out, f"{prep.inst.name}.solution.json"),
               solution_to_json(sol))
        _write(os.path.join(args.out, f"{prep.inst.name}.solution.csv"),
               solution_to_csv(sol))
        summary.append(f"{prep.inst.name},{sol.total_distance!r},"
                       f"{result.vehicles},{result.decisions}")
        times.append(f"{prep.inst.name},{result.wall_time:.3f}")
        print(f"{prep.inst.name}: distance={sol.total_distance:.2f} "
              f"vehicles={result.vehicles} time={result.wall_time:.2f}s")
    _write(os.path.join(args.out, "solve_summary.csv"), "\n".join(summary) + "\n")
    _write(os.path.join(args.out, "solve_times.csv"), "\n".join(times) + "\n")
    return EXIT_OK


def _dump_first_decision_features(prep: PreparedInstance, path: str) -> None:
    from .episode import EpisodeState, feasible_pairs

    state = EpisodeState(prep)
    pv, pc = feasible_pairs(state)
    X = extract_batch(state.ctx, state.served, pv, pc, *state.vehicle_arrays())
    _write(path, features_to_csv(X, pv, pc))


def cmd_bench(args) -> int:
    paths = _require_instances(args)
    params = _load_model(args)
    os.makedirs(args.out, exist_ok=True)
    detail = ["instance,group,distance,vehicles,decisions,status"]
    times = ["instance,wall_time_s"]
    groups: Dict[str, List[float]] = {}
    group_vehicles: Dict[str, List[int]] = {}
    failures: Dict[str, int] = {}
    for path in paths:
        prep = load_prepared(path, args.cluster_n)
        label = datagen.group_label(prep.inst.name, prep.inst.n)
        cfg = solver.SolveConfig(**{**_solve_config(args).__dict__,
                                    "seed": instance_seed(args.seed, prep.inst.name)})
        try:
            result = _solve_one(prep, params, cfg)
        except InternalError:
            raise
        except Exception as exc:  # record and continue; table is still emitted
            detail.append(f"{prep.inst.name},{label},,,,failed: {exc}")
            failures[label] = failures.get(label, 0) + 1
            continue
        sol = result.solution
        _write(os.path.join(args.out, f"{prep.inst.name}.solution.json"),
               solution_to_json(sol))
        detail.append(f"{prep.inst.name},{label},{sol.total_distance!r},"
                      f"{result.vehicles},{result.decisions},ok")
        times.append(f"{prep.inst.name},{result.wall_time:.3f}")
        groups.setdefault(label, []).append(sol.total_distance)
        group_vehicles.setdefault(label, []).append(result.vehicles)
        print(f"{prep.inst.name}: {sol.total_distance:.2f}")

    table = ["group,instances,mean_distance,mean_vehicles,best_known_mean,gap_pct,failures"]
    for label in sorted(set(groups) | set(failures)):
        dists = groups.get(label, [])
        best = datagen.BEST_KNOWN.get(label)
        if dists:
            mean = float(np.mean(dists))
            mv = float(np.mean(group_vehicles[label]))
            gap = "" if best is None else repr(100.0 * (mean / best - 1.0))
            table.append(f"{label},{len(dists)},{mean!r},{mv!r},"
                         f"{'' if best is None else best},{gap},{failures.get(label, 0)}")
        else:
            table.append(f"{label},0,,,{'' if best is None else best},,{failures.get(label, 0)}")
    _write(os.path.join(args.out, "bench_table.csv"), "\n".join(table) + "\n")
    _write(os.path.join(args.out, "bench_detail.csv"), "\n".join(detail) + "\n")
    _write(os.path.join(args.out, "bench_times.csv"), "\n".join(times) + "\n")
    print(f"bench table -> {os.path.join(args.out, 'bench_table.csv')} "
          "(best-known reference: published Solomon group means; "
          "only comparable when run on the real files)")
    if not groups:
        return EXIT_DATA
    return EXIT_OK


def cmd_sweep(args) -> int:
    paths = _require_instances(args)
    params = _load_model(args)
    try:
        kappas = [int(k) for k in args.kappas.split(",") if k.strip()]
    except ValueError:
        raise DataError(f"bad --kappas list: {args.kappas!r}")
    if not kappas:
        raise DataError("empty --kappas list")
    os.makedirs(args.out, exist_ok=True)
    preps = [load_prepared(p, args.cluster_n) for p in paths]

    rows = ["kappa,mean_distance,mean_best_distance,total_decisions"]
    time_rows = ["kappa,mean_time_s"]
    best_so_far = {prep.inst.name: float("inf") for prep in preps}
    # Repetitions are rep-major (every kappa once per pass) so a transient
    # load burst hits all kappa levels of a pass equally; the per-kappa
    # minimum over passes then reflects undisturbed timing.
    reps = max(1, getattr(args, "time_reps", 1))
    stats = {k: {"dists": [], "bests": [], "decisions": 0} for k in kappas}
    rep_means = {k: [] for k in kappas}
    for rep in range(reps):
        for kappa in kappas:
            walls = []
            for prep in preps:
                cfg = solver.SolveConfig(**{**_solve_config(args, kappa=kappa).__dict__,
                                            "seed": instance_seed(args.seed, prep.inst.name)})
                result = _solve_one(prep, params, cfg)
                walls.append(result.wall_time)
                if rep == 0:
                    d = result.solution.total_distance
                    best_so_far[prep.inst.name] = min(best_so_far[prep.inst.name], d)
                    stats[kappa]["dists"].append(d)
                    stats[kappa]["bests"].append(best_so_far[prep.inst.name])
                    stats[kappa]["decisions"] += result.decisions
            rep_means[kappa].append(float(np.mean(walls)))
    for kappa in kappas:
        s = stats[kappa]
        wall_mean = min(rep_means[kappa])
        rows.append(f"{kappa},{float(np.mean(s['dists']))!r},"
                    f"{float(np.mean(s['bests']))!r},{s['decisions']}")
        time_rows.append(f"{kappa},{wall_mean!r}")
        print(f"kappa={kappa}: mean={np.mean(s['dists']):.2f} "
              f"best={np.mean(s['bests']):.2f} time={wall_mean:.2f}s")
    _write(os.path.join(args.out, "sweep.csv"), "\n".join(rows) + "\n")
    _write(os.path.join(args.out, "sweep_times.csv"), "\n".join(time_rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="cvrptw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser, needs_model: bool) -> None:
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--instances", nargs="+", default=[],
                       help="instance files, globs, or directories")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cluster-n", type=int, default=3, dest="cluster_n")
        p.add_argument("--kappa", type=int, default=5)
        p.add_argument("--delta", type=int, default=2)
        p.add_argument("--delta-tighten", type=int, default=3, dest="delta_tighten")
        p.add_argument("--timeout-ms", type=float, default=1000.0, dest="timeout_ms")
        p.add_argument("--gamma", type=float, default=0.9)
        p.add_argument("--temperature", type=float, default=1.0)
        p.add_argument("--rollouts-per-branch", type=int, default=1,
                       dest="rollouts_per_branch")
        p.add_argument("--no-optimizer", action="store_true",
                       help="disable sub-tour optimization (rollouts only)")
        if needs_model:
            p.add_argument("--model", required=False, help="checkpoint path")

    p_train = sub.add_parser("train", help="train the value network")
    common(p_train, needs_model=False)
    p_train.add_argument("--episodes", type=int, default=1500)
    p_train.add_argument("--sat-from-episode", type=int, default=None,
                         dest="sat_from_episode",
                         help="activate tightening from this episode "
                              "(default: 2/3 of --episodes)")
    p_train.add_argument("--epsilon-decay", type=float, default=0.9995,
                         dest="epsilon_decay")
    p_train.set_defaults(func=cmd_train)

    p_solve = sub.add_parser("solve", help="solve instances with a trained model")
    common(p_solve, needs_model=True)
    p_solve.add_argument("--dump-clusters", action="store_true", dest="dump_clusters")
    p_solve.add_argument("--dump-features", action="store_true", dest="dump_features")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="benchmark table over instance groups")
    common(p_bench, needs_model=True)
    p_bench.set_defaults(func=cmd_bench)

    p_sweep = sub.add_parser("sweep", help="kappa sweep over a fixed instance set")
    common(p_sweep, needs_model=True)
    p_sweep.add_argument("--kappas", default="1,2,4,8")
    p_sweep.add_argument("--time-reps", type=int, default=1, dest="time_reps",
                         help="timing repetitions per kappa; the minimum is "
                              "reported to damp scheduler noise")
    p_sweep.set_defaults(func=cmd_sweep)

    p_data = sub.add_parser("make-data", help="write the synthetic instance suite")
    p_data.add_argument("--out", default="data")
    p_data.set_defaults(func=cmd_make_data)

    # config-file defaults must land on the chosen subparser, not just here
    parser.command_parsers = {"train": p_train, "solve": p_solve,
                              "bench": p_bench, "sweep": p_sweep,
                              "make-data": p_data}
    return parser


def _apply_config_file(parser: _Parser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        file_values = load_config_file(args.config)
        # Re-parse so explicit CLI flags beat config-file values.
        defaults = {}
        for key, val in file_values.items():
            if key in ("instances",):
                defaults[key] = val.split()
            else:
                defaults[key] = _coerce(val)
        parser.set_defaults(**defaults)
        parser.command_parsers[args.command].set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _coerce(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            continue
    if val.lower() in ("true", "false"):
        return val.lower() == "true"
    return val


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config_file(parser, list(argv if argv is not None else sys.argv[1:]))
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
