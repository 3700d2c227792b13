"""End-to-end acceptance gate: eight criteria, one test (and one pass/fail
line under -v) each.

Heavy artifacts (trained checkpoints, the 56-instance evaluation table) are
cached on disk outside the repository and reused across runs; delete the
cache directory (printed below) to force a full rebuild.

Reference group means: with the environment variable SOLOMON_DATA_DIR set to
a directory of real Solomon .txt files, solution quality is measured against
the published best-known group means. Otherwise the bundled synthetic suite
is used and quality is measured against BASELINE_REFS, frozen outputs of the
independent local-search baseline in tests/baseline.py (regenerate by running
baseline.solve over the suite).
"""

import itertools
import json
import math
import os
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from cvrptw import cli, datagen, episode, net, solver, subtour, trainer
from cvrptw.model import Customer, Instance, check_feasible, parse_solomon

MASTER_SEED = 0
SEEDS = (0, 1, 2)
EPISODES = 1500
SWEEP_NAMES = ("C101", "R101", "R105", "R110", "RC101")

CACHE = Path(os.environ.get(
    "CVRPTW_ACCEPT_CACHE",
    os.path.join(tempfile.gettempdir(), "cvrptw_acceptance_cache"))) / "v1"

# Frozen per-class means of tests/baseline.py on the synthetic suite.
BASELINE_REFS = {
    "C1": 413.269, "C2": 441.76, "R1": 823.471,
    "R2": 606.834, "RC1": 646.339, "RC2": 557.326,
}
QUALITY_TOLERANCE = 0.25  # mean-of-means gap bound


def _report(line):
    print(line, flush=True)


# ---------------------------------------------------------------------------
# Shared artifacts
# ---------------------------------------------------------------------------

def _real_data_insts():
    """Real benchmark files truncated to 25 customers, or None."""
    root = os.environ.get("SOLOMON_DATA_DIR")
    if not root:
        return None
    insts = {}
    for name in datagen.ALL_NAMES:
        path = os.path.join(root, f"{name}.txt")
        if not os.path.exists(path):
            return None
        full = parse_solomon(open(path).read(), name=name)
        insts[name] = Instance(name=name, depot=full.depot,
                               customers=full.customers[:25],
                               vehicle_capacity=full.vehicle_capacity,
                               speed=full.speed)
    return insts


@pytest.fixture(scope="module")
def suite():
    real = _real_data_insts()
    if real is not None:
        insts = real
        refs = {g: datagen.BEST_KNOWN[f"{g}-25"] for g in BASELINE_REFS}
        source = "real"
    else:
        insts = {n: datagen.generate_instance(n) for n in datagen.ALL_NAMES}
        refs = dict(BASELINE_REFS)
        source = "synthetic"
    preps = {n: episode.PreparedInstance.build(i) for n, i in insts.items()}
    return {"preps": preps, "refs": refs, "source": source}


def _train_config():
    # Scaled-down run: faster exploration decay and a smaller batch than the
    # runtime defaults so 3 x 1500 episodes stay tractable on one core.
    return net.TrainConfig(batch_size=1024, epsilon_decay=0.998)


def _trained(seed, suite):
    CACHE.mkdir(parents=True, exist_ok=True)
    tag = suite["source"]
    model_path = CACHE / f"model_{tag}_seed{seed}.ckpt"
    log_path = CACHE / f"log_{tag}_seed{seed}.csv"
    if model_path.exists() and log_path.exists():
        distances = [float(line.split(",")[2]) for line
                     in log_path.read_text().strip().splitlines()[1:]]
        return net.load(str(model_path)), distances
    tr = trainer.Trainer(preps=list(suite["preps"].values()),
                         config=_train_config(), seed=seed,
                         sat_from_episode=(2 * EPISODES) // 3,
                         delta_tighten=2, timeout_ms=50.0)
    tr.run(EPISODES)
    net.save(tr.params, str(model_path))
    lines = [trainer.EpisodeLog.csv_header()] + [l.csv_row() for l in tr.logs]
    log_path.write_text("\n".join(lines) + "\n")
    return tr.params, [l.distance for l in tr.logs]


@pytest.fixture(scope="module")
def trained_runs(suite):
    return {seed: _trained(seed, suite) for seed in SEEDS}


@pytest.fixture(scope="module")
def eval_table(suite, trained_runs):
    """Per-instance optimized and plain solve results with the seed-0 model."""
    CACHE.mkdir(parents=True, exist_ok=True)
    path = CACHE / f"eval_{suite['source']}.json"
    if path.exists():
        return json.loads(path.read_text())
    params = trained_runs[SEEDS[0]][0]
    rows = {}
    for name, prep in suite["preps"].items():
        seed = cli.instance_seed(MASTER_SEED, name)
        t0 = time.perf_counter()
        opt = solver.solve(prep, params, solver.SolveConfig(seed=seed, kappa=5))
        wall = time.perf_counter() - t0
        plain = solver.solve(prep, params,
                             solver.SolveConfig(seed=seed, kappa=5,
                                                use_optimizer=False))
        rows[name] = {
            "opt": opt.solution.total_distance,
            "plain": plain.solution.total_distance,
            "feasible": bool(check_feasible(prep.inst, opt.solution).ok
                             and check_feasible(prep.inst, plain.solution).ok),
            "wall": wall,
        }
    path.write_text(json.dumps(rows, indent=1))
    return rows


# ---------------------------------------------------------------------------
# Criterion 1: sub-tour optimizer equals brute force
# ---------------------------------------------------------------------------

def _random_subtour_case(rng):
    """Random problem with <= 7 customers; R feasible by construction."""
    k = int(rng.integers(2, 8))
    pts = rng.uniform(0, 60, size=(k, 2))
    demands = rng.integers(1, 10, size=k).astype(float)
    nr = int(rng.integers(1, k + 1))
    ids = rng.permutation(np.arange(1, k + 1))
    R = tuple(int(c) for c in ids[:nr])
    A = tuple(int(c) for c in ids[nr:][:4])

    # windows: walk the reference order and leave slack around each start
    open_t = np.zeros(k)
    close_t = np.full(k, 2000.0)
    service = float(rng.uniform(0, 8))
    t = 0.0
    prev = (0.0, 0.0)
    for c in R:
        p = (float(pts[c - 1, 0]), float(pts[c - 1, 1]))
        arr = t + math.dist(prev, p)
        if rng.random() < 0.5:
            open_t[c - 1] = max(0.0, arr - float(rng.uniform(0, 30)))
            close_t[c - 1] = arr + float(rng.uniform(5, 120))
        t = max(arr, open_t[c - 1]) + service
        prev = p
    for c in A:
        if rng.random() < 0.5:
            close_t[c - 1] = float(rng.uniform(20, 400))

    customers = tuple(
        Customer(i + 1, float(pts[i, 0]), float(pts[i, 1]), float(demands[i]),
                 float(open_t[i]), float(close_t[i]), service)
        for i in range(k)
    )
    capacity = float(sum(demands[c - 1] for c in R) + rng.integers(0, 15))
    inst = Instance(name="acc1", depot=(0.0, 0.0), customers=customers,
                    vehicle_capacity=capacity)
    ctx = episode.PreparedInstance.build(inst, cluster_n=2).ctx
    problem = subtour.SubtourProblem(
        loc=0, clock=0.0, load=0.0, committed=R, extras=A,
        delta=int(rng.integers(1, 4)),
        skip_penalty=float(rng.uniform(5, 80)),
        time_budget_ms=10000.0,
    )
    return problem, ctx


def test_criterion_1_subtour_oracle_equivalence():
    from test_subtour import brute_force

    rng = np.random.Generator(np.random.PCG64(20240817))
    t0 = time.perf_counter()
    for trial in range(500):
        problem, ctx = _random_subtour_case(rng)
        sol = subtour.optimize(problem, ctx)
        want = brute_force(problem, ctx)
        assert sol.proven_optimal, (trial, problem)
        assert sol.objective == pytest.approx(want, abs=1e-9), (trial, problem)
    elapsed = time.perf_counter() - t0
    _report(f"[criterion 1] PASS: 500/500 brute-force matches within 1e-9 "
            f"({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 2: feasibility on the full suite
# ---------------------------------------------------------------------------

def test_criterion_2_feasibility_soundness(suite, eval_table):
    assert len(eval_table) == 56
    bad = [n for n, row in eval_table.items() if not row["feasible"]]
    assert not bad, f"infeasible solutions on {bad}"
    walls = [row["wall"] for row in eval_table.values()]
    _report(f"[criterion 2] PASS: 56/56 {suite['source']} instances feasible "
            f"(wall per instance: mean {np.mean(walls):.1f}s, "
            f"max {max(walls):.1f}s; informative)")


# ---------------------------------------------------------------------------
# Criterion 3: training signal over 3 seeds
# ---------------------------------------------------------------------------

def test_criterion_3_training_signal(trained_runs):
    window = 200
    for seed in SEEDS:
        d = np.asarray(trained_runs[seed][1], dtype=float)
        assert len(d) >= EPISODES
        ma = np.convolve(d, np.ones(window) / window, mode="valid")
        q = len(ma) // 4
        first, last = float(ma[:q].mean()), float(ma[-q:].mean())
        assert last < first, (seed, first, last)
    _report(f"[criterion 3] PASS: 200-episode moving average falls from first "
            f"to final quarter for seeds {SEEDS} over {EPISODES} episodes")


# ---------------------------------------------------------------------------
# Criterion 4: solution quality vs reference means
# ---------------------------------------------------------------------------

def test_criterion_4_solution_quality(suite, eval_table):
    groups = {}
    for name, row in eval_table.items():
        groups.setdefault(datagen.class_of(name), []).append(row["opt"])
    gaps = []
    details = []
    for g in sorted(groups):
        mean = float(np.mean(groups[g]))
        gap = mean / suite["refs"][g] - 1.0
        gaps.append(gap)
        details.append(f"{g} {gap:+.1%}")
    mean_gap = float(np.mean(gaps))
    assert mean_gap <= QUALITY_TOLERANCE, (mean_gap, details)
    _report(f"[criterion 4] PASS: mean-of-means gap {mean_gap:+.1%} <= "
            f"{QUALITY_TOLERANCE:.0%} vs {suite['source']} references "
            f"({', '.join(details)})")


# ---------------------------------------------------------------------------
# Criterion 5: optimizer never loses on the same seed
# ---------------------------------------------------------------------------

def test_criterion_5_optimizer_contribution(eval_table):
    worse = {n: (row["opt"], row["plain"]) for n, row in eval_table.items()
             if row["opt"] > row["plain"] + 1e-9}
    assert not worse, worse
    saved = [row["plain"] - row["opt"] for row in eval_table.values()]
    _report(f"[criterion 5] PASS: optimized <= rollout-only on all 56 "
            f"instances (mean saving {np.mean(saved):.1f})")


# ---------------------------------------------------------------------------
# Criterion 6: kappa sweep tradeoff
# ---------------------------------------------------------------------------

def test_criterion_6_kappa_tradeoff(suite, trained_runs, tmp_path):
    model_path = str(tmp_path / "m.ckpt")
    net.save(trained_runs[SEEDS[0]][0], model_path)
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    for name in SWEEP_NAMES:
        text = (datagen.generate_text(name) if suite["source"] == "synthetic"
                else _instance_text(suite["preps"][name].inst))
        (data_dir / f"{name}.txt").write_text(text)
    out = tmp_path / "sweep"
    code = cli.main(["sweep", "--instances", str(data_dir), "--model", model_path,
                     "--out", str(out), "--kappas", "1,2,4,8",
                     "--seed", str(MASTER_SEED), "--time-reps", "3"])
    assert code == cli.EXIT_OK
    rows = (out / "sweep.csv").read_text().strip().splitlines()[1:]
    best = [float(r.split(",")[2]) for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(best, best[1:])), best
    times = [float(r.split(",")[1]) for r in
             (out / "sweep_times.csv").read_text().strip().splitlines()[1:]]
    assert all(b > a for a, b in zip(times, times[1:])), times
    _report(f"[criterion 6] PASS: best distance non-increasing {best} and "
            f"wall time increasing {[round(t, 2) for t in times]} over "
            f"kappa 1,2,4,8")


def _instance_text(inst):
    from cvrptw.model import format_solomon

    return format_solomon(inst)


# ---------------------------------------------------------------------------
# Criterion 7: gradient check
# ---------------------------------------------------------------------------

def test_criterion_7_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(99))
    for config in range(10):
        params = net.init(int(rng.integers(1 << 30)))
        n = int(rng.integers(1, 16))
        X = rng.uniform(-1.5, 1.5, size=(n, net.LAYER_DIMS[0]))
        y = rng.standard_normal(n)
        _, gw, gb = net.gradients(params, X, y)
        eps = 1e-6

        def loss_at():
            err = net.forward_batch(params, X) - y
            return float(np.mean(err * err))

        for layer in range(len(params.weights)):
            for _ in range(3):
                i = int(rng.integers(params.weights[layer].shape[0]))
                j = int(rng.integers(params.weights[layer].shape[1]))
                orig = params.weights[layer][i, j]
                params.weights[layer][i, j] = orig + eps
                up = loss_at()
                params.weights[layer][i, j] = orig - eps
                dn = loss_at()
                params.weights[layer][i, j] = orig
                num = (up - dn) / (2 * eps)
                got = gw[layer][i, j]
                assert abs(got - num) <= 1e-4 * max(1.0, abs(num)), (config, layer)
            b = int(rng.integers(len(params.biases[layer])))
            orig = params.biases[layer][b]
            params.biases[layer][b] = orig + eps
            up = loss_at()
            params.biases[layer][b] = orig - eps
            dn = loss_at()
            params.biases[layer][b] = orig
            num = (up - dn) / (2 * eps)
            assert abs(gb[layer][b] - num) <= 1e-4 * max(1.0, abs(num))
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0
    _report(f"[criterion 7] PASS: analytic gradients within 1e-4 of central "
            f"differences on 10 configurations ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# Criterion 8: byte-identical re-runs
# ---------------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    for name in ("C101", "R101"):
        (data_dir / f"{name}.txt").write_text(datagen.generate_text(name))
    model_path = str(tmp_path / "m.ckpt")
    net.save(net.init(0), model_path)

    commands = {
        "train": ["train", "--instances", str(data_dir), "--episodes", "3",
                  "--seed", "7", "--timeout-ms", "100"],
        "solve": ["solve", "--instances", str(data_dir), "--model", model_path,
                  "--kappa", "2", "--seed", "7", "--timeout-ms", "100"],
        "bench": ["bench", "--instances", str(data_dir), "--model", model_path,
                  "--kappa", "2", "--seed", "7", "--timeout-ms", "100"],
        "sweep": ["sweep", "--instances", str(data_dir / "C101.txt"),
                  "--model", model_path, "--kappas", "1,2", "--seed", "7",
                  "--timeout-ms", "100"],
    }
    checked = 0
    for label, argv in commands.items():
        outputs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{label}_{rep}"
            code = cli.main(argv + ["--out", str(out)])
            assert code == cli.EXIT_OK
            primary = {}
            for p in sorted(out.iterdir()):
                if "times" in p.name:   # timing sidecars are exempt
                    continue
                primary[p.name] = p.read_bytes()
            outputs.append(primary)
        assert outputs[0].keys() == outputs[1].keys(), label
        for fname in outputs[0]:
            assert outputs[0][fname] == outputs[1][fname], (label, fname)
            checked += 1
    _report(f"[criterion 8] PASS: {checked} primary output files byte-identical "
            f"across re-runs of train/solve/bench/sweep")
