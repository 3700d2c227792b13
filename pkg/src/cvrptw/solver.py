"""End-to-end solving pipeline: rollout-guided construction, in-flight
sub-tour optimization, and post-construction route tightening.

With the optimizer enabled the solver builds two complete solutions from the
same rollout streams (one committing raw rollout sub-tours, one committing
optimized sub-tours), tightens both, and returns the shorter. The optimizer
variant therefore never loses to the rollout-only variant on the same seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import episode as ep
from . import net
from . import rollout as ro
from . import subtour as st
from .model import Solution, routes_distance, solution_from_orders


@dataclass(frozen=True)
class SolveConfig:
    seed: int = 0
    kappa: int = 5
    rollouts_per_branch: int = 1
    temperature: float = 1.0
    use_optimizer: bool = True        # forward sub-tour optimization + tightening
    delta: int = 2
    delta_tighten: int = 3
    timeout_ms: float = 1000.0
    max_subtour: int = 8              # committed customers per outer decision
    max_extras: int = 4               # opportunistic candidates per optimization


@dataclass
class SolveResult:
    solution: Solution
    wall_time: float                  # search + optimization, excludes file I/O
    decisions: int                    # rollout policy decisions evaluated
    vehicles: int
    optimizer_calls: int = 0
    optimizer_proven: int = 0
    construction_distance: float = 0.0


def _pick_extras(state: ep.EpisodeState, committed: Tuple[int, ...],
                 max_extras: int) -> Tuple[int, ...]:
    """Unserved cluster neighbours of the committed customers, nearest first."""
    ctx = state.ctx
    clusters = {int(ctx.cluster_of[c]) for c in committed}
    committed_set = set(committed)
    cands = []
    for c in range(1, ctx.n_customers + 1):
        if state.served[c] or c in committed_set:
            continue
        if int(ctx.cluster_of[c]) not in clusters:
            continue
        nearest = min(float(ctx.d[c, m]) for m in committed)
        cands.append((nearest, c))
    cands.sort()
    return tuple(c for _, c in cands[:max_extras])


def _construct(prep: ep.PreparedInstance, params: net.NetworkParams,
               cfg: SolveConfig, optimize: bool) -> Tuple[ep.EpisodeState, int, int, int]:
    """One full construction; returns (state, decisions, opt calls, opt proven)."""
    state = ep.EpisodeState(prep)
    decisions = 0
    opt_calls = 0
    opt_proven = 0
    rcfg = ro.RolloutConfig(kappa=cfg.kappa, rollouts_per_branch=cfg.rollouts_per_branch,
                            temperature=cfg.temperature, seed=cfg.seed)
    while state.unserved_count > 0:
        ep.retire_stuck_vehicles(state)
        winner, used = ro.select(state, params, rcfg)
        decisions += used
        committed = winner.continuation[:cfg.max_subtour]
        vi = winner.vehicle
        veh = state.vehicles[vi]
        if optimize:
            extras = _pick_extras(state, committed, cfg.max_extras)
            problem = st.SubtourProblem(
                loc=veh.loc, clock=veh.clock, load=veh.load,
                committed=committed, extras=extras, delta=cfg.delta,
                skip_penalty=prep.pre.d_max, time_budget_ms=cfg.timeout_ms,
            )
            result = st.optimize(problem, prep.ctx)
            opt_calls += 1
            opt_proven += int(result.proven_optimal)
            sequence = result.sequence
        else:
            sequence = committed
        for cust in sequence:
            ep.apply_decision(state, vi, int(cust))
    ep.finish_all(state)
    return state, decisions, opt_calls, opt_proven


def _tightened_orders(state: ep.EpisodeState, cfg: SolveConfig) -> Tuple[List[List[int]], int, int]:
    orders = []
    calls = 0
    proven = 0
    for veh in state.vehicles:
        route = [cid for cid, _ in veh.route]
        if not route:
            continue
        result = st.tighten(route, state.ctx, cfg.delta_tighten, cfg.timeout_ms)
        calls += 1
        proven += int(result.proven_optimal)
        orders.append(list(result.sequence))
    return orders, calls, proven


def solve(prep: ep.PreparedInstance, params: net.NetworkParams,
          cfg: SolveConfig) -> SolveResult:
    t0 = time.perf_counter()
    state_plain, dec_plain, _, _ = _construct(prep, params, cfg, optimize=False)
    plain_orders = [[cid for cid, _ in v.route] for v in state_plain.vehicles if v.route]
    decisions = dec_plain
    opt_calls = 0
    opt_proven = 0

    if cfg.use_optimizer:
        state_opt, dec_opt, calls, proven = _construct(prep, params, cfg, optimize=True)
        decisions += dec_opt
        opt_calls += calls
        opt_proven += proven
        candidates = []
        for state in (state_opt, state_plain):
            orders, calls, proven = _tightened_orders(state, cfg)
            opt_calls += calls
            opt_proven += proven
            candidates.append(orders)
        best_orders = min(candidates, key=lambda o: routes_distance(prep.d, o))
        construction_distance = routes_distance(
            prep.d, [[cid for cid, _ in v.route] for v in state_opt.vehicles if v.route])
    else:
        best_orders = plain_orders
        construction_distance = routes_distance(prep.d, plain_orders)

    solution = solution_from_orders(prep.inst, best_orders, prep.d)
    wall = time.perf_counter() - t0
    return SolveResult(
        solution=solution,
        wall_time=wall,
        decisions=decisions,
        vehicles=len(solution.routes),
        optimizer_calls=opt_calls,
        optimizer_proven=opt_proven,
        construction_distance=construction_distance,
    )
