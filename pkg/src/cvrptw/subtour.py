"""Exact sub-tour optimizer with constrained position shifting (CPS).

Minimizes leg distances + return-to-depot distance + a fixed penalty per
skipped opportunistic customer, over orderings of the committed set R plus an
optional set A of extras. R members must all be served and may shift at most
delta positions from their reference order; A members may be skipped.

Realized as branch-and-bound over position assignments with an admissible
min-incoming-edge bound. On budget exhaustion the delta budget is tightened
stepwise; at delta 0 the reference order plus greedy end-of-route insertions
is the fallback, so a feasible solution is always returned.

The time budget is deterministic: the millisecond setting is converted to a
node-expansion budget at NODES_PER_MS, so identical inputs always explore
identical search trees regardless of machine load.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .features import FeatureContext

NODES_PER_MS = 100  # calibration of the deterministic search budget


@dataclass(frozen=True)
class SubtourProblem:
    loc: int
    clock: float
    load: float
    committed: Tuple[int, ...]          # R, reference (rollout) order
    extras: Tuple[int, ...] = ()        # A
    delta: int = 2
    skip_penalty: float = 0.0           # d_max from preprocessing
    time_budget_ms: float = 1000.0

    def __post_init__(self):
        if not self.committed:
            raise ValueError("committed set R must be non-empty")
        if set(self.committed) & set(self.extras):
            raise ValueError("R and A must be disjoint")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass(frozen=True)
class SubtourSolution:
    sequence: Tuple[int, ...]           # served customers in optimized order
    order: Dict[int, int]               # O_i over R u A; -1 = skipped extra
    service_starts: Tuple[float, ...]
    objective: float                    # travel + return + skip penalties
    travel_cost: float                  # objective minus skip penalties
    proven_optimal: bool
    delta_used: int
    nodes: int


class SubtourInfeasible(RuntimeError):
    """The reference order of R is not feasible from the given start state."""


def _sequence_cost(ctx: FeatureContext, loc: int, seq: Sequence[int]) -> float:
    cost = 0.0
    prev = loc
    for c in seq:
        cost += ctx.d[prev, c]
        prev = c
    return cost + ctx.d[prev, 0]


def _schedule(ctx: FeatureContext, loc: int, clock: float, load: float,
              seq: Sequence[int]) -> Optional[List[float]]:
    """Earliest service starts, or None if windows/capacity are violated."""
    starts = []
    t = clock
    prev = loc
    total = load
    for c in seq:
        arr = t + ctx.d[prev, c] / ctx.speed
        start = max(arr, float(ctx.tw_open[c]))
        if start > ctx.tw_close[c]:
            return None
        total += float(ctx.demand[c])
        if total > ctx.capacity:
            return None
        starts.append(start)
        t = start + float(ctx.service[c])
        prev = c
    return starts


def optimize(problem: SubtourProblem, ctx: FeatureContext) -> SubtourSolution:
    """Exact optimum within the search budget, else the best solution found.

    Tries the given delta first; on budget exhaustion without an optimality
    proof the delta is decremented and the search retried on the remaining
    budget. The incumbent from every attempt stays valid for the original
    problem since smaller deltas only shrink the feasible set.
    """
    R = problem.committed
    A = problem.extras
    node_budget = max(1, int(problem.time_budget_ms * NODES_PER_MS))
    used = 0

    base_starts = _schedule(ctx, problem.loc, problem.clock, problem.load, R)
    if base_starts is None:
        raise SubtourInfeasible(f"reference order {R} infeasible from node {problem.loc}")

    best_seq = tuple(R)
    best_obj = _sequence_cost(ctx, problem.loc, R) + problem.skip_penalty * len(A)
    proven = False
    delta_used = problem.delta
    total_nodes = 0

    for delta in range(problem.delta, 0, -1):
        seq, obj, complete, nodes = _branch_and_bound(
            problem, ctx, delta, best_obj, best_seq, node_budget - used)
        total_nodes += nodes
        used += nodes
        if obj < best_obj - 1e-12:
            best_seq, best_obj = seq, obj
        if complete:
            proven = True
            delta_used = delta
            break
        if used >= node_budget:
            break
    else:
        delta_used = 0

    if not proven:
        # Delta 0: reference order, extras only appended greedily at the end.
        seq, obj = _greedy_append(problem, ctx)
        if obj < best_obj - 1e-12:
            best_seq, best_obj = tuple(seq), obj
        delta_used = 0

    starts = _schedule(ctx, problem.loc, problem.clock, problem.load, best_seq)
    assert starts is not None
    order = {c: -1 for c in A}
    for pos, c in enumerate(best_seq, start=1):
        order[c] = pos
    skipped = sum(1 for c in A if order[c] == -1)
    return SubtourSolution(
        sequence=tuple(best_seq),
        order=order,
        service_starts=tuple(starts),
        objective=best_obj,
        travel_cost=best_obj - problem.skip_penalty * skipped,
        proven_optimal=proven,
        delta_used=delta_used,
        nodes=total_nodes,
    )


def _greedy_append(problem: SubtourProblem, ctx: FeatureContext
                   ) -> Tuple[List[int], float]:
    """Reference order with best-improvement extra appends (delta-0 fallback)."""
    seq = list(problem.committed)
    remaining = list(problem.extras)
    while remaining:
        best = None
        for c in remaining:
            cand = seq + [c]
            if _schedule(ctx, problem.loc, problem.clock, problem.load, cand) is None:
                continue
            added = ctx.d[seq[-1], c] + ctx.d[c, 0] - ctx.d[seq[-1], 0]
            if added >= problem.skip_penalty:
                continue
            if best is None or added < best[0] or (added == best[0] and c < best[1]):
                best = (added, c)
        if best is None:
            break
        seq.append(best[1])
        remaining.remove(best[1])
    skipped = len(problem.extras) - (len(seq) - len(problem.committed))
    return seq, _sequence_cost(ctx, problem.loc, seq) + problem.skip_penalty * skipped


def _branch_and_bound(problem: SubtourProblem, ctx: FeatureContext, delta: int,
                      ub: float, ub_seq: Tuple[int, ...], node_budget: int
                      ) -> Tuple[Tuple[int, ...], float, bool, int]:
    """DFS over sequences; returns (best seq, best objective, completed, nodes)."""
    R = problem.committed
    A = problem.extras
    nodes_all = list(R) + list(A)
    ref_pos = {c: i + 1 for i, c in enumerate(R)}
    skip = problem.skip_penalty
    d = ctx.d
    speed = ctx.speed
    capacity = ctx.capacity

    # Admissible per-customer bound: cheapest possible incoming leg.
    sources = [problem.loc] + nodes_all
    min_in = {c: min(d[s, c] for s in sources if s != c) for c in nodes_all}
    min_return = {c: d[c, 0] for c in nodes_all}

    best_obj = ub
    best_seq = ub_seq
    complete = True
    counter = 0

    def dfs(seq: List[int], last: int, t: float, load: float,
            cost: float, unplaced_r: List[int], unplaced_a: List[int]) -> None:
        nonlocal best_obj, best_seq, complete, counter
        counter += 1
        if counter > node_budget:
            complete = False
            return

        if not unplaced_r:
            # Route may end here; remaining extras are skipped.
            obj = cost + d[last, 0] + skip * len(unplaced_a)
            if obj < best_obj - 1e-12:
                best_obj = obj
                best_seq = tuple(seq)
        else:
            # CPS deadline: an unplaced R member that can no longer reach its
            # latest admissible position kills the branch.
            pos = len(seq) + 1
            if any(ref_pos[c] + delta < pos for c in unplaced_r):
                return

        # Bound on any completion that serves at least one more customer.
        lb = cost
        for c in unplaced_r:
            lb += min_in[c]
        for c in unplaced_a:
            lb += min(min_in[c] + 0.0, skip)  # served or skipped
        ret_lb = min([min_return[c] for c in unplaced_r + unplaced_a] + [d[last, 0]])
        if lb + ret_lb >= best_obj - 1e-12:
            return

        pos = len(seq) + 1
        candidates = []
        for c in unplaced_r:
            if abs(pos - ref_pos[c]) > delta:
                continue
            candidates.append(c)
        candidates.extend(unplaced_a)
        candidates.sort(key=lambda c: (d[last, c], c))
        for c in candidates:
            if not complete:
                return
            arr = t + d[last, c] / speed
            start = max(arr, float(ctx.tw_open[c]))
            if start > ctx.tw_close[c]:
                continue
            if load + ctx.demand[c] > capacity:
                continue
            in_r = c in ref_pos
            seq.append(c)
            dfs(seq, c, start + float(ctx.service[c]), load + float(ctx.demand[c]),
                cost + d[last, c],
                [x for x in unplaced_r if x != c] if in_r else unplaced_r,
                unplaced_a if in_r else [x for x in unplaced_a if x != c])
            seq.pop()

    dfs([], problem.loc, problem.clock, problem.load, 0.0, list(R), list(A))
    return best_seq, best_obj, complete, counter


def tighten(route: Sequence[int], ctx: FeatureContext, delta_t: int = 3,
            time_budget_ms: float = 1000.0) -> SubtourSolution:
    """Re-sequence one complete depot-to-depot route (no extras)."""
    problem = SubtourProblem(
        loc=0, clock=0.0, load=0.0, committed=tuple(route), extras=(),
        delta=delta_t, skip_penalty=0.0, time_budget_ms=time_budget_ms,
    )
    return optimize(problem, ctx)
