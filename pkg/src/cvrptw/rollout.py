"""Top-kappa value-guided rollout search.

Branches on the kappa best-valued feasible pairs, completes each branch to
episode end under the softmax policy on a private state copy, and keeps the
branch whose completed solution is shortest. Branch RNG streams depend only
on (seed, outer decision index, branch rank, repetition), never on kappa, so
runs with larger kappa evaluate a strict superset of completions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import episode as ep
from . import features as feat
from . import net


@dataclass(frozen=True)
class RolloutConfig:
    kappa: int = 5
    rollouts_per_branch: int = 1
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.rollouts_per_branch < 1:
            raise ValueError("rollouts_per_branch must be >= 1")


@dataclass(frozen=True)
class BranchResult:
    vehicle: int                      # vehicle index in the outer state
    customer: int
    distance: float                   # completed-solution total distance
    continuation: Tuple[int, ...]     # chosen vehicle's remaining route
    decisions: int                    # policy decisions taken in the rollout


def shortlist(state: ep.EpisodeState, params: net.NetworkParams, kappa: int
              ) -> List[Tuple[int, int, float]]:
    """Top-kappa feasible pairs by value, ties by (vehicle, customer) id."""
    pv, pc = ep.feasible_pairs(state)
    if len(pv) == 0:
        raise ep.InfeasibleDecision("no feasible pairs to shortlist")
    X = feat.extract_batch(state.ctx, state.served, pv, pc, *state.vehicle_arrays())
    values = net.forward_batch(params, X)
    ranked = sorted(range(len(pv)), key=lambda i: (-values[i], pv[i], pc[i]))
    return [(int(pv[i]), int(pc[i]), float(values[i])) for i in ranked[:kappa]]


def rollout_branch(state: ep.EpisodeState, params: net.NetworkParams,
                   forced_first: Tuple[int, int], temperature: float,
                   rng: np.random.Generator) -> BranchResult:
    """Force one decision, then complete the episode under the softmax policy."""
    snap = state.copy()
    vi, first_cust = forced_first
    committed_len = len(snap.vehicles[vi].route)
    ep.apply_decision(snap, vi, first_cust)
    decisions = 1
    while snap.unserved_count > 0:
        ep.retire_stuck_vehicles(snap)
        pv, pc = ep.feasible_pairs(snap)
        if len(pv) == 0:
            raise ep.InfeasibleDecision("rollout stuck with unserved customers")
        X = feat.extract_batch(snap.ctx, snap.served, pv, pc, *snap.vehicle_arrays())
        values = net.forward_batch(params, X)
        idx = ep.softmax_pick(values, temperature, rng)
        ep.apply_decision(snap, int(pv[idx]), int(pc[idx]))
        decisions += 1
    ep.finish_all(snap)
    solution = ep.build_solution(snap)
    continuation = tuple(cid for cid, _ in snap.vehicles[vi].route[committed_len:])
    return BranchResult(
        vehicle=vi, customer=first_cust, distance=solution.total_distance,
        continuation=continuation, decisions=decisions,
    )


def select(state: ep.EpisodeState, params: net.NetworkParams,
           config: RolloutConfig) -> Tuple[BranchResult, int]:
    """Winner over all branches and repetitions; returns (winner, decisions)."""
    candidates = shortlist(state, params, config.kappa)
    winner: Optional[BranchResult] = None
    total_decisions = 0
    for branch, (vi, cust, _value) in enumerate(candidates):
        for rep in range(config.rollouts_per_branch):
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((config.seed, state.decision_count, branch, rep))))
            result = rollout_branch(state, params, (vi, cust), config.temperature, rng)
            total_decisions += result.decisions
            if winner is None or result.distance < winner.distance - 1e-12:
                winner = result
    return winner, total_decisions
