"""Episode engine: world state, feasible-pair enumeration, decision application,
vehicle spawning, trajectory bookkeeping, and per-decision rewards.

The fleet is unbounded: exactly one idle vehicle waits at the depot, and a new
one is spawned the moment it departs. Each vehicle's clock starts at 0 (there
is no global clock; routes are independent timelines).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import features as feat
from . import net
from .model import Instance, Route, Solution, distance_matrix, routes_distance
from .preprocess import PreprocessSummary, preprocess


@dataclass(frozen=True)
class PreparedInstance:
    """Instance plus everything derived from it once (shared, immutable)."""

    inst: Instance
    d: np.ndarray
    pre: PreprocessSummary
    ctx: feat.FeatureContext

    @classmethod
    def build(cls, inst: Instance, cluster_n: int = 3) -> "PreparedInstance":
        d = distance_matrix(inst)
        pre = preprocess(inst, cluster_n, d)
        ctx = feat.build_context(inst, pre, d)
        return cls(inst=inst, d=d, pre=pre, ctx=ctx)


@dataclass
class Leg:
    features: Optional[np.ndarray]
    d_p: float
    t_p: float


@dataclass
class VehicleState:
    id: int
    loc: int = 0
    clock: float = 0.0
    load: float = 0.0
    route: List[Tuple[int, float]] = field(default_factory=list)
    done: bool = False
    d_return: Optional[float] = None
    cluster_served: np.ndarray = None  # (K,) int32 counts
    trajectory: List[Leg] = field(default_factory=list)

    @property
    def at_depot(self) -> bool:
        return self.loc == 0

    def copy(self) -> "VehicleState":
        return VehicleState(
            id=self.id, loc=self.loc, clock=self.clock, load=self.load,
            route=list(self.route), done=self.done, d_return=self.d_return,
            cluster_served=self.cluster_served.copy(),
            trajectory=list(self.trajectory),
        )


class EpisodeState:
    """Mutable world during one episode; supports cheap snapshot copies."""

    def __init__(self, prep: PreparedInstance):
        self.prep = prep
        self.ctx = prep.ctx
        self.served = np.zeros(prep.inst.n + 1, dtype=np.uint8)
        self.served[0] = 1  # depot
        self.vehicles: List[VehicleState] = []
        self.decision_count = 0
        self._spawn()

    def _spawn(self) -> None:
        self.vehicles.append(
            VehicleState(id=len(self.vehicles),
                         cluster_served=np.zeros(self.ctx.n_clusters, dtype=np.int32))
        )

    @property
    def unserved_count(self) -> int:
        return self.prep.inst.n + 1 - int(self.served.sum())

    def copy(self) -> "EpisodeState":
        snap = EpisodeState.__new__(EpisodeState)
        snap.prep = self.prep
        snap.ctx = self.ctx
        snap.served = self.served.copy()
        snap.vehicles = [v.copy() for v in self.vehicles]
        snap.decision_count = self.decision_count
        return snap

    def vehicle_arrays(self):
        nv = len(self.vehicles)
        loc = np.fromiter((v.loc for v in self.vehicles), dtype=np.int32, count=nv)
        clock = np.fromiter((v.clock for v in self.vehicles), dtype=np.float64, count=nv)
        load = np.fromiter((v.load for v in self.vehicles), dtype=np.float64, count=nv)
        cs = np.vstack([v.cluster_served for v in self.vehicles]).astype(np.int32) \
            if nv else np.zeros((0, self.ctx.n_clusters), dtype=np.int32)
        return loc, clock, load, cs


class InfeasibleDecision(RuntimeError):
    pass


def feasible_pairs(state: EpisodeState) -> Tuple[np.ndarray, np.ndarray]:
    """All (vehicle index, customer) pairs servable next, in (vehicle, id) order."""
    ctx = state.ctx
    unserved = state.served == 0
    pv_parts, pc_parts = [], []
    for vi, veh in enumerate(state.vehicles):
        if veh.done:
            continue
        arrival = veh.clock + ctx.d[veh.loc] / ctx.speed
        start = np.maximum(arrival, ctx.tw_open)
        mask = unserved & (start <= ctx.tw_close) & (veh.load + ctx.demand <= ctx.capacity)
        custs = np.nonzero(mask)[0]
        if len(custs):
            pv_parts.append(np.full(len(custs), vi, dtype=np.int32))
            pc_parts.append(custs.astype(np.int32))
    if not pv_parts:
        return np.zeros(0, dtype=np.int32), np.zeros(0, dtype=np.int32)
    return np.concatenate(pv_parts), np.concatenate(pc_parts)


def retire_stuck_vehicles(state: EpisodeState) -> None:
    """Finish every en-route vehicle that can serve nobody else.

    The idle depot vehicle is kept: with a fresh clock it can reach any
    still-unserved customer on a well-formed instance.
    """
    ctx = state.ctx
    unserved = state.served == 0
    for vi, veh in enumerate(state.vehicles):
        if veh.done or veh.at_depot:
            continue
        arrival = veh.clock + ctx.d[veh.loc] / ctx.speed
        start = np.maximum(arrival, ctx.tw_open)
        mask = unserved & (start <= ctx.tw_close) & (veh.load + ctx.demand <= ctx.capacity)
        if not mask.any():
            finish_vehicle(state, vi)


def apply_decision(state: EpisodeState, vi: int, cust: int,
                   features: Optional[np.ndarray] = None) -> None:
    """Move vehicle vi to cust, spawn a depot replacement on first departure."""
    ctx = state.ctx
    veh = state.vehicles[vi]
    if veh.done:
        raise InfeasibleDecision(f"vehicle {veh.id} already finished")
    if state.served[cust]:
        raise InfeasibleDecision(f"customer {cust} already served")
    arrival = veh.clock + ctx.d[veh.loc, cust] / ctx.speed
    start = max(arrival, float(ctx.tw_open[cust]))
    if start > ctx.tw_close[cust]:
        raise InfeasibleDecision(f"customer {cust} window closes before arrival {arrival}")
    if veh.load + ctx.demand[cust] > ctx.capacity:
        raise InfeasibleDecision(f"customer {cust} demand exceeds remaining capacity")

    was_at_depot = veh.at_depot
    leg = Leg(features=features, d_p=float(ctx.d[veh.loc, cust]), t_p=start - veh.clock)
    veh.trajectory.append(leg)
    veh.route.append((cust, start))
    veh.loc = cust
    veh.clock = start + float(ctx.service[cust])
    veh.load += float(ctx.demand[cust])
    veh.cluster_served[ctx.cluster_of[cust]] += 1
    state.served[cust] = 1
    state.decision_count += 1
    if was_at_depot:
        state._spawn()


def finish_vehicle(state: EpisodeState, vi: int) -> None:
    veh = state.vehicles[vi]
    if veh.done:
        return
    veh.done = True
    if veh.route:
        veh.d_return = float(state.ctx.d[veh.loc, 0])


def finish_all(state: EpisodeState) -> None:
    for vi in range(len(state.vehicles)):
        finish_vehicle(state, vi)


def compute_rewards(legs: Sequence[Leg], d_return: float,
                    pre: PreprocessSummary, gamma: float) -> List[float]:
    """Per-decision realized rewards for one vehicle's completed trajectory."""
    P = len(legs)
    if P == 0:
        return []
    d_norm = pre.d_max if pre.d_max > 0.0 else 1.0
    t_norm = pre.t_max if pre.t_max > 0.0 else 1.0
    r_term = 2.0 * pre.rho - (sum(l.d_p for l in legs) + d_return) / (P + 1)
    return [
        (pre.rho - leg.d_p) / d_norm + (pre.tau - leg.t_p) / t_norm
        + gamma ** (P - p) * r_term
        for p, leg in enumerate(legs, start=1)
    ]


def build_solution(state: EpisodeState) -> Solution:
    routes = []
    orders = []
    for veh in state.vehicles:
        if veh.route:
            routes.append(Route(vehicle=len(routes), stops=tuple(veh.route)))
            orders.append([cid for cid, _ in veh.route])
    return Solution(
        instance=state.prep.inst.name,
        routes=tuple(routes),
        total_distance=routes_distance(state.prep.d, orders),
    )


def softmax_pick(values: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Sample an index ~ softmax(values / temperature); argmax below temp 1e-6."""
    if temperature < 1e-6:
        return int(np.argmax(values))
    z = (values - values.max()) / temperature
    p = np.exp(z)
    p /= p.sum()
    return int(rng.choice(len(values), p=p))


def run_policy_episode(prep: PreparedInstance, params: net.NetworkParams,
                       epsilon: float, temperature: float,
                       rng: np.random.Generator,
                       record_features: bool = True,
                       on_step: Optional[Callable[[EpisodeState], None]] = None,
                       trace: Optional[List[str]] = None) -> Tuple[Solution, EpisodeState]:
    """Single-step episode: epsilon-random or softmax-over-values decisions.

    epsilon=0 with temperature below 1e-6 is exact greedy. Used for training
    and as the rollout completion policy's reference implementation.
    """
    state = EpisodeState(prep)
    while state.unserved_count > 0:
        retire_stuck_vehicles(state)
        pv, pc = feasible_pairs(state)
        if len(pv) == 0:
            raise InfeasibleDecision(
                f"{prep.inst.name}: no feasible pairs with {state.unserved_count} unserved"
            )
        X = feat.extract_batch(state.ctx, state.served, pv, pc, *state.vehicle_arrays())
        explored = epsilon > 0.0 and rng.random() < epsilon
        if explored:
            idx = int(rng.integers(len(pv)))
            value = float("nan")
        else:
            values = net.forward_batch(params, X)
            idx = softmax_pick(values, temperature, rng)
            value = float(values[idx])
        if trace is not None:
            trace.append(f"{state.decision_count},{pv[idx]},{pc[idx]},{value},{int(explored)}")
        apply_decision(state, int(pv[idx]), int(pc[idx]),
                       features=X[idx] if record_features else None)
        if on_step is not None:
            on_step(state)
    finish_all(state)
    return build_solution(state), state


def run_episode(prep: PreparedInstance, params: net.NetworkParams, mode: str,
                seed: int, config: Optional[net.TrainConfig] = None,
                epsilon: float = 0.0, solve_config=None):
    """Front door matching the three operating modes.

    mode "explore": epsilon-random / softmax single-step episode (training).
    mode "greedy": deterministic argmax single-step episode.
    mode "solve": rollout-guided construction with sub-tour optimization.
    Returns (Solution, EpisodeState or SolveStats).
    """
    config = config or net.TrainConfig()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    if mode == "explore":
        return run_policy_episode(prep, params, epsilon, config.temperature, rng)
    if mode == "greedy":
        return run_policy_episode(prep, params, 0.0, 0.0, rng)
    if mode == "solve":
        from . import solver

        cfg = solve_config or solver.SolveConfig(seed=seed)
        result = solver.solve(prep, params, cfg)
        return result.solution, result
    raise ValueError(f"unknown mode {mode!r}")
