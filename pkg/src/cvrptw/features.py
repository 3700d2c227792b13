"""17-entry input vector for scoring a (vehicle, candidate customer) pair.

The heavy lifting happens in a batched kernel (compiled extension when
available, pure-Python fallback otherwise); this module owns the static
per-instance context the kernel reads and the single-pair convenience API.

Entry order (fixed, also the network input order):
  d, b_d_short, t, b_t_short, ngb, non_d, c_left, drop_far, drop_cls,
  drop_long, served, cls_dem, hops, cls_tim, urgt, dfrac, remote
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Instance
from .preprocess import PreprocessSummary

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    "d", "b_d_short", "t", "b_t_short", "ngb", "non_d", "c_left",
    "drop_far", "drop_cls", "drop_long", "served", "cls_dem", "hops",
    "cls_tim", "urgt", "dfrac", "remote",
)
N_FEATURES = len(FEATURE_NAMES)

DEMAND_EPS = 1e-6  # guards the capacity-fraction denominator of dfrac


@dataclass(frozen=True)
class FeatureContext:
    """Immutable per-instance arrays consumed by the extraction kernel."""

    d: np.ndarray            # (n+1, n+1) distances, node 0 = depot
    speed: float
    capacity: float
    demand: np.ndarray       # (n+1,)
    tw_open: np.ndarray      # (n+1,)
    tw_close: np.ndarray     # (n+1,)
    service: np.ndarray      # (n+1,)
    cluster_of: np.ndarray   # (n+1,) int32, depot = -1
    member_start: np.ndarray  # (K+1,) int32 CSR offsets into `members`
    members: np.ndarray      # (n,) int32 customer ids grouped by cluster
    cluster_size: np.ndarray  # (K,) int32
    nearest_nonmember: np.ndarray  # (n+1,) dist to nearest other-cluster customer
    remote: np.ndarray       # (n+1,) mean dist to other own-cluster members
    rho: float
    tau: float
    d_norm: float            # d_max with degenerate substitution
    t_norm: float            # t_max with degenerate substitution

    @property
    def n_customers(self) -> int:
        return self.d.shape[0] - 1

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_size)


def build_context(inst: Instance, pre: PreprocessSummary, d: np.ndarray) -> FeatureContext:
    n = inst.n
    demand = np.zeros(n + 1)
    tw_open = np.zeros(n + 1)
    tw_close = np.zeros(n + 1)
    service = np.zeros(n + 1)
    for c in inst.customers:
        demand[c.id] = c.demand
        tw_open[c.id] = c.tw_open
        tw_close[c.id] = c.tw_close
        service[c.id] = c.service_time

    cluster_of = np.full(n + 1, -1, dtype=np.int32)
    for cid, k in pre.cluster_of.items():
        cluster_of[cid] = k
    nclusters = len(pre.clusters)
    member_start = np.zeros(nclusters + 1, dtype=np.int32)
    members = np.zeros(n, dtype=np.int32)
    pos = 0
    for cl in pre.clusters:
        member_start[cl.id] = pos
        for m in cl.members:
            members[pos] = m
            pos += 1
        member_start[cl.id + 1] = pos
    cluster_size = np.diff(member_start).astype(np.int32)

    nearest_nonmember = np.zeros(n + 1)
    remote = np.zeros(n + 1)
    for c in range(1, n + 1):
        own = cluster_of[c]
        others = [j for j in range(1, n + 1) if cluster_of[j] != own]
        nearest_nonmember[c] = min((d[c, j] for j in others), default=0.0)
        mates = [j for j in range(1, n + 1) if cluster_of[j] == own and j != c]
        remote[c] = sum(d[c, j] for j in mates) / len(mates) if mates else 0.0

    d_norm, t_norm = pre.d_max, pre.t_max
    if d_norm <= 0.0 or t_norm <= 0.0:
        log.warning(
            "degenerate normalizers on %s (d_max=%g, t_max=%g); substituting 1",
            inst.name, pre.d_max, pre.t_max,
        )
        d_norm = d_norm if d_norm > 0.0 else 1.0
        t_norm = t_norm if t_norm > 0.0 else 1.0

    return FeatureContext(
        d=np.ascontiguousarray(d),
        speed=inst.speed,
        capacity=inst.vehicle_capacity,
        demand=demand,
        tw_open=tw_open,
        tw_close=tw_close,
        service=service,
        cluster_of=cluster_of,
        member_start=member_start,
        members=members,
        cluster_size=cluster_size,
        nearest_nonmember=nearest_nonmember,
        remote=remote,
        rho=pre.rho,
        tau=pre.tau,
        d_norm=d_norm,
        t_norm=t_norm,
    )


def extract_batch(ctx: FeatureContext,
                  served: np.ndarray,
                  pair_v: np.ndarray,
                  pair_c: np.ndarray,
                  veh_loc: np.ndarray,
                  veh_clock: np.ndarray,
                  veh_load: np.ndarray,
                  veh_cluster_served: np.ndarray) -> np.ndarray:
    """Feature matrix (P, 17) for P candidate pairs; dispatches to the kernel."""
    from . import kernels

    out = np.empty((len(pair_v), N_FEATURES), dtype=np.float64)
    kernels.extract_batch(
        ctx.d, ctx.speed, ctx.capacity, ctx.demand, ctx.tw_open, ctx.tw_close,
        ctx.service, ctx.cluster_of, ctx.member_start, ctx.members,
        ctx.cluster_size, ctx.nearest_nonmember, ctx.remote,
        ctx.rho, ctx.tau, ctx.d_norm, ctx.t_norm,
        np.ascontiguousarray(served, dtype=np.uint8),
        np.ascontiguousarray(pair_v, dtype=np.int32),
        np.ascontiguousarray(pair_c, dtype=np.int32),
        np.ascontiguousarray(veh_loc, dtype=np.int32),
        np.ascontiguousarray(veh_clock, dtype=np.float64),
        np.ascontiguousarray(veh_load, dtype=np.float64),
        np.ascontiguousarray(veh_cluster_served, dtype=np.int32),
        out,
    )
    return out


def extract(state, vehicle: int, cust: int) -> np.ndarray:
    """Single-pair feature vector from an episode state (convenience wrapper).

    `state` provides ctx, served, and per-vehicle arrays; see
    episode.EpisodeState.
    """
    arrays = state.vehicle_arrays()
    return extract_batch(
        state.ctx, state.served,
        np.array([vehicle], dtype=np.int32), np.array([cust], dtype=np.int32),
        *arrays,
    )[0]


def check_guards(x: Sequence[float]) -> None:
    """Raise if the conditional-feature guards are inconsistent."""
    ngb, non_d, c_left = x[4], x[5], x[6]
    drop = (x[7], x[8], x[9])
    if ngb == 1.0 and (c_left != 0.0 or any(drop)):
        raise AssertionError("ngb=1 requires c_left=drop_*=0")
    if ngb == 0.0 and non_d != 0.0:
        raise AssertionError("ngb=0 requires non_d=0")
    if c_left == 0.0 and any(drop):
        raise AssertionError("c_left=0 requires drop_*=0")
    if not all(np.isfinite(x)):
        raise AssertionError("non-finite feature entry")


def features_to_csv(rows: np.ndarray, pair_v: np.ndarray, pair_c: np.ndarray) -> str:
    header = "vehicle,customer," + ",".join(FEATURE_NAMES)
    lines = [header]
    for v, c, row in zip(pair_v, pair_c, rows):
        lines.append(f"{v},{c}," + ",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"
