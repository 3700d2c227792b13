"""Dataset characterization: greedy cluster growing and summary quantities.

Clusters are grown from the unmapped customer nearest the depot; each pass
adds the n nearest unmapped neighbours of every current member, until a pass
adds nothing. The summary carries the quantities used as feature normalizers
and reward scales: neighbourhood radius rho (half the largest cluster
diameter), time threshold tau (median pairwise travel time), d_max (largest
inter-customer distance), and t_max (latest window close).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .model import Instance, distance_matrix


@dataclass(frozen=True)
class Cluster:
    id: int
    members: Tuple[int, ...]  # customer ids, sorted
    diameter: float


@dataclass(frozen=True)
class PreprocessSummary:
    clusters: Tuple[Cluster, ...]
    cluster_of: Dict[int, int]
    rho: float
    tau: float
    d_max: float
    t_max: float
    n: int


def build_clusters(inst: Instance, n: int, d: np.ndarray | None = None) -> List[Cluster]:
    """Greedy cluster growing with parameter n (nearest neighbours per member).

    Ties broken by smallest distance then smallest customer id; "nearest n
    neighbours" is computed over all customers and then filtered to unmapped
    ones, so a member adjacent to already-mapped customers may contribute
    fewer than n additions.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if d is None:
        d = distance_matrix(inst)
    ncust = inst.n
    unmapped = set(range(1, ncust + 1))

    # Per customer: all other customers sorted by (distance, id).
    neighbour_order = {
        i: sorted((j for j in range(1, ncust + 1) if j != i), key=lambda j: (d[i, j], j))
        for i in range(1, ncust + 1)
    }

    clusters: List[Cluster] = []
    while unmapped:
        seed = min(unmapped, key=lambda i: (d[0, i], i))
        members = [seed]
        member_set = {seed}
        unmapped.remove(seed)
        while True:
            added = False
            for m in list(members):
                for j in neighbour_order[m][:n]:
                    if j in unmapped:
                        members.append(j)
                        member_set.add(j)
                        unmapped.remove(j)
                        added = True
            if not added:
                break
        ms = sorted(member_set)
        diam = max((d[a, b] for a in ms for b in ms), default=0.0)
        clusters.append(Cluster(id=len(clusters), members=tuple(ms), diameter=float(diam)))
    return clusters


def summarize(inst: Instance, clusters: Sequence[Cluster], n: int,
              d: np.ndarray | None = None) -> PreprocessSummary:
    """Compute rho, tau, d_max, t_max for an instance and its clusters."""
    if d is None:
        d = distance_matrix(inst)
    cluster_of: Dict[int, int] = {}
    for cl in clusters:
        for m in cl.members:
            if m in cluster_of:
                raise ValueError(f"customer {m} mapped to two clusters")
            cluster_of[m] = cl.id
    if set(cluster_of) != set(range(1, inst.n + 1)):
        raise ValueError("clusters do not partition the customers")

    ncust = inst.n
    if ncust >= 2:
        iu = np.triu_indices(ncust, k=1)
        pair_d = d[1:, 1:][iu]
        tau = float(np.median(pair_d)) / inst.speed
        d_max = float(pair_d.max())
    else:
        tau = 0.0
        d_max = 0.0
    rho = max((cl.diameter for cl in clusters), default=0.0) / 2.0
    t_max = max((c.tw_close for c in inst.customers), default=0.0)

    return PreprocessSummary(
        clusters=tuple(clusters),
        cluster_of=cluster_of,
        rho=float(rho),
        tau=tau,
        d_max=d_max,
        t_max=float(t_max),
        n=n,
    )


def preprocess(inst: Instance, n: int = 3, d: np.ndarray | None = None) -> PreprocessSummary:
    if d is None:
        d = distance_matrix(inst)
    return summarize(inst, build_clusters(inst, n, d), n, d)


def clusters_to_csv(summary: PreprocessSummary) -> str:
    lines = ["customer,cluster"]
    for cid in sorted(summary.cluster_of):
        lines.append(f"{cid},{summary.cluster_of[cid]}")
    return "\n".join(lines) + "\n"
