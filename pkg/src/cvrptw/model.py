"""Problem instance representation, Solomon-format I/O, and feasibility checking.

Node 0 is always the depot. Distances are Euclidean at full double precision
(no 1-decimal truncation). Vehicle speed defaults to 1, so distance and time
units coincide, matching the benchmark convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np


class ParseError(ValueError):
    """Raised for malformed instance or solution files; carries a line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Customer:
    id: int
    x: float
    y: float
    demand: float
    tw_open: float
    tw_close: float
    service_time: float

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"customer id must be >= 1, got {self.id}")
        if not self.tw_open < self.tw_close:
            raise ValueError(f"customer {self.id}: window [{self.tw_open}, {self.tw_close}] is empty")
        if self.demand < 0:
            raise ValueError(f"customer {self.id}: negative demand")
        if self.service_time < 0:
            raise ValueError(f"customer {self.id}: negative service time")


@dataclass(frozen=True)
class Instance:
    name: str
    depot: Tuple[float, float]
    customers: Tuple[Customer, ...]
    vehicle_capacity: float
    speed: float = 1.0

    def __post_init__(self):
        if self.vehicle_capacity <= 0:
            raise ValueError("vehicle capacity must be positive")
        if self.speed <= 0:
            raise ValueError("speed must be positive")
        ids = [c.id for c in self.customers]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("customer ids must be unique and contiguous starting at 1")

    @property
    def n(self) -> int:
        return len(self.customers)

    def customer(self, cid: int) -> Customer:
        return self.customers[cid - 1]

    def coords(self) -> np.ndarray:
        """(n+1, 2) array of node coordinates, row 0 = depot."""
        out = np.empty((self.n + 1, 2), dtype=np.float64)
        out[0] = self.depot
        for c in self.customers:
            out[c.id] = (c.x, c.y)
        return out


def distance_matrix(inst: Instance) -> np.ndarray:
    """Full Euclidean distance matrix over nodes 0..n (0 = depot)."""
    xy = inst.coords()
    diff = xy[:, None, :] - xy[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


# ---------------------------------------------------------------------------
# Solomon format
# ---------------------------------------------------------------------------

def parse_solomon(text: str, name: Optional[str] = None) -> Instance:
    """Parse a Solomon-layout instance.

    Layout: instance name on the first non-empty line, a VEHICLE section with
    NUMBER and CAPACITY headers, then a CUSTOMER table whose row 0 is the depot.
    """
    lines = text.splitlines()

    def tokens(i: int) -> List[str]:
        return lines[i].split()

    idx = 0
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx >= len(lines):
        raise ParseError("empty instance file")
    inst_name = name or lines[idx].strip()
    idx += 1

    # VEHICLE section
    while idx < len(lines) and lines[idx].strip().upper() != "VEHICLE":
        idx += 1
    if idx >= len(lines):
        raise ParseError("missing VEHICLE section")
    idx += 1
    header = None
    while idx < len(lines):
        up = lines[idx].upper()
        if "NUMBER" in up and "CAPACITY" in up:
            header = idx
            break
        idx += 1
    if header is None:
        raise ParseError("missing NUMBER/CAPACITY header in VEHICLE section")
    idx = header + 1
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx >= len(lines) or len(tokens(idx)) < 2:
        raise ParseError("missing vehicle count / capacity row", line=idx + 1)
    try:
        capacity = float(tokens(idx)[1])
    except ValueError:
        raise ParseError(f"non-numeric capacity: {tokens(idx)[1]!r}", line=idx + 1)

    # CUSTOMER table (a "CUSTOMER" section line, then a column-header line)
    while idx < len(lines) and "CUST" not in lines[idx].upper():
        idx += 1
    if idx >= len(lines):
        raise ParseError("missing CUSTOMER table header")
    idx += 1
    while idx < len(lines):
        stripped = lines[idx].strip()
        if stripped and not ("CUST" in stripped.upper() or "XCOORD" in stripped.upper()):
            break
        idx += 1

    rows: List[Tuple[int, List[float]]] = []
    seen_ids = set()
    for j in range(idx, len(lines)):
        parts = lines[j].split()
        if not parts:
            continue
        if len(parts) < 7:
            raise ParseError(f"customer row has {len(parts)} fields, expected 7", line=j + 1)
        try:
            vals = [float(p) for p in parts[:7]]
        except ValueError:
            raise ParseError(f"non-numeric field in customer row: {lines[j].strip()!r}", line=j + 1)
        cid = int(vals[0])
        if cid != vals[0]:
            raise ParseError(f"non-integer customer id {vals[0]}", line=j + 1)
        if cid in seen_ids:
            raise ParseError(f"duplicate customer id {cid}", line=j + 1)
        seen_ids.add(cid)
        rows.append((j + 1, vals))

    if not rows:
        raise ParseError("customer table has no depot row")
    rows.sort(key=lambda r: r[1][0])
    depot_line, depot_row = rows[0]
    if int(depot_row[0]) != 0:
        raise ParseError("customer table row 0 (depot) is missing", line=depot_line)
    if depot_row[3] != 0:
        raise ParseError("depot has nonzero demand", line=depot_line)
    if depot_row[6] != 0:
        raise ParseError("depot has nonzero service time", line=depot_line)

    customers = []
    for line_no, vals in rows[1:]:
        cid, x, y, demand, ready, due, service = vals
        try:
            customers.append(Customer(int(cid), x, y, demand, ready, due, service))
        except ValueError as exc:
            raise ParseError(str(exc), line=line_no)

    return Instance(
        name=inst_name,
        depot=(depot_row[1], depot_row[2]),
        customers=tuple(customers),
        vehicle_capacity=capacity,
    )


def format_solomon(inst: Instance, vehicle_count: int = 25) -> str:
    """Serialize an instance back to the Solomon text layout."""
    def num(v: float) -> str:
        return f"{int(v)}" if float(v).is_integer() else repr(float(v))

    out = [inst.name, "", "VEHICLE", "NUMBER     CAPACITY", f"  {vehicle_count}         {num(inst.vehicle_capacity)}", "", "CUSTOMER"]
    out.append("CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE TIME")
    out.append("")
    rows = [(0, inst.depot[0], inst.depot[1], 0.0, 0.0, _depot_close(inst), 0.0)]
    rows += [(c.id, c.x, c.y, c.demand, c.tw_open, c.tw_close, c.service_time) for c in inst.customers]
    for r in rows:
        out.append("   " + " ".join(f"{num(v):>10}" for v in r))
    return "\n".join(out) + "\n"


def _depot_close(inst: Instance) -> float:
    # Latest conceivable return time; only used when re-serializing.
    if not inst.customers:
        return 1.0
    return max(c.tw_close + c.service_time for c in inst.customers) + float(
        np.max(distance_matrix(inst)[0])
    )


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Route:
    vehicle: int
    stops: Tuple[Tuple[int, float], ...]  # (customer id, service start)


@dataclass(frozen=True)
class Solution:
    instance: str
    routes: Tuple[Route, ...]
    total_distance: float


@dataclass(frozen=True)
class Violation:
    kind: str  # window | capacity | travel | coverage
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: Tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "OK"
        return "; ".join(f"[{v.kind}] {v.detail}" for v in self.violations)


def check_feasible(inst: Instance, sol: Solution, tol: float = 1e-9) -> FeasibilityReport:
    """Check coverage, capacity, time-window, and travel-time consistency.

    Waiting is allowed: a stop's recorded service start must be within the
    window and no earlier than arrival (travel-time constraint); it may exceed
    arrival arbitrarily.
    """
    d = distance_matrix(inst)
    v = inst.speed
    violations: List[Violation] = []

    counts = {c.id: 0 for c in inst.customers}
    for route in sol.routes:
        load = 0.0
        prev_done = 0.0
        prev_node = 0
        for cid, t_start in route.stops:
            if cid not in counts:
                violations.append(Violation("coverage", f"route {route.vehicle}: unknown customer {cid}"))
                continue
            counts[cid] += 1
            cust = inst.customer(cid)
            load += cust.demand
            earliest = prev_done + d[prev_node, cid] / v
            if t_start < earliest - tol:
                violations.append(
                    Violation(
                        "travel",
                        f"route {route.vehicle}: customer {cid} served at {t_start:.6f} "
                        f"before earliest arrival {earliest:.6f}",
                    )
                )
            if not (cust.tw_open - tol <= t_start <= cust.tw_close + tol):
                violations.append(
                    Violation(
                        "window",
                        f"route {route.vehicle}: customer {cid} served at {t_start:.6f} "
                        f"outside [{cust.tw_open}, {cust.tw_close}]",
                    )
                )
            prev_done = t_start + cust.service_time
            prev_node = cid
        if load > inst.vehicle_capacity + tol:
            violations.append(
                Violation("capacity", f"route {route.vehicle}: load {load} exceeds capacity {inst.vehicle_capacity}")
            )

    for cid, k in counts.items():
        if k == 0:
            violations.append(Violation("coverage", f"customer {cid} never served"))
        elif k > 1:
            violations.append(Violation("coverage", f"customer {cid} served {k} times"))

    return FeasibilityReport(tuple(violations))


def solution_distance(inst: Instance, sol: Solution) -> float:
    """Total distance of all routes including depot legs (objective value)."""
    d = distance_matrix(inst)
    return routes_distance(d, [[cid for cid, _ in r.stops] for r in sol.routes])


def routes_distance(d: np.ndarray, routes: Iterable[Sequence[int]]) -> float:
    total = 0.0
    for route in routes:
        if not route:
            continue
        total += d[0, route[0]]
        for a, b in zip(route, route[1:]):
            total += d[a, b]
        total += d[route[-1], 0]
    return float(total)


def earliest_schedule(inst: Instance, order: Sequence[int], d: Optional[np.ndarray] = None) -> List[float]:
    """Earliest feasible service starts along one route (waiting allowed).

    Does not check window closures; callers validate separately.
    """
    if d is None:
        d = distance_matrix(inst)
    starts = []
    prev_done = 0.0
    prev = 0
    for cid in order:
        cust = inst.customer(cid)
        start = max(prev_done + d[prev, cid] / inst.speed, cust.tw_open)
        starts.append(start)
        prev_done = start + cust.service_time
        prev = cid
    return starts


def solution_from_orders(inst: Instance, orders: Sequence[Sequence[int]],
                         d: Optional[np.ndarray] = None) -> Solution:
    """Build a Solution from per-vehicle visit orders using earliest starts."""
    if d is None:
        d = distance_matrix(inst)
    routes = []
    for k, order in enumerate(orders):
        if not order:
            continue
        starts = earliest_schedule(inst, order, d)
        routes.append(Route(vehicle=len(routes), stops=tuple(zip(order, starts))))
    return Solution(
        instance=inst.name,
        routes=tuple(routes),
        total_distance=routes_distance(d, [o for o in orders if o]),
    )


# ---------------------------------------------------------------------------
# Solution serialization
# ---------------------------------------------------------------------------

def solution_to_json(sol: Solution) -> str:
    doc = {
        "instance": sol.instance,
        "total_distance": sol.total_distance,
        "routes": [
            {
                "vehicle": r.vehicle,
                "stops": [{"customer": cid, "service_start": t} for cid, t in r.stops],
            }
            for r in sol.routes
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def solution_from_json(text: str) -> Solution:
    doc = json.loads(text)
    routes = tuple(
        Route(vehicle=r["vehicle"], stops=tuple((s["customer"], s["service_start"]) for s in r["stops"]))
        for r in doc["routes"]
    )
    return Solution(instance=doc["instance"], routes=routes, total_distance=doc["total_distance"])


def solution_to_csv(sol: Solution) -> str:
    lines = ["instance,vehicle,seq,customer,service_start"]
    for r in sol.routes:
        for i, (cid, t) in enumerate(r.stops):
            lines.append(f"{sol.instance},{r.vehicle},{i},{cid},{t!r}")
    return "\n".join(lines) + "\n"
