"""Deterministic generator of Solomon-style 25-customer benchmark instances.

The public Solomon files cannot be bundled here, so this module produces a
56-instance stand-in suite with the same naming scheme and class structure:
C* clustered geography, R* uniform, RC* mixed; series 1 short horizon / low
capacity, series 2 long horizon / high capacity. Instance content is a pure
function of the instance name, so every consumer sees identical files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .model import Instance, parse_solomon

CLASS_NAMES: Dict[str, List[str]] = {
    "C1": [f"C1{i:02d}" for i in range(1, 10)],
    "C2": [f"C2{i:02d}" for i in range(1, 9)],
    "R1": [f"R1{i:02d}" for i in range(1, 13)],
    "R2": [f"R2{i:02d}" for i in range(1, 12)],
    "RC1": [f"RC1{i:02d}" for i in range(1, 9)],
    "RC2": [f"RC2{i:02d}" for i in range(1, 9)],
}
ALL_NAMES: Tuple[str, ...] = tuple(n for names in CLASS_NAMES.values() for n in names)

# Reference group means from published comparisons on the real Solomon sets
# (best-known column); emitted alongside bench results for orientation only.
BEST_KNOWN: Dict[str, float] = {
    "C1-25": 191.0, "R1-25": 464.0, "RC1-25": 350.0,
    "C2-25": 216.0, "R2-25": 382.0, "RC2-25": 319.0,
    "C1-50": 362.0, "R1-50": 766.0, "RC1-50": 730.0,
    "C2-50": 357.0, "R2-50": 634.0, "RC2-50": 585.0,
    "C1-100": 826.0, "R1-100": 1210.0, "RC1-100": 1384.0,
    "C2-100": 587.0, "R2-100": 902.0, "RC2-100": 1063.0,
}


@dataclass(frozen=True)
class ClassSpec:
    horizon: int
    capacity: int
    service: int
    geometry: str           # clustered | uniform | mixed
    tight_width: Tuple[int, int]


CLASS_SPECS: Dict[str, ClassSpec] = {
    "C1": ClassSpec(1236, 200, 90, "clustered", (60, 180)),
    "C2": ClassSpec(3390, 700, 90, "clustered", (160, 480)),
    "R1": ClassSpec(230, 200, 10, "uniform", (10, 30)),
    "R2": ClassSpec(1000, 1000, 10, "uniform", (60, 240)),
    "RC1": ClassSpec(240, 200, 10, "mixed", (10, 30)),
    "RC2": ClassSpec(960, 1000, 10, "mixed", (60, 240)),
}

DEPOT = (40.0, 50.0)
N_CUSTOMERS = 25


def class_of(name: str) -> str:
    prefix = "RC" if name.startswith("RC") else name[0]
    return prefix + name[len(prefix)]


def group_label(name: str, n_customers: int) -> str:
    return f"{class_of(name)}-{n_customers}"


def _rng_for(name: str) -> np.random.Generator:
    digest = hashlib.sha256(f"cvrptw-syn-{name}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))


def _coords(rng: np.random.Generator, geometry: str) -> np.ndarray:
    if geometry == "uniform":
        return rng.uniform(2, 98, size=(N_CUSTOMERS, 2))
    if geometry == "clustered":
        ncl = int(rng.integers(4, 7))
        centers = rng.uniform(12, 88, size=(ncl, 2))
        pts = []
        for i in range(N_CUSTOMERS):
            c = centers[i % ncl]
            pts.append(np.clip(c + rng.normal(0, 4.0, size=2), 0, 100))
        return np.array(pts)
    half = N_CUSTOMERS // 2
    clustered = _coords_n(rng, "clustered", half)
    uniform = _coords_n(rng, "uniform", N_CUSTOMERS - half)
    return np.vstack([clustered, uniform])


def _coords_n(rng: np.random.Generator, geometry: str, n: int) -> np.ndarray:
    if geometry == "uniform":
        return rng.uniform(2, 98, size=(n, 2))
    ncl = max(2, int(rng.integers(2, 4)))
    centers = rng.uniform(12, 88, size=(ncl, 2))
    pts = []
    for i in range(n):
        c = centers[i % ncl]
        pts.append(np.clip(c + rng.normal(0, 4.0, size=2), 0, 100))
    return np.array(pts)


def generate_text(name: str) -> str:
    """Solomon-format text for one synthetic instance (deterministic)."""
    cls = class_of(name)
    if cls not in CLASS_SPECS:
        raise ValueError(f"unknown instance class for {name!r}")
    spec = CLASS_SPECS[cls]
    rng = _rng_for(name)
    idx = int(name[len(cls):])

    xy = np.rint(_coords(rng, spec.geometry)).astype(int)
    demands = rng.choice([10, 20, 30, 40], size=N_CUSTOMERS,
                         p=[0.35, 0.35, 0.2, 0.1]).astype(int)

    # Fraction of tight windows cycles with the instance index, echoing how
    # the original series vary time-window density.
    tight_frac = (0.25, 0.5, 0.75, 1.0)[(idx - 1) % 4]
    rows = []
    for i in range(N_CUSTOMERS):
        d0 = float(np.hypot(xy[i, 0] - DEPOT[0], xy[i, 1] - DEPOT[1]))
        latest = spec.horizon - d0 - spec.service  # still allows depot return
        if rng.random() < tight_frac:
            width = float(rng.uniform(*spec.tight_width))
            center = float(rng.uniform(d0 + 1, max(d0 + 2, latest - 1)))
            open_t = max(0.0, center - width / 2)
            close_t = min(latest, center + width / 2)
        else:
            open_t, close_t = 0.0, latest
        open_t = int(round(open_t))
        close_t = int(round(close_t))
        if close_t <= open_t:
            close_t = open_t + 10
        rows.append((i + 1, xy[i, 0], xy[i, 1], int(demands[i]), open_t, close_t, spec.service))

    lines = [name, "", "VEHICLE", "NUMBER     CAPACITY",
             f"   25        {spec.capacity}", "", "CUSTOMER",
             "CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME   DUE DATE   SERVICE TIME",
             "",
             f"    0{DEPOT[0]:>10.0f}{DEPOT[1]:>10.0f}{0:>10}{0:>12}{spec.horizon:>11}{0:>14}"]
    for r in rows:
        lines.append(f"{r[0]:>5}{r[1]:>10}{r[2]:>10}{r[3]:>10}{r[4]:>12}{r[5]:>11}{r[6]:>14}")
    return "\n".join(lines) + "\n"


def generate_instance(name: str) -> Instance:
    return parse_solomon(generate_text(name), name=name)


def write_suite(out_dir: str) -> List[str]:
    """Write all 56 instances as .txt files; returns the file paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in ALL_NAMES:
        path = os.path.join(out_dir, f"{name}.txt")
        with open(path, "w") as f:
            f.write(generate_text(name))
        paths.append(path)
    return paths
