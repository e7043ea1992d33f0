"""Metastable regions and macrostates.

A region is an interval of one configuration coordinate (the reaction
coordinate by default).  Membership depends on positions only, never on
momenta, so every region is invariant under the momentum-flip map by
construction.  A macrostate is a labelled union of pairwise-disjoint
regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .model import PhasePoint

__all__ = ["Region", "Macrostate", "check_disjoint_by_sampling"]


@dataclass(frozen=True)
class Region:
    """Closed interval [lower, upper] of configuration coordinate ``coord``."""

    label: str
    lower: float
    upper: float
    coord: int = 0

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper) or self.lower >= self.upper:
            raise ContractViolation(
                f"region {self.label!r} needs lower < upper, got [{self.lower}, {self.upper}]"
            )
        if self.coord < 0:
            raise ContractViolation("coord must be a non-negative coordinate index")

    def contains(self, q):
        """Membership of configuration(s); q is (dim,) or (n, dim)."""
        q = np.asarray(q, dtype=float)
        x = q[..., self.coord]
        out = (x >= self.lower) & (x <= self.upper)
        return bool(out) if np.ndim(out) == 0 else out

    def contains_point(self, s: PhasePoint) -> bool:
        return self.contains(s.q)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def overlaps(self, other: "Region") -> bool:
        if self.coord != other.coord:
            return False
        return min(self.upper, other.upper) - max(self.lower, other.lower) > 0.0


@dataclass(frozen=True)
class Macrostate:
    """Union of pairwise-disjoint regions, e.g. the two sides of a barrier."""

    label: str
    substates: tuple

    def __post_init__(self):
        subs = tuple(self.substates)
        if not subs:
            raise ContractViolation(f"macrostate {self.label!r} needs at least one substate")
        labels = [r.label for r in subs]
        if len(set(labels)) != len(labels):
            raise ContractViolation("duplicate substate labels")
        for i, a in enumerate(subs):
            for b in subs[i + 1:]:
                if a.overlaps(b):
                    raise ContractViolation(
                        f"substates {a.label!r} and {b.label!r} overlap"
                    )
        object.__setattr__(self, "substates", subs)

    @classmethod
    def single(cls, label, lower, upper, coord=0) -> "Macrostate":
        return cls(label, (Region(label + ":0", lower, upper, coord),))

    def contains(self, q):
        q = np.asarray(q, dtype=float)
        out = self.substates[0].contains(q)
        for r in self.substates[1:]:
            out = out | r.contains(q)
        return out

    def contains_point(self, s: PhasePoint) -> bool:
        return bool(self.contains(s.q))

    @property
    def bounded(self) -> bool:
        return all(r.bounded for r in self.substates)

    @property
    def total_width(self) -> float:
        return float(sum(r.width for r in self.substates))

    def bounding_interval(self, coord=0):
        los = [r.lower for r in self.substates if r.coord == coord]
        his = [r.upper for r in self.substates if r.coord == coord]
        if not los:
            return -math.inf, math.inf
        return min(los), max(his)

    def same_extent(self, other: "Macrostate") -> bool:
        a = sorted((r.coord, r.lower, r.upper) for r in self.substates)
        b = sorted((r.coord, r.lower, r.upper) for r in other.substates)
        return a == b


def check_disjoint_by_sampling(m: Macrostate, rng, n=10_000, box=None) -> bool:
    """Rejection-sample the bounding box; no point may fall in two substates."""
    lo, hi = box if box is not None else m.bounding_interval()
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ContractViolation("sampling check needs a bounded box")
    coords = sorted({r.coord for r in m.substates})
    dim = max(coords) + 1
    q = np.zeros((n, dim))
    for c in coords:
        q[:, c] = rng.uniform(lo, hi, size=n)
    counts = np.zeros(n, dtype=int)
    for r in m.substates:
        counts += r.contains(q).astype(int)
    return bool(np.all(counts <= 1))
