"""Deterministic physical models: potentials, Hamiltonians, time reversal.

Everything is expressed in dimensionless model units with k_B = 1 and unit
masses by default.  A model consists of a reaction coordinate q[0] moving in
a one-dimensional potential, plus optional bath oscillators q[1:] coupled
bilinearly to the reaction coordinate:

    H(q, p) = p0^2 / (2 m) + sum_i p_i^2 / 2
              + V(q0) + sum_i (omega_i^2 / 2) (x_i - c_i q0 / omega_i^2)^2

All potential terms depend on positions only, so H(q, p) = H(q, -p) holds
identically and the momentum-flip map is an exact symmetry of every model
this module can express.

Conditioning on the surroundings is a finite weighted set of boundary terms;
each term adds a momentum-independent modifier (constant offset plus linear
tilt of the reaction coordinate) to the potential energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, UnknownLabelError

__all__ = [
    "PhasePoint",
    "Harmonic",
    "DoubleWell",
    "FlatWells",
    "Piecewise",
    "BathMode",
    "HamiltonianModel",
    "BoundaryTerm",
    "ConditioningContext",
    "potential_energy",
    "total_energy",
    "kinetic_energy",
    "gradient",
    "time_reverse",
]


def _as_vector(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PhasePoint:
    """A single point (q, p) of phase space."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = _as_vector(self.q, "q")
        p = _as_vector(self.p, "p")
        if q.shape != p.shape or q.size == 0:
            raise ContractViolation(
                f"q and p must have equal positive length, got {q.shape} and {p.shape}"
            )
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size


def time_reverse(s: PhasePoint) -> PhasePoint:
    """Momentum-flip map (q, p) -> (q, -p); an involution."""
    return PhasePoint(s.q, -s.p)


# --- potential-energy shapes on the reaction coordinate ---------------------


@dataclass(frozen=True)
class Harmonic:
    """V(q) = k (q - q0)^2 / 2."""

    k: float
    q0: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ContractViolation(f"harmonic stiffness must be positive, got {self.k}")

    def energy(self, q):
        d = np.asarray(q, dtype=float) - self.q0
        return 0.5 * self.k * d * d

    def derivative(self, q):
        return self.k * (np.asarray(q, dtype=float) - self.q0)

    smooth = True


@dataclass(frozen=True)
class DoubleWell:
    """V(q) = a q^4 - b q^2 + c q, with two minima for small |c|."""

    a: float
    b: float
    c: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ContractViolation("double well needs a > 0 and b > 0")
        roots = np.roots([4.0 * self.a, 0.0, -2.0 * self.b, self.c])
        n_real = int(np.sum(np.abs(roots.imag) < 1e-9))
        if n_real != 3:
            raise ContractViolation(
                f"tilt c={self.c} too large: derivative has {n_real} real roots, "
                "two minima require 3"
            )

    def energy(self, q):
        q = np.asarray(q, dtype=float)
        q2 = q * q
        return self.a * q2 * q2 - self.b * q2 + self.c * q

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        return 4.0 * self.a * q * q * q - 2.0 * self.b * q + self.c

    smooth = True

    def minima(self):
        """Positions of the two local minima (left, right)."""
        roots = np.sort(np.roots([4.0 * self.a, 0.0, -2.0 * self.b, self.c]).real)
        return float(roots[0]), float(roots[2])


@dataclass(frozen=True)
class FlatWells:
    """Piecewise-constant wells: V = floor_i inside well i, +inf outside.

    Wells are (lower, upper, floor) triples with disjoint finite extents.
    Restricted partition functions over these wells have closed forms,
    which is what makes them useful as exact oracles.
    """

    wells: tuple

    def __post_init__(self):
        wells = tuple((float(a), float(b), float(u)) for a, b, u in self.wells)
        if not wells:
            raise ContractViolation("need at least one well")
        for a, b, _ in wells:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ContractViolation(f"bad well bounds ({a}, {b})")
        ordered = sorted(wells)
        for (_, hi, _), (lo, _, _) in zip(ordered, ordered[1:]):
            if lo < hi - 1e-12:
                raise ContractViolation("wells overlap")
        object.__setattr__(self, "wells", tuple(ordered))

    def energy(self, q):
        q = np.asarray(q, dtype=float)
        out = np.full(q.shape, np.inf)
        for lo, hi, floor in self.wells:
            inside = (q >= lo) & (q <= hi)
            out = np.where(inside, floor, out)
        return out if out.shape else float(out)

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        inside = np.zeros(q.shape, dtype=bool)
        for lo, hi, _ in self.wells:
            inside |= (q >= lo) & (q <= hi)
        if not np.all(inside):
            raise ContractViolation("flat-well gradient requested outside all wells")
        z = np.zeros(q.shape)
        return z if z.shape else 0.0

    smooth = False

    @property
    def support(self):
        return self.wells[0][0], self.wells[-1][1]


@dataclass(frozen=True)
class Piecewise:
    """Different potential shapes on intervals split by sorted breakpoints.

    Piece i applies on (breaks[i-1], breaks[i]); continuity at the breaks is
    not required (the quadrature path integrates each piece separately), so
    this shape is meant for restricted-ensemble thermodynamics, not dynamics.
    """

    breaks: tuple
    pieces: tuple

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        if list(breaks) != sorted(breaks):
            raise ContractViolation("breakpoints must be sorted")
        if len(self.pieces) != len(breaks) + 1:
            raise ContractViolation(
                f"{len(breaks)} breakpoints need {len(breaks) + 1} pieces, "
                f"got {len(self.pieces)}"
            )
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "pieces", tuple(self.pieces))

    def _apply(self, q, attr):
        q = np.asarray(q, dtype=float)
        scalar = q.ndim == 0
        qv = np.atleast_1d(q)
        idx = np.searchsorted(np.asarray(self.breaks), qv, side="left")
        out = np.empty(qv.shape)
        for i, piece in enumerate(self.pieces):
            mask = idx == i
            if np.any(mask):
                out[mask] = getattr(piece, attr)(qv[mask])
        return float(out[0]) if scalar else out

    def energy(self, q):
        return self._apply(q, "energy")

    def derivative(self, q):
        return self._apply(q, "derivative")

    smooth = False


# --- Hamiltonian model -------------------------------------------------------


@dataclass(frozen=True)
class BathMode:
    """One harmonic bath oscillator bilinearly coupled to the reaction coordinate."""

    frequency: float
    coupling: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ContractViolation(f"bath frequency must be positive, got {self.frequency}")


@dataclass(frozen=True)
class HamiltonianModel:
    """Separable Hamiltonian: reaction coordinate plus harmonic bath."""

    reaction_potential: object
    bath: tuple = ()
    reaction_mass: float = 1.0

    def __post_init__(self):
        if not self.reaction_mass > 0:
            raise ContractViolation("reaction mass must be positive")
        object.__setattr__(self, "bath", tuple(self.bath))

    @property
    def dim(self) -> int:
        return 1 + len(self.bath)

    def bath_arrays(self):
        om2 = np.array([m.frequency**2 for m in self.bath])
        c = np.array([m.coupling for m in self.bath])
        return om2, c


@dataclass(frozen=True)
class BoundaryTerm:
    """One realization of the surroundings: a weighted potential modifier.

    The modifier adds offset + tilt * q0 to the potential energy, which keeps
    every conditioned Hamiltonian momentum-independent and hence symmetric
    under time reversal.
    """

    label: str
    weight: float
    offset: float = 0.0
    tilt: float = 0.0

    def __post_init__(self):
        if self.weight < 0:
            raise ContractViolation(f"boundary weight must be >= 0, got {self.weight}")

    def modifier_energy(self, q0):
        return self.offset + self.tilt * np.asarray(q0, dtype=float)

    def modifier_derivative(self, q0):
        q0 = np.asarray(q0, dtype=float)
        return np.full(q0.shape, self.tilt) if q0.shape else self.tilt


@dataclass(frozen=True)
class ConditioningContext:
    """Finite weighted family of boundary terms; weights sum to one."""

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ContractViolation("context needs at least one boundary term")
        labels = [t.label for t in terms]
        if len(set(labels)) != len(labels):
            raise ContractViolation("duplicate boundary labels")
        total = sum(t.weight for t in terms)
        if abs(total - 1.0) > 1e-12:
            raise ContractViolation(f"boundary weights sum to {total}, expected 1")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def trivial(cls) -> "ConditioningContext":
        return cls(terms=(BoundaryTerm(label="bulk", weight=1.0),))

    def term(self, label=None) -> BoundaryTerm:
        if label is None:
            if len(self.terms) > 1:
                raise ContractViolation(
                    "context has several boundary terms; a label is required"
                )
            return self.terms[0]
        for t in self.terms:
            if t.label == label:
                return t
        raise UnknownLabelError(f"unknown boundary label {label!r}")

    @property
    def labels(self):
        return tuple(t.label for t in self.terms)


def _resolve(ctx, y):
    if ctx is None:
        ctx = ConditioningContext.trivial()
    return ctx.term(y)


def potential_energy(model: HamiltonianModel, q, ctx=None, y=None):
    """Conditioned potential energy U(X|Y) at configuration q.

    q may be a single configuration of shape (dim,) or a batch (n, dim);
    the result is a scalar or an (n,) array accordingly.
    """
    term = _resolve(ctx, y)
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != model.dim:
        raise ContractViolation(
            f"configuration has {q.shape[-1]} coordinates, model has {model.dim}"
        )
    q0 = q[..., 0]
    u = model.reaction_potential.energy(q0) + term.modifier_energy(q0)
    if model.bath:
        om2, c = model.bath_arrays()
        disp = q[..., 1:] - q0[..., None] * (c / om2)
        u = u + 0.5 * np.sum(om2 * disp * disp, axis=-1)
    return float(u) if np.ndim(u) == 0 else u


def kinetic_energy(model: HamiltonianModel, p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != model.dim:
        raise ContractViolation(
            f"momentum has {p.shape[-1]} coordinates, model has {model.dim}"
        )
    k = 0.5 * p[..., 0] ** 2 / model.reaction_mass
    if model.bath:
        k = k + 0.5 * np.sum(p[..., 1:] ** 2, axis=-1)
    return float(k) if np.ndim(k) == 0 else k


def total_energy(model: HamiltonianModel, s, ctx=None, y=None):
    """H = kinetic + conditioned potential; accepts a PhasePoint or (q, p)."""
    if isinstance(s, PhasePoint):
        q, p = s.q, s.p
    else:
        q, p = s
    return kinetic_energy(model, p) + potential_energy(model, q, ctx, y)


def gradient(model: HamiltonianModel, q, ctx=None, y=None):
    """dU/dq of the conditioned potential; shape matches q."""
    term = _resolve(ctx, y)
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != model.dim:
        raise ContractViolation(
            f"configuration has {q.shape[-1]} coordinates, model has {model.dim}"
        )
    q0 = q[..., 0]
    g = np.zeros_like(q)
    g[..., 0] = model.reaction_potential.derivative(q0) + term.modifier_derivative(q0)
    if model.bath:
        om2, c = model.bath_arrays()
        disp = q[..., 1:] - q0[..., None] * (c / om2)
        g[..., 1:] = om2 * disp
        g[..., 0] -= np.sum(c * disp, axis=-1)
    return g
