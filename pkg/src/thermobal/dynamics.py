"""Deterministic, time-reversible integration of Hamiltonian flow.

Two schemes, both exactly time-reversible as discrete maps:

* fixed-step leapfrog (velocity Verlet) for smooth potentials, optionally
  with bath oscillators;
* exact event-driven free flight for piecewise-flat wells (reflection at
  hard walls, energy-conserving transmission or reflection at floor steps).

Leapfrog cannot see hard walls, so models whose reaction potential is a
:class:`~thermobal.model.FlatWells` are integrated with the event-driven
scheme; the scheme actually used is recorded on the returned trajectory.
When the requested duration is not a whole number of steps, the leapfrog
path takes one shorter closing step so the integrated duration equals the
request exactly; the closing-step length is reported as ``snap``.  Exact
step multiples use fixed steps only, which keeps the discrete map exactly
time-reversible where the reversibility contracts apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, IntegrationBlowUpError
from .model import FlatWells, PhasePoint, gradient, potential_energy, time_reverse, total_energy

__all__ = ["IntegratorSpec", "Trajectory", "evolve", "evolve_batch", "reversibility_check"]


@dataclass(frozen=True)
class IntegratorSpec:
    """Fixed-step integrator parameters.

    energy drift above drift_threshold * |H(0)| marks a trajectory invalid;
    the drift is checked every drift_interval steps.
    """

    dt: float
    scheme: str = "leapfrog"
    drift_threshold: float = 1e-4
    drift_interval: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractViolation(f"dt must be positive, got {self.dt}")
        if self.scheme not in ("leapfrog", "exact-flat"):
            raise ContractViolation(f"unknown scheme {self.scheme!r}")
        if self.drift_interval < 1:
            raise ContractViolation("drift_interval must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    initial: PhasePoint
    final: PhasePoint
    duration: float
    energy_drift: float
    snap: float
    n_steps: int
    scheme: str
    samples: tuple = None  # optional (t, q0, H) record arrays


def _uses_flat_flow(model) -> bool:
    return isinstance(model.reaction_potential, FlatWells)


def _leapfrog_batch(model, ctx, y, Q, P, n_steps, dt, drift_interval,
                    record_interval=None, closing_dt=None):
    """Velocity-Verlet on a batch of trajectories; returns finals and drift.

    Q, P have shape (n, dim).  The per-trajectory drift is the max |H - H0|
    over the checked steps.  One gradient evaluation per step (the closing
    half-kick gradient is reused as the next opening one).  If closing_dt is
    given, the final step uses it instead of dt.
    """
    Q = np.array(Q, dtype=float)
    P = np.array(P, dtype=float)
    minv = np.ones(Q.shape[1])
    minv[0] = 1.0 / model.reaction_mass

    def energy(Q, P):
        return potential_energy(model, Q, ctx, y) + 0.5 * np.sum(P * P * minv, axis=-1)

    h0 = energy(Q, P)
    drift = np.zeros(Q.shape[0])
    rec_t, rec_q, rec_h = [], [], []
    if record_interval:
        rec_t.append(0.0)
        rec_q.append(Q[:, 0].copy())
        rec_h.append(np.atleast_1d(h0).copy())
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        g = gradient(model, Q, ctx, y)
        for step in range(n_steps):
            h_step = closing_dt if (closing_dt is not None and step == n_steps - 1) else dt
            half = 0.5 * h_step
            Phalf = P - half * g
            Q = Q + h_step * Phalf * minv
            g = gradient(model, Q, ctx, y)
            P = Phalf - half * g
            t += h_step
            if (step + 1) % drift_interval == 0 or step + 1 == n_steps:
                h = energy(Q, P)
                if not np.all(np.isfinite(h)):
                    raise IntegrationBlowUpError(step + 1)
                np.maximum(drift, np.abs(h - h0), out=drift)
            if record_interval and ((step + 1) % record_interval == 0 or step + 1 == n_steps):
                rec_t.append(t)
                rec_q.append(Q[:, 0].copy())
                rec_h.append(np.atleast_1d(energy(Q, P)).copy())
    samples = None
    if record_interval:
        samples = (np.array(rec_t, dtype=float), np.array(rec_q), np.array(rec_h))
    return Q, P, drift, samples


def _flat_flow_single(wells, mass, q, p, tau, max_events=1_000_000):
    """Exact flow in piecewise-flat wells for one (q, p); energy conserving.

    Free flight inside a well; reflection at hard walls (outer edges and
    gaps between wells); at a shared edge between adjacent wells the
    particle transmits with |p| adjusted for the floor step when it has the
    kinetic energy to climb it, else reflects.  All transitions follow from
    energy conservation, so the discrete map is exactly time-reversible.
    """
    edges = [(lo, hi) for lo, hi, _ in wells.wells]
    floors = [u for _, _, u in wells.wells]
    n = len(edges)
    # locate current well
    iw = None
    for i, (lo, hi) in enumerate(edges):
        if lo <= q <= hi:
            iw = i
            break
    if iw is None:
        raise ContractViolation(f"initial position {q} outside all wells")
    t_left = float(tau)
    for _ in range(max_events):
        if t_left <= 0.0 or p == 0.0:
            break
        v = p / mass
        lo, hi = edges[iw]
        edge = hi if v > 0 else lo
        t_hit = (edge - q) / v
        if t_hit > t_left:
            q = q + v * t_left
            t_left = 0.0
            break
        q = edge
        t_left -= t_hit
        going_right = v > 0
        j = iw + 1 if going_right else iw - 1
        adjacent = (
            0 <= j < n
            and abs((edges[j][0] if going_right else edges[j][1]) - edge) <= 1e-12
        )
        if adjacent:
            du = floors[j] - floors[iw]
            ke = 0.5 * p * p / mass
            if ke > du:
                p = math.copysign(math.sqrt(p * p - 2.0 * mass * du), p)
                iw = j
            else:
                p = -p
        else:
            p = -p
    else:
        raise IntegrationBlowUpError(max_events, "flat-well flow exceeded event budget")
    return q, p


def _step_plan(tau, dt):
    """Split tau into full dt steps plus an optional shorter closing step.

    Returns (n_steps, closing_dt, snap): closing_dt is None when dt divides
    tau to within 1e-9 * dt (pure fixed steps, exactly reversible map);
    otherwise the last of the n_steps uses closing_dt so the integrated
    duration equals tau exactly.  snap is the residual duration mismatch.
    """
    n_full = int(round(tau / dt))
    rem = tau - n_full * dt
    if abs(rem) <= 1e-9 * dt:
        return n_full, None, -rem
    n_full = int(tau / dt)
    closing = tau - n_full * dt
    return n_full + 1, closing, 0.0


def evolve(model, ctx, y, s: PhasePoint, tau, integ: IntegratorSpec,
           record_interval=None) -> Trajectory:
    """Advance a phase point by tau under the model's Hamiltonian flow."""
    if tau < 0:
        raise ContractViolation("tau must be >= 0; reverse via time_reverse")
    if s.dim != model.dim:
        raise ContractViolation(f"state has {s.dim} coordinates, model has {model.dim}")
    if _uses_flat_flow(model):
        if model.bath:
            raise ContractViolation("flat-well flow supports reaction coordinate only")
        qf, pf = _flat_flow_single(
            model.reaction_potential, model.reaction_mass, float(s.q[0]), float(s.p[0]), tau
        )
        final = PhasePoint(np.array([qf]), np.array([pf]))
        h0 = total_energy(model, s, ctx, y)
        drift = abs(total_energy(model, final, ctx, y) - h0)
        return Trajectory(s, final, float(tau), float(drift), 0.0, 0, "exact-flat")
    n_steps, closing_dt, snap = _step_plan(tau, integ.dt)
    if n_steps == 0:
        return Trajectory(s, s, 0.0, 0.0, snap, 0, "leapfrog")
    Q, P, drift, samples = _leapfrog_batch(
        model, ctx, y, s.q[None, :], s.p[None, :], n_steps, integ.dt,
        integ.drift_interval, record_interval, closing_dt,
    )
    final = PhasePoint(Q[0], P[0])
    if samples is not None:
        samples = (samples[0], samples[1][:, 0], samples[2][:, 0])
    duration = tau - snap
    return Trajectory(s, final, duration, float(drift[0]), snap, n_steps, "leapfrog", samples)


def evolve_batch(model, ctx, y, Q, P, tau, integ: IntegratorSpec):
    """Advance a batch of phase points; returns (Qf, Pf, drift, n_steps, snap).

    Row i of the result is bit-identical to what evolve would produce for
    row i alone, whatever the batch split, because every operation is
    elementwise across rows.
    """
    if tau < 0:
        raise ContractViolation("tau must be >= 0")
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    if _uses_flat_flow(model):
        if model.bath:
            raise ContractViolation("flat-well flow supports reaction coordinate only")
        Qf = np.empty_like(Q)
        Pf = np.empty_like(P)
        wells, mass = model.reaction_potential, model.reaction_mass
        for i in range(Q.shape[0]):
            Qf[i, 0], Pf[i, 0] = _flat_flow_single(wells, mass, Q[i, 0], P[i, 0], tau)
        return Qf, Pf, np.zeros(Q.shape[0]), 0, 0.0
    n_steps, closing_dt, snap = _step_plan(tau, integ.dt)
    if n_steps == 0:
        return Q.copy(), P.copy(), np.zeros(Q.shape[0]), 0, snap
    Qf, Pf, drift, _ = _leapfrog_batch(
        model, ctx, y, Q, P, n_steps, integ.dt, integ.drift_interval, None, closing_dt
    )
    return Qf, Pf, drift, n_steps, snap


def reversibility_check(model, ctx, y, s: PhasePoint, tau, integ: IntegratorSpec) -> float:
    """Max-norm deviation of forward-flip-forward-flip from the identity."""
    fwd = evolve(model, ctx, y, s, tau, integ)
    back = evolve(model, ctx, y, time_reverse(fwd.final), tau, integ)
    roundtrip = time_reverse(back.final)
    return float(
        max(
            np.max(np.abs(roundtrip.q - s.q)),
            np.max(np.abs(roundtrip.p - s.p)),
        )
    )
