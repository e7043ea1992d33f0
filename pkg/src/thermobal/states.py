"""Restricted-ensemble thermodynamics of metastable macrostates.

For a macrostate m (a union of disjoint regions) conditioned on the
boundary family Y with weights w_Y, the joint restricted Gibbs density over
(X, Y) is rho(X, Y) = exp(-beta U(X|Y)) / Z with

    Z(m) = sum_Y w_Y sum_{substates R} int_R exp(-beta U(X|Y)) dX

Entropy is computed twice: directly as -int rho ln rho, and as
ln Z + beta <U>; the two must agree (this identity is what the
entropy-equality check pivots on), and the report carries both plus their
discrepancy.  Sign conventions, fixed globally:

    dS_int = S(II) - S(I)          (increase of internal entropy in I -> II)
    <dQ>  = <U>_I - <U>_II         (heat released to the bath in I -> II)

Bath oscillators integrate out of every functional exactly (Gaussian), so
their contributions are additive constants that cancel in all I/II
differences; they are included so single-macrostate reports are complete.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .model import ConditioningContext
from .regions import Macrostate, Region
from .rng import stream
from .sampling import _bath_partition_factor, _gibbs_integral_1d

__all__ = [
    "Region",
    "Macrostate",
    "ThermoReport",
    "restricted_partition_function",
    "restricted_partition_function_mc",
    "entropy",
    "delta_s_int",
    "mean_heat_released",
    "macrostate_log_volume",
]


@dataclass
class ThermoReport:
    """Z, S and mean potential energy of one macrostate at one temperature."""

    label: str
    beta: float
    Z: float
    Z_err: float
    S: float
    S_direct: float
    S_discrepancy: float
    mean_U: float
    mean_U_err: float
    per_y: dict
    method: str
    tolerance: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def _as_macrostate(m) -> Macrostate:
    if isinstance(m, Macrostate):
        return m
    if isinstance(m, Region):
        return Macrostate(m.label, (m,))
    raise ContractViolation(f"expected a Macrostate or Region, got {type(m)!r}")


def restricted_partition_function(model, ctx, beta, m, tol=1e-10):
    """Z(m) summed over substates and weighted over boundary terms."""
    m = _as_macrostate(m)
    ctx = ctx or ConditioningContext.trivial()
    factor = _bath_partition_factor(model, beta)
    total, err = 0.0, 0.0
    for term in ctx.terms:
        for sub in m.substates:
            v, e = _gibbs_integral_1d(model, ctx, term.label, beta, sub, None, tol)
            total += term.weight * v * factor
            err += term.weight * e * factor
    if total <= 0:
        raise ContractViolation(f"non-positive partition function for {m.label!r}")
    return total, err


def restricted_partition_function_mc(model, ctx, beta, m, n_samples=200_000, seed=0):
    """Uniform-importance Monte-Carlo Z over bounded substates, with a CI.

    Z = sum_Y w_Y sum_R |R| <exp(-beta U)>_{uniform on R}.  This is the
    independent cross-check route for the quadrature values; it needs
    bounded regions and a one-dimensional configuration space.
    """
    m = _as_macrostate(m)
    if model.bath:
        raise ContractViolation("MC partition route supports bath-free models")
    if not m.bounded:
        raise ContractViolation("MC partition route needs bounded regions")
    ctx = ctx or ConditioningContext.trivial()
    total, var = 0.0, 0.0
    for term in ctx.terms:
        for sub in m.substates:
            g = stream(seed, "zmc", m.label, term.label, sub.label)
            q = g.uniform(sub.lower, sub.upper, size=n_samples)
            u = model.reaction_potential.energy(q) + term.modifier_energy(q)
            w = np.where(np.isfinite(u), np.exp(-beta * u), 0.0)
            contrib = sub.width * term.weight
            total += contrib * float(np.mean(w))
            var += (contrib * float(np.std(w)) / math.sqrt(n_samples)) ** 2
    half = 1.959963984540054 * math.sqrt(var)
    return total, half


def _bath_entropy(model, beta):
    """Exact additive entropy of the bath modes (Gaussian conditionals)."""
    s = 0.0
    for mode in model.bath:
        s += 0.5 * math.log(2.0 * math.pi / (beta * mode.frequency**2)) + 0.5
    return s


def entropy(model, ctx, beta, m, tol=1e-10) -> ThermoReport:
    """ThermoReport with S from both routes and their discrepancy."""
    m = _as_macrostate(m)
    ctx = ctx or ConditioningContext.trivial()
    factor = _bath_partition_factor(model, beta)
    z_total, z_err = restricted_partition_function(model, ctx, beta, m, tol)
    z_1d = z_total / factor

    # <U> of the one-dimensional part, then the bath's exact 1/(2 beta) each
    u_num, u_num_err = 0.0, 0.0
    per_y = {}
    for term in ctx.terms:
        zy, uy = 0.0, 0.0
        for sub in m.substates:
            v, e = _gibbs_integral_1d(
                model, ctx, term.label, beta, sub, lambda q, u: u, tol
            )
            zv, _ = _gibbs_integral_1d(model, ctx, term.label, beta, sub, None, tol)
            uy += v
            zy += zv
            u_num_err += term.weight * e
        u_num += term.weight * uy
        per_y[term.label] = {"Z": zy * factor, "mean_U": (uy / zy if zy > 0 else math.nan)}
    mean_u_1d = u_num / z_1d
    u_err = (u_num_err + abs(mean_u_1d) * z_err / factor) / z_1d
    mean_u = mean_u_1d + len(model.bath) / (2.0 * beta)
    s_route2 = math.log(z_total) + beta * mean_u

    # direct route: numerically integrate -rho ln rho over the restriction
    s_num = 0.0
    for term in ctx.terms:
        for sub in m.substates:
            def neg_rho_log_rho(q, u, z=z_1d):
                rho = math.exp(-beta * u) / z
                return -math.log(rho) if rho > 0 else 0.0

            v, _ = _gibbs_integral_1d(
                model, ctx, term.label, beta, sub, neg_rho_log_rho, tol
            )
            s_num += term.weight * v
    s_direct = s_num / z_1d + _bath_entropy(model, beta)

    return ThermoReport(
        label=m.label,
        beta=beta,
        Z=z_total,
        Z_err=z_err,
        S=s_route2,
        S_direct=s_direct,
        S_discrepancy=abs(s_route2 - s_direct),
        mean_U=mean_u,
        mean_U_err=u_err,
        per_y=per_y,
        method="quadrature",
        tolerance=tol,
    )


def delta_s_int(model, ctx, beta, m_i, m_ii, tol=1e-10):
    """S(II) - S(I) with a combined error bound."""
    rep_i = entropy(model, ctx, beta, m_i, tol)
    rep_ii = entropy(model, ctx, beta, m_ii, tol)
    err = rep_i.S_discrepancy + rep_ii.S_discrepancy + 10 * tol
    return rep_ii.S - rep_i.S, err


def mean_heat_released(model, ctx, beta, m_i, m_ii, tol=1e-10):
    """<U>_I - <U>_II under the respective restricted Gibbs densities."""
    rep_i = entropy(model, ctx, beta, m_i, tol)
    rep_ii = entropy(model, ctx, beta, m_ii, tol)
    return rep_i.mean_U - rep_ii.mean_U, rep_i.mean_U_err + rep_ii.mean_U_err + 10 * tol


def macrostate_log_volume(m) -> float:
    """ln of the configurational volume (total width of the substates).

    Only the I/II difference of these logs ever enters an identity, so the
    momentum-space factor common to both macrostates is omitted; it cancels
    because the kinetic forms match.
    """
    m = _as_macrostate(m)
    if not m.bounded:
        raise ContractViolation(f"macrostate {m.label!r} has unbounded volume")
    return math.log(m.total_width)
