"""Ensemble specifications, Metropolis samplers, and quadrature.

The microcanonical shell is realized as the thickened set
{ |H - E| <= dE/2 }, sampled by a symmetric random walk in full phase
space with indicator acceptance; the canonical ensemble is sampled in
configuration space only.  Both samplers emit points that satisfy their
ensemble constraint exactly (indicator acceptance can never leave the
target set), run any number of independent chains whose RNG streams are
derived from (seed, chain index), and merge results in chain order, so a
batch is bit-identical however the chains are scheduled.

An optional swap proposal (reaction-coordinate reflection, an involution
with unit Jacobian, Metropolis-corrected) lets chains cross barriers that
the random walk cannot climb; the volume-ratio estimator refuses to report
when inter-region crossings are too few to trust the counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (
    ContractViolation,
    EmptyRestrictionError,
    MixingGuardError,
    QuadratureError,
    ShellUnreachableError,
)
from .model import ConditioningContext, FlatWells, DoubleWell, Harmonic, Piecewise, potential_energy
from .regions import Macrostate, Region
from .rng import stream
from .stats import Interval, batch_means_se, integrated_autocorr_time, wilson_interval

__all__ = [
    "EnsembleSpec",
    "SamplerConfig",
    "SampleBatch",
    "RatioEstimate",
    "sample_microcanonical",
    "sample_canonical",
    "partition_function_quadrature",
    "volume_ratio_on_shell",
    "write_batch_csv",
]


# --- specifications ----------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    """Microcanonical shell (energy, shell_width) or canonical (beta) ensemble,
    optionally restricted to a region or macrostate (positions only)."""

    kind: str
    energy: float = None
    shell_width: float = None
    beta: float = None
    restriction: object = None

    def __post_init__(self):
        if self.kind == "microcanonical":
            if self.energy is None or self.shell_width is None or not self.shell_width > 0:
                raise ContractViolation("microcanonical spec needs energy and shell_width > 0")
        elif self.kind == "canonical":
            if self.beta is None or not self.beta > 0:
                raise ContractViolation("canonical spec needs beta > 0")
        else:
            raise ContractViolation(f"unknown ensemble kind {self.kind!r}")

    @classmethod
    def microcanonical(cls, energy, shell_width=None, restriction=None):
        if shell_width is None:
            shell_width = 1e-2 * abs(energy)  # default thickening
        return cls("microcanonical", energy=energy, shell_width=shell_width,
                   restriction=restriction)

    @classmethod
    def canonical(cls, beta, restriction=None):
        return cls("canonical", beta=beta, restriction=restriction)

    def member(self, model, q, p=None, ctx=None, y=None):
        """Pure membership predicate; exactly the sampled constraint."""
        ok = True
        if self.restriction is not None:
            ok = self.restriction.contains(q)
        if self.kind == "microcanonical":
            if p is None:
                raise ContractViolation("shell membership needs momenta")
            h = potential_energy(model, q, ctx, y) + _kinetic(model, p)
            ok = ok & (np.abs(h - self.energy) <= 0.5 * self.shell_width)
        return ok


def _kinetic(model, p):
    p = np.asarray(p, dtype=float)
    k = 0.5 * p[..., 0] ** 2 / model.reaction_mass
    if model.bath:
        k = k + 0.5 * np.sum(p[..., 1:] ** 2, axis=-1)
    return k


@dataclass(frozen=True)
class SamplerConfig:
    proposal_scale: float = 0.3
    n_burnin: int = 2_000
    n_samples: int = 4_000
    thinning: int = 1
    seed: int = 0
    swap_move: str = None  # e.g. "reflect_q" or "reflect_q:1.5"
    n_chains: int = 4
    swap_interval: int = 5

    def __post_init__(self):
        if self.n_samples <= 0 or self.thinning < 1 or self.n_chains < 1:
            raise ContractViolation("need n_samples > 0, thinning >= 1, n_chains >= 1")
        if self.swap_move is not None:
            _parse_swap(self.swap_move)


def _parse_swap(label):
    """Return the reflection center of a swap-move label."""
    if label == "reflect_q":
        return 0.0
    if label.startswith("reflect_q:"):
        return float(label.split(":", 1)[1])
    raise ContractViolation(f"unknown swap move {label!r}")


def swap_map(label, Q):
    """Apply the involution named by ``label`` to configurations Q.

    reflect_q with center 0 flips the sign of every position coordinate
    (reaction and bath alike), which is an exact symmetry of symmetric
    double wells with bilinear bath coupling; a nonzero center reflects the
    reaction coordinate alone.  Either way S(S(x)) = x and momenta are
    untouched, so the kinetic form is preserved and the Jacobian is one.
    """
    center = _parse_swap(label)
    out = np.array(Q, dtype=float)
    if center == 0.0:
        out *= -1.0
    else:
        out[..., 0] = 2.0 * center - out[..., 0]
    return out


@dataclass
class SampleBatch:
    """Markov-chain samples plus the diagnostics needed to trust them."""

    points: np.ndarray  # (n, 2*dim) phase rows or (n, dim) position rows
    kind: str  # "phase" | "position"
    weights: np.ndarray
    acceptance_rate: float
    diagnostics: dict
    spec: EnsembleSpec
    chain_ids: np.ndarray = None  # which chain produced each row

    @property
    def n(self):
        return self.points.shape[0]

    def positions(self, dim):
        return self.points[:, :dim]

    def momenta(self, dim):
        if self.kind != "phase":
            raise ContractViolation("position-only batch has no momenta")
        return self.points[:, dim:]


# --- initial point construction ----------------------------------------------


def _scan_interval(restriction):
    if restriction is None:
        return -8.0, 8.0
    if hasattr(restriction, "bounding_interval"):
        lo, hi = restriction.bounding_interval()
    else:
        lo, hi = restriction.lower, restriction.upper
    if not math.isfinite(lo):
        lo = min(-8.0, hi - 16.0) if math.isfinite(hi) else -8.0
    if not math.isfinite(hi):
        hi = max(8.0, lo + 16.0)
    return lo, hi


def _initial_config(model, ctx, y, restriction):
    """Deterministic low-energy configuration inside the restriction."""
    lo, hi = _scan_interval(restriction)
    grid = np.linspace(lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo), 2049)
    if restriction is not None:
        qgrid = np.zeros((grid.size, 1))
        qgrid[:, 0] = grid
        keep = restriction.contains(qgrid)
        grid = grid[keep]
        if grid.size == 0:
            raise EmptyRestrictionError("restriction contains no candidate configurations")
    u = model.reaction_potential.energy(grid)
    term = (ctx or ConditioningContext.trivial()).term(y)
    u = u + term.modifier_energy(grid)
    finite = np.isfinite(u)
    if not np.any(finite):
        raise EmptyRestrictionError("potential is infinite everywhere in the restriction")
    q0 = float(grid[finite][np.argmin(u[finite])])
    q = np.zeros(model.dim)
    q[0] = q0
    if model.bath:
        om2, c = model.bath_arrays()
        q[1:] = c * q0 / om2  # conditional bath minimum: coupling term vanishes
    return q


def _initial_phase(model, ctx, y, spec):
    q = _initial_config(model, ctx, y, spec.restriction)
    u = potential_energy(model, q, ctx, y)
    budget = spec.energy - u
    if budget < 0:
        raise ShellUnreachableError(
            f"shell unreachable: min potential {u:.6g} exceeds shell energy {spec.energy:.6g}"
        )
    p = np.zeros(model.dim)
    p[0] = math.sqrt(2.0 * model.reaction_mass * budget)
    return q, p


# --- chain drivers ------------------------------------------------------------


def _run_chains(cfg, dim_state, init_state, accept_fn, swap_fns=(), track_region=None):
    """Vectorized Metropolis chains with per-chain derived streams.

    accept_fn operates on (n_chains, dim_state) arrays and returns a
    boolean acceptance mask.  swap_fns are involution proposals (unit
    Jacobian) tried in rotation every swap_interval-th iteration instead of
    the random walk.  Proposals and uniforms for chain c come from
    stream(seed, "chain", c), so the merged batch is independent of
    scheduling.
    """
    nc = cfg.n_chains
    per_chain = -(-cfg.n_samples // nc)  # ceil
    iters = cfg.n_burnin + per_chain * cfg.thinning
    normals = np.empty((nc, iters, dim_state))
    uniforms = np.empty((nc, iters))
    for c in range(nc):
        g = stream(cfg.seed, "chain", c)
        normals[c] = g.standard_normal((iters, dim_state))
        uniforms[c] = g.random(iters)
    cur = np.tile(init_state, (nc, 1))
    kept = np.empty((nc, per_chain, dim_state))
    n_acc_walk = 0
    n_walk = 0
    n_acc_swap = 0
    n_swap = 0
    n_acc_burnin = 0
    crossings = np.zeros(nc, dtype=int)
    prev_label = None
    if track_region is not None:
        prev_label = track_region(cur)
    scale = cfg.proposal_scale
    for it in range(iters):
        is_swap = (
            len(swap_fns) > 0
            and cfg.swap_interval > 0
            and (it + 1) % cfg.swap_interval == 0
        )
        if is_swap:
            which = ((it + 1) // cfg.swap_interval - 1) % len(swap_fns)
            prop = swap_fns[which](cur)
            n_swap += nc
        else:
            prop = cur + scale * normals[:, it, :]
            n_walk += nc
        acc = accept_fn(cur, prop, uniforms[:, it])
        if np.any(acc):
            cur[acc] = prop[acc]
            if is_swap:
                n_acc_swap += int(np.sum(acc))
            else:
                n_acc_walk += int(np.sum(acc))
            if it < cfg.n_burnin:
                n_acc_burnin += int(np.sum(acc))
        if track_region is not None:
            label = track_region(cur)
            if it >= cfg.n_burnin:
                crossings += (label != prev_label).astype(int)
            prev_label = label
        k = it - cfg.n_burnin
        if k >= 0 and (k + 1) % cfg.thinning == 0:
            kept[:, (k + 1) // cfg.thinning - 1, :] = cur
    if cfg.n_burnin > 0 and n_acc_burnin == 0:
        raise ShellUnreachableError("zero acceptances over the full burn-in")
    points = kept.reshape(nc * per_chain, dim_state)[: cfg.n_samples]
    chain_ids = np.repeat(np.arange(nc), per_chain)[: cfg.n_samples]
    acc_rate = n_acc_walk / max(1, n_walk)
    swap_rate = n_acc_swap / max(1, n_swap) if n_swap else None
    return points, chain_ids, acc_rate, swap_rate, int(np.sum(crossings)), kept


def sample_microcanonical(model, ctx, spec: EnsembleSpec, cfg: SamplerConfig, y=None) -> SampleBatch:
    """Random-walk Metropolis on the thickened energy shell (full phase space)."""
    if spec.kind != "microcanonical":
        raise ContractViolation("spec must be microcanonical")
    dim = model.dim
    q0, p0 = _initial_phase(model, ctx, y, spec)
    init = np.concatenate([q0, p0])

    def member(states):
        q = states[:, :dim]
        p = states[:, dim:]
        return spec.member(model, q, p, ctx, y)

    if not member(init[None, :])[0]:
        raise ShellUnreachableError("constructed initial state misses the shell")

    def accept(cur, prop, u):
        return member(prop)

    # the momentum-reversal involution is always in the cycle: H is even in
    # p, so it is exactly measure-preserving, and it connects time-reversed
    # branches of the shell that a small random walk cannot join (momenta in
    # a one-dimensional flat well, for instance, form two disjoint bands)
    def mom_flip(states):
        out = np.array(states)
        out[:, dim:] *= -1.0
        return out

    swap_fns = [mom_flip]
    if cfg.swap_move is not None:
        def pos_swap(states):
            out = np.array(states)
            out[:, :dim] = swap_map(cfg.swap_move, out[:, :dim])
            return out

        swap_fns.append(pos_swap)

    points, chain_ids, acc, swap_rate, _, kept = _run_chains(
        cfg, 2 * dim, init, accept, swap_fns
    )
    diag = _chain_diagnostics(kept, col=0)
    diag["acceptance_swap"] = swap_rate
    return SampleBatch(points, "phase", np.ones(points.shape[0]), acc, diag, spec,
                       chain_ids)


def sample_canonical(model, ctx, spec: EnsembleSpec, cfg: SamplerConfig, y=None) -> SampleBatch:
    """Configurational Metropolis targeting exp(-beta U(X|Y)) on the restriction."""
    if spec.kind != "canonical":
        raise ContractViolation("spec must be canonical")
    dim = model.dim
    beta = spec.beta
    init = _initial_config(model, ctx, y, spec.restriction)

    def in_region(Q):
        if spec.restriction is None:
            return np.ones(Q.shape[0], dtype=bool)
        return spec.restriction.contains(Q)

    def accept(cur, prop, u):
        ok = in_region(prop)
        du = np.full(cur.shape[0], np.inf)
        if np.any(ok):
            up = potential_energy(model, prop[ok], ctx, y)
            uc = potential_energy(model, cur[ok], ctx, y)
            du[ok] = up - uc
        with np.errstate(over="ignore"):
            return ok & (u < np.exp(np.minimum(0.0, -beta * du)))

    swap_fns = []
    if cfg.swap_move is not None:
        swap_fns.append(lambda Q: swap_map(cfg.swap_move, Q))

    points, chain_ids, acc, swap_rate, _, kept = _run_chains(cfg, dim, init, accept, swap_fns)
    diag = _chain_diagnostics(kept, col=0)
    diag["acceptance_swap"] = swap_rate
    return SampleBatch(points, "position", np.ones(points.shape[0]), acc, diag, spec,
                       chain_ids)


def _chain_diagnostics(kept, col=0):
    """Autocorrelation of the tracked observable, averaged over chains."""
    taus = [integrated_autocorr_time(kept[c, :, col]) for c in range(kept.shape[0])]
    return {"iact_q": float(np.mean(taus)), "n_chains": kept.shape[0]}


# --- quadrature ----------------------------------------------------------------


def _potential_knots(pot):
    if isinstance(pot, Harmonic):
        return [pot.q0]
    if isinstance(pot, DoubleWell):
        roots = np.roots([4.0 * pot.a, 0.0, -2.0 * pot.b, pot.c])
        return sorted(float(r.real) for r in roots if abs(r.imag) < 1e-9)
    if isinstance(pot, Piecewise):
        knots = list(pot.breaks)
        for piece in pot.pieces:
            knots.extend(_potential_knots(piece))
        return knots
    if isinstance(pot, FlatWells):
        out = []
        for lo, hi, _ in pot.wells:
            out.extend([lo, hi])
        return out
    return []


def _quad_1d(f, lo, hi, knots, tol):
    """Adaptive quadrature of f over [lo, hi], split at interior knots."""
    pts = sorted({k for k in knots if lo < k < hi})
    edges = [lo] + pts + [hi]
    total, err = 0.0, 0.0
    for a, b in zip(edges, edges[1:]):
        val, abserr = integrate.quad(f, a, b, limit=200, epsabs=tol * 0.1, epsrel=1e-12)
        total += val
        err += abserr
    if err > max(tol, 1e-13 * abs(total)):
        raise QuadratureError(
            f"quadrature error {err:.3g} exceeds tolerance {tol:.3g} on [{lo}, {hi}]"
        )
    return total, err


def _gibbs_integral_1d(model, ctx, y, beta, region: Region, observable=None, tol=1e-10):
    """integral over the region of f(q, U(q)) * exp(-beta U(q)) dq.

    observable(q, u) defaults to 1.  Flat wells with no tilt use the exact
    closed form; everything else goes through adaptive quadrature with
    knots at the potential's stationary points and breakpoints.
    """
    term = (ctx or ConditioningContext.trivial()).term(y)
    pot = model.reaction_potential
    if region.coord != 0:
        raise ContractViolation("quadrature integrates the reaction coordinate only")
    lo, hi = region.lower, region.upper

    if isinstance(pot, FlatWells) and term.tilt == 0.0 and observable is None:
        total = 0.0
        for wlo, whi, floor in pot.wells:
            a, b = max(lo, wlo), min(hi, whi)
            if b <= a:
                continue
            total += (b - a) * math.exp(-beta * (floor + term.offset))
        return total, abs(total) * 1e-15

    def integrand(q):
        u = pot.energy(q) + term.modifier_energy(q)
        if not np.isfinite(u):
            return 0.0
        w = math.exp(-beta * u)
        return w if observable is None else observable(q, u) * w

    if isinstance(pot, FlatWells):
        # integrate each well segment separately (walls are discontinuities)
        total, err = 0.0, 0.0
        for wlo, whi, _ in pot.wells:
            a, b = max(lo, wlo), min(hi, whi)
            if b <= a:
                continue
            v, e = _quad_1d(integrand, a, b, [], tol)
            total += v
            err += e
        return total, err

    return _quad_1d(integrand, lo, hi, _potential_knots(pot), tol)


def _bath_partition_factor(model, beta):
    """Exact Gaussian factor contributed by the bath modes.

    With the bilinear coupling written in its shifted form, each bath mode
    integrates out exactly for every fixed reaction coordinate, so the bath
    contributes configuration-independent factors sqrt(2 pi / (beta w^2)).
    """
    out = 1.0
    for m in model.bath:
        out *= math.sqrt(2.0 * math.pi / (beta * m.frequency**2))
    return out


def partition_function_quadrature(model, ctx, beta, region, tol=1e-10):
    """Restricted configurational partition function with an error bound.

    Averages the per-boundary-term values with the context weights.  The
    quadrature path is limited to configuration dimension <= 2; the single
    bath mode allowed there integrates out exactly (Gaussian), leaving a
    one-dimensional adaptive quadrature.
    """
    if model.dim > 2:
        raise ContractViolation("quadrature path supports configuration dimension <= 2")
    if isinstance(region, Macrostate):
        total, err = 0.0, 0.0
        for sub in region.substates:
            v, e = partition_function_quadrature(model, ctx, beta, sub, tol)
            total += v
            err += e
        return total, err
    ctx = ctx or ConditioningContext.trivial()
    factor = _bath_partition_factor(model, beta)
    total, err = 0.0, 0.0
    for term in ctx.terms:
        v, e = _gibbs_integral_1d(model, ctx, term.label, beta, region, None, tol)
        total += term.weight * v * factor
        err += term.weight * e * factor
    return total, err


# --- shell volume ratio ---------------------------------------------------------


@dataclass(frozen=True)
class RatioEstimate:
    ratio: float
    interval: Interval
    n_a: int
    n_b: int
    crossings: int
    iact: float


class _UnionRestriction:
    """Membership in A or B; quacks like a Region for the samplers."""

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def contains(self, q):
        return self.a.contains(q) | self.b.contains(q)

    def bounding_interval(self):
        lo_a, hi_a = _scan_interval(self.a)
        lo_b, hi_b = _scan_interval(self.b)
        return min(lo_a, lo_b), max(hi_a, hi_b)


def volume_ratio_on_shell(model, ctx, spec, region_a, region_b, cfg,
                          min_crossings=100, y=None) -> RatioEstimate:
    """Shell-measure ratio measure(A)/measure(B) from one mixed chain.

    A single chain restricted to A union B counts visits to each side;
    the binomial-ratio confidence interval is widened by the integrated
    autocorrelation time of the membership indicator.  If the chain
    exchanged sides fewer than min_crossings times, the estimate is
    refused rather than silently reported.
    """
    if spec.kind != "microcanonical":
        raise ContractViolation("volume ratio is defined on the shell ensemble")
    same = (
        region_a.same_extent(region_b)
        if isinstance(region_a, Macrostate) and isinstance(region_b, Macrostate)
        else region_a == region_b
    )
    if same:
        return RatioEstimate(1.0, Interval.point(1.0), cfg.n_samples, cfg.n_samples, 0, 1.0)
    union = _UnionRestriction(region_a, region_b)
    mixed_spec = EnsembleSpec.microcanonical(spec.energy, spec.shell_width, restriction=union)
    dim = model.dim
    q0, p0 = _initial_phase(model, ctx, y, mixed_spec)
    init = np.concatenate([q0, p0])

    def member(states):
        return mixed_spec.member(model, states[:, :dim], states[:, dim:], ctx, y)

    if not member(init[None, :])[0]:
        raise ShellUnreachableError("constructed initial state misses the shell")

    def accept(cur, prop, u):
        return member(prop)

    def mom_flip(states):
        out = np.array(states)
        out[:, dim:] *= -1.0
        return out

    swap_fns = [mom_flip]
    if cfg.swap_move is not None:
        def pos_swap(states):
            out = np.array(states)
            out[:, :dim] = swap_map(cfg.swap_move, out[:, :dim])
            return out

        swap_fns.append(pos_swap)

    def region_label(states):
        return region_a.contains(states[:, :dim]).astype(np.int8)

    single = SamplerConfig(
        proposal_scale=cfg.proposal_scale, n_burnin=cfg.n_burnin,
        n_samples=cfg.n_samples, thinning=cfg.thinning, seed=cfg.seed,
        swap_move=cfg.swap_move, n_chains=1, swap_interval=cfg.swap_interval,
    )
    points, _, acc, swap_rate, crossings, kept = _run_chains(
        single, 2 * dim, init, accept, swap_fns, track_region=region_label
    )
    in_a = region_a.contains(points[:, :dim])
    in_b = region_b.contains(points[:, :dim])
    n_a = int(np.sum(in_a))
    n_b = int(np.sum(in_b))
    if crossings < min_crossings:
        raise MixingGuardError(crossings, min_crossings)
    if n_a == 0 or n_b == 0:
        raise MixingGuardError(crossings, min_crossings)
    ind = in_a.astype(float)
    p = n_a / (n_a + n_b)
    # batch-means error handles the correlated (and possibly alternating,
    # under a deterministic swap schedule) membership series
    se_p = batch_means_se(ind)
    z = 1.959963984540054
    p_lo = min(max(p - z * se_p, 1.0 / (2 * (n_a + n_b))), 1.0 - 1e-12)
    p_hi = min(max(p + z * se_p, p_lo), 1.0 - 1.0 / (2 * (n_a + n_b)))
    lo = p_lo / (1.0 - p_lo)
    hi = p_hi / (1.0 - p_hi)
    tau = integrated_autocorr_time(ind)
    return RatioEstimate(n_a / n_b, Interval(lo, hi), n_a, n_b, crossings, tau)


# --- CSV export -----------------------------------------------------------------


def write_batch_csv(batch: SampleBatch, path, dim=None):
    """One row per sample; metadata in leading comment lines."""
    n_cols = batch.points.shape[1]
    if batch.kind == "phase":
        d = n_cols // 2
        header = [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)]
    else:
        header = [f"q{i}" for i in range(n_cols)]
    with open(path, "w") as fh:
        fh.write(f"# kind={batch.kind} n={batch.n} acceptance={batch.acceptance_rate:.6f}\n")
        fh.write(f"# ensemble={batch.spec.kind}\n")
        fh.write(",".join(header) + "\n")
        for row in batch.points:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
