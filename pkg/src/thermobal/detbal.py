"""Transition-probability estimates and the detailed-balance relations.

The relations verified here, with the package-wide sign conventions
(dS_int = S(II) - S(I), <dQ> = <U>_I - <U>_II):

* ratio identity:       pi(II->I) / pi(I->II) = measure(P_I) / measure(P_II)
  on the energy shell, a consequence of time-reversal symmetry plus
  measure preservation alone;
* entropy equality:     ln(Z_I / Z_II) = -dS_int - beta <dQ>;
* nested-average chain: <F>_II = <exp G>_{I->II} = Z_I / Z_II, with
  G = ln|R_I| - ln|R_II| - beta (U(X_I|Y) - U(X_II|Y)), inner average
  uniform on R_I, outer average restricted-Gibbs on R_II;
* Jensen gap:           <exp G> - exp<G> >= 0, zero only for constant G;
* growth bound inputs:  beta <dQ> + ln(pi_rev / pi_fwd) + dS_int >= 0, and
  its variant with a justified overestimate pi* of the unobservable exact
  reverse probability, which must never undershoot the true value.

Estimates carry confidence intervals and checks pass only when the
identity holds within the propagated intervals; verdicts are pass, fail,
or inconclusive (too little data is never a pass).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import IntegratorSpec, evolve_batch
from .errors import (
    ContractViolation,
    InsufficientDataError,
    MixingGuardError,
    OverestimateContractError,
    UndefinedRatioError,
)
from .model import ConditioningContext, potential_energy
from .regions import Macrostate
from .rng import derive_seed, stream
from .sampling import (
    EnsembleSpec,
    SamplerConfig,
    partition_function_quadrature,
    sample_canonical,
    sample_microcanonical,
    volume_ratio_on_shell,
)
from .states import (
    _as_macrostate,
    delta_s_int,
    entropy,
    macrostate_log_volume,
    mean_heat_released,
    restricted_partition_function,
)
from .stats import Interval, batch_means_se, wilson_interval

__all__ = [
    "TransitionEstimate",
    "BoundReport",
    "ComparisonReport",
    "FAverages",
    "estimate_transition",
    "verify_ratio_identity",
    "asymmetric_average_F",
    "jensen_gap",
    "gap_from_log_samples",
    "verify_entropy_equality",
    "check_england_bound",
    "check_ruelle_bound",
    "mixing_diagnostic",
    "reversal_witness_fraction",
]

Z95 = 1.959963984540054


@dataclass
class TransitionEstimate:
    from_label: str
    to_label: str
    tau: float
    n_trajectories: int
    n_hits: int
    n_escaped: int
    n_drift_excluded: int
    pi_hat: float
    ci: Interval
    lambda_diagnostic: float
    invalid_flags: dict

    @property
    def n_effective(self):
        return self.n_trajectories - self.n_drift_excluded - self.n_escaped


@dataclass
class BoundReport:
    """One evaluated relation: lhs versus rhs with slack and a verdict."""

    relation: str  # "eq1" | "eq3" | "eq6_equality"
    lhs: float
    rhs: float
    slack: float
    satisfied: bool
    verdict: str  # "pass" | "fail" | "inconclusive"
    inputs: dict
    lhs_interval: tuple = None
    rhs_interval: tuple = None

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, default=float)


@dataclass
class ComparisonReport:
    """Two independently estimated sides of an identity, with intervals."""

    relation: str
    lhs: float
    rhs: float
    lhs_interval: tuple
    rhs_interval: tuple
    verdict: str
    details: dict

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, default=float)


def estimate_transition(model, ctx, spec: EnsembleSpec, to, tau, integ: IntegratorSpec,
                        cfg: SamplerConfig, y=None, compute_mixing=True,
                        min_arrivals=30) -> TransitionEstimate:
    """Fraction of shell-restricted starts that land in ``to`` after tau.

    Initial conditions come from the microcanonical ensemble restricted to
    spec.restriction (the from-macrostate).  Trajectories whose energy
    drift exceeds the integrator threshold are excluded and counted, as are
    escapes (ends in neither macrostate); both reduce the effective sample
    size, never silently.  The per-direction sampler stream is derived from
    (seed, from-label) so estimating a macrostate against itself reuses
    identical draws and yields an exactly consistent ratio.
    """
    if spec.kind != "microcanonical" or spec.restriction is None:
        raise ContractViolation("need a microcanonical spec restricted to the from-state")
    from_m = _as_macrostate(spec.restriction)
    to_m = _as_macrostate(to)
    run_cfg = replace(cfg, seed=derive_seed(cfg.seed, "transition", from_m.label))
    batch = sample_microcanonical(model, ctx, spec, run_cfg, y)
    dim = model.dim
    Q0 = batch.positions(dim)
    P0 = batch.momenta(dim)
    Qf, Pf, drift, _, _ = evolve_batch(model, ctx, y, Q0, P0, tau, integ)
    scale = max(abs(spec.energy), 1e-12)
    valid = drift <= integ.drift_threshold * scale
    in_to = to_m.contains(Qf)
    in_from = from_m.contains(Qf)
    hits = int(np.sum(valid & in_to))
    escaped = int(np.sum(valid & ~in_to & ~in_from))
    n_drift = int(np.sum(~valid))
    denom = Q0.shape[0] - n_drift - escaped
    if denom <= 0:
        raise InsufficientDataError("no valid trajectories")
    pi_hat = hits / denom
    ci = _transition_ci(pi_hat, hits, denom, valid & in_to, valid & ~(~in_to & ~in_from),
                        batch.chain_ids)
    lam = math.nan
    if compute_mixing and hits >= min_arrivals:
        ref_cfg = replace(
            cfg,
            seed=derive_seed(cfg.seed, "mixing-ref", to_m.label),
            n_samples=min(cfg.n_samples, 4000),
        )
        ref_spec = EnsembleSpec.microcanonical(spec.energy, spec.shell_width, restriction=to_m)
        ref = sample_microcanonical(model, ctx, ref_spec, ref_cfg, y)
        lam = mixing_diagnostic(Qf[valid & in_to][:, 0], ref.positions(dim)[:, 0], to_m)
    return TransitionEstimate(
        from_label=from_m.label,
        to_label=to_m.label,
        tau=tau,
        n_trajectories=Q0.shape[0],
        n_hits=hits,
        n_escaped=escaped,
        n_drift_excluded=n_drift,
        pi_hat=pi_hat,
        ci=ci,
        lambda_diagnostic=lam,
        invalid_flags={
            "drift_threshold": integ.drift_threshold,
            "n_drift_excluded": n_drift,
            "n_escaped": escaped,
        },
    )


def _transition_ci(pi_hat, hits, denom, hit_mask, counted_mask, chain_ids) -> Interval:
    """95% interval for the hit fraction, honest about chain correlation.

    Initial conditions from one Markov chain are autocorrelated, so the
    plain binomial width can be too tight; the interval is therefore never
    narrower than the across-chain spread of per-chain hit fractions.
    """
    half = wilson_interval(hits, denom).half_width
    if chain_ids is not None:
        fractions = []
        for c in np.unique(chain_ids):
            sel = (chain_ids == c) & counted_mask
            if np.sum(sel) > 0:
                fractions.append(float(np.mean(hit_mask[sel])))
        if len(fractions) >= 3:
            se = float(np.std(fractions, ddof=1) / math.sqrt(len(fractions)))
            half = max(half, Z95 * se)
    return Interval(max(0.0, pi_hat - half), min(1.0, pi_hat + half))


def mixing_diagnostic(arrivals, reference, macrostate=None, bins=20) -> float:
    """Normalized L1 (total-variation) distance between arrival and
    reference histograms of the reaction coordinate, in [0, 1].

    Small distance certifies that trajectories entering the target state
    spread over it like its restricted equilibrium ensemble, i.e. that the
    equilibration time is short compared with the transition time.
    """
    arrivals = np.asarray(arrivals, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if arrivals.size < 30:
        raise InsufficientDataError(
            f"only {arrivals.size} arrivals; need >= 30 for a conclusive distance"
        )
    if macrostate is not None:
        lo, hi = _as_macrostate(macrostate).bounding_interval()
    else:
        lo = float(min(arrivals.min(), reference.min()))
        hi = float(max(arrivals.max(), reference.max()))
    if not (math.isfinite(lo) and math.isfinite(hi)):
        lo, hi = float(reference.min()), float(reference.max())
    edges = np.linspace(lo, hi, bins + 1)
    pa, _ = np.histogram(arrivals, bins=edges)
    pr, _ = np.histogram(reference, bins=edges)
    pa = pa / max(1, pa.sum())
    pr = pr / max(1, pr.sum())
    return float(0.5 * np.sum(np.abs(pa - pr)))


def verify_ratio_identity(model, ctx, energy, shell_width, m_i, m_ii, tau,
                          integ: IntegratorSpec, cfg: SamplerConfig,
                          min_crossings=100, y=None) -> ComparisonReport:
    """Compare pi(II->I)/pi(I->II) against the shell-volume ratio.

    Both sides are estimated from data: the transition ratio from two
    trajectory ensembles, the volume ratio from one mixed chain.  The
    verdict is pass when the intervals overlap, inconclusive when either
    side is statistically empty (zero hits or a starved mixing guard).
    """
    m_i = _as_macrostate(m_i)
    m_ii = _as_macrostate(m_ii)
    spec_i = EnsembleSpec.microcanonical(energy, shell_width, restriction=m_i)
    spec_ii = EnsembleSpec.microcanonical(energy, shell_width, restriction=m_ii)
    fwd = estimate_transition(model, ctx, spec_i, m_ii, tau, integ, cfg, y)
    rev = estimate_transition(model, ctx, spec_ii, m_i, tau, integ, cfg, y)
    details = {
        "pi_fwd": fwd.pi_hat, "pi_fwd_ci": (fwd.ci.lo, fwd.ci.hi),
        "pi_rev": rev.pi_hat, "pi_rev_ci": (rev.ci.lo, rev.ci.hi),
        "lambda_fwd": fwd.lambda_diagnostic, "lambda_rev": rev.lambda_diagnostic,
        "n_escaped": fwd.n_escaped + rev.n_escaped,
        "n_drift_excluded": fwd.n_drift_excluded + rev.n_drift_excluded,
    }
    shell = EnsembleSpec.microcanonical(energy, shell_width)
    try:
        vol = volume_ratio_on_shell(model, ctx, shell, m_i, m_ii, cfg,
                                    min_crossings=min_crossings, y=y)
    except MixingGuardError as err:
        details["mixing_guard"] = str(err)
        return ComparisonReport("ratio_identity", math.nan, math.nan,
                                (math.nan, math.nan), (math.nan, math.nan),
                                "inconclusive", details)
    details["volume_crossings"] = vol.crossings
    if fwd.n_hits == 0 or rev.n_hits == 0:
        details["zero_hits"] = True
        return ComparisonReport("ratio_identity", math.nan, vol.ratio,
                                (math.nan, math.nan), (vol.interval.lo, vol.interval.hi),
                                "inconclusive", details)
    pi_ratio = rev.pi_hat / fwd.pi_hat
    ratio_iv = rev.ci / fwd.ci
    verdict = "pass" if ratio_iv.overlaps(vol.interval) else "fail"
    return ComparisonReport(
        "ratio_identity",
        lhs=pi_ratio,
        rhs=vol.ratio,
        lhs_interval=(ratio_iv.lo, ratio_iv.hi),
        rhs_interval=(vol.interval.lo, vol.interval.hi),
        verdict=verdict,
        details=details,
    )


@dataclass
class FAverages:
    """Monte-Carlo values of the nested averages over I -> II."""

    f_mean: float              # <exp G>, equal to Z_I / Z_II in expectation
    f_interval: Interval
    exp_mean_g: float          # exp(<G>)
    exp_mean_g_interval: Interval
    mean_g: float
    dq_asym: float             # <U(X_I|Y) - U(X_II|Y)> under the nested average
    log_volume_ratio: float    # ln |R_I| - ln |R_II|
    n_inner: int
    n_outer: int


def asymmetric_average_F(model, ctx, beta, m_i, m_ii, cfg: SamplerConfig,
                         n_inner=20_000) -> FAverages:
    """Nested Monte-Carlo averages: inner uniform on R_I, outer Gibbs on R_II.

    G(X_I, X_II, Y) = ln|R_I| - ln|R_II| - beta (U(X_I|Y) - U(X_II|Y)); the
    exponential factorizes, so the inner and outer means are computed
    separately and combined, with delta-method confidence intervals (batch
    means on the Markov-chain side).  Boundary terms are weighted by
    w_Y Z_Y(II), which is exactly the weight the restricted Gibbs ensemble
    of II assigns them.
    """
    if model.bath:
        raise ContractViolation("nested averages are defined for bath-free models here")
    m_i = _as_macrostate(m_i)
    m_ii = _as_macrostate(m_ii)
    ctx = ctx or ConditioningContext.trivial()
    log_vol = macrostate_log_volume(m_i) - macrostate_log_volume(m_ii)
    widths = np.array([r.width for r in m_i.substates])
    w_cum = np.cumsum(widths) / widths.sum()

    y_weight = {}
    for term in ctx.terms:
        zy, _ = restricted_partition_function(
            model, ConditioningContext((replace(term, weight=1.0),)), beta, m_ii
        )
        y_weight[term.label] = term.weight * zy
    total_w = sum(y_weight.values())

    f_vals, f_vars = [], []
    g_vals, g_vars = [], []
    dq_vals = []
    n_outer_total = 0
    for term in ctx.terms:
        w = y_weight[term.label] / total_w
        g_in = stream(cfg.seed, "inner-uniform", term.label)
        picks = np.searchsorted(w_cum, g_in.random(n_inner), side="right")
        lo = np.array([r.lower for r in m_i.substates])[picks]
        hi = np.array([r.upper for r in m_i.substates])[picks]
        q_i = lo + (hi - lo) * g_in.random(n_inner)
        u_i = _potential_1d(model, ctx, term.label, q_i)
        a = np.exp(-beta * u_i)
        a_mean = float(np.mean(a))
        a_se = float(np.std(a) / math.sqrt(n_inner))

        outer_cfg = replace(cfg, seed=derive_seed(cfg.seed, "outer-gibbs", term.label))
        spec = EnsembleSpec.canonical(beta, restriction=m_ii)
        batch = sample_canonical(model, ctx, spec, outer_cfg, term.label)
        q_ii = batch.points[:, 0]
        u_ii = _potential_1d(model, ctx, term.label, q_ii)
        b = np.exp(beta * u_ii)
        b_mean = float(np.mean(b))
        b_se = batch_means_se(b)

        c = math.exp(log_vol)
        f_y = c * a_mean * b_mean
        f_se = f_y * math.sqrt((a_se / a_mean) ** 2 + (b_se / b_mean) ** 2)
        u_i_mean = float(np.mean(u_i))
        u_ii_mean = float(np.mean(u_ii))
        g_y = log_vol - beta * (u_i_mean - u_ii_mean)
        g_se = beta * math.sqrt(
            (float(np.std(u_i)) / math.sqrt(n_inner)) ** 2 + batch_means_se(u_ii) ** 2
        )
        f_vals.append(w * f_y)
        f_vars.append((w * f_se) ** 2)
        g_vals.append(w * g_y)
        g_vars.append((w * g_se) ** 2)
        dq_vals.append(w * (u_i_mean - u_ii_mean))
        n_outer_total += batch.n

    f_mean = float(sum(f_vals))
    f_half = Z95 * math.sqrt(sum(f_vars))
    mean_g = float(sum(g_vals))
    g_half = Z95 * math.sqrt(sum(g_vars))
    return FAverages(
        f_mean=f_mean,
        f_interval=Interval(f_mean - f_half, f_mean + f_half),
        exp_mean_g=math.exp(mean_g),
        exp_mean_g_interval=Interval(math.exp(mean_g - g_half), math.exp(mean_g + g_half)),
        mean_g=mean_g,
        dq_asym=float(sum(dq_vals)),
        log_volume_ratio=log_vol,
        n_inner=n_inner,
        n_outer=n_outer_total,
    )


def _potential_1d(model, ctx, y, q):
    return potential_energy(model, np.asarray(q, dtype=float)[:, None], ctx, y)


def jensen_gap(model, ctx, beta, m_i, m_ii, cfg: SamplerConfig, n_inner=20_000):
    """<exp G> - exp<G> with a conservative interval; nonnegative in
    expectation, zero only when G is almost surely constant."""
    fa = asymmetric_average_F(model, ctx, beta, m_i, m_ii, cfg, n_inner)
    gap = fa.f_mean - fa.exp_mean_g
    iv = fa.f_interval - fa.exp_mean_g_interval
    return gap, iv, fa


def gap_from_log_samples(g, weights=None):
    """Jensen gap of raw G samples (synthetic-injection oracle path)."""
    g = np.asarray(g, dtype=float)
    if weights is None:
        weights = np.full(g.size, 1.0 / g.size)
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    return float(np.sum(weights * np.exp(g)) - math.exp(np.sum(weights * g)))


def verify_entropy_equality(model, ctx, beta, m_i, m_ii, tol=1e-8) -> BoundReport:
    """Check ln(Z_I/Z_II) = -dS_int - beta <dQ> on the quadrature path."""
    z_i, ez_i = restricted_partition_function(model, ctx, beta, m_i)
    z_ii, ez_ii = restricted_partition_function(model, ctx, beta, m_ii)
    lhs = math.log(z_i) - math.log(z_ii)
    ds, ds_err = delta_s_int(model, ctx, beta, m_i, m_ii)
    dq, dq_err = mean_heat_released(model, ctx, beta, m_i, m_ii)
    rhs = -ds - beta * dq
    slack = lhs - rhs
    err = ez_i / z_i + ez_ii / z_ii + ds_err + beta * dq_err
    satisfied = abs(slack) <= tol + err
    return BoundReport(
        relation="eq6_equality",
        lhs=lhs,
        rhs=rhs,
        slack=slack,
        satisfied=satisfied,
        verdict="pass" if satisfied else "fail",
        inputs={
            "beta": beta, "Z_I": z_i, "Z_II": z_ii,
            "dS_int": ds, "mean_dQ": dq, "tolerance": tol, "propagated_error": err,
        },
        lhs_interval=(lhs - ez_i / z_i - ez_ii / z_ii, lhs + ez_i / z_i + ez_ii / z_ii),
        rhs_interval=(rhs - ds_err - beta * dq_err, rhs + ds_err + beta * dq_err),
    )


def check_england_bound(beta, mean_dq, ds_int, pi_fwd, pi_rev, tol=1e-9) -> BoundReport:
    """beta <dQ>_{I->II} + ln(pi_rev/pi_fwd) + dS_int >= 0."""
    for name, val in (("pi_fwd", pi_fwd), ("pi_rev", pi_rev)):
        if not (0.0 <= val <= 1.0) or not math.isfinite(val):
            raise ContractViolation(f"{name} must lie in [0, 1], got {val}")
    if pi_fwd == 0.0:
        raise UndefinedRatioError("pi_fwd is zero; the ratio in the bound is undefined")
    if pi_rev == 0.0:
        raise UndefinedRatioError("pi_rev is zero; the log-ratio diverges")
    lhs = beta * mean_dq + math.log(pi_rev / pi_fwd) + ds_int
    satisfied = lhs >= -tol
    return BoundReport(
        relation="eq1",
        lhs=lhs,
        rhs=0.0,
        slack=lhs,
        satisfied=satisfied,
        verdict="pass" if satisfied else "fail",
        inputs={
            "beta": beta, "mean_dq": mean_dq, "ds_int": ds_int,
            "pi_fwd": pi_fwd, "pi_rev": pi_rev, "tolerance": tol,
        },
    )


def check_ruelle_bound(beta, mean_dq, ds_int, pi_fwd, pi_star_rev,
                       pi_rev_true=None, tol=1e-9) -> BoundReport:
    """The pi* variant: overestimates of the unobservable reverse probability.

    pi_star_rev must never undershoot a supplied true reverse probability;
    that overestimate contract is the bound's validity condition, so a
    violation raises instead of reporting.
    """
    if not math.isfinite(pi_star_rev) or pi_star_rev < 0:
        raise ContractViolation(f"pi_star_rev must be >= 0, got {pi_star_rev}")
    if pi_fwd <= 0.0:
        raise UndefinedRatioError("pi_fwd must be positive")
    if pi_star_rev == 0.0:
        raise UndefinedRatioError("pi_star_rev is zero; the log-ratio diverges")
    margin = None
    if pi_rev_true is not None:
        if pi_star_rev < pi_rev_true:
            raise OverestimateContractError(
                f"pi_star_rev={pi_star_rev} undershoots the true reverse "
                f"probability {pi_rev_true}"
            )
        margin = math.log(pi_star_rev / pi_rev_true)
    lhs = beta * mean_dq + math.log(pi_star_rev / pi_fwd) + ds_int
    satisfied = lhs >= -tol
    return BoundReport(
        relation="eq3",
        lhs=lhs,
        rhs=0.0,
        slack=lhs,
        satisfied=satisfied,
        verdict="pass" if satisfied else "fail",
        inputs={
            "beta": beta, "mean_dq": mean_dq, "ds_int": ds_int,
            "pi_fwd": pi_fwd, "pi_star_rev": pi_star_rev,
            "pi_rev_true": pi_rev_true, "overestimate_margin": margin,
            "tolerance": tol,
        },
    )


def reversal_witness_fraction(model, ctx, y, Qf, Pf, from_m, tau,
                              integ: IntegratorSpec) -> float:
    """Fraction of momentum-flipped endpoints that return to the from-state.

    A per-sample witness of the time-reversal argument: each trajectory
    counted as I -> II must, run backwards, realize II -> I.
    """
    from_m = _as_macrostate(from_m)
    Qb, Pb, _, _, _ = evolve_batch(model, ctx, y, Qf, -np.asarray(Pf), tau, integ)
    back = from_m.contains(Qb)
    return float(np.mean(back))
