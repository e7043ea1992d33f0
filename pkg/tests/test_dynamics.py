import numpy as np
import pytest

from thermobal.dynamics import IntegratorSpec, Trajectory, evolve, evolve_batch, reversibility_check
from thermobal.errors import ContractViolation
from thermobal.model import (
    BathMode,
    DoubleWell,
    FlatWells,
    HamiltonianModel,
    Harmonic,
    PhasePoint,
    time_reverse,
    total_energy,
)

HARMONIC = HamiltonianModel(reaction_potential=Harmonic(k=1.0))
CHAOTIC = HamiltonianModel(
    reaction_potential=DoubleWell(a=1.0, b=2.0, c=0.0),
    bath=(BathMode(1.3, 0.4), BathMode(0.7, 0.25)),
)


def test_harmonic_period_closed_form():
    # unit mass, k = 1: q(t) = cos t, so one period returns to (1, 0)
    s = PhasePoint(np.array([1.0]), np.array([0.0]))
    traj = evolve(HARMONIC, None, None, s, 2 * np.pi, IntegratorSpec(dt=1e-3))
    assert traj.final.q[0] == pytest.approx(1.0, abs=1e-5)
    assert traj.final.p[0] == pytest.approx(0.0, abs=1e-5)


def test_zero_duration_is_identity():
    s = PhasePoint(np.array([0.3]), np.array([-0.7]))
    traj = evolve(HARMONIC, None, None, s, 0.0, IntegratorSpec(dt=1e-3))
    assert traj.final is s
    assert traj.energy_drift == 0.0


def test_energy_drift_small_and_scales_like_dt_squared():
    s = PhasePoint(np.array([1.0, 0.05, -0.1]), np.array([0.15, 0.2, 0.1]))
    h0 = abs(total_energy(CHAOTIC, s))
    drift = {}
    for dt in (1e-3, 5e-4):
        traj = evolve(CHAOTIC, None, None, s, 10.0, IntegratorSpec(dt=dt))
        drift[dt] = traj.energy_drift
    assert drift[1e-3] <= 1e-6 * h0 + 1e-10
    ratio = drift[1e-3] / drift[5e-4]
    assert 2.5 < ratio < 6.0  # second-order scheme: ~4x


def test_reversibility_harmonic():
    s = PhasePoint(np.array([0.9]), np.array([0.4]))
    dev = reversibility_check(HARMONIC, None, None, s, 5.0, IntegratorSpec(dt=1e-3))
    assert dev <= 1e-10


def test_reversibility_zero_tau():
    s = PhasePoint(np.array([0.9]), np.array([0.4]))
    assert reversibility_check(HARMONIC, None, None, s, 0.0, IntegratorSpec(dt=1e-3)) == 0.0


def test_reversibility_chaotic_bath():
    # tolerance frozen after the dt-halving study in test_acceptance:
    # roundoff amplified by Lyapunov growth stays below 1e-6 at tau = 20
    s = PhasePoint(np.array([1.1, 0.2, -0.3]), np.array([0.1, -0.2, 0.4]))
    dev = reversibility_check(CHAOTIC, None, None, s, 20.0, IntegratorSpec(dt=1e-3))
    assert dev <= 1e-6


def test_single_step_reversibility_tight():
    # one step forward, flip, one step, flip: back to start within ~10 ulp
    s = PhasePoint(np.array([0.3, -0.2, 0.8]), np.array([0.4, 0.1, -0.5]))
    integ = IntegratorSpec(dt=1e-2)
    dev = reversibility_check(CHAOTIC, None, None, s, 1e-2, integ)
    scale = max(np.max(np.abs(s.q)), np.max(np.abs(s.p)))
    assert dev <= 10 * np.finfo(float).eps * max(1.0, scale)


def test_composition_exact_on_step_multiples():
    s = PhasePoint(np.array([0.5, 0.2, -0.1]), np.array([-0.3, 0.6, 0.2]))
    integ = IntegratorSpec(dt=1e-3)
    one = evolve(CHAOTIC, None, None, s, 3.0, integ)
    two_a = evolve(CHAOTIC, None, None, s, 1.0, integ)
    two_b = evolve(CHAOTIC, None, None, two_a.final, 2.0, integ)
    assert np.array_equal(one.final.q, two_b.final.q)
    assert np.array_equal(one.final.p, two_b.final.p)


def test_non_multiple_tau_uses_closing_step():
    s = PhasePoint(np.array([1.0]), np.array([0.0]))
    traj = evolve(HARMONIC, None, None, s, 0.10049, IntegratorSpec(dt=1e-3))
    assert traj.n_steps == 101  # 100 full steps plus a 0.00049 closing step
    assert traj.duration == pytest.approx(0.10049, abs=1e-15)
    assert traj.snap == 0.0
    # endpoint matches the closed form at the requested duration
    assert traj.final.q[0] == pytest.approx(np.cos(0.10049), abs=1e-7)


def test_no_secular_drift_short():
    # symplectic check at reduced length; the full 1e6-step run is in acceptance
    s = PhasePoint(np.array([1.0]), np.array([0.0]))
    traj = evolve(
        HARMONIC, None, None, s, 100.0, IntegratorSpec(dt=1e-2), record_interval=100
    )
    _, _, h = traj.samples
    early = np.max(np.abs(h[: len(h) // 2] - h[0]))
    late = np.max(np.abs(h[len(h) // 2:] - h[0]))
    assert late <= 2.0 * max(early, 1e-12)


def test_batch_matches_single():
    rng = np.random.default_rng(5)
    Q = rng.normal(size=(4, 3))
    P = rng.normal(size=(4, 3))
    integ = IntegratorSpec(dt=2e-3)
    Qf, Pf, drift, n_steps, snap = evolve_batch(CHAOTIC, None, None, Q, P, 2.0, integ)
    for i in range(4):
        traj = evolve(CHAOTIC, None, None, PhasePoint(Q[i], P[i]), 2.0, integ)
        assert np.array_equal(Qf[i], traj.final.q)
        assert np.array_equal(Pf[i], traj.final.p)


def test_blowup_reports_step():
    # inverted potential: run long enough to overflow
    inverted = HamiltonianModel(reaction_potential=DoubleWell(a=1e-12, b=50.0, c=0.0))
    s = PhasePoint(np.array([1.0]), np.array([10.0]))
    from thermobal.errors import IntegrationBlowUpError

    with pytest.raises(IntegrationBlowUpError) as err:
        evolve(inverted, None, None, s, 500.0, IntegratorSpec(dt=0.5))
    assert err.value.step > 0


# --- exact flow in flat wells -------------------------------------------------

TWO_WELLS = HamiltonianModel(
    reaction_potential=FlatWells(wells=((0.0, 2.0, 0.0), (2.0, 3.0, 0.0)))
)
STEP_WELLS = HamiltonianModel(
    reaction_potential=FlatWells(wells=((0.0, 2.0, 0.0), (2.0, 3.0, 0.3)))
)


def test_flat_flow_free_flight_and_reflection():
    integ = IntegratorSpec(dt=1e-3)
    s = PhasePoint(np.array([1.0]), np.array([1.0]))
    # travels to the wall at 3, reflects, comes back: q(t) folds
    traj = evolve(TWO_WELLS, None, None, s, 3.0, integ)
    assert traj.scheme == "exact-flat"
    assert traj.final.q[0] == pytest.approx(2.0, abs=1e-12)  # 1 + 3 folded: 4 -> 2
    assert traj.final.p[0] == pytest.approx(-1.0, abs=1e-12)
    assert traj.energy_drift == 0.0


def test_flat_flow_step_transmission():
    # kinetic energy 0.5 > step 0.3: transmit with p' = sqrt(p^2 - 2*0.3)
    s = PhasePoint(np.array([1.5]), np.array([1.0]))
    traj = evolve(STEP_WELLS, None, None, s, 0.6, IntegratorSpec(dt=1e-3))
    p_after = np.sqrt(1.0 - 0.6)
    assert traj.final.p[0] == pytest.approx(p_after, abs=1e-12)
    expected_q = 2.0 + (0.6 - 0.5) * p_after
    assert traj.final.q[0] == pytest.approx(expected_q, abs=1e-12)
    assert traj.energy_drift <= 1e-15


def test_flat_flow_step_reflection_when_too_slow():
    # kinetic energy 0.125 < step 0.3: reflect at the step
    s = PhasePoint(np.array([1.5]), np.array([0.5]))
    traj = evolve(STEP_WELLS, None, None, s, 2.0, IntegratorSpec(dt=1e-3))
    assert traj.final.q[0] == pytest.approx(1.5, abs=1e-12)  # 0.5 out, reflect, 0.5 back
    assert traj.final.p[0] == pytest.approx(-0.5, abs=1e-12)


def test_flat_flow_time_reversible():
    integ = IntegratorSpec(dt=1e-3)
    for q0, p0, tau in [(0.5, 1.3, 7.7), (1.7, -0.9, 11.2), (2.4, 0.8, 5.3)]:
        s = PhasePoint(np.array([q0]), np.array([p0]))
        dev = reversibility_check(STEP_WELLS, None, None, s, tau, integ)
        assert dev <= 1e-9


def test_flat_flow_rejects_bath():
    bad = HamiltonianModel(
        reaction_potential=FlatWells(wells=((0.0, 1.0, 0.0),)),
        bath=(BathMode(1.0, 0.0),),
    )
    s = PhasePoint(np.array([0.5, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ContractViolation):
        evolve(bad, None, None, s, 1.0, IntegratorSpec(dt=1e-3))
