import numpy as np
import pytest

from thermobal.errors import ContractViolation, UnknownLabelError
from thermobal.model import (
    BathMode,
    BoundaryTerm,
    ConditioningContext,
    DoubleWell,
    FlatWells,
    HamiltonianModel,
    Harmonic,
    PhasePoint,
    Piecewise,
    gradient,
    kinetic_energy,
    potential_energy,
    time_reverse,
    total_energy,
)


def harmonic_model(k=1.0, q0=0.0, bath=()):
    return HamiltonianModel(reaction_potential=Harmonic(k=k, q0=q0), bath=bath)


def test_harmonic_potential_value():
    # 0.5 * 1 * 2^2 = 2
    m = harmonic_model(k=1.0)
    assert potential_energy(m, np.array([2.0])) == pytest.approx(2.0, abs=1e-14)


def test_double_well_values():
    m = HamiltonianModel(reaction_potential=DoubleWell(a=1.0, b=2.0, c=0.0))
    assert potential_energy(m, np.array([0.0])) == 0.0
    # hand check: 1*1 - 2*1 + 0 = -1 at q = 1
    assert potential_energy(m, np.array([1.0])) == pytest.approx(-1.0, abs=1e-14)


def test_double_well_rejects_overtilt():
    with pytest.raises(ContractViolation):
        DoubleWell(a=1.0, b=1.0, c=10.0)


def test_kinetic_only():
    m = harmonic_model(k=1.0)
    s = PhasePoint(np.array([0.0]), np.array([1.0]))
    assert total_energy(m, s) == pytest.approx(0.5, abs=1e-15)


def test_total_equals_potential_at_zero_momentum():
    m = HamiltonianModel(
        reaction_potential=DoubleWell(a=1.0, b=2.0, c=0.1),
        bath=(BathMode(1.3, 0.4), BathMode(0.7, 0.2)),
    )
    q = np.array([0.7, -0.3, 1.1])
    s = PhasePoint(q, np.zeros(3))
    assert total_energy(m, s) == potential_energy(m, q)


def test_energy_additivity_zero_coupling():
    # with all couplings zero the model separates into independent subsystems
    bath = (BathMode(1.5, 0.0), BathMode(0.5, 0.0))
    m = HamiltonianModel(reaction_potential=Harmonic(k=2.0), bath=bath)
    q = np.array([0.4, 1.2, -0.8])
    p = np.array([0.3, -0.1, 0.9])
    total = total_energy(m, PhasePoint(q, p))
    reaction = 0.5 * 2.0 * q[0] ** 2 + 0.5 * p[0] ** 2
    osc = sum(
        0.5 * p[i + 1] ** 2 + 0.5 * b.frequency**2 * q[i + 1] ** 2
        for i, b in enumerate(bath)
    )
    assert total == pytest.approx(reaction + osc, abs=1e-12)


def test_time_reverse_definition_and_involution():
    s = PhasePoint(np.array([1.0, 2.0]), np.array([3.0, -4.0]))
    r = time_reverse(s)
    assert np.array_equal(r.q, [1.0, 2.0])
    assert np.array_equal(r.p, [-3.0, 4.0])
    rr = time_reverse(r)
    assert np.array_equal(rr.p, s.p)
    # zero momentum is a fixed point
    z = PhasePoint(np.array([1.0]), np.array([0.0]))
    assert time_reverse(z).p[0] == 0.0


def test_energy_invariant_under_time_reversal_bitwise():
    m = HamiltonianModel(
        reaction_potential=DoubleWell(a=1.0, b=2.0, c=0.05),
        bath=(BathMode(1.3, 0.4), BathMode(0.7, 0.2), BathMode(1.9, 0.3)),
    )
    rng = np.random.default_rng(7)
    for _ in range(50):
        s = PhasePoint(rng.normal(size=4), rng.normal(size=4))
        assert total_energy(m, s) == total_energy(m, time_reverse(s))


@pytest.mark.parametrize(
    "pot",
    [
        Harmonic(k=1.7, q0=0.3),
        DoubleWell(a=1.0, b=2.0, c=0.2),
        Piecewise(breaks=(0.0,), pieces=(Harmonic(k=4.0, q0=-2.0), Harmonic(k=1.0, q0=2.0))),
    ],
)
def test_gradient_matches_finite_differences(pot):
    m = HamiltonianModel(reaction_potential=pot, bath=(BathMode(1.2, 0.5),))
    ctx = ConditioningContext(
        terms=(BoundaryTerm("a", 0.5, offset=0.2, tilt=0.3), BoundaryTerm("b", 0.5, tilt=-0.1))
    )
    rng = np.random.default_rng(11)
    h = 1e-5
    for _ in range(10):
        q = rng.uniform(-1.5, 1.5, size=2)
        if isinstance(pot, Piecewise) and abs(q[0]) < 0.1:
            q[0] += 0.5  # keep clear of the breakpoint
        g = gradient(m, q, ctx, "a")
        for i in range(2):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            fd = (potential_energy(m, qp, ctx, "a") - potential_energy(m, qm, ctx, "a")) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_flat_wells_energy_and_bounds():
    w = FlatWells(wells=((0.0, 2.0, 0.0), (2.0, 3.0, 1.0)))
    assert w.energy(1.0) == 0.0
    assert w.energy(2.5) == 1.0
    assert w.energy(5.0) == np.inf
    with pytest.raises(ContractViolation):
        FlatWells(wells=((0.0, 2.0, 0.0), (1.0, 3.0, 0.0)))  # overlap


def test_context_weights_and_lookup():
    with pytest.raises(ContractViolation):
        ConditioningContext(terms=(BoundaryTerm("a", 0.5),))  # weights must sum to 1
    ctx = ConditioningContext(terms=(BoundaryTerm("a", 0.25), BoundaryTerm("b", 0.75)))
    assert ctx.term("b").weight == 0.75
    with pytest.raises(UnknownLabelError):
        ctx.term("missing")
    with pytest.raises(ContractViolation):
        ctx.term(None)  # ambiguous without a label
    m = harmonic_model()
    with pytest.raises(UnknownLabelError):
        potential_energy(m, np.array([1.0]), ctx, "nope")


def test_dimension_mismatch_rejected():
    m = harmonic_model(bath=(BathMode(1.0, 0.1),))
    with pytest.raises(ContractViolation):
        potential_energy(m, np.array([1.0]))
    with pytest.raises(ContractViolation):
        kinetic_energy(m, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ContractViolation):
        PhasePoint(np.array([1.0]), np.array([1.0, 2.0]))


def test_phase_point_immutable_and_finite():
    s = PhasePoint(np.array([1.0]), np.array([2.0]))
    with pytest.raises(ValueError):
        s.q[0] = 5.0
    with pytest.raises(ContractViolation):
        PhasePoint(np.array([np.nan]), np.array([0.0]))


def test_batched_energy_matches_loop():
    m = HamiltonianModel(
        reaction_potential=DoubleWell(a=1.0, b=2.0, c=0.0),
        bath=(BathMode(1.1, 0.3),),
    )
    rng = np.random.default_rng(3)
    Q = rng.normal(size=(6, 2))
    batch = potential_energy(m, Q)
    single = np.array([potential_energy(m, Q[i]) for i in range(6)])
    assert np.array_equal(batch, single)
