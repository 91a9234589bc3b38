"""Orbit classification, cycle data, tau census, hyperbolicity certificates."""

import dataclasses

import numpy as np
import pytest

from newton_dyn.algebra import Polynomial
from newton_dyn.newton_map import INFINITY, build, critical_set, is_infinity
from newton_dyn.orbits import (
    DEEP_BUDGET,
    DEFAULT_BUDGET,
    AttractingCycle,
    ConvergedToRoot,
    LandsOnInfinity,
    OrbitBudget,
    Unresolved,
    certify_hyperbolic,
    classify,
    cycle_multiplier,
    tau,
)
from newton_dyn.errors import NotACycleError

F_CYCLE = build(Polynomial([2, -2, 0, 1]))  # z^3 - 2z + 2
F_CUBE = build(Polynomial([-1, 0, 0, 1]))  # z^3 - 1
F_PLUS = build(Polynomial([1, 0, 0, 1]))  # z^3 + 1


def test_budget_validation():
    with pytest.raises(ValueError):
        OrbitBudget(max_iter=0, eps_root=1e-9, eps_cycle=1e-9,
                    contraction_margin=0.05, chart_radius=1e8)
    with pytest.raises(ValueError):
        OrbitBudget(max_iter=10, eps_root=1e-9, eps_cycle=1e-9,
                    contraction_margin=1.5, chart_radius=1e8)


def test_classify_superattracting_two_cycle():
    # hand iteration: 0 -> 1 -> 0, multiplier f'(0) f'(1) = 0
    c = classify(F_CYCLE, 0j, DEFAULT_BUDGET)
    assert isinstance(c, AttractingCycle)
    assert c.period == 2
    assert abs(c.multiplier) < 1e-9
    assert abs(c.representative) < 1e-12  # 0 sorts before 1


def test_classify_pole_hit():
    c = classify(F_CUBE, 0j, DEFAULT_BUDGET)
    assert isinstance(c, LandsOnInfinity)
    assert c.step == 1
    c2 = classify(F_PLUS, 0j, DEFAULT_BUDGET)
    assert isinstance(c2, LandsOnInfinity)
    assert c2.step == 1


def test_classify_infinity_start():
    c = classify(F_CUBE, INFINITY, DEFAULT_BUDGET)
    assert isinstance(c, LandsOnInfinity)
    assert c.step == 0


def test_classify_real_newton_run():
    c = classify(F_CUBE, 2 + 0j, DEFAULT_BUDGET)
    assert isinstance(c, ConvergedToRoot)
    idx, dist = F_CUBE.roots.nearest(1 + 0j)
    assert dist < 1e-12
    assert c.root_index == idx


def test_classify_double_root_basin():
    pm = np.polynomial.polynomial
    p = Polynomial(pm.polymul(pm.polymul([1, -2, 1], [1, 1]), [-2, 1]))
    f = build(p)
    c = classify(f, 1.05 + 0j, DEFAULT_BUDGET)
    assert isinstance(c, ConvergedToRoot)
    idx, _ = f.roots.nearest(1 + 0j)
    assert c.root_index == idx


def test_root_basins_absorb_random_seeds():
    rng = np.random.default_rng(17)
    for f in [F_CUBE, F_CYCLE]:
        for i, a in enumerate(f.roots.locations):
            for _ in range(30):
                ang = rng.uniform(0, 2 * np.pi)
                z0 = a + (DEFAULT_BUDGET.eps_root / 2) * complex(
                    np.cos(ang), np.sin(ang)
                )
                c = classify(f, z0, DEFAULT_BUDGET)
                assert isinstance(c, ConvergedToRoot)
                assert c.root_index == i


def test_classify_deterministic():
    seeds = [0.3 + 0.7j, -1.2 + 0.1j, 2.5 - 0.4j]
    for z0 in seeds:
        a = classify(F_CYCLE, z0, DEFAULT_BUDGET)
        b = classify(F_CYCLE, z0, DEFAULT_BUDGET)
        assert a == b


def test_attracting_cycle_soundness():
    """Returned cycles stay put: 50 more steps remain within eps_cycle."""
    from newton_dyn.newton_map import apply, chordal

    c = classify(F_CYCLE, 0.01 + 0.02j, DEFAULT_BUDGET)
    if isinstance(c, AttractingCycle):
        assert abs(c.multiplier) <= 1 - DEFAULT_BUDGET.contraction_margin
        pts = [c.representative]
        for _ in range(c.period - 1):
            pts.append(apply(F_CYCLE, pts[-1]))
        z = c.representative
        for _ in range(50):
            z = apply(F_CYCLE, z)
            assert min(chordal(z, w) for w in pts) < 10 * DEFAULT_BUDGET.eps_cycle


def test_unresolved_tiny_budget():
    b = dataclasses.replace(DEFAULT_BUDGET, max_iter=2)
    c = classify(F_CYCLE, 0.31 + 0.77j, b)
    if isinstance(c, Unresolved):
        assert c.reason in {"slow_or_none", "suspected_parabolic", "suspected_julia"}


def test_cycle_multiplier_values():
    lam = cycle_multiplier(F_CYCLE, [0j, 1 + 0j])
    assert abs(lam) < 1e-12
    root = F_CUBE.roots.locations[0]
    assert abs(cycle_multiplier(F_CUBE, [root])) < 1e-10
    assert abs(cycle_multiplier(F_CUBE, [INFINITY]) - 1.5) < 1e-14
    with pytest.raises(NotACycleError):
        cycle_multiplier(F_CYCLE, [0j, 0.5 + 0j])
    with pytest.raises(NotACycleError):
        cycle_multiplier(F_CYCLE, [0j, 0j])


def test_tau_values():
    assert tau(F_CYCLE, DEFAULT_BUDGET) == 4
    assert tau(F_CUBE, DEFAULT_BUDGET) == 3
    assert tau(F_PLUS, DEFAULT_BUDGET) == 3


def test_tau_budget_monotone():
    f = build(Polynomial([1, 1, 0, 1]))  # z^3 + z + 1
    taus = []
    for n in [1, 5, 50, DEFAULT_BUDGET.max_iter]:
        b = dataclasses.replace(DEFAULT_BUDGET, max_iter=n)
        taus.append(tau(f, b))
    assert taus == sorted(taus)
    assert taus[-1] == 4


def test_certify_classic_two_cycle():
    cert = certify_hyperbolic(F_CYCLE, DEFAULT_BUDGET)
    assert cert.is_certified
    assert cert.tau == 4
    assert len(cert.per_critical) == 4
    kinds = {type(c).__name__ for _, c in cert.per_critical}
    assert "AttractingCycle" in kinds  # the flex at 0 falls into {0,1}
    assert "ConvergedToRoot" in kinds


def test_certify_pole_map_not_certified():
    cert = certify_hyperbolic(F_CUBE, DEFAULT_BUDGET)
    assert not cert.is_certified
    assert cert.tau == 3
    excluded = [
        cp for cp, c in cert.per_critical if not isinstance(c, (ConvergedToRoot, AttractingCycle))
    ]
    assert len(excluded) == 1
    assert abs(excluded[0].location) < 1e-12
    assert isinstance(
        [c for cp, c in cert.per_critical if abs(cp.location) < 1e-12][0],
        LandsOnInfinity,
    )


def test_certify_flex_enters_root_basin():
    # free critical point 0 of z^3 + 0.5 z + 1 reaches a root basin
    f = build(Polynomial([1, 0.5, 0, 1]))
    cert = certify_hyperbolic(f, DEFAULT_BUDGET)
    assert cert.is_certified
    assert cert.tau == 4


def test_deep_budget_dominates_default():
    assert DEEP_BUDGET.max_iter > DEFAULT_BUDGET.max_iter
    assert DEEP_BUDGET.eps_root < DEFAULT_BUDGET.eps_root
