"""Polynomial layer: evaluation, roots with multiplicity, affine normalization."""

import cmath

import numpy as np
import pytest

from newton_dyn.algebra import (
    AffineMap,
    Polynomial,
    find_roots,
    from_roots,
    is_normalized_family,
    normalize,
    taylor_shift,
)
from newton_dyn.errors import (
    DegreeError,
    NonSimpleRootsError,
    ZeroRootError,
)


def test_eval_hand_values():
    # p(z) = z^3 + 3z + 2
    p = Polynomial([2, 3, 0, 1])
    assert p(2) == 16
    assert p(1 + 1j) == 3 + 5j
    assert p.degree == 3


def test_eval_many_matches_scalar():
    p = Polynomial([1.5, -2j, 0.25, 1])
    pts = np.array([0.3 + 0.1j, -2.0, 5j, 1e6])
    batch = p.eval_many(pts)
    for z, v in zip(pts, batch):
        assert abs(v - p(complex(z))) <= 1e-9 * max(1, abs(v))


def test_trailing_zero_trim_and_degree_errors():
    p = Polynomial([1, 2, 0, 0])
    assert p.degree == 1
    with pytest.raises(DegreeError):
        Polynomial([])
    with pytest.raises(DegreeError):
        find_roots(Polynomial([5]))


def test_derive_product_rule():
    rng = np.random.default_rng(7)
    pm = np.polynomial.polynomial
    for _ in range(20):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        b = rng.normal(size=3) + 1j * rng.normal(size=3)
        f = Polynomial(a)
        g = Polynomial(b)
        fg = Polynomial(pm.polymul(a, b))
        lhs = fg.derive().coeffs
        rhs = pm.polyadd(
            pm.polymul(f.derive().coeffs, b), pm.polymul(a, g.derive().coeffs)
        )
        assert np.allclose(lhs, rhs[: len(lhs)], atol=1e-12)


def test_cube_roots_of_unity():
    p = Polynomial([-1, 0, 0, 1])
    rs = find_roots(p)
    assert rs.multiplicities == (1, 1, 1)
    expected = sorted(
        (cmath.exp(2j * cmath.pi * k / 3) for k in range(3)),
        key=lambda z: (z.real, z.imag),
    )
    for got, want in zip(rs.locations, expected):
        assert abs(got - want) < 1e-12


def test_double_root_multiplicity():
    # (z-1)^2 (z+1) (z-2), coefficients from an independent expansion
    pm = np.polynomial.polynomial
    c = pm.polymul(pm.polymul([1, -2, 1], [1, 1]), [-2, 1])
    rs = find_roots(Polynomial(c))
    want = {(-1.0, 1), (1.0, 2), (2.0, 1)}
    got = set()
    for loc, m in rs.roots:
        assert abs(loc.imag) == 0.0
        got.add((round(loc.real, 6), m))
    assert got == want
    for loc, m in rs.roots:
        ref = min([-1, 1, 2], key=lambda r: abs(r - loc))
        assert abs(loc - ref) < 1e-7


def test_triple_root_multiplicity():
    # (z-1)^3 (z+2)
    pm = np.polynomial.polynomial
    c = pm.polymul(pm.polymul(pm.polymul([-1, 1], [-1, 1]), [-1, 1]), [2, 1])
    rs = find_roots(Polynomial(c))
    assert sorted(rs.multiplicities) == [1, 3]
    for loc, m in rs.roots:
        ref = 1 if m == 3 else -2
        assert abs(loc - ref) < 1e-6


def test_against_numpy_roots_random():
    rng = np.random.default_rng(21)
    for _ in range(40):
        deg = int(rng.integers(2, 9))
        coeffs = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        coeffs[-1] += 3.0  # keep the leading term well away from zero
        p = Polynomial(coeffs)
        rs = find_roots(p)
        ref = sorted(np.roots(coeffs[::-1]), key=lambda z: (z.real, z.imag))
        got = []
        for loc, m in rs.roots:
            got.extend([loc] * m)
        assert len(got) == deg
        for a, b in zip(got, ref):
            assert abs(a - b) < 1e-6 * (1 + abs(b))


def test_root_set_round_trip():
    """from_roots then find_roots recovers well-separated random root sets."""
    rng = np.random.default_rng(98)
    runs = 0
    while runs < 500:
        deg = int(rng.integers(3, 9))
        pts = 3.0 * (rng.uniform(-1, 1, size=deg) + 1j * rng.uniform(-1, 1, size=deg))
        sep = min(
            abs(pts[i] - pts[j]) for i in range(deg) for j in range(i + 1, deg)
        )
        if sep < 1e-3:
            continue
        runs += 1
        rs_in = find_roots(from_roots_from_points(pts))
        assert rs_in.multiplicities == tuple([1] * deg)
        matched = sorted(pts, key=lambda z: (z.real, z.imag))
        for got, want in zip(rs_in.locations, matched):
            assert abs(got - want) < 1e-8 * (1 + abs(want))


def from_roots_from_points(pts):
    from newton_dyn.algebra import RootSet

    rs = RootSet(roots=tuple((complex(z), 1) for z in pts), tolerance=1e-12)
    return from_roots(rs)


def test_huge_root_scale():
    # Roots near 1e8 still satisfy the scaled residual criterion.
    pts = np.array([1e8, 1e8 * 1j, -0.5 + 0.25j])
    p = from_roots_from_points(pts)
    rs = find_roots(p)
    assert len(rs) == 3
    for z in pts:
        _, d = rs.nearest(complex(z))
        assert d < 1e-3 * (1 + abs(z))


def test_taylor_shift_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        c = rng.normal(size=5) + 1j * rng.normal(size=5)
        s = complex(rng.normal(), rng.normal())
        shifted = Polynomial(taylor_shift(list(c), s))
        orig = Polynomial(c)
        for z in [0.3, -1.2 + 0.7j, 2.5j]:
            assert abs(shifted(z) - orig(z + s)) < 1e-10 * (1 + abs(orig(z + s)))


def test_affine_map_algebra():
    g = AffineMap(scale=2 - 1j, shift=0.5j)
    h = AffineMap(scale=-0.25, shift=3)
    z = 1.2 - 0.4j
    assert abs(g.compose(h)(z) - g(h(z))) < 1e-14
    gi = g.inverse()
    assert abs(gi(g(z)) - z) < 1e-14
    assert AffineMap(1, 0).is_identity


def test_normalize_cubic_known_value():
    # z^3 - 2z + 2 is already centered; scaling puts it in the family with
    # middle coefficient -2^(1/3).
    p = Polynomial([2, -2, 0, 1])
    q, gamma = normalize(p)
    assert is_normalized_family(q)
    assert q.coeffs[0] == 1
    assert q.coeffs[2] == 0
    assert abs(q.coeffs[1] - (-(2 ** (1 / 3)))) < 1e-12
    assert q.is_real


def test_normalize_conjugates_roots():
    rng = np.random.default_rng(314)
    for _ in range(25):
        deg = int(rng.integers(3, 7))
        pts = 2.0 * (rng.uniform(-1, 1, size=deg) + 1j * rng.uniform(-1, 1, size=deg))
        sep = min(abs(pts[i] - pts[j]) for i in range(deg) for j in range(i + 1, deg))
        centered = pts - pts.mean()
        if sep < 1e-2 or min(abs(centered)) < 1e-2:
            continue
        p = from_roots_from_points(pts)
        q, gamma = normalize(p)
        assert is_normalized_family(q, tol=1e-10)
        moved = sorted((gamma(complex(z)) for z in pts), key=lambda z: (z.real, z.imag))
        rs_q = find_roots(q)
        for got, want in zip(rs_q.locations, moved):
            assert abs(got - want) < 1e-7 * (1 + abs(want))
        # root sum vanishes and product is (-1)^deg in the family
        assert abs(sum(moved)) < 1e-7


def test_normalize_rejects():
    with pytest.raises(DegreeError):
        normalize(Polynomial([1, 0, 1]))  # degree 2
    pm = np.polynomial.polynomial
    c = pm.polymul(pm.polymul([1, -2, 1], [1, 1]), [-2, 1])
    with pytest.raises(NonSimpleRootsError):
        normalize(Polynomial(c))
    with pytest.raises(ZeroRootError):
        normalize(Polynomial([0, -1, 0, 1]))  # z(z-1)(z+1), centered root at 0


def test_normalize_real_even_negative_constant():
    # Even degree with negative centered constant: no real scaling exists, the
    # principal complex branch is used and the pattern still holds.
    pts = np.array([3.0, -1.0, -1.5, -0.5]) + 0.3  # centered product -2.25
    p = from_roots_from_points(pts)
    q, gamma = normalize(p)
    assert is_normalized_family(q, tol=1e-10)
    assert abs(gamma.scale.imag) > 0
