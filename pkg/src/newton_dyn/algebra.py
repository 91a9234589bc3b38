"""Polynomial arithmetic, simultaneous root finding, and affine normalization.

Coefficients are stored in ascending order, so ``coeffs[k]`` multiplies z**k.
All arithmetic is complex; real polynomials are the special case of zero
imaginary parts.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegreeError,
    NonConvergenceError,
    NonSimpleRootsError,
    ZeroRootError,
)

# Aberth-Ehrlich controls.  The sweep cap is generous; random degree <= 12
# inputs settle in well under fifty sweeps.
ABERTH_MAX_SWEEPS = 500
ABERTH_RESTARTS = 3

# Floating-point double roots cannot be pinned below roughly sqrt(eps), so the
# merge radius for multiplicity detection never drops under this floor even
# when the caller asks for a tighter tolerance.
CLUSTER_FLOOR = 1e-6

# When True, scalar evaluation runs through an extended-precision Horner pass.
EXTENDED_EVAL = False


def _as_coeff_tuple(coeffs: Iterable[complex]) -> tuple[complex, ...]:
    out = tuple(complex(c) for c in coeffs)
    while len(out) > 1 and out[-1] == 0:
        out = out[:-1]
    if not out:
        raise DegreeError("polynomial needs at least one coefficient")
    if out[-1] == 0:
        raise DegreeError("zero polynomial has no degree")
    return out


@dataclass(frozen=True)
class Polynomial:
    """Dense univariate polynomial with ascending complex coefficients."""

    coeffs: tuple[complex, ...]

    def __init__(self, coeffs: Iterable[complex]):
        object.__setattr__(self, "coeffs", _as_coeff_tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_real(self) -> bool:
        return all(abs(c.imag) <= 1e-12 for c in self.coeffs)

    def __call__(self, z: complex) -> complex:
        return self.eval(z)

    def eval(self, z: complex, extended: bool | None = None) -> complex:
        """Horner evaluation; ``extended`` switches to an 80-bit accumulator."""
        if extended is None:
            extended = EXTENDED_EVAL
        if extended:
            acc = np.clongdouble(0)
            zl = np.clongdouble(z)
            for c in reversed(self.coeffs):
                acc = acc * zl + np.clongdouble(c)
            return complex(acc)
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def eval_many(self, z: np.ndarray) -> np.ndarray:
        """Vectorized Horner over a numpy array of points."""
        acc = np.zeros_like(z, dtype=complex)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def derive(self) -> "Polynomial":
        if self.degree == 0:
            raise DegreeError("derivative of a constant is the zero polynomial")
        return Polynomial(tuple(k * c for k, c in enumerate(self.coeffs) if k > 0))

    def scale_leading(self) -> "Polynomial":
        """Monic rescale (divides out the leading coefficient)."""
        lead = self.coeffs[-1]
        if lead == 1:
            return self
        return Polynomial(tuple(c / lead for c in self.coeffs))

    def coeff_scale(self) -> float:
        return max(abs(c) for c in self.coeffs)


@dataclass(frozen=True)
class RootSet:
    """Roots with multiplicities; locations pairwise separated beyond merging range."""

    roots: tuple[tuple[complex, int], ...]
    tolerance: float

    @property
    def locations(self) -> tuple[complex, ...]:
        return tuple(r for r, _ in self.roots)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(m for _, m in self.roots)

    @property
    def total_degree(self) -> int:
        return sum(m for _, m in self.roots)

    def __len__(self) -> int:
        return len(self.roots)

    def nearest(self, z: complex) -> tuple[int, float]:
        """Index of the closest root and the Euclidean distance to it."""
        best, bd = 0, float("inf")
        for i, (r, _) in enumerate(self.roots):
            d = abs(z - r)
            if d < bd:
                best, bd = i, d
        return best, bd


@dataclass(frozen=True)
class AffineMap:
    """z -> scale * z + shift on the complex plane."""

    scale: complex
    shift: complex

    def __call__(self, z: complex) -> complex:
        return self.scale * z + self.shift

    def inverse(self) -> "AffineMap":
        if self.scale == 0:
            raise ZeroDivisionError("affine map with zero scale has no inverse")
        return AffineMap(1 / self.scale, -self.shift / self.scale)

    def compose(self, other: "AffineMap") -> "AffineMap":
        """self after other: (self.compose(other))(z) == self(other(z))."""
        return AffineMap(self.scale * other.scale, self.scale * other.shift + self.shift)

    @property
    def is_identity(self) -> bool:
        return self.scale == 1 and self.shift == 0


def taylor_shift(coeffs: Sequence[complex], s: complex) -> list[complex]:
    """Coefficients of p(z + s) via repeated synthetic division."""
    c = list(coeffs)
    n = len(c)
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            c[j] = c[j] + s * c[j + 1]
    return c


def _initial_guesses(n: int, radius: float, attempt: int) -> np.ndarray:
    # Angles get an irrational offset so symmetric inputs (z^n - c) do not
    # start in a configuration the iteration preserves.
    k = np.arange(n)
    ang = 2.0 * np.pi * (k + 0.37 + 0.13 * attempt) / n + 0.41
    r = radius * (1.0 + 0.05 * ((k % 5) - 2) / 5.0 + 0.11 * attempt)
    return r * np.exp(1j * ang)


def _eval_scale(c: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Pointwise evaluation magnitude sum(|c_k| |z|^k); the attainable residual floor."""
    return np.polyval(np.abs(c), np.abs(z))


def _aberth_sweeps(c: np.ndarray, dc: np.ndarray, z: np.ndarray, tol: float):
    """Run Aberth-Ehrlich sweeps in place; returns (z, converged flag)."""
    # The eval scale vanishes with |z| when the constant term is zero, so a
    # root at the origin needs the coefficient scale as an absolute floor.
    floor = max(1.0, float(np.max(np.abs(c))))

    def resid_ok(zz):
        return bool(np.all(np.abs(np.polyval(c, zz)) <= tol * (_eval_scale(c, zz) + floor)))

    for _ in range(ABERTH_MAX_SWEEPS):
        if resid_ok(z):
            return z, True
        pv = np.polyval(c, z)
        dv = np.polyval(dc, z)
        dead = dv == 0
        if np.any(dead):
            z = z + np.where(dead, 1e-6 * (1 + np.abs(z)), 0)
            continue
        w = pv / dv
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = np.sum(1.0 / diff, axis=1)
        denom = 1.0 - w * s
        denom = np.where(denom == 0, 1e-30, denom)
        step = w / denom
        z = z - step
        if np.max(np.abs(step) / (1.0 + np.abs(z))) < 1e-17:
            return z, resid_ok(z)
    return z, resid_ok(z)


def _cluster(points: np.ndarray, merge_radius_fn) -> list[list[complex]]:
    order = sorted(range(points.size), key=lambda i: (points[i].real, points[i].imag))
    clusters: list[list[complex]] = []
    for idx in order:
        z = complex(points[idx])
        placed = False
        for cl in clusters:
            ref = cl[0]
            if abs(z - ref) <= merge_radius_fn(z, ref):
                cl.append(z)
                placed = True
                break
        if not placed:
            clusters.append([z])
    # Transitive chains can leave two cluster means inside merging range of
    # each other; fold until stable.
    changed = True
    while changed:
        changed = False
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                mi = sum(clusters[i]) / len(clusters[i])
                mj = sum(clusters[j]) / len(clusters[j])
                if abs(mi - mj) <= merge_radius_fn(mi, mj):
                    clusters[i].extend(clusters[j])
                    del clusters[j]
                    changed = True
                    break
            if changed:
                break
    return clusters


def _mult_estimate(p: Polynomial, dp: Polynomial, ddp: Polynomial, z: complex) -> float:
    """Local multiplicity estimator p'**2 / (p'**2 - p p''); -> m at an m-fold root."""
    a = dp(z) ** 2
    b = a - p(z) * ddp(z)
    if b == 0:
        return 0.0
    return (a / b).real


def _absorb_split_clusters(
    clusters: list[list[complex]], monic: Polynomial
) -> list[list[complex]]:
    """Merge cluster pairs that jointly sit on one multiple root.

    Aberth approximations of an m-fold root stall at distance ~eps**(1/m), which
    for m >= 2 can exceed the base merge radius and split the cluster.  A pair
    is folded only when the multiplicity estimator at the combined mean agrees
    with the combined size, so genuinely distinct nearby roots stay separate.
    """
    if len(clusters) < 2 or monic.degree < 2:
        return clusters
    dp = monic.derive()
    ddp = dp.derive() if dp.degree >= 1 else None
    if ddp is None:
        return clusters
    changed = True
    while changed:
        changed = False
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                mi = sum(clusters[i]) / len(clusters[i])
                mj = sum(clusters[j]) / len(clusters[j])
                local = 1.0 + max(abs(mi), abs(mj))
                if abs(mi - mj) > 1e-3 * local:
                    continue
                m = len(clusters[i]) + len(clusters[j])
                # Probe outside the segment between the means: at the joint
                # centroid of a symmetric split p' cancels to roundoff noise
                # and the estimator is garbage.
                e1 = _mult_estimate(monic, dp, ddp, mi + 0.5 * (mi - mj))
                e2 = _mult_estimate(monic, dp, ddp, mj + 0.5 * (mj - mi))
                k = round(e1)
                # Near an m-fold root the estimator reads m at any nearby
                # point, so a partial pair inside a bigger cluster sees an
                # integer above its own size; accept that too.
                if k >= max(2, m) and abs(e1 - k) < 0.25 and abs(e2 - k) < 0.25:
                    clusters[i].extend(clusters[j])
                    del clusters[j]
                    changed = True
                    break
            if changed:
                break
    return clusters


def _polish_multiple(p: Polynomial, z: complex, mult: int) -> complex:
    """Refine a multiplicity-m root as a simple root of the (m-1)-th derivative."""
    q = p
    for _ in range(mult - 1):
        q = q.derive()
    dq = q.derive() if q.degree >= 1 else None
    if dq is None:
        return z
    for _ in range(40):
        qv = q(z)
        dv = dq(z)
        if dv == 0:
            break
        step = qv / dv
        z = z - step
        if abs(step) <= 1e-16 * (1 + abs(z)):
            break
    return z


def find_roots(p: Polynomial, tol: float = 1e-12) -> RootSet:
    """All roots of p with multiplicities, via simultaneous Aberth-Ehrlich iteration.

    Residuals are driven below ``tol`` times the pointwise evaluation scale
    ``sum(|a_k| |z|**k)``, the natural floor for Horner in floating point.
    Approximations closer than ``max(2*tol, 1e-6)`` relative to local scale
    merge unconditionally; wider near-coincidences merge only when a local
    multiplicity estimate confirms they sit on one multiple root.
    """
    if p.degree < 1:
        raise DegreeError("constant polynomial has no roots")
    if tol <= 0:
        raise ValueError("tol must be positive")
    monic = p.scale_leading()
    # numpy polyval wants descending order
    c = np.array(monic.coeffs[::-1], dtype=complex)
    dc = np.polyder(c)
    n = p.degree
    if n == 1:
        loc = -monic.coeffs[0]
        return RootSet(roots=((complex(loc), 1),), tolerance=tol)
    radius = 1.0 + max(abs(cc) for cc in monic.coeffs[:-1])
    last = None
    for attempt in range(ABERTH_RESTARTS):
        z0 = _initial_guesses(n, radius, attempt)
        z, ok = _aberth_sweeps(c, dc, z0, tol)
        last = z
        if ok:
            break
    else:
        resid = np.abs(np.polyval(c, last))
        raise NonConvergenceError(
            f"root finder stalled after {ABERTH_MAX_SWEEPS} sweeps; residuals {resid}"
        )

    def merge_radius(a: complex, b: complex) -> float:
        local = 1.0 + max(abs(a), abs(b))
        return max(2 * tol, CLUSTER_FLOOR) * local

    clusters = _cluster(z, merge_radius)
    clusters = _absorb_split_clusters(clusters, monic)
    snap_real = p.is_real
    roots = []
    for cl in clusters:
        m = len(cl)
        loc = sum(cl) / m
        if m > 1:
            loc = _polish_multiple(monic, loc, m)
        if snap_real and abs(loc.imag) <= 1e-9 * (1 + abs(loc)):
            loc = complex(loc.real, 0.0)
        roots.append((complex(loc), m))
    roots.sort(key=lambda rm: (rm[0].real, rm[0].imag))
    return RootSet(roots=tuple(roots), tolerance=tol)


def from_roots(rs: RootSet) -> Polynomial:
    """Monic polynomial whose roots (with multiplicity) are exactly rs."""
    pts = []
    for loc, mult in rs.roots:
        pts.extend([loc] * mult)
    if not pts:
        raise DegreeError("empty root set")
    coeffs = np.polynomial.polynomial.polyfromroots(np.array(pts, dtype=complex))
    return Polynomial(tuple(coeffs))


def normalize(p: Polynomial, tol: float = 1e-12) -> tuple[Polynomial, AffineMap]:
    """Affine change of variable into the centered family z^d + ... + a_1 z + 1.

    Returns (q, gamma) with q monic, its roots summing to zero, constant term
    exactly 1, and gamma the affine map carrying roots of p onto roots of q.
    Requires degree >= 3 and simple roots; a centered root at the origin (zero
    root product) cannot be scaled onto the family and raises ZeroRootError.
    For real p whose centered constant term is negative and d even, no real
    scaling exists and the principal complex d-th root is used.
    """
    d = p.degree
    if d < 3:
        raise DegreeError("normalization needs degree >= 3")
    rs = find_roots(p, tol)
    if any(m > 1 for _, m in rs.roots):
        raise NonSimpleRootsError("normalization requires pairwise distinct roots")
    monic = p.scale_leading()
    coeffs = list(monic.coeffs)
    mu = -coeffs[d - 1] / d
    if mu == 0:
        shifted = coeffs
    else:
        shifted = taylor_shift(coeffs, mu)
    scale = max(abs(c) for c in shifted)
    if abs(shifted[d - 1]) > 1e-9 * scale:
        raise NonConvergenceError("centering did not cancel the subleading coefficient")
    shifted[d - 1] = 0j
    c0 = shifted[0]
    if abs(c0) <= 1e-12 * scale:
        raise ZeroRootError("centered polynomial has a root at the origin")
    # Pick the scale factor lam with lam**d = c0, preferring a real choice.
    if abs(c0.imag) <= 1e-14 * abs(c0):
        re = c0.real
        if re > 0:
            lam = complex(re ** (1.0 / d))
        elif d % 2 == 1:
            lam = complex(-((-re) ** (1.0 / d)))
        else:
            lam = cmath.exp(cmath.log(complex(re)) / d)
    else:
        lam = cmath.exp(cmath.log(c0) / d)
    q = [shifted[k] * lam ** (k - d) for k in range(d + 1)]
    q[d] = 1.0 + 0j
    q[d - 1] = 0j
    q[0] = 1.0 + 0j
    if p.is_real and abs(lam.imag) == 0:
        q = [complex(ck.real, 0.0) for ck in q]
    gamma = AffineMap(scale=1 / lam, shift=-mu / lam)
    return Polynomial(tuple(q)), gamma


def is_normalized_family(p: Polynomial, tol: float = 1e-12) -> bool:
    """Coefficient-pattern test for membership in the centered family."""
    d = p.degree
    if d < 3:
        return False
    c = p.coeffs
    return (
        abs(c[d] - 1) <= tol
        and abs(c[d - 1]) <= tol
        and abs(c[0] - 1) <= tol
    )
