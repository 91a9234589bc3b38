"""Fixed points, critical orbits, and a hyperbolicity certificate.

Walks the two classic cubics: z^3 - 2z + 2, whose flex falls into a
superattracting 2-cycle, and z^3 + 1, whose flex sits on a pole and
escapes to the repelling fixed point at infinity on the first step.
"""

from newton_dyn.algebra import Polynomial
from newton_dyn.kneading import kneading_sequence, kneading_text
from newton_dyn.newton_map import build, critical_set, fixed_point_data
from newton_dyn.orbits import DEFAULT_BUDGET, certify_hyperbolic, classify


def inspect(label, f):
    print(f"== {label} ==")
    for d in fixed_point_data(f):
        print(f"  fixed point {d.location}  multiplier {d.multiplier:.6g}")
    for cp in critical_set(f):
        v = classify(f, cp.location, DEFAULT_BUDGET)
        print(f"  critical {cp.location:.6g} ({cp.kind}, deg {cp.local_degree}) -> {v}")
    cert = certify_hyperbolic(f, DEFAULT_BUDGET)
    print(f"  certificate: {cert.status}, tau = {cert.tau} of {2 * f.degree - 2}")


def main():
    f_cycle = build(Polynomial([2, -2, 0, 1]))
    inspect("z^3 - 2z + 2", f_cycle)
    k = kneading_sequence(f_cycle, 8, DEFAULT_BUDGET)
    print(f"  kneading: {kneading_text(k)}  (preperiod, period) = {k.periodic[0]}")
    print()
    inspect("z^3 + 1", build(Polynomial([1, 0, 0, 1])))


if __name__ == "__main__":
    main()
