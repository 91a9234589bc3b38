"""Basin-ray graphs, their pullbacks, and combinatorial comparison.

The level-0 graph joins every root's fixed internal rays at infinity;
pulling it back once picks up the poles.  The comparison verdict is a
three-way answer: equal invariants, a witnessed difference, or a tracing
failure that leaves the question open.
"""

from newton_dyn.algebra import Polynomial
from newton_dyn.graphs import (
    DEFAULT_TRACE,
    comb_equivalent,
    export_graph_text,
    faces,
    pull_back,
    trace_delta0,
)
from newton_dyn.newton_map import build


def tower(label, f, levels=2):
    print(f"== {label} ==")
    g = trace_delta0(f, DEFAULT_TRACE)
    for lvl in range(levels + 1):
        fc = len(faces(g))
        euler = len(g.vertices) - len(g.edges) + fc
        print(f"  level {lvl}: V={len(g.vertices)} E={len(g.edges)} F={fc}"
              f"  euler={euler}")
        if lvl < levels:
            g = pull_back(f, g, DEFAULT_TRACE)
    return g


def main():
    f_cube = build(Polynomial([-1, 0, 0, 1]))
    f_cycle = build(Polynomial([2, -2, 0, 1]))
    g = tower("z^3 - 1", f_cube)
    print("  level-2 export, first lines:")
    for line in export_graph_text(g).splitlines()[:6]:
        print("   ", line)
    print()
    tower("z^3 - 2z + 2", f_cycle, levels=1)
    print()
    print("comparisons at level 1:")
    print("  z^3-1 ~ z^3-1      :", comb_equivalent(f_cube, f_cube, 1))
    print("  z^3-1 ~ z^3-2z+2   :", comb_equivalent(f_cube, f_cycle, 1))
    fa = build(Polynomial([1, 0.05 + 0.02j, 0, 1]))
    fb = build(Polynomial([1, 0.055 + 0.018j, 0, 1]))
    print("  two nearby cubics  :", comb_equivalent(fa, fb, 1))


if __name__ == "__main__":
    main()
