"""Ground states under a shrinking compact core.

A tadpole whose loop shrinks to a point has ground states all along the
sequence, and their energies approach the level of the limit graph, a
half-line, which has a ground state as well.  A three-half-line star whose
pendant shrinks loses its ground state at a positive length, consistent
with the star itself carrying none.
"""
from nlsgraph import closed_forms as cf
from nlsgraph import graph_model as gm
from nlsgraph import phase_scan as ps


def main():
    s = cf.soliton_constants(4.0)
    print(f"half-line level: {cf.soliton_energy_halfline(s, 1.0):.8f}")
    for loop in (2.0, 1.0, 0.5, 0.1, 0.02):
        d = ps.decide_existence(gm.tadpole(loop), 1.0, s)
        print(f"tadpole loop {loop:5.2f}: {d.decision.value:9s} energy {d.energy:.8f}")
    print(f"soliton level: {cf.soliton_energy_line(s, 1.0):.8f}")
    for ell in (5.0, 3.0, 2.7, 2.6, 1.0, 0.1):
        d = ps.decide_existence(gm.star_with_pendant(3, ell), 1.0, s)
        print(f"star with pendant {ell:4.1f}: {d.decision.value:9s} energy {d.energy:.8f}")


if __name__ == "__main__":
    main()
