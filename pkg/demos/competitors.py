"""Explicit competitors for the five families and their energies relative to the soliton level."""
from nlsgraph import closed_forms as cf
from nlsgraph import rearrange as ra
from nlsgraph.rearrange import Family

LENGTHS = {
    Family.TWO_CIRCLES: (1.0, 2.0),
    Family.SIGNPOST: (1.0, 1.0),
    Family.TERMINAL_EDGE: (5.0,),
    Family.TADPOLE: (1.0,),
    Family.FORK3: (0.5, 1.0, 1.5),
}


def main():
    s = cf.soliton_constants(4.0)
    print(f"{'family':14s} {'mu':>4s} {'energy':>14s} {'soliton level':>14s} certified")
    for family, lengths in LENGTHS.items():
        for mu in (0.5, 1.0, 2.0):
            scaled = tuple(x * mu ** (-s.beta) for x in lengths)
            cert = ra.competitor_certificate(ra.build_competitor(family, scaled, mu, s), mu, s)
            print(f"{family.value:14s} {mu:4.1f} {cert.energy:14.9f} {cert.soliton_energy:14.9f} {cert.certified}")


if __name__ == "__main__":
    main()
