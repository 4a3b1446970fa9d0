"""Dyadic refinement of the truncated half-soliton certificate constant."""
from nlsgraph import closed_forms as cf
from nlsgraph import graph_model as gm
from nlsgraph import phase_scan as ps


def main():
    limit = ps.pendant_constant(4.0)
    for k in range(1, 13):
        print(f"k = {k:2d}: {ps.pendant_constant(4.0, k):.8f}")
    print(f"limit: {limit:.8f}")
    s = cf.soliton_constants(4.0)
    for ell in (3.0, 3.5, 5.0):
        cert = ps.pendant_certificate(gm.line_with_pendant(ell), 1.0, s)
        print(f"line with pendant {ell}: certified={cert.certified} energy={cert.competitor_energy:.6f}")


if __name__ == "__main__":
    main()
