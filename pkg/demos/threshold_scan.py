"""Existence threshold for a star of three half-lines with a pendant.

The scan runs on a coarse mesh so that it finishes in seconds; pass
``--fine`` for the default solver resolution (about a minute).
"""
import sys

from nlsgraph import phase_scan as ps
from nlsgraph.minimize import MinimizeConfig


def main(fine: bool):
    cfg = MinimizeConfig() if fine else MinimizeConfig(mesh_size=0.01, truncation=40.0)
    res = ps.scan_threshold(3, 4.0, cfg, bracket_tolerance=1e-2 if fine else 5e-2)
    for x in res.samples:
        print(f"mu^beta ell = {x.ell:8.4f}  {x.decision.value:9s} normalized energy = {x.energy:.8f}")
    print(f"bracket: {res.bracket}  monotone: {res.monotone}")
    print(f"truncated half-soliton certificate constant: {ps.pendant_constant(4.0):.6f}")


if __name__ == "__main__":
    main("--fine" in sys.argv[1:])
