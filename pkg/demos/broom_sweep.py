"""Brooms with short spikes: existence as the number of spikes grows.

With spike length 0.05 a few spikes still look like a half-line from far
away and a ground state exists; once the core is long compared with its
diameter the minimizing runs vanish and the infimum sits at the soliton level.
"""
from nlsgraph import phase_scan as ps


def main():
    print(f"{'n':>5s} {'obstruction':>11s} {'decision':>10s} {'96 * infimum':>13s}")
    for n in (3, 5, 20, 80, 240, 320, 640):
        ev = ps.broom_nonexistence(n, 0.05, 1.0, 4.0)
        print(f"{n:5d} {ev.obstruction_ratio:11.4g} {ev.decision.value:>10s} {96 * ev.infimum_estimate:13.7f}")


if __name__ == "__main__":
    main()
