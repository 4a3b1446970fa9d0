"""Ground states on the line and the half-line, compared with the soliton levels."""
from nlsgraph import closed_forms as cf
from nlsgraph import graph_model as gm
from nlsgraph.minimize import minimize


def main():
    s = cf.soliton_constants(4.0)
    print(f"p = 4: theta = {s.theta:.15g} (1/96 = {1 / 96:.15g})")
    for name, g, level in [("line", gm.real_line(), cf.soliton_energy_line(s, 1.0)),
                           ("half-line", gm.half_line(), cf.soliton_energy_halfline(s, 1.0))]:
        r = minimize(g, 1.0, s)
        print(f"{name:10s} status={r.status.value:10s} energy={r.energy:.10f} exact={level:.10f} "
              f"iterations={r.iterations}")
        for k, fit in enumerate(r.tail_fits):
            print(f"    tail {k}: m={fit.m:.8f} y={fit.y:+.2e} residual={fit.residual:.1e}")


if __name__ == "__main__":
    main()
