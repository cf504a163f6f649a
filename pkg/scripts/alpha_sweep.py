"""Run the quadratic model over a range of orders and report how far each
trajectory sits from the classical closed form."""

from __future__ import annotations

import argparse

import numpy as np

from fracjet.models import SamuelsonParams, samuelson_classical_solution, samuelson_residual, samuelson_simulate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.5,0.6,0.7,0.8,0.9,0.95,0.99,0.999,1")
    ap.add_argument("--params", default="0.5,1.0,0.5", help="a1,a2,a3")
    ap.add_argument("--rho", type=float, default=0.3)
    ap.add_argument("--step", type=float, default=1 / 512)
    args = ap.parse_args()
    a1, a2, a3 = (float(v) for v in args.params.split(","))
    ref_params = SamuelsonParams(a1, a2, a3, args.rho, 1.0)
    print(f"{'alpha':>7} {'x(1)':>12} {'max|x - x_classical|':>22} {'EL residual':>12}")
    for al in (float(v) for v in args.alphas.split(",")):
        P = SamuelsonParams(a1, a2, a3, args.rho, al)
        tr = samuelson_simulate(P, 1.0, 0.0, 1.0, args.step)
        ref = samuelson_classical_solution(ref_params, 1.0, 0.0, tr.t)
        res = samuelson_residual(P, tr, t_min=0.1).max()
        print(f"{al:7.3f} {tr.x[-1, 0]:12.6f} {np.max(np.abs(tr.x[:, 0] - ref)):22.6e} {res:12.3e}")


if __name__ == "__main__":
    main()
