"""Grid-refinement study for the L1 derivative, the predictor-corrector solver
and the Hamilton residuals. Prints one table per scheme."""

from __future__ import annotations

import argparse
import math

import numpy as np

from fracjet.fdesolve import solve_alpha_system
from fracjet.gridops import SampledFunction, caputo_left
from fracjet.models import SamuelsonParams, samuelson_simulate
from fracjet.specfun import gamma_fn, mittag_leffler
from fracjet.variational import legendre, verify_hamilton


def table(title: str, rows: list[tuple[int, float]]) -> None:
    print(f"\n{title}")
    print(f"{'1/h':>8} {'error':>12} {'ratio':>8} {'order':>7}")
    prev = None
    for n, err in rows:
        if prev is None:
            print(f"{n:8d} {err:12.4e}")
        else:
            r = prev / err
            print(f"{n:8d} {err:12.4e} {r:8.3f} {math.log2(r):7.3f}")
        prev = err


def l1_rows(alpha: float, levels: list[int]) -> list[tuple[int, float]]:
    gamma = 1.6
    c = gamma_fn(1 + gamma) / gamma_fn(1 + gamma - alpha)
    rows = []
    for n in levels:
        d = caputo_left(SampledFunction.from_callable(lambda t: t**gamma, 0.0, 1.0, n), alpha)
        rows.append((n, float(np.max(np.abs(d.values - c * d.grid ** (gamma - alpha))))))
    return rows


def abm_rows(alpha: float, levels: list[int]) -> list[tuple[int, float]]:
    rows = []
    for n in levels:
        tr = solve_alpha_system(alpha, lambda t, y: -y, [1.0], 1.0, 1 / n)
        ref = np.array([mittag_leffler(alpha, -(t**alpha)) for t in tr.t])
        rows.append((n, float(np.max(np.abs(tr.x[:, 0] - ref)))))
    return rows


def hamilton_rows(levels: list[int]) -> list[tuple[int, float]]:
    P = SamuelsonParams(0.5, 0.2, 0.5, 0.3, 1.0)
    H = legendre(P.spec())
    rows = []
    for n in levels:
        rep = verify_hamilton(samuelson_simulate(P, 1.0, 0.0, 1.0, 1 / n), H)
        rows.append((n, max(v["relative"] for v in rep.values())))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--levels", default="128,256,512,1024,2048")
    args = ap.parse_args()
    levels = [int(v) for v in args.levels.split(",")]
    table(f"L1 scheme on t^1.6, alpha={args.alpha}", l1_rows(args.alpha, levels))
    table(f"predictor-corrector on D^a y = -y, alpha={args.alpha}", abm_rows(args.alpha, levels))
    table("Hamilton residuals, classical quadratic model", hamilton_rows(levels[:4]))


if __name__ == "__main__":
    main()
