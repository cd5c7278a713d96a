#!/usr/bin/env python3
"""Tabulate telescopers for the k-regular graph generating functions.

For each k the script builds the scalar-product presentation, extracts a
telescoper (direct elimination for small k, the modular evaluation /
interpolation pipeline from k = 5 up), checks the resulting ODE against the
exponential generating series, and prints one table row with timings.

Typical use:

    python3 scripts/kregular_table.py            # k = 2..5
    python3 scripts/kregular_table.py --max-k 6  # include the k = 6 stretch run
"""

import argparse
import time

from weylred.kregular import (
    model_polynomials,
    regular_presentation,
    scalar_product_series,
    verify_ode_on_series,
)
from weylred.telescoping import ModularConfig, telescope_direct, telescope_modular


def one_row(k, args):
    t0 = time.monotonic()
    _, pres = regular_presentation(k)
    t_build = time.monotonic() - t0

    t0 = time.monotonic()
    if k < args.modular_from:
        tele = telescope_direct(pres)
        mode = "direct"
    else:
        cfg = ModularConfig(seed=args.seed, workers=args.workers,
                            max_points=args.point_budget)
        run = telescope_modular(pres, config=cfg)
        tele = run.telescoper
        mode = f"modular[{len(run.primes_used)}p]"
    t_tel = time.monotonic() - t0

    check = "-"
    if args.series_terms:
        f, g = model_polynomials(k)
        series = scalar_product_series(f, g, args.series_terms)
        ok = verify_ode_on_series(tele, series, allow_partial=True)
        check = "ok" if ok else "FAIL"
    return mode, tele.order, max(tele.degrees), t_build, t_tel, check


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--min-k", type=int, default=2)
    ap.add_argument("--max-k", type=int, default=5)
    ap.add_argument("--modular-from", type=int, default=5,
                    help="switch from direct elimination to the modular "
                         "pipeline at this k (default 5)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--point-budget", type=int, default=512,
                    help="evaluation points per prime; k >= 6 needs more "
                         "(try 2048)")
    ap.add_argument("--series-terms", type=int, default=12,
                    help="verify the ODE against this many series terms "
                         "(0 skips the check)")
    args = ap.parse_args()

    print(f"{'k':>2}  {'mode':<12} {'order':>5} {'degree':>6} "
          f"{'build(s)':>9} {'telescope(s)':>12} {'series':>7}")
    for k in range(args.min_k, args.max_k + 1):
        mode, order, degree, tb, tt, check = one_row(k, args)
        print(f"{k:>2}  {mode:<12} {order:>5} {degree:>6} "
              f"{tb:>9.2f} {tt:>12.2f} {check:>7}", flush=True)


if __name__ == "__main__":
    main()
