#!/usr/bin/env python3
"""Reproduce the steady non-unitary eigenvalue counts and the unsteady
spectrum bounds.

The four tabulated steady configurations run by default (the largest, a
32x64 grid with 6112 unknowns, takes tens of seconds; skip it with
--small).  Eigenvalue lists land in the output directory as CSV.
"""

import argparse
import os
import time

from macstokes import BoundaryKind, GridSpec, analyze_steady, verify_unsteady_bounds
from macstokes.grid import square_spec
from macstokes.io_utils import ensure_dir, write_json
from macstokes.spectral import eigenvalues_to_csv

CONFIGS = [
    (16, 16, BoundaryKind.DIRICHLET_ALL),
    (32, 32, BoundaryKind.DIRICHLET_ALL),
    (16, 32, BoundaryKind.PERIODIC_X_DIRICHLET_Y),
    (32, 64, BoundaryKind.PERIODIC_X_DIRICHLET_Y),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output-dir", default="out")
    ap.add_argument("--small", action="store_true", help="skip the 32x64 case")
    ap.add_argument("--eps2", default="1e-3,1e-1,1,1e1,1e3",
                    help="eps^2 sweep for the unsteady bounds on the 8x8 grid")
    args = ap.parse_args()
    ensure_dir(args.output_dir)

    payload = {"steady": [], "unsteady": []}
    print(f"{'grid':>10s} {'bc':>10s} {'dof':>6s} {'nonunit':>8s} {'beta':>8s} {'time':>6s}")
    for nx, ny, bc in CONFIGS:
        if args.small and nx * ny >= 2048:
            continue
        t0 = time.time()
        rep = analyze_steady(GridSpec(nx, ny, 1.0, 1.0, bc))
        dtime = time.time() - t0
        print(f"{nx:>4d}x{ny:<5d} {bc.value:>10s} {rep.dof_total:>6d} "
              f"{rep.n_nonunitary:>8d} {rep.beta_est:>8.4f} {dtime:>5.1f}s")
        payload["steady"].append({"nx": nx, "ny": ny, "bc": bc.value, **rep.to_dict()})
        eigenvalues_to_csv(os.path.join(args.output_dir, f"spectrum_{bc.value}_{nx}x{ny}.csv"),
                           rep.eigenvalues)

    eps2_list = [float(x) for x in args.eps2.split(",") if x.strip()]
    spec = square_spec(8, BoundaryKind.DIRICHLET_ALL)
    steady8 = analyze_steady(spec)
    print(f"\nunsteady bounds on 8x8 dirichlet (steady beta^2 = {steady8.beta_est ** 2:.6f}):")
    for rep in verify_unsteady_bounds(spec, eps2_list):
        print(f"  eps2={rep.eps2:>8g}: min nonzero={rep.lambda_min_nonzero:.6f} "
              f"max={rep.lambda_max:.10f}")
        payload["unsteady"].append(rep.to_dict())

    write_json(os.path.join(args.output_dir, "spectrum_report.json"), payload)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
