"""Compare the plain trust-region baseline against both preconditioned
variants on the plane-compression benchmark.

Runs all three solvers from the same start, prints an iteration/work table,
and writes per-solver traces plus a JSON summary under --out.  No variant is
asserted to win; the point is the side-by-side operator counts.

    python3 scripts/compare_elasticity.py --mesh 8 --out results/elasticity
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from gaspin import (Decomposition, GaspinConfig, PlaneCompression,
                    TrustRegionConfig, gaspin_solve, tr_solve, write_trace)


def run_variant(solver, problem, decomp, u0, max_iters, grad_tol):
    if solver == "tr":
        return tr_solve(problem, u0.copy(),
                        TrustRegionConfig(max_iters=max_iters, grad_tol=grad_tol))
    return gaspin_solve(problem, decomp, u0.copy(),
                        GaspinConfig(strategy=solver.removeprefix("gaspin-"),
                                     max_iters=max_iters, grad_tol=grad_tol))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mesh", type=int, default=8, help="elements per side")
    ap.add_argument("--compression", type=float, default=-0.1)
    ap.add_argument("--blocks", type=int, default=4)
    ap.add_argument("--start", type=int, default=0, help="preset start index")
    ap.add_argument("--max-iters", type=int, default=500)
    ap.add_argument("--grad-tol", type=float, default=1e-6)
    ap.add_argument("--out", type=Path, default=Path("results/elasticity"))
    args = ap.parse_args(argv)

    problem = PlaneCompression(mesh=args.mesh, compression=args.compression)
    decomp = Decomposition.contiguous(problem.dim, args.blocks)
    u0 = problem.preset_start(args.start)
    args.out.mkdir(parents=True, exist_ok=True)

    rows = []
    for solver in ("tr", "gaspin-tr", "gaspin-damping"):
        result = run_variant(solver, problem, decomp, u0,
                             args.max_iters, args.grad_tol)
        write_trace(args.out / f"trace-{solver}.csv", result.records)
        rows.append({
            "solver": solver,
            "converged": result.converged,
            "iterations": result.iterations,
            "final_J": result.value,
            "final_grad_norm": result.grad_norm,
            "global_applications": result.global_applications,
            "local_applications": result.local_applications,
            "local_solves": result.local_solves,
        })

    header = (f"{'solver':<16} {'iters':>5} {'J':>14} {'|g|':>10} "
              f"{'global Hv':>10} {'local Hv':>10} {'solves':>7}")
    print(f"plane compression, mesh {args.mesh}x{args.mesh} "
          f"(n = {problem.dim}), {args.blocks} subdomains, "
          f"start #{args.start}")
    print(header)
    print("-" * len(header))
    for r in rows:
        flag = "" if r["converged"] else "  (DID NOT CONVERGE)"
        print(f"{r['solver']:<16} {r['iterations']:>5} {r['final_J']:>14.6e} "
              f"{r['final_grad_norm']:>10.2e} {r['global_applications']:>10} "
              f"{r['local_applications']:>10} {r['local_solves']:>7}{flag}")

    summary_path = args.out / "summary.json"
    summary_path.write_text(json.dumps({"mesh": args.mesh,
                                        "blocks": args.blocks,
                                        "start": args.start,
                                        "variants": rows},
                                       indent=2, sort_keys=True) + "\n")
    print(f"\ntraces and summary written to {args.out}/")
    return 0 if all(r["converged"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
