"""Command-line harness: run solvers, compare variants, and check problems.

Exit codes: 0 success (run converged / checks passed / comparison produced),
1 non-convergence or a failed consistency check, 2 configuration errors,
3 infeasible start point.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .decomposition import Decomposition, SchwarzOperator, local_objective
from .driver import gaspin_solve
from .linalg import invertibility_shift
from .preconditioning import PerturbationBoundError
from .problems import (InfeasiblePointError, Problem, directional_derivative_fd,
                       fd_check_gradient)
from .trace import write_summary, write_trace
from .trust_region import SolveResult, tr_solve

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _solve_variant(solver: str, config: RunConfig, problem: Problem,
                   u0: np.ndarray) -> SolveResult:
    if solver == "tr":
        return tr_solve(problem, u0, config.trust_region_config())
    decomp = config.decomposition.build(problem.dim)
    return gaspin_solve(problem, decomp, u0, config.gaspin_config(solver))


def _summary_entry(solver: str, result: SolveResult) -> dict:
    return {
        "solver": solver,
        "iterations": result.iterations,
        "converged": result.converged,
        "final_J": result.value,
        "final_grad_norm": result.grad_norm,
        "global_applications": result.global_applications,
        "local_applications": result.local_applications,
        "local_solves": result.local_solves,
    }


def _run_metadata(config: RunConfig, problem: Problem) -> dict:
    meta = {
        "problem": config.problem.name,
        "dim": problem.dim,
        "seed": config.seed,
        "workers": config.workers,
    }
    if config.decomposition is not None:
        meta["blocks"] = config.decomposition.blocks
        meta["overlap"] = config.decomposition.overlap
    return meta


def cmd_run(config: RunConfig, out_dir: Path) -> int:
    problem = config.problem.build()
    u0 = config.start.build(problem, config.seed)
    solver = config.solvers[0]
    result = _solve_variant(solver, config, problem, u0)

    write_trace(out_dir / config.output_name("trace", "trace.csv"),
                result.records)
    summary = _run_metadata(config, problem)
    summary.update(_summary_entry(solver, result))
    write_summary(out_dir / config.output_name("summary", "summary.json"),
                  summary)

    if not result.converged:
        print(f"did not converge: final grad_norm = {result.grad_norm!r}",
              file=sys.stderr)
        return EXIT_FAILED
    print(f"converged in {result.iterations} iterations, "
          f"grad_norm = {result.grad_norm!r}")
    return EXIT_OK


def _write_compare_csv(path: Path, solvers, results) -> None:
    header = ["iter"]
    for solver in solvers:
        header += [f"J_{solver}", f"grad_norm_{solver}"]
    rows = max(len(r.records) for r in results)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(rows):
            row = [str(i)]
            for result in results:
                if i < len(result.records):
                    rec = result.records[i]
                    row += [repr(float(rec.J)), repr(float(rec.grad_norm))]
                else:
                    row += ["", ""]
            writer.writerow(row)


def cmd_compare(config: RunConfig, out_dir: Path) -> int:
    problem = config.problem.build()
    u0 = config.start.build(problem, config.seed)
    results = [_solve_variant(s, config, problem, u0.copy())
               for s in config.solvers]

    entries = []
    for solver, result in zip(config.solvers, results):
        write_trace(out_dir / f"trace-{solver}.csv", result.records)
        entries.append(_summary_entry(solver, result))
    _write_compare_csv(out_dir / config.output_name("compare", "compare.csv"),
                       config.solvers, results)

    max_diff = 0.0
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            diff = float(np.max(np.abs(results[i].u - results[j].u)))
            max_diff = max(max_diff, diff)
    agreement = max_diff <= config.compare_tolerance

    summary = _run_metadata(config, problem)
    summary.update({
        "variants": entries,
        "agreement": agreement,
        "max_final_iterate_difference": max_diff,
        "compare_tolerance": config.compare_tolerance,
    })
    write_summary(out_dir / config.output_name("summary", "summary.json"),
                  summary)

    if not all(r.converged for r in results):
        worst = min(results, key=lambda r: r.converged)
        print(f"did not converge: final grad_norm = {worst.grad_norm!r}",
              file=sys.stderr)
        return EXIT_FAILED
    if not agreement:
        print(f"warning: variants disagree, max final-iterate difference "
              f"{max_diff!r} exceeds tolerance {config.compare_tolerance!r}",
              file=sys.stderr)
    else:
        print(f"variants agree within {config.compare_tolerance!r} "
              f"(max difference {max_diff!r})")
    return EXIT_OK


def _feasible_sample(problem: Problem, seed: int) -> np.ndarray:
    """A deterministic feasible point away from zero for consistency checks."""
    rng = np.random.default_rng(seed + 17)
    scale = 0.1
    for _ in range(40):
        u = scale * rng.standard_normal(problem.dim)
        if problem.feasible(u):
            return u
        scale *= 0.5
    return np.zeros(problem.dim)


def _check_problem(spec, decomp_spec, seed: int):
    """Yields (check name, passed, measured detail) tuples for one problem."""
    problem = spec.build()
    u = _feasible_sample(problem, seed)
    rng = np.random.default_rng(seed + 29)
    grad_tol = 1e-5 if spec.name == "elasticity" else 1e-6

    err = fd_check_gradient(problem, u)
    yield "fd-gradient", err <= grad_tol, f"max rel err {err:.3e} (tol {grad_tol:.0e})"

    operator = problem.hessian(u)
    dense = operator.dense()
    worst = 0.0
    for _ in range(50):
        v = rng.standard_normal(problem.dim)
        w = rng.standard_normal(problem.dim)
        lhs = float(dense @ v @ w)
        rhs = float(v @ (dense @ w))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    yield "hessian-symmetry", worst <= 1e-12, f"max rel asym {worst:.3e}"

    worst = 0.0
    for _ in range(5):
        v = rng.standard_normal(problem.dim)
        fd = directional_derivative_fd(problem, u, v)
        hv = dense @ v
        worst = max(worst,
                    float(np.linalg.norm(hv - fd) / max(1.0, np.linalg.norm(hv))))
    yield "hessian-vector-fd", worst <= 1e-4, f"max rel err {worst:.3e}"

    decomp = decomp_spec.build(problem.dim)
    worst = 0.0
    for k in range(decomp.n_subdomains):
        for _ in range(10):
            w = rng.standard_normal(decomp.local_dim(k))
            v = rng.standard_normal(problem.dim)
            lhs = float(decomp.prolongate(k, w) @ v)
            rhs = float(w @ decomp.restrict(k, v))
            worst = max(worst, abs(lhs - rhs))
    yield "adjointness", worst <= 1e-14, f"max abs err {worst:.3e}"

    total = np.zeros(problem.dim)
    for k in range(decomp.n_subdomains):
        total += decomp.prolongate(k, decomp.restrict(k, np.ones(problem.dim)))
    err = float(np.max(np.abs(total - decomp.multiplicity)))
    yield "partition-identity", err == 0.0, f"max abs err {err:.3e}"

    g = problem.gradient(u)
    locals_ = [local_objective(decomp, k, problem, u, g)
               for k in range(decomp.n_subdomains)]
    # The round trip exercises the scatter/gather/factorization plumbing, so
    # shift each block well clear of singularity: an indefinite Hessian pushed
    # to a 1e-8 floor would drown the identity in conditioning error.
    blocks = []
    for lo in locals_:
        mat = lo.objective.hessian_matrix(lo.base)
        lam_max = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (mat + mat.T)))))
        blocks.append(invertibility_shift(mat, floor=0.01 * max(1.0, lam_max)))
    schwarz = SchwarzOperator(decomp, blocks)
    worst = 0.0
    for _ in range(5):
        v = rng.standard_normal(problem.dim)
        back = schwarz.apply_Cinv(schwarz.apply_C(v))
        worst = max(worst,
                    float(np.linalg.norm(back - v) / max(1e-30, np.linalg.norm(v))))
    yield "schwarz-roundtrip", worst <= 1e-10, f"max rel err {worst:.3e}"


def cmd_check(config: RunConfig, out_dir: Path) -> int:
    decomp_spec = config.decomposition
    failures = []
    print(f"{'problem':<14} {'check':<20} {'result':<6} detail")
    for spec in config.problems:
        for name, passed, detail in _check_problem(spec, decomp_spec, config.seed):
            verdict = "PASS" if passed else "FAIL"
            print(f"{spec.name:<14} {name:<20} {verdict:<6} {detail}")
            if not passed:
                failures.append((spec.name, name))
    if failures:
        for problem_name, check_name in failures:
            print(f"check failed: {problem_name}: {check_name}", file=sys.stderr)
        return EXIT_FAILED
    print("all checks passed")
    return EXIT_OK


def cmd_dump_schwarz(config: RunConfig, out_dir: Path) -> int:
    problem = config.problem.build()
    u0 = config.start.build(problem, config.seed)
    decomp = config.decomposition.build(problem.dim)
    g = problem.gradient(u0)
    floor = config.gaspin_fields.get("block_floor", 1e-8)
    locals_ = [local_objective(decomp, k, problem, u0, g)
               for k in range(decomp.n_subdomains)]
    blocks = [invertibility_shift(lo.objective.hessian_matrix(lo.base), floor)
              for lo in locals_]
    schwarz = SchwarzOperator(decomp, blocks)
    dense = schwarz.dense()
    path = out_dir / config.output_name("schwarz", "schwarz.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in dense:
            writer.writerow([repr(float(x)) for x in row])
    print(f"wrote {dense.shape[0]}x{dense.shape[1]} Schwarz operator to {path}")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "compare": cmd_compare,
    "check": cmd_check,
    "dump-schwarz": cmd_dump_schwarz,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaspin",
        description="Trust-region and G-ASPIN solver harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("run", "run one solver and write trace/summary"),
            ("compare", "run several solver variants from the same start"),
            ("check", "run gradient/Hessian/decomposition consistency checks"),
            ("dump-schwarz", "write the dense Schwarz operator as CSV")):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON config file")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--workers", type=int, default=None,
                         help="override worker count")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override RNG seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.command)
        if args.workers is not None:
            if args.workers < 0:
                raise ConfigError("workers must be >= 0")
            config = dataclasses.replace(config, workers=args.workers)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](config, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasiblePointError as exc:
        print(f"infeasible start: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PerturbationBoundError as exc:
        print(f"perturbation bound violated: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
