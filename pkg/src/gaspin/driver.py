"""Trust-region outer loop driven by the preconditioned gradient.

The outer model replaces the gradient by the recombined subdomain direction
gtilde and is controlled by two radii: deltaG bounds the step, deltaL bounds
the perturbation ||gtilde - g||.  A step is accepted only when the ratio
test on the perturbed model succeeds *and* the extended decrease check
(Cauchy decrease of the perturbed model vs. Cauchy decrease of the true
model) certifies that the perturbed decrease still dominates a fixed
fraction of the true one.  On a ratio success without that certificate the
global radius stalls and only deltaL shrinks, which drives gtilde back
towards g; pure failures shrink both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomposition import Decomposition, SchwarzOperator, local_objective
from .linalg import SymmetricOperator, invertibility_shift
from .preconditioning import (admissible_omega, aspin_gradient, gtilde_damped,
                              gtilde_trust_region, local_solve_constrained,
                              local_solve_free, OMEGA_RULES)
from .problems import InfeasiblePointError, Problem, model_hessian
from .runtime import parallel_map
from .trace import IterationRecord
from .trust_region import (QuadraticModel, SolveResult, TrustRegionConfig,
                           cauchy_point, steihaug_toint)

__all__ = [
    "GaspinConfig",
    "STRATEGIES",
    "preconditioned_model",
    "extended_decrease_check",
    "dual_radius_update",
    "accept_step",
    "gaspin_solve",
]

STRATEGIES = ("tr", "damping")


@dataclass
class GaspinConfig(TrustRegionConfig):
    """Outer-loop knobs plus the subdomain-solve controls.

    ``strategy`` selects how the perturbation bound is enforced: "tr" clamps
    the local solves around their Newton start (disjoint subdomains only),
    "damping" blends the recombined direction with the gradient.  The
    decrease check uses constants c1 > c2 > 0.  ``deltaL0`` is clamped to
    ``delta0`` at startup so the perturbation radius never starts above the
    step radius.
    """

    c1: float = 1.0
    c2: float = 0.5
    deltaL0: float = 1.0
    strategy: str = "tr"
    local_max_iters: int = 20
    local_grad_tol: float = 1e-9
    local_delta0: float = 1.0
    omega_fraction: float = 0.9
    omega_rule: str = "inverse-norm"
    block_floor: float = 1e-8
    bound_deltaL_with_updated_deltaG: bool = False
    workers: int = 1

    def __post_init__(self):
        super().__post_init__()
        if not self.c1 > self.c2 > 0.0:
            raise ValueError("need c1 > c2 > 0")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.omega_rule not in OMEGA_RULES:
            raise ValueError(f"unknown omega rule {self.omega_rule!r}")
        if self.deltaL0 <= 0.0:
            raise ValueError("deltaL0 must be positive")
        if self.local_max_iters < 0 or self.local_grad_tol < 0.0:
            raise ValueError("local solve caps must be non-negative")


def preconditioned_model(g_tilde: np.ndarray, operator: SymmetricOperator) -> QuadraticModel:
    """Quadratic model with the perturbed linear term and the true Hessian."""
    return QuadraticModel(g_tilde, operator)


def _cauchy_decreases(model_tilde: QuadraticModel, model_plain: QuadraticModel,
                      deltaG: float) -> tuple[float, float]:
    dec_tilde = -model_tilde.psi(cauchy_point(model_tilde, deltaG))
    dec_plain = -model_plain.psi(cauchy_point(model_plain, deltaG))
    return dec_tilde, dec_plain


def extended_decrease_check(s: np.ndarray, model_tilde: QuadraticModel,
                            model_plain: QuadraticModel, deltaG: float,
                            c1: float, c2: float) -> bool:
    """c1 * (Cauchy decrease of perturbed model) >= c2 * (true Cauchy decrease).

    The step ``s`` is expected to decrease the perturbed model at least as
    much as that model's Cauchy point (the subproblem solver guarantees it),
    so certifying the Cauchy points certifies the step.  A zero gtilde fails
    the check unless the true gradient vanishes as well.
    """
    del s  # the certificate is evaluated at the Cauchy points
    dec_tilde, dec_plain = _cauchy_decreases(model_tilde, model_plain, deltaG)
    return c1 * dec_tilde >= c2 * dec_plain


def dual_radius_update(deltaG: float, deltaL: float, decrease_ok: bool,
                       rho_tilde: float, config: GaspinConfig) -> tuple[float, float]:
    """Coupled update of the step radius and the perturbation radius.

    deltaL grows/shrinks with the decrease certificate and is capped by the
    incoming deltaG (set ``bound_deltaL_with_updated_deltaG`` to cap by the
    outgoing value instead, which keeps deltaL <= deltaG invariant even when
    deltaG shrinks).  deltaG grows only when both tests pass, stalls when
    the ratio passes but the certificate fails, and shrinks otherwise.
    """
    tentative_l = config.gamma2 * deltaL if decrease_ok else config.gamma1 * deltaL
    if rho_tilde >= config.eta and decrease_ok:
        new_g = config.gamma2 * deltaG
    elif rho_tilde >= config.eta:
        new_g = deltaG
    else:
        new_g = config.gamma1 * deltaG
    anchor = new_g if config.bound_deltaL_with_updated_deltaG else deltaG
    return new_g, min(anchor, tentative_l)


def accept_step(rho_tilde: float, decrease_ok: bool, eta: float) -> bool:
    """Accept iff the perturbed ratio succeeds and the certificate holds."""
    return rho_tilde >= eta and decrease_ok


class _IterateCache:
    """Everything derived from the current iterate (survives stalls)."""

    def __init__(self, problem: Problem, decomp: Decomposition, u: np.ndarray,
                 g: np.ndarray, config: GaspinConfig):
        self.operator = model_hessian(problem, u, mode=config.hessian_mode)
        self.local_objectives = [local_objective(decomp, k, problem, u, g)
                                 for k in range(decomp.n_subdomains)]
        blocks = [invertibility_shift(lo.objective.hessian_matrix(lo.base),
                                      floor=config.block_floor)
                  for lo in self.local_objectives]
        self.schwarz = SchwarzOperator(decomp, blocks)
        self.norm_c = self.schwarz.norm() if config.strategy == "tr" else None
        if config.strategy == "tr":
            for k in range(decomp.n_subdomains):
                self.schwarz.factor(k)
        self.free_reports = None  # damping-strategy reports are deltaL-free
        self.seen_global = 0
        self.seen_schwarz = 0

    def drain_counts(self) -> tuple[int, int]:
        """New operator applications since the last call (global, schwarz)."""
        d_global = self.operator.applications - self.seen_global
        self.seen_global = self.operator.applications
        schwarz_total = self.schwarz.applications + self.schwarz.solves
        d_schwarz = schwarz_total - self.seen_schwarz
        self.seen_schwarz = schwarz_total
        return d_global, d_schwarz


def gaspin_solve(problem: Problem, decomp: Decomposition, u0: np.ndarray,
                 config: GaspinConfig | None = None) -> SolveResult:
    """Minimize ``problem`` with the preconditioned dual-radius loop.

    Local solves fan out through ``parallel_map`` (results are identical for
    any worker count).  After a rejected step with a failed certificate the
    subdomain solves are re-run with the shrunken deltaL while the iterate,
    gradient and Hessian stay cached; the "damping" strategy reuses its
    deltaL-independent local reports in that situation.
    """
    if config is None:
        config = GaspinConfig()
    if decomp.n != problem.dim:
        raise ValueError("decomposition size does not match problem dimension")
    if config.strategy == "tr" and decomp.overlapping:
        raise ValueError("the constrained strategy requires disjoint subdomains")

    u = np.asarray(u0, dtype=float).copy()
    j_current = problem.value(u)
    if j_current is None:
        raise InfeasiblePointError("start point is infeasible")
    g = problem.gradient(u)
    deltaG = config.delta0
    deltaL = min(config.deltaL0, deltaG)
    records: list[IterationRecord] = []
    cache: _IterateCache | None = None
    totals = {"global": 0, "local": 0, "solves": 0}
    converged = False

    for it in range(config.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= config.grad_tol:
            converged = True
            break
        if cache is None:
            cache = _IterateCache(problem, decomp, u, g, config)

        if config.strategy == "tr":
            omega = admissible_omega(cache.norm_c, decomp.n_subdomains, deltaL,
                                     rule=config.omega_rule,
                                     fraction=config.omega_fraction)
            reports = parallel_map(
                lambda k: local_solve_constrained(cache.local_objectives[k],
                                                  cache.schwarz.factor(k),
                                                  omega, deltaL, config),
                range(decomp.n_subdomains), workers=config.workers)
            totals["local"] += sum(r.applications for r in reports)
            totals["solves"] += sum(r.solves for r in reports)
            pg = gtilde_trust_region(cache.schwarz, aspin_gradient(decomp, reports),
                                     g, deltaL)
        else:
            if cache.free_reports is None:
                cache.free_reports = parallel_map(
                    lambda k: local_solve_free(cache.local_objectives[k], config),
                    range(decomp.n_subdomains), workers=config.workers)
                totals["local"] += sum(r.applications for r in cache.free_reports)
                totals["solves"] += sum(r.solves for r in cache.free_reports)
            reports = cache.free_reports
            pg = gtilde_damped(cache.schwarz, decomp, reports, g, deltaL)

        gt_norm = float(np.linalg.norm(pg.g_tilde))
        local_iters = tuple(r.iterations for r in reports)

        if gt_norm == 0.0:
            # No usable direction; count it as a failed iteration so both
            # radii shrink and the construction is retried closer to g.
            d_global, d_schwarz = cache.drain_counts()
            totals["global"] += d_global
            totals["local"] += d_schwarz
            records.append(IterationRecord(
                iter=it, J=j_current, grad_norm=gnorm, gtilde_norm=0.0,
                perturbation_norm=pg.perturbation_norm, deltaG=deltaG,
                deltaL=deltaL, rho_tilde=-math.inf, alpha=pg.alpha,
                decrease_ok=False, accepted=False, n_local_iters=local_iters,
                global_applications=totals["global"],
                local_applications=totals["local"], local_solves=totals["solves"]))
            deltaG, deltaL = dual_radius_update(deltaG, deltaL, False,
                                                -math.inf, config)
            continue

        model_tilde = preconditioned_model(pg.g_tilde, cache.operator)
        model_plain = QuadraticModel(g, cache.operator)
        cg_tol = config.cg_tol if config.cg_tol is not None else min(0.1, math.sqrt(gt_norm))
        max_cg = config.max_cg if config.max_cg is not None else 2 * problem.dim
        s = steihaug_toint(model_tilde, deltaG, cg_tol, max_cg)
        pred = -model_tilde.psi(s)
        dec_tilde, dec_plain = _cauchy_decreases(model_tilde, model_plain, deltaG)
        if pred < dec_tilde:
            raise ValueError("subproblem step fell below the Cauchy decrease")
        decrease_ok = config.c1 * dec_tilde >= config.c2 * dec_plain
        j_trial = problem.value(u + s)
        rho = -math.inf if j_trial is None else (j_current - j_trial) / pred
        accepted = accept_step(rho, decrease_ok, config.eta)

        d_global, d_schwarz = cache.drain_counts()
        totals["global"] += d_global
        totals["local"] += d_schwarz
        records.append(IterationRecord(
            iter=it, J=j_current, grad_norm=gnorm, gtilde_norm=gt_norm,
            perturbation_norm=pg.perturbation_norm, deltaG=deltaG, deltaL=deltaL,
            rho_tilde=rho, alpha=pg.alpha, decrease_ok=decrease_ok,
            accepted=accepted, n_local_iters=local_iters,
            ared=math.nan if j_trial is None else j_current - j_trial,
            pred_tilde=pred, cauchy_decrease_tilde=dec_tilde,
            cauchy_decrease_plain=dec_plain,
            global_applications=totals["global"],
            local_applications=totals["local"], local_solves=totals["solves"]))
        deltaG, deltaL = dual_radius_update(deltaG, deltaL, decrease_ok, rho, config)
        if accepted:
            u = u + s
            j_current = j_trial
            g = problem.gradient(u)
            cache = None
    else:
        converged = float(np.linalg.norm(g)) <= config.grad_tol

    return SolveResult(
        u=u, value=j_current, grad_norm=float(np.linalg.norm(g)),
        iterations=len(records), converged=converged, records=records,
        global_applications=totals["global"],
        local_applications=totals["local"], local_solves=totals["solves"])
