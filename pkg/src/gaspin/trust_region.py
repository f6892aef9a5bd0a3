"""Trust-region globalization: Cauchy point, truncated CG, radius control.

The subproblem is min psi(s) = <g, s> + 0.5 <s, Bs> over ||s|| <= delta.
``steihaug_toint`` runs CG truncated at the boundary or at negative
curvature and never returns a point worse than the Cauchy point, which is
what the decrease analysis of the outer loops relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import SymmetricOperator
from .problems import InfeasiblePointError, Problem, model_hessian
from .trace import IterationRecord

__all__ = [
    "TrustRegionConfig",
    "QuadraticModel",
    "SolveResult",
    "cauchy_point",
    "steihaug_toint",
    "decrease_ratio",
    "radius_update",
    "tr_solve",
]


@dataclass
class TrustRegionConfig:
    """Knobs of the basic trust-region loop.

    ``cg_tol=None`` selects the forcing rule min(0.1, sqrt(||g||));
    ``max_cg=None`` caps CG at 2n iterations.  A ratio exactly equal to
    ``eta`` counts as a success.
    """

    eta: float = 0.1
    gamma1: float = 0.5
    gamma2: float = 2.0
    delta0: float = 1.0
    max_iters: int = 500
    grad_tol: float = 1e-6
    cg_tol: float | None = None
    max_cg: int | None = None
    hessian_mode: str = "analytic"

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if not 0.0 < self.gamma1 < 1.0 < self.gamma2:
            raise ValueError("need 0 < gamma1 < 1 < gamma2")
        if self.delta0 <= 0.0:
            raise ValueError("delta0 must be positive")


class QuadraticModel:
    """Quadratic model psi(s) = <g, s> + 0.5 <s, Bs> around an iterate."""

    def __init__(self, g: np.ndarray, B: SymmetricOperator):
        self.g = np.asarray(g, dtype=float)
        if self.g.shape != (B.dim,):
            raise ValueError("gradient and operator dimensions differ")
        self.B = B

    @property
    def dim(self) -> int:
        return self.B.dim

    def psi(self, s: np.ndarray) -> float:
        s = np.asarray(s, dtype=float)
        return float(self.g @ s + 0.5 * (s @ self.B.apply(s)))


def cauchy_point(model: QuadraticModel, delta: float) -> np.ndarray:
    """Minimizer of the model along -g inside the ball of radius delta."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    g = model.g
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return np.zeros_like(g)
    curvature = float(g @ model.B.apply(g))
    if curvature <= 0.0:
        t = delta / gnorm
    else:
        t = min(gnorm**2 / curvature, delta / gnorm)
    return -t * g


def _to_boundary(s: np.ndarray, d: np.ndarray, delta: float) -> np.ndarray:
    """Positive step along d from s to the sphere of radius delta."""
    sd = float(s @ d)
    dd = float(d @ d)
    rad = sd**2 + dd * (delta**2 - float(s @ s))
    tau = (-sd + math.sqrt(max(rad, 0.0))) / dd
    return s + tau * d


def steihaug_toint(model: QuadraticModel, delta: float, cg_tol: float,
                   max_cg: int) -> np.ndarray:
    """Truncated-CG subproblem solve with a Cauchy-point safeguard.

    Stops at the boundary when CG leaves the ball or meets non-positive
    curvature, or when the residual drops below ``cg_tol * ||g||``.  The
    returned step always achieves at least the Cauchy decrease.
    """
    g = model.g
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return np.zeros_like(g)
    s = np.zeros_like(g)
    r = g.copy()
    d = -g
    rr = float(r @ r)
    for _ in range(max_cg):
        bd = model.B.apply(d)
        curvature = float(d @ bd)
        if curvature <= 0.0:
            s = _to_boundary(s, d, delta)
            break
        alpha = rr / curvature
        s_next = s + alpha * d
        if float(np.linalg.norm(s_next)) >= delta:
            s = _to_boundary(s, d, delta)
            break
        s = s_next
        r = r + alpha * bd
        rr_next = float(r @ r)
        if math.sqrt(rr_next) <= cg_tol * gnorm:
            break
        d = -r + (rr_next / rr) * d
        rr = rr_next
    fallback = cauchy_point(model, delta)
    if model.psi(s) > model.psi(fallback):
        return fallback
    return s


def decrease_ratio(problem: Problem, u: np.ndarray, s: np.ndarray,
                   model: QuadraticModel) -> float:
    """rho = (J(u) - J(u+s)) / (-psi(s)); -inf when the trial is infeasible.

    A non-negative predicted decrease indicates a caller bug (the step did
    not decrease the model) and raises.
    """
    pred = -model.psi(s)
    if pred <= 0.0:
        raise ValueError("step does not decrease the model; psi(s) >= 0")
    j_current = problem.value(u)
    if j_current is None:
        raise InfeasiblePointError("current iterate is infeasible")
    j_trial = problem.value(u + s)
    if j_trial is None:
        return -math.inf
    return (j_current - j_trial) / pred


def radius_update(delta: float, rho: float, config: TrustRegionConfig) -> float:
    """Grow the radius on success (rho >= eta, ties succeed), shrink otherwise."""
    if rho >= config.eta:
        return config.gamma2 * delta
    return config.gamma1 * delta


@dataclass
class SolveResult:
    """Outcome of a solver run: final iterate plus the full iteration trace."""

    u: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    records: list = field(default_factory=list)
    global_applications: int = 0
    local_applications: int = 0
    local_solves: int = 0


def _effective_cg(config: TrustRegionConfig, gnorm: float, n: int) -> tuple[float, int]:
    cg_tol = config.cg_tol if config.cg_tol is not None else min(0.1, math.sqrt(gnorm))
    max_cg = config.max_cg if config.max_cg is not None else 2 * n
    return cg_tol, max_cg


def tr_solve(problem: Problem, u0: np.ndarray,
             config: TrustRegionConfig | None = None) -> SolveResult:
    """Minimize ``problem`` from ``u0`` with the basic trust-region loop.

    The gradient and Hessian are only re-evaluated after accepted steps.
    Raises ``InfeasiblePointError`` when the start itself is infeasible;
    running out of iterations is reported via ``converged=False``, not as an
    exception.
    """
    if config is None:
        config = TrustRegionConfig()
    u = np.asarray(u0, dtype=float).copy()
    j_current = problem.value(u)
    if j_current is None:
        raise InfeasiblePointError("start point is infeasible")
    g = problem.gradient(u)
    delta = config.delta0
    records: list[IterationRecord] = []
    operator = None
    retired_applications = 0
    converged = False

    for it in range(config.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= config.grad_tol:
            converged = True
            break
        if operator is None:
            operator = model_hessian(problem, u, mode=config.hessian_mode)
        model = QuadraticModel(g, operator)
        cg_tol, max_cg = _effective_cg(config, gnorm, problem.dim)
        s = steihaug_toint(model, delta, cg_tol, max_cg)
        pred = -model.psi(s)
        sc = cauchy_point(model, delta)
        cauchy_decrease = -model.psi(sc)
        if pred <= 0.0:
            raise ValueError("trust-region step failed to decrease the model")
        j_trial = problem.value(u + s)
        rho = -math.inf if j_trial is None else (j_current - j_trial) / pred
        accepted = rho >= config.eta
        records.append(IterationRecord(
            iter=it, J=j_current, grad_norm=gnorm, gtilde_norm=gnorm,
            perturbation_norm=0.0, deltaG=delta, deltaL=0.0, rho_tilde=rho,
            alpha=0.0, decrease_ok=True, accepted=accepted,
            ared=math.nan if j_trial is None else j_current - j_trial,
            pred_tilde=pred, cauchy_decrease_tilde=cauchy_decrease,
            cauchy_decrease_plain=cauchy_decrease,
            global_applications=retired_applications + operator.applications,
        ))
        delta = radius_update(delta, rho, config)
        if accepted:
            u = u + s
            j_current = j_trial
            g = problem.gradient(u)
            retired_applications += operator.applications
            operator = None
    else:
        gnorm = float(np.linalg.norm(g))
        converged = gnorm <= config.grad_tol

    if operator is not None:
        retired_applications += operator.applications
    return SolveResult(
        u=u, value=j_current, grad_norm=float(np.linalg.norm(g)),
        iterations=len(records), converged=converged, records=records,
        global_applications=retired_applications,
    )
