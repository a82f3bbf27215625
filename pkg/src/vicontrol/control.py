"""Quadratic-cost distributed control of the obstacle-constrained states.

The cost of a control g is J(g) = 1/2 ||u_g||_H^2 + (M/2) ||g||_H^2 where
u_g solves the selected state system.  Controls are discretized in the same
P1 nodal space as the state, which makes every H inner product exact; this
discretization choice is recorded in all output metadata.

J is smooth wherever the contact set of u_g is locally stable.  The
gradient model freezes the contact set of the current state, solves the
reduced adjoint equation there, and uses M g + w (w the adjoint lift) as
the H-Riesz gradient.  A derivative-free compass search over the nodal
basis serves as the optimizer oracle on small meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assembly import AssembledSystem, ProblemData, as_control_field, norm_H
from .errors import InvalidParameterError, LineSearchError, NonConvergenceError
from .mesh import Mesh, ScalarField
from .vi_solver import (
    ROBIN,
    VIReport,
    adjoint_lift,
    build_vi_problem,
    solve_active_set,
    solve_psor,
)

ARMIJO_C = 1e-4
BACKTRACK = 0.5
INITIAL_STEP = 1.0
MAX_BACKTRACKS = 60
DEFAULT_OPT_TOL = 1e-8
NONNEG_GUARD = 1e-12
CONJECTURE_TOL = 1e-9


@dataclass(frozen=True)
class CostReport:
    """Cost value and its exact decomposition."""

    value: float
    state_term: float
    control_term: float
    state: VIReport


@dataclass(frozen=True)
class OptimizeReport:
    """Optimal control candidate with solver provenance.

    ``gradient_norm_final`` is the H-norm of the frozen-set gradient for the
    gradient method and the final step size for the compass search.
    """

    g_opt: ScalarField
    J_opt: float
    iterations: int
    gradient_norm_final: float
    method: str
    history: tuple


@dataclass(frozen=True)
class ConjectureTrial:
    trial: int
    mu: float
    min_margin_pointwise: float
    h_norm_margin: float
    convexity_gap: float
    identity_residual: float


@dataclass(frozen=True)
class ConjectureReport:
    """Evidence table for the two open ordering questions.

    For random controls g1, g2 and mu in [0, 1], u3 is the convex
    combination of the two states and u4 the state of the combined control.
    min_margin_pointwise = min(u3 - u4) and h_norm_margin =
    ||u3||_H - ||u4||_H; negative values witness counterexamples and are
    reported, never asserted.  Only u4 >= 0 (guaranteed by feasibility) is
    enforced.  identity_residual checks the unconditional algebraic identity
    relating the convexity gap of J to (||u3||^2 - ||u4||^2)/2.
    """

    trials: tuple
    pointwise_violations: int
    h_norm_violations: int
    convexity_violations: int
    witnesses: tuple


class _Evaluator:
    """Shared machinery for repeated solves with varying control."""

    def __init__(self, mesh, sys, data, family, solver="active_set", tol=1e-11):
        self.mesh = mesh
        self.sys = sys
        self.data = data
        self.family = family
        self.solver = solver
        self.tol = tol
        self.base = build_vi_problem(mesh, sys, data=replace(data, g=0.0), family=family)
        self.factor_cache: dict = {}
        self.warm: np.ndarray | None = None

    def state(self, gvals: np.ndarray) -> VIReport:
        problem = replace(self.base, F=self.base.F + self.sys.M_H @ gvals)
        if self.solver == "psor":
            rep = solve_psor(problem, tol=self.tol, mesh=self.mesh)
        else:
            rep = solve_active_set(
                problem,
                tol=self.tol,
                factor_cache=self.factor_cache,
                initial_active=self.warm,
                mesh=self.mesh,
            )
        self.warm = rep.active_set
        return rep

    def cost(self, gvals: np.ndarray) -> CostReport:
        rep = self.state(gvals)
        u = rep.values()
        state_term = 0.5 * float(u @ (self.sys.M_H @ u))
        control_term = 0.5 * self.data.M_cost * float(gvals @ (self.sys.M_H @ gvals))
        return CostReport(
            value=state_term + control_term,
            state_term=state_term,
            control_term=control_term,
            state=rep,
        )

    def gradient(self, gvals: np.ndarray, rep: VIReport) -> np.ndarray:
        """Frozen-contact-set H-Riesz gradient M g + adjoint lift of u."""
        u = rep.values()
        problem = replace(self.base, F=self.base.F + self.sys.M_H @ gvals)
        w = adjoint_lift(problem, rep.active_set, self.sys.M_H @ u, self.factor_cache)
        return self.data.M_cost * gvals + w


def cost(
    mesh: Mesh,
    sys: AssembledSystem,
    data: ProblemData,
    family: str = ROBIN,
    solver: str = "active_set",
    tol: float = 1e-11,
) -> CostReport:
    """Evaluate the cost of data.g, solving the state system once."""
    ev = _Evaluator(mesh, sys, data, family, solver=solver, tol=tol)
    g = as_control_field(mesh, data.g)
    return ev.cost(g.values)


def optimize(
    mesh: Mesh,
    sys: AssembledSystem,
    data: ProblemData,
    family: str = ROBIN,
    method: str = "proj_grad_adjoint",
    tol: float = DEFAULT_OPT_TOL,
    max_iter: int = 500,
    g0: ScalarField | None = None,
    solver: str = "active_set",
    state_tol: float = 1e-12,
) -> OptimizeReport:
    """Minimize the cost over the nodal control space.

    ``proj_grad_adjoint`` runs gradient descent with the frozen-set adjoint
    gradient and Armijo backtracking; it terminates when the H-norm of the
    gradient drops to tol.  ``coord_search`` is a derivative-free compass
    search over the nodal basis (first improvement, lexicographic node
    order) that stops once its step falls below tol; intended as an oracle
    on small meshes.
    """
    if data.M_cost <= 0:
        raise InvalidParameterError("optimization requires M_cost > 0")
    ev = _Evaluator(mesh, sys, data, family, solver=solver, tol=state_tol)
    g = np.zeros(mesh.node_count) if g0 is None else g0.values.copy()
    if method == "proj_grad_adjoint":
        return _proj_grad(ev, g, tol, max_iter)
    if method == "coord_search":
        return _coord_search(ev, g, tol, max_iter)
    raise InvalidParameterError(f"unknown method {method!r}")


def _proj_grad(ev: _Evaluator, g: np.ndarray, tol: float, max_iter: int) -> OptimizeReport:
    report = ev.cost(g)
    history = [report.value]
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        grad = ev.gradient(g, report.state)
        gnorm = norm_H(ev.sys, grad)
        if gnorm <= tol:
            return _opt_report(ev, g, report, it - 1, gnorm, "proj_grad_adjoint", history)
        step = INITIAL_STEP
        accepted = None
        for _ in range(MAX_BACKTRACKS):
            trial = g - step * grad
            trial_report = ev.cost(trial)
            if trial_report.value <= report.value - ARMIJO_C * step * gnorm * gnorm:
                accepted = (trial, trial_report)
                break
            step *= BACKTRACK
        if accepted is None:
            best = _opt_report(ev, g, report, it - 1, gnorm, "proj_grad_adjoint", history)
            raise LineSearchError(
                f"line search stalled at gradient norm {gnorm:.3e} (tol {tol:.1e})",
                best=best,
            )
        g, report = accepted
        history.append(report.value)
    best = _opt_report(ev, g, report, max_iter, gnorm, "proj_grad_adjoint", history)
    raise NonConvergenceError(
        f"gradient method: ||grad||_H = {gnorm:.3e} > tol {tol:.1e} after {max_iter} steps",
        residual=gnorm,
        best=best,
    )


def _coord_search(ev: _Evaluator, g: np.ndarray, tol: float, max_iter: int) -> OptimizeReport:
    report = ev.cost(g)
    history = [report.value]
    step = INITIAL_STEP
    evaluations = 0
    for _ in range(max_iter):
        improved = False
        for i in range(g.size):  # lexicographic node order
            for sign in (1.0, -1.0):
                trial = g.copy()
                trial[i] += sign * step
                trial_report = ev.cost(trial)
                evaluations += 1
                if trial_report.value < report.value:
                    g, report = trial, trial_report
                    history.append(report.value)
                    improved = True
                    break  # first improvement
        if not improved:
            step *= 0.5
            if step < tol:
                return _opt_report(ev, g, report, evaluations, step, "coord_search", history)
    raise NonConvergenceError(
        f"compass search: step {step:.3e} > tol {tol:.1e} after {max_iter} sweeps",
        residual=step,
        best=_opt_report(ev, g, report, evaluations, step, "coord_search", history),
    )


def _opt_report(ev, g, cost_report, iterations, measure, method, history) -> OptimizeReport:
    return OptimizeReport(
        g_opt=ScalarField(ev.mesh, g.copy()),
        J_opt=cost_report.value,
        iterations=iterations,
        gradient_norm_final=float(measure),
        method=method,
        history=tuple(history),
    )


def convex_combination_states(
    mesh: Mesh,
    sys: AssembledSystem,
    data: ProblemData,
    g1,
    g2,
    mu: float,
    family: str = ROBIN,
    solver: str = "active_set",
    tol: float = 1e-11,
) -> dict[str, ScalarField]:
    """States attached to a convex combination of two controls.

    Returns u3 = mu u_{g1} + (1 - mu) u_{g2} (combination of states) and
    u4 = the state of the combined control mu g1 + (1 - mu) g2.
    """
    if not (0.0 <= mu <= 1.0):
        raise InvalidParameterError(f"mu must lie in [0, 1], got {mu}")
    ev = _Evaluator(mesh, sys, data, family, solver=solver, tol=tol)
    v1 = as_control_field(mesh, g1).values
    v2 = as_control_field(mesh, g2).values
    u1 = ev.state(v1).values()
    u2 = ev.state(v2).values()
    u4 = ev.state(mu * v1 + (1.0 - mu) * v2).values()
    return {
        "u3": ScalarField(mesh, mu * u1 + (1.0 - mu) * u2),
        "u4": ScalarField(mesh, u4),
    }


def check_open_problems(
    mesh: Mesh,
    sys: AssembledSystem,
    data: ProblemData,
    trials: int,
    seed: int = 0,
    family: str = ROBIN,
    g_low: float = -30.0,
    g_high: float = 10.0,
    solver: str = "active_set",
    tol: float = 1e-11,
) -> ConjectureReport:
    """Randomized evidence for the two open ordering questions.

    Per trial, draws nodal controls g1, g2 uniform in [g_low, g_high] and
    mu uniform in [0, 1], then records the pointwise margin min(u3 - u4),
    the H-norm margin ||u3||_H - ||u4||_H, and the convexity gap
    mu J(g1) + (1-mu) J(g2) - J(g3).  Negative margins are findings, not
    failures; witnesses carry the inputs.  Asserts only the guaranteed
    feasibility u4 >= 0.
    """
    if trials < 1:
        raise InvalidParameterError("need at least one trial")
    rng = np.random.default_rng(seed)
    ev = _Evaluator(mesh, sys, data, family, solver=solver, tol=tol)
    m_h = sys.M_H
    mcost = data.M_cost
    rows = []
    witnesses = []
    n_pw = n_h = n_cx = 0
    for k in range(trials):
        g1 = rng.uniform(g_low, g_high, mesh.node_count)
        g2 = rng.uniform(g_low, g_high, mesh.node_count)
        mu = float(rng.uniform(0.0, 1.0))
        g3 = mu * g1 + (1.0 - mu) * g2
        u1 = ev.state(g1).values()
        u2 = ev.state(g2).values()
        u4 = ev.state(g3).values()
        if float(np.min(u4)) < -NONNEG_GUARD:
            raise NonConvergenceError(
                f"state of the combined control dips below the obstacle at trial {k}",
                residual=float(np.min(u4)),
            )
        u3 = mu * u1 + (1.0 - mu) * u2

        def sq(v):
            return float(v @ (m_h @ v))

        j1 = 0.5 * sq(u1) + 0.5 * mcost * sq(g1)
        j2 = 0.5 * sq(u2) + 0.5 * mcost * sq(g2)
        j3 = 0.5 * sq(u4) + 0.5 * mcost * sq(g3)
        gap = mu * j1 + (1.0 - mu) * j2 - j3
        quad = 0.5 * mcost * mu * (1.0 - mu) * sq(g2 - g1)
        state_quad = 0.5 * mu * (1.0 - mu) * sq(u2 - u1)
        identity_residual = gap - quad - state_quad - 0.5 * (sq(u3) - sq(u4))

        min_margin = float(np.min(u3 - u4))
        h_margin = float(np.sqrt(max(sq(u3), 0.0)) - np.sqrt(max(sq(u4), 0.0)))
        rows.append(
            ConjectureTrial(k, mu, min_margin, h_margin, gap, identity_residual)
        )
        if min_margin < -CONJECTURE_TOL:
            n_pw += 1
            witnesses.append({"trial": k, "kind": "pointwise", "mu": mu, "g1": g1, "g2": g2})
        if h_margin < -CONJECTURE_TOL:
            n_h += 1
            witnesses.append({"trial": k, "kind": "h_norm", "mu": mu, "g1": g1, "g2": g2})
        if gap < quad - CONJECTURE_TOL:
            n_cx += 1
            witnesses.append({"trial": k, "kind": "convexity", "mu": mu, "g1": g1, "g2": g2})
    return ConjectureReport(
        trials=tuple(rows),
        pointwise_violations=n_pw,
        h_norm_violations=n_h,
        convexity_violations=n_cx,
        witnesses=tuple(witnesses),
    )
