import numpy as np
import pytest
import scipy.sparse.linalg as spla

from vicontrol.assembly import (
    ProblemData,
    assemble,
    coercivity_constant,
    norm_H,
    norm_V,
)
from vicontrol.errors import InvalidParameterError, MatrixError, NonConvergenceError
from vicontrol.mesh import ScalarField, build_unit_square
from vicontrol.vi_solver import (
    DIRICHLET_LIMIT,
    ROBIN,
    VIProblem,
    build_vi_problem,
    solve_active_set,
    solve_enumerate,
    solve_psor,
    solve_state,
)


def contact_problem(n=2, alpha=2.0, g=-20.0, q=1.0, b=1.0):
    m = build_unit_square(n)
    data = ProblemData(alpha=alpha, b=b, q=q, M_cost=1.0, g=g)
    sys = assemble(m, data)
    return m, sys, data


def test_constant_solution_when_data_is_quiet():
    m, sys, data = contact_problem(n=3, alpha=2.0, g=0.0, q=0.0, b=1.5)
    for solver in ("psor", "active_set"):
        rep = solve_state(m, sys, data, ROBIN, solver=solver)
        np.testing.assert_allclose(rep.values(), 1.5, atol=1e-9)
    rep = solve_state(m, sys, data, DIRICHLET_LIMIT)
    np.testing.assert_allclose(rep.values(), 1.5, atol=1e-9)


def test_inactive_constraint_reduces_to_linear_solve():
    # strong heating keeps the state far from the obstacle
    m, sys, data = contact_problem(n=3, alpha=1.0, g=5.0, q=0.0)
    p = build_vi_problem(m, sys, data, ROBIN)
    direct = spla.spsolve(p.A.tocsc(), p.F)
    assert direct.min() > 0.1
    for rep in (solve_psor(p, mesh=m), solve_active_set(p, mesh=m)):
        np.testing.assert_allclose(rep.values(), direct, atol=1e-9)
        assert rep.active_set.size == 0


def test_contact_instance_matches_enumeration_oracle():
    m, sys, data = contact_problem(n=2, alpha=2.0, g=-20.0, q=1.0, b=1.0)
    p = build_vi_problem(m, sys, data, ROBIN)
    oracle = solve_enumerate(p, mesh=m)
    for rep in (solve_psor(p, mesh=m), solve_active_set(p, mesh=m)):
        assert np.max(np.abs(rep.values() - oracle.values())) <= 1e-10


def test_randomized_oracle_equivalence_small():
    rng = np.random.default_rng(11)
    m = build_unit_square(2)
    for _ in range(5):
        data = ProblemData(
            alpha=float(rng.uniform(0.5, 4.0)),
            b=float(rng.uniform(0.5, 2.0)),
            q=float(rng.uniform(-1.0, 2.0)),
            M_cost=1.0,
            g=ScalarField(m, rng.uniform(-30.0, 10.0, m.node_count)),
        )
        sys = assemble(m, data)
        p = build_vi_problem(m, sys, data, ROBIN)
        oracle = solve_enumerate(p, mesh=m)
        assert np.max(np.abs(solve_psor(p).values() - oracle.values())) <= 1e-10
        assert np.max(np.abs(solve_active_set(p).values() - oracle.values())) <= 1e-10


def test_solutions_are_feasible_and_complementary():
    m, sys, data = contact_problem(n=4)
    p = build_vi_problem(m, sys, data, ROBIN)
    for rep in (solve_psor(p, mesh=m), solve_active_set(p, mesh=m)):
        assert rep.values().min() >= -1e-12
        assert rep.residual <= 1e-10
        r = p.A @ rep.values() - p.F
        assert np.max(np.abs(np.minimum(rep.values(), r))) <= 1e-10


def test_dirichlet_rows_pinned_exactly():
    m, sys, data = contact_problem(n=4, g=-5.0)
    rep = solve_state(m, sys, data, DIRICHLET_LIMIT)
    np.testing.assert_array_equal(rep.values()[m.gamma1_nodes()], data.b)


def test_dirichlet_value_must_respect_obstacle():
    m = build_unit_square(2)
    nodes = m.gamma1_nodes()
    with pytest.raises(InvalidParameterError):
        VIProblem(
            A=assemble(m).K.tocsr(),
            F=np.zeros(9),
            lower_bound=np.zeros(9),
            dirichlet_nodes=nodes,
            dirichlet_values=np.full(nodes.size, -1.0),
        )


def test_uniqueness_across_initial_iterates():
    m, sys, data = contact_problem(n=8)
    p = build_vi_problem(m, sys, data, ROBIN)
    rng = np.random.default_rng(5)
    sols = []
    for _ in range(5):
        u0 = np.maximum(rng.uniform(-1.0, 3.0, m.node_count), 0.0)
        sols.append(solve_psor(p, tol=1e-11, u0=u0, mesh=m).values())
    base = solve_active_set(p, mesh=m).values()
    for k in range(5):
        start = rng.choice(m.node_count, size=k + 1, replace=False)
        sols.append(solve_active_set(p, initial_active=start, mesh=m).values())
    for u in sols:
        assert norm_V(sys, u - base) <= 1e-8


def test_lipschitz_dependence_on_the_control():
    m = build_unit_square(4)
    rng = np.random.default_rng(17)
    alpha = 1.0
    base = ProblemData(alpha=alpha, b=1.0, q=1.0, M_cost=1.0, g=0.0)
    sys = assemble(m, base)
    lam = coercivity_constant(sys, alpha)
    for _ in range(10):
        g1 = ScalarField(m, rng.uniform(-10.0, 10.0, m.node_count))
        g2 = ScalarField(m, rng.uniform(-10.0, 10.0, m.node_count))
        d1 = ProblemData(alpha=alpha, b=1.0, q=1.0, M_cost=1.0, g=g1)
        d2 = ProblemData(alpha=alpha, b=1.0, q=1.0, M_cost=1.0, g=g2)
        u1 = solve_state(m, sys, d1, ROBIN).values()
        u2 = solve_state(m, sys, d2, ROBIN).values()
        assert norm_V(sys, u2 - u1) <= norm_H(sys, g2.values - g1.values) / lam + 1e-8


def test_state_norm_bounded_along_refinement():
    # discrete V-norms approach the bound from below; the 1.05x cap applies
    # once the mesh resolves the contact geometry (h0 = h at n = 16)
    norms_v = []
    for n in (16, 32, 64):
        m = build_unit_square(n)
        data = ProblemData(alpha=2.0, b=1.0, q=1.0, M_cost=1.0,
                           g=lambda x, y: -20.0 if 0.25 <= x <= 0.75 and 0.25 <= y <= 0.75 else 0.0)
        sys = assemble(m, data)
        rep = solve_state(m, sys, data, ROBIN)
        norms_v.append(norm_V(sys, rep.values()))
    coarsest = norms_v[0]
    assert all(v <= 1.05 * coarsest for v in norms_v[1:])


def test_monotone_load_property_is_flagged_not_asserted():
    # raising the control nodewise should not lower the state; record only
    m, sys, data = contact_problem(n=4)
    rng = np.random.default_rng(23)
    violations = 0
    for _ in range(10):
        g1 = rng.uniform(-10.0, 5.0, m.node_count)
        g2 = g1 + rng.uniform(0.0, 5.0, m.node_count)
        d1 = ProblemData(alpha=2.0, b=1.0, q=1.0, M_cost=1.0, g=ScalarField(m, g1))
        d2 = ProblemData(alpha=2.0, b=1.0, q=1.0, M_cost=1.0, g=ScalarField(m, g2))
        u1 = solve_state(m, sys, d1, ROBIN).values()
        u2 = solve_state(m, sys, d2, ROBIN).values()
        if np.min(u2 - u1) < -1e-9:
            violations += 1
    print(f"monotone-load violations: {violations}/10 (recorded, not asserted)")


def test_cross_check_mode_agrees():
    m, sys, data = contact_problem(n=4)
    rep = solve_state(m, sys, data, ROBIN, cross_check=True)
    assert rep.residual <= 1e-10


def test_psor_nonconvergence_carries_residual():
    # a smooth (contact-free) solve cannot reach 1e-14 in two sweeps
    m, sys, data = contact_problem(n=8, g=5.0, q=0.0)
    p = build_vi_problem(m, sys, data, ROBIN)
    with pytest.raises(NonConvergenceError) as info:
        solve_psor(p, tol=1e-14, max_iter=2)
    assert info.value.residual is not None and info.value.residual > 1e-14


def test_non_positive_diagonal_detected():
    m = build_unit_square(2)
    sys = assemble(m)
    p = VIProblem(A=(-sys.M_H).tocsr(), F=np.zeros(9), lower_bound=np.zeros(9))
    with pytest.raises(MatrixError):
        solve_psor(p)
    with pytest.raises(MatrixError):
        solve_active_set(p)


def test_enumeration_refuses_large_problems():
    m = build_unit_square(4)
    data = ProblemData(alpha=1.0, b=1.0, q=0.0, M_cost=1.0, g=0.0)
    sys = assemble(m, data)
    p = build_vi_problem(m, sys, data, ROBIN)
    with pytest.raises(InvalidParameterError):
        solve_enumerate(p)


def test_unknown_family_and_solver_rejected():
    m, sys, data = contact_problem()
    with pytest.raises(InvalidParameterError):
        solve_state(m, sys, data, "neumann")
    with pytest.raises(InvalidParameterError):
        solve_state(m, sys, data, ROBIN, solver="multigrid")


def test_dirichlet_limit_load_ignores_alpha():
    # same Dirichlet system for different alpha values in the data
    m = build_unit_square(3)
    d1 = ProblemData(alpha=2.0, b=1.0, q=1.0, M_cost=1.0, g=-3.0)
    d2 = ProblemData(alpha=500.0, b=1.0, q=1.0, M_cost=1.0, g=-3.0)
    sys = assemble(m, d1)
    u1 = solve_state(m, sys, d1, DIRICHLET_LIMIT).values()
    u2 = solve_state(m, sys, d2, DIRICHLET_LIMIT).values()
    np.testing.assert_array_equal(u1, u2)
