import numpy as np
import pytest
from helpers import CAL_PHI, fd_jacobian, monopolist_setup

from abreu1d.grid import build_grid, d2
from abreu1d.lagrangian import make_rochet_chone
from abreu1d.minimizer import ConeProblem, eval_J
from abreu1d.solver import (
    NonconvexIterate,
    continuation_sweep,
    default_eps_schedule,
    eval_J_eps,
    jacobian,
    make_setup,
    newton_solve,
    residual,
)


def test_residual_vanishes_at_exact_solution():
    setup = monopolist_setup()
    assert np.max(np.abs(residual(setup.phi, setup))) <= 1e-12


def test_residual_boundary_rows_with_mismatched_data():
    setup = monopolist_setup(rho=1.0)
    R = residual(setup.phi, setup)
    n = setup.grid.n
    assert R[1] == pytest.approx(-0.5, abs=1e-14)
    assert R[n - 1] == pytest.approx(-0.5, abs=1e-14)
    assert np.max(np.abs(R[2 : n - 1])) <= 1e-12
    assert R[0] == 0.0 and R[n] == 0.0


def test_residual_rejects_nonconvex_iterate():
    setup = monopolist_setup()
    u = setup.phi.copy()
    u[10] += 1.0  # drives the second difference at node 10 negative
    with pytest.raises(NonconvexIterate):
        residual(u, setup)


def test_make_setup_validation():
    g = build_grid(64, -0.5, 0.5)
    lag = make_rochet_chone([1.0], g.nodes)
    with pytest.raises(ValueError):  # phi not uniformly convex
        make_setup(g, lag, [0.0, 1.0], 0.5, 0.5, 1e-2)
    with pytest.raises(ValueError):  # phi(+-1) != 0
        make_setup(g, lag, [-1.0, 0.0, 2.0], 0.5, 0.5, 1e-2)
    with pytest.raises(ValueError):  # rho <= 0
        make_setup(g, lag, CAL_PHI, 0.0, 0.5, 1e-2)
    with pytest.raises(ValueError):  # eps out of range
        make_setup(g, lag, CAL_PHI, 0.5, 0.5, 1.5)


def test_jacobian_finite_and_dirichlet_rows():
    setup = monopolist_setup()
    A = jacobian(setup.phi, setup)
    assert np.all(np.isfinite(A))
    n = setup.grid.n
    e0 = np.zeros(n + 1)
    e0[0] = 1.0
    en = np.zeros(n + 1)
    en[-1] = 1.0
    np.testing.assert_array_equal(A[0], e0)
    np.testing.assert_array_equal(A[n], en)


def test_jacobian_is_pentadiagonal():
    setup = monopolist_setup()
    x = setup.grid.nodes
    A = jacobian(setup.phi + 0.01 * np.cos(np.pi * x / 2) * (1 - x * x), setup)
    for offset in range(3, setup.grid.n + 1):
        assert np.all(np.diagonal(A, offset) == 0.0)
        assert np.all(np.diagonal(A, -offset) == 0.0)


def test_jacobian_matches_finite_differences_at_smooth_perturbation():
    setup = monopolist_setup()
    x = setup.grid.nodes
    u = setup.phi + 0.01 * np.cos(np.pi * x / 2) * (1 - x * x)
    A = jacobian(u, setup)
    F = fd_jacobian(u, setup)
    rel = np.max(np.abs(A - F)) / np.max(np.abs(F))
    assert rel <= 1e-6


def test_jacobian_matches_finite_differences_at_random_convex_states():
    setup = monopolist_setup()
    x = setup.grid.nodes
    rng = np.random.default_rng(7)
    for _ in range(10):
        c = rng.uniform(-1, 1, 3)
        bump = sum(c[k] * np.sin((k + 1) * np.pi * (x + 1) / 2) for k in range(3))
        u = setup.phi + 0.01 * bump
        assert np.min(d2(u, setup.grid)) > 0.0
        A = jacobian(u, setup)
        F = fd_jacobian(u, setup, step=1e-7)
        assert np.max(np.abs(A - F)) / np.max(np.abs(F)) <= 1e-6


def test_newton_recovers_exact_solution_from_perturbed_start():
    setup = monopolist_setup()
    x = setup.grid.nodes
    u0 = setup.phi + 0.05 * (1 - x * x) ** 2
    res = newton_solve(setup, u0)
    assert res.converged
    assert np.max(np.abs(res.u - setup.phi)) <= 1e-8
    assert res.u[0] == 0.0 and res.u[-1] == 0.0
    assert res.min_upp > 0.0 and np.all(res.w > 0.0)


def test_newton_from_exact_start_converges_immediately():
    setup = monopolist_setup()
    res = newton_solve(setup, setup.phi)
    assert res.converged
    assert res.newton_iters <= 1


def test_newton_quadratic_tail():
    setup = monopolist_setup()
    x = setup.grid.nodes
    res = newton_solve(setup, setup.phi + 0.05 * (1 - x * x) ** 2)
    h = res.residual_norms
    ratios = [h[k + 1] / h[k] ** 2 for k in range(len(h) - 1)]
    assert all(r <= 10.0 for r in ratios[-2:])


def test_newton_boundary_condition_rows_satisfied():
    setup = monopolist_setup()
    x = setup.grid.nodes
    res = newton_solve(setup, setup.phi + 0.05 * (1 - x * x) ** 2)
    s = d2(res.u, setup.grid)
    tol = 1e-10 * (1.0 + 1.0 / setup.eps)
    assert abs(1.0 / s[0] - setup.rho_minus) + abs(1.0 / s[-1] - setup.rho_plus) <= tol


def test_continuation_sweep_all_stages_converge():
    setup = monopolist_setup(eps=0.1)
    stages = continuation_sweep(setup, default_eps_schedule())
    assert len(stages) == 11
    for stage_setup, res in stages:
        assert res.converged
        assert np.max(np.abs(res.u - stage_setup.phi)) <= 1e-8


def test_continuation_single_stage_equals_newton_solve():
    setup = monopolist_setup(eps=0.05)
    stages = continuation_sweep(setup, [0.05])
    direct = newton_solve(setup, setup.phi)
    np.testing.assert_array_equal(stages[0][1].u, direct.u)


def test_continuation_rejects_bad_schedules():
    setup = monopolist_setup(eps=0.1)
    with pytest.raises(ValueError):
        continuation_sweep(setup, [0.1, 0.2])
    with pytest.raises(ValueError):
        continuation_sweep(setup, [0.5, 0.5])
    with pytest.raises(ValueError):
        continuation_sweep(setup, [1.5, 0.1])


def test_eval_J_eps_closed_form_pieces():
    # At u = phi the penalty vanishes and the log term is -eps * 2 log 2,
    # so J_eps + 2 eps log 2 equals the window term independently of eps.
    setup1 = monopolist_setup(eps=0.02)
    setup2 = monopolist_setup(eps=0.01)
    phi = setup1.phi
    J1 = eval_J_eps(phi, setup1)
    J2 = eval_J_eps(phi, setup2)
    window = eval_J(phi, ConeProblem(grid=setup1.grid,
                                     lagrangian=setup1.lagrangian, phi=phi))
    assert J1 + 2 * 0.02 * np.log(2.0) == pytest.approx(window, abs=1e-13)
    assert J2 + 2 * 0.01 * np.log(2.0) == pytest.approx(window, abs=1e-13)
    # halving eps at u = phi changes only the log term
    assert J2 - J1 == pytest.approx(0.02 * np.log(2.0), abs=1e-13)


def test_eval_J_eps_rejects_nonconvex():
    setup = monopolist_setup()
    u = setup.phi.copy()
    u[10] += 1.0
    with pytest.raises(NonconvexIterate):
        eval_J_eps(u, setup)


def test_stationarity_link_at_converged_solution():
    # Finite-difference gradient of the penalized functional vanishes at the
    # solution on nodes where the trapezoid weights and central stencils are
    # interior-consistent: away from the domain boundary stencils and from
    # the window-edge trapezoid weights.
    setup = monopolist_setup(eps=0.01)
    res = newton_solve(setup, setup.phi)
    assert res.converged
    g = setup.grid
    tol = 1e-5 * (1.0 + 1.0 / setup.eps)
    skip = set(range(g.ia - 1, g.ia + 2)) | set(range(g.ib - 1, g.ib + 2))
    step = 1e-6
    for k in range(4, g.n - 3):
        if k in skip:
            continue
        up = res.u.copy()
        up[k] += step
        um = res.u.copy()
        um[k] -= step
        grad = (eval_J_eps(up, setup) - eval_J_eps(um, setup)) / (2 * step)
        assert abs(grad) <= tol
