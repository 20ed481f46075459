"""Damped Newton solver for the penalized fourth-order two-point problem.

The unknowns are the nodal values of u.  The reciprocal second derivative
w = 1/u'' is derived, and the two boundary conditions per endpoint are
imposed as: Dirichlet rows at i = 0, n and reciprocal-curvature rows at
i = 1, n-1.  Interior rows discretize

    eps * w'' = (1/eps)(u - phi)                       outside (a, b)
    eps * w'' = f0_z(x, u) - f1_px(x, u') - f1_pp(x, u') u''   inside (a, b)

with the window-edge nodes taking the penalty branch.
"""

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid, d1, d2, d2_boundary_coeffs, integrate
from .lagrangian import LagrangianSpec


class NonconvexIterate(RuntimeError):
    """Some discrete second difference of the iterate is nonpositive."""


@dataclass(frozen=True)
class ProblemSetup:
    grid: Grid
    lagrangian: LagrangianSpec
    phi: np.ndarray
    phi_p: np.ndarray
    phi_pp: np.ndarray
    rho_minus: float
    rho_plus: float
    eps: float
    c0: float

    def __post_init__(self):
        n = self.grid.n
        if abs(self.phi[0]) > 1e-12 or abs(self.phi[n]) > 1e-12:
            raise ValueError("obstacle must vanish at the boundary: phi(+-1) = 0")
        if self.c0 <= 0.0 or np.any(self.phi_pp < self.c0 - 1e-12):
            raise ValueError("obstacle must be uniformly convex: phi'' >= c0 > 0")
        if self.rho_minus <= 0.0 or self.rho_plus <= 0.0:
            raise ValueError("boundary data must be positive: rho+- > 0")
        if not (0.0 < self.eps < 1.0):
            raise ValueError(f"penalization parameter must lie in (0, 1), got {self.eps}")


def make_setup(
    grid: Grid,
    lagrangian: LagrangianSpec,
    phi_coeffs: Sequence[float],
    rho_minus: float,
    rho_plus: float,
    eps: float,
) -> ProblemSetup:
    """Sample a polynomial obstacle on the grid and certify its convexity."""
    c = np.asarray(phi_coeffs, dtype=float)
    P = np.polynomial.polynomial
    x = grid.nodes
    phi = P.polyval(x, c)
    phi_p = P.polyval(x, P.polyder(c)) if len(c) > 1 else np.zeros_like(x)
    phi_pp = P.polyval(x, P.polyder(c, 2)) if len(c) > 2 else np.zeros_like(x)
    c0 = float(np.min(phi_pp))
    if c0 <= 0.0:
        raise ValueError(f"obstacle is not uniformly convex on the grid: min phi'' = {c0}")
    return ProblemSetup(
        grid=grid, lagrangian=lagrangian, phi=phi, phi_p=phi_p, phi_pp=phi_pp,
        rho_minus=rho_minus, rho_plus=rho_plus, eps=eps, c0=c0,
    )


@dataclass
class SolveResult:
    u: np.ndarray
    w: np.ndarray
    newton_iters: int
    residual_norms: list[float]
    converged: bool
    min_upp: float


@dataclass
class NewtonOpts:
    newton_tol_scale: float = 1e-10
    convexity_floor_scale: float = 1e-3
    max_iters: int = 200
    max_halvings: int = 40

    def tol(self, eps: float) -> float:
        return self.newton_tol_scale * (1.0 + 1.0 / eps)

    def floor(self, eps: float, c0: float) -> float:
        return self.convexity_floor_scale * eps * c0


def _curvatures(u: np.ndarray, setup: ProblemSetup) -> np.ndarray:
    s = d2(u, setup.grid)
    if np.any(s <= 0.0):
        i = int(np.argmin(s))
        raise NonconvexIterate(f"u'' <= 0 at node {i}: {s[i]}")
    return s


def _f_eps(u: np.ndarray, s: np.ndarray, setup: ProblemSetup) -> np.ndarray:
    g, lag = setup.grid, setup.lagrangian
    x = g.nodes
    p = d1(u, g)
    f = (u - setup.phi) / setup.eps
    inside = g.interior_window_mask()
    xi, ui, pi, si = x[inside], u[inside], p[inside], s[inside]
    f[inside] = lag.f0_z(xi, ui) - lag.f1_px(xi, pi) - lag.f1_pp(xi, pi) * si
    return f


def residual(u: np.ndarray, setup: ProblemSetup) -> np.ndarray:
    """Nodal residual; rows 0, n are Dirichlet, rows 1, n-1 the w boundary data."""
    g = setup.grid
    n, h = g.n, g.h
    s = _curvatures(u, setup)
    w = 1.0 / s
    f = _f_eps(u, s, setup)
    R = np.empty(n + 1)
    R[0] = u[0]
    R[n] = u[n]
    R[1] = w[0] - setup.rho_minus
    R[n - 1] = w[n] - setup.rho_plus
    i = np.arange(2, n - 1)
    R[i] = setup.eps * (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h) - f[i]
    return R


def jacobian(u: np.ndarray, setup: ProblemSetup) -> np.ndarray:
    """Analytic Jacobian of `residual`; pentadiagonal, returned dense."""
    g, lag, eps = setup.grid, setup.lagrangian, setup.eps
    n, h = g.n, g.h
    x = g.nodes
    s = _curvatures(u, setup)
    p = d1(u, g)
    inv_s2 = 1.0 / (s * s)

    A = np.zeros((n + 1, n + 1))
    A[0, 0] = 1.0
    A[n, n] = 1.0
    A[1, 0:4] = -inv_s2[0] * d2_boundary_coeffs(g, left=True)
    A[n - 1, n - 3 : n + 1] = -inv_s2[n] * d2_boundary_coeffs(g, left=False)

    cd2 = np.array([1.0, -2.0, 1.0]) / (h * h)
    inside = g.interior_window_mask()
    for i in range(2, n - 1):
        # eps * d2(w) chain: w_j = 1/s_j for j = i-1, i, i+1 (all central rows)
        for j, cj in ((i - 1, cd2[0]), (i, cd2[1]), (i + 1, cd2[2])):
            A[i, j - 1 : j + 2] += eps * cj * (-inv_s2[j]) * cd2
        if inside[i]:
            xi = x[i : i + 1]
            pi = p[i : i + 1]
            ui = u[i : i + 1]
            si = s[i : i + 1]
            A[i, i] -= float(lag.f0_zz(xi, ui)[0])
            # d/du_k of f1_px(x_i, p_i) and f1_pp(x_i, p_i) * s_i
            chain_p = float(lag.f1_pxp(xi, pi)[0] + lag.f1_ppp(xi, pi)[0] * si[0])
            A[i, i - 1] += chain_p / (2.0 * h)
            A[i, i + 1] -= chain_p / (2.0 * h)
            A[i, i - 1 : i + 2] += float(lag.f1_pp(xi, pi)[0]) * cd2
        else:
            A[i, i] -= 1.0 / eps
    return A


def _solve_pentadiagonal(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    ab = np.zeros((5, n))
    for offset in range(-2, 3):
        diag = np.diagonal(A, offset)
        if offset >= 0:
            ab[2 - offset, offset:] = diag
        else:
            ab[2 - offset, : n + offset] = diag
    return solve_banded((2, 2), ab, rhs)


def newton_solve(
    setup: ProblemSetup,
    u0: np.ndarray,
    opts: Optional[NewtonOpts] = None,
) -> SolveResult:
    """Damped Newton with backtracking on the residual max-norm.

    Steps that would make min u'' drop to the convexity floor are halved.
    """
    opts = opts or NewtonOpts()
    g = setup.grid
    tol = opts.tol(setup.eps)
    floor = opts.floor(setup.eps, setup.c0)

    u = np.array(u0, dtype=float)
    u[0] = 0.0
    u[-1] = 0.0
    R = residual(u, setup)
    norm = float(np.max(np.abs(R)))
    norms = [norm]

    iters = 0
    converged = norm <= tol
    while not converged and iters < opts.max_iters:
        A = jacobian(u, setup)
        step = _solve_pentadiagonal(A, -R)
        t = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            u_try = u + t * step
            # keep the Dirichlet rows exact against linear-solver roundoff
            u_try[0] = 0.0
            u_try[-1] = 0.0
            s_try = d2(u_try, g)
            if np.min(s_try) <= floor:
                t *= 0.5
                continue
            R_try = residual(u_try, setup)
            norm_try = float(np.max(np.abs(R_try)))
            if norm_try < norm:
                u, R, norm = u_try, R_try, norm_try
                accepted = True
                break
            t *= 0.5
        iters += 1
        if not accepted or t < 1e-12:
            if accepted:
                norms.append(norm)
            break
        norms.append(norm)
        converged = norm <= tol

    min_upp = float(np.min(d2(u, g)))
    return SolveResult(
        u=u,
        w=1.0 / d2(u, g),
        newton_iters=iters,
        residual_norms=norms,
        converged=bool(converged and min_upp > 0.0),
        min_upp=min_upp,
    )


def continuation_sweep(
    setup_base: ProblemSetup,
    eps_schedule: Sequence[float],
    opts: Optional[NewtonOpts] = None,
) -> list[tuple[ProblemSetup, SolveResult]]:
    """Solve along a decreasing eps schedule, warm-starting each stage.

    Stops at the first non-converged stage; completed stages are returned.
    """
    eps_schedule = list(eps_schedule)
    if any(e2 >= e1 for e1, e2 in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    if any(not (0.0 < e < 1.0) for e in eps_schedule):
        raise ValueError("eps schedule values must lie in (0, 1)")

    results = []
    u_prev = setup_base.phi
    for eps in eps_schedule:
        setup = replace(setup_base, eps=eps)
        res = newton_solve(setup, u_prev, opts)
        results.append((setup, res))
        if not res.converged:
            break
        u_prev = res.u
    return results


def default_eps_schedule(start: float = 1e-1, ratio: float = 0.5, stages: int = 11) -> list[float]:
    return [start * ratio**k for k in range(stages)]


def eval_J_eps(u: np.ndarray, setup: ProblemSetup) -> float:
    """Penalized functional: window Lagrangian - eps * log-curvature + obstacle penalty."""
    g, lag, eps = setup.grid, setup.lagrangian, setup.eps
    s = _curvatures(u, setup)
    x = g.nodes
    F = lag.f0(x, u) + lag.f1(x, d1(u, g))
    term_window = integrate(F, g, g.ia, g.ib)
    term_log = -eps * integrate(np.log(s), g, 0, g.n)
    pen = (u - setup.phi) ** 2
    term_pen = (integrate(pen, g, 0, g.ia) + integrate(pen, g, g.ib, g.n)) / (2.0 * eps)
    return term_window + term_log + term_pen
