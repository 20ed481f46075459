"""Weak-form check of the limiting Euler-Lagrange identity on the window.

The rescaled reciprocal curvature eps * w is tested against

    integral(w_r * psi'') = integral(f0_z(x, u) * psi) + integral(f1_p(x, u') * psi')

for a family of compactly supported quartic bumps psi.  One integration by
parts has moved the divergence derivative onto the smooth test function, so
no derivative of f1_p across gradient kinks is ever formed.
"""

from dataclasses import dataclass

import numpy as np

from .grid import Grid, d1, integrate
from .solver import ProblemSetup, SolveResult


class SupportViolation(ValueError):
    """A test-function support reaches the window boundary."""


class NotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TestFunctionFamily:
    """Quartic bumps psi(x) = ((x-c)^2 - r^2)^2 / r^4 on |x-c| <= r.

    psi and psi' vanish at the support endpoints; psi(c) = 1.
    """

    centers: np.ndarray
    radii: np.ndarray

    def __len__(self) -> int:
        return len(self.centers)

    def evaluate(self, j: int, x: np.ndarray):
        """Return (psi, psi', psi'') of bump j at the points x."""
        c, r = self.centers[j], self.radii[j]
        t = x - c
        on = np.abs(t) <= r
        q = t * t - r * r
        psi = np.where(on, q * q, 0.0) / r**4
        dpsi = np.where(on, 4.0 * t * q, 0.0) / r**4
        ddpsi = np.where(on, 4.0 * q + 8.0 * t * t, 0.0) / r**4
        return psi, dpsi, ddpsi


def default_family(grid: Grid, count: int = 10) -> TestFunctionFamily:
    """Bumps with centers equispaced over the inner 70% of the window."""
    a, b = grid.a, grid.b
    width = b - a
    centers = np.linspace(a + 0.15 * width, b - 0.15 * width, count)
    radii = np.full(count, 0.1 * width)
    return TestFunctionFamily(centers=centers, radii=radii)


def rescaled_w(result: SolveResult, setup: ProblemSetup) -> np.ndarray:
    """eps * w on the window nodes; proxy for the weak limit at small eps."""
    if not result.converged:
        raise NotConverged("rescaled w requires a converged stage")
    return setup.eps * result.w[setup.grid.window_slice()]


def distributional_residual(
    w_window: np.ndarray,
    u: np.ndarray,
    setup: ProblemSetup,
    family: TestFunctionFamily,
) -> tuple[float, list[float]]:
    """Max (and per-bump) weak-form residual over the family."""
    g, lag = setup.grid, setup.lagrangian
    margin = g.h
    for j in range(len(family)):
        c, r = family.centers[j], family.radii[j]
        if c - r < g.a + margin or c + r > g.b - margin:
            raise SupportViolation(
                f"bump {j} support [{c - r}, {c + r}] reaches the window [{g.a}, {g.b}]"
            )

    win = g.window_slice()
    xw = g.nodes[win]
    if w_window.shape != xw.shape:
        raise ValueError("w must be given on the window nodes")
    fz = lag.f0_z(g.nodes, u)[win]
    fp = lag.f1_p(g.nodes, d1(u, g))[win]

    full = np.zeros(g.n + 1)

    def trapz_window(vals):
        full[win] = vals
        return integrate(full, g, g.ia, g.ib)

    residuals = []
    for j in range(len(family)):
        psi, dpsi, ddpsi = family.evaluate(j, xw)
        lhs = trapz_window(w_window * ddpsi)
        rhs = trapz_window(fz * psi) + trapz_window(fp * dpsi)
        residuals.append(abs(lhs - rhs))
    return max(residuals), residuals
