"""Uniform grid on [-1, 1] with an interior window, plus discrete calculus.

All finite-difference stencils are second order.  Endpoint derivatives use
one-sided formulas so that nodal values alone determine every operator
(no ghost nodes).
"""

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Invalid grid construction parameters."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [-1, 1] into n cells with window [a, b].

    a and b are snapped to grid nodes; ia and ib are their node indices.
    """

    n: int
    h: float
    nodes: np.ndarray
    ia: int
    ib: int
    a: float
    b: float

    def window_slice(self) -> slice:
        """Nodes x_i with a <= x_i <= b."""
        return slice(self.ia, self.ib + 1)

    def interior_window_mask(self) -> np.ndarray:
        """Boolean mask of nodes strictly inside (a, b)."""
        mask = np.zeros(self.n + 1, dtype=bool)
        mask[self.ia + 1 : self.ib] = True
        return mask


def build_grid(n: int, a: float, b: float) -> Grid:
    """Build a uniform grid with the window endpoints snapped to nodes.

    Raises GridError if the domain is invalid or the snapped window holds
    fewer than 3 interior nodes.
    """
    if n < 16 or n % 2 != 0:
        raise GridError(f"need even n >= 16, got n={n}")
    if not (-1.0 < a < b < 1.0):
        raise GridError(f"bad domain: need -1 < a < b < 1, got a={a}, b={b}")
    h = 2.0 / n
    nodes = -1.0 + h * np.arange(n + 1)
    nodes[0] = -1.0
    nodes[n] = 1.0
    ia = int(round((a + 1.0) / h))
    ib = int(round((b + 1.0) / h))
    if ia <= 0 or ib >= n:
        raise GridError(f"window endpoints snapped to the boundary: ia={ia}, ib={ib}")
    if ib - ia < 4:
        raise GridError(
            f"window too small: snapped [a, b] holds {max(ib - ia - 1, 0)} interior nodes, need >= 3"
        )
    return Grid(n=n, h=h, nodes=nodes, ia=ia, ib=ib, a=nodes[ia], b=nodes[ib])


def _check_length(values: np.ndarray, grid: Grid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n + 1,):
        raise ValueError(f"expected {grid.n + 1} nodal values, got shape {values.shape}")
    return values


def d1(values: np.ndarray, grid: Grid) -> np.ndarray:
    """First derivative: central differences, one-sided 3-point at endpoints."""
    v = _check_length(values, grid)
    h = grid.h
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    out[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return out


def d2(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Second derivative: central differences, one-sided 4-point at endpoints."""
    v = _check_length(values, grid)
    h2 = grid.h * grid.h
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h2
    return out


def integrate(values: np.ndarray, grid: Grid, lo: int, hi: int) -> float:
    """Composite trapezoid rule on [x_lo, x_hi]."""
    v = _check_length(values, grid)
    if not (0 <= lo < hi <= grid.n):
        raise ValueError(f"bad integration range [{lo}, {hi}] on grid with n={grid.n}")
    return float(np.trapezoid(v[lo : hi + 1], dx=grid.h))


# Stencil coefficient helpers used by the Newton Jacobian assembly.

def d1_boundary_coeffs(grid: Grid, left: bool) -> np.ndarray:
    c = np.array([-3.0, 4.0, -1.0]) / (2.0 * grid.h)
    return c if left else -c[::-1]


def d2_boundary_coeffs(grid: Grid, left: bool) -> np.ndarray:
    c = np.array([2.0, -5.0, 4.0, -1.0]) / (grid.h * grid.h)
    return c if left else c[::-1]
