"""Uniform time-space lattices for the backward solvers.

Node coordinates are always produced as ``origin + index * spacing`` in a
single fixed evaluation order, so refining a grid by a factor of two yields
even-indexed nodes that coincide bit-exactly with the coarse nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GameModel, HALF_LINE


class GridError(ValueError):
    """Rejected lattice request."""


@dataclass(frozen=True)
class LatticeGrid:
    """Uniform lattice on [0, T] x [x_lo, x_hi] with nx space steps and nt
    time steps (nx+1 and nt+1 nodes)."""

    x_lo: float
    x_hi: float
    nx: int
    nt: int
    T: float

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dt(self) -> float:
        return self.T / self.nt

    def x_nodes(self) -> np.ndarray:
        return self.x_lo + np.arange(self.nx + 1) * self.dx

    def t_nodes(self) -> np.ndarray:
        return np.arange(self.nt + 1) * self.dt

    def refined(self, factor: int = 2) -> "LatticeGrid":
        return LatticeGrid(self.x_lo, self.x_hi, self.nx * factor, self.nt * factor, self.T)

    def index_below(self, x: float) -> int:
        """Largest node index i with x_nodes[i] <= x (clipped to the grid)."""
        i = int(np.floor((x - self.x_lo) / self.dx))
        return min(max(i, 0), self.nx)

    def level_of(self, t: float) -> int:
        """Nearest time level index for t."""
        return min(max(int(round(t / self.dt)), 0), self.nt)


def make_grid(model: GameModel, x_lo: float, x_hi: float, nx: int, nt: int) -> LatticeGrid:
    """Build and validate a lattice for a model.

    Rejects degenerate windows, windows that do not contain the model's
    reference evaluation state, too-coarse resolutions, and half-line
    windows that do not start exactly at zero.
    """
    if not (np.isfinite(x_lo) and np.isfinite(x_hi)) or not x_lo < x_hi:
        raise GridError(f"window must satisfy x_lo < x_hi, got [{x_lo}, {x_hi}]")
    if nx < 8 or nt < 8:
        raise GridError(f"nx and nt must be at least 8, got nx={nx}, nt={nt}")
    if model.domain_kind == HALF_LINE and x_lo != 0.0:
        raise GridError(f"half-line windows must start at 0, got x_lo={x_lo}")
    if not (x_lo < model.x_ref < x_hi):
        raise GridError(
            f"window [{x_lo}, {x_hi}] does not contain the evaluation state x_ref={model.x_ref}")
    return LatticeGrid(float(x_lo), float(x_hi), int(nx), int(nt), float(model.T))
