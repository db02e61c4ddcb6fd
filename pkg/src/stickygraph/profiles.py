"""Planar graph profiles over a finite window, with extended-real columns.

A GraphProfile stores the graph values on a window grid; ``-inf`` marks an
empty column (no set below), ``+inf`` a full column.  Columns beyond the
window are described by an exterior model: linear continuation on each side,
empty, full, or a sampled extension backed by a callable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .kernel import Grid

__all__ = ["ExteriorModel", "GraphProfile"]


@dataclass(frozen=True)
class ExteriorModel:
    """Column values beyond the profile window.

    kind is one of "linear", "empty", "full", "sampled".  For "linear" the
    continuation on each side is offset + slope * x (global coordinates); the
    offsets must be consistent with the window-edge values.  For "sampled"
    ``func`` supplies values at arbitrary exterior abscissae.
    """

    kind: str
    slope_left: float = 0.0
    slope_right: float = 0.0
    offset_left: float = 0.0
    offset_right: float = 0.0
    func: object = None

    def __post_init__(self):
        if self.kind not in ("linear", "empty", "full", "sampled"):
            raise ParameterError(f"unknown exterior model kind {self.kind!r}")
        if self.kind == "sampled" and not callable(self.func):
            raise ParameterError("sampled exterior model needs a callable")

    @staticmethod
    def linear(slope_left, slope_right, offset_left, offset_right) -> "ExteriorModel":
        return ExteriorModel(
            "linear",
            slope_left=float(slope_left),
            slope_right=float(slope_right),
            offset_left=float(offset_left),
            offset_right=float(offset_right),
        )

    @staticmethod
    def empty() -> "ExteriorModel":
        return ExteriorModel("empty")

    @staticmethod
    def full() -> "ExteriorModel":
        return ExteriorModel("full")

    @staticmethod
    def sampled(func) -> "ExteriorModel":
        return ExteriorModel("sampled", func=func)

    def value_side(self, x, side: str):
        """Exterior value(s) on the given side ('left' or 'right')."""
        x = np.asarray(x, dtype=float)
        if self.kind == "empty":
            return np.full_like(x, -np.inf)
        if self.kind == "full":
            return np.full_like(x, np.inf)
        if self.kind == "sampled":
            return np.asarray(self.func(x), dtype=float)
        if side == "left":
            return self.offset_left + self.slope_left * x
        return self.offset_right + self.slope_right * x


@dataclass(frozen=True)
class GraphProfile:
    """Graph values on a window grid plus an exterior closure.

    corner_nodes lists indices where the underlying function has a genuine
    slope jump (curvature evaluation there is refused).  All evaluators treat
    the profile as piecewise linear between nodes.
    """

    grid: Grid
    values: np.ndarray
    exterior: ExteriorModel
    corner_nodes: tuple = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "corner_nodes", tuple(int(i) for i in self.corner_nodes))
        if vals.shape != (self.grid.n,):
            raise ParameterError(
                f"values length {vals.shape} does not match grid node count {self.grid.n}"
            )
        if np.isnan(vals).any():
            raise ParameterError("profile values must not contain NaN")
        if self.exterior.kind == "linear":
            x0, x1 = self.grid.domain
            v0, v1 = vals[0], vals[-1]
            if not (np.isfinite(v0) and np.isfinite(v1)):
                raise ParameterError("linear exterior model requires finite edge values")
            tol = 1e-9 * (1.0 + abs(v0) + abs(v1))
            if abs(self.exterior.value_side(x0, "left") - v0) > tol or abs(
                self.exterior.value_side(x1, "right") - v1
            ) > tol:
                raise ParameterError(
                    "linear exterior model inconsistent with window edge values"
                )

    @property
    def window(self) -> tuple[float, float]:
        return self.grid.domain

    def interp(self, x):
        """Piecewise-linear value(s) at abscissa x inside the window.

        Columns adjacent to an infinite node inherit the infinity on the whole
        half-cell next to it (the wall is resolved by the grid, not smeared).
        """
        x = np.asarray(x, dtype=float)
        nodes, vals = self.grid.nodes, self.values
        finite = np.isfinite(vals)
        if finite.all():
            return np.interp(x, nodes, vals)
        out = np.interp(x, nodes, np.where(finite, vals, 0.0))
        idx = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
        bad_left = ~finite[idx]
        bad_right = ~finite[idx + 1]
        out = np.where(bad_left, vals[idx], out)
        out = np.where(bad_right, vals[idx + 1], out)
        return out

    def value_anywhere(self, x):
        """Value(s) at arbitrary abscissa, delegating to the exterior model outside."""
        x = np.asarray(x, dtype=float)
        a, b = self.window
        out = np.empty_like(x)
        left = x < a
        right = x > b
        inside = ~(left | right)
        if inside.any():
            out[inside] = self.interp(x[inside])
        if left.any():
            out[left] = self.exterior.value_side(x[left], "left")
        if right.any():
            out[right] = self.exterior.value_side(x[right], "right")
        return out

    def cell_of(self, x: float) -> int:
        """Index j of the cell [nodes[j], nodes[j+1]] containing x."""
        nodes = self.grid.nodes
        j = int(np.searchsorted(nodes, x, side="right") - 1)
        return min(max(j, 0), nodes.size - 2)

    def node_at(self, x: float, tol: float = 1e-12) -> int | None:
        """Index of the node coinciding with x (within tol of local spacing), else None."""
        nodes = self.grid.nodes
        j = int(np.argmin(np.abs(nodes - x)))
        h_loc = np.min(np.diff(nodes[max(0, j - 1): j + 2]))
        if abs(nodes[j] - x) <= tol * max(1.0, abs(x)) + 1e-14 * h_loc:
            return j
        return None

    def with_values(self, values) -> "GraphProfile":
        return GraphProfile(self.grid, values, self.exterior, self.corner_nodes)
