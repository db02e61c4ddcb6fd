"""Catalog of exterior-datum shapes: zero, linear, compact bumps.

Shapes are sums of primitive terms with analytic values and derivatives, so
exterior data can be sampled exactly on any grid and one-sided derivatives at
the slab walls are available in closed form.  The compact bumps vanish with
at least two continuous derivatives at the edge of their support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterError

__all__ = ["Shape", "shape_from_spec"]

_KINDS = ("zero", "linear", "bump", "spline_bump")


@dataclass(frozen=True)
class _Term:
    kind: str
    a: float = 0.0  # linear: slope;  bumps: support lo
    b: float = 0.0  # linear: intercept;  bumps: support hi
    h: float = 0.0  # bumps: height

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return self.a * x + self.b
        lo, hi = self.a, self.b
        xi = (2.0 * x - (lo + hi)) / (hi - lo)
        inside = np.abs(xi) < 1.0
        out = np.zeros_like(x)
        if self.kind == "bump":
            # smooth compact bump, peak height h at the midpoint
            xi_in = xi[inside]
            out[inside] = self.h * np.exp(1.0 - 1.0 / (1.0 - xi_in**2))
        else:  # spline_bump, C^2 at the support edges
            xi_in = xi[inside]
            out[inside] = self.h * (1.0 - xi_in**2) ** 3
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "linear":
            return np.full_like(x, self.a)
        lo, hi = self.a, self.b
        scale = 2.0 / (hi - lo)
        xi = (2.0 * x - (lo + hi)) / (hi - lo)
        inside = np.abs(xi) < 1.0
        out = np.zeros_like(x)
        xi_in = xi[inside]
        if self.kind == "bump":
            g = np.exp(1.0 - 1.0 / (1.0 - xi_in**2))
            out[inside] = self.h * g * (-2.0 * xi_in / (1.0 - xi_in**2) ** 2) * scale
        else:
            out[inside] = self.h * 6.0 * (1.0 - xi_in**2) ** 2 * (-xi_in) * scale
        return out


@dataclass(frozen=True)
class Shape:
    """A sum of catalog terms; callable on arrays, with analytic derivative."""

    terms: tuple

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + t.value(x)
        return out

    def __call__(self, x):
        return self.value(x)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + t.deriv(x)
        return out

    def tail_slope(self) -> float:
        """Slope of the far-field linear continuation (bumps decay to zero)."""
        return sum(t.a for t in self.terms if t.kind == "linear")

    def supports(self):
        """Intervals that grids should resolve (bump supports)."""
        return [(t.a, t.b) for t in self.terms if t.kind in ("bump", "spline_bump")]

    def scaled(self, factor: float) -> "Shape":
        out = []
        for t in self.terms:
            if t.kind == "zero":
                out.append(t)
            elif t.kind == "linear":
                out.append(_Term("linear", a=factor * t.a, b=factor * t.b))
            else:
                out.append(_Term(t.kind, a=t.a, b=t.b, h=factor * t.h))
        return Shape(tuple(out))

    @staticmethod
    def zero() -> "Shape":
        return Shape((_Term("zero"),))

    @staticmethod
    def linear(slope: float, intercept: float = 0.0) -> "Shape":
        return Shape((_Term("linear", a=float(slope), b=float(intercept)),))

    @staticmethod
    def bump(lo: float, hi: float, height: float = 1.0) -> "Shape":
        if not hi > lo:
            raise ParameterError("bump support needs hi > lo")
        return Shape((_Term("bump", a=float(lo), b=float(hi), h=float(height)),))

    @staticmethod
    def spline_bump(lo: float, hi: float, height: float = 1.0) -> "Shape":
        if not hi > lo:
            raise ParameterError("bump support needs hi > lo")
        return Shape((_Term("spline_bump", a=float(lo), b=float(hi), h=float(height)),))

    def plus(self, other: "Shape") -> "Shape":
        return Shape(self.terms + other.terms)


def shape_from_spec(spec, key: str = "shape") -> Shape:
    """Build a Shape from a config fragment (a dict or a list of dicts)."""
    if isinstance(spec, list):
        if not spec:
            return Shape.zero()
        out = shape_from_spec(spec[0], f"{key}[0]")
        for i, sub in enumerate(spec[1:], start=1):
            out = out.plus(shape_from_spec(sub, f"{key}[{i}]"))
        return out
    if not isinstance(spec, dict):
        raise ConfigError(key, "expected an object or a list of objects")
    kind = spec.get("shape")
    if kind not in _KINDS:
        raise ConfigError(f"{key}.shape", f"must be one of {_KINDS}, got {kind!r}")
    known = {"shape"}
    if kind == "zero":
        extra = set(spec) - known
        if extra:
            raise ConfigError(f"{key}.{sorted(extra)[0]}", "unknown key")
        return Shape.zero()
    if kind == "linear":
        known |= {"slope", "intercept"}
        extra = set(spec) - known
        if extra:
            raise ConfigError(f"{key}.{sorted(extra)[0]}", "unknown key")
        return Shape.linear(float(spec.get("slope", 0.0)), float(spec.get("intercept", 0.0)))
    known |= {"lo", "hi", "height"}
    extra = set(spec) - known
    if extra:
        raise ConfigError(f"{key}.{sorted(extra)[0]}", "unknown key")
    try:
        lo, hi = float(spec["lo"]), float(spec["hi"])
    except KeyError as exc:
        raise ConfigError(f"{key}.{exc.args[0]}", "required for bump shapes") from None
    height = float(spec.get("height", 1.0))
    if not hi > lo:
        raise ConfigError(f"{key}.hi", "bump support needs hi > lo")
    maker = Shape.bump if kind == "bump" else Shape.spline_bump
    return maker(lo, hi, height)
