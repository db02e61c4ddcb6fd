"""Fractional parameters, the curvature integrand profile, and graded grids.

The scalar profile ``slope_weight(r)`` is the antiderivative of
``(1 + tau^2)^(-(2+s)/2)`` from 0 to r.  It converts the slope ratio seen by a
vertical column into the column's integrated kernel weight and is the
workhorse of every curvature evaluation in the package.  It is odd, strictly
increasing, and saturates at ``+/- slope_weight_limit(s)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import ParameterError

__all__ = [
    "FracParams",
    "Grid",
    "make_graded_grid",
    "slope_weight",
    "slope_weight_deriv",
    "slope_weight_limit",
    "gauss_legendre",
    "gauss_jacobi01",
]


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class FracParams:
    """Fractional order s in (0,1) with the derived exponents.

    sigma = (1+s)/2 is the order of the linearized operator, alpha is the
    regularity of the exterior datum (must exceed s for the boundary-exponent
    experiments), and gamma = min(alpha, sigma) is the boundary Holder
    exponent of the derivative in the continuous branch.
    """

    s: float
    alpha: float | None = None
    sigma: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        if not (isinstance(self.s, (int, float)) and np.isfinite(self.s)):
            raise ParameterError(f"s must be a finite real, got {self.s!r}")
        if not 0.0 < self.s < 1.0:
            raise ParameterError(f"s must lie in the open interval (0, 1), got {self.s}")
        alpha = self.alpha
        if alpha is None:
            alpha = (3.0 + self.s) / 4.0  # default exterior regularity, safely inside (s, 1)
            object.__setattr__(self, "alpha", alpha)
        if not self.s < alpha < 1.0:
            raise ParameterError(
                f"alpha must lie in (s, 1) = ({self.s}, 1), got {alpha}"
            )
        object.__setattr__(self, "sigma", (1.0 + self.s) / 2.0)
        object.__setattr__(self, "gamma", min(alpha, (1.0 + self.s) / 2.0))


# ---------------------------------------------------------------------------
# quadrature rule caches


@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    """Nodes/weights for int_{-1}^{1} f(x) dx."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    return x, w


@lru_cache(maxsize=256)
def _jacobi_cached(n: int, alpha_key: int, beta_key: int):
    # keys are the exponents scaled by 2^40 and rounded, to keep the cache hashable
    alpha = alpha_key / 2.0**40
    beta = beta_key / 2.0**40
    x, w = roots_jacobi(int(n), alpha, beta)
    return x, w


def gauss_jacobi01(n: int, beta: float):
    """Nodes/weights (t_k, w_k) so that int_0^1 f(t) t^beta dt = sum w_k f(t_k).

    beta may be negative (integrable endpoint singularity at 0).
    """
    x, w = _jacobi_cached(int(n), 0, int(round(beta * 2.0**40)))
    t = 0.5 * (x + 1.0)
    # map [-1,1] with weight (1+x)^beta onto [0,1] with weight t^beta
    return t, w * 2.0 ** (-1.0 - beta)


# ---------------------------------------------------------------------------
# the profile F, its derivative and its limit

_N_SMALL = 64   # Gauss-Legendre nodes on [0, arctan r] for |r| <= 1
_N_LARGE = 32   # Gauss-Jacobi nodes for the complementary integral, |r| > 1
_N_LIMIT = 48   # Gauss-Jacobi nodes for the saturation value


def _check_s(s: float) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ParameterError(f"s must lie in (0, 1), got {s}")
    return s


@lru_cache(maxsize=128)
def _limit_cached(s: float, n: int) -> float:
    # int_0^{pi/2} cos^s = int_0^1 z^s (1-z^2)^{-1/2} dz, with both endpoint
    # powers handed to a Jacobi rule so the value is exact to roundoff
    x, w = _jacobi_cached(int(n), int(round(-0.5 * 2.0**40)), int(round(s * 2.0**40)))
    return float(2.0 ** (-s) * np.sum(w / np.sqrt(3.0 + x)))


def slope_weight_limit(p_or_s, n: int = _N_LIMIT) -> float:
    """Saturation value of the profile: int_0^{pi/2} cos^s(theta) dtheta.

    Strictly between 1 and pi/2 for s in (0,1), decreasing in s.  Empty/full
    columns contribute exactly this weight.
    """
    s = _check_s(p_or_s.s if isinstance(p_or_s, FracParams) else p_or_s)
    return _limit_cached(s, int(n))


def slope_weight(r, p_or_s, n_small: int = _N_SMALL, n_large: int = _N_LARGE):
    """Profile value F(r) = int_0^r (1+tau^2)^(-(2+s)/2) dtau.

    Accepts scalars or arrays, including +-inf (mapped to +-slope_weight_limit).
    Evaluated through the substitution tau = tan(theta): for |r| <= 1 a fixed
    Gauss rule on [0, arctan|r|]; for |r| > 1 the complement of the saturation
    integral, with the integrable endpoint power handled by a Jacobi rule.
    Both branches agree to roundoff at |r| = 1.
    """
    s = _check_s(p_or_s.s if isinstance(p_or_s, FracParams) else p_or_s)
    r_arr = np.asarray(r, dtype=float)
    scalar = r_arr.ndim == 0
    r_flat = np.atleast_1d(r_arr).ravel()
    if np.isnan(r_flat).any():
        raise ParameterError("slope_weight received NaN input")
    a = np.abs(r_flat)
    out = np.empty_like(a)

    small = a <= 1.0
    if small.any():
        x, w = gauss_legendre(n_small)
        ang = np.arctan(a[small])
        theta = 0.5 * ang[:, None] * (x[None, :] + 1.0)
        out[small] = 0.5 * ang * ((np.cos(theta) ** s) @ w)

    large = ~small
    if large.any():
        # F(r) = F_inf - int_0^{1/sqrt(1+r^2)} c^s (1-c^2)^{-1/2} dc, and the
        # substitution c = C z^{1/(1+s)} turns the remainder into a smooth
        # integrand under the Jacobi weight z^{... } -> handled as t^s on [0,1]
        t, w = gauss_jacobi01(n_large, s)
        c2 = 1.0 / (1.0 + a[large] ** 2)          # C^2, zero when r = inf
        f = 1.0 / np.sqrt(1.0 - c2[:, None] * (t[None, :] ** 2))
        g = (c2 ** (0.5 * (1.0 + s))) * (f @ w)
        out[large] = _limit_cached(s, _N_LIMIT) - g

    out *= np.sign(r_flat)
    out = out.reshape(np.atleast_1d(r_arr).shape)
    return float(out[0]) if scalar else out.reshape(r_arr.shape)


def slope_weight_deriv(r, p_or_s):
    """Closed-form derivative (1 + r^2)^(-(2+s)/2); even, maximal 1 at r = 0."""
    s = _check_s(p_or_s.s if isinstance(p_or_s, FracParams) else p_or_s)
    r_arr = np.asarray(r, dtype=float)
    out = (1.0 + r_arr**2) ** (-0.5 * (2.0 + s))
    return float(out) if r_arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# graded grids


@dataclass(frozen=True)
class Grid:
    """Strictly increasing nodes spanning a closed interval.

    grading records how the nodes were constructed: "uniform",
    ("geometric", ratio, cluster_point) with gaps shrinking by the constant
    ratio toward the cluster point, or ("geometric_both", ratio) clustering
    toward both endpoints (used for the slab interior).
    """

    nodes: np.ndarray
    domain: tuple[float, float]
    grading: object = "uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ParameterError("grid needs at least two nodes")
        if not np.all(np.diff(nodes) > 0):
            raise ParameterError("grid nodes must be strictly increasing")
        a, b = self.domain
        if nodes[0] != a or nodes[-1] != b:
            raise ParameterError("first/last nodes must equal the domain endpoints")

    @property
    def n(self) -> int:
        return self.nodes.size

    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)


def _geometric_gaps(length: float, m: int, ratio: float) -> np.ndarray:
    """m gaps summing to length, consecutive gaps growing by 1/ratio away from the cluster."""
    powers = ratio ** np.arange(m - 1, -1, -1, dtype=float)  # smallest gap first
    return length * powers / powers.sum()


def make_graded_grid(domain, n: int, grading="uniform") -> Grid:
    """Build a Grid on ``domain`` with ``n`` nodes and the requested grading.

    grading is "uniform", ("geometric", ratio, cluster_point) with
    ratio in (0,1) and cluster_point one of the endpoints, or
    ("geometric_both", ratio) for two-sided clustering.
    """
    a, b = float(domain[0]), float(domain[1])
    n = int(n)
    if n < 2:
        raise ParameterError(f"grid needs n >= 2 nodes, got {n}")
    if not b > a:
        raise ParameterError("domain must have positive length")

    if grading == "uniform":
        nodes = np.linspace(a, b, n)
        return Grid(nodes, (a, b), "uniform")

    kind = grading[0]
    ratio = float(grading[1])
    if not 0.0 < ratio < 1.0:
        raise ParameterError(f"geometric ratio must lie in (0, 1), got {ratio}")

    if kind == "geometric":
        cluster = float(grading[2])
        if cluster not in (a, b):
            raise ParameterError("cluster point must be one of the domain endpoints")
        gaps = _geometric_gaps(b - a, n - 1, ratio)
        if cluster == b:
            gaps = gaps[::-1]
        nodes = np.concatenate(([a], a + np.cumsum(gaps)))
        nodes[-1] = b
        return Grid(nodes, (a, b), ("geometric", ratio, cluster))

    if kind == "geometric_both":
        mid = 0.5 * (a + b)
        m = (n - 1) // 2
        if m < 1:
            raise ParameterError("two-sided grading needs n >= 3")
        left = _geometric_gaps(mid - a, m, ratio)                # fine at a, coarse at mid
        right = _geometric_gaps(b - mid, n - 1 - m, ratio)[::-1]  # coarse at mid, fine at b
        nodes = np.concatenate(([a], a + np.cumsum(np.concatenate((left, right)))))
        nodes[-1] = b
        return Grid(nodes, (a, b), ("geometric_both", ratio))

    raise ParameterError(f"unknown grading spec {grading!r}")
