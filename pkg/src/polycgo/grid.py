"""Square grids on the complex plane, sampled fields, Wirtinger calculus, and norms.

A grid covers the square [-w, w]^2 translated to a center, identified with
z = x1 + i*x2.  Axis 0 of every value array runs along the real direction,
axis 1 along the imaginary direction.  Differentiation uses 4th-order centered
stencils inside and 4th-order one-sided stencils on the two rows nearest each
edge; quadrature is the tensor trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ComplexGrid:
    """Uniform n-by-n discretization of a centered square in the complex plane.

    node(i, j) = center + (-half_width + i*spacing) + 1j*(-half_width + j*spacing)
    with spacing = 2*half_width/(n-1).  n must be a power of two (>= 16) so the
    Cauchy transforms can use zero-padded doubling.
    """

    center: complex = 0j
    half_width: float = 1.0
    n: int = 256

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 16 and (self.n & (self.n - 1)) == 0):
            raise ValueError(f"n must be a power of two >= 16, got {self.n}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n - 1)

    @cached_property
    def axis_offsets(self) -> np.ndarray:
        """1D offsets -half_width .. half_width, shared by both axes."""
        return np.linspace(-self.half_width, self.half_width, self.n)

    @cached_property
    def nodes(self) -> np.ndarray:
        """(n, n) complex array of node coordinates; read-only."""
        t = self.axis_offsets
        z = self.center + t[:, None] + 1j * t[None, :]
        z.setflags(write=False)
        return z

    @cached_property
    def _trapezoid_1d(self) -> np.ndarray:
        w = np.ones(self.n)
        w[0] = w[-1] = 0.5
        w.setflags(write=False)
        return w

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def sample(self, fn) -> "ScalarField":
        """Evaluate fn on the node array (fn maps complex ndarray -> ndarray)."""
        return ScalarField(self, fn(self.nodes))

    def constant(self, c: complex) -> "ScalarField":
        return ScalarField(self, np.full((self.n, self.n), c, dtype=np.complex128))

    def zero(self) -> "ScalarField":
        return ScalarField(self, np.zeros((self.n, self.n), dtype=np.complex128))

    def interior_mask(self, margin: float) -> np.ndarray:
        """Boolean mask of nodes farther than margin*(2*half_width) from every edge."""
        t = np.abs(self.axis_offsets) <= self.half_width * (1.0 - 2.0 * margin)
        return t[:, None] & t[None, :]

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        w = self.half_width * (1.0 - 2.0 * margin)
        d = z - self.center
        return abs(d.real) <= w and abs(d.imag) <= w


class ScalarField:
    """Complex samples of a function on a ComplexGrid; immutable after construction."""

    __slots__ = ("grid", "values", "_zero_flag")

    def __init__(self, grid: ComplexGrid, values):
        v = np.asarray(values, dtype=np.complex128)
        if v.shape != (grid.n, grid.n):
            raise ValueError(f"values shape {v.shape} does not match grid n={grid.n}")
        if v is values or v.base is not None:
            v = v.copy()  # never alias caller-owned memory
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_zero_flag", None)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    def is_zero(self) -> bool:
        if self._zero_flag is None:
            object.__setattr__(self, "_zero_flag", bool(not np.any(self.values)))
        return self._zero_flag

    def conj(self) -> "ScalarField":
        return ScalarField(self.grid, np.conj(self.values))

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return complex(other)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __repr__(self):
        a = np.abs(self.values)
        return f"ScalarField(n={self.grid.n}, max|f|={a.max():.3e})"


# 4th-order stencils.  Interior: centered 5-point; edges: one-sided 5-point,
# exact on polynomials of degree <= 4.
def _deriv_axis0(v: np.ndarray, s: float) -> np.ndarray:
    out = np.empty_like(v)
    out[2:-2] = (-v[4:] + 8.0 * v[3:-1] - 8.0 * v[1:-3] + v[:-4]) / (12.0 * s)
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * s)
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * s)
    out[-2] = (3.0 * v[-1] + 10.0 * v[-2] - 18.0 * v[-3] + 6.0 * v[-4] - v[-5]) / (12.0 * s)
    out[-1] = (25.0 * v[-1] - 48.0 * v[-2] + 36.0 * v[-3] - 16.0 * v[-4] + 3.0 * v[-5]) / (12.0 * s)
    return out


def _dx(values: np.ndarray, spacing: float) -> np.ndarray:
    return _deriv_axis0(values, spacing)


def _dy(values: np.ndarray, spacing: float) -> np.ndarray:
    return _deriv_axis0(values.T, spacing).T


def wirtinger_d(f: ScalarField) -> ScalarField:
    """d = (d/dx1 - i d/dx2)/2; annihilates antiholomorphic fields."""
    s = f.grid.spacing
    return ScalarField(f.grid, 0.5 * (_dx(f.values, s) - 1j * _dy(f.values, s)))


def wirtinger_dbar(f: ScalarField) -> ScalarField:
    """dbar = (d/dx1 + i d/dx2)/2; annihilates holomorphic fields."""
    s = f.grid.spacing
    return ScalarField(f.grid, 0.5 * (_dx(f.values, s) + 1j * _dy(f.values, s)))


def mixed_wirtinger(f: ScalarField, n_d: int, n_dbar: int) -> ScalarField:
    """Apply wirtinger_d n_d times and wirtinger_dbar n_dbar times."""
    if n_d < 0 or n_dbar < 0:
        raise ValueError("derivative orders must be nonnegative")
    out = f
    for _ in range(n_dbar):
        out = wirtinger_dbar(out)
    for _ in range(n_d):
        out = wirtinger_d(out)
    return out


def integrate(f: ScalarField) -> complex:
    """Trapezoid quadrature of f over the grid square."""
    g = f.grid
    w = g._trapezoid_1d
    return complex(w @ f.values @ w) * g.spacing**2


def _weighted_p_sum(f: ScalarField, p: float) -> float:
    g = f.grid
    w = g._trapezoid_1d
    a = np.abs(f.values) ** p
    return float(w @ a @ w) * g.spacing**2


def norm_lp(f: ScalarField, p) -> float:
    """Discrete L^p norm; p = inf gives the max-norm."""
    if p == np.inf or p == float("inf"):
        return float(np.max(np.abs(f.values)))
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return _weighted_p_sum(f, p) ** (1.0 / p)


def norm_w1p(f: ScalarField, p) -> float:
    """L^p norm of (f, df, dbar f) combined: first-order Sobolev norm."""
    parts = (f, wirtinger_d(f), wirtinger_dbar(f))
    if p == np.inf or p == float("inf"):
        return max(norm_lp(q, p) for q in parts)
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return sum(_weighted_p_sum(q, p) for q in parts) ** (1.0 / p)


def norm_hm(f: ScalarField, m: int) -> float:
    """Sobolev H^m norm: L^2 norms of all d^a dbar^b f with a + b <= m."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    # build the derivative table by extending holomorphic order first
    rows = {(0, 0): f}
    total = 0.0
    for a in range(m + 1):
        if a > 0:
            rows[(a, 0)] = wirtinger_d(rows[(a - 1, 0)])
        cur = rows[(a, 0)]
        total += _weighted_p_sum(cur, 2)
        for b in range(1, m + 1 - a):
            cur = wirtinger_dbar(cur)
            total += _weighted_p_sum(cur, 2)
    return total**0.5


def masked_l2(f: ScalarField, margin: float = 0.05) -> float:
    """L^2 norm restricted to the central subgrid (margin fraction cut per edge)."""
    g = f.grid
    mask = g.interior_mask(margin)
    a = np.abs(f.values) ** 2 * mask
    w = g._trapezoid_1d
    return float(w @ a @ w) ** 0.5 * g.spacing
