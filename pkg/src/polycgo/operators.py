"""Perturbed polyharmonic operators: application, form transforms, adjoints.

An operator of order 2m is the principal part d^m dbar^m plus a total table of
lower-order coefficients c[j,k], 0 <= j,k <= m-1.  Two coefficient conventions
are carried by a form tag:

  standard:    d^m dbar^m u + sum c[j,k] * d^j dbar^k u
  divergence:  d^m dbar^m u + sum d^j ( c[j,k] * dbar^k u )

The two tables are related by a triangular binomial-derivative transform; the
divergence table is the one the oscillatory integral equation consumes.  The
formal adjoint (for the pairing integral of u * conj(v)) is produced by a
Leibniz expansion over the (j, k) multi-indices rather than hand-coded per m.
"""

from __future__ import annotations

from math import comb

from .grid import ComplexGrid, ScalarField, mixed_wirtinger, wirtinger_d, wirtinger_dbar

STANDARD = "standard"
DIVERGENCE = "divergence"


class PerturbedOperator:
    """Order parameter m plus a total (j, k) coefficient table of ScalarFields."""

    def __init__(self, grid: ComplexGrid, m: int, coeffs=None, form: str = STANDARD):
        if not (isinstance(m, int) and m >= 2):
            raise ValueError(f"m must be an integer >= 2, got {m}")
        if form not in (STANDARD, DIVERGENCE):
            raise ValueError(f"unknown form {form!r}")
        self.grid = grid
        self.m = m
        self.form = form
        table = {}
        coeffs = dict(coeffs or {})
        for j in range(m):
            for k in range(m):
                c = coeffs.pop((j, k), None)
                if c is None:
                    c = grid.zero()
                elif c.grid != grid:
                    raise ValueError(f"coefficient ({j},{k}) lives on a different grid")
                table[(j, k)] = c
        if coeffs:
            raise ValueError(f"coefficient indices out of range: {sorted(coeffs)}")
        self.coeffs = table

    def coeff(self, j: int, k: int) -> ScalarField:
        return self.coeffs[(j, k)]

    def nonzero_indices(self):
        return [(j, k) for (j, k), c in sorted(self.coeffs.items()) if not c.is_zero()]

    def is_unperturbed(self) -> bool:
        return not self.nonzero_indices()

    def __repr__(self):
        nz = self.nonzero_indices()
        return f"PerturbedOperator(m={self.m}, form={self.form}, nonzero={nz})"


class _DerivativeCache:
    """Memoized d^a dbar^b of one field, built by extending cached lower orders."""

    def __init__(self, f: ScalarField):
        self._memo = {(0, 0): f}

    def get(self, a: int, b: int) -> ScalarField:
        if (a, b) not in self._memo:
            if b > 0:
                self._memo[(a, b)] = wirtinger_dbar(self.get(a, b - 1))
            else:
                self._memo[(a, b)] = wirtinger_d(self.get(a - 1, 0))
        return self._memo[(a, b)]


def apply(op: PerturbedOperator, u: ScalarField) -> ScalarField:
    """Evaluate the operator on u with repeated Wirtinger stencils."""
    if u.grid != op.grid:
        raise ValueError("u lives on a different grid than the coefficients")
    m = op.m
    du = _DerivativeCache(u)
    out = du.get(m, m)
    if op.form == STANDARD:
        for (j, k), c in sorted(op.coeffs.items()):
            if not c.is_zero():
                out = out + c * du.get(j, k)
    else:
        for j in range(m):
            row = None
            for k in range(m):
                c = op.coeffs[(j, k)]
                if c.is_zero():
                    continue
                term = c * du.get(0, k)
                row = term if row is None else row + term
            if row is not None:
                out = out + mixed_wirtinger(row, j, 0)
    return out


def to_divergence_form(op: PerturbedOperator) -> PerturbedOperator:
    """Solve the triangular binomial-derivative system for the divergence table.

    Top-down in j: the highest row transfers unchanged, and each lower row is
    the standard coefficient minus the derivative spill-over of the rows above.
    """
    if op.form != STANDARD:
        raise ValueError("operator is already in divergence form")
    m = op.m
    new = {}
    for k in range(m):
        new[(m - 1, k)] = op.coeff(m - 1, k)
        for j in range(m - 2, -1, -1):
            acc = op.coeff(j, k)
            for l in range(j + 1, m):
                upper = new[(l, k)]
                if not upper.is_zero():
                    acc = acc - comb(l, j) * mixed_wirtinger(upper, l - j, 0)
            new[(j, k)] = acc
    return PerturbedOperator(op.grid, m, new, form=DIVERGENCE)


def to_standard_form(op: PerturbedOperator) -> PerturbedOperator:
    """Forward evaluation of the binomial-derivative sum."""
    if op.form != DIVERGENCE:
        raise ValueError("operator is already in standard form")
    m = op.m
    new = {}
    for k in range(m):
        for j in range(m):
            acc = op.coeff(j, k)
            for l in range(j + 1, m):
                c = op.coeff(l, k)
                if not c.is_zero():
                    acc = acc + comb(l, j) * mixed_wirtinger(c, l - j, 0)
            new[(j, k)] = acc
    return PerturbedOperator(op.grid, m, new, form=STANDARD)


def adjoint(op: PerturbedOperator) -> PerturbedOperator:
    """Normal form of the formal adjoint for the pairing integral(u * conj(v)).

    The principal part is formally self-adjoint.  Each perturbation c * d^j dbar^k
    contributes (-1)^(j+k) dbar^j d^k (conj(c) * .), expanded by the Leibniz rule
    into the standard coefficient table.
    """
    if op.form != STANDARD:
        raise ValueError("adjoint expects the standard form")
    m = op.m
    new = {}
    for (j, k) in sorted(op.coeffs):
        c = op.coeffs[(j, k)]
        if c.is_zero():
            continue
        sign = -1.0 if (j + k) % 2 else 1.0
        dc = _DerivativeCache(c.conj())
        for alpha in range(j + 1):  # dbar falling on v (alpha times)
            for beta in range(k + 1):  # d falling on v (beta times)
                w = sign * comb(j, alpha) * comb(k, beta)
                contrib = w * dc.get(k - beta, j - alpha)
                key = (beta, alpha)
                new[key] = contrib if key not in new else new[key] + contrib
    return PerturbedOperator(op.grid, m, new, form=STANDARD)
