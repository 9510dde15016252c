"""The linear hierarchy L Psi = F with the point-projection constraint.

L = d_xx + L' acts degree-wise on XPolyFields:

    (L Psi)_m = L' g_m + (m+1)(m+2) g_{m+2}.

Solving descends from the top degree.  At each degree m the transversal
problem L' g_m = h_m - (m+1)(m+2) g_{m+2} is solvable only if the right
side has no kernel component; that fixes the kernel part of g_{m+2}.  The
kernel parts of g_0 and g_1 are fixed last by the two point conditions
Psi(0, y*) = d_x Psi(0, y*) = 0.

The discrete operator is deflated so its near-zero eigenvalue is exactly
zero (consistent at the discretization order); transversal solves then
diagonalize in the eigenbasis and are exact for the discrete operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .spectrum import BaseOperator
from .xpoly import PsiTable, XPolyField, richardson_table

DEFAULT_DMAX = 6
SOLVE_RESIDUAL_TOL = 1e-9   # relative to ||A|| * scale


class _Transverse:
    """Deflated spectral solver for one operator (cached on the operator)."""

    def __init__(self, op: BaseOperator):
        fact = op.factorization()
        self.op = op
        self.nu = fact["nu"].copy()
        self.nu[0] = 0.0                      # deflate the kernel eigenvalue
        self.phi = fact["phi"]                # M-orthonormal columns
        self.weights = fact["weights"]
        self.anorm = fact["anorm"]
        self.phi0 = self.phi[:, 0]
        istar = op.index_of(op.eval_point)
        val = self.phi0[istar]
        if abs(val) < 1e-12:
            raise NumericalError("phi0 vanishes at the evaluation point")
        self.kernel = self.phi0 / val         # normalized to 1 at y*
        self.istar = istar

    def coeffs(self, w: np.ndarray) -> np.ndarray:
        return self.phi.T @ (self.weights * w)

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Deflated L' w."""
        return self.phi @ (self.nu * self.coeffs(w))

    def solve(self, h: np.ndarray, kernel_value: float = 0.0):
        """g with L'g = h - s*kernel and <g, phi0> = kernel_value.

        s is the solvability constant along the y*-normalized kernel
        direction; it vanishes when h is already range-compatible.
        """
        hat = self.coeffs(h)
        s = hat[0] * self.phi0[self.istar]    # <h,phi0>/<kernel,phi0>
        coef = np.zeros_like(hat)
        coef[1:] = hat[1:] / self.nu[1:]
        coef[0] = kernel_value
        g = self.phi @ coef
        resid = self.apply(g) - (h - s * self.kernel)
        rel = np.max(np.abs(resid)) / (self.anorm * max(1.0, np.max(np.abs(g))))
        if rel > SOLVE_RESIDUAL_TOL:
            raise NumericalError(f"transversal solve residual {rel:.3e} too large")
        return g, float(s)


_TRANSVERSE_CACHE: dict = {}


def _transverse(op: BaseOperator) -> _Transverse:
    key = id(op)
    entry = _TRANSVERSE_CACHE.get(key)
    if entry is None or entry[0] is not op:
        entry = (op, _Transverse(op))
        _TRANSVERSE_CACHE[key] = entry
    return entry[1]


def apply_L(op: BaseOperator, fld: XPolyField) -> XPolyField:
    """(d_xx + L') applied degree-wise; the x-degree never increases."""
    tr = _transverse(op)
    out = [tr.apply(fld.profile(m)) + (m + 1) * (m + 2) * fld.profile(m + 2)
           for m in range(fld.degree + 1)]
    return XPolyField(op, out)


def solve_transverse_bvp(op: BaseOperator, h, kernel_value: float = 0.0):
    """Scalar solvability step: L'g = h after the kernel correction.

    Returns (g, s) where s is the solvability constant in the decomposition
    h = (range part) + s * kernel, kernel being phi0 scaled to 1 at y*.
    """
    g, s = _transverse(op).solve(np.asarray(h, dtype=float), kernel_value)
    return g, s


def solve_bordered(op: BaseOperator, rhs: XPolyField,
                   d_max: int = DEFAULT_DMAX) -> XPolyField:
    """Solve L Psi = rhs with Psi(0,y*) = d_x Psi(0,y*) = 0.

    Descends from the highest degree; the kernel component of g_{m+2}
    enforces solvability at degree m, and the two point conditions fix the
    kernel components of g_0 and g_1 at the end.
    """
    if rhs.degree > d_max - 2:
        raise NumericalError(
            f"degree overflow: rhs degree {rhs.degree} needs Psi degree "
            f"{rhs.degree + 2} > d_max = {d_max}; raise d_max")
    tr = _transverse(op)
    d = rhs.degree
    npts = op.n + 1
    # kernel coefficients of g_{m+2} are forced by solvability at degree m
    # and depend only on the kernel component of rhs_m
    alpha = np.zeros(d + 3)
    for m in range(d + 1):
        hat0 = float(tr.coeffs(rhs.profile(m))[0])
        alpha[m + 2] = hat0 / ((m + 1) * (m + 2))
    # range parts, descending so g_{m+2} is complete before degree m
    ghat = [np.zeros(npts) for _ in range(d + 3)]
    for m in range(d, -1, -1):
        g_up = ghat[m + 2] + alpha[m + 2] * tr.phi0
        source = rhs.profile(m) - (m + 1) * (m + 2) * g_up
        ghat[m], _ = tr.solve(source, kernel_value=0.0)
    # point conditions fix the kernel parts of g_0 and g_1
    alpha[0] = -ghat[0][tr.istar] / tr.phi0[tr.istar]
    alpha[1] = -ghat[1][tr.istar] / tr.phi0[tr.istar]
    profiles = [ghat[m] + alpha[m] * tr.phi0 for m in range(d + 3)]
    psi = XPolyField(op, profiles).trimmed()
    if psi.degree > d_max:
        raise NumericalError("degree overflow after solve; raise d_max")
    return psi


def point_condition_residual(psi: XPolyField, ystar: float) -> float:
    """|Psi(0,y*)| + |d_x Psi(0,y*)|."""
    i = psi.op.index_of(ystar)
    v0 = psi.profile(0)[i]
    v1 = psi.profile(1)[i]
    return abs(float(v0)) + abs(float(v1))


def kernel_field(op: BaseOperator) -> np.ndarray:
    """phi0 normalized to 1 at the evaluation point (hierarchy convention)."""
    return _transverse(op).kernel.copy()


@dataclass
class HierarchyResult:
    table: PsiTable           # Richardson-extrapolated (coarse grid) or plain
    fine: PsiTable = None
    coarse: PsiTable = None

    def reduced_coefficients(self) -> dict:
        return self.table.reduced_coefficients()


def expand_reduction(problem, n: int = None, d_max: int = DEFAULT_DMAX) -> PsiTable:
    """Solve the full hierarchy for an application on one grid.

    `problem` supplies operator(n), index_set(), and rhs(ijk, table); the
    right-hand sides may reference lower-order table entries, so indices are
    solved in increasing total order.
    """
    op = problem.operator(n) if n is not None else problem.operator()
    table = PsiTable(op, op.eval_point, kernel=kernel_field(op))
    for ijk in sorted(problem.index_set(), key=lambda t: (sum(t), t)):
        F = problem.rhs(ijk, table)
        if F is None or F.is_zero():
            table.entries[ijk] = XPolyField.zero(op)
            continue
        table.entries[ijk] = solve_bordered(op, F, d_max=d_max)
    return table


def expand_reduction_richardson(problem, n: int,
                                d_max: int = DEFAULT_DMAX) -> HierarchyResult:
    """Hierarchy on the nested (n, n/2) pair, extrapolated to the coarse grid."""
    if n % 2:
        raise ValueError("Richardson extrapolation needs even n")
    fine = expand_reduction(problem, n, d_max=d_max)
    coarse = expand_reduction(problem, n // 2, d_max=d_max)
    return HierarchyResult(richardson_table(fine, coarse), fine, coarse)
