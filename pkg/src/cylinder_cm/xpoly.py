"""Polynomial-in-x fields with grid profiles in y.

An XPolyField represents  sum_m x^m g_m(y)  by the finite list of profiles
g_0..g_d sampled on the owning operator's grid.  All right-hand sides of
the reduction hierarchy live in this class, which keeps the axial variable
exact and confines discretization to the transversal direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .spectrum import BaseOperator

TRIM_TOL = 1e-13


@dataclass
class XPolyField:
    op: BaseOperator
    profiles: list  # list of full-grid arrays, index = power of x

    def __post_init__(self):
        npts = self.op.n + 1
        self.profiles = [np.asarray(g, dtype=float) for g in self.profiles]
        if not self.profiles:
            self.profiles = [np.zeros(npts)]
        for g in self.profiles:
            if g.shape != (npts,):
                raise ValueError("profile does not match the operator grid")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, op: BaseOperator) -> "XPolyField":
        return cls(op, [np.zeros(op.n + 1)])

    @classmethod
    def from_profile(cls, op: BaseOperator, g, degree: int = 0) -> "XPolyField":
        profiles = [np.zeros(op.n + 1) for _ in range(degree + 1)]
        profiles[degree] = np.asarray(g, dtype=float).copy()
        return cls(op, profiles)

    # -- structure ---------------------------------------------------------

    @property
    def degree(self) -> int:
        return len(self.profiles) - 1

    def profile(self, m: int) -> np.ndarray:
        if m < 0 or m > self.degree:
            return np.zeros(self.op.n + 1)
        return self.profiles[m]

    def scale(self) -> float:
        return max(float(np.max(np.abs(g))) for g in self.profiles)

    def trimmed(self, tol: float = TRIM_TOL) -> "XPolyField":
        """Drop vanishing top profiles (degree invariant: top nonzero unless 0)."""
        cut = tol * max(1.0, self.scale())
        d = self.degree
        while d > 0 and np.max(np.abs(self.profiles[d])) <= cut:
            d -= 1
        return XPolyField(self.op, [g.copy() for g in self.profiles[:d + 1]])

    def is_zero(self, tol: float = TRIM_TOL) -> bool:
        return all(np.max(np.abs(g)) <= tol for g in self.profiles)

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "XPolyField") -> "XPolyField":
        d = max(self.degree, other.degree)
        return XPolyField(self.op, [self.profile(m) + other.profile(m)
                                    for m in range(d + 1)])

    def __sub__(self, other: "XPolyField") -> "XPolyField":
        d = max(self.degree, other.degree)
        return XPolyField(self.op, [self.profile(m) - other.profile(m)
                                    for m in range(d + 1)])

    def __mul__(self, s: float) -> "XPolyField":
        return XPolyField(self.op, [s * g for g in self.profiles])

    __rmul__ = __mul__

    def __neg__(self) -> "XPolyField":
        return self * -1.0

    def product(self, other: "XPolyField") -> "XPolyField":
        """Pointwise product: polynomial in x, pointwise in y."""
        d = self.degree + other.degree
        out = [np.zeros(self.op.n + 1) for _ in range(d + 1)]
        for i, gi in enumerate(self.profiles):
            for j, gj in enumerate(other.profiles):
                out[i + j] += gi * gj
        return XPolyField(self.op, out)

    def dx(self) -> "XPolyField":
        """Derivative in x, degree-wise."""
        if self.degree == 0:
            return XPolyField.zero(self.op)
        return XPolyField(self.op, [(m + 1) * self.profiles[m + 1]
                                    for m in range(self.degree)])

    # -- evaluation --------------------------------------------------------

    def profiles_at(self, ystar: float) -> np.ndarray:
        i = self.op.index_of(ystar)
        return np.array([g[i] for g in self.profiles])

    def eval(self, x, ystar: float):
        """Value at (x, ystar); x may be an array."""
        coeffs = self.profiles_at(ystar)
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in coeffs[::-1]:
            out = out * x + c
        return out if out.shape else float(out)

    def max_abs(self) -> float:
        return self.scale()


def reduced_coefficient(psi: XPolyField, ystar: float) -> float:
    """Second x-derivative at x=0 of the trace at ystar: 2 g_2(ystar)."""
    if psi.degree < 2:
        return 0.0
    return float(2.0 * psi.profile(2)[psi.op.index_of(ystar)])


@dataclass
class PsiTable:
    """Solved reduction-map coefficients indexed by (i, j, k)."""

    op: BaseOperator
    ystar: float
    entries: dict = field(default_factory=dict)
    kernel: np.ndarray = None          # phi0 normalized to 1 at ystar

    def __getitem__(self, ijk) -> XPolyField:
        return self.entries[tuple(ijk)]

    def get(self, ijk) -> XPolyField:
        return self.entries.get(tuple(ijk), XPolyField.zero(self.op))

    def reduced_coefficients(self) -> dict:
        return {ijk: reduced_coefficient(psi, self.ystar)
                for ijk, psi in self.entries.items()}

    def to_json(self, path=None) -> str:
        payload = {
            ",".join(str(v) for v in ijk): {
                "degree": psi.degree,
                "profiles": [g.tolist() for g in psi.profiles],
            }
            for ijk, psi in sorted(self.entries.items())
        }
        text = json.dumps(payload, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def richardson_table(fine: PsiTable, coarse: PsiTable) -> PsiTable:
    """Richardson-extrapolate two nested-grid tables onto the coarse grid.

    Requires the fine grid to contain the coarse nodes (subsampled pair).
    """
    if fine.op.n != 2 * coarse.op.n:
        raise ValueError("tables are not a nested n / n/2 pair")
    out = PsiTable(coarse.op, coarse.ystar)
    if fine.kernel is not None and coarse.kernel is not None:
        out.kernel = (4.0 * fine.kernel[::2] - coarse.kernel) / 3.0
    for ijk in coarse.entries:
        pf, pc = fine.entries[ijk], coarse.entries[ijk]
        d = max(pf.degree, pc.degree)
        profiles = [(4.0 * pf.profile(m)[::2] - pc.profile(m)) / 3.0
                    for m in range(d + 1)]
        out.entries[ijk] = XPolyField(coarse.op, profiles).trimmed()
    return out
