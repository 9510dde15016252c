"""Application problems feeding the reduction hierarchy.

Each application supplies its transversal operator, the index set of the
anticipated scaling, and hand-assembled right-hand sides F_ijk built from
its multilinear expansions.  Closed-form reduced coefficients are kept
alongside as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spectrum import BC, DIRICHLET, NEUMANN, BaseOperator, critical_parameter, robin
from .xpoly import XPolyField


@dataclass(frozen=True)
class ScalingPlan:
    """Exponents lambda ~ eps^p, kappa ~ eps^n, amplitude ~ eps^q.

    m is the leading nonlinearity order, f_a_order the order of f_A in the
    unscaled parameter.  The balancing relations 2n = (m-1) q and
    2n = p * f_a_order must hold.
    """

    p: int
    n: int
    q: int
    m: int
    f_a_order: int

    def __post_init__(self):
        if 2 * self.n != (self.m - 1) * self.q:
            raise ValueError("scaling violates 2n = (m-1) q")
        if 2 * self.n != self.p * self.f_a_order:
            raise ValueError("scaling violates 2n = p * (order of f_A)")

    @property
    def target_weight(self) -> int:
        return self.q + 2 * self.n

    def weight(self, ijk) -> int:
        i, j, k = ijk
        return self.q * i + (self.q + self.n) * j + k

    def index_set(self) -> set:
        out = set()
        for i in range(self.target_weight + 1):
            for j in range(self.target_weight + 1):
                for k in range(self.target_weight + 1):
                    if (self.weight((i, j, k)) <= self.target_weight
                            and i + j + k >= 2 and i + j >= 1):
                        out.add((i, j, k))
        return out


class ElasticityShear:
    """Anti-plane shear strip with a live body force.

    Linearization: L' = d_yy + 1 with Dirichlet walls on (-pi/2, pi/2);
    kernel cos(y).  Sources at cubic order come from the quartic strain
    energy term and the cubic part of the body force.
    """

    name = "elasticity"
    scaling = ScalingPlan(p=2, n=1, q=1, m=3, f_a_order=1)
    default_n = 512

    def __init__(self, b1: float, lam2: float, w1: float, b2: float = 0.0):
        self.b1 = float(b1)
        self.lam2 = float(lam2)
        self.w1 = float(w1)
        self.b2 = float(b2)

    def operator(self, n: int = None) -> BaseOperator:
        return BaseOperator.build(-np.pi / 2, np.pi / 2, n or self.default_n,
                                  a=1.0, c=1.0, eval_point=0.0)

    def index_set(self) -> set:
        return self.scaling.index_set()

    def rhs(self, ijk, table) -> XPolyField:
        op = table.op
        y = op.y
        if ijk == (1, 0, 2):
            return XPolyField.from_profile(op, self.b1 * self.lam2 * np.cos(y))
        if ijk == (3, 0, 0):
            prof = (self.b2 * np.cos(y) ** 3
                    + 6.0 * self.w1 * np.sin(y) ** 2 * np.cos(y))
            return XPolyField.from_profile(op, prof)
        return None

    # -- closed forms ------------------------------------------------------

    def coefficients_closed_form(self) -> dict:
        return {(1, 0, 2): self.b1 * self.lam2,
                (3, 0, 0): 0.75 * (self.b2 + 2.0 * self.w1)}


class FisherKPP:
    """2-D invasion-front problem on the unit strip.

    Neumann wall at y=0, absorbing Robin(beta) wall at y=1.  The critical
    carrying-capacity parameter rho0 solves rho tan(rho) = beta; the kernel
    is cos(rho0 y).  rho2 fixes the eps^2 deviation of rho^2 (conventionally
    1); lam1 scales the wave speed.
    """

    name = "fkpp"
    scaling = ScalingPlan(p=1, n=1, q=2, m=2, f_a_order=2)
    default_n = 512

    def __init__(self, beta: float, lam1: float, rho2: float = 1.0,
                 rho0: float = None, spectral_n: int = 512):
        self.beta = float(beta)
        self.lam1 = float(lam1)
        self.rho2 = float(rho2)
        if rho0 is None:
            rho0 = critical_parameter(
                lambda r: self._operator_at(r, spectral_n),
                (1e-3, np.pi / 2 - 1e-3))
        self.rho0 = float(rho0)

    def _operator_at(self, rho: float, n: int) -> BaseOperator:
        return BaseOperator.build(0.0, 1.0, n, a=1.0, c=rho ** 2,
                                  bc_lo=NEUMANN, bc_hi=robin(self.beta),
                                  eval_point=0.0)

    def operator(self, n: int = None) -> BaseOperator:
        return self._operator_at(self.rho0, n or self.default_n)

    def index_set(self) -> set:
        return self.scaling.index_set()

    def rhs(self, ijk, table) -> XPolyField:
        op = table.op
        phi0 = np.cos(self.rho0 * op.y)
        if ijk == (0, 1, 1):
            return XPolyField.from_profile(op, -self.lam1 * phi0)
        if ijk == (1, 0, 2):
            fld = XPolyField.from_profile(op, -self.rho2 * phi0)
            return fld - self.lam1 * table.get((1, 0, 1)).dx()
        if ijk == (2, 0, 0):
            return XPolyField.from_profile(op, phi0 ** 2)
        return None

    # -- closed forms ------------------------------------------------------

    def sigma_closed_form(self) -> float:
        r = self.rho0
        return (4.0 / 3.0) * np.sin(r) * (3.0 - np.sin(r) ** 2) / (2.0 * r + np.sin(2.0 * r))

    def c2_closed_form(self) -> float:
        r = self.rho0
        return 4.0 * np.sin(r) * (3.0 - np.sin(r) ** 2) / (3.0 * (np.sin(2.0 * r) + 2.0 * r))

    def coefficients_closed_form(self) -> dict:
        return {(1, 0, 2): -self.rho2,
                (0, 1, 1): -self.lam1,
                (2, 0, 0): self.sigma_closed_form()}
