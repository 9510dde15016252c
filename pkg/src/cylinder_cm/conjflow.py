"""Conjugate flows of the two-layer channel.

The upstream/downstream states of a bore must share mass fluxes, Bernoulli
constant, and flow force.  Eliminating the fluxes reduces the conditions
to two polynomial equations in (h, hp, c):

    P_dyn  = 0   (Bernoulli / dynamic condition),
    P_flow = 0   (flow-force balance),

both parametric in the density ratio rho and upper-layer vorticity omega.
Because the system degenerates on the diagonal hp = h, P_flow is replaced
by the desingularized

    P_new = (2 h (h-1) P_flow - 3 P_dyn) / (hp - h),

which is an exact polynomial division (certified at construction; the
bracket form is equivalent to dividing out P_flow(h,h,c)/P_dyn(h,h,c),
which reduces to -3/(2h(1-h)) identically).  All polynomial arithmetic is
exact over rationals.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DegenerateParameters, NumericalError
from .ratpoly import MultiPoly

NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 50
NEWTON_MAX_HALVINGS = 8
BRANCH_STEP = 1e-3


def _exactable(*vals) -> bool:
    return all(isinstance(v, Rational) for v in vals)


def build_poly_dyn(rho, omega, perturb=0) -> MultiPoly:
    """Dynamic (Bernoulli) conjugate-flow polynomial.

    `perturb` adds a deliberate offset to one coefficient (fault injection
    for the verification pipeline); leave it at 0 for real computations.
    """
    h, hp, c = (MultiPoly.var(v) for v in ("h", "hp", "c"))
    one, two = MultiPoly.const(1), MultiPoly.const(2)
    p = (omega * omega * rho) * (hp ** 2 * (hp - h) * (two - hp - h) ** 2) \
        + (4 * rho) * (hp ** 2 * (2 * hp ** 2 - c ** 2 * hp - 4 * hp
                                  - c ** 2 * h + 2 * c ** 2 + two)) \
        + (4 * omega * rho) * (c * (one - h) * hp ** 2 * (two - hp - h)) \
        - 4 * ((one - hp) ** 2 * (2 * hp ** 2 - c ** 2 * hp - c ** 2 * h))
    if perturb:
        p = p + MultiPoly({(0, 2, 0): _frac_or_float(perturb)})
    return p


def build_poly_flow(rho, omega) -> MultiPoly:
    h, hp, c = (MultiPoly.var(v) for v in ("h", "hp", "c"))
    one = MultiPoly.const(1)
    return (omega * omega * rho) * (hp * (hp - h) * (hp + 3 * h - 4 * one)) \
        + (12 * rho) * (hp * (hp - c ** 2 - one)) \
        + (12 * omega * rho) * (c * (h - one) * hp) \
        - 12 * ((hp - one) * (hp - c ** 2))


def _frac_or_float(x):
    return Fraction(x) if isinstance(x, Rational) else float(x)


def build_poly_new(rho, omega, perturb=0):
    """Desingularized flow-force polynomial with its division certificate.

    Returns (P_new, bracket) where bracket = 2h(h-1) P_flow - 3 P_dyn and
    P_new * (hp - h) == bracket, exactly for rational (rho, omega) and to
    roundoff for float parameters.
    """
    h, hp, _ = (MultiPoly.var(v) for v in ("h", "hp", "c"))
    exact = _exactable(rho, omega, perturb)
    bracket = 2 * h * (h - MultiPoly.const(1)) * build_poly_flow(rho, omega) \
        - 3 * build_poly_dyn(rho, omega, perturb=perturb)
    quot, rem = bracket.divide_hp_minus_h()
    scale = max((abs(v) for v in bracket.terms.values()), default=1)
    if not _poly_small(rem, 0 if exact else 1e-12 * float(scale)):
        raise NumericalError(
            "desingularization failed: (hp - h) does not divide the "
            "flow-force bracket (transcription error in P_flow/P_dyn)")
    recon = (quot * (hp - h)) - bracket
    if not _poly_small(recon, 0 if exact else 1e-12 * float(scale)):
        raise NumericalError("division certificate failed")
    return quot, bracket


def _poly_small(p: MultiPoly, tol) -> bool:
    if tol == 0:
        return p.is_zero()
    return all(abs(float(v)) <= tol for v in p.terms.values())


class ConjugateFlowSystem:
    """P_conj = (P_dyn, P_new) for fixed (rho, omega), with derivatives."""

    def __init__(self, rho, omega, perturb_dyn=0):
        self.rho = _frac_or_float(rho)
        self.omega = _frac_or_float(omega)
        self.p_dyn = build_poly_dyn(self.rho, self.omega, perturb=perturb_dyn)
        self.p_flow = build_poly_flow(self.rho, self.omega)
        self.p_new, self.bracket = build_poly_new(self.rho, self.omega,
                                                  perturb=perturb_dyn)
        self._grad = {name: {v: poly.diff(v) for v in ("h", "hp", "c")}
                      for name, poly in (("dyn", self.p_dyn), ("new", self.p_new))}

    def residual(self, h, hp, c):
        return (self.p_dyn.eval(h, hp, c), self.p_new.eval(h, hp, c))

    def jac_hp_c(self, h, hp, c):
        g = self._grad
        return np.array([
            [g["dyn"]["hp"].eval_float(h, hp, c), g["dyn"]["c"].eval_float(h, hp, c)],
            [g["new"]["hp"].eval_float(h, hp, c), g["new"]["c"].eval_float(h, hp, c)],
        ])


@dataclass
class FlowState:
    """An x-independent two-layer state (h, hp, c) with derived quantities.

    Upstream is the (h, c) pair; downstream lives at depth hp with lower
    and upper surface speeds c1p, c2p fixed by the mass fluxes.
    """

    h: object
    hp: object
    c: object
    rho: object
    omega: object

    def __post_init__(self):
        for name, v in (("h", self.h), ("hp", self.hp)):
            if not 0 < float(v) < 1:
                raise ValueError(f"{name} = {float(v)} outside (0, 1)")
        if not 0 < float(self.rho) <= 1:
            raise ValueError("density ratio must lie in (0, 1]")

    @property
    def m1(self):
        return self.c * self.h

    @property
    def m2(self):
        d = 1 - self.h
        return self.c * d + self.omega * d * d / 2

    @property
    def c1p(self):
        return self.c * self.h / self.hp

    @property
    def c2p(self):
        d, dp = 1 - self.h, 1 - self.hp
        return (self.c * d + self.omega * (d * d - dp * dp) / 2) / dp

    @property
    def bernoulli(self):
        return (self.rho - 1) * self.c * self.c / 2

    def bernoulli_downstream(self):
        return (self.rho * self.c2p ** 2 - self.c1p ** 2) / 2 \
            + (self.rho - 1) * (self.hp - self.h)


def flow_force(state: FlowState, side: str):
    """Momentum integral of an x-independent state, integrated in closed form.

    The stream functions are linear (lower) and quadratic (upper) in Y, so
    the integrals have exact antiderivatives; no quadrature is involved and
    the result is exact for rational inputs.
    """
    h, hp, c = state.h, state.hp, state.c
    rho, omega = state.rho, state.omega
    if side == "upstream":
        d = 1 - h
        return (c * c * h + h * h / 2
                + rho * (c * c * d + c * omega * d * d + omega * omega * d ** 3 / 3
                         - d * d / 2))
    if side == "downstream":
        d, dp = 1 - h, 1 - hp
        c1p, c2p = state.c1p, state.c2p
        return (c1p * c1p * hp / 2 + (c * c / 2 + h) * hp - hp * hp / 2
                + rho * (c2p * c2p * dp / 2 + c2p * omega * dp * dp
                         + omega * omega * dp ** 3 / 3 - dp * dp / 2
                         + (h - hp) * dp + c * c * dp / 2))
    raise ValueError("side must be 'upstream' or 'downstream'")


def poly_dyn(state: FlowState):
    return build_poly_dyn(state.rho, state.omega).eval(state.h, state.hp, state.c)


def poly_new(state: FlowState):
    return build_poly_new(state.rho, state.omega)[0].eval(state.h, state.hp, state.c)


def solve_conjugate(h, rho, omega, guess, tol=NEWTON_TOL,
                    max_iter=NEWTON_MAX_ITER, system: ConjugateFlowSystem = None):
    """Newton-solve P_conj(h, ., .) = 0 for (hp, c) from a guess.

    Damped Newton: the step is halved (at most 8 times) whenever the
    residual norm does not decrease.
    """
    sysm = system if system is not None else ConjugateFlowSystem(rho, omega)
    h = float(h)
    z = np.array([float(guess[0]), float(guess[1])])

    def res(zv):
        r = sysm.residual(h, zv[0], zv[1])
        return np.array([float(r[0]), float(r[1])])

    r = res(z)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            return float(z[0]), float(z[1])
        J = sysm.jac_hp_c(h, z[0], z[1])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-14 * (np.max(np.abs(J)) ** 2 + 1e-30):
            raise DegenerateParameters("nondegeneracy failed: singular Jacobian")
        step = np.linalg.solve(J, -r)
        lam = 1.0
        for _ in range(NEWTON_MAX_HALVINGS + 1):
            z_new = z + lam * step
            r_new = res(z_new)
            if np.max(np.abs(r_new)) < np.max(np.abs(r)) or np.max(np.abs(r_new)) <= tol:
                break
            lam *= 0.5
        else:
            raise NumericalError("no conjugate flow near guess: Newton stalled")
        z, r = z_new, r_new
    if np.max(np.abs(r)) <= tol:
        return float(z[0]), float(z[1])
    raise NumericalError("no conjugate flow near guess: Newton did not converge")


@dataclass
class AdmissibilityReport:
    """Checks at a candidate conjugate base point.

    det_solve is the Jacobian determinant with respect to the solved-for
    variables (hp, c); it is the solvability condition for continuing the
    branch in h.  det_branch = det(P_h + P_hp, P_c) rules out the trivial
    diagonal continuation (equivalently hp' = 1).
    """

    bif_dyn: object
    bif_new: object
    bif_ok: bool
    det_solve: object
    det_branch: object
    nondegenerate: bool
    f300_positive: bool
    critical_layer: bool

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, Rational) and not isinstance(v, int):
                return f"{Fraction(v)}"
            return v
        return {k: enc(getattr(self, k)) for k in
                ("bif_dyn", "bif_new", "bif_ok", "det_solve", "det_branch",
                 "nondegenerate", "f300_positive", "critical_layer")}


def check_admissibility(h0, c0, rho, omega, tol=1e-10) -> AdmissibilityReport:
    """Bifurcation, nondegeneracy, f300 > 0, and critical-layer conditions."""
    sysm = ConjugateFlowSystem(rho, omega)
    r_dyn, r_new = sysm.residual(h0, h0, c0)
    exact = _exactable(h0, c0, rho, omega)
    bif_ok = (r_dyn == 0 and r_new == 0) if exact \
        else (abs(float(r_dyn)) <= tol and abs(float(r_new)) <= tol)
    grads = {}
    for name, poly in (("dyn", sysm.p_dyn), ("new", sysm.p_new)):
        grads[name] = {v: poly.diff(v).eval(h0, h0, c0) for v in ("h", "hp", "c")}
    det_solve = (grads["dyn"]["hp"] * grads["new"]["c"]
                 - grads["dyn"]["c"] * grads["new"]["hp"])
    det_branch = ((grads["dyn"]["h"] + grads["dyn"]["hp"]) * grads["new"]["c"]
                  - (grads["new"]["h"] + grads["new"]["hp"]) * grads["dyn"]["c"])
    if exact:
        nondeg = det_solve != 0 and det_branch != 0
    else:
        scale = max(abs(float(v)) for gg in grads.values() for v in gg.values())
        nondeg = (abs(float(det_solve)) > 1e-10 * max(1.0, scale ** 2)
                  and abs(float(det_branch)) > 1e-10 * max(1.0, scale ** 2))
    f300_pos = h0 ** 3 * (1 - rho) + 4 * c0 * c0 * (1 - h0) > c0 * c0 * h0
    crit = c0 * (c0 + (1 - h0) * omega) < 0
    return AdmissibilityReport(r_dyn, r_new, bool(bif_ok), det_solve, det_branch,
                               bool(nondeg), bool(f300_pos), bool(crit))


@dataclass
class ConjugateBranch:
    """One-parameter family of conjugate flows through (h0, h0, c0).

    h^eps = h0 + eps; hp and c carry exact first/second-order series
    coefficients from implicit differentiation, plus Newton-continued
    samples on an eps grid.
    """

    h0: object
    c0: object
    rho: object
    omega: object
    hp1: object
    hp2: object
    c1: object
    c2: object
    samples: list          # (eps, h, hp, c, res_dyn, res_new)
    system: ConjugateFlowSystem

    def series(self, eps):
        hp = self.h0 + self.hp1 * eps + self.hp2 * eps * eps
        c = self.c0 + self.c1 * eps + self.c2 * eps * eps
        return hp, c

    def state(self, eps, polish=True) -> FlowState:
        h = float(self.h0) + float(eps)
        hp, c = (float(v) for v in self.series(float(eps)))
        if polish and eps != 0:
            hp, c = solve_conjugate(h, self.rho, self.omega, (hp, c),
                                    system=self.system)
        return FlowState(h, hp, c, self.rho, self.omega)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eps", "h", "hp", "c", "res_dyn", "res_new"])
            for row in self.samples:
                writer.writerow([f"{float(v):.17g}" for v in row])


def branch_expand(h0, c0, rho, omega, eps_max=1e-2, step=BRANCH_STEP,
                  system: ConjugateFlowSystem = None) -> ConjugateBranch:
    """Series coefficients by implicit differentiation plus a sampled branch.

    Exact rational linear solves at the base point give hp1, c1 (first
    order) and hp2, c2 (second order, from the twice-differentiated
    system).  Newton continuation with the series as predictor samples the
    branch on the eps grid.
    """
    sysm = system if system is not None else ConjugateFlowSystem(rho, omega)
    report = check_admissibility(h0, c0, rho, omega)
    if not report.bif_ok:
        raise DegenerateParameters(
            f"(h0, c0) is not a conjugate base point: P_conj = "
            f"({float(report.bif_dyn):.3e}, {float(report.bif_new):.3e})")
    if not report.nondegenerate:
        raise DegenerateParameters(
            f"nondegeneracy violated: det_(hp,c) = {float(report.det_solve):.3e}, "
            f"det_(h+hp, c) = {float(report.det_branch):.3e}")

    polys = (sysm.p_dyn, sysm.p_new)
    d1 = [{v: p.diff(v) for v in ("h", "hp", "c")} for p in polys]
    g = [{v: d1[i][v].eval(h0, h0, c0) for v in ("h", "hp", "c")}
         for i in range(2)]
    # first order: J (hp', c') = -P_h
    det = g[0]["hp"] * g[1]["c"] - g[0]["c"] * g[1]["hp"]
    if det == 0:
        raise DegenerateParameters("nondegeneracy failed: J_(hp,c) singular "
                                   "at the base point")
    r1 = [-g[i]["h"] for i in range(2)]
    hp1 = (r1[0] * g[1]["c"] - g[0]["c"] * r1[1]) / det
    c1 = (g[0]["hp"] * r1[1] - r1[0] * g[1]["hp"]) / det
    if hp1 == 1:
        raise DegenerateParameters("degenerate branch: hp' = 1, upstream and "
                                   "downstream states do not separate")
    # second order: J (hp'', c'') = -(quadratic terms)
    r2 = []
    for i in range(2):
        d2 = {(u, v): d1[i][u].diff(v).eval(h0, h0, c0)
              for u in ("h", "hp", "c") for v in ("h", "hp", "c")}
        val = (d2[("h", "h")] + 2 * d2[("h", "hp")] * hp1 + 2 * d2[("h", "c")] * c1
               + d2[("hp", "hp")] * hp1 * hp1 + 2 * d2[("hp", "c")] * hp1 * c1
               + d2[("c", "c")] * c1 * c1)
        r2.append(-val)
    hpp = (r2[0] * g[1]["c"] - g[0]["c"] * r2[1]) / det
    cpp = (g[0]["hp"] * r2[1] - r2[0] * g[1]["hp"]) / det
    hp2, c2 = hpp / 2, cpp / 2

    branch = ConjugateBranch(h0, c0, rho, omega, hp1, hp2, c1, c2, [], sysm)
    ks = int(round(eps_max / step))
    for k in list(range(-ks, 0)) + list(range(1, ks + 1)):
        eps = k * step
        h = float(h0) + eps
        guess = tuple(float(v) for v in branch.series(eps))
        hp, c = solve_conjugate(h, rho, omega, guess, system=sysm)
        rd, rn = sysm.residual(h, hp, c)
        branch.samples.append((eps, h, hp, c, float(rd), float(rn)))
    branch.samples.sort()
    return branch
