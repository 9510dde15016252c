"""The reduced planar ODE v'' = f(v, v', eps) for all three applications.

f is a truncated polynomial sum f_ijk A^i B^j eps^k.  In the anticipated
scaling X = kappa x, v = a V (with kappa = |eps|^n, a = eps^q) every
retained term has weight q i + (q+n) j + k equal to q + 2n, so the scaled
system

    V_X = W,   W_X = sum f_ijk V^i W^j  (* eps^(weight - target))

is eps-free on the truncation.  Orbits, equilibria, closed-form profiles,
connections, the water-wave conserved quantity, and the variational flow
all operate in the scaled variables.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .applications import ElasticityShear, FisherKPP, ScalingPlan
from .conjflow import ConjugateBranch, branch_expand, check_admissibility
from .errors import DegenerateParameters, NoConnectionError, NumericalError
from .hierarchy import expand_reduction_richardson

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-13
SHOOTING_WINDOW = 40.0
SEED_OFFSET = 1e-7
BLOWUP_BOUND = 1e6
COEFF_PRUNE_TOL = 1e-8

SCALINGS = {
    "elasticity": ElasticityShear.scaling,
    "fkpp": FisherKPP.scaling,
    "waterwave": ScalingPlan(p=1, n=1, q=1, m=3, f_a_order=2),
}


@dataclass
class PhaseState:
    V: float
    W: float
    X: float = 0.0


@dataclass
class Equilibrium:
    V: float                   # scaled location (equilibria sit on W = 0)
    A: float                   # unscaled amplitude a_q eps^q V
    kind: str                  # saddle | center | sink | source
    eigenvalues: tuple
    W: float = 0.0


@dataclass
class ReducedODE:
    """Truncated reduced ODE with application metadata."""

    application: str
    coeffs: dict               # (i, j, k) -> f_ijk, unscaled
    scaling: ScalingPlan
    s020: float = None         # flow-force B^2 coefficient (water waves)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        target = self.scaling.target_weight
        pruned = {}
        for ijk, v in self.coeffs.items():
            if ijk[0] == ijk[1] == 0:
                raise ValueError("constant-in-(A,B) coefficient breaks the "
                                 "trivial-solution family")
            w = self.scaling.weight(ijk)
            if w < target and abs(v) <= COEFF_PRUNE_TOL:
                continue      # numerically-zero subcritical residue
            if w < target:
                raise NumericalError(
                    f"subcritical coefficient {ijk} = {v:.3e}; the anticipated "
                    "scaling is inconsistent")
            if v != 0.0:
                pruned[ijk] = float(v)
        self.coeffs = pruned
        if self.application in ("elasticity", "waterwave"):
            for (i, j, k), v in self.coeffs.items():
                if j % 2 and abs(v) > COEFF_PRUNE_TOL:
                    raise NumericalError(
                        f"reversibility violated: f_{i}{j}{k} = {v:.3e}")

    # -- evaluation ---------------------------------------------------------

    def f(self, A, B, eps):
        """Unscaled truncated f(A, B, eps)."""
        tot = 0.0
        for (i, j, k), v in self.coeffs.items():
            tot += v * A ** i * B ** j * eps ** k
        return tot

    def scaled_terms(self, eps):
        """(i, j, coefficient) of the scaled vector field at this eps."""
        target = self.scaling.target_weight
        out = []
        for (i, j, k), v in self.coeffs.items():
            excess = self.scaling.weight((i, j, k)) - target
            out.append((i, j, v * eps ** excess if excess else v))
        return out

    def scaled_rhs(self, V, W, eps=0.0):
        tot = 0.0
        for i, j, coef in self.scaled_terms(eps):
            tot += coef * V ** i * W ** j
        return tot

    def scaled_jacobian(self, V, W, eps=0.0):
        fV = fW = 0.0
        for i, j, coef in self.scaled_terms(eps):
            if i:
                fV += coef * i * V ** (i - 1) * W ** j
            if j:
                fW += coef * j * V ** i * W ** (j - 1)
        return np.array([[0.0, 1.0], [fV, fW]])

    def amplitude_scale(self, eps):
        return eps ** self.scaling.q

    def rhs(self, X, z, eps=0.0):
        return np.array([z[1], self.scaled_rhs(z[0], z[1], eps)])


# ---------------------------------------------------------------------------
# assembly


def assemble_elasticity(b1, lam2, w1, b2=0.0, n=512,
                        from_hierarchy=True) -> ReducedODE:
    app = ElasticityShear(b1, lam2, w1, b2)
    coeffs = (expand_reduction_richardson(app, n).table.reduced_coefficients()
              if from_hierarchy else app.coefficients_closed_form())
    b1l2 = b1 * lam2
    meta = {"params": {"b1": b1, "lam2": lam2, "w1": w1, "b2": b2},
            "expected_equilibria": 3 if b1l2 * (b2 + 2 * w1) < 0 else 1}
    f300 = 0.75 * (b2 + 2 * w1)
    if b1l2 < 0 and f300 > 0:
        meta["front"] = {"a1": float(np.sqrt(-b1l2 / f300)),
                         "kappa1": float(np.sqrt(-b1l2 / 2.0))}
    if b1l2 > 0 and f300 < 0:
        meta["pulse"] = {"a1": float(np.sqrt(-2.0 * b1l2 / f300)),
                         "kappa1": float(np.sqrt(b1l2))}
    return ReducedODE("elasticity", coeffs, app.scaling, meta=meta)


def assemble_fkpp(beta, lam1, rho2=1.0, n=512, from_hierarchy=True,
                  app: FisherKPP = None) -> ReducedODE:
    if app is None:
        app = FisherKPP(beta, lam1, rho2)
    coeffs = (expand_reduction_richardson(app, n).table.reduced_coefficients()
              if from_hierarchy else app.coefficients_closed_form())
    sigma = coeffs.get((2, 0, 0), app.sigma_closed_form())
    meta = {"params": {"beta": beta, "lam1": lam1, "rho2": rho2},
            "rho0": app.rho0, "sigma": float(sigma),
            "expected_equilibria": 2}
    return ReducedODE("fkpp", coeffs, app.scaling, meta=meta)


def assemble_waterwave(h0, c0, rho, omega,
                       branch: ConjugateBranch = None) -> ReducedODE:
    """Cubic-quadratic reduced ODE of the bore problem.

    f300 comes from its closed form; the quadratic coefficient is pinned by
    the conjugate-flow branch (downstream saddle at V = hp' - 1) through
    the tanh-front relations a1 = -2 f201 / (3 f300), lam1^2 = f201^2 /
    (18 f300); f102 then follows from the same relations.  The flow-force
    coefficient s020 scales the reduced Hamiltonian.
    """
    report = check_admissibility(h0, c0, rho, omega)
    if not report.bif_ok:
        raise DegenerateParameters("(h0, c0) is not a conjugate base point")
    if not report.nondegenerate:
        raise DegenerateParameters("conjugate-flow nondegeneracy fails")
    if float(c0) == 0.0 or not 0 < float(h0) < 1:
        raise DegenerateParameters("degenerate parameters: c0 = 0 or h0 on wall")
    if branch is None:
        branch = branch_expand(h0, c0, rho, omega)
    h0f, c0f, rhof, omegaf = (float(v) for v in (h0, c0, rho, omega))
    denom = c0f ** 2 * h0f ** 3 * (1 - h0f) ** 2 * (rhof + (1 - rhof) * h0f)
    f300 = 1.5 * ((1 - rhof) * h0f ** 3 + c0f ** 2 * (4 - 5 * h0f)) / denom
    if not report.f300_positive or f300 <= 0:
        raise DegenerateParameters("f300 <= 0: no front in this regime")
    a1 = float(branch.hp1) - 1.0
    f201 = -1.5 * f300 * a1
    f102 = 2.0 * f201 ** 2 / (9.0 * f300)
    s020 = -c0f ** 2 * (rhof + (1 - rhof) * h0f) / 6.0
    lam1 = float(np.sqrt(f201 ** 2 / (18.0 * f300)))
    meta = {"params": {"h0": h0f, "c0": c0f, "rho": rhof, "omega": omegaf},
            "a1": a1, "lam1": lam1, "branch": branch,
            "expected_equilibria": 3, "admissibility": report}
    return ReducedODE("waterwave", {(3, 0, 0): f300, (2, 0, 1): f201,
                                    (1, 0, 2): f102},
                      SCALINGS["waterwave"], s020=s020, meta=meta)


def assemble(application: str, params: dict, **kw) -> ReducedODE:
    if application == "elasticity":
        return assemble_elasticity(**params, **kw)
    if application == "fkpp":
        return assemble_fkpp(**params, **kw)
    if application == "waterwave":
        return assemble_waterwave(**params, **kw)
    raise ValueError(f"unknown application {application!r}")


# ---------------------------------------------------------------------------
# equilibria


def equilibria(ode: ReducedODE, eps, trust=1e3, newton_tol=1e-12) -> list:
    """Real roots of the scaled f(., 0, eps), polished and classified."""
    terms = [(i, c) for i, j, c in ode.scaled_terms(eps) if j == 0]
    deg = max(i for i, _ in terms)
    poly = np.zeros(deg + 1)
    for i, c in terms:
        poly[deg - i] += c
    roots = np.roots(poly)
    vs = sorted({0.0} | {float(r.real) for r in roots
                         if abs(r.imag) <= 1e-9 * (1 + abs(r))
                         and abs(r.real) <= trust})
    out = []
    for v in vs:
        for _ in range(60):
            fv = ode.scaled_rhs(v, 0.0, eps)
            dfv = ode.scaled_jacobian(v, 0.0, eps)[1, 0]
            if abs(fv) <= newton_tol or dfv == 0:
                break
            v -= fv / dfv
        if abs(ode.scaled_rhs(v, 0.0, eps)) > newton_tol:
            continue
        if any(abs(v - e.V) <= 1e-9 * (1 + abs(v)) for e in out):
            continue
        J = ode.scaled_jacobian(v, 0.0, eps)
        lam = np.linalg.eigvals(J)
        re, im = np.real(lam), np.imag(lam)
        if np.all(np.abs(re) <= 1e-9) and np.any(np.abs(im) > 1e-9):
            kind = "center"
        elif np.all(np.abs(im) <= 1e-9) and re.min() < 0 < re.max():
            kind = "saddle"
        elif np.max(re) < 0:
            kind = "sink"
        else:
            kind = "source"
        out.append(Equilibrium(v, ode.amplitude_scale(eps) * v, kind,
                               (complex(lam[0]), complex(lam[1]))))
    expected = ode.meta.get("expected_equilibria")
    if expected is not None and len(out) != expected:
        warnings.warn(f"found {len(out)} equilibria, expected {expected}",
                      stacklevel=2)
    return out


# ---------------------------------------------------------------------------
# integration


@dataclass
class Orbit:
    """Scaled trajectory with dense evaluation and clamped saddle tails.

    Evaluation between samples uses cubic Hermite interpolation with the
    exact nodal derivatives V' = W and W' = f(V, W); outside the sampled
    span the orbit is clamped to the stored equilibrium states (which the
    true solution approaches beyond double-precision resolution).
    """

    ode: ReducedODE
    eps: float
    X: np.ndarray
    V: np.ndarray
    W: np.ndarray
    sol: object = None                      # scipy dense output on [X0, X1]
    left_state: tuple = None                # clamp for X < X[0]
    right_state: tuple = None               # clamp for X > X[-1]
    flags: list = field(default_factory=list)
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def _splines(self):
        if not hasattr(self, "_herm"):
            from scipy.interpolate import CubicHermiteSpline
            Wp = np.array([self.ode.scaled_rhs(v, w, self.eps)
                           for v, w in zip(self.V, self.W)])
            self._herm = (CubicHermiteSpline(self.X, self.V, self.W),
                          CubicHermiteSpline(self.X, self.W, Wp))
        return self._herm

    def __call__(self, X):
        X = np.atleast_1d(np.asarray(X, dtype=float))
        lo, hi = self.X[0], self.X[-1]
        if self.sol is not None:
            pairs = np.array([self.sol(min(max(x, lo), hi)) for x in X])
            V, W = pairs[:, 0].copy(), pairs[:, 1].copy()
        else:
            sV, sW = self._splines()
            Xc = np.clip(X, lo, hi)
            V, W = sV(Xc), sW(Xc)
        if self.left_state is not None:
            V[X < lo], W[X < lo] = self.left_state
        if self.right_state is not None:
            V[X > hi], W[X > hi] = self.right_state
        return V, W

    def endpoint_error(self, target: Equilibrium) -> float:
        return float(np.hypot(self.V[-1] - target.V, self.W[-1] - target.W))

    def conserved(self) -> np.ndarray:
        return np.array([conserved_scaled(self.ode, PhaseState(v, w))
                         for v, w in zip(self.V, self.W)])

    def to_csv(self, path) -> None:
        ww = self.ode.application == "waterwave"
        cons = self.conserved() if ww else None
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["X", "V", "W", "conserved"])
            for i in range(len(self.X)):
                row = [self.X[i], self.V[i], self.W[i],
                       cons[i] if ww else ""]
                writer.writerow([f"{v:.17g}" if v != "" else "" for v in row])


def integrate(ode: ReducedODE, start, x_span, eps=0.0, rtol=DEFAULT_RTOL,
              atol=DEFAULT_ATOL, t_eval=None, blowup=BLOWUP_BOUND) -> Orbit:
    """Adaptive RK4(5) trajectory of the scaled system with dense output."""
    if isinstance(start, PhaseState):
        z0 = [start.V, start.W]
    else:
        z0 = [float(start[0]), float(start[1])]
    if not np.all(np.isfinite(z0)):
        raise ValueError("non-finite initial state")

    def escape(X, z):
        return abs(z[0]) + abs(z[1]) - blowup
    escape.terminal = True

    sol = solve_ivp(lambda X, z: ode.rhs(X, z, eps), x_span, z0,
                    method="RK45", rtol=rtol, atol=atol, dense_output=True,
                    t_eval=t_eval, events=escape)
    if not sol.success and sol.status != 1:
        raise NumericalError(f"integration failed: {sol.message}")
    flags = ["escaped"] if sol.status == 1 and len(sol.t_events[0]) else []
    return Orbit(ode, eps, sol.t, sol.y[0], sol.y[1], sol.sol,
                 flags=flags, rtol=rtol, atol=atol)


# ---------------------------------------------------------------------------
# closed-form truncated profiles


def truncated_profile(ode: ReducedODE, eps, X):
    """Closed-form scaled profile (V, W) of the truncated equation.

    elasticity front: V = a1 tanh(kappa1 X); pulse: V = a1 sech(kappa1 X);
    water wave:       V = a1 (1 + tanh(lam1 X)) / 2   (sign of eps folded
    into the argument, matching v = eps V, x = X / |eps|).
    """
    X = np.asarray(X, dtype=float)
    sgn = 1.0 if eps >= 0 else -1.0
    if ode.application == "elasticity":
        b1l2 = ode.coeffs[(1, 0, 2)]
        f300 = ode.coeffs[(3, 0, 0)]
        if b1l2 < 0 and f300 > 0:
            a1 = np.sqrt(-b1l2 / f300)
            k1 = np.sqrt(-b1l2 / 2.0)
            V = a1 * np.tanh(k1 * sgn * X)
            W = a1 * k1 * sgn / np.cosh(k1 * X) ** 2
            return V, W
        if b1l2 > 0 and f300 < 0:
            a1 = np.sqrt(-2.0 * b1l2 / f300)
            k1 = np.sqrt(b1l2)
            V = a1 / np.cosh(k1 * X)
            W = -a1 * k1 * np.tanh(k1 * X) / np.cosh(k1 * X)
            return V, W
        raise NumericalError("no front in this regime: need b1*lam2 < 0 < w-cubic "
                             "for fronts or the reversed signs for pulses")
    if ode.application == "waterwave":
        a1, lam1 = ode.meta["a1"], ode.meta["lam1"]
        T = np.tanh(lam1 * sgn * X)
        V = a1 * (1.0 + T) / 2.0
        W = a1 * lam1 * sgn * (1.0 - T ** 2) / 2.0
        return V, W
    raise NumericalError(f"no closed-form profile for {ode.application!r}")


def profile_residual(ode: ReducedODE, eps, X) -> np.ndarray:
    """Pointwise defect V'' - f of the closed-form profile, V'' analytic."""
    X = np.atleast_1d(np.asarray(X, dtype=float))
    sgn = 1.0 if eps >= 0 else -1.0
    V, W = truncated_profile(ode, eps, X)
    if ode.application == "elasticity":
        b1l2, f300 = ode.coeffs[(1, 0, 2)], ode.coeffs[(3, 0, 0)]
        if b1l2 < 0 and f300 > 0:
            a1, k1 = np.sqrt(-b1l2 / f300), np.sqrt(-b1l2 / 2.0)
            T = np.tanh(k1 * sgn * X)
            Vxx = -2.0 * a1 * k1 ** 2 * T * (1.0 - T ** 2)
        else:
            a1, k1 = np.sqrt(-2.0 * b1l2 / f300), np.sqrt(b1l2)
            S = 1.0 / np.cosh(k1 * X)
            Vxx = a1 * k1 ** 2 * S * (1.0 - 2.0 * S ** 2)
    elif ode.application == "waterwave":
        a1, lam1 = ode.meta["a1"], ode.meta["lam1"]
        T = np.tanh(lam1 * sgn * X)
        Vxx = -a1 * lam1 ** 2 * T * (1.0 - T ** 2)
    else:
        raise NumericalError(f"no closed-form profile for {ode.application!r}")
    f = np.array([ode.scaled_rhs(v, w, eps)
                  for v, w in zip(np.atleast_1d(V), np.atleast_1d(W))])
    return Vxx - f


# ---------------------------------------------------------------------------
# connections


def _unstable_direction(ode, eq: Equilibrium, eps, toward: float) -> np.ndarray:
    J = ode.scaled_jacobian(eq.V, 0.0, eps)
    lam, vecs = np.linalg.eig(J)
    k = int(np.argmax(np.real(lam)))
    if np.real(lam[k]) <= 0:
        raise NoConnectionError("source equilibrium has no unstable direction")
    v = np.real(vecs[:, k])
    v /= np.linalg.norm(v)
    if v[0] * toward < 0:
        v = -v
    return v


def invariant_triangle(ode: ReducedODE):
    """(c1, c2, V_minus) for the trapping region of the invasion front.

    Region: W < 0, W + c1 V > 0, W - c2 (V - V_minus) > 0 with c1 = lam1/2
    and c2 the unstable slope at the saddle; requires lam1 > 2.
    """
    lam1 = ode.meta["params"]["lam1"]
    sigma = ode.meta["sigma"]
    if lam1 <= 2:
        raise NumericalError("invariant triangle needs lam1 > 2")
    c1 = lam1 / 2.0
    c2 = (-lam1 + np.sqrt(lam1 ** 2 + 4.0)) / 2.0
    return c1, c2, 1.0 / sigma


def in_triangle(ode, V, W, tol=1e-9) -> bool:
    c1, c2, vminus = invariant_triangle(ode)
    return bool(np.all(W <= tol) and np.all(W + c1 * V >= -tol)
                and np.all(W - c2 * (V - vminus) >= -tol))


def connect(ode: ReducedODE, eps, frm: Equilibrium, to: Equilibrium,
            seed_offset=SEED_OFFSET, window=SHOOTING_WINDOW,
            rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> Orbit:
    """Connecting orbit of the truncated scaled system.

    Reversible case (elasticity): shoot along the unstable eigenvector and
    locate the signed W-axis (front) or V-axis (pulse) crossing by event
    bisection, then continue through the crossing by the reversor
    (V, W)(X) -> (V, -W)(-X) (composed with the odd reflection for the
    front, whose halves are exchanged by both symmetries).  Invasion
    front: integrate the saddle's unstable manifold inside the invariant
    triangle into the sink.  Water wave: shoot along the zero level set of
    the conserved quantity between the two saddles.
    """
    if ode.application == "fkpp":
        return _connect_fkpp(ode, eps, frm, to, seed_offset, window, rtol, atol)
    if ode.application == "elasticity":
        return _connect_reversible(ode, eps, frm, to, seed_offset, window,
                                   rtol, atol)
    if ode.application == "waterwave":
        return _connect_level_set(ode, eps, frm, to, seed_offset, window,
                                  rtol, atol)
    raise NumericalError(f"no connection strategy for {ode.application!r}")


def _shoot(ode, eps, z0, window, rtol, atol, events):
    sol = solve_ivp(lambda X, z: ode.rhs(X, z, eps), (0.0, window), z0,
                    method="RK45", rtol=rtol, atol=atol, dense_output=True,
                    events=events)
    if not sol.success and sol.status != 1:
        raise NumericalError(f"integration failed: {sol.message}")
    return sol


def _connect_reversible(ode, eps, frm, to, seed_offset, window, rtol, atol):
    homoclinic = abs(frm.V - to.V) <= 1e-12 and abs(frm.W - to.W) <= 1e-12
    if frm.kind != "saddle" or (to.kind != "saddle" and not homoclinic):
        raise NoConnectionError("reversible shooting needs saddle endpoints")
    # aim toward the target (for the pulse, toward the far turning point)
    if homoclinic:
        # shoot toward the side where the cubic allows a turning point
        f300 = ode.coeffs[(3, 0, 0)]
        toward = 1.0 if f300 < 0 else -1.0
    else:
        toward = np.sign(to.V - frm.V)
    direction = _unstable_direction(ode, frm, eps, toward)
    z0 = np.array([frm.V, frm.W]) + seed_offset * direction

    if homoclinic:
        def crossing(X, z):       # V-axis crossing: W = 0
            return z[1]
        crossing.direction = -toward
    else:
        def crossing(X, z):       # W-axis crossing: V = 0 (front symmetry axis)
            return z[0] - 0.5 * (frm.V + to.V)
        crossing.direction = toward
    crossing.terminal = True

    sol = _shoot(ode, eps, z0, window, rtol, atol, crossing)
    if sol.status != 1 or not len(sol.t_events[0]):
        raise NoConnectionError("connection not found: no crossing within "
                                "the shooting window")
    Xc = float(sol.t_events[0][0])
    n_half = max(1000, len(sol.t) * 8)
    Xh = np.linspace(0.0, Xc, n_half)
    Vh, Wh = sol.sol(Xh)
    Xfull = np.concatenate([Xh, 2 * Xc - Xh[-2::-1]]) - Xc
    if homoclinic:
        # reversor (V, W)(X) -> (V, -W)(-X) about the V-axis crossing
        Vfull = np.concatenate([Vh, Vh[-2::-1]])
        Wfull = np.concatenate([Wh, -Wh[-2::-1]])
    else:
        # reversor composed with the odd reflection (V, W) -> (-V, -W)
        # continues the half front through the W-axis crossing
        Vfull = np.concatenate([Vh, -Vh[-2::-1]])
        Wfull = np.concatenate([Wh, Wh[-2::-1]])
    orbit = Orbit(ode, eps, Xfull, Vfull, Wfull, sol=None,
                  left_state=(frm.V, frm.W), right_state=(to.V, to.W),
                  rtol=rtol, atol=atol)
    err = orbit.endpoint_error(to)
    if err > 100 * seed_offset:
        raise NoConnectionError(f"connection endpoint error {err:.3e}")
    return orbit


def _connect_fkpp(ode, eps, frm, to, seed_offset, window, rtol, atol):
    if frm.kind != "saddle" or to.kind != "sink":
        raise NoConnectionError("invasion front connects a saddle to a sink")
    direction = _unstable_direction(ode, frm, eps, toward=np.sign(to.V - frm.V))
    if direction[1] > 0:      # enter through W < 0
        direction = -direction
    z0 = np.array([frm.V, frm.W]) + seed_offset * direction

    def arrived(X, z):
        return np.hypot(z[0] - to.V, z[1] - to.W) - 1e-9
    arrived.terminal = True
    arrived.direction = -1

    sol = _shoot(ode, eps, z0, 40 * window, rtol, atol, arrived)
    if not len(sol.t_events[0]):
        raise NoConnectionError("connection not found: front did not reach "
                                "the sink within the window")
    X = np.linspace(sol.t[0], sol.t[-1], max(400, 4 * len(sol.t)))
    V, W = sol.sol(X)
    if not in_triangle(ode, V, W, tol=1e-7 + 10 * seed_offset):
        raise NumericalError("triangle invariance violated numerically")
    return Orbit(ode, eps, X - X[-1] / 2, V, W, sol=None,
                 left_state=(frm.V, frm.W), right_state=(to.V, to.W),
                 rtol=rtol, atol=atol)


def _connect_level_set(ode, eps, frm, to, seed_offset, window, rtol, atol):
    if frm.kind != "saddle" or to.kind != "saddle":
        raise NoConnectionError("bore connects two saddles")
    lvl_f = conserved_scaled(ode, PhaseState(frm.V, 0.0))
    lvl_t = conserved_scaled(ode, PhaseState(to.V, 0.0))
    if abs(lvl_f - lvl_t) > 1e-10:
        raise NoConnectionError(
            f"saddles sit on different conserved levels ({lvl_f:.3e} vs "
            f"{lvl_t:.3e}); no level-set connection")
    direction = _unstable_direction(ode, frm, eps, toward=np.sign(to.V - frm.V))
    z0 = np.array([frm.V, frm.W]) + seed_offset * direction

    span = float(np.hypot(to.V - frm.V, to.W - frm.W))

    def closest(X, z):
        # derivative of the squared distance to the target saddle
        f = ode.scaled_rhs(z[0], z[1], eps)
        return (z[0] - to.V) * z[1] + (z[1] - to.W) * f
    closest.terminal = False
    closest.direction = 1

    def departed(X, z):
        return np.hypot(z[0] - to.V, z[1] - to.W) - 3.0 * span
    departed.terminal = True
    departed.direction = 1

    sol = _shoot(ode, eps, z0, window, rtol, atol, [closest, departed])
    minima = sol.t_events[0]
    if not len(minima):
        raise NoConnectionError("connection not found within the window")
    states = np.array([sol.sol(t) for t in minima])
    dists = np.hypot(states[:, 0] - to.V, states[:, 1] - to.W)
    k = int(np.argmin(dists))
    if dists[k] > 1e-4 * max(1.0, span):
        raise NoConnectionError(f"orbit misses the far saddle by {dists[k]:.3e}")
    X_end = float(minima[k])
    X = np.linspace(sol.t[0], X_end, max(1000, 8 * len(sol.t)))
    V, W = sol.sol(X)
    orbit = Orbit(ode, eps, X - X[-1] / 2, V, W, sol=None,
                  left_state=(frm.V, frm.W), right_state=(to.V, to.W),
                  rtol=rtol, atol=atol)
    return orbit


# ---------------------------------------------------------------------------
# conserved quantity and linearization


def conserved_scaled(ode: ReducedODE, state: PhaseState, eps=0.0) -> float:
    """Scaled flow-force Hamiltonian W^2/2 - int f dV (water wave only)."""
    if ode.application != "waterwave":
        raise NumericalError("conserved quantity is defined for the "
                             "water-wave reduction only")
    tot = 0.5 * state.W ** 2
    for i, j, coef in ode.scaled_terms(eps):
        if j == 0:
            tot -= coef * state.V ** (i + 1) / (i + 1)
    return float(tot)


@dataclass
class VariationalFlow:
    """Fundamental solution of the linearized reduced ODE along an orbit."""

    ode: ReducedODE
    orbit: Orbit
    X: np.ndarray
    Phi: np.ndarray            # shape (len(X), 2, 2)

    def propagate(self, v0: np.ndarray) -> np.ndarray:
        return np.einsum("nij,j->ni", self.Phi, np.asarray(v0, dtype=float))


def linearize_along(ode: ReducedODE, orbit: Orbit, eps=None,
                    rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> VariationalFlow:
    """Integrate the variational equation vdot'' = f_(A,B) . (vdot, vdot')."""
    eps = orbit.eps if eps is None else eps

    def rhs(X, y):
        V, W = orbit(X)
        J = ode.scaled_jacobian(float(V[0]), float(W[0]), eps)
        Phi = y.reshape(2, 2)
        return (J @ Phi).ravel()

    X0, X1 = orbit.X[0], orbit.X[-1]
    sol = solve_ivp(rhs, (X0, X1), np.eye(2).ravel(), method="RK45",
                    rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise NumericalError(f"variational integration failed: {sol.message}")
    X = np.linspace(X0, X1, 400)
    Phi = np.array([sol.sol(x).reshape(2, 2) for x in X])
    return VariationalFlow(ode, orbit, X, Phi)


def orbit_reflected(orbit: Orbit) -> tuple:
    """(X, V, W) of the reversor image (V, -W)(-X), for symmetry checks."""
    return -orbit.X[::-1], orbit.V[::-1], -orbit.W[::-1]


def translation_mode_residual(ode: ReducedODE, orbit: Orbit, n_steps=200,
                              rtol=1e-12, atol=1e-14) -> float:
    """Residual of vdot = v' in the variational equation along an orbit.

    The translation mode (W, W') must be reproduced by the variational
    flow; the check propagates it across each cell of a partition of the
    orbit (short spans, so no exponential error amplification) and reports
    the worst mismatch against the orbit's own values.
    """
    eps = orbit.eps
    Xs = np.linspace(orbit.X[0], orbit.X[-1], n_steps + 1)
    V, W = orbit(Xs)
    Wp = np.array([ode.scaled_rhs(v, w, eps) for v, w in zip(V, W)])
    worst = 0.0
    for i in range(n_steps):
        def rhs(X, y):
            vv, ww = orbit(X)
            J = ode.scaled_jacobian(float(vv[0]), float(ww[0]), eps)
            return J @ y
        sol = solve_ivp(rhs, (Xs[i], Xs[i + 1]), [W[i], Wp[i]],
                        method="RK45", rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"variational step failed: {sol.message}")
        got = sol.y[:, -1]
        worst = max(worst, float(np.hypot(got[0] - W[i + 1],
                                          got[1] - Wp[i + 1])))
    return worst
