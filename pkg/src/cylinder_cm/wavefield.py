"""Leading-order reconstruction of the two-layer bore.

The stream functions are assembled from the upstream closed forms plus the
kernel correction composed with the interface-flattening coordinate map:
in the lower layer the hat kernel composed with the map contributes
Y / (h + eta), in the upper layer (1 - Y) / (1 - h - eta).  With v = eta
this makes the lower kinematic conditions exact, pins the wall flux in the
upper layer exactly, and leaves O(eps^2) defects in the remaining
interface conditions, matching the expansion order of the bore family.

The module locates the critical layer, brackets the cat's-eye region,
traces and classifies streamlines, checks interface monotonicity, and
measures PDE residuals for the convergence study.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .conjflow import ConjugateBranch, FlowState
from .dynamics import ReducedODE, Orbit, truncated_profile
from .errors import NumericalError

WINDOW_SCALE = 40.0
TRACE_STEP = 1e-3           # transverse resolution of level-set tracing
TURNING_POINT_TOL = 1e-4


@dataclass
class WaveField:
    """Reconstructed bore (psi1, psi2, eta) at a fixed eps."""

    eps: float
    branch: ConjugateBranch
    ode: ReducedODE
    state: FlowState
    orbit: Orbit = None        # None: closed-form truncated profile

    def __post_init__(self):
        s = self.state
        self.h = float(s.h)
        self.hp = float(s.hp)
        self.c = float(s.c)
        self.rho = float(s.rho)
        self.omega = float(s.omega)
        self.m1 = float(s.m1)
        self.m2 = float(s.m2)
        self.window = WINDOW_SCALE / abs(self.eps) if self.eps else WINDOW_SCALE
        self.a1 = self.ode.meta["a1"]
        self.lam1 = self.ode.meta["lam1"]
        eta = self.eta(np.linspace(-self.window, self.window, 2001))
        if np.min(self.h + eta) <= 0.0 or np.max(self.h + eta) >= 1.0:
            raise NumericalError("interface exits the channel at this eps")

    # -- reduced orbit in unscaled variables --------------------------------

    def _v(self, x):
        """(v, v', v'') of the interface elevation at axial position x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        eps = self.eps
        if eps == 0.0:
            z = np.zeros_like(x)
            return z, z.copy(), z.copy()
        X = abs(eps) * x
        if self.orbit is None:
            V, W = truncated_profile(self.ode, eps, X)
        else:
            V, W = self.orbit(X)
        v = eps * V
        vp = eps * abs(eps) * W
        f = np.array([self.ode.scaled_rhs(vv, ww, eps) for vv, ww in zip(
            np.atleast_1d(V), np.atleast_1d(W))])
        vpp = eps ** 3 * f
        return v, vp, vpp

    def eta(self, x):
        return self._v(x)[0]

    def eta_x(self, x):
        return self._v(x)[1]

    # -- stream functions ----------------------------------------------------

    def psi1(self, x, Y):
        v, _, _ = self._v(x)
        return -self.c * (Y - self.h) + self.c * v * Y / (self.h + v)

    def psi2(self, x, Y):
        v, _, _ = self._v(x)
        return (-self.c * (Y - self.h) - 0.5 * self.omega * (Y - self.h) ** 2
                + self.c * v * (1.0 - Y) / (1.0 - self.h - v))

    def psi(self, x, Y):
        v, _, _ = self._v(x)
        below = Y <= self.h + v
        return np.where(below, self.psi1(x, Y), self.psi2(x, Y))

    def grad_psi1(self, x, Y):
        v, vp, _ = self._v(x)
        r = v / (self.h + v)
        rp = self.h * vp / (self.h + v) ** 2
        return self.c * Y * rp, -self.c + self.c * r

    def grad_psi2(self, x, Y):
        v, vp, _ = self._v(x)
        g = 1.0 - self.h
        s = v / (g - v)
        sp = g * vp / (g - v) ** 2
        px = self.c * (1.0 - Y) * sp
        py = -self.c - self.omega * (Y - self.h) - self.c * s
        return px, py

    def lap_defect1(self, x, Y):
        """Delta psi1 (exact Laplacian defect; psi1 is linear in Y)."""
        v, vp, vpp = self._v(x)
        hh = self.h
        rpp = hh * (vpp * (hh + v) - 2.0 * vp ** 2) / (hh + v) ** 3
        return self.c * Y * rpp

    def lap_defect2(self, x, Y):
        """Delta psi2 + omega."""
        v, vp, vpp = self._v(x)
        g = 1.0 - self.h
        spp = g * (vpp * (g - v) + 2.0 * vp ** 2) / (g - v) ** 3
        return self.c * (1.0 - Y) * spp

    # -- limits ---------------------------------------------------------------

    def upstream_psi2(self, Y):
        return -self.c * (Y - self.h) - 0.5 * self.omega * (Y - self.h) ** 2

    def bernoulli(self) -> float:
        return (self.rho - 1.0) * self.c ** 2 / 2.0


def reconstruct(branch: ConjugateBranch, eps, ode: ReducedODE,
                orbit: Orbit = None) -> WaveField:
    """Build the bore field at eps from a conjugate branch and reduced ODE.

    With orbit=None the closed-form truncated tanh profile supplies the
    interface; otherwise the integrated connection is used.
    """
    state = branch.state(eps) if eps else FlowState(
        float(branch.h0), float(branch.h0), float(branch.c0),
        float(branch.rho), float(branch.omega))
    return WaveField(float(eps), branch, ode, state, orbit)


# ---------------------------------------------------------------------------
# critical layer and the eye


@dataclass
class CriticalLayer:
    x: np.ndarray
    Yc: np.ndarray
    upstream_height: float
    level: float                 # streamline value (c_eps)^2 / (2 omega)
    convex: bool                 # psi2_YY > 0 along the curve


def critical_layer(fld: WaveField, x_samples=None) -> CriticalLayer:
    """Per-x Newton solve for the root of psi2_Y in the upper layer."""
    if fld.c * (fld.c + (1.0 - fld.h) * fld.omega) >= 0.0:
        raise NumericalError("no critical layer: c (c + (1-h) omega) >= 0")
    if x_samples is None:
        x_samples = np.linspace(-fld.window, fld.window, 801)
    x_samples = np.asarray(x_samples, dtype=float)
    Yc = np.empty_like(x_samples)
    seed = fld.h - fld.c / fld.omega
    for i, x in enumerate(x_samples):
        Y = seed if i == 0 else Yc[i - 1]
        for _ in range(50):
            _, py = fld.grad_psi2(x, Y)
            step = float(py) / fld.omega   # psi2_YY = -omega exactly
            Ynew = Y + step
            if abs(step) < 1e-14:
                Y = Ynew
                break
            Y = Ynew
        _, py = fld.grad_psi2(x, Y)
        if abs(float(py)) > 1e-10:
            raise NumericalError(f"critical-layer solve stalled at x={x}")
        Yc[i] = Y
    upstream = fld.h - fld.c / fld.omega
    # sign pattern check above/below the curve
    dy = 1e-3
    for x, Y in ((x_samples[0], Yc[0]), (x_samples[-1], Yc[-1])):
        _, above = fld.grad_psi2(x, min(Y + dy, 1.0 - 1e-9))
        _, below = fld.grad_psi2(x, Y - dy)
        if not (float(above) > 0.0 > float(below)):
            raise NumericalError("psi2_Y sign pattern violated at the "
                                 "critical layer")
    level = fld.c ** 2 / (2.0 * fld.omega)
    return CriticalLayer(x_samples, Yc, float(upstream), float(level),
                         convex=-fld.omega > 0)


@dataclass
class EyeRegion:
    level: float
    lower: float                # downstream height of the lower bounding streamline
    upper: float
    Yc_downstream: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)


def eye_bounds(fld: WaveField) -> EyeRegion:
    """Downstream heights where psi2 equals the critical streamline value."""
    layer = critical_layer(fld, np.array([fld.window]))
    level = layer.level
    x_inf = fld.window
    Yc = float(layer.Yc[0])

    def f(Y):
        return float(fld.psi2(np.array([x_inf]), Y)[0]) - level

    v_inf = float(fld.eta(np.array([x_inf]))[0])
    y_int = fld.h + v_inf
    # psi2 is convex in Y (psi2_YY = -omega > 0) with its minimum on the
    # critical layer; the eye opens when that minimum dips below the level
    if f(Yc) >= 0.0:
        raise NumericalError("eye absent: downstream stream function does "
                             "not cross the critical value")
    lo = brentq(f, y_int + 1e-12, Yc, xtol=1e-14)
    hi = brentq(f, Yc, 1.0 - 1e-12, xtol=1e-14)
    return EyeRegion(level, float(lo), float(hi), Yc)


def eye_halfwidth_closed_form(fld: WaveField) -> float:
    """Leading-order eye half-width from the explicit radicand."""
    h0, c0, om = float(fld.branch.h0), float(fld.branch.c0), fld.omega
    rad = 2.0 * c0 * (c0 + om * (1.0 - h0)) * fld.a1 * fld.eps / (1.0 - h0)
    if rad <= 0:
        raise NumericalError("eye absent: nonpositive radicand")
    return abs(np.sqrt(rad) / om)


# ---------------------------------------------------------------------------
# streamlines


@dataclass
class Streamline:
    points: np.ndarray           # (N, 2) samples of (x, Y)
    level: float
    label: str                   # "eye" | "through"
    turning_point: tuple = None
    flags: list = field(default_factory=list)


def _grad_at(fld: WaveField, z, upper):
    g = fld.grad_psi2 if upper else fld.grad_psi1
    px, py = g(np.array([z[0]]), z[1])
    return float(np.ravel(px)[0]), float(np.ravel(py)[0])


def _value_at(fld: WaveField, z, upper):
    v = (fld.psi2 if upper else fld.psi1)(np.array([z[0]]), z[1])
    return float(np.ravel(v)[0])


def _correct(fld, z, level, upper, tol):
    """Newton transverse to the tangent; returns (point, converged)."""
    z = z.copy()
    r = _value_at(fld, z, upper) - level
    for _ in range(8):
        if abs(r) <= tol:
            return z, True
        px, py = _grad_at(fld, z, upper)
        n2 = px * px + py * py
        if n2 < 1e-28:
            return z, False
        z = z - r * np.array([px, py]) / n2
        r = _value_at(fld, z, upper) - level
    return z, abs(r) <= tol


def _trace_direction(fld: WaveField, seed, level, sign, step, window,
                     max_steps, upper):
    pts = [np.asarray(seed, dtype=float)]
    z = pts[0].copy()
    tol = 1e-12 * max(1.0, abs(level))
    for _ in range(max_steps):
        px, py = _grad_at(fld, z, upper)
        norm = float(np.hypot(px, py))
        if norm < 1e-14:
            break
        t = np.array([py, -px]) / norm          # tangent of the level set
        # vertical resolution TRACE_STEP; cap horizontal strides, and halve
        # the stride until the corrector converges without a large jump
        dl = step / max(abs(t[1]), step / (0.02 * window))
        accepted = False
        while dl >= 1e-3 * step:
            z_try = z + sign * dl * t
            z_new, ok = _correct(fld, z_try, level, upper, tol)
            if ok and np.linalg.norm(z_new - z_try) <= 0.5 * dl + 10 * step:
                accepted = True
                break
            dl *= 0.5
        if not accepted:
            return np.array(pts), "stalled", 0.0
        z = z_new
        pts.append(z.copy())
        if abs(z[0]) > window:
            return np.array(pts), "exit", np.sign(z[0])
        if not 0.0 < z[1] < 1.0:
            return np.array(pts), "wall", 0.0
    return np.array(pts), "stalled", 0.0


def streamline(fld: WaveField, seed, step=TRACE_STEP, window=None,
               max_steps=400000) -> Streamline:
    """Arc-length level-set trace through `seed`, classified.

    "eye": both ends exit downstream and the trace turns; the turning
    point must sit on the critical layer (within TURNING_POINT_TOL).
    "through": the trace spans the window in both directions.
    """
    window = fld.window if window is None else window
    x0, Y0 = float(seed[0]), float(seed[1])
    eta0 = float(fld.eta(np.array([x0]))[0])
    upper = Y0 > fld.h + eta0
    level = _value_at(fld, (x0, Y0), upper)
    fwd, fstat, fside = _trace_direction(fld, (x0, Y0), level, +1.0, step,
                                         window, max_steps, upper)
    bwd, bstat, bside = _trace_direction(fld, (x0, Y0), level, -1.0, step,
                                         window, max_steps, upper)
    pts = np.vstack([bwd[::-1], fwd[1:]])
    flags = []
    if fstat != "exit" or bstat != "exit":
        flags.append(f"truncated:{fstat}/{bstat}")
        return Streamline(pts, level, "truncated", flags=flags)
    if fside > 0 and bside > 0:
        # both ends leave to the right: the trace has a turning point
        k = int(np.argmin(pts[:, 0]))
        tp = (float(pts[k, 0]), float(pts[k, 1]))
        layer = critical_layer(fld, np.array([tp[0]]))
        if abs(tp[1] - float(layer.Yc[0])) > TURNING_POINT_TOL:
            flags.append("turning point off the critical layer")
        return Streamline(pts, level, "eye", turning_point=tp, flags=flags)
    if fside * bside < 0:
        return Streamline(pts, level, "through", flags=flags)
    flags.append("both ends exit upstream")
    return Streamline(pts, level, "truncated", flags=flags)


def interface_curve(fld: WaveField, n=601) -> np.ndarray:
    x = np.linspace(-fld.window, fld.window, n)
    return np.column_stack([x, fld.h + fld.eta(x)])


# ---------------------------------------------------------------------------
# checks and residuals


def monotonicity_check(fld: WaveField, x_grid=None, nx=201, ny=41) -> dict:
    """Sign report for eta_x and the interior horizontal derivative psi_x.

    The default grid spans the representable part of the front (where the
    tanh tail has not underflowed); strictness is then meaningful at every
    sample.  Valid in the regime omega < 0, c0 > 0 of the streamline
    theorem, with the pattern reflected when a1*eps changes sign.
    """
    if fld.eps == 0.0:
        return {"trivial": True, "eta_x_min": 0.0, "eta_x_max": 0.0,
                "passes": True}
    if x_grid is None:
        x_active = min(fld.window, 16.0 / (fld.lam1 * abs(fld.eps)))
        x_grid = np.linspace(-x_active, x_active, nx)
    x = np.asarray(x_grid, dtype=float)
    etax = fld.eta_x(x)
    eta = fld.eta(x)
    psix_vals = []
    for xi, ei in zip(x, eta):
        for Y in np.linspace(1e-3, fld.h + ei - 1e-3, ny // 2):
            psix_vals.append(float(fld.grad_psi1(np.array([xi]), Y)[0][0]))
        for Y in np.linspace(fld.h + ei + 1e-3, 1.0 - 1e-3, ny // 2):
            psix_vals.append(float(fld.grad_psi2(np.array([xi]), Y)[0][0]))
    psix = np.asarray(psix_vals)
    sign = -1.0 if fld.a1 * fld.eps < 0 else 1.0
    passes = bool(np.all(sign * etax > 0) and np.all(sign * psix > 0))
    return {"trivial": False,
            "eta_x_min": float(etax.min()), "eta_x_max": float(etax.max()),
            "psi_x_min": float(psix.min()), "psi_x_max": float(psix.max()),
            "expected_sign": sign, "passes": passes}


def residual(fld: WaveField, nx=201, ny=101) -> dict:
    """Sup-norms of the interior, kinematic, and dynamic defects."""
    x = np.linspace(-fld.window, fld.window, nx)
    eta = fld.eta(x)
    lap1 = lap2 = 0.0
    for xi, ei in zip(x, eta):
        Y1 = np.linspace(0.0, fld.h + ei, ny // 2)
        Y2 = np.linspace(fld.h + ei, 1.0, ny // 2)
        lap1 = max(lap1, float(np.max(np.abs(fld.lap_defect1(np.array([xi]), Y1)))))
        lap2 = max(lap2, float(np.max(np.abs(fld.lap_defect2(np.array([xi]), Y2)))))
    y_int = fld.h + eta
    kin1 = float(np.max(np.abs(fld.psi1(x, y_int))))
    kin2 = float(np.max(np.abs(fld.psi2(x, y_int))))
    wall_bot = float(np.max(np.abs(fld.psi1(x, 0.0) - fld.m1)))
    wall_top = float(np.max(np.abs(fld.psi2(x, 1.0) + fld.m2)))
    p1x, p1y = fld.grad_psi1(x, y_int)
    p2x, p2y = fld.grad_psi2(x, y_int)
    dyn = (0.5 * fld.rho * (p2x ** 2 + p2y ** 2)
           - 0.5 * (p1x ** 2 + p1y ** 2)
           + (fld.rho - 1.0) * eta - fld.bernoulli())
    return {"laplace_lower": lap1, "laplace_upper": lap2,
            "kinematic_lower": kin1, "kinematic_upper": kin2,
            "kinematic_interface": max(kin1, kin2),
            "wall_bottom": wall_bot, "wall_top": wall_top,
            "dynamic": float(np.max(np.abs(dyn)))}


def flow_force_slice(fld: WaveField, x) -> float:
    """Flow force at one axial station by quadrature over the slice."""
    x = float(x)
    ei = float(fld.eta(np.array([x]))[0])
    y_int = fld.h + ei
    c2h = 0.5 * fld.c ** 2 + fld.h

    def f1(Y):
        px, py = fld.grad_psi1(np.array([x]), Y)
        return 0.5 * (float(px[0]) ** 2 + float(py[0]) ** 2) - Y + c2h

    def f2(Y):
        px, py = fld.grad_psi2(np.array([x]), Y)
        p2 = float(fld.psi2(np.array([x]), Y)[0])
        return (0.5 * (float(px[0]) ** 2 + float(py[0]) ** 2) - Y
                - fld.omega * p2 + c2h)

    s1, _ = quad(f1, 0.0, y_int, epsabs=1e-13, epsrel=1e-13, limit=200)
    s2, _ = quad(f2, y_int, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    return s1 + fld.rho * s2


# ---------------------------------------------------------------------------
# exporters


def field_to_csv(fld: WaveField, path, nx=201, ny=81) -> None:
    x = np.linspace(-fld.window, fld.window, nx)
    Y = np.linspace(0.0, 1.0, ny)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "Y", "psi", "eta"])
        for xi in x:
            ei = float(fld.eta(np.array([xi]))[0])
            for Yj in Y:
                writer.writerow([f"{xi:.17g}", f"{Yj:.17g}",
                                 f"{float(fld.psi(np.array([xi]), Yj)[0]):.17g}",
                                 f"{ei:.17g}"])


def streamlines_to_csv(path, streamlines) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "label", "x", "Y"])
        for k, sl in enumerate(streamlines):
            for (x, Y) in sl.points:
                writer.writerow([k, sl.label, f"{x:.17g}", f"{Y:.17g}"])


def portrait_svg(fld: WaveField, path, streamlines=None, n_layer=401):
    """Interface, critical layer, and streamlines in one figure."""
    from .svg import polylines_to_svg
    curves = [(interface_curve(fld), {"stroke": "#000", "width": 2.5})]
    try:
        layer = critical_layer(fld, np.linspace(-fld.window, fld.window, n_layer))
        curves.append((np.column_stack([layer.x, layer.Yc]),
                       {"stroke": "#444", "width": 1.0, "dasharray": "6,4"}))
    except NumericalError:
        pass
    for sl in streamlines or []:
        color = {"eye": "#b40", "through": "#07a"}.get(sl.label, "#888")
        curves.append((sl.points[::5], {"stroke": color, "width": 0.8}))
    return polylines_to_svg(path, curves, (-fld.window, fld.window), (0.0, 1.0))
