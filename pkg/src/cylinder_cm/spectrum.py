"""Transversal eigenproblems on an interval.

The transversal operator of the cylinder problem restricted to one space
dimension collapses to Sturm-Liouville form,

    L'w = (a(y) w')' + (c(y) + b'(y)) w,

with a co-normal (Robin), Neumann, or Dirichlet condition at each endpoint.
Robin(g) means  a(y) dw/dnu + g w = 0  with dw/dnu the outward derivative.

Discretization is second-order centered finite differences on a uniform
grid with a conservative half-cell closure at Robin/Neumann endpoints
(equivalent to the ghost-point closure for these schemes).  The resulting
matrix is self-adjoint in the trapezoid inner product, so eigenpairs come
from a dense symmetric tridiagonal solve.  Reported eigenvalues can be
Richardson-extrapolated over nested grids (the coarse grid is obtained by
subsampling, so no re-interpolation of coefficients is needed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import NumericalError

DEFAULT_EIGEN_RESIDUAL_TOL = 1e-10   # relative to ||A||_inf
DEFAULT_ROOT_BRACKET_TOL = 1e-12
CRITICAL_EIGENVALUE_TOL = 1e-10
SIMPLICITY_TOL = 1e-6


@dataclass(frozen=True)
class BC:
    kind: str            # "dirichlet" | "neumann" | "robin"
    g: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")


DIRICHLET = BC("dirichlet")
NEUMANN = BC("neumann")


def robin(g: float) -> BC:
    return BC("robin", float(g))


def _as_profile(f, y: np.ndarray) -> np.ndarray:
    if callable(f):
        return np.asarray(f(y), dtype=float) * np.ones_like(y)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full_like(y, float(arr))
    if arr.shape != y.shape:
        raise ValueError("coefficient profile does not match the grid")
    return arr


@dataclass
class BaseOperator:
    """Coefficients, grid, and boundary conditions of L' on [y_lo, y_hi].

    Treat instances as immutable; the spectral factorization is cached.
    """

    y: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    bc_lo: BC
    bc_hi: BC
    eval_point: float = 0.0
    _fact: dict = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, y_lo, y_hi, n, a=1.0, b=0.0, c=0.0,
              bc_lo=DIRICHLET, bc_hi=DIRICHLET, eval_point=0.0):
        if not y_lo < y_hi:
            raise ValueError("need y_lo < y_hi")
        if n < 16:
            raise ValueError("grid size n must be at least 16")
        y = np.linspace(float(y_lo), float(y_hi), n + 1)
        a_arr = _as_profile(a, y)
        if np.min(a_arr) <= 0.0:
            raise ValueError("ellipticity violated: a(y) must be positive on the grid")
        return cls(y, a_arr, _as_profile(b, y), _as_profile(c, y), bc_lo, bc_hi,
                   float(eval_point))

    # -- grid helpers ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.y) - 1

    @property
    def h(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def active(self) -> slice:
        i0 = 1 if self.bc_lo.kind == "dirichlet" else 0
        i1 = self.n if self.bc_hi.kind == "dirichlet" else self.n + 1
        return slice(i0, i1)

    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights on the full grid (also the mass matrix)."""
        w = np.full(self.n + 1, self.h)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.quad_weights() * u * v))

    def index_of(self, ystar: float) -> int:
        i = int(round((ystar - self.y[0]) / self.h))
        if not (0 <= i <= self.n) or abs(self.y[i] - ystar) > 1e-8 * max(1.0, self.h):
            raise ValueError(f"evaluation point {ystar} is not a grid node")
        return i

    def coarsen(self) -> "BaseOperator":
        """Operator on the subsampled (every other node) grid."""
        if self.n % 2:
            raise ValueError("coarsening requires an even number of cells")
        return BaseOperator(self.y[::2].copy(), self.a[::2].copy(),
                            self.b[::2].copy(), self.c[::2].copy(),
                            self.bc_lo, self.bc_hi, self.eval_point)

    # -- discretization ----------------------------------------------------

    def _assemble(self):
        """Rows of A (M-self-adjoint) on active nodes, plus the weights."""
        n, h, y = self.n, self.h, self.y
        a, b, c = self.a, self.b, self.c
        # b enters the 1-D operator only through the effective potential c + b'
        bprime = np.gradient(b, y, edge_order=2)
        q = c + bprime
        amid = 0.5 * (a[:-1] + a[1:])          # a at half nodes
        lo, hi = self.bc_lo, self.bc_hi

        diag = np.zeros(n + 1)
        sub = np.zeros(n)                       # sub[i] = A[i+1, i]
        sup = np.zeros(n)                       # sup[i] = A[i, i+1]
        diag[1:n] = -(amid[:-1] + amid[1:]) / h**2 + q[1:n]
        sup[1:n] = amid[1:n] / h**2
        sub[0:n - 1] = amid[0:n - 1] / h**2

        weights = np.full(n + 1, h)
        # bottom closure
        if lo.kind != "dirichlet":
            g = lo.g if lo.kind == "robin" else 0.0
            diag[0] = (-amid[0] / h - g) * (2.0 / h) + q[0]
            sup[0] = amid[0] * 2.0 / h**2
            weights[0] = h / 2
        # top closure
        if hi.kind != "dirichlet":
            g = hi.g if hi.kind == "robin" else 0.0
            diag[n] = (-amid[-1] / h - g) * (2.0 / h) + q[n]
            sub[n - 1] = amid[-1] * 2.0 / h**2
            weights[n] = h / 2

        act = self.active
        i0, i1 = act.start, act.stop
        return diag[i0:i1], sub[i0:i1 - 1], sup[i0:i1 - 1], weights, act

    def factorization(self) -> dict:
        """Full spectrum of the discrete operator, cached.

        Returns eigenvalues in decreasing order and eigenvectors (columns,
        on the full grid with Dirichlet zeros) orthonormal in the trapezoid
        inner product.
        """
        if self._fact is not None:
            return self._fact
        diag, sub, sup, weights, act = self._assemble()
        m = weights[act]
        sm = np.sqrt(m)
        # symmetrize: B = M^(1/2) A M^(-1/2); off-diagonals of A satisfy
        # m_i A[i,i+1] = m_{i+1} A[i+1,i], so B is symmetric tridiagonal.
        d = diag
        e = sup * sm[:-1] / sm[1:]
        vals, vecs = eigh_tridiagonal(d, e)
        order = np.argsort(vals)[::-1]
        vals = vals[order]
        vecs = vecs[:, order] / sm[:, None]      # M-orthonormal
        full = np.zeros((self.n + 1, len(vals)))
        full[act] = vecs
        anorm = np.max(np.abs(d)) + 2 * np.max(np.abs(e), initial=0.0)
        self._fact = {"nu": vals, "phi": full, "weights": weights,
                      "anorm": float(anorm), "active": act}
        return self._fact

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Apply the discrete L' to a full-grid profile (zero outside active)."""
        diag, sub, sup, weights, act = self._assemble()
        u = np.asarray(w, dtype=float)[act]
        out = diag * u
        out[1:] += sub * u[:-1]
        out[:-1] += sup * u[1:]
        res = np.zeros(self.n + 1)
        res[act] = out
        return res


@dataclass
class EigenPair:
    nu: float
    phi: np.ndarray
    residual: float


def eigen_lowest(op: BaseOperator, count: int) -> list[EigenPair]:
    """The `count` largest eigenvalues with L2-normalized eigenfunctions.

    Eigenvalues are strictly decreasing; phi_0 is sign-fixed positive at the
    operator's evaluation point.  The residual check is relative to ||A||.
    Only the requested subset of the tridiagonal spectrum is computed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    diag, sub, sup, weights, act = op._assemble()
    m = weights[act]
    sm = np.sqrt(m)
    e = sup * sm[:-1] / sm[1:]
    N = len(diag)
    if count > N:
        raise ValueError("count exceeds the number of discrete modes")
    try:
        vals, vecs = eigh_tridiagonal(diag, e, select="i",
                                      select_range=(N - count, N - 1))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order] / sm[:, None]
    anorm = float(np.max(np.abs(diag)) + 2 * np.max(np.abs(e), initial=0.0))
    pairs = []
    istar = op.index_of(op.eval_point) if _is_node(op) else None
    for k in range(count):
        v = np.zeros(op.n + 1)
        v[act] = vecs[:, k]
        if k == 0:
            ref = v[istar] if istar is not None else v[np.argmax(np.abs(v))]
            if ref < 0:
                v = -v
        Av = op.apply(v)
        # Rayleigh refinement: quadratically accurate in the eigenvector
        # error, which lifts the eigenvalue above LAPACK's eps*||A|| floor
        nu = float(np.sum(weights * Av * v) / np.sum(weights * v * v))
        r = Av - nu * v
        rel = float(np.max(np.abs(r[act]))) / (anorm * np.max(np.abs(v)))
        if rel > DEFAULT_EIGEN_RESIDUAL_TOL:
            raise NumericalError(
                f"eigensolver residual {rel:.3e} exceeds tolerance for mode {k}")
        pairs.append(EigenPair(nu, v, rel))
    gaps = np.diff([p.nu for p in pairs])
    if len(gaps) and np.max(gaps) >= 0:
        raise NumericalError("eigenvalues are not strictly decreasing")
    return pairs


def _is_node(op: BaseOperator) -> bool:
    try:
        op.index_of(op.eval_point)
        return True
    except ValueError:
        return False


def eigenvalues_extrapolated(op: BaseOperator, count: int) -> np.ndarray:
    """Richardson-extrapolated eigenvalues from the (n/2, n) grid pair."""
    fine = [p.nu for p in eigen_lowest(op, count)]
    coarse = [p.nu for p in eigen_lowest(op.coarsen(), count)]
    return (4.0 * np.asarray(fine) - np.asarray(coarse)) / 3.0


def kernel_profile(op: BaseOperator) -> tuple[np.ndarray, np.ndarray]:
    """(phi0 L2-normalized, phi0 rescaled to 1 at the evaluation point)."""
    phi0 = eigen_lowest(op, 1)[0].phi
    val = phi0[op.index_of(op.eval_point)]
    if abs(val) < 1e-12:
        raise NumericalError("phi0 vanishes at the evaluation point")
    return phi0, phi0 / val


def rayleigh(op: BaseOperator, w: np.ndarray, extrapolate: bool = False) -> float:
    """Discrete Rayleigh quotient <L'w, w> / <w, w>.

    Boundary terms of the co-normal conditions are built into the discrete
    operator, so this matches the integral form up to quadrature error.
    With extrapolate=True the quotient is Richardson-extrapolated using the
    subsampled grid.
    """
    w = np.asarray(w, dtype=float)
    denom = op.inner(w, w)
    if denom <= 0.0:
        raise ValueError("Rayleigh quotient rejected: zero denominator")
    val = op.inner(op.apply(w), w) / denom
    if not extrapolate:
        return float(val)
    coarse = rayleigh(op.coarsen(), w[::2], extrapolate=False)
    return float((4.0 * val - coarse) / 3.0)


def critical_parameter(family: Callable[[float], BaseOperator],
                       bracket: tuple[float, float],
                       xtol: float = DEFAULT_ROOT_BRACKET_TOL) -> float:
    """Parameter value where nu_0 crosses zero (Brent on the eigenvalue).

    nu_0 is Richardson-extrapolated inside the root-find so the returned
    parameter inherits fourth-order grid accuracy.
    """
    def nu0(p):
        return float(eigenvalues_extrapolated(family(p), 1)[0])

    lo, hi = bracket
    f_lo, f_hi = nu0(lo), nu0(hi)
    if f_lo * f_hi > 0:
        raise NumericalError(
            f"no critical value: nu0 has no sign change on [{lo}, {hi}] "
            f"(nu0={f_lo:.3e} and {f_hi:.3e})")
    pstar = brentq(nu0, lo, hi, xtol=xtol, rtol=8.9e-16)
    nus = eigenvalues_extrapolated(family(pstar), 2)
    if abs(nus[0]) > CRITICAL_EIGENVALUE_TOL:
        raise NumericalError(f"critical eigenvalue residual {nus[0]:.3e} too large")
    if nus[1] > -SIMPLICITY_TOL:
        raise NumericalError(
            f"simplicity violated: nu1 = {nus[1]:.3e} is not safely negative")
    return float(pstar)


def eigenpairs_to_csv(path, op: BaseOperator, pairs: Sequence[EigenPair]) -> None:
    """Columns y, phi0, phi1, ...; header row carries the eigenvalues."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"phi{k}(nu={p.nu:.17g})" for k, p in enumerate(pairs)])
        for i, yi in enumerate(op.y):
            writer.writerow([f"{yi:.17g}"] + [f"{p.phi[i]:.17g}" for p in pairs])
