"""L-geodesics, the L-exponential map and L-length.

Geodesics are integrated in ``s = sqrt(tau)`` with ``Z = d gamma / ds``.  In
that parameter the geodesic equation

    nabla_X X - 1/2 grad R + X / (2 tau) + 2 Ric(X) = 0,    X = d gamma / d tau

becomes the regular system ``D_s Z = 2 s^2 grad R - 4 s Ric(Z)`` with
``Z(0) = 2 v``, and the length ``int sqrt(tau) (R + |X|^2) dtau`` becomes
``int (2 s^2 R + |Z|^2 / 2) ds``.

A g(0)-orthonormal frame at the base point is transported along with the
geodesic; the index form and the Jacobi matrix are expressed in it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import _ode
from .flowbg import (ChartPoint, FlowBackground, as_point, check_tau, recenter_chart,
                     _validate_point)

DEFAULT_TOL = 1e-10


def initial_frame(bg: FlowBackground, x, tau: float = 0.0) -> np.ndarray:
    """Columns form a g(tau)-orthonormal basis at ``x``."""
    g = np.diag(bg.metric_diag(np.asarray(x, float), tau))
    L = np.linalg.cholesky(g)
    return np.linalg.inv(L).T


@dataclass(frozen=True, eq=False)
class LValue:
    value: float
    quadrature_error_estimate: float


@dataclass(frozen=True, eq=False)
class FrameCoefficients:
    """Frame-component coefficients of the index form at a batch of ``s``.

    With ``U = u^a E_a`` and ``V = v^a E_a``::

        I(U, V) = int  u'^T G v'  +  u^T Q v  ds
    """

    G: np.ndarray       # <E_a, E_b>
    curv: np.ndarray    # <R(E_a, Z) E_b, Z>
    hess: np.ndarray    # Hess R(E_a, E_b)
    ric: np.ndarray     # Ric(E_a, E_b)
    M: np.ndarray       # (nabla_{E_a} Ric)(Z, E_b)
    N: np.ndarray       # (nabla_Z Ric)(E_a, E_b)
    Q: np.ndarray


_COEFF_FIELDS = tuple(FrameCoefficients.__dataclass_fields__)


@dataclass(frozen=True, eq=False)
class LGeodesicPath:
    """An integrated L-geodesic with dense output on ``[0, s_max]``.

    The underlying state rows are ``Z`` followed by the parallel frame
    ``E_1 .. E_n``.  ``v`` and ``p`` are stored as given by the caller; the
    integration may start in the other chart if ``p`` needed recentering.
    """

    bg: FlowBackground
    p: ChartPoint
    v: np.ndarray
    tau_bar: float
    tol: float
    method: str
    solution: _ode.PiecewiseSolution
    integrator_stats: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def s_max(self) -> float:
        return float(np.sqrt(self.tau_bar))

    @property
    def n(self) -> int:
        return self.bg.n

    def state(self, s):
        """Return ``(x, Z, E, chart)``; ``E[..., :, a]`` is the frame vector ``E_a``."""
        Y, chart = self.solution(s)
        n = self.n
        x = Y[..., :n]
        V = Y[..., n:].reshape(Y.shape[:-1] + (-1, n))
        return x, V[..., 0, :], np.swapaxes(V[..., 1:1 + n, :], -1, -2), chart

    def point(self, s) -> ChartPoint:
        x, _, _, chart = self.state(float(s))
        return ChartPoint(x, chart)

    def velocity(self, s):
        """``Z = d gamma / ds`` in the chart reported by :meth:`state`."""
        return self.state(s)[1]

    def X(self, s):
        """``X = d gamma / d tau = Z / (2 s)``, for ``s > 0``."""
        s = np.asarray(s, float)
        return self.state(s)[1] / (2.0 * s[..., None])

    @property
    def endpoint(self) -> ChartPoint:
        return self.point(self.s_max)

    def gram(self, s):
        x, _, E, _ = self.state(s)
        gd = self.bg.metric_diag(x, np.asarray(s) ** 2)
        return np.einsum("...ia,...i,...ib->...ab", E, gd, E)

    def coefficients(self, s) -> FrameCoefficients:
        s = np.asarray(s, float)
        if s.ndim == 0:
            return self._coefficients_scalar(float(s))
        return self._coefficients(s)

    def _coefficients_scalar(self, s: float) -> FrameCoefficients:
        # quad revisits the same nodes for every field pair on a path
        hit = self._cache.get(s)
        if hit is None:
            c = self._coefficients(np.array([s]))
            hit = FrameCoefficients(*(getattr(c, f)[0] for f in _COEFF_FIELDS))
            if len(self._cache) < 200_000:
                self._cache[s] = hit
        return hit

    def _coefficients(self, s) -> FrameCoefficients:
        bg = self.bg
        x, Z, E, _ = self.state(s)
        tau = s ** 2
        gd = bg.metric_diag(x, tau)
        Ea = np.swapaxes(E, -1, -2)                      # (..., a, i)
        xa, taua = x[..., None, :], tau[..., None]
        Za = Z[..., None, :]

        G = np.einsum("...ai,...i,...bi->...ab", Ea, gd, Ea)
        RaZb = bg.riemann_apply(x[..., None, None, :], Ea[..., :, None, :],
                                Z[..., None, None, :], Ea[..., None, :, :])
        curv = np.einsum("...abi,...i,...i->...ab", RaZb, gd, Z)
        hess_a = bg.hess_R_apply(xa, taua, Ea)
        ric_a = bg.ricci_apply(xa, taua, Ea)
        hess = np.einsum("...ai,...i,...bi->...ab", hess_a, gd, Ea)
        ric = np.einsum("...ai,...i,...bi->...ab", ric_a, gd, Ea)
        covUZ = bg.cov_ricci_apply(xa, taua, Ea, Za)      # (nabla_{E_a} Ric)(Z) raised
        M = np.einsum("...ai,...i,...bi->...ab", covUZ, gd, Ea)
        covZE = bg.cov_ricci_apply(xa, taua, Za, Ea)      # (nabla_Z Ric)(E_a) raised
        N = np.einsum("...ai,...i,...bi->...ab", covZE, gd, Ea)
        sb = s[..., None, None]
        Q = curv + 2.0 * sb ** 2 * hess - 2.0 * sb * (M + np.swapaxes(M, -1, -2)) + 2.0 * sb * N
        return FrameCoefficients(G=G, curv=curv, hess=hess, ric=ric, M=M, N=N, Q=Q)

    def sample(self, num: int):
        """Uniform s-grid with points, velocities and charts (for export)."""
        s = np.linspace(0.0, self.s_max, num)
        x, Z, _, chart = self.state(s)
        return s, x, Z, chart

    def to_csv(self, path, num: int = 201) -> None:
        s, x, Z, chart = self.sample(num)
        n = self.n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "tau", "chart"] + [f"x{i}" for i in range(n)]
                       + [f"Z{i}" for i in range(n)])
            for i in range(num):
                w.writerow([repr(float(s[i])), repr(float(s[i] ** 2)), int(chart[i])]
                           + [repr(float(c)) for c in x[i]] + [repr(float(c)) for c in Z[i]])

    def summary(self) -> dict:
        L = llength(self)
        end = self.endpoint
        return {"endpoint": end.coords.tolist(), "chart": end.chart, "L": L.value,
                "error_estimate": L.quadrature_error_estimate,
                "tau_bar": self.tau_bar, "steps": self.integrator_stats.get("steps")}

    def write_summary(self, path) -> dict:
        data = self.summary()
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return data


def _start(bg: FlowBackground, p, v):
    p = as_point(p)
    _validate_point(bg, p)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (bg.n,) or not np.all(np.isfinite(v)):
        raise ValueError(f"initial vector must be a finite {bg.n}-vector")
    if bg.has_charts:
        q, jac = recenter_chart(bg, p)
        return p, v, q, jac @ v
    return p, v, p, v


def shoot(bg: FlowBackground, p, v, tau_bar: float, tol: float = DEFAULT_TOL,
          method: str = "DOP853") -> LGeodesicPath:
    """Integrate the L-geodesic with ``gamma(0) = p``, ``sqrt(tau) X -> v``."""
    check_tau(tau_bar)
    if not tau_bar > 0:
        raise ValueError("tau_bar must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    p, v, q, w = _start(bg, p, v)
    E0 = initial_frame(bg, q.coords)
    y0 = np.concatenate([q.coords, 2.0 * w, E0.T.ravel()])
    rhs = _ode.s_form_rhs(bg, bg.n, 0)
    sol = _ode.integrate(bg, rhs, y0, q.chart, 0.0, float(np.sqrt(tau_bar)),
                         tol=tol, method=method)
    stats = {"steps": sol.nsteps, "segments": len(sol.segments), "tol": tol,
             "method": method}
    return LGeodesicPath(bg, p, v, float(tau_bar), tol, method, sol, stats)


def lexp(bg: FlowBackground, p, v, tau_bar: float, tol: float = DEFAULT_TOL,
         method: str = "DOP853") -> ChartPoint:
    """The L-exponential map ``v -> gamma_v(tau_bar)``."""
    return shoot(bg, p, v, tau_bar, tol, method).endpoint


def llength(path: LGeodesicPath, s_range=None, epsrel: float = 1e-12) -> LValue:
    """L-length of the (sub)path via the regular s-form integrand."""
    bg = path.bg
    a, b = (0.0, path.s_max) if s_range is None else map(float, s_range)
    if b <= a:
        return LValue(0.0, 0.0)

    def integrand(s):
        x, Z, _, _ = path.state(s)
        return 2.0 * s * s * float(bg.scalar_curvature(x, s * s)) + 0.5 * float(bg.inner(x, s * s, Z, Z))

    cuts = [t for t in path.solution.breaks if a < t < b]
    total, err = 0.0, 0.0
    for lo, hi in zip([a] + cuts, cuts + [b]):
        val, e = quad(integrand, lo, hi, epsabs=1e-14, epsrel=epsrel, limit=400)
        total += val
        err += e
    return LValue(total, err)


def shoot_tau_form(bg: FlowBackground, p, v, tau_bar: float, tau_eps: float = 1e-6,
                   tol: float = 1e-12, u0=None, w0=None):
    """Integrate the unregularized tau-form from ``tau_eps``.

    The state at ``tau_eps`` is matched to the regularized solution there.
    When ``u0, w0`` are given (frame components at ``p``), the Jacobi field
    with those data is carried along in the tau-form as well.  Returns the
    dense tau-solution; rows are ``X`` then ``U`` and ``nabla_X U``.
    """
    check_tau(tau_bar)
    if not 0 < tau_eps < tau_bar:
        raise ValueError("need 0 < tau_eps < tau_bar")
    s_eps = float(np.sqrt(tau_eps))
    p, v, q, w = _start(bg, p, v)
    E0 = initial_frame(bg, q.coords)
    jac = u0 is not None
    rows = [2.0 * w]
    if jac:
        rows += [E0 @ np.asarray(u0, float), E0 @ np.asarray(w0, float)]
    y0 = np.concatenate([q.coords] + rows)
    head = _ode.integrate(bg, _ode.s_form_rhs(bg, 0, int(jac)), y0, q.chart, 0.0, s_eps,
                          tol=tol)
    y, chart = head(s_eps)
    n = bg.n
    V = y[n:].reshape(-1, n).copy()
    V[0] /= 2.0 * s_eps                 # X = Z / (2 s)
    if jac:
        V[2] /= 2.0 * s_eps             # nabla_X U = D_s U / (2 s)
    return _ode.integrate(bg, _ode.tau_form_rhs(bg, int(jac)),
                          np.concatenate([y[:n], V.ravel()]), chart,
                          float(tau_eps), float(tau_bar), tol=tol)
