"""Adaptive Runge-Kutta integration with stereographic chart switching.

The state vector is ``[x (n), V (m x n, row-major)]``: a point followed by
``m`` tangent vectors at that point.  When the sphere block of ``x`` leaves
the ball of radius ``RECENTER_THRESHOLD`` the integration stops, the point
and every row of ``V`` are pushed through the chart transition, and the
integration restarts in the opposite chart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ChartEscape, ToleranceNotMet
from .flowbg import RECENTER_THRESHOLD, FlowBackground, transition_arrays

MAX_SEGMENTS = 200_000


@dataclass(frozen=True)
class Segment:
    t0: float
    t1: float
    chart: int
    sol: object  # scipy OdeSolution
    ts: np.ndarray


class PiecewiseSolution:
    """Dense output assembled from chart-wise ``solve_ivp`` runs."""

    def __init__(self, segments, dim):
        self.segments = list(segments)
        self.dim = dim
        self.t0 = self.segments[0].t0
        self.t1 = self.segments[-1].t1
        self._edges = np.array([seg.t1 for seg in self.segments[:-1]])

    @property
    def breaks(self) -> np.ndarray:
        return self._edges.copy()

    @property
    def step_points(self) -> np.ndarray:
        return np.unique(np.concatenate([seg.ts for seg in self.segments]))

    @property
    def nsteps(self) -> int:
        return int(sum(len(seg.ts) - 1 for seg in self.segments))

    def segment_index(self, t):
        return np.searchsorted(self._edges, t, side="left")

    def __call__(self, t):
        """Return ``(Y, charts)``; ``Y`` has shape ``t.shape + (dim,)``."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        idx = self.segment_index(tt)
        Y = np.empty(tt.shape + (self.dim,))
        charts = np.empty(tt.shape, dtype=int)
        for i in np.unique(idx):
            mask = idx == i
            seg = self.segments[i]
            Y[mask] = np.asarray(seg.sol(tt[mask])).T
            charts[mask] = seg.chart
        if scalar:
            return Y[0], int(charts[0])
        return Y, charts


def transform_state(bg: FlowBackground, y: np.ndarray) -> np.ndarray:
    n = bg.n
    xn, jac = transition_arrays(bg, y[:n])
    V = y[n:].reshape(-1, n)
    return np.concatenate([xn, (V @ jac.T).ravel()])


def integrate(bg: FlowBackground, rhs, y0, chart0: int, t0: float, t1: float, *,
              tol: float, method: str = "DOP853", atol: float | None = None
              ) -> PiecewiseSolution:
    """Integrate ``rhs`` from ``t0`` to ``t1`` switching charts as needed."""
    n, k = bg.n, bg.sphere_dim
    y = np.asarray(y0, dtype=float).copy()
    chart = chart0
    events = None
    if k:
        def leave(t, yy):
            return yy[:k] @ yy[:k] - RECENTER_THRESHOLD ** 2
        leave.terminal = True
        leave.direction = 1.0
        events = [leave]
    atol = tol if atol is None else atol

    segments = []
    t = float(t0)
    while True:
        res = solve_ivp(rhs, (t, t1), y, method=method, rtol=tol, atol=atol,
                        dense_output=True, events=events)
        if res.status == -1:
            raise ToleranceNotMet(f"integration failed at t={res.t[-1]:.6g}: {res.message}")
        if not np.all(np.isfinite(res.y)):
            raise ChartEscape("non-finite state during integration")
        if res.status == 1 and res.t[-1] < t1:
            te = float(res.t_events[0][0])
            segments.append(Segment(t, te, chart, res.sol, res.t))
            y = transform_state(bg, res.y_events[0][0])
            chart = 1 - chart
            t = te
            if len(segments) > MAX_SEGMENTS:
                raise ChartEscape("too many chart switches")
            continue
        segments.append(Segment(t, float(t1), chart, res.sol, res.t))
        break
    return PiecewiseSolution(segments, len(y))


# ---------------------------------------------------------------------------
# right-hand sides


def s_form_rhs(bg: FlowBackground, n_parallel: int, n_jacobi: int):
    """Regularized system in ``s = sqrt(tau)``.

    Rows of ``V``: ``Z``, then ``n_parallel`` parallel vectors, then
    ``n_jacobi`` Jacobi fields ``U`` and their covariant derivatives ``W``.

    * ``D_s Z = 2 s^2 grad R - 4 s Ric(Z)``
    * ``D_s E = 0``
    * ``D_s U = W``,
      ``D_s W = R(Z,U)Z + 2 s^2 Hess R(U) - 4 s (nabla_U Ric)(Z) - 4 s Ric(W)``
    """
    n = bg.n
    iu = slice(1 + n_parallel, 1 + n_parallel + n_jacobi)
    iw = slice(1 + n_parallel + n_jacobi, 1 + n_parallel + 2 * n_jacobi)
    sgn = -1.0 if bg.flip_jacobi_curvature else 1.0

    def f(s, y):
        x = y[:n]
        V = y[n:].reshape(-1, n)
        tau = s * s
        Z = V[0]
        dV = -bg.christoffel_apply(x, Z, V)
        dV[0] += 2.0 * tau * bg.grad_R(x, tau) - 4.0 * s * bg.ricci_apply(x, tau, Z)
        if n_jacobi:
            U, W = V[iu], V[iw]
            dV[iu] += W
            dV[iw] += (sgn * bg.riemann_apply(x, Z, U, Z)
                       + 2.0 * tau * bg.hess_R_apply(x, tau, U)
                       - 4.0 * s * bg.cov_ricci_apply(x, tau, U, Z)
                       - 4.0 * s * bg.ricci_apply(x, tau, W))
        return np.concatenate([Z, dV.ravel()])

    return f


def tau_form_rhs(bg: FlowBackground, n_jacobi: int):
    """Unregularized system in ``tau``; rows ``X``, ``U`` (n_jacobi), ``A = nabla_X U``.

    * ``nabla_X X = 1/2 grad R - X / (2 tau) - 2 Ric(X)``
    * ``nabla_X A = R(X,U)X + 1/2 Hess R(U) - 2 (nabla_U Ric)(X) - 2 Ric(A) - A / (2 tau)``
    """
    n = bg.n
    iu = slice(1, 1 + n_jacobi)
    ia = slice(1 + n_jacobi, 1 + 2 * n_jacobi)
    sgn = -1.0 if bg.flip_jacobi_curvature else 1.0

    def f(tau, y):
        x = y[:n]
        V = y[n:].reshape(-1, n)
        X = V[0]
        dV = -bg.christoffel_apply(x, X, V)
        dV[0] += 0.5 * bg.grad_R(x, tau) - X / (2.0 * tau) - 2.0 * bg.ricci_apply(x, tau, X)
        if n_jacobi:
            U, A = V[iu], V[ia]
            dV[iu] += A
            dV[ia] += (sgn * bg.riemann_apply(x, X, U, X)
                       + 0.5 * bg.hess_R_apply(x, tau, U)
                       - 2.0 * bg.cov_ricci_apply(x, tau, U, X)
                       - 2.0 * bg.ricci_apply(x, tau, A)
                       - A / (2.0 * tau))
        return np.concatenate([X, dV.ravel()])

    return f
