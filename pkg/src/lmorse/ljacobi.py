"""L-Jacobi fields, L-conjugate points and the differential of the L-exponential map.

Jacobi fields solve, in ``s = sqrt(tau)`` and with ``D_s`` the slice
Levi-Civita derivative along the geodesic,

    D_s D_s U = R(Z,U)Z + 2 s^2 Hess R(U) - 4 s (nabla_U Ric)(Z) - 4 s Ric(D_s U)

which is the tau-form equation multiplied by ``4 tau``.  They are integrated
jointly with the geodesic and the parallel frame, and reported in frame
components: ``U = u^a E_a`` and ``D_s U = u'^a E_a``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _ode
from .errors import ConjugateEndpoint, UnresolvedCluster
from .flowbg import FlowBackground, transition_arrays
from .lgeo import LGeodesicPath, shoot

#: relative singular-value threshold for multiplicity and singularity tests
DELTA = 1e-6
#: default separation resolution in s
SEP = 1e-4
#: candidates closer than this are one root seen twice
MERGE_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class JacobiSolution:
    """``k`` Jacobi fields along a path, optionally combined by ``coeffs``.

    ``u0`` and ``w0`` hold the initial frame components column-wise
    (shape ``(n, k)``).  With ``coeffs`` set, :meth:`u`, :meth:`du` and
    :meth:`ddu` return the single field ``sum_j coeffs[j] U_j``.
    """

    along: LGeodesicPath
    solution: _ode.PiecewiseSolution
    u0: np.ndarray
    w0: np.ndarray
    coeffs: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.u0.shape[1]

    @property
    def n(self) -> int:
        return self.along.n

    def raw(self, s):
        """Coordinate data ``(x, Z, E, U, W, chart)``; vectors are columns."""
        Y, chart = self.solution(s)
        n, k = self.n, self.k
        x = Y[..., :n]
        V = Y[..., n:].reshape(Y.shape[:-1] + (-1, n))
        Z = V[..., 0, :]
        E = np.swapaxes(V[..., 1:1 + n, :], -1, -2)
        U = np.swapaxes(V[..., 1 + n:1 + n + k, :], -1, -2)
        W = np.swapaxes(V[..., 1 + n + k:, :], -1, -2)
        return x, Z, E, U, W, chart

    def matrix(self, s):
        """Frame components of all fields, shape ``(..., n, k)``."""
        _, _, E, U, _, _ = self.raw(s)
        return np.linalg.solve(E, U)

    def dmatrix(self, s):
        _, _, E, _, W, _ = self.raw(s)
        return np.linalg.solve(E, W)

    def ddmatrix(self, s):
        """Frame components of ``D_s D_s U`` read off the Jacobi equation."""
        bg = self.along.bg
        s = np.asarray(s, float)
        x, Z, E, U, W, _ = self.raw(s)
        tau = s ** 2
        sgn = -1.0 if bg.flip_jacobi_curvature else 1.0
        Ut, Wt = np.swapaxes(U, -1, -2), np.swapaxes(W, -1, -2)   # (..., k, n)
        xk, tk, Zk = x[..., None, :], tau[..., None], Z[..., None, :]
        sk = s[..., None, None]
        acc = (sgn * bg.riemann_apply(xk, Zk, Ut, Zk)
               + 2.0 * tk[..., None] * bg.hess_R_apply(xk, tk, Ut)
               - 4.0 * sk * bg.cov_ricci_apply(xk, tk, Ut, Zk)
               - 4.0 * sk * bg.ricci_apply(xk, tk, Wt))
        return np.linalg.solve(E, np.swapaxes(acc, -1, -2))

    def _combine(self, M):
        if self.coeffs is not None:
            return M @ self.coeffs
        if self.k == 1:
            return M[..., 0]
        raise ValueError("select a combination with column() first")

    def u(self, s):
        return self._combine(self.matrix(s))

    def du(self, s):
        return self._combine(self.dmatrix(s))

    def ddu(self, s):
        return self._combine(self.ddmatrix(s))

    def column(self, c) -> "JacobiSolution":
        c = np.asarray(c, dtype=float).reshape(self.k)
        return JacobiSolution(self.along, self.solution, self.u0, self.w0, c)

    def coords(self, s):
        """Coordinate components of the (combined) field and the chart used."""
        _, _, _, U, _, chart = self.raw(s)
        return self._combine(U), chart

    def __call__(self, s):
        return self.matrix(s)


def _integrate_fields(path: LGeodesicPath, u0, w0, tol, method="DOP853") -> JacobiSolution:
    bg = path.bg
    n = bg.n
    u0 = np.asarray(u0, dtype=float).reshape(n, -1)
    w0 = np.asarray(w0, dtype=float).reshape(n, -1)
    if u0.shape != w0.shape:
        raise ValueError("u0 and w0 must have the same shape")
    k = u0.shape[1]
    x0, Z0, E0, _ = path.state(0.0)
    y0 = np.concatenate([x0, Z0, E0.T.ravel(), (E0 @ u0).T.ravel(), (E0 @ w0).T.ravel()])
    tol = path.tol if tol is None else tol
    rhs = _ode.s_form_rhs(bg, n, k)
    sol = _ode.integrate(bg, rhs, y0, path.solution.segments[0].chart, 0.0, path.s_max,
                         tol=tol, method=method)
    return JacobiSolution(path, sol, u0, w0)


def jacobi_integrate(path: LGeodesicPath, u0, w0, tol: float | None = None) -> JacobiSolution:
    """Jacobi field with ``U(0) = u0`` and ``D_s U(0) = w0`` (frame components at p)."""
    if tol is not None and not tol > 0:
        raise ValueError("tol must be positive")
    return _integrate_fields(path, u0, w0, tol)


def jacobi_matrix(path: LGeodesicPath, tol: float | None = None) -> JacobiSolution:
    """The ``n`` Jacobi fields with ``U(0) = 0`` and ``D_s U(0) = E_a(0)``.

    Calling the result at ``s`` gives ``J(s)``, whose columns are their frame
    components; ``J(s) / s -> I`` as ``s -> 0``.
    """
    n = path.n
    return _integrate_fields(path, np.zeros((n, n)), np.eye(n), tol)


# ---------------------------------------------------------------------------
# conjugate points


@dataclass(frozen=True)
class ConjugatePoint:
    tau: float
    s: float
    multiplicity: int
    sigma_ratio: float


@dataclass(frozen=True, eq=False)
class ConjugateReport:
    points: list
    endpoint_conjugate: bool
    endpoint_sigma_ratio: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def total_multiplicity(self) -> int:
        return int(sum(p.multiplicity for p in self.points))

    @property
    def taus(self) -> list:
        return [p.tau for p in self.points]

    def to_json(self) -> dict:
        return {
            "points": [{"tau": p.tau, "s": p.s, "multiplicity": p.multiplicity,
                        "sigma_ratio": p.sigma_ratio} for p in self.points],
            "endpoint_conjugate": self.endpoint_conjugate,
            "total_multiplicity": self.total_multiplicity,
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def metric_singular_values(jac: JacobiSolution, s):
    """Singular values of ``J`` w.r.t. g-orthonormal bases (descending)."""
    J = jac.matrix(s)
    G = jac.along.gram(s)
    L = np.linalg.cholesky(G)
    return np.linalg.svd(np.swapaxes(L, -1, -2) @ J, compute_uv=False)


def _scan_grid(jac: JacobiSolution, per_step: int, max_spacing: float):
    ts = jac.solution.step_points
    s_max = jac.along.s_max
    pieces = [np.linspace(a, b, per_step + 1)[:-1] for a, b in zip(ts[:-1], ts[1:])]
    grid = np.unique(np.concatenate(pieces + [np.array([s_max])]))
    gaps = np.diff(grid)
    if gaps.max() > max_spacing:
        extra = [np.linspace(a, b, int(np.ceil((b - a) / max_spacing)) + 1)
                 for a, b in zip(grid[:-1], grid[1:]) if b - a > max_spacing]
        grid = np.unique(np.concatenate([grid] + extra))
    return grid[grid > 0]


def conjugate_scan(path: LGeodesicPath, tol: float | None = None, sep: float = SEP,
                   delta: float = DELTA, jac: JacobiSolution | None = None,
                   per_step: int = 8) -> ConjugateReport:
    """Locate the L-conjugate parameters in ``(0, tau_bar)``.

    Sign changes of ``det J`` are bracketed on a grid refined from the
    integrator's own steps and polished with Brent's method; roots where
    the determinant only touches zero are found as local minima of
    ``sigma_min / sigma_max`` refined by golden-section search.  The
    multiplicity is the number of relative singular values below ``delta``.
    """
    if not sep > 0:
        raise ValueError("sep must be positive")
    if jac is None:
        jac = jacobi_matrix(path, tol)
    s_max = path.s_max
    grid = _scan_grid(jac, per_step, max_spacing=s_max / 512)
    J = jac.matrix(grid)
    det = np.linalg.det(J)
    sv = metric_singular_values(jac, grid)
    ratio = sv[:, -1] / sv[:, 0]

    def det_at(s):
        return float(np.linalg.det(jac.matrix(s)))

    def ratio_at(s):
        sv1 = metric_singular_values(jac, s)
        return float(sv1[-1] / sv1[0])

    roots = []
    flips = np.nonzero(np.sign(det[:-1]) * np.sign(det[1:]) < 0)[0]
    for i in flips:
        roots.append(brentq(det_at, grid[i], grid[i + 1], xtol=1e-12, maxiter=200))
    n_sign = len(roots)

    interior = np.nonzero((ratio[1:-1] < ratio[:-2]) & (ratio[1:-1] <= ratio[2:])
                          & (ratio[1:-1] < 0.1))[0] + 1
    touches = []
    sorted_roots = np.sort(roots)
    for i in interior:
        # a dip around a bracketed sign change is that same root
        j = np.searchsorted(sorted_roots, grid[i - 1])
        if j < sorted_roots.size and sorted_roots[j] <= grid[i + 1]:
            continue
        res = minimize_scalar(ratio_at, bracket=(grid[i - 1], grid[i], grid[i + 1]),
                              method="golden", tol=1e-12)
        if res.fun < delta and grid[i - 1] <= res.x <= grid[i + 1]:
            touches.append(float(res.x))

    cands = sorted(roots)
    for t in touches:
        near = [r for r in cands if abs(r - t) < sep]
        if not near:
            cands.append(t)
        elif min(abs(r - t) for r in near) >= MERGE_TOL:
            raise UnresolvedCluster(f"candidate roots at s={t:.12g} and s={near[0]:.12g} "
                                    f"are closer than sep={sep}")
    cands.sort()
    merged = []
    for c in cands:
        if merged and c - merged[-1] < MERGE_TOL:
            continue
        if merged and c - merged[-1] < sep:
            raise UnresolvedCluster(f"candidate roots at s={merged[-1]:.12g} and s={c:.12g} "
                                    f"are closer than sep={sep}")
        merged.append(c)

    end_sv = metric_singular_values(jac, s_max)
    end_ratio = float(end_sv[-1] / end_sv[0])
    points = []
    for s_star in merged:
        if s_star >= s_max - MERGE_TOL:
            continue
        sv1 = metric_singular_values(jac, s_star)
        mult = int(np.sum(sv1 < delta * sv1[0]))
        points.append(ConjugatePoint(float(s_star ** 2), float(s_star), max(mult, 1),
                                     float(sv1[-1] / sv1[0])))
    diag = {"grid_points": int(grid.size), "sign_changes": n_sign,
            "touch_candidates": len(touches), "min_ratio_on_grid": float(ratio.min())}
    return ConjugateReport(points, end_ratio < delta, end_ratio, diag)


def kernel_field(jac: JacobiSolution, s_star: float, delta: float = DELTA):
    """Columns spanning ``ker J(s_star)`` (the Jacobi fields vanishing there)."""
    J = jac.matrix(s_star)
    _, sv, Vt = np.linalg.svd(J)
    mask = sv < delta * sv[0]
    if not mask.any():
        mask[-1] = True
    return Vt[mask].T


# ---------------------------------------------------------------------------
# exponential map differential, boundary value problem, variation check


def dlexp(bg: FlowBackground, p, v, tau_bar: float, tol: float = 1e-10,
          path: LGeodesicPath | None = None) -> np.ndarray:
    """Differential of ``v -> lexp(p, v, tau_bar)`` in frame components.

    Rows refer to the transported frame at the endpoint, columns to the
    orthonormal frame at ``p``.  Because ``Z(0) = 2 v`` this is ``2 J(s_max)``.
    """
    if path is None:
        path = shoot(bg, p, v, tau_bar, tol)
    return 2.0 * jacobi_matrix(path, tol)(path.s_max)


def jacobi_bvp(path: LGeodesicPath, w, tol: float | None = None, s_end: float | None = None,
               jac: JacobiSolution | None = None, delta: float = DELTA) -> JacobiSolution:
    """Jacobi field with ``U(0) = 0`` and ``U(s_end) = w`` (frame components).

    Raises :class:`ConjugateEndpoint` when ``J(s_end)`` is numerically singular.
    """
    if jac is None:
        jac = jacobi_matrix(path, tol)
    s_end = path.s_max if s_end is None else float(s_end)
    Js = jac.matrix(s_end)
    sv = np.linalg.svd(Js, compute_uv=False)
    if sv[-1] < delta * sv[0]:
        raise ConjugateEndpoint(f"tau={s_end ** 2:.12g} is conjugate to tau=0 "
                                f"(sigma ratio {sv[-1] / sv[0]:.3g})")
    return jac.column(np.linalg.solve(Js, np.asarray(w, float)))


def _points_in_chart(bg, x, chart, target_chart):
    """Convert rows of ``x`` to ``target_chart`` where they differ."""
    x = np.array(x, dtype=float)
    flip = chart != target_chart
    if np.any(flip):
        x[flip] = transition_arrays(bg, x[flip])[0]
    return x


def _vectors_in_chart(bg, x, chart, target_chart, V):
    V = np.array(V, dtype=float)
    flip = chart != target_chart
    if np.any(flip):
        _, J = transition_arrays(bg, x[flip])
        V[flip] = np.einsum("...ij,...j->...i", J, V[flip])
    return V


def variation_field_check(bg: FlowBackground, p, v, dv, tau_bar: float, eps: float,
                          tol: float = 1e-12, num: int = 201) -> float:
    """Max g-distance between the difference quotient of L-geodesics and a Jacobi field.

    Compares ``(gamma_{v + eps dv}(s) - gamma_v(s)) / eps`` with the Jacobi
    field ``U(0) = 0``, ``D_s U(0) = 2 dv``; the result is ``O(eps)``.
    """
    base = shoot(bg, p, v, tau_bar, tol)
    pert = shoot(bg, p, np.asarray(v, float) + eps * np.asarray(dv, float), tau_bar, tol)
    x0, _, E0, _ = base.state(0.0)
    # dv is given in the chart of p; the integration starts in base's first chart
    _, _, w_start = _initial_vector(bg, base, dv)
    jac = jacobi_integrate(base, np.zeros(bg.n), np.linalg.solve(E0, 2.0 * w_start), tol)
    s = np.linspace(0.0, base.s_max, num)
    xb, _, _, cb = base.state(s)
    xp, _, _, cp = pert.state(s)
    xp = _points_in_chart(bg, xp, cp, cb)
    xj, _, _, _, _, cj = jac.raw(s)
    U, _ = jac.coords(s)
    U = _vectors_in_chart(bg, xj, cj, cb, U)
    diff = (xp - xb) / eps - U
    gd = bg.metric_diag(xb, s ** 2)
    return float(np.sqrt(np.max(np.sum(gd * diff * diff, axis=-1))))


def _initial_vector(bg, path, vec):
    """Express a vector given in the chart of ``path.p`` in the integration chart."""
    vec = np.asarray(vec, dtype=float)
    start_chart = path.solution.segments[0].chart
    if bg.has_charts and start_chart != path.p.chart:
        _, J = transition_arrays(bg, path.p.coords)
        return path.p, start_chart, J @ vec
    return path.p, start_chart, vec
