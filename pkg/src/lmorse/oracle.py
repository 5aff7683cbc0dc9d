"""Brute-force reference evaluators: discrete L-length and finite-difference variations.

Nothing here touches the geodesic or Jacobi right-hand sides.  Curves are
pushed into the embedding ``S^k x R^(n-k)`` (sample by sample, in whatever
chart each sample was recorded), velocities are second-order finite
differences in ``s = sqrt(tau)`` and the length integral is the composite
trapezoid rule, so the result converges at ``O(h^2)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonMonotoneTau, StepTooSmall
from .flowbg import FlowBackground, ChartPoint, as_point, embed, slice_exp, transition_arrays
from .lgeo import LGeodesicPath, shoot

EPS_PAIR = (1e-2, 1e-3)


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Samples ``(tau_i, x_i, chart_i)`` of a curve, ``tau`` strictly increasing."""

    taus: np.ndarray
    coords: np.ndarray
    charts: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        charts = np.broadcast_to(np.asarray(self.charts, dtype=int), taus.shape).copy()
        if taus.ndim != 1 or taus.size < 3 or coords.shape[0] != taus.size:
            raise ValueError("need at least 3 samples with matching coordinates")
        if taus[0] < 0:
            raise NonMonotoneTau("tau must be nonnegative")
        if np.any(np.diff(taus) <= 0):
            raise NonMonotoneTau("tau samples must be strictly increasing")
        if not np.all(np.isfinite(coords)):
            raise ValueError("non-finite coordinates")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "charts", charts)

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(self.taus)

    def __len__(self) -> int:
        return self.taus.size

    @classmethod
    def from_function(cls, fn, tau_bar: float, num: int, chart: int = 0):
        """Sample ``fn(tau)`` on a uniform s-grid over ``[0, tau_bar]``."""
        s = np.linspace(0.0, np.sqrt(tau_bar), num)
        return cls(s ** 2, np.array([fn(t) for t in s ** 2]), np.full(num, chart))

    @classmethod
    def from_path(cls, path: LGeodesicPath, num: int):
        """Sample a shot geodesic on a uniform s-grid (dense output, no recomputation)."""
        s = np.linspace(0.0, path.s_max, num)
        x, _, _, charts = path.state(s)
        return cls(s ** 2, x, charts)

    @classmethod
    def from_csv(cls, path):
        """Read the path CSV written by :meth:`LGeodesicPath.to_csv`."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no samples")
        xcols = sorted((k for k in rows[0] if k.startswith("x")), key=lambda k: int(k[1:]))
        taus = np.array([float(r["tau"]) for r in rows])
        coords = np.array([[float(r[k]) for k in xcols] for r in rows])
        charts = np.array([int(r.get("chart", 0)) for r in rows])
        return cls(taus, coords, charts)


def discrete_llength(bg: FlowBackground, curve: DiscreteCurve) -> float:
    """``int_0^{s_max} (2 s^2 R + 1/2 |d gamma / ds|^2) ds`` by finite differences."""
    s = curve.s
    P, z = embed(bg, curve.coords, curve.charts)
    dP = np.gradient(P, s, axis=0, edge_order=2) if P.shape[-1] else P
    dz = np.gradient(z, s, axis=0, edge_order=2)
    speed2 = bg.scale(curve.taus) * np.sum(dP * dP, axis=-1) + np.sum(dz * dz, axis=-1)
    R = bg.scalar_curvature(curve.coords, curve.taus)
    return float(np.trapezoid(2.0 * s * s * R + 0.5 * speed2, s))


def refinement_slope(bg: FlowBackground, fn, tau_bar: float, exact: float,
                     sizes=(101, 201, 401, 801)) -> float:
    """Observed order of :func:`discrete_llength` on samples of ``fn(tau)``."""
    errs = [abs(discrete_llength(bg, DiscreteCurve.from_function(fn, tau_bar, m)) - exact)
            for m in sizes]
    h = np.sqrt(tau_bar) / (np.asarray(sizes) - 1.0)
    return float(np.polyfit(np.log(h), np.log(errs), 1)[0])


# ---------------------------------------------------------------------------
# displaced curves


def _field_coords(path: LGeodesicPath, Y, s):
    """Coordinate components of the frame field ``Y`` at the points ``s``."""
    x, _, E, charts = path.state(s)
    y = np.array([Y.values(float(si)) for si in s])
    return x, np.einsum("...ia,...a->...i", E, y), charts


def displaced_curve(path: LGeodesicPath, Y, eps: float, num: int = 4001,
                    displacement: str = "exp") -> DiscreteCurve:
    """Samples of ``gamma_eps(s) = exp_{gamma(s)}(eps Y(s))``.

    ``displacement="chart"`` uses ``gamma(s) + eps Y(s)`` in the sample's chart
    instead, for which ``nabla_Y Y`` does not vanish.
    """
    s = np.linspace(0.0, path.s_max, num)
    x, y, charts = _field_coords(path, Y, s)
    if displacement == "exp":
        out = slice_exp(path.bg, x, charts, eps * y)
    elif displacement == "chart":
        out = x + eps * y
    else:
        raise ValueError(f"unknown displacement {displacement!r}")
    return DiscreteCurve(s ** 2, out, charts)


def displacement_acceleration_term(path: LGeodesicPath, Y, displacement: str = "exp") -> float:
    """First variation of L along ``nabla_Y Y`` for the chosen displacement.

    On a geodesic this is the boundary term ``2 sqrt(tau) <X, nabla_Y Y>`` at
    ``tau_bar``.  Slice-exponential displacement has ``nabla_Y Y = 0``; chart
    displacement has ``nabla_Y Y = Gamma(Y, Y)``.
    """
    if displacement == "exp":
        return 0.0
    s = np.array([path.s_max])
    x, y, _ = _field_coords(path, Y, s)
    Z = path.state(s)[1]
    acc = path.bg.christoffel_apply(x, y, y)
    return float(path.bg.inner(x, s ** 2, Z, acc)[0])


def _roundoff_check(values, estimate, eps, order, floor):
    noise = 8.0 * np.finfo(float).eps * max(abs(v) for v in values) / eps ** order
    if noise > 0.5 * max(abs(estimate), floor):
        raise StepTooSmall(f"round-off {noise:.3g} exceeds half of the estimate {estimate:.3g} "
                           f"at eps={eps:g}")


def second_difference(bg, path, Y, eps, samples=4001, displacement="exp"):
    Ls = [discrete_llength(bg, displaced_curve(path, Y, e, samples, displacement))
          for e in (-eps, 0.0, eps)]
    return (Ls[0] - 2.0 * Ls[1] + Ls[2]) / eps ** 2, Ls


def fd_second_variation(bg: FlowBackground, path: LGeodesicPath, Y, eps=EPS_PAIR,
                        samples: int = 4001, displacement: str = "exp",
                        floor: float = 1e-6) -> float:
    """Richardson-extrapolated ``d^2/d eps^2 L(gamma_eps)`` at ``eps = 0``.

    Raises :class:`StepTooSmall` when the round-off in a second difference
    exceeds half of the estimate (or of ``floor`` for estimates near zero).
    """
    eps = tuple(float(e) for e in np.atleast_1d(eps))
    ests = []
    for e in eps:
        d2, Ls = second_difference(bg, path, Y, e, samples, displacement)
        _roundoff_check(Ls, d2, e, 2, floor)
        ests.append(d2)
    if len(eps) == 1:
        return ests[0]
    (e1, e2), (d1, d2) = eps[:2], ests[:2]
    return (d2 * e1 ** 2 - d1 * e2 ** 2) / (e1 ** 2 - e2 ** 2)


def fd_first_variation(bg: FlowBackground, path: LGeodesicPath, V, eps: float = 1e-3,
                       samples: int = 4001, displacement: str = "exp",
                       floor: float = 1e-6) -> float:
    """Central difference ``(L(gamma_eps) - L(gamma_-eps)) / (2 eps)``."""
    Lp = discrete_llength(bg, displaced_curve(path, V, eps, samples, displacement))
    Lm = discrete_llength(bg, displaced_curve(path, V, -eps, samples, displacement))
    est = (Lp - Lm) / (2.0 * eps)
    _roundoff_check((Lp, Lm), est, eps, 1, floor)
    return est


def fd_dlexp(bg: FlowBackground, p, v, tau_bar: float, h: float = 1e-5,
             tol: float = 1e-12, path: LGeodesicPath | None = None) -> np.ndarray:
    """Central-difference differential of the L-exponential map.

    Same frames as :func:`lmorse.ljacobi.dlexp`: columns along the path's
    orthonormal frame at ``p``, rows in the transported frame at the endpoint.
    """
    p = as_point(p)
    v = np.asarray(v, dtype=float)
    if path is None:
        path = shoot(bg, p, v, tau_bar, tol)
    x0, _, E0, c0 = path.state(0.0)
    if c0 != p.chart:
        # frame vectors back to the chart p was given in
        _, jac = transition_arrays(bg, x0)
        E0 = jac @ E0
    xe, _, Ee, ce = path.state(path.s_max)
    cols = []
    for a in range(bg.n):
        ends = []
        for sgn in (1.0, -1.0):
            q = shoot(bg, p, v + sgn * h * E0[:, a], tau_bar, tol).endpoint
            if q.chart != ce:
                q = ChartPoint(transition_arrays(bg, q.coords)[0], ce)
            ends.append(q.coords)
        cols.append(np.linalg.solve(Ee, (ends[0] - ends[1]) / (2.0 * h)))
    return np.stack(cols, axis=1)
