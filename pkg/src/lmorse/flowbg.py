"""Closed-form backward Ricci flow backgrounds.

Three families are provided, all of the form ``(S^k, c(tau) h) x R^(n-k)``
with ``h`` the unit round metric written in stereographic coordinates:

* ``euclidean``  k = 0, the static flat metric on R^n
* ``sphere``     k = n, ``c(tau) = c0 + 2 (n - 1) tau``
* ``cylinder``   k = n - 1, ``c(tau) = c0 + 2 (n - 2) tau`` times a flat line

Each one solves ``dg/dtau = 2 Ric`` exactly.  Spatial derivatives of the
scalar curvature and of the Ricci tensor vanish identically, but the
full tensor interface (``grad_R``, ``hess_R``, ``cov_ricci``) is kept so that
the geodesic, Jacobi and index-form code is written against the general
formulas.

Conventions
-----------
``christoffel[k, i, j]`` is Gamma^k_ij.  ``riemann[l, i, j, k]`` is the
(1,3) tensor with ``R(X, Y)W = riemann[l, i, j, k] X^i Y^j W^k`` and
``R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]``, so on the round
sphere of curvature K, ``R(X, Y)W = K (<Y, W> X - <X, W> Y)``.
``ricci[j, k] = riemann[l, l, j, k]`` and ``cov_ricci[i, j, k] = (nabla_i Ric)_jk``.

The sphere factor is covered by two stereographic charts: chart 0 projects
from the north pole, chart 1 from the south pole.  The transition between
them is the inversion ``y -> y / |y|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import InvalidChart, NegativeTau, NotApplicable

KINDS = ("euclidean", "sphere", "cylinder")

#: charts are switched once the stereographic radius exceeds this value
RECENTER_THRESHOLD = 2.0
#: coordinates beyond this radius are rejected outright
CHART_DOMAIN = 1.0e4


def check_tau(tau) -> None:
    if np.any(np.asarray(tau) < 0):
        raise NegativeTau(f"tau must be nonnegative, got {tau}")


@dataclass(frozen=True)
class FlowBackground:
    """A closed-form backward Ricci flow.

    Parameters
    ----------
    kind : {"euclidean", "sphere", "cylinder"}
    n : int
        Manifold dimension; ``n >= 2`` and ``n >= 3`` for the cylinder.
    c0 : float
        Scale of the sphere factor at ``tau = 0``.  Ignored for ``euclidean``.
    flip_jacobi_curvature : bool
        Fault-injection switch.  Flips the sign of the curvature term in the
        Jacobi operator only (the index form keeps the true sign).  Used to
        check that the verification suite notices a convention error.
    """

    kind: str
    n: int
    c0: float = 1.0
    flip_jacobi_curvature: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown background kind {self.kind!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("dimension must be an integer >= 2")
        if self.kind == "cylinder" and self.n < 3:
            raise ValueError("the cylinder needs n >= 3")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")

    # -- bookkeeping -----------------------------------------------------

    @property
    def sphere_dim(self) -> int:
        return {"euclidean": 0, "sphere": self.n, "cylinder": self.n - 1}[self.kind]

    @property
    def has_charts(self) -> bool:
        return self.sphere_dim > 0

    def scale(self, tau):
        """Sphere-factor scale ``c(tau)`` (1 for the flat background)."""
        k = self.sphere_dim
        if k == 0:
            return np.ones_like(np.asarray(tau, dtype=float))
        return self.c0 + 2.0 * (k - 1) * np.asarray(tau, dtype=float)

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "n": self.n, "c0": self.c0}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "FlowBackground":
        kind = data["kind"]
        return cls(kind=kind, n=int(data["n"]), c0=float(data.get("c0", 1.0)))

    # -- vectorized pointwise geometry -------------------------------------
    #
    # All helpers broadcast over leading axes; vectors live on the last axis.

    def _block(self, x):
        return x[..., : self.sphere_dim]

    def conformal(self, x):
        """Unit-sphere conformal factor ``4 / (1 + |y|^2)^2`` (1 when flat)."""
        y = self._block(np.asarray(x, dtype=float))
        return 4.0 / (1.0 + np.sum(y * y, axis=-1)) ** 2

    def metric_diag(self, x, tau):
        x = np.asarray(x, dtype=float)
        k = self.sphere_dim
        d = np.ones(x.shape, dtype=float)
        if k:
            cf = self.scale(tau) * self.conformal(x)
            d[..., :k] = np.asarray(cf)[..., None]
        return d

    def inner(self, x, tau, a, b):
        return np.sum(self.metric_diag(x, tau) * a * b, axis=-1)

    def christoffel_apply(self, x, a, b):
        """Gamma(a, b) = Gamma^k_ij a^i b^j, independent of tau."""
        k = self.sphere_dim
        out = np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b)))
        if not k:
            return out
        y = self._block(np.asarray(x, dtype=float))
        phi = -2.0 * y / (1.0 + np.sum(y * y, axis=-1, keepdims=True))
        ab, bb = a[..., :k], b[..., :k]
        pa = np.sum(phi * ab, axis=-1, keepdims=True)
        pb = np.sum(phi * bb, axis=-1, keepdims=True)
        abdot = np.sum(ab * bb, axis=-1, keepdims=True)
        out[..., :k] = ab * pb + bb * pa - abdot * phi
        return out

    def riemann_apply(self, x, a, b, w):
        """R(a, b) w.  The (1,3) tensor is tau-independent."""
        k = self.sphere_dim
        out = np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b), np.shape(w)))
        if not k:
            return out
        f = self.conformal(x)[..., None]
        ab, bb, wb = a[..., :k], b[..., :k], w[..., :k]
        out[..., :k] = f * (ab * np.sum(bb * wb, axis=-1, keepdims=True)
                            - bb * np.sum(ab * wb, axis=-1, keepdims=True))
        return out

    def ricci_apply(self, x, tau, w):
        """Ric as an endomorphism, g^{-1} Ric applied to w."""
        k = self.sphere_dim
        out = np.zeros(np.shape(w))
        if not k:
            return out
        lam = (k - 1) / np.asarray(self.scale(tau))
        out[..., :k] = np.asarray(lam)[..., None] * w[..., :k]
        return out

    def scalar_curvature(self, x, tau):
        k = self.sphere_dim
        shape = np.shape(x)[:-1]
        if not k:
            return np.zeros(np.broadcast_shapes(shape, np.shape(tau)))
        return np.broadcast_to(k * (k - 1) / self.scale(tau),
                               np.broadcast_shapes(shape, np.shape(tau))).copy()

    def grad_R(self, x, tau):
        return np.zeros(np.shape(x))

    def hess_R_apply(self, x, tau, w):
        """(Hess R) as an endomorphism applied to w; R is spatially constant."""
        return np.zeros(np.shape(w))

    def cov_ricci_apply(self, x, tau, u, z):
        """(nabla_u Ric)(z) raised to a vector; Ric is parallel here."""
        return np.zeros(np.broadcast_shapes(np.shape(u), np.shape(z)))


def StaticEuclidean(n: int = 2) -> FlowBackground:
    return FlowBackground("euclidean", n)


def ShrinkingSphere(n: int = 2, c0: float = 1.0) -> FlowBackground:
    return FlowBackground("sphere", n, c0)


def ShrinkingCylinder(n: int = 3, c0: float = 1.0) -> FlowBackground:
    return FlowBackground("cylinder", n, c0)


# ---------------------------------------------------------------------------
# points and charts


@dataclass(frozen=True, eq=False)
class ChartPoint:
    """Coordinates of a point together with the chart they refer to."""

    coords: np.ndarray
    chart: int = 0

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if not np.all(np.isfinite(c)):
            raise InvalidChart("chart coordinates must be finite")
        if self.chart not in (0, 1):
            raise InvalidChart(f"unknown chart id {self.chart}")

    def __repr__(self):
        return f"ChartPoint({self.coords.tolist()}, chart={self.chart})"


def as_point(x, chart: int = 0) -> ChartPoint:
    if isinstance(x, ChartPoint):
        return x
    return ChartPoint(np.asarray(x, dtype=float), chart)


def _validate_point(bg: FlowBackground, x: ChartPoint) -> None:
    if x.coords.shape != (bg.n,):
        raise InvalidChart(f"expected {bg.n} coordinates, got {x.coords.shape}")
    if not bg.has_charts:
        if x.chart != 0:
            raise InvalidChart("the flat background has a single chart")
        return
    if np.linalg.norm(x.coords[: bg.sphere_dim]) > CHART_DOMAIN:
        raise InvalidChart("point lies outside the stereographic chart domain")


def inversion_jacobian(y):
    """Jacobian of ``y -> y / |y|^2`` (vectorized over leading axes)."""
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)[..., None, None]
    eye = np.eye(y.shape[-1])
    return (eye * r2 - 2.0 * y[..., :, None] * y[..., None, :]) / r2 ** 2


def transition_arrays(bg: FlowBackground, x):
    """Switch the sphere block of raw coordinates to the other chart.

    Returns the new coordinates and the n x n Jacobian used to push vector
    components forward.
    """
    k = bg.sphere_dim
    x = np.asarray(x, dtype=float)
    y = x[..., :k]
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    if np.any(r2 == 0):
        raise InvalidChart("the chart origin has no image in the opposite chart")
    xn = x.copy()
    xn[..., :k] = y / r2
    jac = np.broadcast_to(np.eye(bg.n), x.shape[:-1] + (bg.n, bg.n)).copy()
    jac[..., :k, :k] = inversion_jacobian(y)
    return xn, jac


def chart_transition(bg: FlowBackground, x: ChartPoint, to_chart: int):
    """Express ``x`` in chart ``to_chart``; returns ``(point, jacobian)``."""
    x = as_point(x)
    if not bg.has_charts:
        raise NotApplicable("the flat background has a single global chart")
    _validate_point(bg, x)
    if to_chart == x.chart:
        return x, np.eye(bg.n)
    xn, jac = transition_arrays(bg, x.coords)
    return ChartPoint(xn, to_chart), jac


def recenter_chart(bg: FlowBackground, x: ChartPoint):
    """Move ``x`` into a chart where it sits close to the origin.

    Points with stereographic radius at most ``RECENTER_THRESHOLD`` are
    returned unchanged with an identity Jacobian.
    """
    x = as_point(x)
    if not bg.has_charts:
        raise NotApplicable("recentering only applies to backgrounds with a sphere factor")
    _validate_point(bg, x)
    if np.linalg.norm(x.coords[: bg.sphere_dim]) <= RECENTER_THRESHOLD:
        return x, np.eye(bg.n)
    return chart_transition(bg, x, 1 - x.chart)


def to_chart(bg: FlowBackground, x: ChartPoint, chart: int) -> ChartPoint:
    if not bg.has_charts or x.chart == chart:
        return x
    return chart_transition(bg, x, chart)[0]


# ---------------------------------------------------------------------------
# embedding and the fixed-tau exponential map


def embed(bg: FlowBackground, x, chart):
    """Map chart coordinates to ``(P, z)`` with ``P`` on the unit sphere in R^(k+1).

    ``chart`` may be an int or an integer array matching the leading axes of x.
    For the flat background ``P`` has zero columns.
    """
    x = np.asarray(x, dtype=float)
    k = bg.sphere_dim
    y, z = x[..., :k], x[..., k:]
    if not k:
        return np.zeros(x.shape[:-1] + (0,)), z
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    sign = np.where(np.asarray(chart)[..., None] == 0, 1.0, -1.0)
    P = np.concatenate([2.0 * y, sign * (r2 - 1.0)], axis=-1) / (1.0 + r2)
    return P, z


def unembed(bg: FlowBackground, P, z, chart):
    k = bg.sphere_dim
    if not k:
        return np.asarray(z, dtype=float)
    P = np.asarray(P, dtype=float)
    sign = np.where(np.asarray(chart)[..., None] == 0, 1.0, -1.0)
    y = P[..., :k] / (1.0 - sign * P[..., k:])
    return np.concatenate([y, np.asarray(z, dtype=float)], axis=-1)


def embed_vector(bg: FlowBackground, x, chart, v):
    """Push tangent components ``v`` at ``x`` into the embedding (dP, dz)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    k = bg.sphere_dim
    if not k:
        return np.zeros(v.shape[:-1] + (0,)), v
    y, w = x[..., :k], v[..., :k]
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    yw = np.sum(y * w, axis=-1, keepdims=True)
    sign = np.where(np.asarray(chart)[..., None] == 0, 1.0, -1.0)
    d = 1.0 + r2
    dP = np.concatenate([2.0 * w / d - 4.0 * y * yw / d ** 2,
                         sign * 4.0 * yw / d ** 2], axis=-1)
    return dP, v[..., k:]


def slice_exp(bg: FlowBackground, x, chart, v):
    """Riemannian exponential map of a single tau-slice.

    Slices differ only by a constant rescaling of the sphere factor, so the
    map does not depend on tau.  Returns coordinates in ``chart``.
    """
    x = np.asarray(x, dtype=float)
    P, z = embed(bg, x, chart)
    dP, dz = embed_vector(bg, x, chart, v)
    if bg.sphere_dim:
        th = np.linalg.norm(dP, axis=-1, keepdims=True)
        safe = np.where(th > 0, th, 1.0)
        sinc = np.where(th > 0, np.sin(th) / safe, 1.0)
        P = np.cos(th) * P + sinc * dP
    return unembed(bg, P, z + dz, chart)


# ---------------------------------------------------------------------------
# full tensor packs


@dataclass(frozen=True, eq=False)
class TensorPack:
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar_R: float
    grad_R: np.ndarray
    hess_R: np.ndarray
    cov_ricci: np.ndarray
    extra: dict = field(default_factory=dict)


def metric_at(bg: FlowBackground, x: ChartPoint, tau: float) -> np.ndarray:
    check_tau(tau)
    x = as_point(x)
    _validate_point(bg, x)
    return np.diag(bg.metric_diag(x.coords, tau))


def tensors_at(bg: FlowBackground, x: ChartPoint, tau: float) -> TensorPack:
    """Closed-form metric, connection and curvature at ``(x, tau)``."""
    check_tau(tau)
    x = as_point(x)
    _validate_point(bg, x)
    n, k = bg.n, bg.sphere_dim
    diag = bg.metric_diag(x.coords, tau)
    g = np.diag(diag)
    g_inv = np.diag(1.0 / diag)
    gamma = np.zeros((n, n, n))
    riem = np.zeros((n, n, n, n))
    ric = np.zeros((n, n))
    R = 0.0
    if k:
        y = x.coords[:k]
        phi = -2.0 * y / (1.0 + y @ y)
        dk = np.eye(k)
        # Gamma^c_ab = delta_ca phi_b + delta_cb phi_a - delta_ab phi_c
        gamma[:k, :k, :k] = (np.einsum("ca,b->cab", dk, phi)
                             + np.einsum("cb,a->cab", dk, phi)
                             - np.einsum("ab,c->cab", dk, phi))
        curv = 1.0 / float(bg.scale(tau))
        gb = g[:k, :k]
        # R^l_{ijk} = K (delta_li g_jk - delta_lj g_ik)
        riem[:k, :k, :k, :k] = curv * (np.einsum("li,jk->lijk", dk, gb)
                                       - np.einsum("lj,ik->lijk", dk, gb))
        ric = np.einsum("llij->ij", riem)
        R = float(np.einsum("ij,ij->", g_inv, ric))
    return TensorPack(
        g=g,
        g_inv=g_inv,
        christoffel=gamma,
        riemann=riem,
        ricci=ric,
        scalar_R=R,
        grad_R=np.zeros(n),
        hess_R=np.zeros((n, n)),
        cov_ricci=np.zeros((n, n, n)),
    )


def dg_dtau_at(bg: FlowBackground, x: ChartPoint, tau: float) -> np.ndarray:
    """Closed-form tau-derivative of the metric."""
    check_tau(tau)
    x = as_point(x)
    _validate_point(bg, x)
    d = np.zeros(bg.n)
    k = bg.sphere_dim
    if k:
        d[:k] = 2.0 * (k - 1) * bg.conformal(x.coords)
    return np.diag(d)


def sectional_curvature(bg: FlowBackground, x: ChartPoint, tau: float, a, b) -> float:
    t = tensors_at(bg, x, tau)
    a, b = np.asarray(a, float), np.asarray(b, float)
    Rabb = np.einsum("lijk,i,j,k->l", t.riemann, a, b, b)
    num = a @ t.g @ Rabb
    den = (a @ t.g @ a) * (b @ t.g @ b) - (a @ t.g @ b) ** 2
    return float(num / den)
