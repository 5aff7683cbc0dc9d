import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmorse import (ChartPoint, FlowBackground, InvalidChart, NegativeTau, NotApplicable,
                    ShrinkingCylinder, ShrinkingSphere, StaticEuclidean, chart_transition,
                    dg_dtau_at, metric_at, recenter_chart, sectional_curvature, tensors_at)
from lmorse.flowbg import embed, embed_vector, slice_exp, transition_arrays


def random_point(rng, bg, radius=1.5):
    return ChartPoint(rng.uniform(-radius, radius, size=bg.n))


def test_flow_identity_closed_form_and_fd(bg, rng):
    h = 1e-4
    for _ in range(200):
        x = random_point(rng, bg)
        tau = float(rng.uniform(h, 4.0))
        fd = (metric_at(bg, x, tau + h) - metric_at(bg, x, tau - h)) / (2 * h)
        ric = tensors_at(bg, x, tau).ricci
        assert np.max(np.abs(fd - 2 * ric)) < 1e-8
        assert np.max(np.abs(dg_dtau_at(bg, x, tau) - 2 * ric)) < 1e-12


def test_riemann_matches_christoffel_derivatives(bg, rng):
    # R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
    h = 1e-5
    for _ in range(10):
        x = random_point(rng, bg, 1.0)
        t = tensors_at(bg, x, 0.3)
        dG = np.empty((bg.n,) * 4)       # dG[i, l, j, k] = d_i Gamma^l_jk
        for i in range(bg.n):
            e = np.eye(bg.n)[i] * h
            gp = tensors_at(bg, ChartPoint(x.coords + e), 0.3).christoffel
            gm = tensors_at(bg, ChartPoint(x.coords - e), 0.3).christoffel
            dG[i] = (gp - gm) / (2 * h)
        G = t.christoffel
        R = (np.einsum("iljk->lijk", dG) - np.einsum("jlik->lijk", dG)
             + np.einsum("lim,mjk->lijk", G, G) - np.einsum("ljm,mik->lijk", G, G))
        assert np.max(np.abs(R - t.riemann)) < 1e-7


def test_curvature_symmetries(bg, rng):
    x = random_point(rng, bg)
    t = tensors_at(bg, x, 0.7)
    Rm = np.einsum("ml,lijk->mijk", t.g, t.riemann)          # all indices down (first = l)
    assert np.allclose(Rm, -np.swapaxes(Rm, 1, 2), atol=1e-12)
    assert np.allclose(Rm, -np.swapaxes(Rm, 0, 3), atol=1e-12)
    assert np.allclose(Rm, np.transpose(Rm, (3, 2, 1, 0)), atol=1e-12)
    bianchi = t.riemann + np.transpose(t.riemann, (0, 2, 3, 1)) + np.transpose(t.riemann, (0, 3, 1, 2))
    assert np.max(np.abs(bianchi)) < 1e-12
    assert np.allclose(t.ricci, t.ricci.T, atol=1e-14)
    assert not np.any(t.grad_R) and not np.any(t.hess_R) and not np.any(t.cov_ricci)


@pytest.mark.parametrize("bg_, R0", [(StaticEuclidean(3), 0.0), (ShrinkingSphere(2, 1.0), 2.0),
                                     (ShrinkingSphere(3, 1.0), 6.0),
                                     (ShrinkingCylinder(3, 1.0), 2.0)])
def test_scalar_curvature_at_tau_zero(bg_, R0):
    assert tensors_at(bg_, np.full(bg_.n, 0.2), 0.0).scalar_R == pytest.approx(R0, rel=1e-12)


def test_sphere_sectional_curvature_sign_and_value():
    bg = ShrinkingSphere(2, 1.0)
    tau = 0.5
    K = sectional_curvature(bg, np.array([0.3, -0.2]), tau, [1.0, 0.0], [0.0, 1.0])
    assert K == pytest.approx(1.0 / (1.0 + 2.0 * tau), rel=1e-12)
    t = tensors_at(bg, np.array([0.3, -0.2]), tau)
    X, U = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    RXUX = np.einsum("lijk,i,j,k->l", t.riemann, X, U, X)
    assert U @ t.g @ RXUX < 0          # <R(X,U)X,U> = -K |X ^ U|^2 in this convention


def test_vectorized_helpers_match_tensor_pack(bg, rng):
    x = random_point(rng, bg)
    t = tensors_at(bg, x, 0.4)
    a, b, w = rng.normal(size=(3, bg.n))
    assert np.allclose(bg.christoffel_apply(x.coords, a, b),
                       np.einsum("kij,i,j->k", t.christoffel, a, b), atol=1e-13)
    assert np.allclose(bg.riemann_apply(x.coords, a, b, w),
                       np.einsum("lijk,i,j,k->l", t.riemann, a, b, w), atol=1e-13)
    assert np.allclose(bg.ricci_apply(x.coords, 0.4, w), t.g_inv @ t.ricci @ w, atol=1e-13)


def test_negative_tau_and_bad_points():
    bg = ShrinkingSphere(2)
    with pytest.raises(NegativeTau):
        metric_at(bg, np.zeros(2), -1e-3)
    with pytest.raises(InvalidChart):
        metric_at(bg, np.zeros(3), 0.0)
    with pytest.raises(InvalidChart):
        ChartPoint([0.0, np.nan])
    with pytest.raises(InvalidChart):
        ChartPoint([0.0, 0.0], chart=2)
    with pytest.raises(InvalidChart):
        metric_at(bg, np.array([2e4, 0.0]), 0.0)
    with pytest.raises(NotApplicable):
        recenter_chart(StaticEuclidean(2), np.zeros(2))
    with pytest.raises(ValueError):
        FlowBackground("cylinder", 2)
    with pytest.raises(ValueError):
        FlowBackground("sphere", 2, c0=0.0)


def test_recenter_behaviour():
    bg = ShrinkingSphere(2)
    near = ChartPoint([0.5, 0.5])
    q, jac = recenter_chart(bg, near)
    assert q is near and np.array_equal(jac, np.eye(2))
    far = ChartPoint([3.0, 1.0])
    q, _ = recenter_chart(bg, far)
    assert q.chart == 1 and np.linalg.norm(q.coords) < 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3).filter(
    lambda v: 1e-3 < np.hypot(v[0], v[1]) < 1e3))
def test_chart_round_trip_and_pullback(coords):
    bg = ShrinkingCylinder(3, 0.5)
    x = ChartPoint(np.array(coords))
    y, J = chart_transition(bg, x, 1)
    back, Jb = chart_transition(bg, y, 0)
    assert np.allclose(back.coords, x.coords, rtol=1e-12, atol=1e-12)
    assert np.allclose(Jb @ J, np.eye(3), atol=1e-9)
    # the metric pulls back to itself: J^T g_1 J = g_0
    for tau in (0.0, 1.3):
        assert np.allclose(J.T @ metric_at(bg, y, tau) @ J, metric_at(bg, x, tau),
                           rtol=1e-10, atol=1e-14)
    # both charts embed to the same point
    P0, _ = embed(bg, x.coords, 0)
    P1, _ = embed(bg, y.coords, 1)
    assert np.allclose(P0, P1, atol=1e-12)


def test_embedding_is_isometric(rng):
    bg = ShrinkingSphere(3, 2.0)
    for _ in range(20):
        x = rng.uniform(-2, 2, size=3)
        v = rng.normal(size=3)
        dP, _ = embed_vector(bg, x, 0, v)
        assert dP @ dP == pytest.approx(bg.inner(x, 0.0, v, v) / bg.c0, rel=1e-12)
        P, _ = embed(bg, x, 0)
        assert P @ P == pytest.approx(1.0) and abs(P @ dP) < 1e-12


def test_slice_exp_length_and_transition_arrays(rng):
    bg = ShrinkingCylinder(3, 1.0)
    x = np.array([0.2, -0.4, 1.0])
    v = np.array([0.3, 0.1, -0.5])
    q = slice_exp(bg, x, 0, v)
    P0, z0 = embed(bg, x, 0)
    P1, z1 = embed(bg, q, 0)
    dP, _ = embed_vector(bg, x, 0, v)
    assert np.arccos(np.clip(P0 @ P1, -1, 1)) == pytest.approx(np.linalg.norm(dP), rel=1e-12)
    assert np.allclose(z1 - z0, v[2:])
    xs = rng.uniform(0.5, 2.0, size=(5, 3))
    xn, jac = transition_arrays(bg, xs)
    assert xn.shape == (5, 3) and jac.shape == (5, 3, 3)
