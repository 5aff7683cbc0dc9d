import numpy as np
import pytest

from conftest import sphere_angle, sphere_onsets
from lmorse import (ConjugateEndpoint, ShrinkingCylinder, ShrinkingSphere, StaticEuclidean,
                    conjugate_scan, dlexp, jacobi_bvp, jacobi_integrate, jacobi_matrix, shoot,
                    variation_field_check)
from lmorse.lindex import index_form, FieldAlong
from lmorse.ljacobi import kernel_field, metric_singular_values
from lmorse.oracle import fd_dlexp


def test_flat_jacobi_matrix_is_linear():
    path = shoot(StaticEuclidean(3), np.zeros(3), np.array([1.0, 2.0, 0.0]), 2.0)
    J = jacobi_matrix(path)
    for s in (0.1, 0.7, path.s_max):
        assert np.allclose(J(s), s * np.eye(3), atol=1e-12)
    assert np.allclose(dlexp(StaticEuclidean(3), np.zeros(3), np.ones(3), 2.0),
                       2 * np.sqrt(2.0) * np.eye(3), atol=1e-10)
    assert conjugate_scan(path).points == []


def test_small_s_normalisation(fast_sphere_path):
    J = jacobi_matrix(fast_sphere_path)
    for s in (1e-6, 1e-5):
        assert np.allclose(J(s) / s, np.eye(2), atol=1e-3)


def test_sphere_conjugate_points_match_closed_form(fast_sphere_path):
    report = conjugate_scan(fast_sphere_path)
    expected = sphere_onsets(40.0 / 2, fast_sphere_path.s_max)
    s_found = np.array([p.s for p in report.points])
    assert len(s_found) == len(expected) == 2
    assert np.max(np.abs(s_found - expected)) < 1e-9
    assert all(p.multiplicity == 1 for p in report.points)
    assert np.all(np.diff(report.taus) > 0)
    assert not report.endpoint_conjugate


def test_three_sphere_multiplicity_two():
    # det J does not change sign at an even-multiplicity root; the sigma-ratio dip finds it
    c0 = 1.0
    path = shoot(ShrinkingSphere(3, c0), np.zeros(3), np.array([3.0, 0.0, 0.0]), 1.0, tol=1e-12)
    report = conjugate_scan(path)
    expected = sphere_onsets(3.0, path.s_max, c0, k=3)
    assert [p.multiplicity for p in report.points] == [2] * len(expected)
    assert np.max(np.abs(np.array([p.s for p in report.points]) - expected)) < 1e-9
    assert report.diagnostics["sign_changes"] == 0


def test_conjugate_points_stable_across_tolerances():
    bg = ShrinkingSphere(2, 0.01)
    a = conjugate_scan(shoot(bg, np.zeros(2), np.array([25.0, 5.0]), 1.0, tol=1e-10))
    b = conjugate_scan(shoot(bg, np.zeros(2), np.array([25.0, 5.0]), 1.0, tol=1e-12))
    assert len(a.points) == len(b.points) >= 1
    assert np.max(np.abs(np.array([p.s for p in a.points]) - [p.s for p in b.points])) < 1e-8


def test_no_conjugate_points_on_constant_sphere_geodesic():
    path = shoot(ShrinkingSphere(2, 1.0), np.zeros(2), np.zeros(2), 4.0)
    assert conjugate_scan(path).points == []
    # closed form: J(s) = (int_0^s c0 / c) I on the constant curve
    J = jacobi_matrix(path)
    s = 2.0
    tangential = np.arctan(s * np.sqrt(2.0)) / np.sqrt(2.0)
    assert np.allclose(J(s), tangential * np.eye(2), atol=1e-10)


def test_kernel_field_vanishes_at_both_ends_and_has_zero_index(fast_sphere_path):
    jac = jacobi_matrix(fast_sphere_path)
    first = conjugate_scan(fast_sphere_path, jac=jac).points[0]
    K = kernel_field(jac, first.s)
    assert K.shape == (2, 1)
    U = jac.column(K[:, 0])
    assert np.linalg.norm(U.u(first.s)) < 1e-9 * np.linalg.norm(U.du(0.0))
    field = FieldAlong.from_jacobi(U, 0.0, first.s)
    I = index_form(fast_sphere_path, field, field, (0.0, first.s))
    assert abs(I) < 1e-8


def test_singular_jacobi_matrix_iff_vanishing_field(fast_sphere_path):
    # tau* conjugate  <=>  some nonzero Jacobi field with U(0)=0 vanishes at tau*
    jac = jacobi_matrix(fast_sphere_path)
    report = conjugate_scan(fast_sphere_path, jac=jac)
    for p in report.points:
        sv = metric_singular_values(jac, p.s)
        assert sv[-1] / sv[0] < 1e-6
    for s in np.linspace(0.01, fast_sphere_path.s_max, 37):
        if min(abs(s - p.s) for p in report.points) > 1e-3:
            sv = metric_singular_values(jac, s)
            assert sv[-1] / sv[0] > 1e-4


def test_linearity_of_jacobi_fields(rng):
    path = shoot(ShrinkingCylinder(3), np.zeros(3), np.array([1.0, 0.5, -0.3]), 1.5, tol=1e-12)
    a, b = rng.normal(size=(2, 3))
    wa, wb = rng.normal(size=(2, 3))
    Ua = jacobi_integrate(path, a, wa)
    Ub = jacobi_integrate(path, b, wb)
    Uab = jacobi_integrate(path, 2 * a - b, 2 * wa - wb)
    s = np.linspace(0, path.s_max, 13)
    assert np.allclose(Uab.u(s), 2 * Ua.u(s) - Ub.u(s), atol=1e-10)


@pytest.mark.parametrize("bg,v", [(ShrinkingSphere(2, 1.0), [3.0, 1.0]),
                                  (ShrinkingCylinder(3, 1.0), [1.0, 0.5, 0.3]),
                                  (ShrinkingSphere(2, 0.01), [20.0, 0.0])])
def test_dlexp_matches_finite_differences(bg, v):
    v = np.array(v)
    D = dlexp(bg, np.zeros(bg.n), v, 1.0, tol=1e-12)
    F = fd_dlexp(bg, np.zeros(bg.n), v, 1.0)
    assert np.max(np.abs(D - F)) < 1e-6 * max(1.0, np.max(np.abs(D)))


def test_dlexp_from_a_recentred_start_point():
    bg = ShrinkingSphere(2, 1.0)
    p = np.array([3.0, 1.0])
    v = np.array([0.2, -0.5])
    D = dlexp(bg, p, v, 1.0, tol=1e-12)
    F = fd_dlexp(bg, p, v, 1.0)
    assert np.max(np.abs(D - F)) < 1e-6 * np.max(np.abs(D))


def test_jacobi_bvp_and_conjugate_endpoint(fast_sphere_path, rng):
    path = shoot(ShrinkingSphere(2, 1.0), np.zeros(2), np.array([2.0, 1.0]), 1.0, tol=1e-12)
    for _ in range(3):
        w = rng.normal(size=2)
        U = jacobi_bvp(path, w)
        assert np.max(np.abs(U.u(path.s_max) - w)) < 1e-10
        assert np.max(np.abs(U.u(0.0))) == 0.0
    first = conjugate_scan(fast_sphere_path).points[0]
    with pytest.raises(ConjugateEndpoint):
        jacobi_bvp(fast_sphere_path, np.ones(2), s_end=first.s)


def test_endpoint_conjugate_is_flagged_not_counted():
    bg = ShrinkingSphere(2, 0.01)
    s_star = sphere_onsets(20.0, 1.0)[0]
    path = shoot(bg, np.zeros(2), np.array([20.0, 0.0]), s_star ** 2, tol=1e-12)
    report = conjugate_scan(path)
    assert report.endpoint_conjugate and report.points == []


def test_variation_field_check_first_order(rng):
    bg = ShrinkingSphere(2, 1.0)
    v, dv = np.array([1.5, -0.5]), rng.normal(size=2)
    d3 = variation_field_check(bg, np.zeros(2), v, dv, 1.0, 1e-3)
    d4 = variation_field_check(bg, np.zeros(2), v, dv, 1.0, 1e-4)
    assert d4 < 1e-3
    assert np.log10(d3 / d4) == pytest.approx(1.0, abs=0.2)


def test_scan_argument_validation(fast_sphere_path):
    with pytest.raises(ValueError):
        conjugate_scan(fast_sphere_path, sep=0.0)
    with pytest.raises(ValueError):
        jacobi_integrate(fast_sphere_path, np.zeros(2), np.ones(2), tol=-1.0)


def test_report_json(fast_sphere_path, tmp_path):
    report = conjugate_scan(fast_sphere_path)
    report.write(tmp_path / "c.json")
    import json
    data = json.loads((tmp_path / "c.json").read_text())
    assert data["total_multiplicity"] == 2 and len(data["points"]) == 2


def test_closed_form_angle_helper():
    # sanity check of the test oracle itself: angle(s) crosses pi exactly at the first onset
    s1 = sphere_onsets(20.0, 1.0)[0]
    assert sphere_angle(20.0, s1) == pytest.approx(np.pi, rel=1e-14)
