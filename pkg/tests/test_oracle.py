import numpy as np
import pytest

from lmorse import (FieldAlong, NonMonotoneTau, ShrinkingCylinder, ShrinkingSphere, StaticEuclidean,
                    index_form, llength, shoot)
from lmorse.errors import StepTooSmall
from lmorse.oracle import (DiscreteCurve, discrete_llength, fd_first_variation,
                           fd_second_variation, refinement_slope, second_difference)


def test_flat_straight_line():
    bg = StaticEuclidean(2)
    curve = DiscreteCurve.from_function(lambda t: 2 * np.sqrt(t) * np.array([1.0, 0.0]), 1.0, 201)
    assert discrete_llength(bg, curve) == pytest.approx(2.0, abs=1e-5)


def test_constant_sphere_curve():
    bg = ShrinkingSphere(2, 1.0)
    curve = DiscreteCurve.from_function(lambda t: np.array([0.3, 0.2]), 1.0, 2001)
    exact = 2 - np.sqrt(2) * np.arctan(np.sqrt(2))
    assert exact == pytest.approx(0.6490, abs=1e-4)
    assert discrete_llength(bg, curve) == pytest.approx(exact, abs=1e-4)


def test_non_monotone_and_short_inputs():
    with pytest.raises(NonMonotoneTau):
        DiscreteCurve([0.0, 0.5, 0.4], np.zeros((3, 2)), 0)
    with pytest.raises(NonMonotoneTau):
        DiscreteCurve([-0.1, 0.5, 0.7], np.zeros((3, 2)), 0)
    with pytest.raises(ValueError):
        DiscreteCurve([0.0, 0.5], np.zeros((2, 2)), 0)


@pytest.mark.parametrize("bg", [ShrinkingSphere(2, 1.0), ShrinkingCylinder(3, 1.0)])
def test_discrete_length_converges_to_quadrature(bg, rng):
    v = rng.normal(size=bg.n)
    path = shoot(bg, np.zeros(bg.n), v, 1.0, tol=1e-12)
    exact = llength(path).value
    errs = [abs(discrete_llength(bg, DiscreteCurve.from_path(path, m)) - exact)
            for m in (201, 401, 801)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - 2.0) < 0.2)


def test_refinement_slope_on_curved_test_curve():
    bg = ShrinkingSphere(2, 1.0)
    # x(tau) = (s, s^2 / 2) in one chart; reference from a 64001-sample run (error ~1e-10)
    def fn(t):
        s = np.sqrt(t)
        return np.array([s, 0.5 * s * s])

    fine = discrete_llength(bg, DiscreteCurve.from_function(fn, 1.0, 64001))
    slope = refinement_slope(bg, fn, 1.0, fine)
    assert slope == pytest.approx(2.0, abs=0.1)


def test_csv_round_trip(tmp_path):
    bg = ShrinkingSphere(2, 0.01)
    path = shoot(bg, np.zeros(2), np.array([20.0, 0.0]), 1.0)
    f = tmp_path / "p.csv"
    path.to_csv(f, num=2001)
    curve = DiscreteCurve.from_csv(f)
    direct = discrete_llength(bg, DiscreteCurve.from_path(path, 2001))
    assert discrete_llength(bg, curve) == pytest.approx(direct, rel=1e-12)
    assert direct == pytest.approx(llength(path).value, rel=1e-3)
    (tmp_path / "empty.csv").write_text("s,tau,chart,x0,x1\n")
    with pytest.raises(ValueError):
        DiscreteCurve.from_csv(tmp_path / "empty.csv")


def test_flat_second_variation_examples():
    bg = StaticEuclidean(2)
    path = shoot(bg, np.zeros(2), np.array([1.0, 0.0]), 1.0)
    Y = FieldAlong.polynomial([[0, 0], [0, 1.0]], 0.0, 1.0)
    assert fd_second_variation(bg, path, Y) == pytest.approx(1.0, abs=1e-6)
    zero = FieldAlong.polynomial([[0.0, 0.0]], 0.0, 1.0)
    assert fd_second_variation(bg, path, zero) == 0.0


def test_second_difference_error_is_quadratic_in_eps():
    # the O(h^2) sample error is common to every eps, so compare successive estimates
    bg = ShrinkingSphere(2, 1.0)
    path = shoot(bg, np.zeros(2), np.array([1.0, 0.5]), 1.0, tol=1e-12)
    Y = FieldAlong.bump([1.0, 0.3], 0.0, path.s_max)
    d = [second_difference(bg, path, Y, e, 8001)[0] for e in (4e-2, 2e-2, 1e-2)]
    assert (d[1] - d[2]) / (d[0] - d[1]) == pytest.approx(0.25, abs=0.02)
    rich = fd_second_variation(bg, path, Y, eps=(2e-2, 1e-2), samples=8001)
    assert abs(rich - index_form(path, Y, Y)) < 1e-5 * abs(rich)


def test_step_too_small():
    bg = ShrinkingSphere(2, 1.0)
    path = shoot(bg, np.zeros(2), np.array([1.0, 0.5]), 1.0)
    Y = FieldAlong.bump([1.0, 0.0], 0.0, path.s_max)
    with pytest.raises(StepTooSmall):
        fd_second_variation(bg, path, Y, eps=1e-8)


def test_first_variation_examples():
    bg = StaticEuclidean(2)
    path = shoot(bg, np.zeros(2), np.array([1.0, 0.0]), 1.0)
    V = FieldAlong.polynomial([[0, 0], [1.0, 0]], 0.0, 1.0)        # s e1: only the endpoint moves
    assert fd_first_variation(bg, path, V) == pytest.approx(2.0, abs=1e-8)
    perp = FieldAlong.polynomial([[0, 0], [0, 1.0]], 0.0, 1.0)
    assert abs(fd_first_variation(bg, path, perp)) < 1e-8


def test_geodesic_is_stationary():
    bg = ShrinkingSphere(2, 1.0)
    path = shoot(bg, np.zeros(2), np.array([1.0, 0.5]), 1.0, tol=1e-12)
    V = FieldAlong.bump([0.4, 1.0], 0.0, path.s_max)
    assert abs(fd_first_variation(bg, path, V, samples=32001)) < 1e-5
