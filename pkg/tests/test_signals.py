import numpy as np
import pytest

from dsest import InputSignal


class TestConstructors:
    def test_zero(self):
        u = InputSignal.zero(3)
        assert u.dim == 3
        assert np.allclose(u(0.7), np.zeros(3))

    def test_polynomial_values(self):
        # component 0: 1 + 2t, component 1: t^2
        u = InputSignal.polynomial([[1.0, 2.0], [0.0, 0.0, 1.0]])
        t = np.linspace(0.0, 2.0, 11)
        vals = u.eval(t)
        assert vals.shape == (2, 11)
        assert np.allclose(vals[0], 1.0 + 2.0 * t)
        assert np.allclose(vals[1], t ** 2)

    def test_sinusoid_values(self):
        u = InputSignal.sinusoid([2.0], 3.0, phase=0.5)
        t = np.linspace(0.0, 1.0, 7)
        assert np.allclose(u.eval(t)[0], 2.0 * np.sin(3.0 * t + 0.5))

    def test_probe_values(self):
        # sin((t + 1)^2) / (t + 1)^2 on the shifted grid
        u = InputSignal.probe(2, 1)
        t = np.linspace(0.0, 5.0, 13)
        ref = np.sin((t + 1.0) ** 2) / (t + 1.0) ** 2
        assert np.allclose(u.eval(t)[0], ref)

    def test_probe_component_placement(self):
        u = InputSignal.probe(1, 3, component=2)
        v = u(1.3)
        assert v[0] == 0.0 and v[1] == 0.0 and v[2] != 0.0


class TestCalculus:
    def test_polynomial_derivatives(self):
        u = InputSignal.polynomial([[0.0, 0.0, 0.0, 1.0]])  # t^3
        t = np.array([0.5, 1.0, 2.0])
        assert np.allclose(u.eval(t, order=1)[0], 3.0 * t ** 2)
        assert np.allclose(u.eval(t, order=2)[0], 6.0 * t)
        assert np.allclose(u.eval(t, order=3)[0], 6.0)
        assert np.allclose(u.eval(t, order=4)[0], 0.0)

    def test_derivative_object_matches_eval_order(self):
        u = InputSignal.sinusoid([1.0], 2.0)
        du = u.derivative()
        t = np.linspace(0.0, 3.0, 17)
        assert np.allclose(du.eval(t), u.eval(t, order=1))

    def test_probe_derivative_finite_difference(self):
        u = InputSignal.probe(2, 1)
        t0, h = 1.7, 1e-6
        fd = (u(t0 + h)[0] - u(t0 - h)[0]) / (2 * h)
        assert abs(u.eval(np.array([t0]), order=1)[0, 0] - fd) < 1e-6


class TestAlgebra:
    def test_sum_and_scale(self):
        a = InputSignal.polynomial([[1.0]])
        b = InputSignal.sinusoid([1.0], 1.0)
        t = np.linspace(0.0, 2.0, 9)
        s = (a + b).scale(2.0)
        assert np.allclose(s.eval(t)[0], 2.0 * (1.0 + np.sin(t)))

    def test_dim_mismatch_rejected(self):
        a = InputSignal.zero(1)
        b = InputSignal.zero(2)
        with pytest.raises(Exception):
            _ = a + b


class TestShapes:
    def test_scalar_time(self):
        u = InputSignal.polynomial([[0.0, 1.0], [1.0]])
        v = u(2.0)
        assert v.shape == (2,)
        assert np.allclose(v, [2.0, 1.0])

    def test_zero_dim_signal(self):
        u = InputSignal.zero(0)
        t = np.linspace(0.0, 1.0, 5)
        assert u.eval(t).shape == (0, 5)
        assert u(0.3).shape == (0,)
