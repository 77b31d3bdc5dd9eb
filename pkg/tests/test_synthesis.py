import numpy as np
import pytest
from scipy.linalg import expm

from dsest import (
    DescriptorSystem,
    InputSignal,
    SynthesisError,
    simulate,
    synthesize_estimator,
)
from conftest import random_system


def ramp():
    return InputSignal.polynomial([[0.0, 1.0]])


class TestWorkedExample:
    def test_order_and_spectrum(self, ex_system):
        est, trace = synthesize_estimator(ex_system)
        assert est.s == 2
        assert trace.eta_folded
        eigs = np.sort(np.linalg.eigvals(est.N))
        assert np.abs(eigs - np.array([-1.0, -1.0])).max() < 1e-6
        # trace and determinant are exact for the defective pair
        assert abs(np.trace(est.N) + 2.0) < 1e-9
        assert abs(np.linalg.det(est.N) - 1.0) < 1e-9

    def test_matched_initialization_tracks_exactly(self, ex_system):
        est, trace = synthesize_estimator(ex_system)
        x0 = np.array([1.0, 2.0, 3.0, 0.0])
        w0 = trace.tracked_state(x0)
        tr = simulate(ex_system, est, x0, w0, u=ramp(), T=10.0)
        assert np.abs(tr.e).max() < 1e-9

    def test_error_dynamics_are_linear_in_w_offset(self, ex_system):
        est, trace = synthesize_estimator(ex_system)
        x0 = np.array([0.5, -2.0, 1.5, 0.0])
        delta = np.array([3.0, -1.0])
        w0 = trace.tracked_state(x0) + delta
        tr = simulate(ex_system, est, x0, w0, u=ramp(), T=10.0)
        ref = np.stack([est.R @ expm(est.N * tk) @ delta for tk in tr.t],
                       axis=1)
        assert np.abs(tr.e - ref).max() < 1e-8

    def test_stacked_block_shapes(self, ex_system):
        est, trace = synthesize_estimator(ex_system)
        # H and M consume the stacked input (u; y)
        assert est.H.shape == (2, ex_system.l + ex_system.p)
        assert est.M.shape == (ex_system.r, ex_system.l + ex_system.p)
        assert est.R.shape == (ex_system.r, 2)


class TestRefusal:
    def test_sigma_violation_refused(self, sigma_violating_system):
        with pytest.raises(SynthesisError,
                           match="no functional ODE estimator exists"):
            synthesize_estimator(sigma_violating_system)

    def test_unstable_unobserved_refused(self):
        # x1' = x1 unmeasured, z = x1: detectability fails.
        sys = DescriptorSystem.from_matrices(
            np.eye(2), np.diag([1.0, -1.0]), np.zeros((2, 0)),
            np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]))
        with pytest.raises(SynthesisError,
                           match="no functional ODE estimator exists"):
            synthesize_estimator(sys)


class TestDegenerateShapes:
    def test_algebraic_functional_needs_no_state(self, sigma_causal_system):
        est, trace = synthesize_estimator(sigma_causal_system)
        assert est.s == 0
        # z = x2 = -u identically; the consistent x0 is (-u'(0), -u(0))
        tr = simulate(sigma_causal_system, est, [-2.0, 0.0], np.zeros(0),
                      u=InputSignal.sinusoid([1.0], 2.0), T=5.0)
        assert np.abs(tr.e).max() < 1e-9

    def test_overdetermined_plant(self):
        E = np.array([[1.0], [0.0]])
        A = np.array([[-1.0], [1.0]])
        B = np.array([[1.0], [-1.0]])
        sys = DescriptorSystem.from_matrices(
            E, A, B, np.zeros((0, 1)), np.array([[1.0]]))
        est, trace = synthesize_estimator(sys)
        tr = simulate(sys, est,
                      [1.0],
                      trace.tracked_state([1.0]) if est.s else np.zeros(0),
                      u=InputSignal.polynomial([[1.0]]), T=5.0)
        assert np.abs(tr.e).max() < 1e-8

    def test_plant_copy_when_nothing_is_measured(self):
        # Stable unmeasured plant: the estimator must simulate it outright.
        A = np.array([[-1.0, 1.0], [0.0, -2.0]])
        sys = DescriptorSystem.from_matrices(
            np.eye(2), A, np.array([[1.0], [0.0]]), np.zeros((0, 2)),
            np.eye(2))
        est, trace = synthesize_estimator(sys)
        assert est.s == 2
        x0 = np.array([2.0, -1.0])
        tr = simulate(sys, est, x0, trace.tracked_state(x0),
                      u=InputSignal.sinusoid([1.0], 1.0), T=10.0)
        assert np.abs(tr.e).max() < 1e-8


class TestRandomProperties:
    def test_order_bounded_and_estimator_sound(self):
        rng = np.random.default_rng(77)
        synthesized = 0
        for _ in range(120):
            sys = random_system(rng, max_dim=4)
            try:
                est, trace = synthesize_estimator(sys)
            except SynthesisError:
                continue
            synthesized += 1
            assert est.s <= sys.n
            if est.s:
                assert np.linalg.eigvals(est.N).real.max() < 0
        assert synthesized >= 10
