"""Sp(2) arcs: rotation-number definitions, positive paths, classification."""
import numpy as np
import pytest

from reebkit.errors import ResolutionError
from reebkit.sp2 import (
    J2,
    Sp2Arc,
    classify_monodromy,
    identity_arc,
    positive_path_check,
    retract_to_rotation,
    rotation_arc,
    rotation_number_of_arc,
    sample_generator,
)

TWO_PI = 2 * np.pi


def conditioned_arc(seed, scale=1.5):
    """Random smooth arc continued to end at its polar rotation part."""
    raw = Sp2Arc.from_generator(sample_generator(seed, scale=scale), samples=2048)
    return retract_to_rotation(raw)


class TestConstruction:
    def test_must_start_at_identity(self):
        ts = np.linspace(0, 1, 3)
        mats = np.broadcast_to(2 * np.eye(2), (3, 2, 2)).copy()
        with pytest.raises(ValueError, match="identity"):
            Sp2Arc(ts, mats)

    def test_det_validated(self):
        ts = np.linspace(0, 1, 3)
        mats = np.stack([np.eye(2), np.eye(2), np.diag([1.0, 1.1])])
        with pytest.raises(ValueError, match="SL"):
            Sp2Arc(ts, mats)

    def test_generator_arc_stays_in_sl2(self):
        arc = Sp2Arc.from_generator(sample_generator(3, scale=2.0), samples=1024)
        dets = np.linalg.det(arc.matrices)
        np.testing.assert_allclose(dets, 1.0, atol=1e-12)

    def test_retraction_ends_at_rotation(self):
        arc = conditioned_arc(11)
        end = arc.endpoint
        np.testing.assert_allclose(end.T @ end, np.eye(2), atol=1e-10)


class TestRotationNumber:
    def test_rotation_arc_both_methods(self):
        arc = rotation_arc(TWO_PI * 0.3)
        assert rotation_number_of_arc(arc, "eigenvalue_lift") == pytest.approx(0.3, abs=1e-12)
        assert rotation_number_of_arc(arc, "winding_limit") == pytest.approx(0.3, abs=1e-9)

    def test_identity_arc_is_zero(self):
        arc = identity_arc()
        assert rotation_number_of_arc(arc, "eigenvalue_lift") == 0.0
        assert rotation_number_of_arc(arc, "winding_limit") == 0.0

    def test_unit_generator_arc(self):
        # Phi(t) = exp(J2 t): rotation by 1 radian at t = 1
        arc = Sp2Arc.from_generator(lambda t: np.eye(2), samples=512)
        expected = 1.0 / TWO_PI  # 0.15915494309189535
        assert rotation_number_of_arc(arc, "eigenvalue_lift") == pytest.approx(
            expected, abs=1e-9
        )
        assert rotation_number_of_arc(arc, "winding_limit") == pytest.approx(
            expected, abs=1e-6
        )

    def test_multiturn_lift(self):
        arc = rotation_arc(TWO_PI * 2.3, samples=2048)
        assert rotation_number_of_arc(arc, "eigenvalue_lift") == pytest.approx(2.3, abs=1e-10)
        assert rotation_number_of_arc(arc, "winding_limit") == pytest.approx(2.3, abs=1e-9)

    def test_negative_rotation(self):
        arc = rotation_arc(-TWO_PI)
        assert rotation_number_of_arc(arc, "eigenvalue_lift") == pytest.approx(-1.0, abs=1e-10)

    def test_methods_agree_on_rotation_ended_arcs(self):
        # Arcs conditioned to end at a rotation: the winding per period is
        # then starting-vector independent, so the finite-n winding slope
        # equals the limit exactly and both definitions can be compared at
        # tight tolerance.
        for seed in range(25):
            arc = conditioned_arc(100 + seed)
            a = rotation_number_of_arc(arc, "eigenvalue_lift")
            b = rotation_number_of_arc(arc, "winding_limit")
            assert abs(a - b) <= 1e-6, f"seed {seed}: {a} vs {b}"

    def test_methods_agree_loosely_on_generic_arcs(self):
        # Generic elliptic endpoints homogenize at O(1/n); just confirm the
        # two definitions track each other at coarse tolerance.
        for seed in range(10):
            arc = Sp2Arc.from_generator(sample_generator(300 + seed, scale=1.5), samples=2048)
            a = rotation_number_of_arc(arc, "eigenvalue_lift")
            b = rotation_number_of_arc(arc, "winding_limit", n_iter=256)
            assert abs(a - b) <= 5e-3

    def test_coarse_sampling_raises(self):
        # rotation by 2pi seen at 3 samples: every increment is half a turn
        ts = np.linspace(0, 1, 3)
        ang = TWO_PI * ts
        mats = np.empty((3, 2, 2))
        mats[:, 0, 0] = np.cos(ang)
        mats[:, 0, 1] = -np.sin(ang)
        mats[:, 1, 0] = np.sin(ang)
        mats[:, 1, 1] = np.cos(ang)
        arc = Sp2Arc(ts, mats)
        with pytest.raises(ResolutionError):
            rotation_number_of_arc(arc, "winding_limit")

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            rotation_number_of_arc(identity_arc(), "guesswork")


class TestPositivePaths:
    def test_unit_generator_is_positive(self):
        arc = Sp2Arc.from_generator(lambda t: np.eye(2), samples=512)
        out = positive_path_check(arc)
        assert out["is_positive"]
        assert out["min_eigenvalue"] == pytest.approx(1.0, abs=1e-5)
        assert out["rho"] > 0

    def test_hyperbolic_generator_not_positive(self):
        # Phi(t) = exp(t D), D = diag(mu, -mu): S = -J2 D is indefinite
        mu = 0.8
        d = np.diag([mu, -mu])

        def s_of_t(t):
            return -J2 @ d

        arc = Sp2Arc.from_generator(s_of_t, samples=512)
        out = positive_path_check(arc)
        assert not out["is_positive"]
        assert out["rho"] == pytest.approx(0.0, abs=1e-12)
        assert rotation_number_of_arc(arc, "winding_limit") == pytest.approx(0.0, abs=1e-6)

    def test_negative_rotation_not_positive(self):
        arc = rotation_arc(-TWO_PI, samples=1024)
        out = positive_path_check(arc)
        assert not out["is_positive"]
        assert out["min_eigenvalue"] == pytest.approx(-TWO_PI, abs=1e-4)
        assert out["rho"] == pytest.approx(-1.0, abs=1e-10)

    def test_random_positive_arcs_have_positive_rho(self):
        for seed in range(25):
            gen = sample_generator(500 + seed, positive=True, scale=1.0)
            arc = Sp2Arc.from_generator(gen, samples=1024)
            out = positive_path_check(arc)
            assert out["is_positive"], f"seed {seed}: FD min eig {out['min_eigenvalue']}"
            assert out["rho"] > 0, f"seed {seed}: rho = {out['rho']}"


class TestClassification:
    def test_elliptic(self):
        assert classify_monodromy(rotation_arc(1.0).endpoint) == "elliptic"

    def test_hyperbolic_signs(self):
        assert classify_monodromy(np.diag([2.0, 0.5])) == "pos_hyperbolic"
        assert classify_monodromy(np.diag([-2.0, -0.5])) == "neg_hyperbolic"

    def test_degenerate(self):
        assert classify_monodromy(np.eye(2)) == "degenerate"
        shear = np.array([[1.0, 0.3], [0.0, 1.0]])
        assert classify_monodromy(shear) == "degenerate"
        near_id = rotation_arc(1e-8).endpoint
        assert classify_monodromy(near_id) == "degenerate"
