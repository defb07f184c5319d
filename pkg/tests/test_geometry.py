"""Core geometry: forms, domain families, classification, MC volume."""
import json

import numpy as np
import pytest

from reebkit.errors import MalformedDomainError
from reebkit.geometry import (
    Ball,
    Ellipsoid,
    ModelRegion,
    RadialPerturbation,
    domain_classify,
    domain_from_spec,
    domain_volume,
    eval_liouville,
    eval_symplectic,
    j_mult,
)
from reebkit.prng import DEFAULT_SEED, uniform_block


def random_points(n, scale=1.0, start=0):
    return (uniform_block(DEFAULT_SEED, start, n, 4) * 2 - 1) * scale


class TestForms:
    def test_symplectic_on_basis(self):
        e = np.eye(4)
        # omega0(e_x1, e_y1) = 1, omega0(e_x2, e_y2) = 1, mixed pairs vanish
        assert eval_symplectic(e[0], e[1]) == 1.0
        assert eval_symplectic(e[2], e[3]) == 1.0
        assert eval_symplectic(e[0], e[2]) == 0.0
        assert eval_symplectic(e[1], e[3]) == 0.0

    def test_antisymmetry_and_bilinearity(self):
        u, v = random_points(64), random_points(64, start=64)
        np.testing.assert_allclose(eval_symplectic(u, v), -eval_symplectic(v, u))
        np.testing.assert_allclose(
            eval_symplectic(2.5 * u, v), 2.5 * eval_symplectic(u, v), rtol=1e-14
        )

    def test_liouville_is_half_omega_of_position(self):
        x, v = random_points(128), random_points(128, start=128)
        np.testing.assert_array_equal(eval_liouville(x, v), 0.5 * eval_symplectic(x, v))

    def test_exterior_derivative_of_liouville_is_omega(self):
        # d(lambda0)(u, v) = u[lambda0(v)] - v[lambda0(u)] for constant u, v;
        # finite differences of the evaluation map recover omega0.
        x = random_points(32)
        u, v = random_points(32, start=32), random_points(32, start=96)
        h = 1e-6
        du = (eval_liouville(x + h * u, v) - eval_liouville(x - h * u, v)) / (2 * h)
        dv = (eval_liouville(x + h * v, u) - eval_liouville(x - h * v, u)) / (2 * h)
        np.testing.assert_allclose(du - dv, eval_symplectic(u, v), atol=1e-6)

    def test_j_mult_squares_to_minus_one(self):
        v = random_points(16)
        np.testing.assert_array_equal(j_mult(j_mult(v)), -v)

    def test_j_mult_compatible(self):
        # omega0(u, Ju) = |u|^2 > 0
        u = random_points(16)
        np.testing.assert_allclose(
            eval_symplectic(u, j_mult(u)), np.sum(u * u, axis=-1), rtol=1e-14
        )


class TestFamilies:
    def test_ellipsoid_value_outside(self):
        dom = Ellipsoid(1.0, 2.0)
        assert dom.value(np.array([1.0, 0.0, 0.0, 0.0])) == 3.141592653589793

    def test_euler_identity_on_boundary(self):
        # <x, grad G(x)> = 2 G(x) = 2 on the boundary, and > 0 everywhere
        for dom in (Ellipsoid(1.0, 2.0), Ball(np.pi), RadialPerturbation(0.05)):
            pts = dom.sample_boundary(1000)
            np.testing.assert_allclose(dom.value(pts), 1.0, atol=1e-12)
            pairing = np.sum(pts * dom.gradient(pts), axis=-1)
            np.testing.assert_allclose(pairing, 2.0, atol=1e-10)

    def test_gradient_matches_finite_differences(self):
        h = 1e-6
        eye = np.eye(4)
        for dom in (Ellipsoid(1.0, 2.0), Ball(2.0), RadialPerturbation(0.05)):
            pts = dom.boundary_project(random_points(40, start=12)) * 1.1
            grad = dom.gradient(pts)
            for k in range(4):
                fd = (dom.value(pts + h * eye[k]) - dom.value(pts - h * eye[k])) / (2 * h)
                np.testing.assert_allclose(grad[:, k], fd, atol=5e-6)

    def test_radial_perturbation_zero_epsilon_is_ball_pi(self):
        dom = RadialPerturbation(0.0)
        ball = Ball(np.pi)
        pts = random_points(200, scale=1.5)
        np.testing.assert_allclose(dom.value(pts), ball.value(pts), rtol=1e-13)
        np.testing.assert_allclose(dom.gradient(pts), ball.gradient(pts), rtol=1e-12)

    def test_radial_perturbation_homogeneity(self):
        dom = RadialPerturbation(0.05)
        pts = dom.sample_boundary(50)
        np.testing.assert_allclose(dom.value(3.0 * pts), 9.0, atol=1e-12)

    def test_boundary_projection_exact(self):
        for dom in (Ellipsoid(2.0, 0.7), RadialPerturbation(0.08)):
            pts = random_points(100, scale=2.0, start=7)
            pts = pts[np.linalg.norm(pts, axis=1) > 0.2]
            proj = dom.boundary_project(pts)
            np.testing.assert_allclose(dom.value(proj), 1.0, atol=1e-12)
            # projection is radial: proj = s * pts with s = G(pts)^(-1/2)
            s = 1.0 / np.sqrt(dom.value(pts))
            np.testing.assert_allclose(proj, pts * s[:, None], rtol=1e-13)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(MalformedDomainError):
            Ellipsoid(-1.0, 2.0)
        with pytest.raises(MalformedDomainError):
            Ball(0.0)
        with pytest.raises(MalformedDomainError):
            RadialPerturbation(0.05, coeffs=(1.0, 2.0, 3.0))

    def test_model_region_membership(self):
        ball = ModelRegion("ball", 1.0)
        cyl = ModelRegion("cylinder", 1.0)
        x = np.array([0.5, 0.0, 0.0, 0.0])
        far = np.array([0.0, 0.0, 9.0, 0.0])
        assert ball.contains(x) and cyl.contains(x)
        assert not ball.contains(far)
        assert cyl.contains(far)  # cylinder is unbounded in z2


class TestClassification:
    def test_regions(self):
        dom = Ellipsoid(1.0, 2.0)
        inside = np.zeros(4)
        boundary = dom.boundary_project(np.array([0.3, 0.1, -0.2, 0.5]))
        outside = boundary * 2
        assert domain_classify(dom, inside)["region"] == "inside"
        assert domain_classify(dom, boundary)["region"] == "boundary"
        assert domain_classify(dom, outside)["region"] == "outside"

    def test_batched(self):
        dom = Ball(1.0)
        pts = np.stack([np.zeros(4), dom.boundary_project(np.ones(4)), 5 * np.ones(4)])
        out = domain_classify(dom, pts)
        assert list(out["region"]) == ["inside", "boundary", "outside"]
        assert out["gradient"].shape == (3, 4)

    def test_tolerance_band(self):
        dom = Ball(np.pi)  # boundary = unit sphere; G(x) = |x|^2
        x = np.array([1.0 + 4e-10, 0.0, 0.0, 0.0])  # G - 1 = 8e-10 < tau_bd
        assert domain_classify(dom, x)["region"] == "boundary"
        assert domain_classify(dom, x, tol=1e-12)["region"] == "outside"


class TestVolume:
    def test_ball_volume(self):
        # vol B(a) = a^2/2; for a = pi this is pi^2/2 = 4.934802200544679
        out = domain_volume(Ball(np.pi), samples=500_000)
        assert abs(out["volume"] - 4.934802200544679) < 3 * out["std_error"]
        assert out["std_error"] < 0.02

    def test_ellipsoid_volume(self):
        # vol E(a, b) = ab/2
        out = domain_volume(Ellipsoid(1.0, 2.0), samples=500_000)
        assert abs(out["volume"] - 1.0) < 3 * out["std_error"]

    def test_deterministic(self):
        a = domain_volume(Ball(1.0), samples=100_000, seed=123)
        b = domain_volume(Ball(1.0), samples=100_000, seed=123)
        assert a == b
        c = domain_volume(Ball(1.0), samples=100_000, seed=124)
        assert c["volume"] != a["volume"]


class TestSpecIO:
    @pytest.mark.parametrize(
        "spec",
        [
            {"type": "ellipsoid", "a": 1.0, "b": 2.0},
            {"type": "ball", "a": 3.0},
            {"type": "radial", "epsilon": 0.05, "coeffs": [0.5, 0.15]},
        ],
    )
    def test_round_trip(self, spec, tmp_path):
        dom = domain_from_spec(spec)
        assert dom.to_spec() == spec
        p = tmp_path / "dom.json"
        p.write_text(json.dumps(dom.to_spec()))
        dom2 = domain_from_spec(json.loads(p.read_text()))
        assert dom2 == dom

    def test_radial_defaults(self):
        dom = domain_from_spec({"type": "radial", "epsilon": 0.1})
        assert dom.coeffs == (0.5, 0.15)

    def test_unknown_type(self):
        with pytest.raises(MalformedDomainError):
            domain_from_spec({"type": "polydisk", "a": 1.0})
