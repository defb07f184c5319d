"""Tests for disk surfaces of section and their return maps."""

import numpy as np
import pytest

from reebkit.errors import InconsistentInputError, SectionError
from reebkit.geometry import Ball, Ellipsoid, RadialPerturbation
from reebkit.reeb import find_closed_orbits
from reebkit.diskmaps import fixed_points_with_actions
from reebkit.strips import (
    enforce_translation_bands,
    genfun_from_stripmap,
    positive_hamiltonian_pipeline,
)
from reebkit.section import (
    binding_orbit_action,
    identity_distance,
    monotonized_strip,
    read_section_csv,
    section_area_check,
    section_lift,
    section_primitive,
    section_return_map,
    write_section_csv,
)

PI = np.pi
GRID = (32, 128)


@pytest.fixture(scope="module")
def ball_data():
    return section_return_map(Ball(PI), grid=GRID)


@pytest.fixture(scope="module")
def ellipsoid_data():
    return section_return_map(Ellipsoid(PI, 1.05 * PI), grid=GRID)


@pytest.fixture(scope="module")
def perturbed_dom():
    return RadialPerturbation(epsilon=0.01)


@pytest.fixture(scope="module")
def perturbed_data(perturbed_dom):
    return section_return_map(perturbed_dom, grid=GRID)


# ---------------------------------------------------------------------------
# Round sphere: the degree-1 return map is the identity and sigma is constant.


def test_ball_return_map_is_identity(ball_data):
    d = ball_data
    assert np.max(np.abs(d.R - d.r_nodes[:, None])) <= 1e-8
    assert np.max(np.abs(d.Theta_lift - d.theta_nodes[None, :])) <= 1e-8
    assert np.max(np.abs(d.sigma - PI)) <= 1e-8
    assert identity_distance(d) <= 1e-8
    assert d.degree == 1


def test_ball_binding_action(ball_data):
    assert abs(ball_data.binding_action - PI) <= 1e-12
    assert abs(binding_orbit_action(Ball(PI)) - PI) <= 1e-12


def test_ball_pullback_density_is_flat(ball_data):
    d = ball_data
    assert np.max(np.abs(d.F - d.r_nodes[:, None])) <= 1e-10


def test_ball_degree_zero_rotation(ball_data):
    # Degree-0 convention: every point advances one full turn per return.
    assert abs(ball_data.rotation_angle(0) - 2.0 * PI) <= 1e-8
    assert abs(ball_data.rotation_angle(1)) <= 1e-8


def test_ball_fixed_point_scan_reports_foliation(ball_data):
    rep = fixed_points_with_actions(
        section_lift(ball_data), section_primitive(ball_data)
    )
    assert rep.foliated
    assert rep.points == ()


def test_ball_area_preservation(ball_data):
    assert section_area_check(ball_data) <= 1e-8


# ---------------------------------------------------------------------------
# Ellipsoid E(pi, 1.05 pi): rigid rotation with constant return time.


def test_ellipsoid_rigid_rotation(ellipsoid_data):
    d = ellipsoid_data
    advance = d.Theta_lift - d.theta_nodes[None, :]
    assert np.max(np.abs(advance - 0.1 * PI)) <= 1e-8
    assert np.max(np.abs(d.R - d.r_nodes[:, None])) <= 1e-8
    assert np.max(np.abs(d.sigma - 1.05 * PI)) <= 1e-8


def test_ellipsoid_rotation_matches_reeb_prediction(ellipsoid_data):
    # Degree-0 rotation angle must equal 2*pi*b/a from the closed-form flow.
    assert abs(ellipsoid_data.rotation_angle(0) - 2.0 * PI * 1.05) <= 1e-6


def test_ellipsoid_area_preservation(ellipsoid_data):
    assert section_area_check(ellipsoid_data) <= 1e-8


def test_ellipsoid_center_sigma_matches_orbit_action(ellipsoid_data):
    """Return time at the interior fixed point = action of the short-axis
    orbit found independently by the shooting solver."""
    d = ellipsoid_data
    rep = fixed_points_with_actions(section_lift(d), section_primitive(d))
    assert not rep.foliated
    assert len(rep.points) == 1
    fp = rep.points[0]
    assert fp.r <= 1e-6
    assert fp.flag == "elliptic"
    assert fp.sigma > 0.0  # positive degree-1 action
    sigma0 = fp.sigma + d.binding_action
    orbits = find_closed_orbits(
        Ellipsoid(PI, 1.05 * PI), seeds=12, max_period=8.0, seed=3
    )
    actions = [o.action for o in orbits]
    assert min(abs(sigma0 - a) for a in actions) <= 1e-5
    assert min(abs(d.binding_action - a) for a in actions) <= 1e-5


def test_ellipsoid_lift_degree_shift(ellipsoid_data):
    lift = section_lift(ellipsoid_data)
    assert lift.degree == 1
    assert lift.provenance == "section_data"
    shifted = lift.degree_shift(1)
    assert shifted.degree == 0
    assert np.max(np.abs(
        shifted.Theta_lift - lift.Theta_lift - 2.0 * PI
    )) <= 1e-12
    # Degree-0 action of the rigid rotation is the constant return time.
    from reebkit.diskmaps import action_of_lift
    sigma0 = action_of_lift(shifted, section_primitive(ellipsoid_data))
    assert np.max(np.abs(sigma0 - 1.05 * PI)) <= 1e-6


# ---------------------------------------------------------------------------
# Near-round perturbation: end-to-end demo chain.


def test_perturbed_lift_close_to_identity(perturbed_data):
    dist = identity_distance(perturbed_data)
    assert dist <= 0.05
    assert dist > 1e-4  # the perturbation genuinely moves points


def test_perturbed_area_preservation(perturbed_data):
    assert section_area_check(perturbed_data) <= 1e-4


def test_perturbed_center_fixed_point(perturbed_data, perturbed_dom):
    d = perturbed_data
    rep = fixed_points_with_actions(section_lift(d), section_primitive(d))
    assert not rep.foliated
    assert len(rep.points) >= 1
    for fp in rep.points:
        assert fp.sigma > 0.0
    center = rep.points[0]
    assert center.r <= 1e-6
    sigma0 = center.sigma + d.binding_action
    orbits = find_closed_orbits(perturbed_dom, seeds=24, max_period=8.0, seed=5)
    actions = [o.action for o in orbits]
    assert min(abs(sigma0 - a) for a in actions) <= 1e-5


def test_perturbed_monotonized_pipeline_positive(perturbed_data):
    strip, dens = monotonized_strip(perturbed_data)
    assert np.min(np.diff(strip.R, axis=0)) > 0.0
    genfun = genfun_from_stripmap(strip, dens)
    genfun = enforce_translation_bands(genfun, dens)
    report = positive_hamiltonian_pipeline(genfun, dens, n_steps=8)
    assert report.min_interior > 0.0


# ---------------------------------------------------------------------------
# Failure paths and interchange.


def test_budget_exceeded_names_node():
    with pytest.raises(SectionError, match=r"budget.*node \(i=\d+, j=\d+\)"):
        section_return_map(Ball(PI), grid=(8, 16), t_budget=0.5)


def test_section_csv_roundtrip(tmp_path, ellipsoid_data):
    path = tmp_path / "section.csv"
    write_section_csv(ellipsoid_data, path)
    back = read_section_csv(path)
    assert np.array_equal(back.R, ellipsoid_data.R)
    assert np.array_equal(back.Theta_lift, ellipsoid_data.Theta_lift)
    assert np.array_equal(back.sigma, ellipsoid_data.sigma)
    assert back.binding_action == ellipsoid_data.binding_action
    assert back.degree == ellipsoid_data.degree

    path2 = tmp_path / "section2.csv"
    write_section_csv(ellipsoid_data, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_section_csv_with_domain_rebuilds_forms(tmp_path, ellipsoid_data):
    path = tmp_path / "section.csv"
    write_section_csv(ellipsoid_data, path)
    back = read_section_csv(path, dom=Ellipsoid(PI, 1.05 * PI))
    assert np.max(np.abs(back.F - ellipsoid_data.F)) <= 1e-12
    assert np.max(np.abs(back.lam_theta - ellipsoid_data.lam_theta)) <= 1e-12


def test_section_csv_rejects_mangled_header(tmp_path, ball_data):
    path = tmp_path / "section.csv"
    write_section_csv(ball_data, path)
    text = path.read_text(encoding="utf-8")
    path.write_text(text.replace("binding_action", "bonding_action"), encoding="utf-8")
    with pytest.raises(InconsistentInputError, match="header"):
        read_section_csv(path)
