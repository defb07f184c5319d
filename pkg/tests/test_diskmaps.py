"""Disk map lifts: actions, Calabi, action identities, fixed points."""
import dataclasses

import numpy as np
import pytest

from reebkit.diskmaps import (
    DiskMapLift,
    TimeDepHamiltonianDisk,
    action_of_lift,
    calabi,
    compose_lifts,
    fixed_points_with_actions,
    flow_from_hamiltonian,
    inverse_lift,
    perturbed_primitive,
    primitive_exterior_derivative_error,
    pullback_residual,
    quadratic_hamiltonian,
    read_lift_csv,
    sample_hamiltonian,
    standard_area_form,
    standard_primitive,
    write_lift_csv,
)
from reebkit.errors import BoundaryDegeneracyError, InconsistentLiftError
from reebkit.gridtools import PeriodicBicubic, TWO_PI

GRID = (64, 256)
N_STEPS = 128


def _u_poly():
    u = lambda x, y: 0.05 * (x * x - 0.3 * y + x * y * y)
    gu = lambda x, y: (0.05 * (2 * x + y * y), 0.05 * (-0.3 + 2 * x * y))
    return u, gu


@pytest.fixture(scope="module")
def lam():
    return standard_primitive()


@pytest.fixture(scope="module")
def rotation_lift():
    return flow_from_hamiltonian(quadratic_hamiltonian(0.7), grid=GRID, n_steps=N_STEPS)


@pytest.fixture(scope="module")
def random_pair():
    a = flow_from_hamiltonian(sample_hamiltonian(3), grid=GRID, n_steps=N_STEPS)
    b = flow_from_hamiltonian(sample_hamiltonian(4), grid=GRID, n_steps=N_STEPS)
    return a, b


@pytest.fixture(scope="module")
def random_actions(random_pair, lam):
    a, b = random_pair
    return (
        action_of_lift(a, lam, n_steps=N_STEPS),
        action_of_lift(b, lam, n_steps=N_STEPS),
    )


def test_primitive_is_primitive_of_area_form(lam):
    form = standard_area_form()
    assert primitive_exterior_derivative_error(lam, form) < 1e-6
    u, gu = _u_poly()
    assert primitive_exterior_derivative_error(perturbed_primitive(lam, u, gu), form) < 1e-6


def test_rotation_action_is_half_angle(rotation_lift, lam):
    sigma = action_of_lift(rotation_lift, lam, n_steps=N_STEPS)
    assert np.max(np.abs(sigma - 0.35)) < 1e-10
    assert pullback_residual(rotation_lift, lam, sigma) < 1e-5


def test_rotation_grid_is_rigid_rotation(rotation_lift):
    r, th = rotation_lift.r_nodes[:, None], rotation_lift.theta_nodes[None, :]
    assert np.max(np.abs(rotation_lift.R - r)) < 1e-9
    assert np.max(np.abs(rotation_lift.Theta_lift - (th + 0.7))) < 1e-9


def test_rotation_calabi(rotation_lift, lam):
    assert abs(calabi(rotation_lift, lam, n_steps=N_STEPS) - 0.35 * np.pi) < 1e-4


def test_full_rotation_action_is_pi(lam):
    lift = flow_from_hamiltonian(quadratic_hamiltonian(TWO_PI), grid=(48, 192), n_steps=N_STEPS)
    sigma = action_of_lift(lift, lam, n_steps=N_STEPS)
    assert np.max(np.abs(sigma - np.pi)) < 1e-9
    th = lift.theta_nodes[None, :]
    assert np.max(np.abs(lift.Theta_lift - (th + TWO_PI))) < 1e-5
    assert fixed_points_with_actions(lift, lam).foliated


def test_identity_flow_is_foliated(lam):
    lift = flow_from_hamiltonian(quadratic_hamiltonian(0.0), grid=(32, 128), n_steps=16)
    report = fixed_points_with_actions(lift, lam)
    assert report.foliated and report.points == ()
    assert np.max(np.abs(action_of_lift(lift, lam, n_steps=16))) < 1e-12


def test_rotation_fixed_point_origin(rotation_lift, lam):
    report = fixed_points_with_actions(rotation_lift, lam)
    assert not report.foliated
    assert len(report.points) == 1
    p = report.points[0]
    assert abs(p.z) < 1e-9
    assert abs(p.sigma - 0.35) < 1e-8
    assert p.flag == "elliptic"


def test_area_preservation_of_random_lifts(random_pair):
    a, b = random_pair
    assert a.area_preservation_error() < 1e-4
    assert b.area_preservation_error() < 1e-4


def test_residual_enforced_on_random_lifts(random_pair, lam, random_actions):
    a, _ = random_pair
    assert pullback_residual(a, lam, random_actions[0]) < 1e-5


def test_action_identity_primitive_change(random_pair, lam, random_actions):
    """sigma_{lambda + du} = sigma_lambda + u(phi) - u."""
    a, _ = random_pair
    u, gu = _u_poly()
    sigma_u = action_of_lift(a, perturbed_primitive(lam, u, gu), n_steps=N_STEPS)
    r, th = a.r_nodes[:, None], a.theta_nodes[None, :]
    x0, y0 = r * np.cos(th), r * np.sin(th)
    x1, y1 = a.R * np.cos(a.Theta_lift), a.R * np.sin(a.Theta_lift)
    rhs = random_actions[0] + u(x1, y1) - u(x0, y0)
    assert np.max(np.abs(sigma_u - rhs)) < 1e-5


def test_action_identity_composition(random_pair, lam, random_actions):
    """sigma_{psi o phi} = sigma_psi(phi) + sigma_phi."""
    a, b = random_pair
    comp = compose_lifts(b, a, n_steps=2 * N_STEPS)
    sigma_c = action_of_lift(comp, lam, n_steps=2 * N_STEPS)
    sb = PeriodicBicubic(b.r_nodes, b.theta_nodes, random_actions[1])
    rhs = sb(a.R, np.mod(a.Theta_lift, TWO_PI)) + random_actions[0]
    assert np.max(np.abs(sigma_c - rhs)) < 1e-5
    # the composed grid is the pointwise composition of the maps
    za = a.R * np.exp(1j * a.Theta_lift)
    direct = b.map_cartesian(za.ravel()).reshape(za.shape)
    composed = comp.R * np.exp(1j * comp.Theta_lift)
    assert np.max(np.abs(direct - composed)) < 1e-6


def test_action_identity_inverse(random_pair, lam, random_actions):
    """sigma_{phi^{-1}} = -sigma_phi(phi^{-1})."""
    a, _ = random_pair
    inv = inverse_lift(a, n_steps=N_STEPS)
    sigma_inv = action_of_lift(inv, lam, n_steps=N_STEPS)
    sa = PeriodicBicubic(a.r_nodes, a.theta_nodes, random_actions[0])
    rhs = -sa(inv.R, np.mod(inv.Theta_lift, TWO_PI))
    assert np.max(np.abs(sigma_inv - rhs)) < 1e-5
    # phi^{-1} o phi is the identity pointwise
    za = a.R * np.exp(1j * a.Theta_lift)
    z_nodes = a.r_nodes[:, None] * np.exp(1j * a.theta_nodes[None, :])
    assert np.max(np.abs(inv.map_cartesian(za.ravel()).reshape(za.shape) - z_nodes)) < 1e-6


def test_calabi_additive_under_composition(random_pair, lam):
    a, b = random_pair
    comp = compose_lifts(b, a, n_steps=2 * N_STEPS)
    total = calabi(comp, lam, n_steps=2 * N_STEPS)
    parts = calabi(a, lam, n_steps=N_STEPS) + calabi(b, lam, n_steps=N_STEPS)
    assert abs(total - parts) < 1e-4


def test_autonomous_fixed_points_action_equals_hamiltonian(lam):
    """Fixed points of an autonomous flow are the critical points of H and
    carry action sigma = H there: H = (1-r^2)(x^2-y^2)/4 has five."""

    def val(t, x, y):
        return 0.25 * (1.0 - x * x - y * y) * (x * x - y * y)

    def grd(t, x, y):
        return 0.5 * x * (1.0 - 2.0 * x * x), -0.5 * y * (1.0 - 2.0 * y * y)

    lift = flow_from_hamiltonian(
        TimeDepHamiltonianDisk(val, grd, tag="saddle"), grid=(96, 384), n_steps=N_STEPS
    )
    report = fixed_points_with_actions(lift, lam)
    assert not report.foliated
    assert len(report.points) == 5
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for p in report.points:
        assert abs(p.sigma - val(0.0, p.z.real, p.z.imag)) < 1e-5
        if abs(p.z) < 1e-6:
            assert p.flag == "hyperbolic"
        else:
            assert abs(abs(p.z) - inv_sqrt2) < 1e-6
            assert p.flag == "elliptic"
    assert sum(p.flag == "elliptic" for p in report.points) == 4


def test_degree_shift(rotation_lift, lam):
    shifted = rotation_lift.degree_shift(1)
    assert np.allclose(shifted.Theta_lift - rotation_lift.Theta_lift, TWO_PI)
    s0 = action_of_lift(rotation_lift, lam, n_steps=N_STEPS)
    s1 = action_of_lift(shifted, lam, n_steps=N_STEPS)
    assert np.max(np.abs(s1 - s0 - np.pi)) < 1e-12
    assert rotation_lift.degree_shift(0) is rotation_lift


def test_corrupted_grid_fails_residual_check(random_pair, lam):
    a, _ = random_pair
    r = a.r_nodes[:, None]
    bump = 0.01 * r * (1.0 - r) * np.sin(3.0 * a.theta_nodes[None, :])
    broken = dataclasses.replace(a, R=a.R + bump, _interp={})
    with pytest.raises(InconsistentLiftError):
        action_of_lift(broken, lam, n_steps=N_STEPS)


def test_nonvanishing_boundary_hamiltonian_rejected():
    bad = TimeDepHamiltonianDisk(
        value=lambda t, x, y: np.ones(np.broadcast(x, y).shape),
        grad=lambda t, x, y: (np.zeros_like(x), np.zeros_like(y)),
        tag="bad",
    )
    with pytest.raises(BoundaryDegeneracyError):
        flow_from_hamiltonian(bad, grid=(16, 64), n_steps=8)


def test_section_provenance_uses_return_times(rotation_lift, lam):
    sigma = action_of_lift(rotation_lift, lam, n_steps=N_STEPS)
    section = dataclasses.replace(
        rotation_lift, provenance="section_data", return_time=sigma, _interp={}
    )
    out = action_of_lift(section, lam)
    assert np.max(np.abs(out - sigma)) == 0.0
    missing = dataclasses.replace(section, return_time=None, _interp={})
    with pytest.raises(InconsistentLiftError):
        action_of_lift(missing, lam)


def test_lift_csv_round_trip(tmp_path, rotation_lift):
    path = tmp_path / "lift.csv"
    write_lift_csv(rotation_lift, path)
    back = read_lift_csv(path)
    assert np.max(np.abs(back.R - rotation_lift.R)) < 1e-11
    assert np.max(np.abs(back.Theta_lift - rotation_lift.Theta_lift)) < 1e-10
    write_lift_csv(rotation_lift, tmp_path / "lift2.csv")
    assert (tmp_path / "lift.csv").read_bytes() == (tmp_path / "lift2.csv").read_bytes()
