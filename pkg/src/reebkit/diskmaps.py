"""Area-preserving disk maps with lifts: actions, Calabi invariant, fixed points.

Maps live on the closed unit disk with an area form written in polar
coordinates as omega = F(r, theta) dr^dtheta (standard form: F = r, total
area pi, Cartesian density g = F/r = 1). A lift is the map grid (R, Theta_hat)
with a continuous angle lift Theta_hat(r, theta + 2pi) = Theta_hat + 2pi,
together with provenance: which Hamiltonian isotopy (or section data)
produced it.

The action of a lift relative to a primitive lambda of omega is the grid
function sigma with phi*lambda - lambda = d sigma, normalized through the
generating isotopy: sigma(z) = int_{t -> phi_t(z)} lambda + int_0^1
H_t(phi_t(z)) dt. The residual of the defining identity is checked on the
interior grid whenever an action is produced.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import BoundaryDegeneracyError, InconsistentLiftError
from .gridtools import PeriodicBicubic, TWO_PI, periodic_derivative, polar_mesh
from .prng import generator

RESIDUAL_TOL = 1e-5
AREA_CHECK_TOL = 1e-4


# ---------------------------------------------------------------------------
# area forms and primitives


@dataclass(frozen=True)
class DiskAreaForm:
    """Area form omega = F(r, theta) dr^dtheta = g(x, y) dx^dy on the disk."""

    density_polar: object  # F(r, theta)
    density_cartesian: object  # g(x, y) = F/r
    area: float
    tag: str = "custom"


def standard_area_form():
    return DiskAreaForm(
        density_polar=lambda r, theta: np.broadcast_to(r, np.broadcast(r, theta).shape).copy(),
        density_cartesian=lambda x, y: np.ones(np.broadcast(x, y).shape),
        area=np.pi,
        tag="flat",
    )


@dataclass(frozen=True)
class PrimitiveOneForm:
    """Primitive lambda of the area form: d lambda = omega.

    pair(x, y, vx, vy) evaluates lambda_(x,y)(v) in Cartesian coordinates;
    polar_components(r, theta) returns (lambda_r, lambda_theta).
    """

    pair: object
    polar_components: object
    tag: str = "custom"


def standard_primitive():
    """lambda = 1/2 r^2 dtheta = 1/2 (x dy - y dx)."""

    def pair(x, y, vx, vy):
        return 0.5 * (x * vy - y * vx)

    def polar_components(r, theta):
        zero = np.zeros(np.broadcast(r, theta).shape)
        return zero, 0.5 * np.asarray(r, dtype=float) ** 2 + zero

    return PrimitiveOneForm(pair, polar_components, tag="half_r2_dtheta")


def perturbed_primitive(base: PrimitiveOneForm, u, grad_u, tag="perturbed"):
    """lambda + du for a smooth function u(x, y) with analytic gradient."""

    def pair(x, y, vx, vy):
        ux, uy = grad_u(x, y)
        return base.pair(x, y, vx, vy) + ux * vx + uy * vy

    def polar_components(r, theta):
        lr, lt = base.polar_components(r, theta)
        x, y = r * np.cos(theta), r * np.sin(theta)
        ux, uy = grad_u(x, y)
        du_r = ux * np.cos(theta) + uy * np.sin(theta)
        du_t = -ux * r * np.sin(theta) + uy * r * np.cos(theta)
        return lr + du_r, lt + du_t

    return PrimitiveOneForm(pair, polar_components, tag=tag)


def primitive_exterior_derivative_error(primitive, area_form, n=64, h=1e-6):
    """Max |d lambda - omega| over interior sample points (finite differences)."""
    rng = generator(9)
    pts = rng.random((n, 2)) * 1.6 - 0.8
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) < 0.9]
    x, y = pts[:, 0], pts[:, 1]
    # d lambda (e_x, e_y) = d/dx [lambda(e_y)] - d/dy [lambda(e_x)]
    ddx = (primitive.pair(x + h, y, 0.0, 1.0) - primitive.pair(x - h, y, 0.0, 1.0)) / (2 * h)
    ddy = (primitive.pair(x, y + h, 1.0, 0.0) - primitive.pair(x, y - h, 1.0, 0.0)) / (2 * h)
    return float(np.max(np.abs(ddx - ddy - area_form.density_cartesian(x, y))))


# ---------------------------------------------------------------------------
# time-dependent Hamiltonians


@dataclass(frozen=True)
class TimeDepHamiltonianDisk:
    """H(t, x, y) on [0,1] x D with H(t, .)|_{boundary} = 0.

    value(t, x, y) and grad(t, x, y) -> (H_x, H_y) accept arrays.
    """

    value: object
    grad: object
    tag: str = "callable"

    def boundary_sup(self, n=128):
        ang = np.linspace(0.0, TWO_PI, n, endpoint=False)
        x, y = np.cos(ang), np.sin(ang)
        worst = 0.0
        for t in np.linspace(0.0, 1.0, 9):
            worst = max(worst, float(np.max(np.abs(self.value(t, x, y)))))
        return worst


def quadratic_hamiltonian(c):
    """H = (c/2)(1 - x^2 - y^2); generates the rigid rotation by angle c."""

    def value(t, x, y):
        return 0.5 * c * (1.0 - x * x - y * y)

    def grad(t, x, y):
        return -c * x, -c * y

    return TimeDepHamiltonianDisk(value, grad, tag=f"quadratic({c})")


def sample_hamiltonian(seed, amp=0.15, degree=3):
    """Random smooth Hamiltonian (1 - r^2) * p_t(x, y), p_t polynomial with
    trigonometric time dependence; analytic gradient; deterministic in seed.

    p has no linear terms, so grad H(t, 0) = 0 and the flow fixes the
    origin. Only origin-fixing maps admit polar lifts with the row
    equivariance Theta_hat(r, theta + 2pi) = Theta_hat + 2pi (a circle
    image must wind once around the origin), which the lift type assumes.
    """
    rng = generator(seed)
    powers = [
        (i, j)
        for i in range(degree + 1)
        for j in range(degree + 1 - i)
        if i + j != 1
    ]
    coef = rng.normal(size=(len(powers), 3)) * amp
    coef /= np.array([1.0 + i + j for i, j in powers])[:, None]

    def weights(t):
        return coef[:, 0] + coef[:, 1] * np.cos(TWO_PI * t) + coef[:, 2] * np.sin(TWO_PI * t)

    def _powers_of(v):
        out = [np.ones_like(v)]
        for _ in range(degree):
            out.append(out[-1] * v)
        return out

    def _poly(w, x, y, with_grad):
        xp, yp = _powers_of(x), _powers_of(y)
        p = np.zeros_like(xp[0])
        px = np.zeros_like(xp[0]) if with_grad else None
        py = np.zeros_like(xp[0]) if with_grad else None
        for k, (i, j) in enumerate(powers):
            p += w[k] * xp[i] * yp[j]
            if with_grad:
                if i:
                    px += (w[k] * i) * xp[i - 1] * yp[j]
                if j:
                    py += (w[k] * j) * xp[i] * yp[j - 1]
        return p, px, py

    def value(t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p, _, _ = _poly(weights(t), x, y, False)
        return (1.0 - x * x - y * y) * p

    def grad(t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        p, px, py = _poly(weights(t), x, y, True)
        base = 1.0 - x * x - y * y
        return base * px - 2.0 * x * p, base * py - 2.0 * y * p

    return TimeDepHamiltonianDisk(value, grad, tag=f"sample({seed})")


def _smooth_window(rise, fall):
    """C-infinity radial window: 0 for r <= rise[0] or r >= fall[1], 1 on the
    plateau between; returns window_both(r) -> (value, derivative).

    Built from exp(-1/x)/(exp(-1/x)+exp(-1/(1-x))): flat to all orders at
    both ends, so flows of windowed Hamiltonians keep full smoothness in r
    and grid derivatives converge at design order across the band seams.
    """
    a, b = rise
    c, d = fall

    def _s(x):
        out = np.zeros_like(x)
        pos = x > 0.0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    def step_both(x):
        x = np.asarray(np.clip(x, 0.0, 1.0), dtype=float)
        s0, s1 = _s(x), _s(1.0 - x)
        den = s0 + s1
        val = s0 / den
        inside = (x > 0.0) & (x < 1.0)
        deriv = np.zeros_like(x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d0 = np.where(inside, s0 / np.maximum(x, 1e-300) ** 2, 0.0)
            d1 = np.where(inside, s1 / np.maximum(1.0 - x, 1e-300) ** 2, 0.0)
            deriv[inside] = ((d0 * s1 + s0 * d1) / den ** 2)[inside]
        return val, deriv

    def window_both(r):
        s1, s1d = step_both((r - a) / (b - a))
        s2, s2d = step_both((r - c) / (d - c))
        return s1 * (1.0 - s2), s1d / (b - a) * (1.0 - s2) - s1 * s2d / (d - c)

    return window_both


def banded_hamiltonian(seed, amp=0.12, rotation=0.5, degree=3,
                       rise=(0.1, 0.52), fall=(0.62, 0.93)):
    """Random Hamiltonian that is an exact rigid rotation near both edges.

    H = (rotation/2)(1 - r^2) + chi(r) (1 - r^2) p_t(x, y) with a smooth
    window chi vanishing identically for r <= rise[0] and r >= fall[1], so
    the time-1 map is a rigid translation band at the disk center and at
    the boundary -- the admissible class for strip generating functions.
    The bump is normalized so its peak velocity equals ``amp``.
    """
    base = sample_hamiltonian(seed, amp=1.0, degree=degree)
    a, _ = rise
    window_both = _smooth_window(rise, fall)

    def window(r):
        return window_both(r)[0]

    def bump_grad(t, x, y):
        r = np.hypot(x, y)
        chi, dchi = window_both(r)
        # chi' vanishes identically below the rise, so the radial direction
        # is never needed where r could degenerate
        dchi_over_r = np.where(r > a, dchi / np.maximum(r, a / 2.0), 0.0)
        bv = base.value(t, x, y)
        bx, by = base.grad(t, x, y)
        return x * dchi_over_r * bv + chi * bx, y * dchi_over_r * bv + chi * by

    xs = np.linspace(-1.0, 1.0, 65)
    xg, yg = np.meshgrid(xs, xs)
    keep = xg ** 2 + yg ** 2 <= 1.0
    peak = 1e-12
    for t in (0.0, 0.25, 0.5, 0.75):
        gx, gy = bump_grad(t, xg[keep], yg[keep])
        peak = max(peak, float(np.max(np.hypot(gx, gy))))
    scale = amp / peak

    def value(t, x, y):
        u = x * x + y * y
        return (
            0.5 * rotation * (1.0 - u)
            + scale * window(np.hypot(x, y)) * base.value(t, x, y)
        )

    def grad(t, x, y):
        gx, gy = bump_grad(t, x, y)
        return -rotation * x + scale * gx, -rotation * y + scale * gy

    return TimeDepHamiltonianDisk(value, grad, tag=f"banded({seed})")


def positive_banded_hamiltonian(seed, amp=0.1, rotation=0.04, degree=3,
                                rise=(0.1, 0.52), fall=(0.62, 0.93)):
    """Pointwise-positive Hamiltonian, an exact rigid rotation near both edges.

    H = (rotation/2)(1 - r^2) + scale * chi(r) * (p_t(x, y) - m) where m sits
    strictly below the minimum of p over the window support and all times, so
    every term is nonnegative and H > 0 on the interior. With rotation = 2pi
    this is the full-turn rotation Hamiltonian pi(1 - r^2) plus a positive
    bump; with small rotation the time-1 map acquires interior fixed points
    whose actions are positive. Peak bump velocity is normalized to ``amp``.
    """
    base = sample_hamiltonian(seed, amp=1.0, degree=degree)
    a, _ = rise
    _, d = fall
    window_both = _smooth_window(rise, fall)

    xs = np.linspace(-1.0, 1.0, 65)
    xg, yg = np.meshgrid(xs, xs)
    rg = np.hypot(xg, yg)
    keep = (rg <= d) & (rg >= a)
    lo = hi = None
    for t in np.linspace(0.0, 1.0, 9):
        vals = base.value(t, xg[keep], yg[keep])
        lo = float(np.min(vals)) if lo is None else min(lo, float(np.min(vals)))
        hi = float(np.max(vals)) if hi is None else max(hi, float(np.max(vals)))
    m = lo - 0.05 * max(hi - lo, 1e-12)

    def bump_value(t, x, y):
        r = np.hypot(x, y)
        chi = window_both(r)[0]
        return chi * (base.value(t, x, y) - m)

    def bump_grad(t, x, y):
        r = np.hypot(x, y)
        chi, dchi = window_both(r)
        dchi_over_r = np.where(r > a, dchi / np.maximum(r, a / 2.0), 0.0)
        bv = base.value(t, x, y) - m
        bx, by = base.grad(t, x, y)
        return x * dchi_over_r * bv + chi * bx, y * dchi_over_r * bv + chi * by

    keep_disk = xg ** 2 + yg ** 2 <= 1.0
    peak = 1e-12
    for t in (0.0, 0.25, 0.5, 0.75):
        gx, gy = bump_grad(t, xg[keep_disk], yg[keep_disk])
        peak = max(peak, float(np.max(np.hypot(gx, gy))))
    scale = amp / peak

    def value(t, x, y):
        u = x * x + y * y
        return 0.5 * rotation * (1.0 - u) + scale * bump_value(t, x, y)

    def grad(t, x, y):
        gx, gy = bump_grad(t, x, y)
        return -rotation * x + scale * gx, -rotation * y + scale * gy

    return TimeDepHamiltonianDisk(value, grad, tag=f"positive_banded({seed})")


def concatenated_hamiltonian(first, second):
    """Isotopy of ``first`` followed by ``second``.

    Each half runs through a smooth time change s(u) = u - sin(2 pi u)/2 pi
    whose rate vanishes at the junction, so the combined Hamiltonian is
    continuous in t (the flow and the action integrals are invariant under
    reparametrization).
    """

    def _piece(t):
        if t < 0.5:
            u, h = 2.0 * t, first
        else:
            u, h = 2.0 * t - 1.0, second
        s = u - np.sin(TWO_PI * u) / TWO_PI
        rate = 2.0 * (1.0 - np.cos(TWO_PI * u))
        return h, s, rate

    def value(t, x, y):
        h, s, rate = _piece(t)
        return rate * h.value(s, x, y)

    def grad(t, x, y):
        h, s, rate = _piece(t)
        gx, gy = h.grad(s, x, y)
        return rate * gx, rate * gy

    return TimeDepHamiltonianDisk(value, grad, tag="concatenation")


def reversed_hamiltonian(h):
    """Generates the inverse map: H~(t, z) = -H(1 - t, z)."""

    def value(t, x, y):
        return -h.value(1.0 - t, x, y)

    def grad(t, x, y):
        gx, gy = h.grad(1.0 - t, x, y)
        return -gx, -gy

    return TimeDepHamiltonianDisk(value, grad, tag="reversed")


# ---------------------------------------------------------------------------
# lifts


@dataclass(eq=False)
class DiskMapLift:
    """Area-preserving disk map grid with a continuous angle lift."""

    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    R: np.ndarray
    Theta_lift: np.ndarray
    area_form: DiskAreaForm
    provenance: str
    hamiltonian: TimeDepHamiltonianDisk | None = None
    t_end: float = 1.0
    return_time: np.ndarray | None = None
    boundary_action: float | None = None
    action_offset: float = 0.0
    degree: int | None = None
    _interp: dict = field(default_factory=dict, repr=False)

    def interpolants(self):
        if not self._interp:
            self._interp["R"] = PeriodicBicubic(self.r_nodes, self.theta_nodes, self.R)
            self._interp["T"] = PeriodicBicubic(
                self.r_nodes, self.theta_nodes, self.Theta_lift,
                slope=np.ones_like(self.r_nodes),
            )
        return self._interp["R"], self._interp["T"]

    def map_points(self, r, theta, dr=0, dtheta=0):
        ir, it = self.interpolants()
        return ir(r, theta, dr=dr, dtheta=dtheta), it(r, theta, dr=dr, dtheta=dtheta)

    def map_cartesian(self, z):
        z = np.asarray(z, dtype=complex)
        r = np.clip(np.abs(z), 0.0, 1.0)
        theta = np.mod(np.angle(z), TWO_PI)
        rr, tt = self.map_points(r, theta)
        return rr * np.exp(1j * tt)

    def displacement_sup(self):
        z = self.r_nodes[:, None] * np.exp(1j * self.theta_nodes[None, :])
        return float(np.max(np.abs(self.R * np.exp(1j * self.Theta_lift) - z)))

    def grid_derivatives(self):
        """Node-accurate partials of R and Theta_lift (spline radial,
        spectral angular on the periodic parts)."""
        k = min(5, self.r_nodes.size - 1)
        dR_r = make_interp_spline(self.r_nodes, self.R, k=k, axis=0)(self.r_nodes, nu=1)
        dT_r = make_interp_spline(self.r_nodes, self.Theta_lift, k=k, axis=0)(
            self.r_nodes, nu=1
        )
        dR_t = periodic_derivative(self.R, axis=1, period=TWO_PI)
        dT_t = 1.0 + periodic_derivative(
            self.Theta_lift - self.theta_nodes[None, :], axis=1, period=TWO_PI
        )
        return dR_r, dR_t, dT_r, dT_t

    def area_preservation_error(self):
        """Max relative defect of phi*omega = omega at interior nodes."""
        dR_r, dR_t, dT_r, dT_t = self.grid_derivatives()
        f_here = self.area_form.density_polar(
            self.r_nodes[:, None], self.theta_nodes[None, :]
        )
        f_image = self.area_form.density_polar(self.R, np.mod(self.Theta_lift, TWO_PI))
        pullback = f_image * (dR_r * dT_t - dR_t * dT_r)
        err = np.abs(pullback - f_here) / np.maximum(np.abs(f_here), 1e-3)
        return float(np.max(err[1:-1, :]))

    def degree_shift(self, k, primitive=None):
        """Same map, lift composed with k full rotations; actions shift by
        k times the boundary action datum (the lambda-period of the
        boundary circle when no datum is attached)."""
        if k == 0:
            return self
        datum = self.boundary_action
        if datum is None:
            primitive = primitive or standard_primitive()
            _, lt = primitive.polar_components(1.0, self.theta_nodes)
            datum = float(np.mean(lt) * TWO_PI)
        return replace(
            self,
            Theta_lift=self.Theta_lift + TWO_PI * k,
            action_offset=self.action_offset + k * datum,
            degree=None if self.degree is None else self.degree - k,
            _interp={},
        )


def _hamiltonian_vector(h, area_form, t, xy):
    hx, hy = h.grad(t, xy[:, 0], xy[:, 1])
    g = area_form.density_cartesian(xy[:, 0], xy[:, 1])
    return np.stack([hy / g, -hx / g], axis=1)


def flow_points(hamiltonian, area_form, r_pts, theta_pts, t_end=1.0, n_steps=256):
    """Flow arbitrary polar points to time ``t_end``, tracking the angle lift.

    Returns (radius, angle_lift) arrays of the same shape as the inputs.
    """
    r_pts = np.asarray(r_pts, dtype=float)
    theta_pts = np.broadcast_to(np.asarray(theta_pts, dtype=float), r_pts.shape)
    shape = r_pts.shape
    rr, tt = r_pts.ravel(), theta_pts.ravel()
    xy = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=1)
    theta_hat = tt.copy()
    ang_prev = np.arctan2(xy[:, 1], xy[:, 0])
    dt = t_end / n_steps
    for k in range(n_steps):
        t = k * dt
        k1 = _hamiltonian_vector(hamiltonian, area_form, t, xy)
        k2 = _hamiltonian_vector(hamiltonian, area_form, t + 0.5 * dt, xy + 0.5 * dt * k1)
        k3 = _hamiltonian_vector(hamiltonian, area_form, t + 0.5 * dt, xy + 0.5 * dt * k2)
        k4 = _hamiltonian_vector(hamiltonian, area_form, t + dt, xy + dt * k3)
        xy = xy + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rad = np.hypot(xy[:, 0], xy[:, 1])
        overshoot = rad > 1.0
        if overshoot.any():
            xy[overshoot] /= rad[overshoot, None]
        ang = np.arctan2(xy[:, 1], xy[:, 0])
        inc = ang - ang_prev
        inc -= TWO_PI * np.round(inc / TWO_PI)
        theta_hat += inc
        ang_prev = ang
    rad = np.hypot(xy[:, 0], xy[:, 1]).reshape(shape)
    return np.clip(rad, 0.0, 1.0), theta_hat.reshape(shape)


def flow_from_hamiltonian(hamiltonian, area_form=None, t_end=1.0,
                          grid=(128, 512), n_steps=256):
    """Integrate the isotopy of X_H (iota_X omega = dH) to its time-t_end map.

    Tracks the continuous angle lift along each node trajectory; the r = 0
    lift row is filled by linear radial extrapolation (finite angles are
    meaningless at the origin itself).
    """
    area_form = area_form or standard_area_form()
    if hamiltonian.boundary_sup() > 1e-9:
        raise BoundaryDegeneracyError("Hamiltonian does not vanish on the boundary")
    n_r, n_theta = grid
    r, th, rm, tm = polar_mesh(n_r, n_theta)
    big_r, lift = flow_points(hamiltonian, area_form, rm, tm,
                              t_end=t_end, n_steps=n_steps)
    lift[0, :] = 2.0 * lift[1, :] - lift[2, :]
    big_r[0, :] = big_r[0, 0]
    return DiskMapLift(
        r_nodes=r, theta_nodes=th, R=big_r, Theta_lift=lift,
        area_form=area_form, provenance="hamiltonian_isotopy",
        hamiltonian=hamiltonian, t_end=t_end, degree=0,
    )


def compose_lifts(outer: DiskMapLift, inner: DiskMapLift, n_steps=256):
    """Lift of outer∘inner via the concatenated generating isotopy."""
    if outer.hamiltonian is None or inner.hamiltonian is None:
        raise InconsistentLiftError("composition requires Hamiltonian provenance")
    if outer.t_end != 1.0 or inner.t_end != 1.0:
        raise InconsistentLiftError("composition requires time-1 maps")
    h = concatenated_hamiltonian(inner.hamiltonian, outer.hamiltonian)
    lift = flow_from_hamiltonian(
        h, outer.area_form, grid=(len(outer.r_nodes), len(outer.theta_nodes)),
        n_steps=n_steps,
    )
    lift.provenance = "composition"
    return lift


def inverse_lift(lift: DiskMapLift, n_steps=256):
    if lift.hamiltonian is None:
        raise InconsistentLiftError("inverse requires Hamiltonian provenance")
    h = reversed_hamiltonian(lift.hamiltonian)
    return flow_from_hamiltonian(
        h, lift.area_form, grid=(len(lift.r_nodes), len(lift.theta_nodes)),
        n_steps=n_steps,
    )


def _integrate_action(lift, primitive, n_steps):
    """sigma(z) = int lambda(X_H) along the isotopy + int H_t(phi_t(z)) dt."""
    h, form = lift.hamiltonian, lift.area_form
    n_r, n_theta = lift.R.shape
    _, _, rm, tm = polar_mesh(n_r, n_theta)
    xy = np.stack([(rm * np.cos(tm)).ravel(), (rm * np.sin(tm)).ravel()], axis=1)
    sigma = np.zeros(xy.shape[0])
    dt = lift.t_end / n_steps

    def rates(t, state_xy):
        v = _hamiltonian_vector(h, form, t, state_xy)
        ds = primitive.pair(state_xy[:, 0], state_xy[:, 1], v[:, 0], v[:, 1])
        ds = ds + h.value(t, state_xy[:, 0], state_xy[:, 1])
        return v, ds

    for k in range(n_steps):
        t = k * dt
        k1, s1 = rates(t, xy)
        k2, s2 = rates(t + 0.5 * dt, xy + 0.5 * dt * k1)
        k3, s3 = rates(t + 0.5 * dt, xy + 0.5 * dt * k2)
        k4, s4 = rates(t + dt, xy + dt * k3)
        xy = xy + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        sigma += (dt / 6.0) * (s1 + 2 * s2 + 2 * s3 + s4)
        rad = np.hypot(xy[:, 0], xy[:, 1])
        overshoot = rad > 1.0
        if overshoot.any():
            xy[overshoot] /= rad[overshoot, None]
    return sigma.reshape(n_r, n_theta)


def pullback_residual(lift: DiskMapLift, primitive: PrimitiveOneForm, sigma):
    """Sup norm of phi*lambda - lambda - d sigma over interior nodes."""
    dR_r, dR_t, dT_r, dT_t = lift.grid_derivatives()
    lam_r_img, lam_t_img = primitive.polar_components(lift.R, np.mod(lift.Theta_lift, TWO_PI))
    pull_r = lam_r_img * dR_r + lam_t_img * dT_r
    pull_t = lam_r_img * dR_t + lam_t_img * dT_t
    lam_r, lam_t = primitive.polar_components(
        lift.r_nodes[:, None], lift.theta_nodes[None, :]
    )
    ds_r = make_interp_spline(
        lift.r_nodes, sigma, k=min(5, lift.r_nodes.size - 1), axis=0
    )(lift.r_nodes, nu=1)
    ds_t = periodic_derivative(sigma, axis=1, period=TWO_PI)
    res_r = pull_r - lam_r - ds_r
    res_t = pull_t - lam_t - ds_t
    return float(max(np.max(np.abs(res_r[1:-1, :])), np.max(np.abs(res_t[1:-1, :]))))


def action_of_lift(lift: DiskMapLift, primitive: PrimitiveOneForm,
                   n_steps=256, residual_tol=RESIDUAL_TOL, check=True):
    """Action grid sigma of the lift relative to the primitive.

    Hamiltonian/composition provenance integrates the generating isotopy;
    section provenance uses the recorded return times (degree shifts enter
    through the accumulated action offset).
    """
    if lift.provenance in ("hamiltonian_isotopy", "composition"):
        if lift.hamiltonian is None:
            raise InconsistentLiftError("lift lost its generating Hamiltonian")
        sigma = _integrate_action(lift, primitive, n_steps) + lift.action_offset
    elif lift.provenance == "section_data":
        if lift.return_time is None:
            raise InconsistentLiftError("section lift carries no return times")
        sigma = lift.return_time + lift.action_offset
    else:
        raise InconsistentLiftError(f"unknown provenance {lift.provenance!r}")
    if check:
        res = pullback_residual(lift, primitive, sigma)
        if res > residual_tol:
            raise InconsistentLiftError(
                f"phi*lambda - lambda - d sigma residual {res:.2e} > {residual_tol:.0e}"
            )
    return sigma


def calabi(lift: DiskMapLift, primitive: PrimitiveOneForm, n_steps=256):
    """Cal(phi~) = integral of sigma * omega over the disk."""
    sigma = action_of_lift(lift, primitive, n_steps=n_steps)
    f = lift.area_form.density_polar(lift.r_nodes[:, None], lift.theta_nodes[None, :])
    dtheta = TWO_PI / len(lift.theta_nodes)
    return float(np.trapezoid((sigma * f).sum(axis=1) * dtheta, lift.r_nodes))


@dataclass(frozen=True)
class FixedPoint:
    z: complex
    r: float
    theta: float
    sigma: float
    flag: str  # elliptic | hyperbolic | degenerate


@dataclass(frozen=True)
class FixedPointReport:
    foliated: bool
    points: tuple


def _map_jacobian_fd(lift, z, h=1e-5):
    zs = np.array([z + h, z - h, z + 1j * h, z - 1j * h])
    w = lift.map_cartesian(zs)
    col_x = (w[0] - w[1]) / (2 * h)
    col_y = (w[2] - w[3]) / (2 * h)
    return np.array([[col_x.real, col_y.real], [col_x.imag, col_y.imag]])


def fixed_points_with_actions(lift: DiskMapLift, primitive: PrimitiveOneForm,
                              scan_tol=1e-3, newton_tol=1e-10, merge_tol=1e-5,
                              identity_tol=1e-5):
    """Grid scan for interior fixed points, Newton-refined, with actions.

    Identity-like maps (every node fixed to tolerance) are reported as a
    foliated family instead of a point list.
    """
    sigma = action_of_lift(lift, primitive)
    z_nodes = lift.r_nodes[:, None] * np.exp(1j * lift.theta_nodes[None, :])
    disp = np.abs(lift.R * np.exp(1j * lift.Theta_lift) - z_nodes)
    if disp.max() < identity_tol:
        return FixedPointReport(foliated=True, points=())

    n_r, n_theta = disp.shape
    candidates = []
    if lift.R[0, 0] < scan_tol:
        candidates.append(0.0 + 0.0j)
    # Newton candidates: every node below scan_tol is a hit by itself, and
    # every strict local minimum of the displacement field is worth trying
    # (a fixed point of a strongly moving map need not have a node within
    # scan_tol); the Newton residual is the actual acceptance filter.
    mid = disp[1:-1, :]
    best_nb = np.minimum(
        np.minimum(disp[:-2, :], disp[2:, :]),
        np.minimum(np.roll(disp, 1, axis=1)[1:-1, :], np.roll(disp, -1, axis=1)[1:-1, :]),
    )
    mask = (mid <= best_nb) & ((mid < scan_tol) | (mid < best_nb))
    hits = np.argwhere(mask)
    order = np.lexsort((hits[:, 1], hits[:, 0], mid[mask.nonzero()]))
    for k in order[:64]:
        i, j = hits[k]
        candidates.append(z_nodes[i + 1, j])

    sigma_interp = PeriodicBicubic(lift.r_nodes, lift.theta_nodes, sigma)
    found = []
    for z0 in candidates:
        z = z0
        ok = False
        for _ in range(60):
            fz = lift.map_cartesian(np.array([z]))[0] - z
            if abs(fz) <= newton_tol:
                ok = True
                break
            jac = _map_jacobian_fd(lift, z) - np.eye(2)
            try:
                step = np.linalg.solve(jac, -np.array([fz.real, fz.imag]))
            except np.linalg.LinAlgError:
                break
            z = z + step[0] + 1j * step[1]
            if abs(z) > 1.0 - 1.5 / n_r:
                break
        if not ok:
            continue
        if any(abs(z - p.z) < merge_tol for p in found):
            continue
        tr = float(np.trace(_map_jacobian_fd(lift, z)))
        if abs(tr) < 2.0 - 1e-9:
            flag = "elliptic"
        elif abs(tr) > 2.0 + 1e-9:
            flag = "hyperbolic"
        else:
            flag = "degenerate"
        r, theta = abs(z), float(np.mod(np.angle(z), TWO_PI))
        found.append(FixedPoint(
            z=complex(z), r=float(r), theta=theta,
            sigma=float(sigma_interp(r, theta)), flag=flag,
        ))
    found.sort(key=lambda p: (round(p.r, 9), round(p.theta, 9)))
    return FixedPointReport(foliated=False, points=tuple(found))


# ---------------------------------------------------------------------------
# CSV interchange


def write_lift_csv(lift: DiskMapLift, path):
    n_r, n_theta = lift.R.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("r,theta,R,Theta_lift\n")
        for i in range(n_r):
            for j in range(n_theta):
                fh.write(
                    f"{lift.r_nodes[i]:.12g},{lift.theta_nodes[j]:.12g},"
                    f"{lift.R[i, j]:.12g},{lift.Theta_lift[i, j]:.12g}\n"
                )


def read_lift_csv(path, area_form=None, provenance="section_data",
                  return_time=None, boundary_action=None):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    r_nodes = np.unique(data[:, 0])
    theta_nodes = np.unique(data[:, 1])
    n_r, n_theta = len(r_nodes), len(theta_nodes)
    big_r = data[:, 2].reshape(n_r, n_theta)
    lift = data[:, 3].reshape(n_r, n_theta)
    return DiskMapLift(
        r_nodes=r_nodes, theta_nodes=theta_nodes, R=big_r, Theta_lift=lift,
        area_form=area_form or standard_area_form(), provenance=provenance,
        return_time=return_time, boundary_action=boundary_action,
    )
