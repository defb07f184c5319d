"""Disk-like surfaces of section and their first return maps.

The section is the intersection of the boundary with the half-plane
{y2 = 0, x2 >= 0}: the radial graph over the upper z2-hemisphere
{(z1, sqrt(1 - |z1|^2))} of the unit sphere, parametrized by polar
coordinates (r, theta) of the z1-disk.  Its boundary circle {z2 = 0} is
flow-invariant for every supported domain family (their defining
functions are even in z2), so the section is a disk whose boundary is a
closed orbit and whose interior nodes can be flowed to their first
return.

Return data records, per grid node, the return point in disk
coordinates, the return time sigma, and the degree-1 continuous angle
lift tracked along the trajectory.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .diskmaps import DiskAreaForm, DiskMapLift, PrimitiveOneForm
from .errors import InconsistentInputError, SectionError
from .geometry import StarShapedDomain
from .gridtools import PeriodicBicubic, TWO_PI, angular_nodes, periodic_derivative, radial_nodes
from .reeb import _project, _reeb_field, _rk4_step
from .strips import AreaDensityF, StripMap

BISECT_TOL = 1e-10
PROBE_EPS = 1e-9
MIN_Z2_SQ = 1e-30


def model_disk_points(r, theta):
    """Unit-sphere directions of the model disk: (r e^{i theta}, sqrt(1-r^2)).

    The z2 coordinate stays real and non-negative, so the disk is exactly
    the slice {y2 = 0, x2 >= 0} of the sphere.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast_shapes(r.shape, theta.shape)
    u = np.zeros(shape + (4,))
    u[..., 0] = r * np.cos(theta)
    u[..., 1] = r * np.sin(theta)
    u[..., 2] = np.sqrt(np.clip(1.0 - r * r, 0.0, None))
    return u


def section_embedding(dom: StarShapedDomain):
    """(r, theta) -> boundary points: radial projection of the model disk."""

    def embed(r, theta):
        return dom.boundary_project(model_disk_points(r, theta))

    return embed


def _z2_angle_rate(x, v):
    """d/dt arg z2 along the flow direction v at points x."""
    z2_sq = x[..., 2] ** 2 + x[..., 3] ** 2
    return (x[..., 2] * v[..., 3] - x[..., 3] * v[..., 2]) / np.maximum(z2_sq, MIN_Z2_SQ)


def _angle_increment(x_old, x_new, k):
    """Principal-value increment of arg z_k between consecutive states."""
    a_old = x_old[..., 2 * k] + 1j * x_old[..., 2 * k + 1]
    a_new = x_new[..., 2 * k] + 1j * x_new[..., 2 * k + 1]
    return np.angle(a_new * np.conj(a_old))


def _step_with_increments(dom, x, h):
    """One projected RK4 step of (possibly per-point) size h."""
    x_new = _project(dom, _rk4_step(dom, x, h))
    return x_new, _angle_increment(x, x_new, 0), _angle_increment(x, x_new, 1)


def binding_orbit_action(dom: StarShapedDomain, n=512):
    """Action (lambda0-period) of the boundary circle {z2 = 0} of the section."""
    phi = angular_nodes(n)
    q = dom.boundary_project(model_disk_points(np.ones_like(phi), phi))
    radii_sq = q[:, 0] ** 2 + q[:, 1] ** 2
    return float(np.pi * np.mean(radii_sq))


def _pullback_forms(dom, r, th):
    """Grids of the pulled-back primitive and area density on the section.

    Only the z1 components of the embedding enter (y2 and dy2 vanish
    identically on the section), so everything reduces to the complex
    field Z(r, theta) = z1 of the embedded point: lambda has components
    (Im(conj(Z) dZ/dr) / 2, Im(conj(Z) dZ/dtheta) / 2) and the density is
    F = Im(conj(dZ/dr) dZ/dtheta).
    """
    points = dom.boundary_project(
        model_disk_points(r[:, None], th[None, :])
    )
    z = points[..., 0] + 1j * points[..., 1]
    k = min(5, r.size - 1)
    dz_r = make_interp_spline(r, z, k=k, axis=0)(r, nu=1)
    dz_t = (
        periodic_derivative(z.real, axis=1, period=TWO_PI)
        + 1j * periodic_derivative(z.imag, axis=1, period=TWO_PI)
    )
    lam_r = 0.5 * np.imag(np.conj(z) * dz_r)
    lam_t = 0.5 * np.imag(np.conj(z) * dz_t)
    dens = np.imag(np.conj(dz_r) * dz_t)
    dens[0, :] = 0.0
    return lam_r, lam_t, dens


@dataclass(eq=False)
class SectionReturnData:
    """First-return data of the disk-like surface of section."""

    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    R: np.ndarray            # return radius in disk coordinates
    Theta_lift: np.ndarray   # degree-1 continuous angle lift of the return
    sigma: np.ndarray        # first return times
    F: np.ndarray            # pullback area density on the (r, theta) grid
    lam_r: np.ndarray        # radial component of the pullback primitive
    lam_theta: np.ndarray    # angular component of the pullback primitive
    binding_action: float    # lambda0-action of the boundary orbit
    domain_tag: str = "domain"
    degree: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def grid(self):
        return (self.r_nodes.size, self.theta_nodes.size)

    def rotation_angle(self, degree=0):
        """Mean boundary-row angle advance of the chosen lift degree."""
        adv = self.Theta_lift[-1, :] - self.theta_nodes
        return float(np.mean(adv)) + TWO_PI * (self.degree - degree)


def section_return_map(dom: StarShapedDomain, grid=(64, 256), h=None,
                       t_budget=None, bisect_tol=BISECT_TOL,
                       probe_eps=PROBE_EPS):
    """First return map of the Reeb flow to the disk-like section.

    Every grid node is flowed until the continuous z2-angle along the
    trajectory has advanced by 2 pi; the crossing time is localized by the
    sign change of that angular coordinate and refined by bisection to
    ``bisect_tol`` in time.  The degenerate edge rows r = 0 and r = 1 are
    probed from radius ``probe_eps`` inside, which realizes the boundary
    row as the boundary-orbit limit of the interior flow.
    """
    n_r, n_theta = int(grid[0]), int(grid[1])
    if n_r < 8 or n_theta < 16:
        raise InconsistentInputError("section grid must be at least 8 x 16")
    r = radial_nodes(n_r)
    th = angular_nodes(n_theta)
    r_start = r.copy()
    r_start[0] = probe_eps
    r_start[-1] = 1.0 - probe_eps

    start = dom.boundary_project(
        model_disk_points(r_start[:, None], th[None, :])
    ).reshape(-1, 4)
    n_pts = start.shape[0]

    rate0 = _z2_angle_rate(start, _reeb_field(dom, start))
    if np.min(rate0) <= 1e-8:
        bad = int(np.argmin(rate0))
        raise SectionError(
            f"flow is not transverse to the section at node "
            f"(i={bad // n_theta}, j={bad % n_theta}): angular rate "
            f"{float(rate0[bad]):.3e}"
        )

    if h is None:
        h = dom.min_action_hint() / 4096.0
    if t_budget is None:
        t_budget = 16.0 * dom.min_action_hint()

    x = start.copy()
    w1 = np.zeros(n_pts)        # accumulated z1-angle advance
    w2 = np.zeros(n_pts)        # accumulated z2-angle advance
    active = np.ones(n_pts, dtype=bool)
    # saved pre-crossing states for the bisection stage
    x_pre = np.empty_like(start)
    w1_pre = np.empty(n_pts)
    w2_pre = np.empty(n_pts)
    t_pre = np.empty(n_pts)

    t = 0.0
    n_steps = int(math.ceil(t_budget / h))
    for _ in range(n_steps):
        if not np.any(active):
            break
        xa = x[active]
        xn, d1, d2 = _step_with_increments(dom, xa, h)
        idx = np.nonzero(active)[0]
        w2_new = w2[idx] + d2
        if np.any(w2_new < -0.5):
            bad = int(idx[np.argmin(w2_new)])
            raise SectionError(
                f"flow winds backwards through the section at node "
                f"(i={bad // n_theta}, j={bad % n_theta})"
            )
        crossed = w2_new >= TWO_PI
        hit = idx[crossed]
        x_pre[hit] = xa[crossed]
        w1_pre[hit] = w1[hit]
        w2_pre[hit] = w2[hit]
        t_pre[hit] = t
        keep = idx[~crossed]
        x[keep] = xn[~crossed]
        w1[keep] += d1[~crossed]
        w2[keep] = w2_new[~crossed]
        active[hit] = False
        t += h
    if np.any(active):
        bad = int(np.nonzero(active)[0][0])
        raise SectionError(
            f"no return within time budget {t_budget:.3g} at node "
            f"(i={bad // n_theta}, j={bad % n_theta})"
        )

    # bisection on the final partial step
    lo = np.zeros(n_pts)
    hi = np.full(n_pts, h)
    target = TWO_PI - w2_pre
    for _ in range(200):
        if np.max(hi - lo) <= bisect_tol:
            break
        mid = 0.5 * (lo + hi)
        _, _, adv = _step_with_increments(dom, x_pre, mid[:, None])
        high = adv >= target
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    delta = 0.5 * (lo + hi)
    x_cross, d1_fin, _ = _step_with_increments(dom, x_pre, delta[:, None])
    sigma = (t_pre + delta).reshape(n_r, n_theta)

    rate_cross = _z2_angle_rate(x_cross, _reeb_field(dom, x_cross))
    if np.min(rate_cross) <= 1e-8:
        bad = int(np.argmin(rate_cross))
        raise SectionError(
            f"return crossing is not transverse at node "
            f"(i={bad // n_theta}, j={bad % n_theta})"
        )

    u = x_cross / np.linalg.norm(x_cross, axis=-1, keepdims=True)
    big_r = np.hypot(u[:, 0], u[:, 1]).reshape(n_r, n_theta)
    big_r[-1, :] = 1.0
    # The centre row is marched from probe offsets; when every probe returns
    # within probe scale of the centre, the limit map fixes it exactly, and
    # keeping the O(probe_eps) bias would leave the interpolated map without
    # a centre fixed point at all.
    if float(np.max(big_r[0, :])) <= 100.0 * probe_eps:
        big_r[0, :] = 0.0
    theta_grid = np.broadcast_to(th[None, :], (n_r, n_theta))
    theta_lift = theta_grid + (w1_pre + d1_fin).reshape(n_r, n_theta) - TWO_PI

    lam_r, lam_t, dens = _pullback_forms(dom, r, th)
    return SectionReturnData(
        r_nodes=r,
        theta_nodes=th,
        R=big_r,
        Theta_lift=theta_lift,
        sigma=sigma,
        F=dens,
        lam_r=lam_r,
        lam_theta=lam_t,
        binding_action=binding_orbit_action(dom),
        domain_tag=getattr(dom, "family", "domain"),
    )


# ---------------------------------------------------------------------------
# derived objects


def section_area_form(data: SectionReturnData):
    dens_interp = PeriodicBicubic(data.r_nodes, data.theta_nodes, data.F)
    ratio = data.F.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio[1:] = data.F[1:] / data.r_nodes[1:, None]
    ratio[0, :] = 2.0 * ratio[1, :] - ratio[2, :]
    ratio_interp = PeriodicBicubic(data.r_nodes, data.theta_nodes, ratio)

    def density_cartesian(xv, yv):
        rr = np.hypot(xv, yv)
        tt = np.mod(np.arctan2(yv, xv), TWO_PI)
        return ratio_interp(np.clip(rr, 0.0, 1.0), tt)

    return DiskAreaForm(
        density_polar=lambda rr, tt: dens_interp(np.clip(rr, 0.0, 1.0), np.mod(tt, TWO_PI)),
        density_cartesian=density_cartesian,
        area=data.binding_action,
        tag="section",
    )


def section_primitive(data: SectionReturnData):
    """Pullback of lambda0 to the section, as a disk primitive."""
    lr = PeriodicBicubic(data.r_nodes, data.theta_nodes, data.lam_r)
    lt = PeriodicBicubic(data.r_nodes, data.theta_nodes, data.lam_theta)

    def polar_components(rr, tt):
        rr = np.clip(np.asarray(rr, dtype=float), 0.0, 1.0)
        tt = np.mod(tt, TWO_PI)
        return lr(rr, tt), lt(rr, tt)

    def pair(xv, yv, vx, vy):
        rr = np.hypot(xv, yv)
        tt = np.mod(np.arctan2(yv, xv), TWO_PI)
        comp_r, comp_t = polar_components(rr, tt)
        rr_safe = np.maximum(rr, 1e-12)
        v_r = (xv * vx + yv * vy) / rr_safe
        v_t = (xv * vy - yv * vx) / rr_safe**2
        return comp_r * v_r + comp_t * v_t

    return PrimitiveOneForm(pair, polar_components, tag="section_pullback")


def section_lift(data: SectionReturnData):
    """Return map as a disk-map lift with section provenance.

    The stored lift has degree 1, so its action field is the recorded
    return time minus the boundary-orbit action; shifting the degree by
    k = 1 recovers the raw return times as degree-0 actions.
    """
    return DiskMapLift(
        r_nodes=data.r_nodes,
        theta_nodes=data.theta_nodes,
        R=data.R,
        Theta_lift=data.Theta_lift,
        area_form=section_area_form(data),
        provenance="section_data",
        return_time=data.sigma,
        boundary_action=data.binding_action,
        action_offset=-data.degree * data.binding_action,
        degree=data.degree,
    )


def identity_distance(data: SectionReturnData):
    """C^0 + first-difference distance of the degree-1 lift from identity.

    The maximum is over node deviations of (R - r, Theta_lift - theta)
    and over their undivided adjacent-node differences along both grid
    axes.
    """
    dev_r = data.R - data.r_nodes[:, None]
    dev_t = data.Theta_lift - data.theta_nodes[None, :] - TWO_PI * (1 - data.degree)
    worst = max(float(np.max(np.abs(dev_r))), float(np.max(np.abs(dev_t))))
    for dev in (dev_r, dev_t):
        worst = max(worst, float(np.max(np.abs(np.diff(dev, axis=0)))))
        wrapped = dev - np.roll(dev, 1, axis=1)
        worst = max(worst, float(np.max(np.abs(wrapped))))
    return worst


def section_area_check(data: SectionReturnData):
    """Worst relative defect of the row-wise enclosed lambda-areas.

    phi*lambda - lambda = d sigma forces the integral of the pullback
    primitive along each image row to match the integral along the row
    itself; both sides are evaluated spectrally on the angular grid.
    """
    lr = PeriodicBicubic(data.r_nodes, data.theta_nodes, data.lam_r)
    lt = PeriodicBicubic(data.r_nodes, data.theta_nodes, data.lam_theta)
    d_r = periodic_derivative(data.R, axis=1, period=TWO_PI)
    d_t = 1.0 + periodic_derivative(
        data.Theta_lift - data.theta_nodes[None, :], axis=1, period=TWO_PI
    )
    rr = np.clip(data.R, 0.0, 1.0)
    tt = np.mod(data.Theta_lift, TWO_PI)
    pull = lr(rr, tt) * d_r + lt(rr, tt) * d_t
    base = data.lam_theta
    worst = 0.0
    for i in range(1, data.r_nodes.size):
        area_image = float(np.mean(pull[i]))
        area_row = float(np.mean(base[i]))
        worst = max(worst, abs(area_image - area_row) / max(abs(area_row), 1e-12))
    return worst


def monotonized_strip(data: SectionReturnData):
    """Strip map and density for the generating-function machinery.

    Per column, the return radii are made strictly increasing (isotonic
    envelope with a minimal gap) and affinely renormalized so the edge
    rows land exactly on 0 and 1; the angle lift is kept as recorded.
    """
    n_r = data.r_nodes.size
    gap = 1e-9
    ramp = gap * np.arange(n_r)[:, None]
    mono = np.maximum.accumulate(data.R - ramp, axis=0) + ramp
    span = mono[-1:, :] - mono[:1, :]
    if np.min(span) <= 0.5:
        raise InconsistentInputError(
            "return radii collapse: the section data does not shadow a "
            "monotone radial map"
        )
    mono = (mono - mono[:1, :]) / span
    strip = StripMap(data.r_nodes, data.theta_nodes, mono, data.Theta_lift.copy())
    density = AreaDensityF(data.r_nodes, data.theta_nodes, data.F.copy())
    return strip, density


# ---------------------------------------------------------------------------
# serialization

SECTION_CSV_COLUMNS = ("i", "j", "r", "theta", "return_r", "return_theta",
                       "sigma", "theta_lift")


def write_section_csv(data: SectionReturnData, path):
    n_r, n_theta = data.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("binding_action,degree,n_r,n_theta\n")
        fh.write(
            f"{data.binding_action:.17g},{data.degree},{n_r},{n_theta}\n"
        )
        fh.write(",".join(SECTION_CSV_COLUMNS) + "\n")
        for i in range(n_r):
            for j in range(n_theta):
                ret_theta = math.fmod(data.Theta_lift[i, j], TWO_PI)
                if ret_theta < 0.0:
                    ret_theta += TWO_PI
                fh.write(
                    f"{i},{j},{data.r_nodes[i]:.17g},{data.theta_nodes[j]:.17g},"
                    f"{data.R[i, j]:.17g},{ret_theta:.17g},"
                    f"{data.sigma[i, j]:.17g},{data.Theta_lift[i, j]:.17g}\n"
                )


def read_section_csv(path, dom: StarShapedDomain = None):
    """Rebuild section data from CSV; pullback grids need the domain."""
    with open(path, "r", encoding="utf-8") as fh:
        if fh.readline().strip() != "binding_action,degree,n_r,n_theta":
            raise InconsistentInputError("missing section CSV header")
        meta = fh.readline().strip().split(",")
        binding = float(meta[0])
        degree = int(meta[1])
        n_r, n_theta = int(meta[2]), int(meta[3])
        if fh.readline().strip() != ",".join(SECTION_CSV_COLUMNS):
            raise InconsistentInputError("missing section CSV column row")
        raw = np.loadtxt(fh, delimiter=",")
    if raw.shape != (n_r * n_theta, len(SECTION_CSV_COLUMNS)):
        raise InconsistentInputError("section CSV shape mismatch")
    r = raw[: n_r * n_theta : n_theta, 2]
    th = raw[:n_theta, 3]
    big_r = raw[:, 4].reshape(n_r, n_theta)
    sigma = raw[:, 6].reshape(n_r, n_theta)
    lift = raw[:, 7].reshape(n_r, n_theta)
    if dom is not None:
        lam_r, lam_t, dens = _pullback_forms(dom, r, th)
        tag = getattr(dom, "family", "domain")
    else:
        lam_r = np.zeros_like(big_r)
        lam_t = 0.5 * (r**2)[:, None] + np.zeros_like(big_r)
        dens = r[:, None] + np.zeros_like(big_r)
        tag = "section_csv"
    return SectionReturnData(
        r_nodes=r,
        theta_nodes=th,
        R=big_r,
        Theta_lift=lift,
        sigma=sigma,
        F=dens,
        lam_r=lam_r,
        lam_theta=lam_t,
        binding_action=binding,
        domain_tag=tag,
        degree=degree,
    )
