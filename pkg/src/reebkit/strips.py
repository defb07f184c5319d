"""Generating functions for monotone strip maps and positive-Hamiltonian extraction.

A strip map is an area-preserving map of [0,1] x S^1 written as grids
(R, Theta_hat) with R(0,.) = 0, R(1,.) = 1 and a continuous angle lift.
The area form is Omega = F(r, theta) dr^dtheta with F > 0 on the interior;
A(r, theta) = int_0^r F(s, theta) ds and B(r, theta) = int_0^theta F(r, v) dv
are its radial and angular cumulative integrals (B extends to the angle
lift by its per-period slope).

A generating function W(rho, theta) in mixed variables (new radius, old
angle), normalized by W(1, .) = 0 and 2pi-periodic in theta, encodes the
map through

    d1 W(R, theta) = B(R, theta) - B(R, Theta_hat)
    d2 W(R, theta) = A(R, theta) - A(r, theta)

where (r, theta) -> (R, Theta_hat). ``genfun_from_stripmap`` integrates
these relations from the r = 1 row; ``stripmap_from_genfun`` inverts them
by monotone Newton iterations; ``positive_hamiltonian_pipeline`` follows
the linear family W_t = t W, extracts the generating Hamiltonian from the
isotopy velocity, and reports its interior minimum together with the
action match |H - W| at the fixed points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import json
import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .diskmaps import DiskMapLift
from .errors import (
    ConditionError,
    HypothesisError,
    InconsistentInputError,
    InconsistentLiftError,
    MonotonicityError,
)
from .gridtools import (
    PeriodicBicubic,
    SpectralRadialInterpolant,
    TWO_PI,
    angular_nodes,
    periodic_antiderivative,
    periodic_derivative,
    polar_mesh,
    radial_nodes,
    spline_cumint_radial,
)

CONSISTENCY_TOL = 1e-4
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 60


# ---------------------------------------------------------------------------
# area density


@dataclass(eq=False)
class AreaDensityF:
    """Density F of the strip area form, with its cumulative integrals."""

    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    F: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if np.any(self.F[1:-1, :] <= 0.0) or np.any(self.F < 0.0):
            raise InconsistentInputError("area density must be positive on the interior")
        self.A = spline_cumint_radial(self.F, self.r_nodes)
        self.row_mean = self.F.mean(axis=1)
        q = periodic_antiderivative(self.F, axis=1)
        self.B = self.row_mean[:, None] * self.theta_nodes[None, :] + q

    @classmethod
    def from_callable(cls, fn, n_r, n_theta):
        r, th, rm, tm = polar_mesh(n_r, n_theta)
        return cls(r, th, np.asarray(fn(rm, tm), dtype=float))

    @classmethod
    def flat_disk(cls, n_r, n_theta):
        """Polar density of the standard area form on the unit disk: F = r."""
        return cls.from_callable(lambda r, th: r + 0.0 * th, n_r, n_theta)

    def _interp(self, name):
        if name not in self._cache:
            if name == "F":
                self._cache[name] = PeriodicBicubic(self.r_nodes, self.theta_nodes, self.F)
            elif name == "A":
                self._cache[name] = PeriodicBicubic(self.r_nodes, self.theta_nodes, self.A)
            elif name == "B":
                self._cache[name] = PeriodicBicubic(
                    self.r_nodes, self.theta_nodes, self.B, slope=self.row_mean
                )
            elif name == "fbar":
                self._cache[name] = CubicSpline(self.r_nodes, self.row_mean)
        return self._cache[name]

    def F_at(self, r, theta):
        return self._interp("F")(r, theta)

    def A_at(self, r, theta, dr=0, dtheta=0):
        return self._interp("A")(r, theta, dr=dr, dtheta=dtheta)

    def B_at(self, r, theta):
        """B extended to the universal cover of the angle circle."""
        return self._interp("B")(r, theta)

    def radial_mean(self, r, derivative=0):
        return self._interp("fbar")(r, nu=derivative)

    def radial_mean_cumulative(self, r):
        """int_0^r mean_theta F(s, .) ds."""
        anti = self._interp("fbar").antiderivative()
        return anti(r) - anti(self.r_nodes[0])


# ---------------------------------------------------------------------------
# generating functions


@dataclass(eq=False)
class GenFunW:
    """Generating function grid: W(1, .) = 0, 2pi-periodic in theta.

    ``d1`` optionally carries the radial-derivative grid of W. When the
    generating function is built from a strip map, that grid is known
    exactly (it is the angular B-difference field), and interpolating it as
    data is one order more accurate than differentiating a spline of W.
    """

    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    W: np.ndarray
    d1: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if np.max(np.abs(self.W[-1, :])) > 1e-9:
            raise InconsistentInputError("W must vanish on the r = 1 row")
        if self.d1 is not None:
            k = min(5, self.r_nodes.size - 1)
            cum = make_interp_spline(
                self.r_nodes, self.d1, k=k, axis=0
            ).antiderivative()(self.r_nodes)
            err = float(np.max(np.abs((cum - cum[-1:, :]) - (self.W - self.W[-1:, :]))))
            if err > CONSISTENCY_TOL:
                raise InconsistentInputError(
                    f"d1 grid does not integrate back to W: error {err:.2e}"
                )

    def scaled(self, t):
        return GenFunW(self.r_nodes, self.theta_nodes, t * self.W,
                       d1=None if self.d1 is None else t * self.d1)

    def interp(self):
        if "W" not in self._cache:
            self._cache["W"] = SpectralRadialInterpolant(
                self.r_nodes, self.theta_nodes, self.W
            )
        return self._cache["W"]

    def d1_interp(self):
        """Interpolant of the radial derivative: the d1 grid if present,
        else the derivative of the W spline."""
        if "d1" not in self._cache:
            if self.d1 is not None:
                self._cache["d1"] = SpectralRadialInterpolant(
                    self.r_nodes, self.theta_nodes, self.d1
                )
            else:
                self._cache["d1"] = None
        return self._cache["d1"]

    def at(self, r, theta, dr=0, dtheta=0):
        if dr == 1 and self.d1_interp() is not None:
            return self.d1_interp()(r, theta, dtheta=dtheta)
        return self.interp()(r, theta, dr=dr, dtheta=dtheta)

    def grid_d1(self):
        if self.d1 is not None:
            return self.d1
        return make_interp_spline(
            self.r_nodes, self.W, k=min(5, self.r_nodes.size - 1), axis=0
        )(self.r_nodes, nu=1)

    def grid_d2(self):
        return periodic_derivative(self.W, axis=1)


# ---------------------------------------------------------------------------
# strip maps


@dataclass(eq=False)
class StripMap:
    """Area-preserving strip map grids with continuous angle lift."""

    r_nodes: np.ndarray
    theta_nodes: np.ndarray
    R: np.ndarray
    Theta: np.ndarray
    # optional exact evaluator of the underlying map at off-grid radii
    # (columns at theta_nodes); used to refine subgrid queries when the map
    # has flow provenance rather than pure grid data
    point_sampler: object = field(default=None, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if np.max(np.abs(self.R[0, :])) > 1e-7 or np.max(np.abs(self.R[-1, :] - 1.0)) > 1e-7:
            raise InconsistentInputError("strip map must preserve the edge circles")

    def interpolants(self):
        if "R" not in self._cache:
            self._cache["R"] = SpectralRadialInterpolant(
                self.r_nodes, self.theta_nodes, self.R
            )
            self._cache["T"] = SpectralRadialInterpolant(
                self.r_nodes, self.theta_nodes, self.Theta,
                slope=np.ones_like(self.r_nodes),
            )
        return self._cache["R"], self._cache["T"]

    def monotone_margin(self):
        """min of d1 R over the grid; the map is monotone iff positive."""
        return float(np.min(CubicSpline(self.r_nodes, self.R, axis=0)(self.r_nodes, 1)))

    def is_monotone(self):
        return self.monotone_margin() > 0.0

    def displacement_sup(self):
        return float(
            max(
                np.max(np.abs(self.R - self.r_nodes[:, None])),
                np.max(np.abs(self.Theta - self.theta_nodes[None, :])),
            )
        )

    def edge_rotations(self):
        """Mean angle advance of the two edge circles (theta_0, theta_1)."""
        th = self.theta_nodes[None, :]
        return (
            float(np.mean(self.Theta[0, :] - th)),
            float(np.mean(self.Theta[-1, :] - th)),
        )


def lift_to_strip(lift: DiskMapLift, n_steps=256):
    """Strip-map view of an origin-fixing disk map lift, with its density.

    Lifts with Hamiltonian provenance carry an exact point sampler (one
    extra isotopy integration per call) so downstream constructions can
    evaluate the map between grid rows at integrator accuracy.
    """
    if np.max(np.abs(lift.R[0, :])) > 1e-7:
        raise InconsistentLiftError("disk map must fix the origin to define a strip map")
    r, th = lift.r_nodes, lift.theta_nodes
    rm, tm = np.meshgrid(r, th, indexing="ij")
    density = AreaDensityF(r, th, lift.area_form.density_polar(rm, tm))
    sampler = None
    if lift.hamiltonian is not None and lift.degree is not None:
        from .diskmaps import flow_points

        # a degree-shifted lift differs from the raw flow lift by full turns
        shift = -TWO_PI * lift.degree

        def sampler(radii, hamiltonian=lift.hamiltonian, area_form=lift.area_form,
                    t_end=lift.t_end, theta=th, shift=shift):
            rad, ang = flow_points(hamiltonian, area_form, radii,
                                   np.broadcast_to(theta, radii.shape),
                                   t_end=t_end, n_steps=n_steps)
            return rad, ang + shift

    strip = StripMap(r, th, lift.R.copy(), lift.Theta_lift.copy(),
                     point_sampler=sampler)
    return strip, density


# ---------------------------------------------------------------------------
# batched safeguarded Newton


def _vector_newton(eval_fn, lo, hi, x0, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER,
                   gtol=1e-12):
    """Monotone root solve g(x) = 0 per component with bisection fallback.

    Requires g(lo) <= 0 <= g(hi) componentwise; eval_fn returns (g, g').
    Stops per component on a small step, a small residual, or a collapsed
    bracket (the residual floor matters where g' is small and evaluation
    noise caps the attainable x-resolution).
    """
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()
    x = np.clip(x0.astype(float).copy(), lo, hi)
    done = np.zeros(x.shape, dtype=bool)
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        g, dg = eval_fn(x)
        neg = g < 0.0
        lo = np.where(neg & ~done, x, lo)
        hi = np.where(~neg & ~done, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0.0, -g / np.where(dg > 0.0, dg, 1.0), np.nan)
        cand = x + step
        bad = ~np.isfinite(cand) | (cand < lo) | (cand > hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        newly = (
            (np.abs(cand - x) <= tol)
            | (np.abs(g) <= gtol)
            | (hi - lo <= 4.0 * eps * (1.0 + np.abs(x)))
        )
        x = np.where(done, x, cand)
        done |= newly
        if done.all():
            break
    return x


# ---------------------------------------------------------------------------
# construction: strip map -> generating function


def genfun_from_stripmap(strip: StripMap, density: AreaDensityF,
                         tol=CONSISTENCY_TOL, n_r=None):
    """Integrate the defining relations of W from the r = 1 row.

    Raises InconsistentInputError when the two coordinate relations are not
    curl-consistent within ``tol`` (the map is not area-preserving for this
    density, or the grids do not belong together). ``n_r`` selects the
    radial resolution of W (default: the strip's); oversampling is useful
    when the strip carries an exact point sampler.
    """
    th = strip.theta_nodes
    r = strip.r_nodes if n_r is None else radial_nodes(n_r)
    n_r, n_theta = r.size, th.size
    rho = r[:, None] + 0.0 * th[None, :]
    theta = 0.0 * r[:, None] + th[None, :]

    # radial preimage r(rho, theta): per-column monotone inverse of R
    r_interp, t_interp = strip.interpolants()

    def r_eval(x):
        return r_interp.at_nodes(x) - rho, r_interp.at_nodes(x, dr=1)

    pre_r = _vector_newton(
        r_eval,
        lo=np.zeros_like(rho),
        hi=np.ones_like(rho),
        x0=rho,
    )
    pre_theta = t_interp.at_nodes(pre_r)
    if strip.point_sampler is not None:
        # one exact evaluation of the map along the preimage rows replaces
        # interpolation error by integrator error (with a first-order
        # Newton/tangent correction of the residual radius defect)
        map_r, map_t = strip.point_sampler(pre_r)
        defect = map_r - rho
        slope_r = r_interp.at_nodes(pre_r, dr=1)
        slope_t = t_interp.at_nodes(pre_r, dr=1)
        pre_r = np.clip(pre_r - defect / slope_r, 0.0, 1.0)
        pre_theta = map_t - defect * (slope_t / slope_r)

    field_rho = density.B_at(rho, theta) - density.B_at(rho, pre_theta)
    field_theta = density.A_at(rho, theta) - density.A_at(pre_r, theta)

    k_r = min(5, r.size - 1)
    curl = periodic_derivative(field_rho, axis=1) - make_interp_spline(
        r, field_theta, k=k_r, axis=0
    )(r, nu=1)
    residual = float(np.max(np.abs(curl[1:-1, :])))

    cum = make_interp_spline(r, field_rho, k=k_r, axis=0).antiderivative()(r)
    w = cum - cum[-1:, :]  # W(rho) = -int_rho^1 field_rho
    w[-1, :] = 0.0
    cross = float(np.max(np.abs(periodic_derivative(w, axis=1) - field_theta)[1:-1, :]))
    residual = max(residual, cross)
    if residual > tol:
        raise InconsistentInputError(
            f"generating relations are curl-inconsistent: residual {residual:.2e} > {tol:.0e}"
        )
    out = GenFunW(r, th, w, d1=field_rho)
    out.consistency_residual = residual
    return out


# ---------------------------------------------------------------------------
# inversion: generating function -> strip map


def stripmap_from_genfun(genfun: GenFunW, density: AreaDensityF, warm=None,
                         tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER, gtol=1e-12):
    """Solve the defining relations for the strip map on the standard grid.

    Stage 1 solves A(R, theta) - d2 W(R, theta) = A(r, theta) for R (monotone
    by the twist condition d1 d2 W < F); stage 2 solves
    B(R, Theta) = B(R, theta) - d1 W(R, theta) for the angle lift Theta.
    Newton iterations are bracketed and fall back to bisection.
    """
    r, th = genfun.r_nodes, genfun.theta_nodes
    n_r, n_theta = genfun.W.shape
    w = genfun.interp()
    d1i = genfun.d1_interp()
    # both edge rows are pinned by the boundary conditions (R(0,.) = 0,
    # R(1,.) = 1) and the radial stage degenerates there (F -> 0 at r = 0
    # makes the root a bracket-edge double root), so only interior rows
    # enter the radial solve
    rho = r[1:-1, None] + 0.0 * th[None, :]
    theta = 0.0 * r[1:-1, None] + th[None, :]
    target_a = density.A_at(rho, theta)

    def w_d1(x, dtheta=0):
        if d1i is not None:
            return d1i.at_nodes(x, dtheta=dtheta)
        return w.at_nodes(x, dr=1, dtheta=dtheta)

    def big_r_eval(x):
        g = density.A_at(x, theta) - w.at_nodes(x, dtheta=1) - target_a
        dg = density.F_at(x, theta) - w_d1(x, dtheta=1)
        return g, dg

    x0, x0t = rho, r[1:, None] * 0.0 + th[None, :]
    if warm is not None:
        if warm.R.shape == (n_r, n_theta):
            x0, x0t = warm.R[1:-1], warm.Theta[1:]
        else:
            warm_r, warm_t = warm.interpolants()
            x0 = warm_r.at_nodes(rho)
            x0t = warm_t.at_nodes(r[1:, None] + 0.0 * th[None, :])
    big_r = np.empty((n_r, n_theta))
    big_r[0, :] = 0.0
    big_r[-1, :] = 1.0
    big_r[1:-1] = _vector_newton(
        big_r_eval,
        lo=np.zeros_like(rho),
        hi=np.ones_like(rho),
        x0=x0,
        tol=tol,
        max_iter=max_iter,
        gtol=gtol,
    )

    # the angle stage degenerates on the r = 0 row only (B and F vanish
    # there); solve rows 1.. and take the radial limit for row 0
    theta_in = 0.0 * r[1:, None] + th[None, :]
    br = big_r[1:]
    target_b = density.B_at(br, theta_in) - w_d1(br)

    def theta_eval(x):
        return density.B_at(br, x) - target_b, density.F_at(br, np.mod(x, TWO_PI))

    lo = theta_in - TWO_PI
    hi = theta_in + TWO_PI
    for _ in range(4):
        glo = density.B_at(br, lo) - target_b
        ghi = density.B_at(br, hi) - target_b
        if np.all(glo <= 0.0) and np.all(ghi >= 0.0):
            break
        lo = np.where(glo > 0.0, lo - TWO_PI, lo)
        hi = np.where(ghi < 0.0, hi + TWO_PI, hi)
    else:
        raise ConditionError("twist_bracket", "angle stage", float(np.max(np.abs(glo))))
    big_theta = np.empty((n_r, n_theta))
    big_theta[1:] = _vector_newton(
        theta_eval, lo=lo, hi=hi, x0=np.clip(x0t, lo, hi), tol=tol,
        max_iter=max_iter, gtol=gtol,
    )
    big_theta[0, :] = 2.0 * big_theta[1, :] - big_theta[2, :]
    return StripMap(r, th, big_r, big_theta)


# ---------------------------------------------------------------------------
# admissibility conditions


def check_genfun_conditions(genfun: GenFunW, density: AreaDensityF, band=4,
                            translation_tol=1e-8):
    """Margins of the four admissibility conditions of W.

    (1) 0 < A - d2 W < A(1, theta) on the interior grid,
    (2) d1 d2 W < F on the interior grid,
    (3) W is 2pi-periodic in theta (exact for fundamental-domain grids),
    (4) W agrees with the edge closed forms c1 + c2 * int_0^r Fbar and
        c3 * int_r^1 Fbar on ``band`` rows at each edge; the fitted edge
        rotation numbers are theta_0 = -c2 and theta_1 = c3.
    """
    r, th = genfun.r_nodes, genfun.theta_nodes
    rho = r[:, None] + 0.0 * th[None, :]
    theta = 0.0 * r[:, None] + th[None, :]
    a = density.A_at(rho, theta)
    d2 = genfun.grid_d2()
    inner = a - d2
    upper = a[-1:, :] - inner
    margin_1 = float(min(np.min(inner[1:-1, :]), np.min(upper[1:-1, :])))
    d12 = periodic_derivative(genfun.grid_d1(), axis=1)
    margin_2 = float(np.min((density.F - d12)[1:-1, :]))
    margin_3 = 0.0  # grids live on the fundamental domain

    fbar_cum = density.radial_mean_cumulative(r)
    total = fbar_cum[-1]
    # inner band: W = c1 + c2 * int_0^r Fbar
    rows = slice(0, band)
    basis = fbar_cum[rows]
    wband = genfun.W[rows, :]
    c2 = float(np.polyfit(basis, wband.mean(axis=1), 1)[0]) if band > 1 else 0.0
    c1 = float(np.mean(wband - c2 * basis[:, None]))
    dev_inner = float(np.max(np.abs(wband - (c1 + c2 * basis[:, None]))))
    # outer band: W = c3 * int_r^1 Fbar
    rows = slice(-band, None)
    basis_out = total - fbar_cum[rows]
    wband_out = genfun.W[rows, :]
    denom = float(np.sum(basis_out ** 2) * len(th))
    c3 = float(np.sum(wband_out * basis_out[:, None]) / denom) if denom > 0 else 0.0
    dev_outer = float(np.max(np.abs(wband_out - c3 * basis_out[:, None])))
    margin_4 = float(-max(dev_inner, dev_outer))

    return {
        "condition_1": {"holds": margin_1 > 0.0, "margin": margin_1},
        "condition_2": {"holds": margin_2 > 0.0, "margin": margin_2},
        "condition_3": {"holds": True, "margin": margin_3},
        "condition_4": {
            "holds": max(dev_inner, dev_outer) < translation_tol,
            "margin": margin_4,
            "c1": c1,
            "c2": c2,
            "c3": c3,
            "theta_0": -c2,
            "theta_1": c3,
        },
    }


def enforce_translation_bands(genfun: GenFunW, density: AreaDensityF, band=6):
    """Blend the exact edge closed forms into ``band`` rows at each edge.

    Returns a new W that satisfies condition (4) exactly on half the band
    and transitions smoothly to the original values; the interior is
    untouched beyond the bands.
    """
    r, th = genfun.r_nodes, genfun.theta_nodes
    w = genfun.W.copy()
    fbar_cum = density.radial_mean_cumulative(r)
    total = fbar_cum[-1]

    c2 = float(
        np.mean(genfun.grid_d1()[1:band, :] / density.radial_mean(r[1:band])[:, None])
    )
    c1 = float(np.mean(w[0, :]))
    target_in = c1 + c2 * fbar_cum
    c3 = float(-np.mean(genfun.grid_d1()[-band:, :]) / density.radial_mean(r[-1]))
    target_out = c3 * (total - fbar_cum)

    def smooth(u):
        u = np.clip(u, 0.0, 1.0)
        return u * u * (3.0 - 2.0 * u)

    n_band = band
    blend_in = 1.0 - smooth((r - r[n_band // 2]) / (r[n_band] - r[n_band // 2]))
    blend_in[: n_band // 2 + 1] = 1.0
    blend_in[n_band:] = 0.0
    blend_out = smooth((r - r[-n_band - 1]) / (r[-n_band // 2 - 1] - r[-n_band - 1]))
    blend_out[: -n_band] = 0.0
    blend_out[-(n_band // 2) - 1:] = 1.0

    w = (
        w * (1.0 - blend_in[:, None] - blend_out[:, None])
        + target_in[:, None] * blend_in[:, None]
        + target_out[:, None] * blend_out[:, None]
    )
    w[-1, :] = 0.0
    return GenFunW(r, th, w)


# ---------------------------------------------------------------------------
# fixed and critical points


def strip_fixed_points(strip: StripMap, newton_tol=1e-10, merge_tol=1e-5):
    """Interior fixed points of the lift (R = r and Theta = theta exactly)."""
    r, th = strip.r_nodes, strip.theta_nodes
    disp = np.hypot(strip.R - r[:, None], strip.Theta - th[None, :])
    n_r, n_theta = disp.shape
    mid = disp[1:-1, :]
    best_nb = np.minimum(
        np.minimum(disp[:-2, :], disp[2:, :]),
        np.minimum(np.roll(disp, 1, axis=1)[1:-1, :], np.roll(disp, -1, axis=1)[1:-1, :]),
    )
    mask = (mid <= best_nb) & ((mid < 1e-3) | (mid < best_nb))
    hits = np.argwhere(mask)
    order = np.lexsort((hits[:, 1], hits[:, 0], mid[mask.nonzero()]))
    ri, ti = strip.interpolants()
    found = []
    h_r = r[1] - r[0]
    for k in order[:64]:
        i, j = hits[k]
        p = np.array([r[i + 1], th[j]])
        ok = False
        for _ in range(60):
            gr = float(ri(p[0], p[1]) - p[0])
            gt = float(ti(p[0], p[1]) - p[1])
            if np.hypot(gr, gt) <= newton_tol:
                ok = True
                break
            jac = np.array([
                [float(ri(p[0], p[1], dr=1)) - 1.0, float(ri(p[0], p[1], dtheta=1))],
                [float(ti(p[0], p[1], dr=1)), float(ti(p[0], p[1], dtheta=1)) - 1.0],
            ])
            try:
                step = np.linalg.solve(jac, -np.array([gr, gt]))
            except np.linalg.LinAlgError:
                break
            p = p + step
            if p[0] < 1.5 * h_r or p[0] > 1.0 - 1.5 * h_r:
                break
        if not ok:
            continue
        p_point = (float(p[0]), float(np.mod(p[1], TWO_PI)))
        if any(
            np.hypot(p_point[0] - q[0], p_point[1] - q[1]) < merge_tol for q in found
        ):
            continue
        found.append(p_point)
    found.sort(key=lambda q: (round(q[0], 9), round(q[1], 9)))
    return found


def genfun_critical_points(genfun: GenFunW, newton_tol=1e-10, merge_tol=1e-5):
    """Interior critical points of W via Newton on its gradient."""
    r, th = genfun.r_nodes, genfun.theta_nodes
    grad = np.hypot(genfun.grid_d1(), genfun.grid_d2())
    mid = grad[1:-1, :]
    best_nb = np.minimum(
        np.minimum(grad[:-2, :], grad[2:, :]),
        np.minimum(np.roll(grad, 1, axis=1)[1:-1, :], np.roll(grad, -1, axis=1)[1:-1, :]),
    )
    mask = mid < best_nb
    hits = np.argwhere(mask)
    order = np.lexsort((hits[:, 1], hits[:, 0], mid[mask.nonzero()]))
    w = genfun.interp()
    h_r = r[1] - r[0]
    found = []
    for k in order[:64]:
        i, j = hits[k]
        p = np.array([r[i + 1], th[j]])
        ok = False
        for _ in range(60):
            g = np.array([float(w(p[0], p[1], dr=1)), float(w(p[0], p[1], dtheta=1))])
            if np.hypot(*g) <= newton_tol:
                ok = True
                break
            hess = np.array([
                [float(w(p[0], p[1], dr=2)), float(w(p[0], p[1], dr=1, dtheta=1))],
                [float(w(p[0], p[1], dr=1, dtheta=1)), float(w(p[0], p[1], dtheta=2))],
            ])
            try:
                step = np.linalg.solve(hess, -g)
            except np.linalg.LinAlgError:
                break
            p = p + step
            if p[0] < 1.5 * h_r or p[0] > 1.0 - 1.5 * h_r:
                break
        if not ok:
            continue
        p_point = (float(p[0]), float(np.mod(p[1], TWO_PI)))
        if any(
            np.hypot(p_point[0] - q[0], p_point[1] - q[1]) < merge_tol for q in found
        ):
            continue
        found.append(p_point)
    found.sort(key=lambda q: (round(q[0], 9), round(q[1], 9)))
    return found


# ---------------------------------------------------------------------------
# positive-Hamiltonian pipeline


def _time_derivative(stack, dt):
    """Fourth-order finite differences along axis 0 of a uniform family."""
    n = stack.shape[0]
    out = np.empty_like(stack)
    if n < 5:
        return np.gradient(stack, dt, axis=0, edge_order=2)
    out[2:-2] = (
        stack[:-4] - 8.0 * stack[1:-3] + 8.0 * stack[3:-1] - stack[4:]
    ) / (12.0 * dt)
    fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * dt)
    out[0] = sum(c * stack[k] for k, c in enumerate(fwd))
    out[1] = sum(c * stack[1 + k] for k, c in enumerate(fwd)) if n >= 6 else out[2]
    if n >= 6:
        out[1] = (
            -3.0 * stack[0] - 10.0 * stack[1] + 18.0 * stack[2]
            - 6.0 * stack[3] + stack[4]
        ) / (12.0 * dt)
    out[-1] = -sum(c * stack[-1 - k] for k, c in enumerate(fwd))
    out[-2] = -(
        -3.0 * stack[-1] - 10.0 * stack[-2] + 18.0 * stack[-3]
        - 6.0 * stack[-4] + stack[-5]
    ) / (12.0 * dt)
    return out


@dataclass(frozen=True)
class PositivityReport:
    min_interior: float
    fixed_points: tuple  # of dicts {r, theta, W, H_mismatch}
    conditions: dict
    n_steps: int
    grid: tuple
    hamiltonians: np.ndarray | None = None  # (n_steps+1, n_r, n_theta) when requested

    def to_json_dict(self):
        short = {"condition_1": "c1", "condition_2": "c2",
                 "condition_3": "c3", "condition_4": "c4"}
        return {
            "min_interior": self.min_interior,
            "fixed_points": list(self.fixed_points),
            "conditions": {short[k]: v for k, v in self.conditions.items()},
            "n_steps": self.n_steps,
            "grid": {"n_r": self.grid[0], "n_theta": self.grid[1]},
        }


def write_positivity_report(report: PositivityReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def positive_hamiltonian_pipeline(source, density: AreaDensityF,
                                  n_steps=64, keep_fields=False,
                                  condition_check=True, n_r=None,
                                  newton_tol=1e-10, newton_gtol=1e-11):
    """Extract the Hamiltonian generating the family W_t = t W.

    ``source`` is either a monotone StripMap (its generating function is
    computed first) or a GenFunW. The maps Phi_t are inverted per time node
    (warm-started), the isotopy velocity is differenced in t, and
    H_t o Phi_t is recovered on the source grid by radial integration of
    F(Phi) (dR/dt dTheta/ds - dTheta/dt dR/ds) with H(1, .) = 0. Reports
    the interior minimum over all times and the mismatch |H_t - W| at the
    fixed points of the family.

    Raises ConditionError when the admissibility hypotheses fail (the
    conditions are affine in t, so checking the t = 1 member suffices) and
    HypothesisError when W is not positive on the r = 0 edge or at an
    interior fixed point (the positivity conclusion is not available).
    """
    if isinstance(source, StripMap):
        if not source.is_monotone():
            raise MonotonicityError(
                f"strip map is not monotone: min d1 R = {source.monotone_margin():.3e}"
            )
        genfun = genfun_from_stripmap(source, density, n_r=n_r)
    else:
        genfun = source
    conditions = check_genfun_conditions(genfun, density)
    if condition_check:
        for name in ("condition_1", "condition_2", "condition_4"):
            if not conditions[name]["holds"]:
                raise ConditionError(name, "pipeline hypothesis", conditions[name]["margin"])
        w0 = float(np.min(genfun.W[0, :]))
        if w0 <= 0.0:
            raise HypothesisError(
                f"W must be positive on the r = 0 edge (min {w0:.3e})"
            )
        w_interp = genfun.interp()
        for (pr, pt) in genfun_critical_points(genfun):
            val = float(w_interp(pr, pt))
            if val <= 0.0:
                raise HypothesisError(
                    f"fixed point at (r={pr:.4f}, theta={pt:.4f}) has"
                    f" non-positive action W = {val:.3e}"
                )

    r, th = genfun.r_nodes, genfun.theta_nodes
    n_r, n_theta = genfun.W.shape
    times = np.linspace(0.0, 1.0, n_steps + 1)
    rs = np.empty((n_steps + 1, n_r, n_theta))
    thetas = np.empty_like(rs)
    rs[0] = r[:, None] + 0.0 * th[None, :]
    thetas[0] = 0.0 * r[:, None] + th[None, :]
    warm = StripMap(r, th, rs[0].copy(), thetas[0].copy())
    for k in range(1, n_steps + 1):
        warm = stripmap_from_genfun(genfun.scaled(times[k]), density, warm=warm,
                                    tol=newton_tol, gtol=newton_gtol)
        rs[k] = warm.R
        thetas[k] = warm.Theta

    dt = times[1] - times[0]
    drdt = _time_derivative(rs, dt)
    dthdt = _time_derivative(thetas, dt)
    drds = CubicSpline(r, rs, axis=1)(r, 1)
    dthds = CubicSpline(r, thetas, axis=1)(r, 1)
    f_img = density.F_at(rs, np.mod(thetas, TWO_PI))
    integrand = f_img * (drdt * dthds - dthdt * drds)
    cum = spline_cumint_radial(integrand.transpose(1, 0, 2), r).transpose(1, 0, 2)
    # H o Phi_t (r) = -int_r^1 integrand ds, so H vanishes on the outer edge
    ham = cum - cum[:, -1:, :]

    min_interior = float(np.min(ham[:, : n_r - 1, :]))

    fps = strip_fixed_points(StripMap(r, th, rs[-1], thetas[-1]))
    w_interp = genfun.interp()
    wvals = np.array([float(w_interp(pr, pt)) for (pr, pt) in fps])
    mism = np.zeros(len(fps))
    if fps:
        pr = np.array([p[0] for p in fps])
        pt = np.array([p[1] for p in fps])
        for k in range(n_steps + 1):
            hk = PeriodicBicubic(r, th, ham[k])(pr, pt)
            mism = np.maximum(mism, np.abs(hk - wvals))
    records = [
        {"r": p[0], "theta": p[1], "W": float(wvals[i]), "H_mismatch": float(mism[i])}
        for i, p in enumerate(fps)
    ]

    return PositivityReport(
        min_interior=min_interior,
        fixed_points=tuple(records),
        conditions=conditions,
        n_steps=n_steps,
        grid=(n_r, n_theta),
        hamiltonians=ham if keep_fields else None,
    )


# ---------------------------------------------------------------------------
# CSV interchange


def write_genfun_csv(genfun: GenFunW, path):
    n_r, n_theta = genfun.W.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n_r,n_theta\n")
        fh.write(f"{n_r},{n_theta}\n")
        fh.write("r,theta,W\n")
        for i in range(n_r):
            for j in range(n_theta):
                fh.write(
                    f"{genfun.r_nodes[i]:.17g},{genfun.theta_nodes[j]:.17g},"
                    f"{genfun.W[i, j]:.17g}\n"
                )


def read_genfun_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "n_r,n_theta":
            raise InconsistentInputError("missing n_r,n_theta header")
        n_r, n_theta = (int(tok) for tok in fh.readline().strip().split(","))
        data = np.loadtxt(fh, delimiter=",", skiprows=1)
    if data.shape[0] != n_r * n_theta:
        raise InconsistentInputError("row count does not match the declared grid")
    r = np.unique(data[:, 0])
    th = np.unique(data[:, 1])
    if len(r) != n_r or len(th) != n_theta:
        raise InconsistentInputError("node values do not match the declared grid")
    return GenFunW(r, th, data[:, 2].reshape(n_r, n_theta))
