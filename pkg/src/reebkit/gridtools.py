"""Polar-grid helpers: periodic bicubic interpolation, spline integrals.

All grids in this package use the fundamental domain [0,1] x [0,2pi):
radial nodes include both endpoints, angular nodes exclude 2pi.
"""
import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline, make_interp_spline

TWO_PI = 2.0 * np.pi


def radial_nodes(n_r: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_r)


def angular_nodes(n_theta: int) -> np.ndarray:
    return np.arange(n_theta) * (TWO_PI / n_theta)


def polar_mesh(n_r: int, n_theta: int):
    """(r, theta) 1-D node arrays and broadcast 2-D meshes (indexing 'ij')."""
    r = radial_nodes(n_r)
    th = angular_nodes(n_theta)
    R, TH = np.meshgrid(r, th, indexing="ij")
    return r, th, R, TH


class PeriodicBicubic:
    """Bicubic interpolant of values(r_i, theta_j), 2pi-periodic in theta.

    The angular axis is padded by ``pad`` wrapped columns on both sides so
    the spline is smooth across the seam. ``slope`` adds a linear term
    slope(r) * theta for data that is periodic only up to a linear drift
    (continuous angle lifts, B-integrals).
    """

    def __init__(self, r, theta, values, slope=None, pad=6):
        values = np.asarray(values, dtype=float)
        n_theta = theta.size
        if values.shape != (r.size, n_theta):
            raise ValueError("values shape does not match the node arrays")
        self._slope_nodes = None
        if slope is not None:
            slope = np.asarray(slope, dtype=float)
            values = values - slope[:, None] * theta[None, :]
            self._slope_nodes = CubicSpline(r, slope)
        idx = np.arange(-pad, n_theta + pad) % n_theta
        th_pad = np.concatenate(
            [theta[idx[:pad]] - TWO_PI, theta, theta[idx[-pad:]] + TWO_PI]
        )
        self._spline = RectBivariateSpline(r, th_pad, values[:, idx], kx=3, ky=3)
        self._r0, self._r1 = r[0], r[-1]

    def __call__(self, r, theta, dr=0, dtheta=0):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        r, theta = np.broadcast_arrays(r, theta)
        shape = r.shape
        rf = np.clip(r.ravel(), self._r0, self._r1)
        tf = np.mod(theta.ravel(), TWO_PI)
        out = self._spline.ev(rf, tf, dx=dr, dy=dtheta)
        if self._slope_nodes is not None:
            s = self._slope_nodes(rf, nu=dr)
            if dtheta == 0:
                out = out + s * theta.ravel()
            elif dtheta == 1:
                out = out + s
        return out.reshape(shape)


def spline_cumint_radial(values, r):
    """Cumulative integral from r[0] along axis 0 via spline antiderivative.

    Returns I with I[i, j] = int_{r[0]}^{r[i]} values(s, j) ds, one cubic
    spline per angular column; O(h^4) accurate on smooth data.
    """
    sp = CubicSpline(r, values, axis=0)
    anti = sp.antiderivative()
    return anti(r) - anti(r[0])


def spline_cumint_angular(values, theta):
    """Cumulative integral from theta[0] along axis 1 (non-periodic lift)."""
    sp = CubicSpline(theta, values, axis=1)
    anti = sp.antiderivative()
    return anti(theta) - anti(theta[0])


def periodic_derivative(values, axis, period=TWO_PI):
    """Spectral derivative along a uniformly sampled periodic axis."""
    n = values.shape[axis]
    k = 1j * np.fft.rfftfreq(n, d=1.0 / n) * (TWO_PI / period)
    spec = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = k.size
    return np.fft.irfft(spec * k.reshape(shape), n=n, axis=axis)


def periodic_antiderivative(values, axis, period=TWO_PI):
    """Spectral antiderivative of the zero-mean part along a periodic axis.

    Returns Q with dQ/dx = values - mean(values) and Q = 0 at the first
    node of the axis; the caller reattaches the mean * x linear part.
    """
    n = values.shape[axis]
    k = 1j * np.fft.rfftfreq(n, d=1.0 / n) * (TWO_PI / period)
    spec = np.fft.rfft(values, axis=axis)
    shape = [1] * values.ndim
    shape[axis] = k.size
    k = k.reshape(shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.where(k == 0, 0.0, spec / np.where(k == 0, 1.0, k))
    out = np.fft.irfft(anti, n=n, axis=axis)
    first = [slice(None)] * values.ndim
    first[axis] = slice(0, 1)
    return out - out[tuple(first)]


class SpectralRadialInterpolant:
    """Quintic-spline-in-r, trigonometric-in-theta interpolant of a grid.

    Each angular Fourier mode of values(r_i, theta_j) is interpolated by a
    degree-``k`` spline in r, so radial derivatives converge one order
    faster than bicubic interpolation and angular derivatives are spectral.
    ``slope`` adds a linear term slope(r) * theta exactly as in
    :class:`PeriodicBicubic`. Intended for smooth fields where derivative
    accuracy limits a downstream solve.
    """

    def __init__(self, r, theta, values, slope=None, k=5, mode_rtol=1e-13):
        values = np.asarray(values, dtype=float)
        n_theta = theta.size
        if values.shape != (r.size, n_theta):
            raise ValueError("values shape does not match the node arrays")
        self._slope_nodes = None
        if slope is not None:
            slope = np.asarray(slope, dtype=float)
            values = values - slope[:, None] * theta[None, :]
            self._slope_nodes = CubicSpline(r, slope)
        coeffs = np.fft.rfft(values, axis=1)
        n_modes = coeffs.shape[1]
        if mode_rtol is not None and n_modes > 2:
            # drop the trailing block of angular modes that is numerically
            # zero relative to the spectrum peak: smooth fields decay fast
            # and evaluation cost is linear in the retained mode count
            peaks = np.max(np.abs(coeffs), axis=0)
            cut = float(np.max(peaks)) * mode_rtol
            significant = np.nonzero(peaks > cut)[0]
            keep = int(significant[-1]) + 1 if significant.size else 1
            if keep < n_modes:
                coeffs = coeffs[:, :keep]
                n_modes = keep
        self._spline = make_interp_spline(r, coeffs, k=min(k, r.size - 1), axis=0)
        self._modes = np.arange(n_modes, dtype=float)
        weights = np.full(n_modes, 2.0 / n_theta)
        weights[0] = 1.0 / n_theta
        self._nyquist = None
        if n_theta % 2 == 0 and n_modes == n_theta // 2 + 1:
            weights[-1] = 1.0 / n_theta
            self._nyquist = n_theta // 2
        self._weights = weights
        self._r0, self._r1 = r[0], r[-1]
        self._theta_nodes = np.asarray(theta, dtype=float)
        self._node_phases = np.exp(1j * np.outer(self._theta_nodes, self._modes))

    def _factor(self, dtheta):
        factor = self._weights * (1j * self._modes) ** dtheta
        if dtheta % 2 == 1 and self._nyquist is not None:
            factor = factor.copy()
            factor[-1] = 0.0
        return factor

    def _slope_term(self, out, rf, theta_flat, dr, dtheta):
        if self._slope_nodes is not None:
            s = self._slope_nodes(rf, nu=dr)
            if dtheta == 0:
                out = out + s * theta_flat
            elif dtheta == 1:
                out = out + s
        return out

    def __call__(self, r, theta, dr=0, dtheta=0):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        r, theta = np.broadcast_arrays(r, theta)
        shape = r.shape
        rf = np.clip(r.ravel(), self._r0, self._r1)
        tf = theta.ravel()
        c = self._spline(rf, nu=dr) * self._factor(dtheta)[None, :]
        phases = np.exp(1j * np.outer(tf, self._modes))
        out = np.einsum("pk,pk->p", c.real, phases.real)
        out -= np.einsum("pk,pk->p", c.imag, phases.imag)
        out = self._slope_term(out, rf, tf, dr, dtheta)
        return out.reshape(shape)

    def at_nodes(self, r, dr=0, dtheta=0):
        """Evaluate at radii ``r`` whose columns sit at the stored angular nodes.

        ``r`` has shape (..., n_theta); this skips the per-point phase
        computation of :meth:`__call__` and is the fast path for Newton
        solves running on the standard grid.
        """
        r = np.asarray(r, dtype=float)
        shape = r.shape
        n_theta = self._theta_nodes.size
        if shape[-1] != n_theta:
            raise ValueError("last axis must match the angular nodes")
        rf = np.clip(r.reshape(-1, n_theta), self._r0, self._r1)
        c = self._spline(rf.ravel(), nu=dr).reshape(rf.shape[0], n_theta, -1)
        c = c * self._factor(dtheta)[None, None, :]
        out = np.einsum("mjk,jk->mj", c.real, self._node_phases.real)
        out -= np.einsum("mjk,jk->mj", c.imag, self._node_phases.imag)
        theta_flat = np.broadcast_to(self._theta_nodes, rf.shape).ravel()
        out = self._slope_term(out.ravel(), rf.ravel(), theta_flat, dr, dtheta)
        return out.reshape(shape)


def central_derivative(values, x, axis=0):
    """Fourth-order interior finite-difference derivative on a uniform grid."""
    return np.gradient(values, x, axis=axis, edge_order=2)


def unwrap_increment(prev_angle, new_raw):
    """Continue an unwrapped angle sequence by the principal increment."""
    delta = np.mod(new_raw - prev_angle + np.pi, TWO_PI) - np.pi
    return prev_angle + delta


def trapezoid_cummatrix(values, x, axis=0):
    """Plain trapezoid cumulative integral (the documented fallback rule)."""
    values = np.asarray(values, dtype=float)
    dx = np.diff(x)
    sl = [slice(None)] * values.ndim
    sl_lo, sl_hi = list(sl), list(sl)
    sl_lo[axis] = slice(None, -1)
    sl_hi[axis] = slice(1, None)
    shape = [1] * values.ndim
    shape[axis] = dx.size
    segments = 0.5 * (values[tuple(sl_lo)] + values[tuple(sl_hi)]) * dx.reshape(shape)
    out = np.zeros_like(values)
    sl_out = list(sl)
    sl_out[axis] = slice(1, None)
    out[tuple(sl_out)] = np.cumsum(segments, axis=axis)
    return out
