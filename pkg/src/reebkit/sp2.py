"""Arcs in Sp(2) = SL(2, R): rotation numbers, positivity, classification.

An arc is a sampled path Phi(t) starting at the identity. Its rotation
number rho is the real-valued continuous lift of the angular part of the
path; it can be computed two independent ways:

* ``eigenvalue_lift`` — lift the fractional rotation number rho_bar(Phi(t))
  (argument of the elliptic eigenvalue / 0 or 1/2 in the hyperbolic range)
  continuously from rho_bar(id) = 0;
* ``winding_limit`` — track the winding of a fixed vector under the path
  extended periodically by its endpoint, and take the per-period slope.

Conventions: the plane carries the area form w(u, v) = u1 v2 - u2 v1 and
J2 = [[0, -1], [1, 0]] (multiplication by i), so the arc exp(J2 t) is the
counterclockwise rotation by t radians and has rho = 1/(2 pi) over t in
[0, 1]. Positive arcs are those generated by Phi' = J2 S(t) Phi with
S(t) positive definite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError
from .gridtools import TWO_PI
from .prng import generator

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])

DET_TOL = 1e-6
LIFT_STEP_MAX = 0.25  # quarter turn: unambiguous principal-branch continuation


def _det22(m):
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


@dataclass(frozen=True)
class Sp2Arc:
    """Sampled path in Sp(2): times t0 = 0 < ... < tN, matrices Phi(t_i)."""

    times: np.ndarray
    matrices: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        m = np.asarray(self.matrices, dtype=float)
        if t.ndim != 1 or m.shape != (t.size, 2, 2):
            raise ValueError("need times (N+1,) and matrices (N+1, 2, 2)")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if not np.allclose(m[0], np.eye(2), atol=1e-9):
            raise ValueError("arc must start at the identity")
        det_err = np.max(np.abs(_det22(m) - 1.0))
        if det_err > DET_TOL:
            raise ValueError(f"matrices leave SL(2): max |det - 1| = {det_err:.2e}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "matrices", m)

    @property
    def endpoint(self):
        return self.matrices[-1]

    @classmethod
    def from_generator(cls, s_of_t, t_end=1.0, samples=2048):
        """Integrate Phi' = J2 S(t) Phi by RK4, renormalizing det each step.

        Output times are rescaled to [0, 1]; rotation number and the sign
        of the generator are invariant under this reparametrization.
        """
        t_end = float(t_end)
        ts = np.linspace(0.0, t_end, samples + 1)
        h = t_end / samples
        mats = np.empty((samples + 1, 2, 2))
        mats[0] = np.eye(2)
        phi = np.eye(2)

        def rhs(t, m):
            return J2 @ np.asarray(s_of_t(t), dtype=float) @ m

        for k in range(samples):
            t = ts[k]
            k1 = rhs(t, phi)
            k2 = rhs(t + 0.5 * h, phi + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, phi + 0.5 * h * k2)
            k4 = rhs(t + h, phi + h * k3)
            phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            phi = phi / np.sqrt(_det22(phi))
            mats[k + 1] = phi
        return cls(np.linspace(0.0, 1.0, samples + 1), mats)


def rotation_arc(angle, samples=512):
    """t -> rotation by angle*t, t in [0, 1]."""
    ts = np.linspace(0.0, 1.0, samples + 1)
    c, s = np.cos(angle * ts), np.sin(angle * ts)
    mats = np.empty((samples + 1, 2, 2))
    mats[:, 0, 0] = c
    mats[:, 0, 1] = -s
    mats[:, 1, 0] = s
    mats[:, 1, 1] = c
    return Sp2Arc(ts, mats)


def identity_arc(samples=8):
    ts = np.linspace(0.0, 1.0, samples + 1)
    return Sp2Arc(ts, np.broadcast_to(np.eye(2), (samples + 1, 2, 2)).copy())


def retract_to_rotation(arc: Sp2Arc, samples=256):
    """Continue the arc to its polar rotation part along M P^(-tau).

    With M = arc endpoint and polar decomposition M = U P (U a rotation,
    P symmetric positive definite, det P = 1), the tail tau -> M P^(-tau)
    stays in SL(2) and ends at U. Arcs ending at honest rotations make the
    winding-limit definition exact at finite iteration depth.
    """
    m = arc.endpoint
    w, v = np.linalg.eigh(m.T @ m)  # P^2 = M^T M
    taus = np.linspace(0.0, 1.0, samples + 1)[1:]
    # P^(-tau) = V diag(w^(-tau/2)) V^T
    powers = w[None, :] ** (-0.5 * taus[:, None])
    tail = m @ (v[None] * powers[:, None, :]) @ v.T
    times = np.concatenate([0.5 * arc.times, 0.5 + 0.5 * taus])
    mats = np.concatenate([arc.matrices, tail])
    return Sp2Arc(times, mats)


def _fractional_rotation(mats):
    """rho_bar in [0, 1): eigenvalue argument /2pi, hyperbolic 0 or 1/2."""
    tr = mats[..., 0, 0] + mats[..., 1, 1]
    frac = np.where(tr <= -2.0, 0.5, 0.0)
    ell = np.abs(tr) < 2.0
    theta = np.arccos(np.clip(tr[ell] / 2.0, -1.0, 1.0)) / TWO_PI
    # direction of the elliptic rotation: sign of w(e1, Phi e1) = Phi[1,0],
    # nonzero whenever Phi is elliptic (no real eigenvectors)
    frac[ell] = np.where(mats[ell, 1, 0] < 0.0, 1.0 - theta, theta)
    return frac


def eigenvalue_lift(arc: Sp2Arc):
    frac = _fractional_rotation(arc.matrices)
    d = np.diff(frac)
    d -= np.round(d)
    bad = np.abs(d) >= LIFT_STEP_MAX
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ResolutionError(
            f"rho_bar moves {abs(d[k]):.3f} >= {LIFT_STEP_MAX} between samples "
            f"{k} and {k + 1}; refine the arc sampling"
        )
    return float(frac[0] + d.sum())


def _winding_angle(mats, u):
    """Continuous angle swept by mats[k] @ u along the sample index."""
    w = mats @ u
    ang = np.arctan2(w[:, 1], w[:, 0])
    d = np.diff(ang)
    d -= TWO_PI * np.round(d / TWO_PI)
    bad = np.abs(d) >= 0.5 * np.pi
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ResolutionError(
            f"vector turns {abs(d[k]):.3f} rad >= pi/2 between samples "
            f"{k} and {k + 1}; refine the arc sampling"
        )
    return float(d.sum())


def winding_limit(arc: Sp2Arc, n_iter=64):
    """Per-period winding slope of v = (1,0) under the periodized arc.

    The arc is extended by Phi(t + jT) = Phi(t) Phi(T)^j; the least-squares
    slope of the cumulative winding W(k) against k recovers 2 pi rho. For
    arcs ending at a rotation the winding is the same for every starting
    vector, so W(k) is exactly linear and the slope is exact at finite n.
    """
    u = np.array([1.0, 0.0])
    end = arc.endpoint
    per = np.empty(n_iter)
    for j in range(n_iter):
        per[j] = _winding_angle(arc.matrices, u)
        u = end @ u
        u /= np.hypot(u[0], u[1])
    w_cum = np.cumsum(per)
    k = np.arange(1.0, n_iter + 1.0)
    kc = k - k.mean()
    slope = (kc @ (w_cum - w_cum.mean())) / (kc @ kc)
    return float(slope / TWO_PI)


def rotation_number_of_arc(arc: Sp2Arc, method="eigenvalue_lift", n_iter=64):
    if method == "eigenvalue_lift":
        return eigenvalue_lift(arc)
    if method == "winding_limit":
        return winding_limit(arc, n_iter=n_iter)
    raise ValueError(f"unknown method {method!r}")


def positive_path_check(arc: Sp2Arc):
    """Recover S(t) = -J2 Phi' Phi^(-1) by finite differences and test S > 0.

    Returns {is_positive, min_eigenvalue, rho}; positivity of the generator
    implies rho > 0 (checked empirically by callers).
    """
    dmat = np.gradient(arc.matrices, arc.times, axis=0, edge_order=2)
    inv = np.linalg.inv(arc.matrices)
    s = -J2 @ (dmat @ inv)
    s = 0.5 * (s + np.swapaxes(s, -1, -2))
    min_eig = float(np.linalg.eigvalsh(s).min())
    return {
        "is_positive": bool(min_eig > 0.0),
        "min_eigenvalue": min_eig,
        "rho": eigenvalue_lift(arc),
    }


def classify_monodromy(m, degenerate_tol=1e-6):
    """elliptic | pos_hyperbolic | neg_hyperbolic | degenerate (eigenvalue 1)."""
    eigs = np.linalg.eigvals(np.asarray(m, dtype=float))
    if np.min(np.abs(eigs - 1.0)) <= degenerate_tol:
        return "degenerate"
    tr = m[0, 0] + m[1, 1]
    if abs(tr) < 2.0:
        return "elliptic"
    return "pos_hyperbolic" if tr > 0 else "neg_hyperbolic"


def sample_generator(seed, positive=False, modes=3, scale=1.0):
    """Random smooth symmetric generator t -> S(t) (trig polynomial entries).

    With positive=True returns S(t) = G(t)^T G(t) + 0.2*scale*I, positive
    definite for all t. Deterministic in the seed.
    """
    rng = generator(seed)
    decay = 1.0 / (1.0 + np.arange(modes))

    def trig_table(rows):
        c0 = rng.normal(size=rows) * scale
        cc = rng.normal(size=(rows, modes)) * scale * decay
        cs = rng.normal(size=(rows, modes)) * scale * decay
        def evaluate(t):
            ang = TWO_PI * np.arange(1, modes + 1) * t
            return c0 + cc @ np.cos(ang) + cs @ np.sin(ang)
        return evaluate

    if positive:
        entries = trig_table(4)
        floor = 0.2 * scale

        def s_of_t(t):
            g = entries(t).reshape(2, 2)
            return g.T @ g + floor * np.eye(2)
    else:
        entries = trig_table(3)

        def s_of_t(t):
            a, b, c = entries(t)
            return np.array([[a, b], [b, c]])

    return s_of_t
