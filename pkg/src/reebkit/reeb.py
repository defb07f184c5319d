"""Reeb dynamics on star-shaped boundaries: flow, closed orbits, invariants.

The Reeb field of lambda0 restricted to {G = 1} is R = J0 grad G / (1/2
<x, grad G>); the same formula is tangent to every level set of G and
normalizes lambda0(R) = 1 there, so trajectories can be integrated with a
plain RK4 step followed by exact radial re-projection (2-homogeneous G).

Closed orbits are found by a shooting method: boundary seed points are
scanned for near-returns, then refined by damped Gauss-Newton
(Levenberg-Marquardt) on the closure defect over a local transverse
section and the period. The defect landscape descends across invariant
tori toward the short closed orbits, so seeds without strict near-returns
still converge. Orbit invariants (monodromy, rotation number,
Conley-Zehnder index) come from the linearized flow expressed in a global
symplectic frame of the contact structure.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import IntegrationError, OffSurfaceError
from .geometry import BOUNDARY_TOL, StarShapedDomain, eval_liouville, eval_symplectic, j_mult
from .prng import DEFAULT_SEED
from .sp2 import Sp2Arc, classify_monodromy, eigenvalue_lift

logger = logging.getLogger(__name__)

NEAR_RETURN_WINDOW = 1e-3
DEDUP_TOL = 1e-6
CLOSURE_TOL = 1e-8
FOLIATED_FRACTION = 0.99

ORBIT_CSV_COLUMNS = ("action", "period", "rotation_number", "cz", "type",
                     "x1", "y1", "x2", "y2")


@dataclass(frozen=True)
class FlowResult:
    """Sampled trajectory of the Reeb flow."""

    times: np.ndarray
    points: np.ndarray
    max_drift: float


@dataclass(frozen=True)
class ReebOrbit:
    """Closed Reeb orbit record.

    type_flag is one of elliptic | pos_hyperbolic | neg_hyperbolic |
    degenerate | foliated_family; for a foliated family the flag is kept
    and degeneracy of the representative monodromy is reported separately
    via degenerate_warning.
    """

    initial_point: np.ndarray
    period: float
    action: float
    samples: np.ndarray
    residual: float
    monodromy: np.ndarray | None = None
    rotation_number: float | None = None
    cz_index: int | None = None
    type_flag: str = "unclassified"
    degenerate_warning: bool = False
    dynamically_convex: bool | None = None


def _reeb_field(dom: StarShapedDomain, x):
    """R = J0 grad G / (1/2 <x, grad G>), valid on every level set {G = c}."""
    x = np.asarray(x, dtype=float)
    g = dom.gradient(x)
    denom = 0.5 * np.sum(x * g, axis=-1, keepdims=True)
    return j_mult(g) / denom


def reeb_vector(dom: StarShapedDomain, x, tol=BOUNDARY_TOL):
    x = np.asarray(x, dtype=float)
    off = np.abs(dom.value(x) - 1.0)
    if np.any(off > tol):
        raise OffSurfaceError(
            f"point is off the boundary by {float(np.max(off)):.3e} (> {tol:.0e})"
        )
    return _reeb_field(dom, x)


def default_step(dom: StarShapedDomain):
    return dom.min_action_hint() / 4096.0


def _project(dom, x):
    return x / np.sqrt(dom.value(x))[..., None]


def _rk4_step(dom, x, h):
    k1 = _reeb_field(dom, x)
    k2 = _reeb_field(dom, x + 0.5 * h * k1)
    k3 = _reeb_field(dom, x + 0.5 * h * k2)
    k4 = _reeb_field(dom, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_flow(dom: StarShapedDomain, x0, t_end, h=None, tol=BOUNDARY_TOL):
    """RK4 trajectory on {G = 1} with per-step radial re-projection."""
    x0 = np.asarray(x0, dtype=float)
    if np.any(np.abs(dom.value(x0) - 1.0) > tol):
        raise OffSurfaceError("initial point not on the boundary")
    if t_end == 0:
        return FlowResult(np.zeros(1), x0[None, ...].copy(), 0.0)
    if h is None:
        h = default_step(dom)
    n = max(1, math.ceil(abs(t_end) / h))
    h_eff = t_end / n
    times = np.linspace(0.0, t_end, n + 1)
    points = np.empty((n + 1,) + x0.shape)
    points[0] = x0
    x = x0
    max_drift = 0.0
    for k in range(n):
        x = _rk4_step(dom, x, h_eff)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"flow blew up at step {k + 1} of {n}")
        drift = float(np.max(np.abs(dom.value(x) - 1.0)))
        max_drift = max(max_drift, drift)
        x = _project(dom, x)
        points[k + 1] = x
    return FlowResult(times, points, max_drift)


def _flow_rescaled(dom, x0, taus, n_steps, record_stride=0):
    """Batched flow x' = tau_i * R(x_i) over s in [0, 1], common step count.

    record_stride > 0 additionally returns samples every that many steps
    (including both endpoints), shaped (n_rec+1, B, 4).
    """
    x = np.array(x0, dtype=float)
    c = (np.asarray(taus, dtype=float) / n_steps)[:, None]
    rec = None
    if record_stride:
        n_rec = n_steps // record_stride
        rec = np.empty((n_rec + 1,) + x.shape)
        rec[0] = x
    for k in range(n_steps):
        k1 = _reeb_field(dom, x)
        k2 = _reeb_field(dom, x + 0.5 * c * k1)
        k3 = _reeb_field(dom, x + 0.5 * c * k2)
        k4 = _reeb_field(dom, x + c * k3)
        x = x + (c / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = _project(dom, x)
        if record_stride and (k + 1) % record_stride == 0:
            rec[(k + 1) // record_stride] = x
    if not np.all(np.isfinite(x)):
        raise IntegrationError("batched flow produced non-finite values")
    if record_stride:
        return x, rec
    return x


def _scan_for_returns(dom, x0, max_period, tau_floor, window):
    """One batched sweep per seed: earliest qualifying near-return time and
    the global closure minimum (both restricted to t > tau_floor)."""
    h = default_step(dom)
    n = math.ceil(max_period / h)
    b = x0.shape[0]
    t_near = np.full(b, np.nan)
    best_d = np.full(b, np.inf)
    best_t = np.full(b, max_period)
    x = x0.copy()
    d_prev = np.zeros(b)
    d_prev2 = np.zeros(b)
    for k in range(n):
        x = _project(dom, _rk4_step(dom, x, h))
        d = np.linalg.norm(x - x0, axis=-1)
        t = (k + 1) * h
        t_prev = k * h
        if k >= 2 and t_prev > tau_floor:
            is_min = (d_prev < d_prev2) & (d_prev <= d) & (d_prev < window)
            take = is_min & np.isnan(t_near)
            t_near[take] = t_prev
        if t > tau_floor:
            better = d < best_d
            best_d[better] = d[better]
            best_t[better] = t
        d_prev2, d_prev = d_prev, d
    return t_near, best_t


def _section_frames(dom, x0):
    """Orthonormal bases of the 2-plane orthogonal to span{x, R(x)}."""
    b = x0.shape[0]
    r = _reeb_field(dom, x0)
    frames = np.empty((b, 4, 2))
    for i in range(b):
        m = np.stack([x0[i] / np.linalg.norm(x0[i]), r[i] / np.linalg.norm(r[i])], axis=1)
        u, _, _ = np.linalg.svd(m, full_matrices=True)
        frames[i] = u[:, 2:]
    return frames


def _start_points(dom, x0, frames, u):
    raw = x0 + np.einsum("bij,bj->bi", frames, u)
    return _project(dom, raw)


def _refine_candidates(dom, x0, tau0, tau_floor, tau_cap,
                       n_steps=1024, tol=1e-10, max_iter=60):
    """Batched Levenberg-Marquardt on F(u, tau) = flow_tau(y(u)) - y(u).

    y(u) parametrizes the boundary near each seed over a transverse
    2-plane; unknowns are (u1, u2, tau). Seeds whose defect cannot be
    driven below tolerance are reported as failed, not raised.
    """
    b = x0.shape[0]
    frames = _section_frames(dom, x0)
    u = np.zeros((b, 2))
    tau = np.clip(np.asarray(tau0, dtype=float), tau_floor, tau_cap)
    lam = np.full(b, 1e-3)
    failed = np.zeros(b, dtype=bool)

    def residual(idx, u_set, tau_set):
        y = _start_points(dom, x0[idx], frames[idx], u_set)
        return _flow_rescaled(dom, y, tau_set, n_steps) - y, y

    f_val, y_cur = residual(np.arange(b), u, tau)
    f_norm = np.linalg.norm(f_val, axis=-1)

    delta = 1e-7
    for _ in range(max_iter):
        active = (f_norm > tol) & ~failed & (lam < 1e8)
        if not active.any():
            break
        idx = np.where(active)[0]
        a = idx.size
        # finite-difference Jacobian: 3 perturbed flows per active seed,
        # stacked into one batched integration
        u_a, tau_a = u[idx], tau[idx]
        pert_u = np.concatenate([
            u_a + np.array([delta, 0.0]),
            u_a + np.array([0.0, delta]),
            u_a,
        ])
        pert_tau = np.concatenate([tau_a, tau_a, tau_a + delta])
        y_pert = _start_points(dom, np.tile(x0[idx], (3, 1)),
                               np.tile(frames[idx], (3, 1, 1)), pert_u)
        f_pert = (_flow_rescaled(dom, y_pert, pert_tau, n_steps) - y_pert)
        jac = np.empty((a, 4, 3))
        f0 = f_val[idx]
        jac[:, :, 0] = (f_pert[:a] - f0) / delta
        jac[:, :, 1] = (f_pert[a:2 * a] - f0) / delta
        jac[:, :, 2] = (f_pert[2 * a:] - f0) / delta

        jtj = np.einsum("bki,bkj->bij", jac, jac)
        damp = lam[idx][:, None, None] * np.eye(3) * np.maximum(
            np.einsum("bii->b", jtj)[:, None, None] / 3.0, 1e-12
        )
        rhs = -np.einsum("bki,bk->bi", jac, f0)
        try:
            step = np.linalg.solve(jtj + damp, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([
                np.linalg.lstsq(jtj[i] + damp[i], rhs[i], rcond=None)[0]
                for i in range(a)
            ])

        u_try = u_a + step[:, :2]
        tau_try = np.clip(tau_a + step[:, 2], tau_floor, tau_cap)
        f_try, y_try = residual(idx, u_try, tau_try)
        f_try_norm = np.linalg.norm(f_try, axis=-1)
        improved = f_try_norm < f_norm[idx]

        acc = idx[improved]
        u[acc] = u_try[improved]
        tau[acc] = tau_try[improved]
        f_val[acc] = f_try[improved]
        f_norm[acc] = f_try_norm[improved]
        y_cur[acc] = y_try[improved]
        lam[acc] = np.maximum(lam[acc] / 3.0, 1e-12)
        rej = idx[~improved]
        lam[rej] *= 10.0
    failed |= f_norm > CLOSURE_TOL
    return y_cur, tau, f_norm, ~failed


def _minimal_period(dom, y, tau, tau_floor, n_steps=1024):
    """Divide periods that are integer multiples of a shorter closure."""
    tau = tau.copy()
    best_k = np.ones(y.shape[0], dtype=int)
    for k in range(2, 9):
        cand = tau / k >= tau_floor
        if not cand.any():
            continue
        idx = np.where(cand)[0]
        ends = _flow_rescaled(dom, y[idx], tau[idx] / k, n_steps)
        close = np.linalg.norm(ends - y[idx], axis=-1) <= CLOSURE_TOL
        best_k[idx[close]] = np.maximum(best_k[idx[close]], k)
    return tau / best_k


def _polyline_action(points):
    """Line integral of lambda0 along consecutive samples (midpoint rule).

    points has shape (n+1, ..., 4); integrates along the first axis.
    """
    mid = 0.5 * (points[1:] + points[:-1])
    seg = points[1:] - points[:-1]
    return eval_liouville(mid, seg).sum(axis=0)


def _curve_distance(dom, y, traj, period, n_samples):
    """Distance from point y to the closed curve sampled in traj (k, 4)."""
    d2 = np.sum((traj - y) ** 2, axis=-1)
    k = int(np.argmin(d2))
    km, kp = (k - 1) % n_samples, (k + 1) % n_samples
    denom = d2[km] - 2.0 * d2[k] + d2[kp]
    h = period / n_samples
    dt = 0.0 if denom <= 0 else float(np.clip(0.5 * h * (d2[km] - d2[kp]) / denom, -h, h))
    z = _flow_rescaled(dom, traj[k][None], np.array([dt]), 8)[0]
    return float(np.linalg.norm(z - y))


def find_closed_orbits(dom: StarShapedDomain, seeds=64, max_period=None,
                       seed=DEFAULT_SEED, dedup_tol=DEDUP_TOL,
                       near_return_window=NEAR_RETURN_WINDOW):
    """Shooting search for closed Reeb orbits; deduplicated, minimal periods.

    If at least 99% of the seeds close up at a common minimal period, the
    flow is resonant on the sample and a single representative orbit with
    type_flag "foliated_family" is returned.
    """
    hint = dom.min_action_hint()
    if max_period is None:
        max_period = 2.5 * hint
    if max_period <= 0:
        raise ValueError("max_period must be positive")
    tau_floor = 0.25 * hint
    x0 = dom.sample_boundary(seeds, seed=seed)

    t_near, t_best = _scan_for_returns(dom, x0, max_period, tau_floor,
                                       near_return_window)
    tau0 = np.where(np.isnan(t_near), t_best, t_near)
    y, tau, resid, ok = _refine_candidates(dom, x0, tau0, tau_floor,
                                           1.05 * max_period)
    n_fail = int(np.count_nonzero(~ok))
    if n_fail:
        logger.info("closed-orbit search: %d of %d seeds did not converge",
                    n_fail, seeds)
    if not ok.any():
        return []
    y, tau = y[ok], tau[ok]
    tau = _minimal_period(dom, y, tau, tau_floor)

    # deterministic order before any merging
    order = np.lexsort((y[:, 3], y[:, 2], y[:, 1], y[:, 0], tau))
    y, tau = y[order], tau[order]

    median_tau = float(np.median(tau))
    foliated = (
        np.count_nonzero(np.abs(tau - median_tau) <= 1e-6 * max(1.0, median_tau))
        >= FOLIATED_FRACTION * seeds
    )
    traj_cache = {}
    if foliated:
        keep = [int(np.argmin(np.abs(tau - median_tau)))]
    else:
        keep = []
        for j in range(y.shape[0]):
            dup = False
            for i in keep:
                if abs(tau[j] - tau[i]) > 1e-6 * max(1.0, tau[i]):
                    continue
                if _curve_distance(dom, y[j], traj_cache[i], tau[i],
                                   traj_cache[i].shape[0]) <= dedup_tol:
                    dup = True
                    break
            if not dup:
                keep.append(j)
                traj_cache[j] = _record_orbit(dom, y[j], tau[j])
    orbits = []
    for i in keep:
        traj = traj_cache.get(i)
        if traj is None:
            traj = _record_orbit(dom, y[i], tau[i])
        closed = np.concatenate([traj, traj[:1]])
        # midpoint chord quadrature has a systematic h^2 bias on convex
        # curves; one Richardson step across strides removes it
        action = float(
            (4.0 * _polyline_action(closed) - _polyline_action(closed[::2])) / 3.0
        )
        residual = float(np.linalg.norm(
            _flow_rescaled(dom, y[i][None], np.array([tau[i]]), 2048)[0] - y[i]
        ))
        orbits.append(ReebOrbit(
            initial_point=y[i].copy(),
            period=float(tau[i]),
            action=action,
            samples=traj[:: max(1, traj.shape[0] // 512)].copy(),
            residual=residual,
            type_flag="foliated_family" if foliated else "unclassified",
        ))
    orbits.sort(key=lambda o: (o.action, tuple(np.round(o.initial_point, 9))))
    return orbits


def _record_orbit(dom, y, tau, n_steps=4096):
    _, rec = _flow_rescaled(dom, y[None], np.array([tau]), n_steps, record_stride=1)
    return rec[:-1, 0, :]


def _variational_flow(dom, x0, period, n_steps, fd_delta=1e-5):
    """Joint RK4 for x' = R(x), Psi' = DR(x) Psi; returns sampled x and Psi."""
    eye4 = np.eye(4)
    pert = np.concatenate([eye4 * fd_delta, -eye4 * fd_delta])

    def jac(x):
        vals = _reeb_field(dom, x[None] + pert)
        return (vals[:4] - vals[4:]).T / (2.0 * fd_delta)

    h = period / n_steps
    xs = np.empty((n_steps + 1, 4))
    psis = np.empty((n_steps + 1, 4, 4))
    x = np.array(x0, dtype=float)
    psi = eye4.copy()
    xs[0], psis[0] = x, psi
    for k in range(n_steps):
        kx1 = _reeb_field(dom, x)
        kp1 = jac(x) @ psi
        x2 = x + 0.5 * h * kx1
        kx2 = _reeb_field(dom, x2)
        kp2 = jac(x2) @ (psi + 0.5 * h * kp1)
        x3 = x + 0.5 * h * kx2
        kx3 = _reeb_field(dom, x3)
        kp3 = jac(x3) @ (psi + 0.5 * h * kp2)
        x4 = x + h * kx3
        kx4 = _reeb_field(dom, x4)
        kp4 = jac(x4) @ (psi + h * kp3)
        x = x + (h / 6.0) * (kx1 + 2 * kx2 + 2 * kx3 + kx4)
        x = _project(dom, x[None])[0]
        psi = psi + (h / 6.0) * (kp1 + 2 * kp2 + 2 * kp3 + kp4)
        xs[k + 1], psis[k + 1] = x, psi
    return xs, psis


def _j_frame(x):
    """Left quaternion frames: j*x and k*x for x = z1 + z2 j."""
    jx = np.stack([-x[..., 2], x[..., 3], x[..., 0], -x[..., 1]], axis=-1)
    kx = np.stack([-x[..., 3], -x[..., 2], x[..., 1], x[..., 0]], axis=-1)
    return jx, kx


def _contact_projection(dom, xs, w):
    """Project w to xi = ker(lambda0) ∩ ker(dG) at the points xs."""
    grad = dom.gradient(xs)
    w_t = w - (np.sum(grad * w, axis=-1) / np.sum(grad * grad, axis=-1))[..., None] * grad
    r = _reeb_field(dom, xs)
    return w_t - eval_liouville(xs, w_t)[..., None] * r


def _symplectic_frames(dom, xs):
    """Frames (E1, E2) of xi along xs with omega0(E1, E2) = 1 exactly."""
    jx, kx = _j_frame(xs)
    e1 = _contact_projection(dom, xs, jx)
    e2 = _contact_projection(dom, xs, kx)
    pairing = eval_symplectic(e1, e2)
    if np.any(pairing <= 1e-8):
        raise IntegrationError("contact frame degenerates along the orbit")
    scale = np.sqrt(pairing)[..., None]
    return e1 / scale, e2 / scale


def monodromy_arc(dom: StarShapedDomain, orbit: ReebOrbit, n_steps=4096,
                  stride=2) -> Sp2Arc:
    """Linearized flow over one period, written in the global contact frame."""
    xs, psis = _variational_flow(dom, orbit.initial_point, orbit.period, n_steps)
    xs_s, psis_s = xs[::stride], psis[::stride]
    e1, e2 = _symplectic_frames(dom, xs_s)
    v1 = np.einsum("kij,j->ki", psis_s, e1[0])
    v2 = np.einsum("kij,j->ki", psis_s, e2[0])
    v1 = _contact_projection(dom, xs_s, v1)
    v2 = _contact_projection(dom, xs_s, v2)
    mats = np.empty((xs_s.shape[0], 2, 2))
    mats[:, 0, 0] = eval_symplectic(v1, e2)
    mats[:, 1, 0] = -eval_symplectic(v1, e1)
    mats[:, 0, 1] = eval_symplectic(v2, e2)
    mats[:, 1, 1] = -eval_symplectic(v2, e1)
    times = np.linspace(0.0, 1.0, xs_s.shape[0])
    return Sp2Arc(times, mats)


def cz_from_rotation(rho, kind):
    """Standard index formula: 2*floor(rho)+1 elliptic, 2*rho hyperbolic."""
    if kind in ("pos_hyperbolic", "neg_hyperbolic"):
        return int(round(2.0 * rho))
    rho_eff = rho
    if kind == "degenerate" and abs(rho - round(rho)) <= 1e-6:
        rho_eff = round(rho)
    return 2 * math.floor(rho_eff) + 1


def orbit_invariants(dom: StarShapedDomain, orbit: ReebOrbit,
                     n_steps=4096) -> ReebOrbit:
    """Complete an orbit record with monodromy, rotation number, and index."""
    arc = monodromy_arc(dom, orbit, n_steps=n_steps)
    mono = arc.matrices[-1]
    rho = eigenvalue_lift(arc)
    kind = classify_monodromy(mono)
    cz = cz_from_rotation(rho, kind)
    if kind == "degenerate":
        logger.warning("degenerate monodromy (eigenvalue 1 within 1e-6); "
                       "cz index %d from the floor formula is not authoritative", cz)
    keep_family = orbit.type_flag == "foliated_family"
    return replace(
        orbit,
        monodromy=mono,
        rotation_number=rho,
        cz_index=cz,
        type_flag=orbit.type_flag if keep_family else kind,
        degenerate_warning=kind == "degenerate",
        dynamically_convex=cz >= 3,
    )


def validate_orbit(dom: StarShapedDomain, orbit: ReebOrbit):
    """ReebOrbit invariants: action = period, closure, symplectic monodromy."""
    report = {
        "action_vs_period": abs(orbit.action - orbit.period) <= 1e-6 * orbit.period,
        "closes": orbit.residual <= 1e-6,
    }
    if orbit.monodromy is not None:
        det = float(np.linalg.det(orbit.monodromy))
        report["monodromy_det"] = abs(det - 1.0) <= 1e-6
    end = _flow_rescaled(dom, orbit.initial_point[None],
                         np.array([orbit.period]), 2048)[0]
    report["reflow_closes"] = float(np.linalg.norm(end - orbit.initial_point)) <= 1e-6
    return report


def write_orbits_csv(orbits, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ORBIT_CSV_COLUMNS)
        for o in orbits:
            x1, y1, x2, y2 = o.initial_point
            writer.writerow([
                f"{o.action:.12g}",
                f"{o.period:.12g}",
                "" if o.rotation_number is None else f"{o.rotation_number:.12g}",
                "" if o.cz_index is None else str(o.cz_index),
                o.type_flag,
                f"{x1:.12g}", f"{y1:.12g}", f"{x2:.12g}", f"{y2:.12g}",
            ])
