"""Symplectic/Liouville structures on R^4 and star-shaped domain families.

Points are arrays (..., 4) with coordinates (x1, y1, x2, y2), identified
with (z1, z2) in C^2 via z_j = x_j + i y_j. The standard structures are

    omega0 = dx1^dy1 + dx2^dy2,
    lambda0 = 1/2 sum (x_j dy_j - y_j dx_j),   d lambda0 = omega0,

with the radial Liouville field Z0 = x/2 satisfying i_{Z0} omega0 = lambda0.

A star-shaped domain is {G <= 1} for a smooth defining function G that is
homogeneous of degree 2 along rays, so <x, grad G(x)> = 2 G(x) > 0 away
from the origin and the boundary {G = 1} is transverse to Z0.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedDomainError
from .prng import DEFAULT_SEED, uniform_block

BOUNDARY_TOL = 1e-9  # tau_bd: well below integrator projection error

# Default trig-polynomial basis for radial perturbations, evaluated on S^3:
#   P(u) = c1 * (u2^2 + v2^2) + c2 * (u1 u2 + v1 v2)^2.
# Both terms have vanishing gradient on the two coordinate circles, which
# keeps those circles invariant under the perturbed Reeb flow.
DEFAULT_RADIAL_COEFFS = (0.5, 0.15)


def eval_symplectic(u, v):
    """omega0(u, v) = sum (ux_j * vy_j - uy_j * vx_j), batched over (..., 4)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (
        u[..., 0] * v[..., 1]
        - u[..., 1] * v[..., 0]
        + u[..., 2] * v[..., 3]
        - u[..., 3] * v[..., 2]
    )


def eval_liouville(x, v):
    """lambda0 at x applied to v; equals omega0(x, v) / 2."""
    return 0.5 * eval_symplectic(x, v)


def j_mult(v):
    """Multiplication by i blockwise: (x1,y1,x2,y2) -> (-y1,x1,-y2,x2)."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    out[..., 2] = -v[..., 3]
    out[..., 3] = v[..., 2]
    return out


def as_complex(x):
    """(..., 4) real -> pair of complex arrays (z1, z2)."""
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1], x[..., 2] + 1j * x[..., 3]


def from_complex(z1, z2):
    z1 = np.asarray(z1)
    z2 = np.asarray(z2)
    return np.stack(
        [z1.real, z1.imag, np.broadcast_to(z2, z1.shape).real, np.broadcast_to(z2, z1.shape).imag],
        axis=-1,
    )


@dataclass(frozen=True)
class ModelRegion:
    """Ball B(a) = {pi|z|^2 <= a} or cylinder Z(a) = {pi|z1|^2 <= a}."""

    kind: str  # "ball" | "cylinder"
    a: float

    def __post_init__(self):
        if self.kind not in ("ball", "cylinder"):
            raise ValueError(f"unknown model region kind {self.kind!r}")
        if not self.a > 0:
            raise ValueError("width a must be positive")

    def contains(self, x, tol=0.0):
        z1, z2 = as_complex(x)
        if self.kind == "ball":
            val = np.pi * (np.abs(z1) ** 2 + np.abs(z2) ** 2)
        else:
            val = np.pi * np.abs(z1) ** 2
        return val <= self.a + tol


class StarShapedDomain:
    """Base class: a defining function G with boundary {G = 1}.

    Subclasses provide ``value`` and ``gradient`` (both batched over
    (..., 4)) plus analytic metadata. G is homogeneous of degree 2 along
    rays for every built-in family, which makes the radial projection to
    the boundary exact: s = G(x)^(-1/2) rescales x onto {G = 1}.
    """

    family: str = "abstract"

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def radius_bound(self) -> float:
        """Upper bound for |x| on the boundary (bounding box half-width)."""
        raise NotImplementedError

    def min_action_hint(self) -> float:
        """Coarse scale of the shortest closed orbit, for step-size choice."""
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    # -- shared helpers -------------------------------------------------

    def boundary_project(self, x):
        """Rescale points radially onto {G = 1} (exact for 2-homogeneous G)."""
        x = np.asarray(x, dtype=float)
        g = self.value(x)
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise MalformedDomainError("cannot project points with G <= 0 or non-finite")
        return x / np.sqrt(g)[..., None]

    def sample_boundary(self, count, seed=DEFAULT_SEED, start=0):
        """Deterministic boundary points: Gaussian directions projected radially."""
        u = uniform_block(seed, start, count, 8)
        # Box-Muller keeps the draw count per point fixed (8 uniforms -> 4 normals)
        r = np.sqrt(-2.0 * np.log1p(-u[:, :4]))
        normals = r * np.cos(2 * np.pi * u[:, 4:])
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return self.boundary_project(normals)

    def classify(self, x, tol=BOUNDARY_TOL):
        """Value, gradient, and region (inside/boundary/outside) at x."""
        x = np.asarray(x, dtype=float)
        val = self.value(x)
        grad = self.gradient(x)
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(grad))):
            raise MalformedDomainError(f"non-finite evaluation for family {self.family}")
        val_arr = np.atleast_1d(val)
        region = np.where(
            np.abs(val_arr - 1.0) <= tol,
            "boundary",
            np.where(val_arr < 1.0 - tol, "inside", "outside"),
        )
        if np.ndim(val) == 0:
            return {"value": float(val), "gradient": grad, "region": str(region[0])}
        return {"value": val, "gradient": grad, "region": region}


@dataclass(frozen=True)
class Ellipsoid(StarShapedDomain):
    """E(a, b): G(z) = pi|z1|^2/a + pi|z2|^2/b."""

    a: float
    b: float
    family: str = field(default="ellipsoid", init=False)

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise MalformedDomainError("ellipsoid axes must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.pi * (
            (x[..., 0] ** 2 + x[..., 1] ** 2) / self.a
            + (x[..., 2] ** 2 + x[..., 3] ** 2) / self.b
        )

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        g = np.empty_like(x)
        g[..., 0] = 2 * np.pi * x[..., 0] / self.a
        g[..., 1] = 2 * np.pi * x[..., 1] / self.a
        g[..., 2] = 2 * np.pi * x[..., 2] / self.b
        g[..., 3] = 2 * np.pi * x[..., 3] / self.b
        return g

    def radius_bound(self):
        return float(np.sqrt(max(self.a, self.b) / np.pi)) * (1 + 1e-12)

    def min_action_hint(self):
        return float(min(self.a, self.b))

    def volume_exact(self):
        return 0.5 * self.a * self.b

    def to_spec(self):
        return {"type": "ellipsoid", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Ball(StarShapedDomain):
    """B(a): G(z) = pi|z|^2 / a."""

    a: float
    family: str = field(default="ball", init=False)

    def __post_init__(self):
        if not self.a > 0:
            raise MalformedDomainError("ball width must be positive")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.pi * np.sum(x * x, axis=-1) / self.a

    def gradient(self, x):
        return 2 * np.pi * np.asarray(x, dtype=float) / self.a

    def radius_bound(self):
        return float(np.sqrt(self.a / np.pi)) * (1 + 1e-12)

    def min_action_hint(self):
        return float(self.a)

    def volume_exact(self):
        return 0.5 * self.a * self.a

    def to_spec(self):
        return {"type": "ball", "a": self.a}


@dataclass(frozen=True)
class RadialPerturbation(StarShapedDomain):
    """Radial graph over S^3: G(x) = |x|^2 / (1 + eps * P(x/|x|)).

    The boundary is {|x|^2 = 1 + eps P(u)}, a perturbation of the unit
    sphere = boundary of B(pi); eps = 0 reproduces ball(pi) exactly.
    P is the fixed degree-<=4 trig polynomial
        P(u) = c1 (u2^2 + v2^2) + c2 (u1 u2 + v1 v2)^2
    with coefficients (c1, c2) recorded in the domain spec file.
    """

    epsilon: float
    coeffs: tuple = DEFAULT_RADIAL_COEFFS
    family: str = field(default="radial", init=False)

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if len(c) != 2:
            raise MalformedDomainError("radial perturbation expects two coefficients")
        object.__setattr__(self, "coeffs", c)
        if 1.0 + self.epsilon * self._p_min() <= 0:
            raise MalformedDomainError("perturbation too large: 1 + eps*P vanishes")

    def _p_min(self):
        c1, c2 = self.coeffs
        return min(0.0, c1) + min(0.0, c2 * 0.25)

    def _p_max(self):
        c1, c2 = self.coeffs
        return max(0.0, c1) + max(0.0, c2 * 0.25)

    def _q_terms(self, x):
        # Q(x) = eps * [c1 p2/|x|^2 + c2 p4/|x|^4] with p2 = x2^2 + y2^2,
        # p4 = (x1 x2 + y1 y2)^2; 0-homogeneous extension of eps*P.
        s2 = np.sum(x * x, axis=-1)
        p2 = x[..., 2] ** 2 + x[..., 3] ** 2
        dot = x[..., 0] * x[..., 2] + x[..., 1] * x[..., 3]
        return s2, p2, dot

    def value(self, x):
        x = np.asarray(x, dtype=float)
        s2, p2, dot = self._q_terms(x)
        c1, c2 = self.coeffs
        with np.errstate(invalid="ignore", divide="ignore"):
            q = self.epsilon * (c1 * p2 / s2 + c2 * dot**2 / s2**2)
        return s2 / (1.0 + q)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        s2, p2, dot = self._q_terms(x)
        c1, c2 = self.coeffs
        d = 1.0 + self.epsilon * (c1 * p2 / s2 + c2 * dot**2 / s2**2)

        grad_p2 = np.zeros_like(x)
        grad_p2[..., 2] = 2 * x[..., 2]
        grad_p2[..., 3] = 2 * x[..., 3]
        grad_dot = np.empty_like(x)
        grad_dot[..., 0] = x[..., 2]
        grad_dot[..., 1] = x[..., 3]
        grad_dot[..., 2] = x[..., 0]
        grad_dot[..., 3] = x[..., 1]

        s2e = s2[..., None]
        grad_q = self.epsilon * (
            c1 * (grad_p2 * s2e - 2 * x * p2[..., None]) / s2e**2
            + c2
            * (
                2 * dot[..., None] * grad_dot * s2e**2
                - 4 * x * (dot**2)[..., None] * s2e
            )
            / s2e**4
        )
        return 2 * x / d[..., None] - (s2 / d**2)[..., None] * grad_q

    def radius_bound(self):
        return float(np.sqrt(1.0 + max(0.0, self.epsilon) * self._p_max())) * (1 + 1e-9)

    def min_action_hint(self):
        return float(np.pi * (1.0 + min(0.0, self.epsilon) * self._p_max()))

    def to_spec(self):
        return {"type": "radial", "epsilon": self.epsilon, "coeffs": list(self.coeffs)}


def domain_from_spec(spec: dict) -> StarShapedDomain:
    """Build a domain from the JSON spec dict (exact field names)."""
    kind = spec.get("type")
    if kind == "ellipsoid":
        return Ellipsoid(float(spec["a"]), float(spec["b"]))
    if kind == "ball":
        return Ball(float(spec["a"]))
    if kind == "radial":
        coeffs = spec.get("coeffs", list(DEFAULT_RADIAL_COEFFS))
        return RadialPerturbation(float(spec["epsilon"]), tuple(coeffs))
    raise MalformedDomainError(f"unknown domain type {kind!r}")


def load_domain(path) -> StarShapedDomain:
    with open(path, "r", encoding="utf-8") as fh:
        return domain_from_spec(json.load(fh))


def domain_classify(dom: StarShapedDomain, x, tol=BOUNDARY_TOL):
    return dom.classify(x, tol=tol)


def domain_volume(dom: StarShapedDomain, samples: int = 2_000_000, seed: int = DEFAULT_SEED,
                  chunk: int = 1 << 18):
    """Monte Carlo Lebesgue volume over the family's bounding box.

    Deterministic for a given seed: samples are indexed globally and drawn
    through the counter-based generator in fixed chunks, so any sharding
    of the index range reproduces the same estimate.
    """
    if samples < 10_000:
        raise ValueError("samples must be at least 1e4")
    rb = dom.radius_bound()
    box_vol = (2.0 * rb) ** 4
    hits = 0
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        pts = (uniform_block(seed, start, n, 4) * 2.0 - 1.0) * rb
        hits += int(np.count_nonzero(dom.value(pts) <= 1.0))
    p = hits / samples
    volume = p * box_vol
    std_error = box_vol * float(np.sqrt(max(p * (1.0 - p), 0.0) / samples))
    return {"volume": volume, "std_error": std_error}
