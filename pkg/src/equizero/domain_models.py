"""Built-in compact sets K, their Green functions and equilibrium measures.

Four kinds are supported:

``polydisk``  unit polydisk in C^m; Silov boundary is the torus |z_j| = 1.
``ball``      unit ball in C^m; Silov boundary is the sphere ||z|| = 1.
``circle``    closed unit disk in C (m = 1); boundary circle.
``interval``  [-1, 1] in C (m = 1); equilibrium measure is the arcsine law.

In every case the reference measure mu is the equilibrium measure itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from equizero.errors import (
    InsufficientResolutionError,
    RegionMismatchError,
    UnimplementedDomainError,
)

KINDS = ("polydisk", "ball", "circle", "interval")
_ALIASES = {"torus": "polydisk", "sphere": "ball", "disk": "circle", "disc": "circle"}


@dataclass(frozen=True)
class DomainModel:
    kind: str
    m: int = 1
    description: str = ""

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise UnimplementedDomainError(f"unsupported domain kind {self.kind!r}")
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise ValueError(f"dimension m must be a positive integer, got {self.m!r}")
        if kind in ("circle", "interval") and self.m != 1:
            raise ValueError(f"{kind} requires m = 1, got m = {self.m}")
        if not self.description:
            object.__setattr__(self, "description", _describe(kind, self.m))

    @classmethod
    def from_config(cls, block: dict) -> "DomainModel":
        return cls(kind=str(block["kind"]), m=int(block.get("m", 1)))

    def to_config(self) -> dict:
        return {"kind": self.kind, "m": self.m}

    @property
    def is_radial(self) -> bool:
        """True when mu_eq is the uniform measure on the unit circle (m = 1)."""
        return self.m == 1 and self.kind != "interval"


def _describe(kind, m):
    return {
        "polydisk": f"unit polydisk in C^{m}",
        "ball": f"unit ball in C^{m}",
        "circle": "closed unit disk in C",
        "interval": "real interval [-1, 1]",
    }[kind]


def as_points(z, m: int) -> tuple[np.ndarray, bool]:
    """Coerce ``z`` to a complex array of shape (n, m).

    Returns the array and whether the input was a single point.
    """
    arr = np.asarray(z, dtype=complex)
    if m == 1:
        if arr.ndim == 0:
            return arr.reshape(1, 1), True
        if arr.ndim == 1:
            return arr.reshape(-1, 1), False
        if arr.ndim == 2 and arr.shape[1] == 1:
            return arr, False
    else:
        if arr.ndim == 1 and arr.shape[0] == m:
            return arr.reshape(1, m), True
        if arr.ndim == 2 and arr.shape[1] == m:
            return arr, False
    raise ValueError(f"expected point(s) in C^{m}, got array of shape {arr.shape}")


def _unwrap(values, single):
    return float(values[0]) if single else values


def green_function(model: DomainModel, z):
    """Pluricomplex Green function V_K with logarithmic pole at infinity."""
    pts, single = as_points(z, model.m)
    if not np.all(np.isfinite(pts)):
        raise ValueError("green_function requires finite points")
    if model.kind == "polydisk":
        val = np.log(np.maximum(np.abs(pts).max(axis=1), 1.0))
    elif model.kind in ("ball", "circle"):
        val = np.log(np.maximum(np.linalg.norm(pts, axis=1), 1.0))
    elif model.kind == "interval":
        x = pts[:, 0]
        w = x + np.sqrt(x - 1) * np.sqrt(x + 1)
        # |w| and 1/|w| are the two branches; V is log of the larger one.
        aw = np.abs(w)
        val = np.abs(np.log(np.where(aw > 0, aw, 1.0)))
    else:  # pragma: no cover - guarded in DomainModel
        raise UnimplementedDomainError(model.kind)
    return _unwrap(val, single)


# ---------------------------------------------------------------------------
# regions

REGION_KINDS = ("annulus", "sector", "hemisphere", "subinterval", "plane")


@dataclass(frozen=True)
class RegionSpec:
    """Test region for weak* comparisons.

    ``annulus``      r_lo <= rho(z) <= r_hi, where rho is |z_c| if ``coordinate``
                     is set, else |z| (m = 1), ||z|| (ball) or max |z_j| (polydisk).
    ``sector``       theta_lo <= arg z_c <= theta_hi (mod 2 pi).
    ``hemisphere``   sign * x_axis >= 0, x = (Re z_1, Im z_1, Re z_2, ...).
    ``subinterval``  a <= Re z_1 <= b (a vertical strip over [a, b]).
    ``plane``        everything.
    """

    kind: str
    r_lo: float = 0.0
    r_hi: float = math.inf
    theta_lo: float = 0.0
    theta_hi: float = 2 * math.pi
    coordinate: int | None = None
    axis: int = 0
    sign: int = 1
    a: float = -1.0
    b: float = 1.0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "annulus" and not (0 <= self.r_lo < self.r_hi):
            raise ValueError("annulus needs 0 <= r_lo < r_hi")
        if self.kind == "sector" and not (self.theta_lo < self.theta_hi):
            raise ValueError("sector needs theta_lo < theta_hi")
        if self.kind == "hemisphere" and self.sign not in (1, -1):
            raise ValueError("hemisphere sign must be +1 or -1")
        if self.kind == "subinterval" and not (self.a < self.b):
            raise ValueError("subinterval needs a < b")

    @classmethod
    def from_config(cls, block: dict) -> "RegionSpec":
        block = dict(block)
        kind = block.pop("kind")
        if "coordinate" in block and block["coordinate"] is not None:
            block["coordinate"] = int(block["coordinate"])
        return cls(kind=kind, **block)

    def to_config(self) -> dict:
        keys = {
            "annulus": ("r_lo", "r_hi", "coordinate"),
            "sector": ("theta_lo", "theta_hi", "coordinate"),
            "hemisphere": ("axis", "sign"),
            "subinterval": ("a", "b"),
            "plane": (),
        }[self.kind]
        out = {"kind": self.kind}
        for k in keys:
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out

    def contains(self, points, model: DomainModel | None = None) -> np.ndarray:
        """Boolean mask of points inside the region."""
        pts = np.asarray(points, dtype=complex)
        if pts.ndim <= 1:
            pts = pts.reshape(-1, 1)
        c = self.coordinate if self.coordinate is not None else 0
        if self.kind == "plane":
            return np.ones(len(pts), dtype=bool)
        if self.kind == "annulus":
            if self.coordinate is not None:
                rho = np.abs(pts[:, c])
            elif model is not None and model.kind == "polydisk":
                rho = np.abs(pts).max(axis=1)
            else:
                rho = np.linalg.norm(pts, axis=1)
            return (rho >= self.r_lo) & (rho <= self.r_hi)
        if self.kind == "sector":
            width = self.theta_hi - self.theta_lo
            rel = np.mod(np.angle(pts[:, c]) - self.theta_lo, 2 * math.pi)
            return rel <= width if width < 2 * math.pi else np.ones(len(pts), dtype=bool)
        if self.kind == "hemisphere":
            real = np.empty((len(pts), 2 * pts.shape[1]))
            real[:, 0::2] = pts.real
            real[:, 1::2] = pts.imag
            return self.sign * real[:, self.axis] >= 0
        # subinterval
        x = pts[:, 0].real
        return (x >= self.a) & (x <= self.b)


def _arcsine_cdf(x):
    x = min(max(x, -1.0), 1.0)
    return 0.5 + math.asin(x) / math.pi


def equilibrium_mass(model: DomainModel, region: RegionSpec) -> float:
    """Closed-form mu_eq mass of ``region``."""
    kind = region.kind
    if kind == "plane":
        return 1.0
    if region.coordinate is not None and not (0 <= region.coordinate < model.m):
        raise RegionMismatchError(f"coordinate {region.coordinate} out of range for m={model.m}")

    if model.kind == "interval":
        if kind == "annulus":
            hi, lo = min(region.r_hi, 1.0), min(region.r_lo, 1.0)
            return 2.0 * (math.asin(hi) - math.asin(lo)) / math.pi
        if kind == "subinterval":
            return _arcsine_cdf(region.b) - _arcsine_cdf(region.a)
        if kind == "hemisphere" and region.axis == 0:
            return 0.5
        raise RegionMismatchError(f"region {kind!r} is not meaningful on the interval")

    # circle, ball, polydisk: mu_eq is invariant under z_c -> e^{it} z_c.
    if kind == "annulus":
        return 1.0 if region.r_lo <= 1.0 <= region.r_hi else 0.0
    if kind == "sector":
        return min(region.theta_hi - region.theta_lo, 2 * math.pi) / (2 * math.pi)
    if kind == "hemisphere":
        if not 0 <= region.axis < 2 * model.m:
            raise RegionMismatchError(f"axis {region.axis} out of range for m={model.m}")
        return 0.5
    raise RegionMismatchError(f"region {kind!r} requires the interval domain")


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Discrete probability measure approximating mu.

    ``degree`` is the largest total degree d such that every moment of
    z^J conj(z)^L with |J| + |L| <= d is integrated exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    model: DomainModel | None = None

    def __post_init__(self):
        if self.nodes.ndim != 2 or len(self.nodes) != len(self.weights):
            raise ValueError("nodes must be (n, m) with one weight per node")
        if np.any(self.weights < 0):
            raise ValueError("weights must be non-negative")

    @property
    def m(self) -> int:
        return self.nodes.shape[1]

    def __len__(self):
        return len(self.weights)

    def integrate(self, values) -> complex:
        return np.dot(self.weights, values)

    def min_resolution(self, degree: int) -> int:
        return min_resolution(self.model, degree)

    def require_degree(self, degree: int) -> None:
        if degree > self.degree:
            raise InsufficientResolutionError(
                f"rule integrates total degree {self.degree}, need {degree}",
                min_resolution(self.model, degree) if self.model else None,
            )


def min_resolution(model: DomainModel, degree: int) -> int:
    """Smallest resolution whose rule is exact up to total degree ``degree``."""
    if model.kind == "interval":
        return degree // 2 + 1
    return degree + 1


def _circle(n):
    theta = 2 * np.pi * np.arange(n) / n
    return np.exp(1j * theta)


def _product(arrays):
    grids = np.meshgrid(*arrays, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def quadrature(model: DomainModel, resolution: int) -> QuadratureRule:
    """Quadrature rule for mu_eq on the Silov boundary of K.

    circle/polydisk: tensor product of ``resolution`` equispaced angles.
    interval: ``resolution`` Gauss-Chebyshev nodes (exact to degree 2n-1).
    ball: equispaced angles for every coordinate times Gauss-Jacobi rules in
    stick-breaking coordinates for (|z_1|^2, ..., |z_m|^2), which is uniform
    on the simplex under the invariant sphere measure.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    n = int(resolution)
    m = model.m

    if model.kind == "interval":
        k = np.arange(1, n + 1)
        x = np.cos((2 * k - 1) * np.pi / (2 * n))
        return QuadratureRule(x.reshape(-1, 1).astype(complex), np.full(n, 1.0 / n), 2 * n - 1, model)

    if model.kind == "circle" or (m == 1):
        return QuadratureRule(_circle(n).reshape(-1, 1), np.full(n, 1.0 / n), n - 1, model)

    if model.kind == "polydisk":
        nodes = _product([_circle(n)] * m)
        return QuadratureRule(nodes, np.full(len(nodes), float(n) ** -m), n - 1, model)

    # ball, m >= 2: stick-breaking s_i ~ Beta(1, m - i), i = 1..m-1
    q = n // 4 + 1
    s_nodes, s_weights = [], []
    for i in range(1, m):
        x, w = roots_jacobi(q, m - i - 1, 0)
        s_nodes.append((1 + x) / 2)
        s_weights.append(w / w.sum())
    S = _product(s_nodes)
    W = np.prod(_product(s_weights), axis=1)
    t = np.empty((len(S), m))
    rest = np.ones(len(S))
    for i in range(m - 1):
        t[:, i] = rest * S[:, i]
        rest = rest * (1 - S[:, i])
    t[:, m - 1] = rest
    radii = np.sqrt(np.clip(t, 0.0, None))
    phases = _product([_circle(n)] * m)
    nodes = (radii[:, None, :] * phases[None, :, :]).reshape(-1, m)
    weights = np.repeat(W, len(phases)) / len(phases)
    return QuadratureRule(nodes, weights, n - 1, model)


def sup_grid(model: DomainModel, resolution: int) -> np.ndarray:
    """Points on the Silov boundary for sup-norm sampling (includes the rule's nodes)."""
    if model.kind == "interval":
        return np.cos(np.linspace(0, np.pi, resolution)).reshape(-1, 1).astype(complex)
    return quadrature(model, resolution).nodes
