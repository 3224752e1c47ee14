"""Gaussian random polynomials, their zeros, and expected zero densities.

The expected zero current of k i.i.d. random polynomials is
(i/2pi ddbar log S_N)^k.  Densities here are reported against Lebesgue
measure after wedging with the Euclidean Kähler form:

    density_k = k! e_k(lambda) / pi^k,

where lambda are the eigenvalues of the complex Hessian
H[j, l] = d^2 log S_N / dz_j dconj(z_l).  For k = m this is m! det H / pi^m,
the density of the expected simultaneous zeros against volume; for
k < m it is the density of E(Z) ^ omega0^(m-k) / (m-k)!, omega0 = sum dx_j ^ dy_j.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import matrix_balance

from equizero._parallel import pmap
from equizero.domain_models import DomainModel, RegionSpec, as_points, equilibrium_mass
from equizero.errors import DegenerateSampleError, RegionMismatchError, StepError
from equizero.orthopoly import OrthonormalBasis, build_basis, exponent_matrix, monomials, su_basis
from equizero.szego import KernelField

COMPANION_CAP = 500


class CurvatureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GaussianEnsemble:
    basis: OrthonormalBasis
    seed: int
    variant: str = "l2mu"

    def __post_init__(self):
        if self.variant not in ("l2mu", "su"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @classmethod
    def for_domain(cls, model: DomainModel, N: int, seed: int) -> "GaussianEnsemble":
        return cls(build_basis(model, N), seed, "l2mu")

    @classmethod
    def su(cls, m: int, N: int, seed: int) -> "GaussianEnsemble":
        return cls(su_basis(m, N), seed, "su")

    @property
    def field(self) -> KernelField:
        return KernelField(self.basis)


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial; the j-th draw belongs to coefficient j."""
    key = ((int(seed) % 2**64) << 64) | (int(trial) % 2**64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_complex_normal(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.standard_normal(2 * d)
    return (x[0::2] + 1j * x[1::2]) / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class RandomPolynomial:
    ensemble: GaussianEnsemble
    trial: int
    c: np.ndarray

    @property
    def b(self) -> np.ndarray:
        """Monomial coefficients in graded order."""
        return self.ensemble.basis.monomial_coefficients(self.c)

    def __call__(self, z):
        P, logs = self.ensemble.basis.evaluate(z, log_scale=False)
        return P @ self.c


def sample_polynomial(ensemble: GaussianEnsemble, trial: int) -> RandomPolynomial:
    rng = trial_generator(ensemble.seed, trial)
    return RandomPolynomial(ensemble, trial, standard_complex_normal(rng, ensemble.basis.dim))


# ---------------------------------------------------------------------------
# roots (m = 1)


@dataclass(frozen=True, eq=False)
class ZeroSample:
    roots: np.ndarray
    degree_actual: int
    trial: int
    seed: int
    max_residual: float = 0.0


def _companion_roots(b):
    n = len(b) - 1
    C = np.zeros((n, n), dtype=complex)
    C[1:, :-1] = np.eye(n - 1)
    C[:, -1] = -b[:-1] / b[-1]
    Cb, _ = matrix_balance(C, permute=False)
    return np.linalg.eigvals(Cb)


def _comrade_roots(c, alpha, beta):
    n = len(c) - 1
    J = np.diag(alpha[:n].astype(complex))
    off = beta[1:n]
    J[np.arange(n - 1), np.arange(1, n)] = off
    J[np.arange(1, n), np.arange(n - 1)] = off
    J[-1, :] -= beta[n] * c[:n] / c[n]
    Jb, _ = matrix_balance(J, permute=False)
    return np.linalg.eigvals(Jb)


def univariate_roots(poly: RandomPolynomial, *, threshold: float = 1e-13) -> ZeroSample:
    """Roots of a one-variable random polynomial, with one Newton polish step.

    Monomial bases go through the balanced companion matrix of b; bases given
    by a three-term recurrence use the comrade matrix of c, which avoids the
    ill-conditioned monomial expansion.
    """
    basis = poly.ensemble.basis
    if basis.m != 1:
        raise ValueError("univariate_roots requires m = 1")
    if basis.N > COMPANION_CAP:
        raise ValueError(f"degree {basis.N} exceeds the companion-matrix cap {COMPANION_CAP}")
    coef = poly.c if basis.recurrence is not None else poly.b
    big = np.abs(coef).max()
    if big == 0 or not np.isfinite(big):
        raise DegenerateSampleError("zero polynomial drawn; check the random generator")
    nz = np.nonzero(np.abs(coef) > threshold * big)[0]
    deg = int(nz[-1])
    if deg == 0:
        roots = np.empty(0, dtype=complex)
    elif basis.recurrence is not None:
        roots = _comrade_roots(coef[: deg + 1], *basis.recurrence)
    else:
        roots = _companion_roots(coef[: deg + 1])

    if deg > 0:
        f, df = _value_and_derivative(poly, roots)
        step = np.where(df != 0, f / np.where(df != 0, df, 1), 0)
        new = roots - step
        f_new, _ = _value_and_derivative(poly, new)
        better = np.abs(f_new) <= np.abs(f)
        roots = np.where(better, new, roots)
        f = np.where(better, f_new, f)
        b = poly.b
        logscale = np.log1p(np.abs(b).max()) + basis.N * np.log1p(np.abs(roots))
        resid = float(np.max(np.log(np.abs(f) + 1e-300) - logscale))
        resid = math.exp(resid)
    else:
        resid = 0.0
    return ZeroSample(roots, deg, poly.trial, poly.ensemble.seed, resid)


def _value_and_derivative(poly, z):
    P, D = poly.ensemble.basis.evaluate_with_derivative(z)
    return P @ poly.c, D @ poly.c


@dataclass(frozen=True)
class ZeroMass:
    mean_fraction: float
    std_error: float
    trials: int
    fractions: np.ndarray = field(repr=False, default=None)


def count_in_region(sample: ZeroSample, region: RegionSpec, model: DomainModel | None = None) -> int:
    if len(sample.roots) == 0:
        return 0
    return int(region.contains(sample.roots.reshape(-1, 1), model).sum())


def empirical_zero_mass(ensemble: GaussianEnsemble, region: RegionSpec, trials: int, *, model=None, workers=None,
                        keep_samples: bool = False):
    """Mean fraction (#roots in region) / N over independent trials."""
    if ensemble.basis.m != 1:
        raise ValueError("empirical zeros are computed for m = 1 only")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    N = ensemble.basis.N
    model = model if model is not None else (ensemble.basis.source if isinstance(ensemble.basis.source, DomainModel) else None)

    def one(t):
        s = univariate_roots(sample_polynomial(ensemble, t))
        return count_in_region(s, region, model) / N, (s if keep_samples else None)

    res = pmap(one, range(trials), workers)
    fr = np.array([r[0] for r in res])
    se = float(fr.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    out = ZeroMass(float(fr.mean()), se, trials, fr)
    if keep_samples:
        return out, [r[1] for r in res]
    return out


def write_roots_csv(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "re", "im"])
        for s in samples:
            for r in s.roots:
                w.writerow([s.trial, repr(float(r.real)), repr(float(r.imag))])


# ---------------------------------------------------------------------------
# complex Hessians


def default_step(pts) -> np.ndarray:
    return np.maximum(1e-4, 1e-3 * (1 + np.linalg.norm(pts, axis=1)))


def complex_hessian_fd(func, points, step=None, *, richardson: bool = False) -> np.ndarray:
    """Complex Hessian d^2 f / dz_j dconj(z_l) of a real function by central differences.

    ``func`` maps an (n, m) complex array to n reals.  Returns (n, m, m).
    H = 1/4 [(f_xjxl + f_yjyl) + i (f_xjyl - f_yjxl)].
    """
    pts = np.asarray(points, dtype=complex)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    n, m = pts.shape
    h = default_step(pts) if step is None else np.broadcast_to(np.asarray(step, dtype=float), (n,))
    if np.any(~(h > 0)):
        raise StepError("finite-difference step must be positive")
    if richardson:
        H1 = complex_hessian_fd(func, pts, h)
        H2 = complex_hessian_fd(func, pts, h / 2)
        return (4 * H2 - H1) / 3

    dirs = np.zeros((2 * m, m), dtype=complex)
    for c in range(m):
        dirs[2 * c, c] = 1.0
        dirs[2 * c + 1, c] = 1j
    offsets = [np.zeros(m, dtype=complex)]
    keys = {}
    for a in range(2 * m):
        for sa in (1, -1):
            keys[(a, sa)] = len(offsets)
            offsets.append(sa * dirs[a])
    for a, b in itertools.combinations(range(2 * m), 2):
        for sa in (1, -1):
            for sb in (1, -1):
                keys[(a, sa, b, sb)] = len(offsets)
                offsets.append(sa * dirs[a] + sb * dirs[b])
    offsets = np.array(offsets)
    stacked = pts[:, None, :] + h[:, None, None] * offsets[None, :, :]
    vals = np.asarray(func(stacked.reshape(-1, m)), dtype=float).reshape(n, len(offsets))
    if not np.all(np.isfinite(vals)):
        raise StepError("non-finite function values in finite-difference stencil")
    f0 = vals[:, 0]
    h2 = h**2
    R = np.empty((n, 2 * m, 2 * m))
    for a in range(2 * m):
        R[:, a, a] = (vals[:, keys[(a, 1)]] - 2 * f0 + vals[:, keys[(a, -1)]]) / h2
    for a, b in itertools.combinations(range(2 * m), 2):
        v = (vals[:, keys[(a, 1, b, 1)]] - vals[:, keys[(a, 1, b, -1)]]
             - vals[:, keys[(a, -1, b, 1)]] + vals[:, keys[(a, -1, b, -1)]]) / (4 * h2)
        R[:, a, b] = R[:, b, a] = v
    xx = R[:, 0::2, 0::2]
    yy = R[:, 1::2, 1::2]
    xy = R[:, 0::2, 1::2]
    H = 0.25 * ((xx + yy) + 1j * (xy - np.transpose(xy, (0, 2, 1))))
    return H


def kernel_hessian(field: KernelField, points, *, step=None, method: str = "fd", richardson: bool = False):
    """Complex Hessian of log S_N(z, z) at each point, shape (n, m, m)."""
    pts, _ = as_points(points, field.m)
    if method == "fd":
        return complex_hessian_fd(lambda p: np.atleast_1d(field.log_kernel_diag(p)), pts, step, richardson=richardson)
    if method == "analytic":
        return _analytic_hessian(field.basis, pts)
    raise ValueError(f"unknown method {method!r}")


def _analytic_hessian(basis: OrthonormalBasis, pts):
    """d dbar log ||p||^2 = (D* D S - (D* p)(p* D)) / S^2 with D[j, c] = dp_j/dz_c."""
    n, m = pts.shape
    if basis.recurrence is not None:
        P, D = basis.evaluate_with_derivative(pts[:, 0])
        D = D[:, :, None]
    else:
        s = np.maximum(1.0, np.abs(pts).max(axis=1))
        V = monomials(pts, m, basis.N, s)
        E = exponent_matrix(m, basis.N)
        lookup = {tuple(e): i for i, e in enumerate(E)}
        P = V @ basis.coeffs.T
        D = np.zeros((n, basis.dim, m), dtype=complex)
        for c in range(m):
            dV = np.zeros_like(V)
            for i, e in enumerate(E):
                if e[c] > 0:
                    lower = list(e)
                    lower[c] -= 1
                    dV[:, i] = e[c] * V[:, lookup[tuple(lower)]]
            D[:, :, c] = dV @ basis.coeffs.T
    S = np.einsum("ij,ij->i", P, P.conj()).real
    DD = np.einsum("ijc,ije->ice", D, D.conj())
    Dp = np.einsum("ijc,ij->ic", D, P.conj())
    H = DD / S[:, None, None] - np.einsum("ic,ie->ice", Dp, Dp.conj()) / S[:, None, None] ** 2
    return H


def _elementary_symmetric(lam, k):
    # np.poly gives the characteristic polynomial coefficients [1, -e1, e2, ...]
    coeffs = np.poly(lam)
    return ((-1) ** k) * coeffs[k].real


def density_from_hessian(H, k: int, *, tol: float = 1e-6) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim == 2:
        H = H[None]
    m = H.shape[-1]
    if not 1 <= k <= m:
        raise ValueError("codimension k must satisfy 1 <= k <= m")
    Hh = 0.5 * (H + np.conj(np.transpose(H, (0, 2, 1))))
    lam = np.linalg.eigvalsh(Hh)
    scale = np.maximum(1.0, np.abs(lam).max(axis=1))
    if np.any(lam.sum(axis=1) < -tol * scale):
        warnings.warn("complex Hessian of log S_N has negative trace; reduce the step", CurvatureWarning)
    ek = np.array([_elementary_symmetric(row, k) for row in lam])
    dens = math.factorial(k) * ek / math.pi**k
    bad = dens < -1e-9 * (scale ** k)
    if np.any(bad):
        warnings.warn("negative density beyond tolerance", CurvatureWarning)
    return np.clip(dens, 0.0, None)


def expected_density(field: KernelField, z, k: int, step=None, *, method: str = "fd", richardson: bool = False):
    """Density of E(Z_{f_1..f_k}) at z (see module docstring for the reference form)."""
    pts, single = as_points(z, field.m)
    if not 1 <= k <= field.m:
        raise ValueError("codimension k must satisfy 1 <= k <= m")
    if np.any(~np.isfinite(np.atleast_1d(field.log_kernel_diag(pts)))):
        raise ValueError("S_N(z, z) vanishes at a requested point")
    H = kernel_hessian(field, pts, step=step, method=method, richardson=richardson)
    d = density_from_hessian(H, k)
    return float(d[0]) if single else d


def _wedge_power(H):
    """(sum_jl H_jl (i/2) dz_j ^ dzbar_l)^m expanded term by term: m! sum_sigma sgn prod H."""
    m = H.shape[0]
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(m)):
        inv = sum(1 for a, b in itertools.combinations(perm, 2) if a > b)
        term = (-1) ** inv
        for j, l in enumerate(perm):
            term = term * H[j, l]
        total += term
    return math.factorial(m) * total.real


@dataclass(frozen=True)
class WedgeCheck:
    lhs: float
    rhs: float
    rel_err: float


def wedge_consistency(field: KernelField, z, step=None, *, method: str = "fd") -> WedgeCheck:
    """Top-degree density by the eigenvalue route versus an explicit m-fold wedge."""
    if field.m < 2:
        raise ValueError("wedge_consistency needs m >= 2")
    pts, _ = as_points(z, field.m)
    H = kernel_hessian(field, pts[:1], step=step, method=method)[0]
    lhs = float(density_from_hessian(H, field.m)[0])
    Hh = 0.5 * (H + H.conj().T)
    rhs = _wedge_power(Hh) / math.pi**field.m
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return WedgeCheck(lhs, rhs, rel)


# ---------------------------------------------------------------------------
# SU(m+1) benchmark


def fubini_study_density(z, N: int) -> np.ndarray:
    """(N^m / pi^m) omega^m against Lebesgue volume, omega = (i/2) ddbar log(1 + |z|^2).

    omega^m = m! (1 + |z|^2)^(-(m+1)) dV.
    """
    pts = np.asarray(z, dtype=complex)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    m = pts.shape[1]
    r2 = np.sum(np.abs(pts) ** 2, axis=1)
    return (N / math.pi) ** m * math.factorial(m) * (1 + r2) ** (-(m + 1))


def su_flatness(m: int, N: int, points, step=None, *, richardson: bool = True) -> np.ndarray:
    """Ratio of the computed k = m density to the Fubini-Study prediction at each point."""
    field = KernelField(su_basis(m, N))
    pts, _ = as_points(points, m)
    dens = np.atleast_1d(expected_density(field, pts, m, step, richardson=richardson))
    return dens / fubini_study_density(pts, N)


# ---------------------------------------------------------------------------
# expected mass in regions


def _gauss_panels(breaks, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _radial_breaks(lo, hi, N):
    """Panel breakpoints graded towards r = 1, where the density has width ~ 1/N."""
    pts = {lo, hi}
    for j in range(-12, 13):
        r = 1 + math.copysign((2 ** abs(j) - 1) / (4 * N), j)
        if lo < r < hi:
            pts.add(r)
    r = 2.0
    while r < hi:
        if r > lo:
            pts.add(r)
        r *= 2
    return np.array(sorted(pts))


def radial_expected_mass(field: KernelField, r_lo: float, r_hi: float, *, step=None, richardson=True) -> float:
    """int over r_lo <= |z| <= r_hi of the k = 1 density (m = 1, rotation invariant kernels)."""
    if field.m != 1:
        raise ValueError("radial_expected_mass is for m = 1")
    r_hi = min(r_hi, 1e3)
    r, w = _gauss_panels(_radial_breaks(r_lo, r_hi, max(field.N, 1)))
    d = expected_density(field, r.astype(complex), 1, step, richardson=richardson)
    return float(np.sum(w * 2 * math.pi * r * d))


def strip_expected_mass(field: KernelField, a: float, b: float, *, height: float = 2.0, step=None,
                        richardson=True) -> float:
    """int over a <= Re z <= b, |Im z| <= height of the k = 1 density (m = 1)."""
    N = max(field.N, 1)
    ybreaks = sorted({0.0, height} | {(2**j - 1) / (4 * N) for j in range(1, 14) if (2**j - 1) / (4 * N) < height})
    y, wy = _gauss_panels(np.array(ybreaks), 12)
    xb = np.linspace(a, b, max(4, int(8 * (b - a) * 4)) + 1)
    x, wx = _gauss_panels(xb, 12)
    X, Y = np.meshgrid(x, y, indexing="ij")
    W = np.outer(wx, wy)
    z = (X + 1j * Y).ravel()
    d = expected_density(field, z, 1, step, richardson=richardson)
    # density is symmetric under conjugation for real measures
    return float(2 * np.sum(W.ravel() * d))


def expected_region_mass(field: KernelField, model: DomainModel, region: RegionSpec, **kw) -> float:
    """Expected number of zeros of one random polynomial in ``region`` (m = 1)."""
    if region.kind == "annulus":
        return radial_expected_mass(field, region.r_lo, region.r_hi, **kw)
    if region.kind == "plane":
        return radial_expected_mass(field, 0.0, math.inf, **kw)
    if region.kind == "sector" and model.is_radial:
        frac = min(region.theta_hi - region.theta_lo, 2 * math.pi) / (2 * math.pi)
        return frac * radial_expected_mass(field, 0.0, math.inf, **kw)
    if region.kind == "subinterval" and model.kind == "interval":
        return strip_expected_mass(field, region.a, region.b, **kw)
    raise RegionMismatchError(f"no expected-mass integrator for {region.kind!r} on {model.kind!r}")


@dataclass(frozen=True)
class CapturedMass:
    N: int
    region: RegionSpec
    captured: float
    equilibrium: float


def density_vs_equilibrium(model: DomainModel, Ns, regions, *, workers=None) -> list[CapturedMass]:
    """N^{-m} times the expected zero count in each region, next to its mu_eq mass."""
    from equizero import sphere_scaling

    rows = []
    for N in Ns:
        if model.m == 1:
            field = KernelField(build_basis(model, N))
            vals = pmap(lambda reg: expected_region_mass(field, model, reg) / N, regions, workers)
        elif model.kind == "ball":
            vals = []
            for reg in regions:
                if reg.kind not in ("annulus", "plane"):
                    raise RegionMismatchError("ball m >= 2 supports annulus regions only")
                lo = reg.r_lo if reg.kind == "annulus" else 0.0
                hi = reg.r_hi if reg.kind == "annulus" else math.inf
                vals.append(sphere_scaling.shell_mass(lo, hi, N, model.m) / N**model.m)
        else:
            raise RegionMismatchError(f"density_vs_equilibrium does not support {model.kind} with m={model.m}")
        for reg, v in zip(regions, vals):
            rows.append(CapturedMass(int(N), reg, float(v), equilibrium_mass(model, reg)))
    return rows


def write_density_csv(points, k, values, path) -> None:
    pts = np.asarray(points, dtype=complex)
    m = pts.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = []
        for c in range(m):
            head += [f"re_z{c + 1}", f"im_z{c + 1}"]
        w.writerow(head + ["k", "density"])
        for z, v in zip(pts, values):
            row = []
            for c in range(m):
                row += [repr(float(z[c].real)), repr(float(z[c].imag))]
            w.writerow(row + [k, repr(float(v))])
