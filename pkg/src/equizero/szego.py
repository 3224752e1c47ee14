"""Szegő kernels S_N(z, w) = sum_j p_j(z) conj(p_j(w)) and their diagnostics.

All diagonal quantities are computed in log space: S_N(z, z) grows like
exp(2 N V_K(z)), which leaves double range at modest N and |z|.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from equizero._parallel import pmap
from equizero.domain_models import DomainModel, as_points, green_function, sup_grid
from equizero.errors import UnimplementedDomainError
from equizero.orthopoly import OrthonormalBasis, build_basis, dim_poly


@dataclass(frozen=True)
class KernelField:
    basis: OrthonormalBasis
    cache: str = "none"

    @property
    def N(self) -> int:
        return self.basis.N

    @property
    def m(self) -> int:
        return self.basis.m

    def log_kernel_diag(self, z):
        """log S_N(z, z)."""
        pts, single = as_points(z, self.m)
        P, logs = self.basis.evaluate(pts)
        out = np.log(np.einsum("ij,ij->i", P, P.conj()).real) + 2 * self.N * logs
        return float(out[0]) if single else out

    def kernel_diag(self, z):
        return np.exp(self.log_kernel_diag(z))

    def kernel(self, z, w):
        """S_N(z, w) for matching arrays of points (no log scaling)."""
        pz, single = as_points(z, self.m)
        pw, _ = as_points(w, self.m)
        Pz, _ = self.basis.evaluate(pz, log_scale=False)
        Pw, _ = self.basis.evaluate(pw, log_scale=False)
        out = np.einsum("ij,ij->i", Pz, Pw.conj())
        return complex(out[0]) if single else out

    def normalized_log_kernel(self, z):
        """(1 / 2N) log S_N(z, z)."""
        if self.N == 0:
            raise ValueError("normalized log kernel needs N >= 1")
        return self.log_kernel_diag(z) / (2 * self.N)


def field_for(model: DomainModel, N: int, **kw) -> KernelField:
    return KernelField(build_basis(model, N, **kw))


# ---------------------------------------------------------------------------
# extremal function Phi_N


def log_extremal_function(model: DomainModel, z, N: int, *, grid_resolution: int = 64):
    """log Phi_N(z); closed forms where available, convex-program estimate otherwise."""
    pts, single = as_points(z, model.m)
    V = np.atleast_1d(green_function(model, pts))
    if model.kind != "interval":
        # z_j^N or <z, a>^N attains the Bernstein-Walsh bound exp(N V_K).
        out = N * V
    else:
        out = np.empty(len(pts))
        for i, x in enumerate(pts[:, 0]):
            if V[i] == 0.0 or (x.imag == 0.0 and abs(x.real) <= 1.0):
                out[i] = 0.0
            elif x.imag == 0.0:
                # Chebyshev extremality on the real axis: |T_N(x)| = cosh(N arccosh|x|)
                t = math.acosh(abs(x.real))
                out[i] = N * t + math.log1p(math.exp(-2 * N * t)) - math.log(2)
            else:
                out[i] = math.log(extremal_estimate_grid(model, x, N, grid_resolution))
    return float(out[0]) if single else out


def extremal_function(model: DomainModel, z, N: int, **kw):
    """Phi_N(z) = sup{|f(z)| : f in P_N, ||f||_K <= 1}."""
    return np.exp(log_extremal_function(model, z, N, **kw))


def has_closed_form_extremal(model: DomainModel, z) -> np.ndarray:
    pts, _ = as_points(z, model.m)
    if model.kind != "interval":
        return np.ones(len(pts), dtype=bool)
    x = pts[:, 0]
    return (x.imag == 0) | (np.atleast_1d(green_function(model, pts)) == 0)


def extremal_estimate_grid(model: DomainModel, z, N: int, grid_resolution: int = 64) -> float:
    """Lower-bound estimate of Phi_N(z) by a second-order cone program.

    Maximizes Re f(z) over f in P_N subject to |f| <= 1 on a boundary grid,
    then divides by the sup of the optimizer on a grid twice as fine, so the
    result is a lower bound up to the fine grid's sampling error.  It is also
    capped by the Bernstein-Walsh bound exp(N V_K(z)).
    """
    import cvxpy as cp

    if N > 10 or model.m > 2:
        raise ValueError("extremal_estimate_grid is limited to N <= 10 and m <= 2")
    pts, _ = as_points(z, model.m)
    basis = build_basis(model, N)
    res = grid_resolution if model.m == 1 else max(8, grid_resolution // 4)
    grid = sup_grid(model, res)
    fine = sup_grid(model, 2 * res)
    Pg, _ = basis.evaluate(grid, log_scale=False)
    Pz, _ = basis.evaluate(pts[:1], log_scale=False)
    c = cp.Variable(basis.dim, complex=True)
    prob = cp.Problem(cp.Maximize(cp.real(Pz[0] @ c)), [cp.abs(Pg @ c) <= 1])
    prob.solve()
    if prob.status not in ("optimal", "optimal_inaccurate") or c.value is None:
        warnings.warn(f"extremal estimate did not converge ({prob.status}); returning 1")
        return 1.0
    if prob.status != "optimal":
        warnings.warn("extremal estimate solver reported an inaccurate optimum")
    cv = c.value
    Pf, _ = basis.evaluate(fine, log_scale=False)
    sup = max(np.abs(Pf @ cv).max(), np.abs(Pg @ cv).max())
    val = abs(Pz[0] @ cv) / sup
    bound = math.exp(N * float(np.atleast_1d(green_function(model, pts[:1]))[0]))
    return float(min(max(val, 1.0), bound))


# ---------------------------------------------------------------------------
# kernel diagnostics


@dataclass(frozen=True)
class SandwichResult:
    ratio: float
    lower_bound: float
    lower_ok: bool
    log_ratio: float


def sandwich_check(field: KernelField, model: DomainModel, z, N: int | None = None, *, rtol: float = 1e-12):
    """Compare S_N(z, z) / Phi_N(z)^2 with the lower bound 1 / d(N)."""
    N = field.N if N is None else N
    if N != field.N:
        raise ValueError("N does not match the kernel field")
    pts, single = as_points(z, model.m)
    log_ratio = np.atleast_1d(field.log_kernel_diag(pts)) - 2 * np.atleast_1d(log_extremal_function(model, pts, N))
    lower = 1.0 / dim_poly(model.m, N)
    ok = log_ratio >= math.log(lower) + math.log1p(-rtol)
    out = [SandwichResult(float(math.exp(r)), lower, bool(k), float(r)) for r, k in zip(log_ratio, ok)]
    return out[0] if single else out


@dataclass
class ConvergenceTable:
    grid: np.ndarray
    Ns: list
    sup_dev_logkernel: list
    sup_dev_phi: list | None = None
    near_boundary: list | None = field(default=None)

    def rows(self):
        for i, N in enumerate(self.Ns):
            row = [N, self.sup_dev_logkernel[i]]
            if self.sup_dev_phi is not None:
                row.append(self.sup_dev_phi[i])
            yield row

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["N", "sup_dev_logkernel"] + (["sup_dev_phi"] if self.sup_dev_phi is not None else [])
            w.writerow(head)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def convergence_table(model: DomainModel, Ns, grid, *, with_phi: bool = False, workers=None) -> ConvergenceTable:
    """sup over ``grid`` of |(1/2N) log S_N - V_K| (and |(1/N) log Phi_N - V_K|) per N."""
    Ns = sorted(int(n) for n in Ns)
    if len(set(Ns)) != len(Ns) or not Ns or Ns[0] < 1:
        raise ValueError("N list must be non-empty, distinct and positive")
    pts, _ = as_points(grid, model.m)
    V = np.atleast_1d(green_function(model, pts))

    def one(N):
        f = field_for(model, N)
        dev = float(np.abs(f.normalized_log_kernel(pts) - V).max())
        phi = None
        if with_phi:
            phi = float(np.abs(np.atleast_1d(log_extremal_function(model, pts, N)) / N - V).max())
        return dev, phi

    res = pmap(one, Ns, workers)
    table = ConvergenceTable(pts, Ns, [r[0] for r in res], [r[1] for r in res] if with_phi else None)
    return table


def default_grid(model: DomainModel, n: int, seed: int, *, radius: float = 3.0, exclusion: float = 1e-3) -> np.ndarray:
    """Uniform random points in the ball of ``radius`` minus a neighbourhood of the boundary of K."""
    rng = np.random.Generator(np.random.Philox(key=int(seed) % 2**64))
    m = model.m
    out = []
    while sum(len(o) for o in out) < n:
        x = rng.standard_normal((4 * n, 2 * m))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        x *= radius * rng.random((4 * n, 1)) ** (1.0 / (2 * m))
        z = x[:, 0::2] + 1j * x[:, 1::2]
        out.append(z[_far_from_boundary(model, z, exclusion)])
    return np.concatenate(out)[:n]


def _far_from_boundary(model, z, eps):
    if model.kind == "interval":
        x = z[:, 0]
        d = np.where(np.abs(x.real) <= 1, np.abs(x.imag), np.abs(x - np.sign(x.real)))
        return d > eps
    rho = np.abs(z).max(axis=1) if model.kind == "polydisk" else np.linalg.norm(z, axis=1)
    return np.abs(rho - 1) > eps


def kernel_slice_rows(field: KernelField, points):
    """Rows ``re_z..., im_z..., S_N, normalized_log`` for a kernel-slice CSV."""
    pts, _ = as_points(points, field.m)
    logS = np.atleast_1d(field.log_kernel_diag(pts))
    for z, ls in zip(pts, logS):
        yield [*z.real, *z.imag, math.exp(ls) if ls < 700 else math.inf, ls / (2 * field.N)]


__all__ = [
    "KernelField",
    "field_for",
    "extremal_function",
    "log_extremal_function",
    "extremal_estimate_grid",
    "sandwich_check",
    "convergence_table",
    "ConvergenceTable",
    "default_grid",
    "UnimplementedDomainError",
]
