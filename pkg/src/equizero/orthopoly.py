"""Moment matrices and L^2(mu)-orthonormal polynomial bases.

Monomials are ordered by total degree, then lexicographically with the first
coordinate most significant and larger exponents first, so for m = 2 the
degree-2 block is z1^2, z1 z2, z2^2.  A basis of degree N is therefore a
prefix of the basis of degree N + 1, and Gram-Schmidt on that sequence
produces a lower-triangular coefficient matrix.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from equizero.domain_models import DomainModel, QuadratureRule, as_points, quadrature
from equizero.errors import CapacityError, ConditioningError, InsufficientResolutionError

MAX_DIM = 2_000_000

# Degree caps per dimension.  m = 1 is limited by the companion-matrix cap.
DEGREE_CAP = {1: 500, 2: 30, 3: 20}


def degree_cap(m: int) -> int:
    return DEGREE_CAP.get(m, 10)


def dim_poly(m: int, N: int) -> int:
    """d(N) = C(N + m, m)."""
    return math.comb(N + m, m)


@dataclass(frozen=True, order=True)
class MultiIndex:
    total: int
    exponents: tuple

    def __str__(self):
        return "(" + ",".join(str(e) for e in self.exponents) + ")"


def _compositions(total, m):
    """All exponent tuples of length m summing to ``total``, first coordinate largest first."""
    if m == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, m - 1):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _enumerate(m, N):
    return tuple(MultiIndex(k, e) for k in range(N + 1) for e in _compositions(k, m))


def enumerate_multiindices(m: int, N: int) -> list[MultiIndex]:
    """Multi-indices with |J| <= N in graded order."""
    if m < 1 or N < 0:
        raise ValueError("need m >= 1 and N >= 0")
    if dim_poly(m, N) > MAX_DIM:
        raise CapacityError(f"d(N) = C({N + m}, {m}) exceeds capacity {MAX_DIM}")
    return list(_enumerate(m, N))


def exponent_matrix(m: int, N: int) -> np.ndarray:
    return np.array([J.exponents for J in enumerate_multiindices(m, N)], dtype=int).reshape(-1, m)


def monomials(points, m: int, N: int, scale=1.0) -> np.ndarray:
    """Matrix V[i, J] = z_i^J / s_i^N, built from per-coordinate power tables.

    ``scale`` is a scalar or one value per point.  Dividing by s^N keeps large
    |z| in range; the caller adds 2 N log(s) back in log space.
    """
    pts, _ = as_points(points, m)
    E = exponent_matrix(m, N)
    s = np.broadcast_to(np.asarray(scale, dtype=float), (len(pts),))
    zs = pts / s[:, None]
    V = np.ones((len(pts), len(E)), dtype=complex)
    for c in range(m):
        powers = zs[:, c : c + 1] ** np.arange(N + 1)[None, :]
        V *= powers[:, E[:, c]]
    if np.any(s != 1.0):
        V *= s[:, None] ** (E.sum(axis=1) - N)[None, :].astype(float)
    return V


# ---------------------------------------------------------------------------
# moments


class ExactMoments:
    """Closed-form moments of mu_eq for the built-in kinds.

    ``moment(J, L)`` returns int(z^J conj(z)^L dmu) as an exact Fraction.
    """

    def __init__(self, model: DomainModel):
        self.model = model

    @property
    def m(self):
        return self.model.m

    def moment(self, J, L) -> Fraction:
        kind = self.model.kind
        if kind == "interval":
            p = J[0] + L[0]
            return Fraction(math.comb(p, p // 2), 2**p) if p % 2 == 0 else Fraction(0)
        if tuple(J) != tuple(L):
            return Fraction(0)
        if kind in ("polydisk", "circle") or self.m == 1:
            return Fraction(1)
        # sphere: (m-1)! j_1! ... j_m! / (|J| + m - 1)!
        num = math.factorial(self.m - 1) * math.prod(math.factorial(j) for j in J)
        return Fraction(num, math.factorial(sum(J) + self.m - 1))

    def is_diagonal(self) -> bool:
        return self.model.kind != "interval"


def sphere_monomial_norm2(J) -> float:
    """int_{S^{2m-1}} |z^J|^2 dmu for the invariant probability measure."""
    m = len(J)
    return math.factorial(m - 1) * math.prod(math.factorial(j) for j in J) / math.factorial(sum(J) + m - 1)


def moment_matrix(provider, m: int, N: int, *, exact: bool = False, tol: float = 1e-12):
    """Gram matrix G[J, L] = int z^J conj(z)^L dmu over |J|, |L| <= N.

    ``provider`` is a QuadratureRule or an ExactMoments instance.  With
    ``exact=True`` and an ExactMoments provider, returns an object array of
    Fractions.
    """
    idx = enumerate_multiindices(m, N)
    d = len(idx)
    if isinstance(provider, ExactMoments):
        if exact:
            G = np.empty((d, d), dtype=object)
            for a, J in enumerate(idx):
                for b, L in enumerate(idx):
                    G[a, b] = provider.moment(J.exponents, L.exponents)
            return G
        if provider.is_diagonal():
            G = np.zeros((d, d))
            np.fill_diagonal(G, [float(provider.moment(J.exponents, J.exponents)) for J in idx])
            return G
        G = np.array([[float(provider.moment(J.exponents, L.exponents)) for L in idx] for J in idx])
        return G

    rule: QuadratureRule = provider
    rule.require_degree(2 * N)
    V = monomials(rule.nodes, m, N)
    G = (V.T * rule.weights) @ V.conj()
    G = 0.5 * (G + G.conj().T)
    if np.all(np.abs(G.imag) == 0):
        G = G.real
    lam = np.linalg.eigvalsh(G)
    if lam[0] < -tol * max(lam[-1], 1.0):
        raise ConditioningError(
            f"moment matrix not PSD: smallest eigenvalue {lam[0]:.3e}", smallest_eigenvalue=lam[0]
        )
    return G


def orthonormalize(G, *, rcond: float = 1e-13) -> np.ndarray:
    """Lower-triangular A with positive diagonal and A G A* = I (A = L^{-1}, G = L L*)."""
    G = np.asarray(G)
    lam = np.linalg.eigvalsh(G)
    if lam[0] <= rcond * lam[-1]:
        raise ConditioningError(
            f"moment matrix ill-conditioned (eigenvalues {lam[0]:.3e} .. {lam[-1]:.3e}); "
            "use an exact-moment provider, orthonormalize_nodes, or a lower degree",
            smallest_eigenvalue=lam[0],
        )
    L = np.linalg.cholesky(G)
    return _lower_inverse(L)


def _lower_inverse(L):
    from scipy.linalg import solve_triangular

    A = solve_triangular(L, np.eye(L.shape[0], dtype=L.dtype), lower=True)
    return np.tril(A)


def orthonormalize_nodes(rule: QuadratureRule, m: int, N: int, *, chebyshev: bool = False) -> np.ndarray:
    """QR route: orthonormalize on the weighted node-value matrix.

    With M = diag(sqrt(w)) conj(V) we have G = M* M, so M = Q R gives
    G = R* R and A = R^{-*}.  Backward stable where Cholesky of G is not.
    With ``chebyshev`` (m = 1, real nodes) V holds T_k values instead of
    monomials and the result is mapped back through the integer matrix of
    Chebyshev-to-monomial coefficients.
    """
    rule.require_degree(2 * N)
    if chebyshev:
        if m != 1:
            raise ValueError("chebyshev Vandermonde needs m = 1")
        V = np.polynomial.chebyshev.chebvander(rule.nodes[:, 0].real, N)
    else:
        V = monomials(rule.nodes, m, N)
    M = np.sqrt(rule.weights)[:, None] * V.conj()
    if len(M) < M.shape[1]:
        raise InsufficientResolutionError("fewer nodes than basis functions", rule.min_resolution(2 * N))
    _, R = np.linalg.qr(M)
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    R = R / phase[:, None]
    L = R.conj().T
    A = _lower_inverse(L)
    if np.all(A.imag == 0):
        A = A.real
    if chebyshev:
        C = np.zeros((N + 1, N + 1))
        for k in range(N + 1):
            C[k, : k + 1] = np.polynomial.chebyshev.cheb2poly(np.eye(N + 1)[k])[: k + 1]
        A = np.tril(A @ C)
    return A


def orthonormality_residual(A, G) -> float:
    """max |A G A* - I|.

    When G holds Fractions the product is formed in exact rational arithmetic
    (the float entries of A are converted exactly), which separates the error
    of A from the rounding of the check itself.
    """
    A = np.asarray(A)
    G = np.asarray(G)
    d = A.shape[0]
    if G.dtype == object:
        if np.iscomplexobj(A) and np.any(A.imag != 0):
            raise ValueError("exact residual supports real coefficient matrices only")
        Af = [[Fraction(float(x)) for x in row] for row in np.real(A)]
        Gl = G.tolist()
        nz = [[k for k in range(d) if Af[i][k] != 0] for i in range(d)]
        AG = [[sum(Af[i][k] * Gl[k][j] for k in nz[i]) for j in range(d)] for i in range(d)]
        worst = Fraction(0)
        for i in range(d):
            for j in range(i, d):
                val = sum(AG[i][k] * Af[j][k] for k in nz[j]) - (1 if i == j else 0)
                worst = max(worst, abs(val))
        return float(worst)
    R = A @ G @ A.conj().T - np.eye(d)
    return float(np.abs(R).max())


# ---------------------------------------------------------------------------
# three-term recurrence for real measures (interval)


def stieltjes(rule: QuadratureRule, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Recurrence coefficients of the orthonormal polynomials of a real discrete measure.

    x p_k = beta[k+1] p_{k+1} + alpha[k] p_k + beta[k] p_{k-1}, p_0 = 1/sqrt(beta[0]).
    Returns alpha[0..N] and beta[0..N+1] (beta[0] is the total mass).
    """
    x = rule.nodes[:, 0].real
    w = rule.weights
    if len(x) < N + 2:
        raise InsufficientResolutionError("Stieltjes needs more nodes than the degree", N + 2)
    alpha = np.zeros(N + 1)
    beta = np.zeros(N + 2)
    beta[0] = w.sum()
    p_prev = np.zeros_like(x)
    p = np.full_like(x, 1.0 / math.sqrt(beta[0]))
    for k in range(N + 1):
        alpha[k] = np.dot(w, x * p * p)
        q = (x - alpha[k]) * p - (beta[k] if k > 0 else 0.0) * p_prev
        # one reorthogonalization pass against p and p_prev
        q -= np.dot(w, q * p) * p
        if k > 0:
            q -= np.dot(w, q * p_prev) * p_prev
        beta[k + 1] = math.sqrt(np.dot(w, q * q))
        p_prev, p = p, q / beta[k + 1]
    return alpha, beta


def recurrence_coefficients(alpha, beta, N) -> np.ndarray:
    """Monomial coefficients (lower-triangular, row j = p_j) from the recurrence."""
    A = np.zeros((N + 1, N + 1))
    A[0, 0] = 1.0 / math.sqrt(beta[0])
    for k in range(N):
        row = np.zeros(N + 1)
        row[1:] = A[k, :-1]
        row -= alpha[k] * A[k]
        if k > 0:
            row -= beta[k] * A[k - 1]
        A[k + 1] = row / beta[k + 1]
    return A


# ---------------------------------------------------------------------------
# basis object


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Degree-graded orthonormal basis p_j = sum_J coeffs[j, J] z^J.

    ``recurrence`` (alpha, beta) is set for real measures in one variable;
    evaluation then runs the three-term recurrence instead of the monomial
    sum, which stays accurate for large N.
    """

    m: int
    N: int
    coeffs: np.ndarray
    source: object = None
    recurrence: tuple | None = None
    label: str = ""
    indices: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.indices is None:
            object.__setattr__(self, "indices", enumerate_multiindices(self.m, self.N))
        if self.coeffs.shape != (self.dim, self.dim):
            raise ValueError(f"coeffs must be {self.dim}x{self.dim}")
        off = self.coeffs - np.diag(np.diag(self.coeffs))
        object.__setattr__(self, "_diagonal", self.recurrence is None and not np.any(off))

    @property
    def dim(self) -> int:
        return dim_poly(self.m, self.N)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([J.total for J in self.indices])

    @property
    def is_diagonal(self) -> bool:
        return self._diagonal

    def truncate(self, N: int) -> "OrthonormalBasis":
        if N > self.N:
            raise ValueError("cannot extend a basis by truncation")
        d = dim_poly(self.m, N)
        rec = None
        if self.recurrence is not None:
            rec = (self.recurrence[0][: N + 1], self.recurrence[1][: N + 2])
        return OrthonormalBasis(self.m, N, self.coeffs[:d, :d].copy(), self.source, rec, self.label)

    def evaluate(self, points, *, log_scale: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Values P[i, j] = p_j(z_i) / s_i^N with s_i = max(1, |z_i|_inf); also returns log s_i.

        The scale keeps ||z|| up to 1e6 in range at every supported degree.
        """
        pts, _ = as_points(points, self.m)
        s = np.maximum(1.0, np.abs(pts).max(axis=1)) if log_scale else np.ones(len(pts))
        if self.recurrence is not None:
            P = _eval_recurrence(self.recurrence, pts[:, 0], self.N, s)
        elif self._diagonal:
            P = monomials(pts, self.m, self.N, s) * np.diag(self.coeffs)[None, :]
        else:
            P = monomials(pts, self.m, self.N, s) @ self.coeffs.T
        return P, np.log(s)

    def evaluate_with_derivative(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Unscaled values p_j(z) and derivatives dp_j/dz (m = 1 only)."""
        if self.m != 1:
            raise ValueError("derivatives are provided for m = 1")
        z = np.asarray(points, dtype=complex).reshape(-1)
        if self.recurrence is not None:
            return _eval_recurrence_deriv(self.recurrence, z, self.N)
        k = np.arange(self.N + 1)
        V = z[:, None] ** k[None, :]
        dV = np.zeros_like(V)
        dV[:, 1:] = k[None, 1:] * z[:, None] ** (k[None, 1:] - 1)
        return V @ self.coeffs.T, dV @ self.coeffs.T

    def monomial_coefficients(self, c) -> np.ndarray:
        """b = c^T A: monomial coefficients of sum_j c_j p_j."""
        return np.asarray(c) @ self.coeffs


def _eval_recurrence(rec, z, N, s):
    alpha, beta = rec
    P = np.empty((len(z), N + 1), dtype=complex)
    # p_k / s^N computed as (p_k / s^k) * s^(k - N)
    p_prev = np.zeros(len(z), dtype=complex)
    p = np.full(len(z), 1.0 / math.sqrt(beta[0]), dtype=complex)
    zs = z / s
    P[:, 0] = p
    for k in range(N):
        nxt = ((zs - alpha[k] / s) * p - (beta[k] / s**2) * p_prev if k > 0 else (zs - alpha[k] / s) * p)
        nxt = nxt / beta[k + 1]
        p_prev, p = p, nxt
        P[:, k + 1] = p
    k = np.arange(N + 1)
    P *= s[:, None] ** (k - N)[None, :].astype(float)
    return P


def _eval_recurrence_deriv(rec, z, N):
    alpha, beta = rec
    P = np.empty((len(z), N + 1), dtype=complex)
    D = np.empty_like(P)
    P[:, 0] = 1.0 / math.sqrt(beta[0])
    D[:, 0] = 0.0
    for k in range(N):
        prevP = P[:, k - 1] if k > 0 else 0.0
        prevD = D[:, k - 1] if k > 0 else 0.0
        bk = beta[k] if k > 0 else 0.0
        P[:, k + 1] = ((z - alpha[k]) * P[:, k] - bk * prevP) / beta[k + 1]
        D[:, k + 1] = (P[:, k] + (z - alpha[k]) * D[:, k] - bk * prevD) / beta[k + 1]
    return P, D


def build_basis(model: DomainModel, N: int, *, provider: str = "auto", resolution: int | None = None) -> OrthonormalBasis:
    """Orthonormal basis of P_N in L^2(mu_eq).

    provider "exact" uses closed-form moments, "quadrature" a numerical rule.
    "auto" picks exact moments for circle/polydisk/ball, and for the interval
    the Stieltjes recurrence on Gauss-Chebyshev nodes.
    """
    m = model.m
    if N < 0:
        raise ValueError("N must be >= 0")
    if model.kind == "interval":
        rule = quadrature(model, resolution or (N + 2))
        alpha, beta = stieltjes(rule, N)
        if provider == "quadrature" and N <= 20:
            A = orthonormalize_nodes(quadrature(model, resolution or (N + 1)), 1, N, chebyshev=True)
            return OrthonormalBasis(1, N, A, model, None, "interval/qr")
        A = recurrence_coefficients(alpha, beta, N)
        return OrthonormalBasis(1, N, A, model, (alpha, beta), "interval/stieltjes")

    if provider in ("auto", "exact"):
        G = moment_matrix(ExactMoments(model), m, N)
        A = np.diag(1.0 / np.sqrt(np.diag(G)))
        return OrthonormalBasis(m, N, A, model, None, f"{model.kind}/exact")
    if provider == "quadrature":
        rule = quadrature(model, resolution or (2 * N + 1))
        G = moment_matrix(rule, m, N)
        try:
            A = orthonormalize(G)
        except ConditioningError:
            A = orthonormalize_nodes(rule, m, N)
        return OrthonormalBasis(m, N, A, model, None, f"{model.kind}/quadrature")
    raise ValueError(f"unknown provider {provider!r}")


def su_basis(m: int, N: int) -> OrthonormalBasis:
    """Monomials normalized by the SU(m+1) norms ||z^J||^2 = m!(N-|J|)! J! / (N+m)!."""
    idx = enumerate_multiindices(m, N)
    lf = math.lgamma
    diag = np.array(
        [
            math.exp(0.5 * (lf(N + m + 1) - lf(m + 1) - lf(N - J.total + 1) - sum(lf(j + 1) for j in J.exponents)))
            for J in idx
        ]
    )
    return OrthonormalBasis(m, N, np.diag(diag), "su", None, "su")


# ---------------------------------------------------------------------------
# Bernstein-Markov


@dataclass
class BMReport:
    epsilon: float
    estimated_C: float
    ratios: dict

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "estimated_C": self.estimated_C,
            "ratios": [{"degree": int(k), "ratio": float(v)} for k, v in sorted(self.ratios.items())],
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


def sup_norm_ratio(basis: OrthonormalBasis, c, grid) -> float:
    """Grid sup of |sum c_j p_j| divided by its L^2(mu) norm ||c||."""
    c = np.asarray(c, dtype=complex)
    P, logs = basis.evaluate(grid, log_scale=False)
    vals = P[:, : len(c)] @ c
    return float(np.abs(vals).max() / np.linalg.norm(c))


def bm_ratio(basis: OrthonormalBasis, sup_grid, epsilon: float, trials: int, seed: int) -> BMReport:
    """Empirical Bernstein-Markov ratios ||p||_K / (e^{eps deg} ||p||_L2) per degree.

    For each degree n the basis elements of degree n and ``trials`` random
    unit-norm polynomials in P_n are tested; the per-degree entry is the
    largest observed ratio.
    """
    grid, _ = as_points(sup_grid, basis.m)
    if len(grid) == 0:
        raise ValueError("sup grid is empty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    P, _ = basis.evaluate(grid, log_scale=False)
    absP = np.abs(P)
    deg = basis.degrees
    rng = np.random.Generator(np.random.Philox(key=int(seed) % 2**64))
    ratios = {}
    for n in range(basis.N + 1):
        d = dim_poly(basis.m, n)
        best = absP[:, deg == n].max()
        c = (rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))) / math.sqrt(2)
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        best = max(best, np.abs(P[:, :d] @ c.T).max())
        ratios[n] = float(best * math.exp(-epsilon * n))
    return BMReport(float(epsilon), max(ratios.values()), ratios)


# ---------------------------------------------------------------------------
# export


def write_basis_csv(basis: OrthonormalBasis, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "multiindex", "re_coeff", "im_coeff"])
        A = np.asarray(basis.coeffs, dtype=complex)
        for j in range(basis.dim):
            for col in np.nonzero(A[j])[0]:
                w.writerow([j, str(basis.indices[col]), repr(float(A[j, col].real)), repr(float(A[j, col].imag))])
