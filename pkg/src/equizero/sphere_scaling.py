"""Radial zero density for polynomials orthonormal on the unit sphere S^{2m-1}.

On the sphere the Szegő kernel is S_N(z, z) = g_N(||z||^2) with

    g_N(x) = sum_{k=0}^N C(k+m-1, m-1) x^k.

With h = log g_N the complex Hessian of h(||z||^2) is h' I + h'' conj(z) z^T,
whose eigenvalues are h' (m-1 times) and h' + ||z||^2 h''.  Hence the
expected density of simultaneous zeros against (i/2 ddbar ||z||^2)^m is

    D_N(u) = pi^{-m} h'(t)^{m-1} (h'(t) + t h''(t)),   t = e^u = ||z||^2.

The scaling limit compares N^{-(m+1)} D_N(u/N) with
pi^{-m} F_m''(u) F_m'(u)^{m-1}, where exp(F_m(u)) is the (m-1)-th
derivative of (e^u - 1)/u, i.e. I_{m-1}(u) with I_k(u) = int_0^1 s^k e^{us} ds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from equizero.errors import SeriesDomainError

DEFAULT_U = 10.0


# ---------------------------------------------------------------------------
# g_N


def _gn_coefficients(N, m):
    k = np.arange(N + 1)
    return np.array([math.comb(int(j) + m - 1, m - 1) for j in k], dtype=float)


def g_N(x, N: int, m: int, *, derivatives: int = 0):
    """g_N(x) and optionally g_N', g_N'' (Horner, term-wise differentiated coefficients)."""
    a = _gn_coefficients(N, m)
    x = np.asarray(x, dtype=float)
    vals = [np.polynomial.polynomial.polyval(x, a)]
    da = a
    for _ in range(derivatives):
        da = np.polynomial.polynomial.polyder(da) if len(da) > 1 else np.zeros(1)
        vals.append(np.polynomial.polynomial.polyval(x, da))
    vals = [float(v) if v.ndim == 0 else v for v in vals]
    return vals[0] if derivatives == 0 else tuple(vals)


def log_g_N(t, N: int, m: int):
    """(h, h', h'') for h = log g_N, evaluated with the sum rescaled by max(1, t)^N.

    Stays finite for t up to the float range of log.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    a = _gn_coefficients(N, m)
    k = np.arange(N + 1, dtype=float)
    s = np.maximum(t, 1.0)
    # terms a_k t^k / s^N and their k, k(k-1) weighted companions
    with np.errstate(divide="ignore"):
        logt = np.log(t)
    logterms = np.log(a)[None, :] + np.where(k[None, :] > 0, k[None, :] * logt[:, None], 0.0) - N * np.log(s)[:, None]
    terms = np.exp(logterms)
    g = terms.sum(axis=1)
    g1 = (terms * k[None, :]).sum(axis=1)
    g2 = (terms * (k * (k - 1))[None, :]).sum(axis=1)
    # g' = sum k a_k t^{k-1}: divide the k-weighted sum by t (t > 0 assumed for derivatives)
    with np.errstate(divide="ignore", invalid="ignore"):
        hp = np.where(t > 0, g1 / (t * g), a[1] if N >= 1 else 0.0)
        hpp = np.where(t > 0, (g2 / g) / t / t - hp**2, (2 * a[2] if N >= 2 else 0.0) - hp**2)
    h = np.log(g) + N * np.log(s)
    if scalar:
        return float(h[0]), float(hp[0]), float(hpp[0])
    return h, hp, hpp


def G_N(x, N: int, m: int) -> float:
    """G_N(x) = (1 - x^{N+m}) / (1 - x), equal to N + m at x = 1."""
    x = float(x)
    if x == 1.0:
        return float(N + m)
    if abs(x - 1.0) < 1e-6:
        # sum_{k<N+m} x^k, avoids cancellation near 1
        return float(np.sum(x ** np.arange(N + m)))
    return (1 - x ** (N + m)) / (1 - x)


def scaled_G_N(u, N: int, m: int) -> float:
    """(1/N) G_N(1 + u/N), which tends to (e^u - 1)/u."""
    return G_N(1 + u / N, N, m) / N


def expm1_over_u(u) -> float:
    return 1.0 if u == 0 else math.expm1(u) / u


# ---------------------------------------------------------------------------
# F_m


@dataclass(frozen=True)
class SeriesFunction:
    """Moments I_k(u) = int_0^1 s^k e^{us} ds by positive-term power series.

    For u >= 0:  I_k(u) = sum_j u^j / (j! (j + k + 1)).
    For u < 0:   I_k(u) = e^u sum_j |u|^j k! / (j + k + 1)!   (reflection s -> 1 - s),
    so no alternating cancellation occurs.  I_{m-1} is the (m-1)-th derivative
    of (e^u - 1)/u.
    """

    U: float = DEFAULT_U
    order: int | None = None

    @property
    def truncation_order(self) -> int:
        return self.order if self.order is not None else int(math.ceil(self.U)) + 40

    def moment(self, k: int, u: float) -> float:
        if abs(u) > self.U + 1e-12:
            raise SeriesDomainError(f"|u| = {abs(u)} exceeds series window U = {self.U}")
        n = self.truncation_order
        a = abs(u)
        if u >= 0:
            term, total = 1.0, 0.0
            for j in range(n):
                total += term / (j + k + 1)
                term *= a / (j + 1)
            return total
        term = 1.0 / (k + 1)  # k! / (k+1)!
        total = 0.0
        for j in range(n):
            total += term
            term *= a / (j + k + 2)
        return math.exp(u) * total

    def F(self, m: int, u: float) -> tuple[float, float, float]:
        """(F_m, F_m', F_m'') at u."""
        I0 = self.moment(m - 1, u)
        if not I0 > 0:
            raise SeriesDomainError("non-positive inner derivative")
        I1 = self.moment(m, u)
        I2 = self.moment(m + 1, u)
        r1 = I1 / I0
        return math.log(I0), r1, I2 / I0 - r1 * r1


_DEFAULT_SERIES = SeriesFunction()


def F_m(u, m: int, series: SeriesFunction = _DEFAULT_SERIES) -> float:
    return series.F(m, float(u))[0]


def F_m_prime(u, m: int, series: SeriesFunction = _DEFAULT_SERIES) -> float:
    return series.F(m, float(u))[1]


def F_m_second(u, m: int, series: SeriesFunction = _DEFAULT_SERIES) -> float:
    return series.F(m, float(u))[2]


def limit_density(u, m: int, series: SeriesFunction = _DEFAULT_SERIES) -> float:
    """pi^{-m} F_m''(u) F_m'(u)^{m-1}."""
    _, f1, f2 = series.F(m, float(u))
    return f2 * f1 ** (m - 1) / math.pi**m


# ---------------------------------------------------------------------------
# exact density


def exact_radial_density(u, N: int, m: int):
    """D_N(u): density of expected simultaneous zeros against (i/2 ddbar ||z||^2)^m at ||z||^2 = e^u."""
    u = np.asarray(u, dtype=float)
    t = np.exp(u)
    _, hp, hpp = log_g_N(t, N, m)
    out = hp ** (m - 1) * (hp + t * hpp) / math.pi**m
    return float(out) if np.ndim(out) == 0 else out


def lebesgue_density(z, N: int, m: int):
    """Same density against Lebesgue volume on C^m: m! D_N(log ||z||^2)."""
    pts = np.asarray(z, dtype=complex).reshape(-1, m)
    u = np.log(np.sum(np.abs(pts) ** 2, axis=1))
    return math.factorial(m) * exact_radial_density(u, N, m)


def shell_mass(r_lo: float, r_hi: float, N: int, m: int, *, order: int = 16) -> float:
    """Expected number of simultaneous zeros with r_lo <= ||z|| <= r_hi.

    int m! D_N(log r^2) |S^{2m-1}| r^{2m-1} dr with |S^{2m-1}| = 2 pi^m / (m-1)!.
    """
    from equizero.zero_ensembles import _gauss_panels, _radial_breaks

    r_hi = min(r_hi, 1e3)
    lo = max(r_lo, 1e-12)
    r, w = _gauss_panels(_radial_breaks(lo, r_hi, N), order)
    d = exact_radial_density(np.log(r * r), N, m)
    area = 2 * math.pi**m / math.factorial(m - 1)
    return float(np.sum(w * math.factorial(m) * d * area * r ** (2 * m - 1)))


# ---------------------------------------------------------------------------
# profiles


@dataclass
class ScalingProfile:
    m: int
    N: int
    u_grid: np.ndarray
    exact: np.ndarray
    limit: np.ndarray
    U: float = DEFAULT_U
    truncation_order: int = field(default_factory=lambda: _DEFAULT_SERIES.truncation_order)

    @property
    def err(self) -> np.ndarray:
        return np.abs(self.exact - self.limit)

    @property
    def max_err(self) -> float:
        return float(self.err.max())

    def header(self) -> dict:
        return {"m": self.m, "N": self.N, "U": self.U, "truncation_order": self.truncation_order}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "exact_scaled", "limit", "abs_err"])
            for row in zip(self.u_grid, self.exact, self.limit, self.err):
                w.writerow([repr(float(v)) for v in row])

    def write_header(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.header(), fh, indent=2, sort_keys=True)


def default_u_grid(U: float = 5.0, n: int = 101) -> np.ndarray:
    return np.linspace(-U, U, n)


def scaling_profile(m: int, N: int, u_grid=None, *, series: SeriesFunction = _DEFAULT_SERIES) -> ScalingProfile:
    """N^{-(m+1)} D_N(u/N) next to pi^{-m} F_m'' F_m'^{m-1} on ``u_grid``."""
    u = default_u_grid() if u_grid is None else np.asarray(u_grid, dtype=float)
    if np.any(np.abs(u) > series.U):
        raise SeriesDomainError(f"u grid leaves [-{series.U}, {series.U}]")
    exact = np.asarray(exact_radial_density(u / N, N, m)) / float(N) ** (m + 1)
    limit = np.array([limit_density(x, m, series) for x in u])
    return ScalingProfile(m, N, u, np.atleast_1d(exact), limit, series.U, series.truncation_order)
