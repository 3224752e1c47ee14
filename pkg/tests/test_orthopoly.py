import csv
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equizero.domain_models import DomainModel, quadrature, sup_grid
from equizero.errors import CapacityError, ConditioningError
from equizero.orthopoly import (
    ExactMoments,
    bm_ratio,
    build_basis,
    dim_poly,
    enumerate_multiindices,
    moment_matrix,
    orthonormality_residual,
    orthonormalize,
    sphere_monomial_norm2,
    su_basis,
    sup_norm_ratio,
    write_basis_csv,
)

GOLDEN = Path(__file__).parent / "golden"


def test_enumerate_examples():
    idx = enumerate_multiindices(1, 3)
    assert [i.exponents for i in idx] == [(0,), (1,), (2,), (3,)]
    assert len(enumerate_multiindices(2, 3)) == 10
    assert [i.exponents for i in enumerate_multiindices(3, 0)] == [(0, 0, 0)]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 8))
def test_enumerate_graded_and_complete(m, N):
    idx = enumerate_multiindices(m, N)
    assert len(idx) == math.comb(N + m, m) == dim_poly(m, N)
    totals = [i.total for i in idx]
    assert totals == sorted(totals)
    assert len({i.exponents for i in idx}) == len(idx)
    assert all(sum(i.exponents) == i.total for i in idx)


def test_enumerate_capacity():
    with pytest.raises(CapacityError):
        enumerate_multiindices(10, 200)


def test_sphere_moment_example():
    assert ExactMoments(DomainModel("ball", 3)).moment((2, 0, 0), (2, 0, 0)) == Fraction(1, 6)
    assert sphere_monomial_norm2((2, 0, 0)) == pytest.approx(1 / 6)


def test_orthonormalize_identity():
    assert np.array_equal(orthonormalize(np.eye(5)), np.eye(5))


def test_orthonormalize_rejects_singular():
    G = np.ones((3, 3))
    with pytest.raises(ConditioningError) as ei:
        orthonormalize(G)
    assert ei.value.smallest_eigenvalue == pytest.approx(0, abs=1e-12)


def test_ball_diagonal_coefficients():
    m, N = 2, 6
    basis = build_basis(DomainModel("ball", m), N)
    A = np.asarray(basis.coeffs)
    assert np.count_nonzero(A - np.diag(np.diag(A))) == 0
    for j, J in enumerate(basis.indices):
        multinom = math.factorial(J.total) / math.prod(math.factorial(e) for e in J.exponents)
        expect = math.sqrt(math.comb(J.total + m - 1, m - 1) * multinom)
        assert A[j, j] == pytest.approx(expect, rel=1e-14)


def test_interval_p2_is_scaled_chebyshev():
    basis = build_basis(DomainModel("interval"), 2)
    p2 = np.asarray(basis.coeffs)[2]
    # sqrt(2) * (2x^2 - 1), up to sign
    p2 = p2 * np.sign(p2[2].real)
    assert np.allclose(p2, [-math.sqrt(2), 0, 2 * math.sqrt(2)], atol=1e-13)
    q = quadrature(DomainModel("interval"), 16)
    x = q.nodes[:, 0]
    v = np.polynomial.polynomial.polyval(x, p2)
    assert q.integrate(np.abs(v) ** 2).real == pytest.approx(1, abs=1e-13)
    for k in range(2):
        assert abs(q.integrate(v * x**k)) < 1e-13


@pytest.mark.parametrize("kind,m,N", [("circle", 1, 15), ("polydisk", 2, 8), ("ball", 2, 10), ("ball", 3, 6)])
def test_quadrature_provider_matches_exact(kind, m, N):
    model = DomainModel(kind, m)
    Gq = moment_matrix(quadrature(model, 2 * N + 2), m, N)
    Ge = moment_matrix(ExactMoments(model), m, N)
    assert np.abs(Gq - Ge).max() < 1e-12
    A = np.asarray(build_basis(model, N, provider="quadrature").coeffs)
    assert orthonormality_residual(A, Ge) < 1e-10


def test_interval_exact_residual():
    model = DomainModel("interval")
    G = moment_matrix(ExactMoments(model), 1, 12, exact=True)
    A = build_basis(model, 12).coeffs
    assert orthonormality_residual(A, G) < 1e-12


def test_truncate_is_prefix():
    basis = build_basis(DomainModel("ball", 2), 6)
    t = basis.truncate(3)
    assert t.dim == dim_poly(2, 3)
    z = np.array([[0.3 + 0.1j, -0.2j]])
    assert np.allclose(t.evaluate(z, log_scale=False)[0], basis.evaluate(z, log_scale=False)[0][:, : t.dim])


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_log_scaled_evaluation_consistent(x, y):
    basis = build_basis(DomainModel("polydisk", 2), 8)
    z = np.array([[x + 1j * y, 0.5 - 0.25j]])
    P, logs = basis.evaluate(z)
    Pu, _ = basis.evaluate(z, log_scale=False)
    assert np.allclose(P * np.exp(8 * logs[:, None]), Pu, rtol=1e-12, atol=1e-300)


def test_su_basis_norms():
    m, N = 2, 4
    b = su_basis(m, N)
    for j, J in enumerate(b.indices):
        norm2 = math.factorial(m) * math.factorial(N - J.total) * math.prod(math.factorial(e) for e in J.exponents)
        norm2 /= math.factorial(N + m)
        assert np.asarray(b.coeffs)[j, j] ** 2 * norm2 == pytest.approx(1, rel=1e-12)


def test_bm_circle_monomials_have_unit_sup():
    model = DomainModel("circle")
    basis = build_basis(model, 10)
    grid = sup_grid(model, 64)
    for k in range(11):
        c = np.zeros(k + 1, complex)
        c[k] = 1
        assert sup_norm_ratio(basis, c, grid) == pytest.approx(1, abs=1e-13)


def test_bm_interval_chebyshev_sup_is_sqrt2():
    model = DomainModel("interval")
    basis = build_basis(model, 7)
    c = np.zeros(8, complex)
    c[7] = 1
    assert sup_norm_ratio(basis, c, sup_grid(model, 401)) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_bm_empty_grid():
    basis = build_basis(DomainModel("circle"), 3)
    with pytest.raises(ValueError):
        bm_ratio(basis, np.zeros((0, 1), complex), 0.1, 5, 0)


def test_bm_ball_golden():
    gold = json.loads((GOLDEN / "bm_ball_m2.json").read_text())
    cfg = gold["config"]
    model = DomainModel(cfg["kind"], cfg["m"])
    rep = bm_ratio(build_basis(model, cfg["N"]), sup_grid(model, cfg["grid_resolution"]), gold["epsilon"],
                   cfg["trials"], cfg["seed"])
    got = rep.to_json()
    assert rep.estimated_C <= 5
    assert got["estimated_C"] == pytest.approx(gold["estimated_C"], rel=1e-12)
    for a, b in zip(got["ratios"], gold["ratios"]):
        assert a["degree"] == b["degree"]
        assert a["ratio"] == pytest.approx(b["ratio"], rel=1e-12)


def test_bm_discount_eventually_nonincreasing():
    model = DomainModel("ball", 2)
    rep = bm_ratio(build_basis(model, 20), sup_grid(model, 48), 0.2, 50, 11)
    r = [rep.ratios[n] for n in range(5, 21)]
    assert all(b <= a for a, b in zip(r, r[1:]))


def test_basis_csv(tmp_path):
    basis = build_basis(DomainModel("ball", 2), 2)
    p = tmp_path / "basis.csv"
    write_basis_csv(basis, p)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["row", "multiindex", "re_coeff", "im_coeff"]
    assert len(rows) == 1 + basis.dim
    assert rows[1] == ["0", "(0,0)", "1.0", "0.0"]
