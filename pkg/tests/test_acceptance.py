"""Acceptance criteria, each run at its stated tolerance and runtime budget."""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from equizero import runner
from equizero.domain_models import DomainModel, RegionSpec, equilibrium_mass, quadrature
from equizero.orthopoly import ExactMoments, build_basis, moment_matrix, orthonormality_residual
from equizero.sphere_scaling import (
    F_m,
    SeriesFunction,
    g_N,
    lebesgue_density,
    scaling_profile,
)
from equizero.szego import KernelField, convergence_table, default_grid, field_for, sandwich_check
from equizero.zero_ensembles import (
    GaussianEnsemble,
    empirical_zero_mass,
    expected_density,
    radial_expected_mass,
    su_flatness,
)
from tests.conftest import random_points, record_acceptance

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _check(number, ok, detail, elapsed, budget):
    in_time = budget is None or elapsed < budget
    record_acceptance(number, ok and in_time, f"{detail}; {elapsed:.2f}s" + (f" (budget {budget}s)" if budget else ""))
    assert ok, detail
    assert in_time, f"runtime {elapsed:.2f}s exceeds {budget}s"


def test_01_orthonormality():
    exact_cases = [("circle", 1), ("interval", 1)]
    exact_cases += [(k, m) for k in ("polydisk", "ball") for m in (1, 2, 3)]
    quad_cases = [("circle", 1), ("interval", 1), ("polydisk", 1), ("ball", 1)]
    worst, where = 0.0, None
    with Timer() as t:
        for N in (1, 5, 10, 20):
            for kind, m in exact_cases:
                model = DomainModel(kind, m)
                G = moment_matrix(ExactMoments(model), m, N, exact=(kind == "interval"))
                r = orthonormality_residual(build_basis(model, N).coeffs, G)
                if r > worst:
                    worst, where = r, f"{kind} m={m} N={N} exact"
            for kind, m in quad_cases:
                model = DomainModel(kind, m)
                G = moment_matrix(ExactMoments(model), m, N, exact=(kind == "interval"))
                r = orthonormality_residual(build_basis(model, N, provider="quadrature").coeffs, G)
                if r > worst:
                    worst, where = r, f"{kind} m={m} N={N} quadrature"
    _check(1, worst < 1e-8, f"orthonormality max residual {worst:.2e} at {where} (< 1e-8)", t.elapsed, 10)


def test_02_sphere_moments():
    m, N = 2, 10
    with Timer() as t:
        model = DomainModel("ball", m)
        Ge = moment_matrix(ExactMoments(model), m, N)
        Gq = moment_matrix(quadrature(model, 2 * N + 2), m, N)
        d = np.diag(Ge).real
        diag_rel = float(np.max(np.abs(np.diag(Gq) - d) / d))
        off = Gq - np.diag(np.diag(Gq))
        off_rel = float(np.max(np.abs(off) / np.sqrt(np.outer(d, d))))
    worst = max(diag_rel, off_rel)
    _check(2, worst < 1e-9, f"sphere moments m=2 |J|<=10 max rel err {worst:.2e} (< 1e-9)", t.elapsed, 5)


def test_03_szego_rate():
    with Timer() as t:
        circle = DomainModel("circle")
        theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        grid = np.concatenate([r * np.exp(1j * theta) for r in (1.5, 2.0, 3.0)])
        tab = convergence_table(circle, [50, 100], grid)
        ratio = tab.sup_dev_logkernel[1] / tab.sup_dev_logkernel[0]
        ball = DomainModel("ball", 2)
        btab = convergence_table(ball, [10, 20, 40], default_grid(ball, 500, seed=3))
        b = btab.sup_dev_logkernel
    ok = 0.4 <= ratio <= 0.6 and b[0] > b[1] > b[2]
    detail = f"circle dev ratio N=100/N=50 {ratio:.4f} in [0.4, 0.6]; ball m=2 devs {b[0]:.4f} > {b[1]:.4f} > {b[2]:.4f}"
    _check(3, ok, detail, t.elapsed, 10)


def test_04_sandwich_lower_bound():
    rng = np.random.default_rng(4)
    domains = [("circle", 1), ("polydisk", 2), ("polydisk", 3), ("ball", 1), ("ball", 2), ("ball", 3), ("interval", 1)]
    failures, total = 0, 0
    with Timer() as t:
        for kind, m in domains:
            model = DomainModel(kind, m)
            if kind == "interval":
                # closed-form extremal function on the real axis only
                pts = rng.uniform(-3, 3, 1000).reshape(-1, 1).astype(complex)
            else:
                pts = random_points(rng, 1000, m, 3.0)
            for N in (1, 2, 5, 10, 20):
                res = sandwich_check(field_for(model, N), model, pts, rtol=1e-10)
                failures += sum(not r.lower_ok for r in res)
                total += len(res)
    _check(4, failures == 0, f"sandwich lower bound failures {failures}/{total} (tolerance 1e-10)", t.elapsed, 10)


def test_05_su_flatness():
    rng = np.random.default_rng(5)
    worst = 0.0
    with Timer() as t:
        for m in (1, 2):
            pts = random_points(rng, 100, m, 3.0)
            for N in (5, 10):
                worst = max(worst, float(np.abs(su_flatness(m, N, pts) - 1).max()))
    _check(5, worst < 1e-5, f"SU(m+1) flatness max |ratio - 1| {worst:.2e} (< 1e-5)", t.elapsed, 30)


def test_06_empirical_zeros():
    with Timer() as t:
        circ = GaussianEnsemble.for_domain(DomainModel("circle"), 200, seed=6)
        ann = empirical_zero_mass(circ, RegionSpec("annulus", r_lo=0.9, r_hi=1.1), 200)
        sec = empirical_zero_mass(circ, RegionSpec("sector", theta_lo=0.0, theta_hi=math.pi / 2), 200)
        model = DomainModel("interval")
        sub = RegionSpec("subinterval", a=-0.5, b=0.5)
        iv = empirical_zero_mass(GaussianEnsemble.for_domain(model, 150, seed=6), sub, 200)
    third = equilibrium_mass(model, sub)
    ok_a = ann.mean_fraction > 0.85
    ok_s = abs(sec.mean_fraction - 0.25) <= 4 * sec.std_error
    ok_i = abs(iv.mean_fraction - third) <= 4 * iv.std_error
    detail = (
        f"annulus {ann.mean_fraction:.4f} > 0.85; sector {sec.mean_fraction:.5f} vs 0.25 "
        f"({abs(sec.mean_fraction - 0.25) / sec.std_error:.2f} SE); interval {iv.mean_fraction:.5f} vs 1/3 "
        f"({abs(iv.mean_fraction - third) / iv.std_error:.2f} SE)"
    )
    _check(6, ok_a and ok_s and ok_i, detail, t.elapsed, 120)


def test_07_total_mass():
    errs = {}
    with Timer() as t:
        for N in (50, 100):
            mass = radial_expected_mass(field_for(DomainModel("circle"), N), 0.0, 10.0)
            errs[N] = abs(mass / N - 1)
    ok = all(e < 5e-3 for e in errs.values())
    _check(7, ok, "total mass rel err " + ", ".join(f"N={N}: {e:.2e}" for N, e in errs.items()) + " (< 0.5%)",
           t.elapsed, 10)


def test_08_sphere_scaling():
    rng = np.random.default_rng(8)
    ratios, worst = {}, 0.0
    with Timer() as t:
        for m in (1, 2):
            ratios[m] = scaling_profile(m, 200).max_err / scaling_profile(m, 100).max_err
        for m in (1, 2):
            N = 10
            field = field_for(DomainModel("ball", m), N)
            pts = random_points(rng, 20, m, 2.0)
            fd = np.atleast_1d(expected_density(field, pts, m))
            exact = lebesgue_density(pts, N, m)
            worst = max(worst, float(np.max(np.abs(fd - exact) / exact)))
    ok = all(0.3 <= r <= 0.7 for r in ratios.values()) and worst < 1e-4
    detail = (
        "scaling err ratio N=200/N=100 " + ", ".join(f"m={m}: {r:.4f}" for m, r in ratios.items())
        + f" in [0.3, 0.7]; exact D_N vs FD Hessian max rel err {worst:.2e} (< 1e-4)"
    )
    _check(8, ok, detail, t.elapsed, 30)


DETERMINISM_CONFIGS = [
    {"experiment": "converge", "N": [10, 20], "domain": {"kind": "ball", "m": 2}, "grid": {"points": 50}},
    {"experiment": "sandwich", "N": [3, 6], "domain": {"kind": "polydisk", "m": 2}, "grid": {"points": 50}},
    {"experiment": "zeros", "N": 60, "trials": 24, "domain": {"kind": "circle"},
     "region": {"kind": "annulus", "r_lo": 0.9, "r_hi": 1.1}},
    {"experiment": "zeros", "N": 60, "trials": 24, "domain": {"kind": "interval"},
     "region": {"kind": "subinterval", "a": -0.5, "b": 0.5}},
    {"experiment": "density", "N": [20, 40], "k": 1, "domain": {"kind": "circle"},
     "grid": {"kind": "radii", "radii": [0.5, 1.0, 2.0], "points": 4},
     "regions": [{"kind": "annulus", "r_lo": 0.9, "r_hi": 1.1}]},
    {"experiment": "scaling", "m": 2, "N": [50, 100]},
    {"experiment": "bm", "N": 8, "trials": 10, "domain": {"kind": "ball", "m": 2}, "grid": {"resolution": 16}},
    {"experiment": "su-flat", "m": 2, "N": 5, "grid": {"points": 20}},
]


def test_09_determinism(tmp_path, monkeypatch):
    mismatches, compared = [], 0
    with Timer() as t:
        for i, base in enumerate(DETERMINISM_CONFIGS):
            digests = []
            for threads in ("1", "4"):
                monkeypatch.setenv("EQUIZERO_THREADS", threads)
                out = tmp_path / f"{i}_{threads}"
                runner.run({**base, "seed": 17, "output": str(out)})
                digests.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
            compared += len(digests[0])
            if digests[0] != digests[1] or not digests[0]:
                mismatches.append(base["experiment"])
    monkeypatch.delenv("EQUIZERO_THREADS")
    ok = not mismatches
    _check(9, ok, f"byte-identical CSVs across thread counts: {compared} files, mismatches {mismatches}", t.elapsed, None)


def test_10_derivatives():
    rng = np.random.default_rng(10)
    series = SeriesFunction()
    worst_F, worst_g = 0.0, 0.0
    with Timer() as t:
        for m in (1, 2, 3):
            h = 1e-3
            for u in rng.uniform(-5, 5, 50):
                F, F1, F2 = series.F(m, u)
                fp, fm = F_m(u + h, m), F_m(u - h, m)
                fp2, fm2 = F_m(u + 2 * h, m), F_m(u - 2 * h, m)
                # fourth-order central differences
                d1 = (-fp2 + 8 * fp - 8 * fm + fm2) / (12 * h)
                d2 = (-fp2 + 16 * fp - 30 * F + 16 * fm - fm2) / (12 * h * h)
                worst_F = max(worst_F, abs(d1 - F1) / abs(F1), abs(d2 - F2) / abs(F2))
        for m, N in ((1, 10), (2, 10), (3, 6)):
            for x in rng.uniform(0.1, 2.0, 50):
                g, g1, g2 = g_N(x, N, m, derivatives=2)
                h = 1e-4 * x
                gp, gm = g_N(x + h, N, m), g_N(x - h, N, m)
                gp2, gm2 = g_N(x + 2 * h, N, m), g_N(x - 2 * h, N, m)
                d1 = (-gp2 + 8 * gp - 8 * gm + gm2) / (12 * h)
                d2 = (-gp2 + 16 * gp - 30 * g + 16 * gm - gm2) / (12 * h * h)
                worst_g = max(worst_g, abs(d1 - g1) / abs(g1), abs(d2 - g2) / abs(g2))
    ok = worst_F < 1e-6 and worst_g < 1e-6
    _check(10, ok, f"derivatives vs central differences: F_m max rel {worst_F:.2e}, g_N max rel {worst_g:.2e} (< 1e-6)",
           t.elapsed, 5)
