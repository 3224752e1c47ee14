import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from equizero.domain_models import (
    DomainModel,
    RegionSpec,
    equilibrium_mass,
    green_function,
    min_resolution,
    quadrature,
    sup_grid,
)
from equizero.errors import InsufficientResolutionError, RegionMismatchError, UnimplementedDomainError


def test_aliases_and_validation():
    assert DomainModel("torus", 2).kind == "polydisk"
    assert DomainModel("sphere", 3).kind == "ball"
    with pytest.raises(UnimplementedDomainError):
        DomainModel("simplex", 2)
    with pytest.raises(ValueError):
        DomainModel("interval", 2)
    with pytest.raises(ValueError):
        DomainModel("circle", 2)
    assert DomainModel.from_config({"kind": "ball", "m": 2}) == DomainModel("ball", 2)


def test_green_polydisk():
    assert green_function(DomainModel("polydisk", 2), [2, 0.5]) == pytest.approx(math.log(2), abs=1e-15)


def test_green_ball_interior():
    assert green_function(DomainModel("ball", 2), [0.3, 0.4]) == 0.0


def test_green_interval_joukowski():
    assert green_function(DomainModel("interval"), 2.0) == pytest.approx(math.log(2 + math.sqrt(3)), rel=1e-14)


def test_green_interval_on_segment_is_zero():
    x = np.linspace(-1, 1, 21)
    assert np.all(np.abs(green_function(DomainModel("interval"), x)) < 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
def test_green_interval_symmetric_and_nonnegative(z):
    model = DomainModel("interval")
    v = green_function(model, z)
    assert v >= 0
    assert green_function(model, np.conj(z)) == pytest.approx(v, abs=1e-12)
    assert green_function(model, -z) == pytest.approx(v, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([("polydisk", 2), ("ball", 2), ("ball", 3), ("circle", 1)]),
    st.lists(st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False), min_size=3, max_size=3),
    st.floats(0.0, 1.0),
)
def test_green_homogeneity(kind_m, zs, t):
    # V_K(lambda z) = V_K(z) + log|lambda| once both points lie outside K
    model = DomainModel(*kind_m)
    z = np.array(zs[: model.m])
    lam = 1 + 3 * t
    v = green_function(model, z)
    if v > 0:
        assert green_function(model, lam * z) == pytest.approx(v + math.log(lam), abs=1e-12)


def test_equilibrium_examples():
    assert equilibrium_mass(
        DomainModel("polydisk", 2), RegionSpec("sector", theta_lo=0, theta_hi=math.pi, coordinate=0)
    ) == pytest.approx(0.5)
    assert equilibrium_mass(DomainModel("ball", 2), RegionSpec("hemisphere", axis=0)) == 0.5
    third = equilibrium_mass(DomainModel("interval"), RegionSpec("subinterval", a=-0.5, b=0.5))
    assert third == pytest.approx(1 / 3, abs=1e-15)
    assert equilibrium_mass(DomainModel("interval"), RegionSpec("annulus", r_lo=0, r_hi=0.5)) == pytest.approx(1 / 3)


def test_equilibrium_arcsine_vs_integral():
    dens = lambda x: 1 / (math.pi * math.sqrt(1 - x * x))
    for a, b in [(-0.9, 0.2), (0.1, 0.7), (-1, 1)]:
        ref, _ = integrate.quad(dens, a, b)
        got = equilibrium_mass(DomainModel("interval"), RegionSpec("subinterval", a=a, b=b))
        assert got == pytest.approx(ref, abs=1e-9)


def test_equilibrium_mismatch():
    with pytest.raises(RegionMismatchError):
        equilibrium_mass(DomainModel("circle"), RegionSpec("subinterval", a=0, b=1))
    with pytest.raises(RegionMismatchError):
        equilibrium_mass(DomainModel("interval"), RegionSpec("sector", theta_lo=0, theta_hi=1))


def test_region_contains():
    circle = DomainModel("circle")
    ann = RegionSpec("annulus", r_lo=0.9, r_hi=1.1)
    assert list(ann.contains(np.array([1.0, 0.5, 1.05j]), circle)) == [True, False, True]
    sec = RegionSpec("sector", theta_lo=0, theta_hi=math.pi / 2)
    assert list(sec.contains(np.array([1 + 1j, -1 + 1j, 1 - 1j]), circle)) == [True, False, False]
    assert RegionSpec("plane").contains(np.array([1e9, 0]), circle).all()


def test_region_roundtrip():
    r = RegionSpec("sector", theta_lo=0.1, theta_hi=1.2, coordinate=1)
    assert RegionSpec.from_config(r.to_config()) == r


def test_quadrature_circle_roots_of_unity():
    q = quadrature(DomainModel("circle"), 8)
    assert len(q) == 8
    assert np.allclose(q.weights, 1 / 8)
    assert abs(q.integrate(q.nodes[:, 0])) < 1e-15


def test_quadrature_ball_moment():
    q = quadrature(DomainModel("ball", 2), 8)
    assert q.integrate(np.abs(q.nodes[:, 0]) ** 2).real == pytest.approx(0.5, abs=1e-10)


def test_quadrature_interval_second_moment():
    q = quadrature(DomainModel("interval"), 64)
    ref, _ = integrate.quad(lambda t: math.cos(t) ** 2 / math.pi, 0, math.pi)
    assert q.integrate(q.nodes[:, 0] ** 2).real == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(0.5)


@pytest.mark.parametrize("kind,m", [("circle", 1), ("polydisk", 2), ("ball", 2), ("ball", 3), ("interval", 1)])
def test_quadrature_weights_sum_to_one(kind, m):
    q = quadrature(DomainModel(kind, m), 12)
    assert q.weights.sum() == pytest.approx(1, abs=1e-13)
    assert np.all(q.weights > 0)


def test_insufficient_resolution_carries_minimum():
    model = DomainModel("circle")
    q = quadrature(model, 8)
    with pytest.raises(InsufficientResolutionError) as ei:
        q.require_degree(20)
    assert ei.value.min_resolution == min_resolution(model, 20)
    q.require_degree(7)


def test_sup_grid_interval_on_segment():
    g = sup_grid(DomainModel("interval"), 33)
    assert np.all(np.abs(g.imag) == 0)
    assert g.real.min() == -1 and g.real.max() == 1
