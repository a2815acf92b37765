import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdfpos.errors import InvalidParameter, NoConvergence, UnnormalizedInput
from bdfpos.pekar import (
    RadialProfile,
    el_residual,
    gaussian_profile,
    hartree_potential,
    load_profile,
    minimize_pekar,
    pekar_energy,
    pekar_functional,
    pekar_gradient,
    radial_profile,
    save_profile,
)

GAUSS_BOUND = -1 / (3 * np.pi)


def test_gaussian_energies():
    e = pekar_energy(gaussian_profile(1.0))
    assert e["T"] == pytest.approx(1.5, rel=1e-4)
    assert e["V"] == pytest.approx(np.sqrt(2 / np.pi), rel=1e-4)
    assert e["E"] == pytest.approx(1.5 - np.sqrt(2 / np.pi), rel=1e-4)


def test_best_gaussian():
    e = pekar_energy(gaussian_profile(3 * np.sqrt(np.pi / 2)))
    assert e["E"] == pytest.approx(GAUSS_BOUND, abs=1e-6)
    assert e["E"] == pytest.approx(e["T"] - e["V"], abs=0)


def test_unnormalized_rejected():
    prof = gaussian_profile(1.0)
    with pytest.raises(UnnormalizedInput):
        pekar_energy(prof.with_values(1.01 * prof.values))


def _scaled(prof, sigma):
    """phi_sigma(r) = sigma^{3/2} phi(sigma r) on the grid scaled by 1/sigma."""
    return RadialProfile(prof.radii / sigma, sigma**1.5 * prof.values, prof.step / sigma, prof.r_max / sigma)


@settings(max_examples=25, deadline=None)
@given(sigma=st.floats(0.3, 4.0), seed=st.integers(0, 2**31))
def test_scaling_law_exact(sigma, seed):
    rng = np.random.default_rng(seed)
    prof = radial_profile(20.0, 400)
    c = rng.uniform(0.5, 2.0, size=3)
    w = rng.uniform(0.5, 3.0, size=3)
    vals = sum(ci * np.exp(-((prof.radii / wi) ** 2)) for ci, wi in zip(c, w))
    prof = prof.with_values(vals)
    prof = prof.with_values(vals / np.sqrt(prof.norm2()))
    a, b = pekar_energy(prof), pekar_energy(_scaled(prof, sigma))
    assert b["T"] == pytest.approx(sigma**2 * a["T"], rel=1e-12)
    assert b["V"] == pytest.approx(sigma * a["V"], rel=1e-12)


def test_scaling_law_by_resampling():
    prof = gaussian_profile(2.0)
    base = pekar_energy(prof)
    sigma = 1.7
    res = prof.with_values(sigma**1.5 * prof(sigma * prof.radii))
    e = pekar_energy(res.with_values(res.values / np.sqrt(res.norm2())))
    assert e["T"] == pytest.approx(sigma**2 * base["T"], rel=1e-4)
    assert e["V"] == pytest.approx(sigma * base["V"], rel=1e-4)


def test_hartree_point_charge():
    prof = radial_profile(40.0, 4000)
    rho = np.zeros_like(prof.radii)
    rho[0] = 1.0 / prof.weights[0]
    W = hartree_potential(prof.radii, rho, np.full_like(prof.radii, prof.step))
    assert W[-1] == pytest.approx(1 / prof.radii[-1], rel=1e-12)


def test_hartree_uniform_ball():
    a = 2.0
    r = np.linspace(1e-4, 10.0, 200001)
    rho = np.where(r <= a, 3 / (4 * np.pi * a**3), 0.0)
    W = hartree_potential(r, rho)
    assert W[0] == pytest.approx(3 / (2 * a), rel=1e-3)
    assert W[-1] == pytest.approx(1 / r[-1], rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_hartree_monotone(seed):
    rng = np.random.default_rng(seed)
    r = np.linspace(0.05, 10, 200)
    W = hartree_potential(r, rng.random(200))
    assert np.all(np.diff(W) <= 1e-12)


def test_gradient_matches_finite_differences(rng):
    prof = gaussian_profile(2.5)
    g = pekar_gradient(prof)
    v = rng.standard_normal(prof.radii.size) * np.exp(-prof.radii / 5)
    h = 1e-4
    up = prof.with_values((prof.u + h * v) / prof.radii)
    dn = prof.with_values((prof.u - h * v) / prof.radii)
    fd = (pekar_functional(up) - pekar_functional(dn)) / (2 * h)
    assert np.dot(g, v) == pytest.approx(fd, rel=1e-6)


def test_minimizer(pekar_result):
    r = pekar_result
    assert r.energy <= GAUSS_BOUND
    assert r.energy == r.kinetic - r.potential
    assert r.potential > 0
    assert r.virial_defect <= 1e-3
    assert r.residual <= 1e-8
    assert el_residual(r.profile)[1] <= 1e-8
    hist = np.array(r.energy_history)
    assert np.all(np.diff(hist) <= 1e-15 * abs(hist[0]))
    vals = r.profile.values
    assert np.all(vals > 0)
    assert np.all(np.diff(vals) <= 0)
    assert vals[-1] < 1e-8


def test_frozen_minimizer_energy(pekar_result):
    # default grid (h = 0.01); Richardson with n = 8000 puts the continuum
    # value at -0.1085128
    assert pekar_result.energy == pytest.approx(-0.1085131373, abs=1e-9)
    assert pekar_result.mu == pytest.approx(-0.325540, abs=1e-5)


def test_initializations_agree(pekar_result):
    for width in (2.0, 5.0):
        assert minimize_pekar(init_width=width).energy == pytest.approx(pekar_result.energy, abs=1e-6)


def test_minimizer_errors():
    with pytest.raises(InvalidParameter):
        minimize_pekar(init_width=0.0)
    with pytest.raises(NoConvergence) as info:
        minimize_pekar(max_iterations=2)
    assert len(info.value.history) == 3


def test_profile_csv_round_trip(tmp_path, pekar_result):
    path = save_profile(pekar_result, tmp_path / "p.csv")
    assert path.read_text().startswith("# E=")
    prof, head = load_profile(path)
    assert head["E"] == pekar_result.energy and head["mu"] == pekar_result.mu
    assert np.array_equal(prof.values, pekar_result.profile.values)
    assert prof.step == pytest.approx(pekar_result.profile.step, rel=1e-15)
