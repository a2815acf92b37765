import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdfpos import spinors as sp
from bdfpos.errors import CutoffExceedsGrid, GridMismatch, InvalidParameter, RepresentationMismatch
from bdfpos.momentum import ModelParams, build_radial_grid, free_dispersion, solve_dressed_dispersion


def random_field(grid, rng, rep=sp.POSITION):
    n = grid.points
    data = rng.standard_normal((4, n, n, n)) + 1j * rng.standard_normal((4, n, n, n))
    return sp.SpinorField(grid, rep, data)


@pytest.fixture(scope="module")
def small_table():
    # cutoff inside the band of the 8-point grid, so the cutoff removes some modes
    return solve_dressed_dispersion(ModelParams(0.05, 10.0, 256))


@pytest.fixture
def grid():
    return sp.CartesianGrid(8, 4.0)


def cutoff_field(grid, table, rng):
    return sp.apply_cutoff(random_field(grid, rng), table.cutoff)


def test_grid_validation():
    with pytest.raises(InvalidParameter):
        sp.CartesianGrid(7, 1.0)
    with pytest.raises(InvalidParameter):
        sp.CartesianGrid(8, -1.0)
    g = sp.CartesianGrid(8, 4.0)
    assert g.axis()[0] == -2.0 and g.axis()[-1] == pytest.approx(1.5)
    assert g.max_axis_momentum == pytest.approx(2 * np.pi)


def test_round_trip_and_parseval(grid, rng):
    psi = random_field(grid, rng)
    k = sp.fourier_forward(psi)
    back = sp.fourier_inverse(k)
    assert np.max(np.abs(back.data - psi.data)) <= 1e-12
    assert sp.norm(k) == pytest.approx(sp.norm(psi), rel=1e-12)
    with pytest.raises(RepresentationMismatch):
        sp.fourier_inverse(psi)
    with pytest.raises(RepresentationMismatch):
        sp.fourier_forward(k)


def test_constant_field_is_dc_mode():
    g = sp.CartesianGrid(6, 3.0)
    c = 0.7 - 0.2j
    k = sp.fourier_forward(sp.from_components(g, [np.full((6, 6, 6), c)])).data[0]
    assert k[0, 0, 0] == pytest.approx((2 * np.pi) ** -1.5 * 27.0 * c, abs=1e-13)
    k[0, 0, 0] = 0
    assert np.max(np.abs(k)) <= 1e-13


def test_gaussian_fourier_pair():
    g = sp.CartesianGrid(64, 24.0)
    x, y, z = g.positions()
    f = np.exp(-(x * x + y * y + z * z) / 2)
    fk = sp.fourier_forward(sp.from_components(g, [f])).data[0]
    assert np.max(np.abs(fk - np.exp(-g.kmag() ** 2 / 2))) <= 1e-12


def test_charge_conjugation_examples():
    g = sp.CartesianGrid(4, 1.0)
    one = np.ones((4, 4, 4))
    c = sp.charge_conjugate(sp.from_components(g, [one, 0, 0, 0])).data
    assert np.allclose(c[3], 1) and np.allclose(c[:3], 0)
    c = sp.charge_conjugate(sp.from_components(g, [0, 1j * one, 0, 0])).data
    assert np.allclose(c[2], 1j) and np.allclose(c[[0, 1, 3]], 0)


def test_charge_conjugation_properties(grid, rng):
    psi, phi = random_field(grid, rng), random_field(grid, rng)
    C = sp.charge_conjugate
    assert np.max(np.abs(C(C(psi)).data - psi.data)) <= 1e-14
    a, b = 0.3 + 1.1j, -0.7 + 0.4j
    lhs = C(a * psi + b * phi).data
    rhs = (np.conj(a) * C(psi) + np.conj(b) * C(phi)).data
    assert np.max(np.abs(lhs - rhs)) <= 1e-14
    assert np.max(np.abs(sp.density(C(psi)).data - sp.density(psi).data)) <= 1e-13
    # the momentum-space action agrees with conjugating in position space
    ck = C(psi.momentum())
    assert np.max(np.abs(ck.data - C(psi).momentum().data)) <= 1e-12


def test_cutoff(grid, rng):
    psi = random_field(grid, rng)
    full = sp.apply_cutoff(psi, grid.max_momentum)
    assert np.max(np.abs(full.data - psi.data)) <= 1e-12
    dc = sp.apply_cutoff(psi, 1e-9).momentum().data
    assert np.max(np.abs(dc[:, 1:, :, :])) <= 1e-12 and np.max(np.abs(dc[:, 0, 1:, :])) <= 1e-12
    assert np.max(np.abs(dc[:, 0, 0, 1:])) <= 1e-12
    cut = sp.apply_cutoff(psi, 5.0)
    twice = sp.apply_cutoff(cut, 5.0)
    assert sp.norm(cut) <= sp.norm(psi)
    assert np.max(np.abs(twice.data - cut.data)) <= 1e-13
    phi = random_field(grid, rng)
    lhs = sp.inner(phi, cut)
    rhs = sp.inner(sp.apply_cutoff(phi, 5.0), psi)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    with pytest.raises(CutoffExceedsGrid):
        sp.apply_cutoff(psi, 2 * grid.max_momentum)
    assert sp.apply_cutoff(psi, 2 * grid.max_momentum, strict=False).data.shape == psi.data.shape


def test_free_projector_rest_frame(grid, small_table):
    one = np.ones((8, 8, 8))
    psi = sp.from_components(grid, [one])
    out = sp.apply_free_projector(psi, small_table, "+")
    assert np.max(np.abs(out.data - psi.data)) <= 1e-12
    low = sp.from_components(grid, [0, 0, one])
    assert np.max(np.abs(sp.apply_free_projector(low, small_table, "+").data)) <= 1e-12


def test_projector_algebra(grid, small_table, rng):
    psi = cutoff_field(grid, small_table, rng)
    Pp = lambda f: sp.apply_free_projector(f, small_table, "+")
    Pm = lambda f: sp.apply_free_projector(f, small_table, "-")
    p, m = Pp(psi), Pm(psi)
    scale = sp.norm(psi) ** 2
    assert abs(sp.inner(p, m)) <= 1e-12 * scale
    assert np.max(np.abs((p + m).data - psi.data)) <= 1e-12 * np.abs(psi.data).max()
    assert np.max(np.abs(Pp(p).data - p.data)) <= 1e-12 * np.abs(psi.data).max()
    assert np.max(np.abs(Pm(p).data)) <= 1e-12 * np.abs(psi.data).max()
    C = sp.charge_conjugate
    assert np.max(np.abs(C(Pp(psi)).data - Pm(C(psi)).data)) <= 1e-12 * np.abs(psi.data).max()
    ad = lambda f: sp.apply_abs_D0(f, small_table)
    assert np.max(np.abs(ad(Pp(psi)).data - Pp(ad(psi)).data)) <= 1e-11 * np.abs(ad(psi).data).max()


def test_D0_squares_to_e2(grid, small_table, rng):
    psi = cutoff_field(grid, small_table, rng)
    twice = sp.apply_D0(sp.apply_D0(psi, small_table), small_table)
    e2 = sp.apply_abs_D0(sp.apply_abs_D0(psi, small_table), small_table)
    assert np.max(np.abs(twice.data - e2.data)) <= 1e-11 * np.abs(e2.data).max()


def test_abs_D0_plane_wave():
    table = free_dispersion(build_radial_grid(512, 10.0))
    g = sp.CartesianGrid(8, 2 * np.pi)
    x, y, z = g.positions()
    wave = np.exp(2j * x) * np.ones_like(y * z)
    psi = sp.from_components(g, [wave])
    out = sp.apply_abs_D0(psi, table).position()
    assert np.max(np.abs(out.data[0] - np.sqrt(5) * wave)) <= 1e-9


def test_abs_D0_bounds(grid, small_table, rng):
    psi, phi = cutoff_field(grid, small_table, rng), cutoff_field(grid, small_table, rng)
    ad = lambda f: sp.apply_abs_D0(f, small_table)
    assert sp.inner(psi, ad(psi)).real >= small_table.mass * sp.norm(psi) ** 2
    a, b = sp.inner(phi, ad(psi)), np.conj(sp.inner(psi, ad(phi)))
    assert abs(a - b) <= 1e-12 * abs(a)


def gaussian_density(g, s, shift=(0.0, 0.0, 0.0)):
    x, y, z = g.positions()
    r2 = (x - shift[0]) ** 2 + (y - shift[1]) ** 2 + (z - shift[2]) ** 2
    return sp.DensityField(g, (2 * np.pi * s * s) ** -1.5 * np.exp(-r2 / (2 * s * s)))


def test_coulomb_gaussian_free():
    g = sp.CartesianGrid(48, 12.0)
    rho = gaussian_density(g, 1.0)
    exact = 1 / np.sqrt(np.pi)
    assert sp.coulomb_energy(rho, rho, kernel="free").real == pytest.approx(exact, rel=2e-5)


def test_coulomb_gaussian_periodic():
    """The k = 0-free periodic form is the jellium energy of the box.

    Its offset from the isolated value is the cubic Madelung term plus the
    second moment of rho*rho: -xi/L + 4 pi sigma^2 / L^3.
    """
    xi = sp.CUBIC_SELF_TERM
    for L in (10.0, 14.0, 20.0):
        g = sp.CartesianGrid(48, L)
        rho = gaussian_density(g, 1.0)
        val = sp.coulomb_energy(rho, rho).real
        expected = 1 / np.sqrt(np.pi) - xi / L + 4 * np.pi / L**3
        assert val == pytest.approx(expected, abs=1e-6)


def test_coulomb_trivial_and_positive(grid, rng):
    zero = sp.DensityField(grid, np.zeros((8, 8, 8)))
    rho = sp.DensityField(grid, rng.standard_normal((8, 8, 8)))
    for kernel in ("periodic", "free"):
        assert sp.coulomb_energy(zero, zero, kernel) == 0
        assert sp.coulomb_energy(rho, rho, kernel).real >= 0
    with pytest.raises(InvalidParameter):
        sp.coulomb_energy(rho, rho, "yukawa")


def test_coulomb_translation_invariance(rng):
    g = sp.CartesianGrid(16, 8.0)
    f = rng.standard_normal((16, 16, 16))
    per = sp.coulomb_energy(f, sp.DensityField(g, f)).real
    rolled = np.roll(f, (3, -5, 2), axis=(0, 1, 2))
    assert sp.coulomb_energy(rolled, sp.DensityField(g, rolled)).real == pytest.approx(per, rel=1e-12)
    # free kernel: shift a compactly supported density without wrapping
    h = np.zeros((16, 16, 16))
    h[2:10, 3:9, 1:12] = rng.standard_normal((8, 6, 11))
    free = sp.coulomb_energy(h, sp.DensityField(g, h), "free").real
    moved = np.roll(h, (4, 5, 2), axis=(0, 1, 2))
    assert sp.coulomb_energy(moved, sp.DensityField(g, moved), "free").real == pytest.approx(free, rel=1e-12)


def test_pair_density(grid, rng):
    one = np.ones((8, 8, 8))
    a = sp.from_components(grid, [rng.standard_normal((8, 8, 8)) * one])
    b = sp.from_components(grid, [0, 0, 0, rng.standard_normal((8, 8, 8))])
    assert np.all(sp.pair_density(a, b).data == 0)
    psi = random_field(grid, rng)
    psi = (1 / sp.norm(psi)) * psi
    assert sp.pair_density(psi, psi).integral() == pytest.approx(1.0, abs=1e-12)
    phi = random_field(grid, rng)
    assert abs(sp.pair_density(psi, phi).integral() - sp.inner(psi, phi)) <= 1e-12 * sp.norm(phi)
    with pytest.raises(GridMismatch):
        sp.pair_density(psi, random_field(sp.CartesianGrid(4, 4.0), rng))
    with pytest.raises(RepresentationMismatch):
        sp.pair_density(psi.momentum(), psi)


def test_field_dump_round_trip(tmp_path, grid, rng):
    for rep in (sp.POSITION, sp.MOMENTUM):
        psi = random_field(grid, rng, rep)
        path = sp.save_field(psi, tmp_path / f"{rep}.bin")
        raw = path.read_bytes()
        assert raw[:8] == b"BDFSPNR1"
        assert int.from_bytes(raw[8:16], "little") == 8
        assert len(raw) == 8 + 8 + 8 + 1 + 4 * 8**3 * 16
        back = sp.load_field(path)
        assert back.representation == rep and back.grid == grid
        assert np.array_equal(back.data, psi.data)
    (tmp_path / "bad.bin").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(InvalidParameter):
        sp.load_field(tmp_path / "bad.bin")


@settings(max_examples=20, deadline=None)
@given(n=st.sampled_from([4, 6, 8]), L=st.floats(0.5, 50.0), seed=st.integers(0, 2**31))
def test_parseval_property(n, L, seed):
    psi = random_field(sp.CartesianGrid(n, L), np.random.default_rng(seed))
    assert sp.norm(psi.momentum()) == pytest.approx(sp.norm(psi), rel=1e-12)
    assert np.max(np.abs(psi.momentum().position().data - psi.data)) <= 1e-12 * np.abs(psi.data).max()
