import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_frame_energy, brute_inverse, brute_transform
from wannierframes.errors import CertificateRejected, GridTooCoarseError
from wannierframes.frames import FrameCertificate, parseval_sections
from wannierframes.gauge import BlochSectionSet
from wannierframes.lattice import kgrid, square_lattice
from wannierframes.models import builtin
from wannierframes.spectral import SpectralWindow, projector_field
from wannierframes.wannier import (
    LatticeFunction,
    bloch_transform,
    coefficients_table,
    decay_profile,
    default_fit_range,
    directional_shell_norms,
    fit_decay,
    frame_coefficients,
    inverse_transform,
    max_torus_distance,
    parseval_identity_check,
    real_space_projection,
    shell_norms,
    shells_table,
    shift_orthonormality_check,
    synthesize,
)


def box(*sizes):
    return kgrid(square_lattice(len(sizes)), sizes)


def random_function(grid, n, rng):
    shape = grid.shape + (n,)
    return LatticeFunction(grid, rng.normal(size=shape) + 1j * rng.normal(size=shape))


def qwz_frame(n, method="transport", route="auto"):
    m = builtin("qwz", u=1)
    p = projector_field(m, kgrid(m.lattice, (n, n)), SpectralWindow.bands(1))
    s, cert = parseval_sections(p, route=route, seed=0, method=method)
    return p, s, cert


def test_delta_transforms_to_constant():
    g = box(6, 4)
    vals = np.zeros((6, 4, 2), complex)
    vals[0, 0, 1] = 1
    fhat = bloch_transform(LatticeFunction(g, vals))
    assert np.allclose(fhat[..., 1], 1) and np.allclose(fhat[..., 0], 0)


def test_shift_multiplies_by_phase():
    g = box(8, 5)
    rng = np.random.default_rng(0)
    f = random_function(g, 2, rng)
    gamma = (3, -2)
    shifted = bloch_transform(f.shifted(gamma))
    phase = np.exp(-1j * (g.angles[..., 0] * gamma[0] + g.angles[..., 1] * gamma[1]))
    assert np.allclose(shifted, phase[..., None] * bloch_transform(f), atol=1e-12)


@pytest.mark.parametrize("sizes", [(7,), (6, 5), (4, 3, 5)])
def test_transforms_match_explicit_sums(sizes):
    g = box(*sizes)
    rng = np.random.default_rng(len(sizes))
    f = random_function(g, 3, rng)
    fhat = bloch_transform(f)
    assert np.abs(fhat - brute_transform(f.values, sizes)).max() <= 1e-11
    back = inverse_transform(g, fhat)
    assert np.abs(back.values - brute_inverse(fhat, sizes)).max() <= 1e-12
    assert np.abs(back.values - f.values).max() <= 1e-12


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.integers(2, 7), min_size=1, max_size=3),
    st.integers(1, 3),
    st.integers(0, 2**32 - 1),
)
def test_plancherel_and_round_trip(sizes, n, seed):
    g = box(*sizes)
    f = random_function(g, n, np.random.default_rng(seed))
    fhat = bloch_transform(f)
    norm_k = (np.abs(fhat) ** 2).sum() / g.n_points
    assert abs(norm_k - f.norm_squared()) <= 1e-12 * f.norm_squared()
    assert np.abs(inverse_transform(g, fhat).values - f.values).max() <= 1e-12


def test_inverse_transform_rejects_wrong_grid():
    with pytest.raises(ValueError):
        inverse_transform(box(4, 4), np.zeros((4, 5, 2)))


def test_shell_norms_geometric_profile():
    n, rho = 64, 0.5
    g = box(n, n)
    idx = np.arange(n)
    d = np.minimum(idx, n - idx)
    dist = np.maximum(d[:, None], d[None, :])
    f = LatticeFunction(g, (rho**dist)[..., None])
    r = shell_norms(f)
    assert np.allclose(r, rho ** np.arange(len(r)))
    prof = decay_profile(f)
    assert prof.fit_range == default_fit_range(g) == (2, 16)
    assert abs(prof.isotropic.rate - np.log(2)) <= 0.05 * np.log(2)
    assert prof.isotropic.r2 >= 0.999
    for fit in prof.directional:
        assert fit.rate == pytest.approx(np.log(2))


def test_directional_shells_see_anisotropy():
    n = 32
    g = box(n, n)
    idx = np.arange(n)
    d = np.minimum(idx, n - idx)
    f = LatticeFunction(g, np.exp(-(0.4 * d[:, None] + 1.2 * d[None, :]))[..., None])
    prof = decay_profile(f)
    assert prof.directional[0].rate == pytest.approx(0.4)
    assert prof.directional[1].rate == pytest.approx(1.2)
    assert prof.isotropic.rate == pytest.approx(0.4)
    assert len(directional_shell_norms(f, 0)) == n // 2 + 1


def test_shells_centred_on_peak():
    g = box(16, 16)
    vals = np.zeros((16, 16, 1))
    vals[5, 9, 0] = 1
    vals[6, 9, 0] = 0.5
    r = shell_norms(LatticeFunction(g, vals))
    assert r[0] == 1 and r[1] == 0.5 and not r[2:].any()


def test_delta_is_super_exponential():
    g = box(32, 32)
    vals = np.zeros((32, 32, 2))
    vals[0, 0, 0] = 1
    prof = decay_profile(LatticeFunction(g, vals))
    assert prof.isotropic.super_exponential and prof.isotropic.rate is None


def test_noise_floor_excludes_round_off_shells():
    r = np.array([1.0, 0.1, 0.01, 1e-3, 1e-17, 1e-18])
    fit = fit_decay(r, (1, 5))
    assert fit.shells == (1, 2, 3) and fit.rate == pytest.approx(np.log(10))


@pytest.mark.parametrize("fit_range", [(1, 4), (3, 2), (2, 9)])
def test_invalid_fit_range(fit_range):
    g = box(32, 32)
    f = LatticeFunction(g, np.ones((32, 32, 1)))
    assert max_torus_distance(g) == 16
    with pytest.raises(GridTooCoarseError):
        decay_profile(f, fit_range)


def test_synthesis_is_inverse_of_sections():
    _, s, cert = qwz_frame(16)
    w = synthesize(s, cert)
    assert w.count == 2 and w.fiber_dim == 2
    assert np.abs(w.sections().values - s.values).max() <= 1e-12
    assert np.abs(w.values[..., 0] - brute_inverse(s.values[..., 0], (16, 16))).max() <= 1e-12


def test_synthesis_on_small_box_leaves_fits_empty():
    g = box(4, 4)
    s = BlochSectionSet(g, np.ones((4, 4, 1, 1), complex))
    w = synthesize(s)
    assert w.profiles == (None,) and w.fitted_rates == [{}]
    with pytest.raises(GridTooCoarseError):
        synthesize(s, fit_range=(2, 3))


def test_atomic_wannier_is_a_delta():
    m = builtin("atomic", d=2, dim=2)
    p = projector_field(m, kgrid(m.lattice, (16, 16)), SpectralWindow.bands(1))
    s, cert = parseval_sections(p, seed=0)
    w = synthesize(s, cert)
    norms = w.function(0).cell_norms()
    assert norms.max() == pytest.approx(1) and np.sort(norms.ravel())[-2] <= 1e-14
    assert w.profiles[0].isotropic.super_exponential


def test_frame_coefficients_match_explicit_shifts():
    p, s, cert = qwz_frame(8)
    w = synthesize(s, cert)
    f = real_space_projection(p, random_function(p.grid, 2, np.random.default_rng(2)))
    c = frame_coefficients(w, f)
    for gamma in ((0, 0), (3, 1), (7, 5)):
        for j in range(2):
            direct = w.function(j).shifted(gamma).inner(f)
            assert c[gamma + (j,)] == pytest.approx(direct, abs=1e-12)


def test_parseval_against_double_sum():
    p, s, cert = qwz_frame(12)
    w = synthesize(s, cert)
    rng = np.random.default_rng(5)
    for _ in range(3):
        f = real_space_projection(p, random_function(p.grid, 2, rng))
        energy = brute_frame_energy(w.values, f.values)
        assert abs(energy - f.norm_squared()) <= 1e-9 * f.norm_squared()
    assert parseval_identity_check(w, p, trials=5, seed=1) <= 1e-12


def test_parseval_fails_for_a_non_frame():
    # one half-weight copy of the frame: energy is a quarter of the norm
    p, s, cert = qwz_frame(12)
    w = synthesize(BlochSectionSet(s.grid, s.values / 2))
    assert parseval_identity_check(w, p, trials=3, seed=0) == pytest.approx(0.75)


def test_rejected_certificate_blocks_parseval_check():
    p, s, _ = qwz_frame(12)
    bad = FrameCertificate(2, 1e-3, (0.9, 1.0), 1.0, "augmented")
    with pytest.raises(CertificateRejected):
        parseval_identity_check(synthesize(s, bad), p)


def test_projection_onto_window_is_idempotent():
    p, _, _ = qwz_frame(10)
    f = real_space_projection(p, random_function(p.grid, 2, np.random.default_rng(7)))
    again = real_space_projection(p, f)
    assert np.abs(again.values - f.values).max() <= 1e-12


def test_shift_orthonormality_atomic():
    g = box(8, 8)
    psi = np.zeros((8, 8, 2), complex)
    psi[..., 0] = 1
    w = inverse_transform(g, psi)
    r = shift_orthonormality_check(w, psi)
    assert r.orthogonal and r.consistent and r.shift_deviation <= 1e-10


def test_shift_orthonormality_varying_norm():
    g = box(16, 16)
    psi = np.zeros((16, 16, 2), complex)
    psi[..., 0] = 1 + 0.5 * np.cos(g.angles[..., 0])
    w = inverse_transform(g, psi)
    r = shift_orthonormality_check(w, psi)
    assert not r.orthogonal and r.consistent
    assert r.shift_deviation > 0.1 and r.norm_deviation > 0.1


def test_shift_orthonormality_of_qwz_frame_member():
    _, s, cert = qwz_frame(16)
    w = synthesize(s, cert)
    for j in range(2):
        r = shift_orthonormality_check(w.function(j), s.values[..., j])
        assert r.consistent and not r.orthogonal


def test_transport_gauge_decays_at_least_as_fast_as_projection_gauge():
    rates = {}
    for method in ("transport", "projection"):
        _, s, cert = qwz_frame(48, method=method)
        w = synthesize(s, cert, fit_range=(2, 12))
        rates[method] = min(r["isotropic"] for r in w.fitted_rates)
    assert rates["transport"] >= 0.9 * rates["projection"]


def test_tables():
    _, s, cert = qwz_frame(8)
    w = synthesize(s, cert)
    rows = coefficients_table(w).splitlines()
    assert rows[0] == "function,g1,g2,orbital,re,im"
    assert len(rows) == 1 + 2 * 64 * 2
    cells = {tuple(int(x) for x in r.split(",")[1:3]) for r in rows[1:]}
    assert min(c[0] for c in cells) == -4 and max(c[0] for c in cells) == 3
    # values survive a text round trip bit for bit
    fn, g1, g2, orb, re, im = rows[1 + 5].split(",")
    z = w.values[int(g1) % 8, int(g2) % 8, int(orb) - 1, int(fn) - 1]
    assert complex(float(re), float(im)) == z
    sparse = coefficients_table(w, threshold=1e-3).splitlines()
    assert len(sparse) < len(rows)
    shells = shells_table(w).splitlines()
    assert shells[0] == "function,shell,r_iso,r_axis1,r_axis2"
    assert len(shells) == 1 + 2 * 5
