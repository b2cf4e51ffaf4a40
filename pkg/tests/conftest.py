"""Independent reference computations shared by the tests.

None of these helpers call into the library's transform, plaquette or frame
code; they are deliberately slow, explicit formulas.
"""

import itertools

import numpy as np
import pytest

from wannierframes import builtin, kgrid


def dft_matrix(sizes):
    """Explicit matrix ``F[m, gamma] = exp(-2 pi i sum_j m_j gamma_j / N_j)`` (row-major flattening)."""
    cells = np.array(list(itertools.product(*[range(n) for n in sizes])))
    phase = (cells[:, None, :] * cells[None, :, :] / np.array(sizes)).sum(axis=-1)
    return np.exp(-2j * np.pi * phase)


def brute_transform(values, sizes):
    """``f_hat(k) = sum_gamma f(gamma) e^{-ik.gamma}`` by an explicit sum."""
    n = values.shape[-1]
    flat = values.reshape(-1, n)
    return (dft_matrix(sizes) @ flat).reshape(values.shape)


def brute_inverse(values, sizes):
    n = values.shape[-1]
    flat = values.reshape(-1, n)
    mat = dft_matrix(sizes).conj() / np.prod(sizes)
    return (mat @ flat).reshape(values.shape)


def brute_frame_energy(wvals, fvals):
    """``sum_j sum_gamma |sum_x w_j(x - gamma)^dagger f(x)|^2`` with explicit cyclic shifts."""
    dim = fvals.ndim - 1
    shape = fvals.shape[:-1]
    total = 0.0
    for j in range(wvals.shape[-1]):
        w = wvals[..., j]
        for gamma in itertools.product(*[range(n) for n in shape]):
            shifted = np.roll(w, gamma, axis=tuple(range(dim)))
            total += abs(np.vdot(shifted, fvals)) ** 2
    return total


def berry_curvature_chern(model, n, lo=1, hi=1):
    """Chern number from ``(i / 2 pi) integral tr P [d1 P, d2 P]`` on an ``n x n`` grid.

    ``dP`` comes from first-order perturbation theory with the analytic
    derivative of ``H`` in the reduced phases, so nothing here depends on link
    variables or plaquettes.
    """
    grid = kgrid(model.lattice, (n, n))
    k = grid.points
    vals, vecs = np.linalg.eigh(model.hamiltonian(k))
    inside = np.zeros(model.fiber_dim, bool)
    inside[lo - 1 : hi] = True
    occ, emp = vecs[..., inside], vecs[..., ~inside]
    proj = occ @ np.swapaxes(occ.conj(), -1, -2)
    dproj = []
    for axis in range(2):
        dh = model.hamiltonian_derivative(k, axis)
        mel = np.swapaxes(emp.conj(), -1, -2) @ dh @ occ  # <m|dH|n>
        denom = vals[..., inside][..., None, :] - vals[..., ~inside][..., :, None]
        term = emp @ (mel / denom) @ np.swapaxes(occ.conj(), -1, -2)
        dproj.append(term + np.swapaxes(term.conj(), -1, -2))
    d1, d2 = dproj
    integrand = np.trace(proj @ (d1 @ d2 - d2 @ d1), axis1=-2, axis2=-1)
    return float((1j / (2 * np.pi) * integrand.sum() * (2 * np.pi / n) ** 2).real)


@pytest.fixture(scope="session")
def qwz1():
    return builtin("qwz", u=1.0)
