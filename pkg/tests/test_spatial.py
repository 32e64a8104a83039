import math

import numpy as np
import pytest

from vbdf2.errors import DomainError, GridMismatch, InvalidArgument
from vbdf2.spatial import (FdDirichletOperator, ScalarOperator, SolveInfo, SpectralOperator,
                           read_field_csv, write_field_csv)


def mode(X, Y):
    return np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)


def test_spectral_eigenfunction():
    op = SpectralOperator(32, 0.5, kappa=0.3)
    X, Y = op.grid()
    u = mode(X, Y)
    lam = -0.5 * 8 * np.pi**2 + 0.3
    np.testing.assert_allclose(op.apply(u), lam * u, atol=1e-10)


def test_spectral_solve_inverts_shift():
    op = SpectralOperator(16, 1.0)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(op.shape)
    u = op.shifted_solve(3.0, rhs)
    np.testing.assert_allclose(3.0 * u - op.apply(u), rhs, atol=1e-12)


def test_spectral_energy_is_eps_h1():
    op = SpectralOperator(32, 2.0)
    u = op.sample(lambda t, X, Y: math.exp(-t) * mode(X, Y), 0.0)
    assert op.energy(u) == pytest.approx(2.0 * op.h1_semi(u) ** 2, rel=1e-12)
    # each squared factor integrates to 1 over (0, 2), and |grad|^2 = 8 pi^2 |mode|^2
    assert op.norm(u) ** 2 == pytest.approx(1.0, rel=1e-12)
    assert op.h1_semi(u) ** 2 == pytest.approx(8 * np.pi**2, rel=1e-12)


def test_spectral_rejects_indefinite_shift():
    op = SpectralOperator(8, 1.0, kappa=2.0)
    with pytest.raises(DomainError):
        op.shifted_solve(1.5, op.zeros())


def test_grid_mismatch():
    op = SpectralOperator(8, 1.0)
    with pytest.raises(GridMismatch):
        op.apply(np.zeros((4, 4)))
    with pytest.raises(InvalidArgument):
        SpectralOperator(7, 1.0)


def test_fd_laplacian_eigenvalue():
    M = 16
    op = FdDirichletOperator(M, 1.0)
    X, Y = op.grid()
    u = np.sin(np.pi * X / 2) * np.sin(np.pi * Y)
    h = op.h
    # discrete eigenvalue of the five-point stencil for this sine mode
    lam = -(4 / h**2) * (np.sin(np.pi * h / 4) ** 2 + np.sin(np.pi * h / 2) ** 2)
    np.testing.assert_allclose(op.apply(u), lam * u, atol=1e-10)


def test_fd_cg_solve():
    op = FdDirichletOperator(12, 0.7, lambda X, Y: np.cos(X) * np.sin(Y))
    rng = np.random.default_rng(1)
    rhs = rng.standard_normal(op.shape)
    info = SolveInfo()
    u = op.shifted_solve(5.0, rhs, info=info)
    res = rhs - (5.0 * u - op.apply(u))
    assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(rhs) * 1.0001
    assert info.iterations > 0


def test_fd_h1_matches_energy():
    op = FdDirichletOperator(10, 1.0)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(op.shape)
    assert op.energy(u) == pytest.approx(op.h1_semi(u) ** 2, rel=1e-12)


def test_fd_kappa_star_checked():
    with pytest.raises(InvalidArgument):
        FdDirichletOperator(8, 1.0, 2.0, kappa_star=1.0)
    with pytest.raises(DomainError):
        FdDirichletOperator(8, 1.0, 2.0).shifted_solve(1.0, np.zeros((7, 7)))


def test_scalar_operator():
    op = ScalarOperator(-2 + 1j)
    y = op.shifted_solve(3.0, 1.0 + 0j)
    assert y == pytest.approx(1 / (5 - 1j))
    with pytest.raises(DomainError):
        ScalarOperator(4.0).shifted_solve(3.0, 1.0)


def test_field_csv_roundtrip(tmp_path):
    u = np.arange(12.0).reshape(3, 4) / 7
    p = tmp_path / "u.csv"
    write_field_csv(u, p)
    assert p.read_text().splitlines()[0] == "i,j,value"
    np.testing.assert_array_equal(read_field_csv(p), u)
