import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg, sparse
from scipy.special import jn_zeros

from fracmh import geometry as G
from fracmh import spectral as S
from fracmh.geometry import ShapeSpec, rasterize
from fracmh.nonlocal_form import assemble

DISK = ShapeSpec("disk", radius=1.0)
J01_SQ = jn_zeros(0, 1)[0] ** 2


def random_pencil(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n))
    A = X @ X.T + n * np.eye(n)
    Y = rng.normal(size=(n, n))
    B = Y @ Y.T / n + np.eye(n)
    return A, B


def test_identity_pencil():
    B = sparse.csr_matrix(np.diag([1.0, 2.0, 3.0, 4.0]))
    est = S.smallest_eigenpair(B.toarray(), B)
    assert_allclose(est.lam, 1.0, rtol=1e-10)


def test_diagonal_pencil():
    A = np.diag([1.0, 2.0, 3.0])
    est = S.smallest_eigenpair(A, sparse.identity(3, format="csr"))
    assert_allclose(est.lam, 1.0, rtol=1e-12)
    assert_allclose(np.abs(est.vector), [1, 0, 0], atol=1e-8)


@pytest.mark.parametrize("method", ["auto", "inverse"])
def test_random_pencil_vs_jacobi(method):
    A, B = random_pencil(50, 4)
    oracle = S.jacobi_pencil_eigenvalues(A, B)
    assert_allclose(oracle, linalg.eigh(A, B, eigvals_only=True), rtol=1e-10)
    est = S.smallest_eigenpair(A, sparse.csr_matrix(B), method=method)
    assert abs(est.lam / oracle[0] - 1) < 1e-8
    assert est.residual < S.RESIDUAL_TOL


def test_jacobi_sweeps_plain():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(12, 12))
    Sym = X + X.T
    assert_allclose(S._jacobi_sweeps(Sym), np.linalg.eigvalsh(Sym), atol=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        S.smallest_eigenpair(np.eye(3), sparse.identity(4))
    with pytest.raises(ValueError):
        S.smallest_eigenpair(np.eye(3), sparse.identity(3), method="power")
    with pytest.raises(S.ConvergenceError):
        S.smallest_eigenpair(-np.eye(3), sparse.identity(3, format="csr"))


def test_sparse_direct_path():
    L, _ = S.laplacian_5pt(rasterize(ShapeSpec("square", side=math.pi), math.pi / 32))
    est = S.smallest_eigenpair(L.tocsc(), sparse.identity(L.shape[0], format="csr"))
    # exact 5-point eigenvalue of the square: 2 * (4/h^2) sin^2(h/2)
    h = math.pi / 32
    assert_allclose(est.lam, 8 / h**2 * math.sin(h / 2) ** 2, rtol=1e-9)


def test_operator_path_matches_dense():
    m = rasterize(ShapeSpec("L-shape", side=2.0), 1 / 16)
    d = assemble(m, 0.75, dense=True)
    f = assemble(m, 0.75, dense=False)
    a = S.smallest_eigenpair(d.A, d.B)
    b = S.smallest_eigenpair(f.A, f.B, precond=f.precond)
    assert_allclose(b.lam, a.lam, rtol=1e-7)
    assert b.residual < S.RESIDUAL_TOL


def test_local_solver_oracles():
    sq = S.lambda1_local(rasterize(ShapeSpec("square", side=math.pi), math.pi / 128))
    assert abs(sq.lam / 2 - 1) < 0.02
    dk = S.lambda1_local(rasterize(DISK, 1 / 64))
    assert abs(dk.lam / J01_SQ - 1) < 0.02
    assert dk.residual < S.RESIDUAL_TOL


def test_local_scaling():
    m = rasterize(ShapeSpec("L-shape", side=2.0), 1 / 16)
    a = S.lambda1_local(m).lam
    b = S.lambda1_local(G.scale(m, 3.0)).lam
    assert_allclose(b, a / 9, rtol=1e-9)


def test_local_crack_edges():
    # cracks act as Dirichlet walls: the cracked square has a larger eigenvalue
    h = 1 / 8
    plain = S.lambda1_local(rasterize(ShapeSpec("square", side=4.0), h)).lam
    cracked = S.lambda1_local(rasterize(ShapeSpec("cracked-square", k=2), h)).lam
    assert cracked > 1.5 * plain
    with pytest.raises(G.GeometryError):
        S.lambda1_local(rasterize(DISK, h), h=0.2)


@pytest.mark.parametrize("s", [0.5, 0.75])
def test_fractional_refinement_decreases(s):
    lams = [S.lambda1_s(rasterize(DISK, 1 / n), s).lam for n in (16, 32, 64)]
    assert lams[0] > lams[1] > lams[2]


def test_fractional_monotone_in_domain():
    big = rasterize(ShapeSpec("square", side=2.0), 1 / 16)
    occ = big.occupied.copy()
    occ[:, :6] = False
    small = G.DomainMask(big.h, big.origin, occ)
    for s in (0.3, 0.75):
        assert S.lambda1_s(small, s).lam >= S.lambda1_s(big, s).lam


def test_fractional_scaling_matched():
    m = rasterize(ShapeSpec("square", side=2.0), 1 / 16)
    for s in (0.55, 0.9):
        a = S.lambda1_s(m, s).lam
        b = S.lambda1_s(G.scale(m, 2.0), s).lam
        assert_allclose(b, 2 ** (-2 * s) * a, rtol=1e-10)


def test_eigenvector_sign_and_residual():
    est = S.lambda1_s(rasterize(ShapeSpec("L-shape", side=2.0), 1 / 16), 0.75)
    v = est.vector
    assert v.min() >= -1e-8 * v.max()
    assert est.residual < S.RESIDUAL_TOL
    assert est.nodes == len(v) == len(est.node_ij)


def test_fractional_near_one_trend():
    # qualitative: (1 - s) lambda at s = 0.95 and 0.99 on the same mask stays within 25%
    m = rasterize(DISK, 1 / 16)
    a = 0.05 * S.lambda1_s(m, 0.95).lam
    b = 0.01 * S.lambda1_s(m, 0.99).lam
    assert abs(a / b - 1) < 0.25
