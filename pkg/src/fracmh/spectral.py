"""Smallest generalized eigenpair of ``A v = lambda B v`` and the two
first-eigenvalue estimators built on it (fractional and local)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as spla

from .geometry import DomainMask, EmptyDomainError, GeometryError
from .nonlocal_form import NonlocalSystem, assemble

EIG_RTOL = 1e-9
RESIDUAL_TOL = 1e-6


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class EigenEstimate:
    """``residual`` is ``||A v - lambda B v|| / (lambda ||B v||)``."""

    lam: float
    vector: np.ndarray
    residual: float
    h: float | None = None
    s: float | None = None
    iterations: int = 0
    nodes: int = 0
    node_ij: np.ndarray | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ConvergenceError(f"nonpositive eigenvalue {self.lam}")


def _normalize(v, B):
    Bv = B @ v
    nrm = math.sqrt(float(v @ Bv))
    v = v / nrm
    if v.sum() < 0:
        v = -v
    return v


def _residual(A, B, v, lam):
    Bv = B @ v
    return float(np.linalg.norm(A @ v - lam * Bv) / (lam * np.linalg.norm(Bv)))


def _direct_solver(A, B):
    if isinstance(A, np.ndarray):
        Bd = B.toarray() if sparse.issparse(B) else np.asarray(B)
        eps = 1e-14 * float(np.abs(np.diag(A)).max() / max(np.abs(np.diag(Bd)).max(), 1e-300))
        try:
            fac = linalg.cho_factor(A + eps * Bd)
        except linalg.LinAlgError:
            raise ConvergenceError("A is not positive definite")
        return lambda b: linalg.cho_solve(fac, b)
    return spla.splu(sparse.csc_matrix(A)).solve


def inverse_iteration(A, B, solve, v0=None, tol=RESIDUAL_TOL, rtol=EIG_RTOL, maxiter=500):
    """Plain inverse iteration ``v <- solve(B v)`` with B-normalization."""
    n = A.shape[0]
    v = _normalize(np.ones(n) if v0 is None else np.asarray(v0, float).copy(), B)
    lam = float(v @ (A @ v))
    res = math.inf
    for it in range(1, maxiter + 1):
        w = _normalize(solve(B @ v), B)
        new = float(w @ (A @ w))
        res = _residual(A, B, w, new)
        done = abs(new - lam) <= rtol * abs(new) and res < tol
        v, lam = w, new
        if done:
            return EigenEstimate(lam, v, res, iterations=it, nodes=n)
    raise ConvergenceError(f"inverse iteration stalled: lambda={lam}, residual={res:.3g}")


def smallest_eigenpair(A, B, tol: float = RESIDUAL_TOL, rtol: float = EIG_RTOL,
                       maxiter: int = 500, precond=None, v0=None,
                       method: str = "auto") -> EigenEstimate:
    """Bottom of the pencil ``(A, B)``, ``A`` symmetric positive definite.

    ``method="inverse"`` runs plain inverse iteration on a Cholesky (dense)
    or LU (sparse) factorization.  ``"auto"`` accelerates the same inverse
    operator with Lanczos (ARPACK shift-invert at 0), which stays fast when
    the first two eigenvalues nearly coincide (long thin domains).  A
    ``LinearOperator`` ``A`` goes to LOBPCG, preconditioned by an algebraic
    multigrid cycle on the sparse ``precond`` matrix.
    """
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise ValueError(f"shape mismatch: A {A.shape}, B {B.shape}")
    if method not in ("auto", "inverse"):
        raise ValueError(f"unknown method {method!r}")
    x0 = np.ones(n) if v0 is None else np.asarray(v0, float)
    direct = isinstance(A, np.ndarray) or sparse.issparse(A)
    if direct and (method == "inverse" or n <= 2):
        return inverse_iteration(A, B, _direct_solver(A, B), x0, tol, rtol, maxiter)
    if direct:
        solve = _direct_solver(A, B)
        op = spla.LinearOperator((n, n), matvec=solve, dtype=float)
        _, vec = spla.eigsh(A, k=1, M=B, sigma=0.0, OPinv=op, v0=x0, tol=rtol * 1e-2,
                            maxiter=maxiter * 10)
        v = _normalize(vec[:, 0], B)
        lam = float(v @ (A @ v))
        res = _residual(A, B, v, lam)
        if res >= tol:
            # one polishing step of inverse iteration
            return inverse_iteration(A, B, solve, v, tol, rtol, maxiter)
        return EigenEstimate(lam, v, res, iterations=1, nodes=n)
    if method == "inverse":
        raise ValueError("plain inverse iteration needs an explicit matrix")
    M = None
    if precond is not None:
        import pyamg
        M = pyamg.smoothed_aggregation_solver(sparse.csr_matrix(precond)).aspreconditioner()
    X = x0.reshape(n, 1)
    scale = float(x0 @ (A @ x0)) / float(x0 @ (B @ x0))
    lt = tol * 1e-2 * scale
    iters = 0
    for _ in range(4):
        _, V, hist = spla.lobpcg(A, X, B=B, M=M, largest=False, tol=lt, maxiter=maxiter,
                                 retResidualNormsHistory=True)
        iters += len(hist)
        v = _normalize(V[:, 0], B)
        lam = float(v @ (A @ v))
        res = _residual(A, B, v, lam)
        if res < tol:
            return EigenEstimate(lam, v, res, iterations=iters, nodes=n)
        X = v.reshape(n, 1)
        lt *= 1e-2
    raise ConvergenceError(f"LOBPCG stalled: lambda={lam}, residual={res:.3g}")


def _jacobi_sweeps(S, tol=1e-14, max_sweeps=60):
    """Cyclic Jacobi eigenvalues of a symmetric matrix (small dense oracle)."""
    S = np.array(S, dtype=float)
    n = len(S)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(S**2) - np.sum(np.diag(S) ** 2)))
        if off <= tol * math.sqrt(float(np.sum(S**2))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if S[p, q] == 0.0:
                    continue
                diff = S[q, q] - S[p, p]
                if abs(S[p, q]) < 1e-300 + 1e-18 * abs(diff):
                    t = S[p, q] / diff
                else:
                    theta = diff / (2 * S[p, q])
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                sn = t * c
                rp = S[p, :].copy()
                rq = S[q, :].copy()
                S[p, :] = c * rp - sn * rq
                S[q, :] = sn * rp + c * rq
                cp = S[:, p].copy()
                cq = S[:, q].copy()
                S[:, p] = c * cp - sn * cq
                S[:, q] = sn * cp + c * cq
    return np.sort(np.diag(S))


def jacobi_pencil_eigenvalues(A, B):
    """All eigenvalues of ``(A, B)`` via ``L^{-1} A L^{-T}`` and cyclic Jacobi."""
    L = np.linalg.cholesky(np.asarray(B, float))
    Li = np.linalg.inv(L)
    S = Li @ np.asarray(A, float) @ Li.T
    return _jacobi_sweeps(0.5 * (S + S.T))


def lambda1_s(mask: DomainMask, s: float, h: float | None = None,
              system: NonlocalSystem | None = None, tol: float = RESIDUAL_TOL) -> EigenEstimate:
    """Discrete first eigenvalue of the fractional Dirichlet form on ``mask``."""
    sys_ = system if system is not None else assemble(mask, s, h)
    est = smallest_eigenpair(sys_.A, sys_.B, tol=tol, precond=sys_.precond)
    return EigenEstimate(est.lam, est.vector, est.residual, sys_.h, s, est.iterations,
                         sys_.n, sys_.node_ij)


def local_nodes(mask: DomainMask) -> np.ndarray:
    """Vertices with four occupied neighbours that do not lie on a crack."""
    occ = mask.occupied
    nx, ny = occ.shape
    ok = np.zeros((nx + 1, ny + 1), dtype=bool)
    ok[1:-1, 1:-1] = occ[:-1, :-1] & occ[1:, :-1] & occ[:-1, 1:] & occ[1:, 1:]
    if len(mask.segments):
        from .geometry import segment_distance
        I, J = np.nonzero(ok)
        pts = np.column_stack([mask.origin[0] + I * mask.h, mask.origin[1] + J * mask.h])
        on = segment_distance(pts, mask.segments) < 1e-9 * mask.h
        ok[I[on], J[on]] = False
    return ok


def _edge_cut(mask: DomainMask, p, q):
    if not len(mask.segments):
        return np.zeros(len(p), dtype=bool)
    cut = np.zeros(len(p), dtype=bool)
    mid = 0.5 * (p + q)
    for a, b in mask.segments:
        # thin box around the edge: half-width h/2 along it, tiny across
        horiz = np.abs(p[:, 1] - q[:, 1]) < 1e-12
        for sel, hx, hy in ((horiz, 0.5, 1e-9), (~horiz, 1e-9, 0.5)):
            if sel.any():
                cx, cy = mid[sel, 0], mid[sel, 1]
                # a segment along the edge line does not separate its endpoints
                d = b - a
                parallel = (abs(d[1]) < 1e-12) if hx > hy else (abs(d[0]) < 1e-12)
                if parallel:
                    continue
                hit = _box_hit(a, b, cx, cy, hx * mask.h, hy * mask.h)
                cut[sel] |= hit
    return cut


def _box_hit(p, q, cx, cy, hx, hy):
    d = q - p
    t0 = np.zeros_like(cx)
    t1 = np.ones_like(cx)
    ok = np.ones(cx.shape, dtype=bool)
    for comp, c, half in ((0, cx, hx), (1, cy, hy)):
        lo = c - half - p[comp]
        hi = c + half - p[comp]
        if abs(d[comp]) < 1e-300:
            ok &= (lo <= 0) & (hi >= 0)
        else:
            ta, tb = lo / d[comp], hi / d[comp]
            t0 = np.maximum(t0, np.minimum(ta, tb))
            t1 = np.minimum(t1, np.maximum(ta, tb))
    return ok & (t0 <= t1)


def laplacian_5pt(mask: DomainMask):
    """Dirichlet 5-point Laplacian on :func:`local_nodes`; edges cut by a crack
    are treated as Dirichlet neighbours."""
    ok = local_nodes(mask)
    ij = np.column_stack(np.nonzero(ok))
    if len(ij) == 0:
        raise EmptyDomainError("no interior node for the local solver")
    n = len(ij)
    idx = np.full(ok.shape, -1, dtype=np.int64)
    idx[ij[:, 0], ij[:, 1]] = np.arange(n)
    h = mask.h
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 4.0)]
    pts = np.column_stack([mask.origin[0] + ij[:, 0] * h, mask.origin[1] + ij[:, 1] * h])
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a = ij[:, 0] + di
        b = ij[:, 1] + dj
        nb = idx[a, b]
        q = pts + np.array([di * h, dj * h])
        cut = _edge_cut(mask, pts, q)
        keep = (nb >= 0) & ~cut
        rows.append(np.nonzero(keep)[0])
        cols.append(nb[keep])
        vals.append(np.full(int(keep.sum()), -1.0))
    L = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)) / h**2
    return L, ij


def lambda1_local(mask: DomainMask, h: float | None = None, tol: float = RESIDUAL_TOL) -> EigenEstimate:
    """First Dirichlet-Laplacian eigenvalue by the 5-point scheme."""
    if h is not None and not math.isclose(h, mask.h, rel_tol=1e-12):
        raise GeometryError(f"h={h} differs from the mask spacing {mask.h}")
    L, ij = laplacian_5pt(mask)
    B = sparse.identity(L.shape[0], format="csr")
    est = smallest_eigenpair(L.tocsc(), B, tol=tol)
    return EigenEstimate(est.lam, est.vector, est.residual, mask.h, None, est.iterations,
                         L.shape[0], ij)
