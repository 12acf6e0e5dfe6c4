"""Conjugate-gradient solver and spectral diagnostics for the assembled systems.

The discrete bilinear form is symmetric and, for a sufficiently large penalty,
positive definite, so CG with a Jacobi preconditioner is the natural solver.
The loop doubles as an indefiniteness detector: when the penalty is too small
the first nonpositive curvature value p'Ap aborts the solve with the smallest
Ritz estimate attached, which is how undersized penalties surface to the CLI.
"""

import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class IndefiniteSystemError(RuntimeError):
    """The matrix is not positive definite (penalty too small, or bad data)."""


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    relres: float
    wall_time: float
    converged: bool


def _as_csr(a):
    if hasattr(a, "to_csr"):
        return a.to_csr()
    if sp.issparse(a):
        return a.tocsr()
    return sp.csr_matrix(np.asarray(a, dtype=float))


def _as_operator(a):
    """Matrix-like with .diagonal() and @, in whatever storage the
    assembled system already uses (CSR for sparse, ndarray for dense)."""
    if hasattr(a, "to_operator"):
        return a.to_operator()
    if sp.issparse(a):
        return a.tocsr()
    return np.asarray(a, dtype=float)


def _smallest_ritz(alphas, betas):
    """Smallest eigenvalue of the Lanczos tridiagonal rebuilt from CG steps."""
    m = len(alphas)
    if m == 0:
        return np.nan
    diag = np.empty(m)
    diag[0] = 1.0 / alphas[0]
    for i in range(1, m):
        diag[i] = 1.0 / alphas[i] + betas[i - 1] / alphas[i - 1]
    if m == 1:
        return float(diag[0])
    off = np.array([np.sqrt(max(betas[i], 0.0)) / alphas[i]
                    for i in range(m - 1)])
    return float(scipy.linalg.eigvalsh_tridiagonal(diag, off)[0])


def pcg(a, b, tol=1e-12, maxiter=None, jacobi=True):
    """Preconditioned conjugate gradients down to a relative residual.

    Raises IndefiniteSystemError on nonpositive curvature; the message carries
    the smallest Ritz value seen so far (of the preconditioned operator).
    """
    a = _as_operator(a)
    b = np.asarray(b, dtype=float)
    n = b.size
    t0 = time.perf_counter()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveReport(np.zeros(n), 0, 0.0, time.perf_counter() - t0, True)
    if maxiter is None:
        maxiter = max(10 * n, 100)

    diag = a.diagonal()
    if jacobi:
        if np.any(diag <= 0.0):
            raise IndefiniteSystemError(
                "nonpositive diagonal entry %.6e; smallest Ritz value %.6e"
                % (diag.min(), diag.min()))
        minv = 1.0 / diag
    else:
        minv = np.ones(n)

    x = np.zeros(n)
    r = b.copy()
    z = minv * r
    p = z.copy()
    rz = float(r @ z)
    alphas, betas = [], []
    it = 0
    relres = 1.0
    while it < maxiter:
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            ritz = _smallest_ritz(alphas, betas)
            if np.isnan(ritz):
                ritz = pap / float(p @ p)
            raise IndefiniteSystemError(
                "nonpositive curvature p'Ap = %.6e at iteration %d; "
                "smallest Ritz value %.6e" % (pap, it + 1, ritz))
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        alphas.append(alpha)
        it += 1
        relres = np.linalg.norm(r) / bnorm
        if relres <= tol:
            break
        z = minv * r
        rz_new = float(r @ z)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p
    return SolveReport(x, it, float(relres), time.perf_counter() - t0,
                       relres <= tol)


def cond_estimate(a, dense_cutoff=600):
    """2-norm condition number lambda_max / lambda_min of a symmetric matrix.

    Small systems go through a dense eigendecomposition; larger ones use a
    few Lanczos iterations for the top and shift-invert for the bottom.
    """
    a = _as_csr(a)
    n = a.shape[0]
    if n <= dense_cutoff:
        w = np.linalg.eigvalsh(a.toarray())
        if w[0] <= 0.0:
            raise IndefiniteSystemError(
                "smallest eigenvalue %.6e is not positive" % w[0])
        return float(w[-1] / w[0])
    lmax = float(spla.eigsh(a, k=1, which="LA",
                            return_eigenvectors=False)[0])
    lmin = float(spla.eigsh(a, k=1, sigma=0.0, which="LM",
                            return_eigenvectors=False)[0])
    if lmin <= 0.0:
        raise IndefiniteSystemError(
            "smallest eigenvalue %.6e is not positive" % lmin)
    return lmax / lmin


_thread_controller = None


def pin_threads(n=None):
    """Cap the BLAS thread pools so reductions run in a fixed order.

    Reads SGDG_THREADS when n is not given, falling back to all cores.
    Returns the cap. Keeping the controller alive module-wide makes the
    cap persistent.
    """
    global _thread_controller
    if n is None:
        n = int(os.environ.get("SGDG_THREADS", str(os.cpu_count() or 1)))
    n = max(1, int(n))
    import threadpoolctl
    _thread_controller = threadpoolctl.threadpool_limits(limits=n)
    return n
