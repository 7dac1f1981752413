"""Sparse linear algebra kernels with explicit contracts.

Direct solves go through SuperLU with a fixed column ordering so repeated
runs factorize identically.  The singular consistent curl-curl systems are
solved by MINRES followed by a minimum-norm refinement that projects out a
known null-space basis (for curl-curl: the gradient range, available
analytically).  The smallest nonzero generalized eigenvalue is found by
shift-inverted inverse iteration deflated against the same basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinSolveError(RuntimeError):
    pass


class FactorizationError(LinSolveError):
    pass


class EigenBreakdownError(LinSolveError):
    pass


class Factorization:
    """Reusable sparse LU handle (SuperLU, COLAMD ordering)."""

    def __init__(self, matrix):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise FactorizationError(
                f"matrix must be square, got shape {matrix.shape}"
            )
        self.shape = matrix.shape
        try:
            self._lu = spla.splu(matrix, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise FactorizationError(str(exc)) from exc

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        return self._lu.solve(rhs)


def factorize(matrix):
    return Factorization(matrix)


@dataclass
class KrylovReport:
    iterations: int
    residual: float
    converged: bool
    null_component: float


def _null_projector(null_basis):
    """Euclidean projector onto the orthogonal complement of span(basis)."""
    if null_basis is None or null_basis.shape[1] == 0:
        return lambda x: x
    basis = sp.csc_matrix(null_basis)
    gram = factorize((basis.T @ basis).tocsc())

    def project(x):
        return x - basis @ gram.solve(basis.T @ x)

    return project


def minres_minnorm(matrix, rhs, tol=1e-10, null_basis=None, maxiter=None):
    """Solve a symmetric PSD consistent system, returning the member of the
    solution set orthogonal to the supplied null-space basis.

    Consistency is asserted rather than assumed: the returned report carries
    the true relative residual, so an inconsistent right-hand side shows up
    as ``converged=False``.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    rhs_norm = np.linalg.norm(rhs)
    project = _null_projector(null_basis)
    if rhs_norm == 0.0:
        return np.zeros(n), KrylovReport(0, 0.0, True, 0.0)

    iters = [0]

    def count(_):
        iters[0] += 1

    if maxiter is None:
        maxiter = max(10 * n, 1000)

    # scipy's minres stops on the Paige-Saunders estimate, which can sit
    # above a plain ||r||/||b|| target; restart on the true residual until
    # the contracted tolerance is met (or the correction stalls).
    x = np.zeros(n)
    residual = 1.0
    for _ in range(6):
        r = rhs - matrix @ x
        residual = np.linalg.norm(r) / rhs_norm
        if residual <= tol:
            break
        inner_rtol = max(tol / max(residual, tol), 1e-14)
        dx, _info = spla.minres(
            matrix, r, rtol=inner_rtol, maxiter=maxiter, callback=count
        )
        if not np.any(dx):
            break
        x = x + dx
        residual = np.linalg.norm(rhs - matrix @ x) / rhs_norm

    x = project(x)
    x_norm = np.linalg.norm(x)
    null_norm = np.linalg.norm(x - project(x)) / x_norm if x_norm > 0 else 0.0
    return x, KrylovReport(
        iterations=iters[0],
        residual=float(residual),
        converged=bool(residual <= tol),
        null_component=float(null_norm),
    )


@dataclass
class EigResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float


def eig_smallest_nonzero(
    stiffness,
    mass,
    deflation_basis=None,
    tol=1e-8,
    max_iter=400,
    seed=0,
):
    """Smallest generalized eigenvalue of K x = lambda M x restricted
    M-orthogonal to span(deflation_basis), by shift-inverted inverse
    iteration.

    ``deflation_basis`` must span ker(K); the iteration reprojects every
    step so rounding cannot reintroduce kernel components.  The shift is
    tightened once toward the current Rayleigh quotient to sharpen the
    convergence ratio.
    """
    n = stiffness.shape[0]
    rng = np.random.default_rng(seed)

    if deflation_basis is not None and deflation_basis.shape[1] > 0:
        basis = sp.csc_matrix(deflation_basis)
        gram = factorize((basis.T @ (mass @ basis)).tocsc())

        def project(x):
            return x - basis @ gram.solve(basis.T @ (mass @ x))

    else:

        def project(x):
            return x

    def m_norm(x):
        return float(np.sqrt(x @ (mass @ x)))

    x = project(rng.standard_normal(n))
    nrm = m_norm(x)
    if nrm == 0.0:
        raise EigenBreakdownError("start vector lies entirely in the deflation space")
    x /= nrm
    lam = float(x @ (stiffness @ x))
    scale = lam if lam > 0 else 1.0

    sigma = max(1e-3 * scale, np.finfo(float).tiny)
    solver = factorize((stiffness + sigma * mass).tocsc())
    retightened = False

    for it in range(1, max_iter + 1):
        y = project(solver.solve(mass @ x))
        nrm = m_norm(y)
        if nrm == 0.0 or not np.isfinite(nrm):
            raise EigenBreakdownError(f"inverse iteration broke down at step {it}")
        y /= nrm
        lam = float(y @ (stiffness @ y))
        resid_vec = stiffness @ y - lam * (mass @ y)
        resid = np.linalg.norm(resid_vec) / np.linalg.norm(y)
        x = y
        if resid <= tol * max(lam, np.finfo(float).eps):
            return EigResult(lam, x, it, float(resid))
        if not retightened and resid <= 1e-2 * lam:
            # by now lam is within O(resid) of the target, so 0.95*lam sits
            # safely below it; the tightened shift sharpens the tail
            sigma = 0.95 * lam
            solver = factorize((stiffness - sigma * mass).tocsc())
            retightened = True

    raise EigenBreakdownError(
        f"inverse iteration did not reach tolerance in {max_iter} steps "
        f"(last residual {resid:.3e})"
    )
