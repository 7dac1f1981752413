"""Potential recovery, Hodge decomposition, helicity, and the discrete
Poincare constant behind the energy lower bound.

The potential solve is the singular consistent curl-curl system; its
minimum-norm solution is found by MINRES with gradient-basis refinement.
The harmonic component is the least-squares residual of that solve, which
the normal equations make mass-orthogonal to the curl range, so no
explicit harmonic basis is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .derham import FieldVec, SpaceKind, require_space
from .linsolve import KrylovReport, eig_smallest_nonzero, minres_minnorm


class HodgeError(ValueError):
    pass


@dataclass
class HodgeResult:
    potential: FieldVec  # edge space
    harmonic: FieldVec  # face space
    helicity: float
    gen_helicity: float
    report: KrylovReport


@dataclass
class PoincareEstimate:
    lam_min: float
    constant: float  # sqrt(lam_min); constant * |helicity| <= energy
    eigvec: FieldVec
    residual: float
    iterations: int


def recover_potential(cx, B, tol=1e-11):
    """Minimum-norm circulation potential of a discretely div-free flux
    field: curl A reproduces the curl-range part of B."""
    require_space(B, SpaceKind.FACE)
    div_norm = np.linalg.norm(cx.div @ B.data)
    if div_norm > 1e-9 * max(1.0, np.linalg.norm(B.data)):
        raise HodgeError(
            f"input is not discretely divergence-free (|div B| = {div_norm:.3e}); "
            "helicity is meaningless for such fields"
        )
    rhs = cx.curl.T @ (cx.mass_face @ B.data)
    x, report = minres_minnorm(cx.curl_curl, rhs, tol=tol, null_basis=cx.grad)
    return FieldVec(SpaceKind.EDGE, x), report


def harmonic_component(cx, B, A):
    """Harmonic part B - curl A; mass-orthogonal to the curl range by the
    normal-equation property of the potential solve."""
    require_space(B, SpaceKind.FACE)
    require_space(A, SpaceKind.EDGE)
    return FieldVec(SpaceKind.FACE, B.data - cx.curl @ A.data)


def helicity(cx, A, B):
    """Mixed-pairing helicity of a potential/flux pair."""
    require_space(A, SpaceKind.EDGE)
    require_space(B, SpaceKind.FACE)
    return float(A.data @ (cx.mass_edge_face @ B.data))


def generalized_helicity(cx, A, B, B_H):
    """Helicity extended to non-contractible domains: pairs the potential
    against the flux field plus its harmonic component."""
    require_space(B_H, SpaceKind.FACE)
    return float(A.data @ (cx.mass_edge_face @ (B.data + B_H.data)))


def hodge_decompose(cx, B, tol=1e-11):
    """One-stop decomposition B = curl A + B_H with both helicities."""
    A, report = recover_potential(cx, B, tol=tol)
    B_H = harmonic_component(cx, B, A)
    return HodgeResult(
        potential=A,
        harmonic=B_H,
        helicity=helicity(cx, A, B),
        gen_helicity=generalized_helicity(cx, A, B, B_H),
        report=report,
    )


def estimate_arnold_constant(cx, tol=1e-8, seed=0):
    """Square root of the smallest nonzero eigenvalue of the generalized
    curl-curl pencil, deflated against the gradient range.

    The side-wall conditions keep the edge level exact on both supported
    topologies, so the gradient columns span the whole kernel; on the
    z-periodic box the harmonic direction lives at the face level and
    never enters this pencil.
    """
    result = eig_smallest_nonzero(
        cx.curl_curl, cx.mass_edge, deflation_basis=cx.grad, tol=tol, seed=seed
    )
    return PoincareEstimate(
        lam_min=result.value,
        constant=float(np.sqrt(result.value)),
        eigvec=FieldVec(SpaceKind.EDGE, result.vector),
        residual=result.residual,
        iterations=result.iterations,
    )
