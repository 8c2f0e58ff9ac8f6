"""Conjugate gradients for the symmetric positive definite systems used here."""

from __future__ import annotations

import numpy as np

from .errors import CGDiverged


def cg(matvec, b: np.ndarray, x0: np.ndarray | None = None, rtol: float = 1e-11,
       maxiter: int | None = None) -> tuple[np.ndarray, int]:
    """Solve ``K x = b`` for SPD ``K`` given as a matrix or a callable.

    Stops when ``||b - K x|| <= rtol * ||b||``.  Returns ``(x, iterations)``.
    Raises :class:`CGDiverged` after ``maxiter`` (default ``10 * len(b)``)
    iterations or on loss of positive curvature.
    """
    if not callable(matvec):
        mat = matvec
        matvec = lambda v: mat @ v  # noqa: E731
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    bnorm = float(np.sqrt(b @ b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x) if x0 is not None else b.copy()
    rr = float(r @ r)
    target = (rtol * bnorm) ** 2
    if rr <= target:
        return x, 0
    p = r.copy()
    for it in range(1, maxiter + 1):
        kp = matvec(p)
        curv = float(p @ kp)
        if not curv > 0.0:
            raise CGDiverged(f"non-positive curvature {curv:.3e} at iteration {it}")
        alpha = rr / curv
        x += alpha * p
        r -= alpha * kp
        rr_new = float(r @ r)
        if rr_new <= target:
            return x, it
        p *= rr_new / rr
        p += r
        rr = rr_new
    raise CGDiverged(f"no convergence to rtol={rtol:g} in {maxiter} iterations "
                     f"(residual {np.sqrt(rr) / bnorm:.3e})")
