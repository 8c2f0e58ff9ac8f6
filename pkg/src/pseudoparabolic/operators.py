"""Finite-difference discretization of ``-Delta_X`` on a box with Dirichlet data.

Each ``X_i = sum_k a_k d_k`` becomes a skew-symmetrized centered difference
``D_i = (diag(a) delta + delta diag(a)) / 2`` assembled on the *closed* grid
(interior plus boundary nodes), so ``D_i`` is exactly antisymmetric.  The state
lives on interior nodes; boundary values are pinned to zero, giving the
rectangular operator ``B_i = D_i P`` with ``P`` the interior injection.  Then
``||X u||^2 = w sum_i ||B_i u||^2 = w u^T A u`` with ``A = sum_i B_i^T B_i``.

Evaluating ``X_i u`` on the boundary row as well is what makes ``A`` the
full width-2 stencil with zero extension (positive definite for any node
count); dropping those rows leaves a Neumann-like end on every parity chain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fields as fl
from .errors import DimensionMismatch, ExponentOutOfRange, NotPositiveDefinite, RIsTooSmall, ZeroDirection

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    lower: tuple
    upper: tuple
    shape: tuple  # interior node count per axis

    def __post_init__(self):
        lo = tuple(float(a) for a in self.lower)
        hi = tuple(float(b) for b in self.upper)
        shape = tuple(int(s) for s in self.shape)
        if not (len(lo) == len(hi) == len(shape)):
            raise DimensionMismatch("bounds and shape disagree in dimension")
        if any(b <= a for a, b in zip(lo, hi)) or any(s < 1 for s in shape):
            raise ValueError("need lower < upper and at least one interior node per axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def box(cls, bounds, shape):
        """``bounds`` is flat ``(a1, b1, a2, b2, ...)``."""
        bounds = list(bounds)
        return cls(tuple(bounds[0::2]), tuple(bounds[1::2]), tuple(shape))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def h(self) -> tuple:
        return tuple((b - a) / (n + 1) for a, b, n in zip(self.lower, self.upper, self.shape))

    @property
    def weight(self) -> float:
        return float(np.prod(self.h))

    @property
    def n(self) -> int:
        return int(np.prod(self.shape))

    @property
    def closed_shape(self) -> tuple:
        return tuple(s + 2 for s in self.shape)

    def closed_axes(self) -> list:
        return [a + h * np.arange(n + 2) for a, h, n in zip(self.lower, self.h, self.shape)]

    def interior_axes(self) -> list:
        return [ax[1:-1] for ax in self.closed_axes()]

    def _points(self, axes):
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def interior_points(self) -> np.ndarray:
        return self._points(self.interior_axes())

    def closed_points(self) -> np.ndarray:
        return self._points(self.closed_axes())

    def interior_in_closed(self) -> np.ndarray:
        """Closed-grid flat index of each interior node, in interior order."""
        idx = np.arange(int(np.prod(self.closed_shape))).reshape(self.closed_shape)
        return idx[tuple(slice(1, -1) for _ in self.shape)].ravel()

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.lower, self.upper, tuple((n + 1) * factor - 1 for n in self.shape))


def build_d_op(grid: Grid, fld: fl.PolyVectorField) -> sp.csr_matrix:
    """Exactly antisymmetric difference operator for ``fld`` on the closed grid."""
    if fld.dim != grid.dim:
        raise DimensionMismatch(f"field dim {fld.dim} != grid dim {grid.dim}")
    cshape = grid.closed_shape
    nc = int(np.prod(cshape))
    idx = np.arange(nc).reshape(cshape)
    pts = grid.closed_points()
    rows, cols, vals = [], [], []
    for k, (a_k, h_k) in enumerate(zip(fld.components, grid.h)):
        if not a_k:
            continue
        a = fl.poly_eval(a_k, pts)
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)
        i = idx[tuple(lo)].ravel()
        j = idx[tuple(hi)].ravel()
        v = (a[i] + a[j]) / (4.0 * h_k)
        keep = v != 0.0
        i, j, v = i[keep], j[keep], v[keep]
        rows += [i, j]
        cols += [j, i]
        vals += [v, -v]
    if not rows:
        return sp.csr_matrix((nc, nc))
    d = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nc, nc))
    return d.tocsr()


@dataclass(eq=False)
class DiscreteProblem:
    grid: Grid
    system: fl.VectorFieldSystem
    d_ops: list  # closed-grid antisymmetric D_i
    x_ops: list  # D_i restricted to interior columns
    stiffness: sp.csr_matrix
    p: float
    indices: fl.IndexReport | None = None
    p_range: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def weight(self) -> float:
        return self.grid.weight

    @property
    def r(self):
        return None if self.indices is None else self.indices.metivier_index

    @property
    def Z(self):
        return None if self.indices is None else self.indices.hormander_index

    @cached_property
    def components(self) -> tuple:
        """Connected components of the stiffness graph as index arrays.

        Width-2 stencils decouple parity sublattices; sup-type constants are
        attained on a single component.
        """
        from scipy.sparse.csgraph import connected_components

        ncomp, labels = connected_components(self.stiffness, directed=False)
        comps = [np.flatnonzero(labels == c) for c in range(ncomp)]
        return tuple(sorted(comps, key=lambda c: (-c.size, c[0])))

    def h_matvec(self, u: np.ndarray) -> np.ndarray:
        """``(I + A) u``: the unweighted H-inner-product matrix."""
        return u + self.stiffness @ u


def _check_p(p: float, r: int | None) -> tuple | None:
    if not p > 1:
        raise ExponentOutOfRange(f"p={p} must exceed 1")
    if r is None:
        return None
    try:
        lo, hi = fl.admissible_p_range(r)
    except RIsTooSmall:
        log.info("r=%s <= 2: every p > 1 is subcritical", r)
        return (1.0, float("inf"))
    if not lo < p < hi:
        raise ExponentOutOfRange(f"p={p} outside admissible range ({lo:g}, {hi:g}) for r={r}")
    return (lo, hi)


def assemble(grid: Grid, system: fl.VectorFieldSystem, p: float, samples=None,
             max_len: int = fl.DEFAULT_MAX_LEN, check_definite: bool = True) -> DiscreteProblem:
    if system.dim != grid.dim:
        raise DimensionMismatch(f"system dim {system.dim} != grid dim {grid.dim}")
    if samples is None:
        samples = fl.index_samples(system, grid.closed_axes())
    report = fl.compute_indices(system, samples, max_len=max_len)
    p_range = _check_p(float(p), report.metivier_index)
    d_ops = [build_d_op(grid, f) for f in system.fields]
    inner = grid.interior_in_closed()
    x_ops = [d[:, inner].tocsr() for d in d_ops]
    a = sp.csr_matrix((grid.n, grid.n))
    for b in x_ops:
        a = a + (b.T @ b).tocsr()
    a = ((a + a.T) * 0.5).tocsr()
    a.eliminate_zeros()
    a.sort_indices()
    if (a != a.T).nnz:
        raise AssertionError("stiffness matrix is not exactly symmetric")
    prob = DiscreteProblem(grid, system, d_ops, x_ops, a, float(p), report, p_range)
    if check_definite:
        _assert_definite(a)
    return prob


def _assert_definite(a: sp.csr_matrix):
    try:
        lu = spla.splu(a.tocsc())
    except RuntimeError as exc:
        raise NotPositiveDefinite(f"stiffness matrix is singular: {exc}") from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() <= 1e-10 * piv.max():
        raise NotPositiveDefinite("stiffness matrix is numerically singular")


# -- discrete norms and functionals -------------------------------------------

@dataclass(frozen=True)
class Norms:
    l2_sq: float
    x_sq: float
    h_sq: float
    lp1: float
    lp1_pow: float  # ||u||_{p+1}^{p+1}


def _lp1_pow(prob: DiscreteProblem, u: np.ndarray) -> float:
    return prob.weight * float(np.sum(np.abs(u) ** (prob.p + 1)))


def x_sq(prob: DiscreteProblem, u: np.ndarray) -> float:
    w = prob.weight
    return float(sum(w * float(v @ v) for v in (b @ u for b in prob.x_ops)))


def norms(prob: DiscreteProblem, u: np.ndarray) -> Norms:
    u = np.asarray(u, dtype=float)
    if u.shape != (prob.n,):
        raise DimensionMismatch(f"expected vector of length {prob.n}")
    l2 = prob.weight * float(u @ u)
    xs = x_sq(prob, u)
    s = _lp1_pow(prob, u)
    return Norms(l2, xs, xs + l2, s ** (1.0 / (prob.p + 1)), s)


def functional_J(prob: DiscreteProblem, u: np.ndarray) -> float:
    return 0.5 * x_sq(prob, u) - _lp1_pow(prob, u) / (prob.p + 1)


def functional_I(prob: DiscreteProblem, u: np.ndarray) -> float:
    return x_sq(prob, u) - _lp1_pow(prob, u)


def nonlinearity(prob: DiscreteProblem, u: np.ndarray) -> np.ndarray:
    """Pointwise ``|u|^(p-1) u``."""
    return np.abs(u) ** (prob.p - 1) * u


def ray_scale_root(prob: DiscreteProblem, u: np.ndarray) -> float:
    """Scale ``s*`` with ``I(s* u) = 0``."""
    a = x_sq(prob, u)
    b = _lp1_pow(prob, u)
    if a <= 0.0 or b <= 0.0:
        raise ZeroDirection("direction has zero energy or zero L^{p+1} norm")
    return (a / b) ** (1.0 / (prob.p - 1))


def quotient(prob: DiscreteProblem, u: np.ndarray) -> float:
    """``||u||_{p+1} / ||X u||_2`` (homogeneous of degree zero)."""
    a = x_sq(prob, u)
    if a <= 0.0:
        raise ZeroDirection("direction has zero energy")
    return _lp1_pow(prob, u) ** (1.0 / (prob.p + 1)) / np.sqrt(a)


# -- base shapes for initial data ---------------------------------------------

def sine_product(grid: Grid) -> np.ndarray:
    pts = grid.interior_points()
    out = np.ones(grid.n)
    for k, (a, b) in enumerate(zip(grid.lower, grid.upper)):
        out *= np.sin(np.pi * (pts[:, k] - a) / (b - a))
    return out


def gaussian_bump(grid: Grid, center=None, sigma: float | None = None) -> np.ndarray:
    pts = grid.interior_points()
    lo = np.array(grid.lower)
    hi = np.array(grid.upper)
    c = (lo + hi) / 2 if center is None else np.asarray(center, float)
    s = 0.15 * float(np.min(hi - lo)) if sigma is None else float(sigma)
    return np.exp(-np.sum((pts - c) ** 2, axis=1) / (2 * s * s))


BASE_SHAPES = {"sine_product": sine_product, "gaussian_bump": gaussian_bump}
