"""Polynomial vector fields with exact rational coefficients.

A polynomial is a ``dict`` mapping an exponent tuple to a nonzero
:class:`fractions.Fraction`.  A vector field ``X = sum_k a_k d/dx_k`` is the
tuple of its component polynomials ``(a_1, ..., a_n)``.  Brackets are computed
exactly; only rank evaluation at sample points uses floating point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArtifactError, ConfigError, DimensionMismatch, NotHormander, RIsTooSmall

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

RANK_RTOL = 1e-10
DEFAULT_MAX_LEN = 6

Poly = dict  # exponent tuple -> Fraction


# -- polynomial arithmetic ---------------------------------------------------

def _clean(p: Mapping) -> dict:
    return {e: Fraction(c) for e, c in p.items() if c != 0}


def poly_add(p: Mapping, q: Mapping, scale=1) -> dict:
    out = dict(p)
    for e, c in q.items():
        out[e] = out.get(e, 0) + scale * c
    return _clean(out)


def poly_mul(p: Mapping, q: Mapping) -> dict:
    out: dict = {}
    for (e1, c1), (e2, c2) in itertools.product(p.items(), q.items()):
        e = tuple(a + b for a, b in zip(e1, e2))
        out[e] = out.get(e, 0) + c1 * c2
    return _clean(out)


def poly_diff(p: Mapping, k: int) -> dict:
    out = {}
    for e, c in p.items():
        if e[k] > 0:
            e2 = e[:k] + (e[k] - 1,) + e[k + 1:]
            out[e2] = c * e[k]
    return _clean(out)


def poly_degree(p: Mapping) -> int:
    return max((sum(e) for e in p), default=-1)


def poly_eval(p: Mapping, points: np.ndarray) -> np.ndarray:
    """Evaluate at ``points`` of shape (S, n); returns shape (S,)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(points.shape[0])
    for e, c in p.items():
        term = np.full(points.shape[0], float(c))
        for j, ej in enumerate(e):
            if ej:
                term = term * points[:, j] ** ej
        out += term
    return out


def monomial(exps: Sequence[int], coeff=1) -> dict:
    return _clean({tuple(int(x) for x in exps): Fraction(coeff)})


# -- vector fields -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolyVectorField:
    dim: int
    components: tuple

    def __post_init__(self):
        comps = tuple(_clean(c) for c in self.components)
        if len(comps) != self.dim:
            raise DimensionMismatch(f"expected {self.dim} components, got {len(comps)}")
        for c in comps:
            for e in c:
                if len(e) != self.dim:
                    raise DimensionMismatch(f"exponent {e} has length != {self.dim}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_terms(cls, dim: int, terms: Iterable) -> "PolyVectorField":
        """Build from ``(axis, exponents, coefficient)`` triples, axis 0-based."""
        comps = [dict() for _ in range(dim)]
        for axis, exps, coeff in terms:
            if not 0 <= axis < dim:
                raise DimensionMismatch(f"axis {axis} outside 0..{dim - 1}")
            comps[axis] = poly_add(comps[axis], monomial(exps, Fraction(coeff)))
        return cls(dim, tuple(comps))

    def is_zero(self) -> bool:
        return all(not c for c in self.components)

    def apply(self, f: Mapping) -> dict:
        """Directional derivative ``X(f) = sum_k a_k d_k f``."""
        out: dict = {}
        for k, a in enumerate(self.components):
            if a:
                out = poly_add(out, poly_mul(a, poly_diff(f, k)))
        return out

    def divergence(self) -> dict:
        out: dict = {}
        for k, a in enumerate(self.components):
            out = poly_add(out, poly_diff(a, k))
        return out

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Coefficient vectors at ``points``; shape (S, dim)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.stack([poly_eval(a, points) for a in self.components], axis=1)

    def key(self) -> tuple:
        return tuple(tuple(sorted(c.items())) for c in self.components)

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.dim == other.dim and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __neg__(self):
        return PolyVectorField(self.dim, tuple({e: -c for e, c in a.items()} for a in self.components))

    def __add__(self, other):
        _check_dims(self, other)
        return PolyVectorField(self.dim, tuple(poly_add(a, b) for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        _check_dims(self, other)
        return PolyVectorField(self.dim, tuple(poly_add(a, b, -1) for a, b in zip(self.components, other.components)))

    def __repr__(self):
        names = [f"x{i + 1}" for i in range(self.dim)]
        parts = []
        for k, a in enumerate(self.components):
            if a:
                parts.append(f"({_poly_str(a, names)})*d{names[k]}")
        return "PolyVectorField(" + (" + ".join(parts) or "0") + ")"


def _poly_str(p, names):
    terms = []
    for e, c in sorted(p.items()):
        mono = "*".join(f"{n}^{k}" if k > 1 else n for n, k in zip(names, e) if k)
        terms.append(f"{c}" + (f"*{mono}" if mono else ""))
    return " + ".join(terms)


def _check_dims(a: PolyVectorField, b: PolyVectorField):
    if a.dim != b.dim:
        raise DimensionMismatch(f"fields of dimension {a.dim} and {b.dim}")


def lie_bracket(a: PolyVectorField, b: PolyVectorField) -> PolyVectorField:
    """Commutator ``[a, b]`` with components ``a(b_k) - b(a_k)``."""
    _check_dims(a, b)
    comps = tuple(poly_add(a.apply(bk), b.apply(ak), -1) for ak, bk in zip(a.components, b.components))
    return PolyVectorField(a.dim, comps)


@dataclass(frozen=True)
class VectorFieldSystem:
    dim: int
    fields: tuple
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 2:
            raise DimensionMismatch("field systems need dim >= 2")
        object.__setattr__(self, "fields", tuple(self.fields))
        for i, f in enumerate(self.fields):
            if f.dim != self.dim:
                raise DimensionMismatch(f"field {i} has dim {f.dim}, system has {self.dim}")
            if f.divergence():
                raise ValueError(f"field {i} of {self.name!r} is not divergence-free, so not skew-adjoint")

    @property
    def m(self) -> int:
        return len(self.fields)


# -- bundled systems -----------------------------------------------------------

def _unit(dim, k):
    e = [0] * dim
    return (k, e, 1)


def laplacian(dim: int = 2) -> VectorFieldSystem:
    fields = [PolyVectorField.from_terms(dim, [_unit(dim, k)]) for k in range(dim)]
    return VectorFieldSystem(dim, fields, name="laplacian")


def grushin() -> VectorFieldSystem:
    """``(d_x, x d_y)`` on the plane."""
    x1 = PolyVectorField.from_terms(2, [(0, (0, 0), 1)])
    x2 = PolyVectorField.from_terms(2, [(1, (1, 0), 1)])
    return VectorFieldSystem(2, [x1, x2], name="grushin")


def heisenberg() -> VectorFieldSystem:
    """``d_x - (y/2) d_z`` and ``d_y + (x/2) d_z`` on R^3."""
    x1 = PolyVectorField.from_terms(3, [(0, (0, 0, 0), 1), (2, (0, 1, 0), Fraction(-1, 2))])
    x2 = PolyVectorField.from_terms(3, [(1, (0, 0, 0), 1), (2, (1, 0, 0), Fraction(1, 2))])
    return VectorFieldSystem(3, [x1, x2], name="heisenberg")


BUILTIN = {"laplacian": laplacian, "grushin": grushin, "heisenberg": heisenberg}


def builtin_system(name: str, dim: int | None = None) -> VectorFieldSystem:
    if name not in BUILTIN:
        raise KeyError(f"unknown field family {name!r}; choose from {sorted(BUILTIN)}")
    if name == "laplacian":
        return laplacian(dim or 2)
    sys = BUILTIN[name]()
    if dim is not None and dim != sys.dim:
        raise DimensionMismatch(f"{name} fields live in dimension {sys.dim}, not {dim}")
    return sys


def parse_field_spec(text: str) -> VectorFieldSystem:
    """Parse the field-spec text format.

    Either ``builtin = "grushin"`` (plus ``dim`` for the Laplacian) or ``dim``
    with one ``[[field]]`` table per vector field whose ``terms`` list holds
    ``[axis, [exponents...], "coefficient"]`` triples.  Axes are 1-based and
    coefficients are rationals written as strings (``"-1/2"``) or integers.
    """
    data = tomllib.loads(text)
    if "builtin" in data:
        return builtin_system(data["builtin"], data.get("dim"))
    dim = int(data["dim"])
    fields = []
    for entry in data.get("field", []):
        terms = [(int(axis) - 1, tuple(exps), Fraction(str(coeff))) for axis, exps, coeff in entry["terms"]]
        fields.append(PolyVectorField.from_terms(dim, terms))
    if not fields:
        raise ValueError("field spec defines no fields")
    return VectorFieldSystem(dim, fields, name=str(data.get("name", "custom")))


def format_field_spec(sys: VectorFieldSystem) -> str:
    lines = [f'name = "{sys.name}"', f"dim = {sys.dim}"]
    for f in sys.fields:
        lines.append("")
        lines.append("[[field]]")
        terms = []
        for k, a in enumerate(f.components):
            for e, c in sorted(a.items()):
                terms.append(f'[{k + 1}, [{", ".join(map(str, e))}], "{c}"]')
        lines.append("terms = [" + ", ".join(terms) + "]")
    return "\n".join(lines) + "\n"


def load_field_system(spec: str, dim: int | None = None) -> VectorFieldSystem:
    """Resolve a builtin family name or a path to a field-spec file."""
    if spec in BUILTIN:
        return builtin_system(spec, dim)
    text = Path(spec).read_text()
    try:
        return parse_field_spec(text)
    except ArtifactError:
        raise
    except (ValueError, KeyError, TypeError) as exc:  # includes TOML decode errors
        raise ConfigError(f"field spec {spec}: {exc}") from exc


# -- indices -------------------------------------------------------------------

@dataclass
class IndexReport:
    hormander_index: int
    metivier_index: int
    pointwise_v: dict
    satisfied: bool
    max_bracket_length_searched: int
    unsatisfied_points: list = field(default_factory=list)


def _span_ranks(vectors: np.ndarray) -> np.ndarray:
    # vectors: (S, count, n)
    s = np.linalg.svd(vectors, compute_uv=False)
    floor = np.maximum(s[:, :1], 1.0)
    return np.sum(s > RANK_RTOL * floor, axis=1)


def bracket_levels(sys: VectorFieldSystem, max_len: int):
    """Yield, for ``l = 1..max_len``, the distinct nonzero brackets of length l.

    Brackets are right-nested ``[X_i1, [X_i2, ... X_il]]``.
    """
    level = list(dict.fromkeys(f for f in sys.fields if not f.is_zero()))
    for l in range(1, max_len + 1):
        yield l, level
        nxt = []
        seen = set()
        for x in sys.fields:
            for b in level:
                c = lie_bracket(x, b)
                if not c.is_zero() and c not in seen:
                    seen.add(c)
                    nxt.append(c)
        level = nxt


def compute_indices(sys: VectorFieldSystem, samples, max_len: int = DEFAULT_MAX_LEN,
                    strict: bool = True) -> IndexReport:
    """Hörmander index ``Z`` and generalized Métivier index ``r`` over ``samples``.

    ``v_l(x)`` is the numerical rank of all brackets of length ``<= l`` at
    ``x`` and ``v(x) = sum_l l (v_l(x) - v_{l-1}(x))``.  With ``strict`` a
    sample that never reaches rank ``dim`` raises :class:`NotHormander`.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one sample point")
    if pts.shape[1] != sys.dim:
        raise DimensionMismatch(f"samples have dim {pts.shape[1]}, system has {sys.dim}")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    n = sys.dim
    S = pts.shape[0]
    ranks = np.zeros((S, max_len + 1), dtype=int)
    z_point = np.zeros(S, dtype=int)
    done = np.zeros(S, dtype=bool)
    evaluated = []
    searched = 0
    for l, level in bracket_levels(sys, max_len):
        searched = l
        evaluated.extend(x.evaluate(pts) for x in level)
        todo = ~done
        if evaluated:
            stack = np.stack(evaluated, axis=1)[todo]
            ranks[todo, l] = _span_ranks(stack)
        ranks[done, l] = n
        newly = todo & (ranks[:, l] == n)
        z_point[newly] = l
        done |= newly
        if done.all() or not level:
            break
    ranks = ranks[:, : searched + 1]
    top = np.where(done, z_point, searched)
    v = np.zeros(S, dtype=int)
    for l in range(1, searched + 1):
        active = l <= top
        v[active] += l * (ranks[active, l] - ranks[active, l - 1])
    bad = np.flatnonzero(~done)
    if strict and bad.size:
        i = bad[0]
        raise NotHormander(pts[i], int(ranks[i, -1]), n, searched)
    pointwise = {tuple(float(c) for c in p): int(val) for p, val in zip(pts, v)}
    return IndexReport(
        hormander_index=int(z_point.max()) if done.any() else searched,
        metivier_index=int(v.max()),
        pointwise_v=pointwise,
        satisfied=bool(done.all()),
        max_bracket_length_searched=searched,
        unsatisfied_points=[tuple(map(float, pts[i])) for i in bad],
    )


def index_samples(sys: VectorFieldSystem, axes: Sequence[np.ndarray]) -> np.ndarray:
    """Grid nodes plus coefficient zero sets along every grid line.

    ``axes[k]`` holds the node coordinates along axis k (boundary included).
    For each coefficient polynomial and each axis it depends on, the real roots
    of its restriction to every grid line parallel to that axis are added, so
    degenerate sets such as the Grushin line ``x = 0`` are always sampled.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, sys.dim)
    extra = []
    polys = {tuple(sorted(c.items())): c for f in sys.fields for c in f.components if poly_degree(c) >= 1}
    for c in polys.values():
        for j in range(sys.dim):
            deg_j = max(e[j] for e in c)
            if deg_j == 0:
                continue
            others = [axes[i] for i in range(sys.dim) if i != j]
            lines = np.stack(np.meshgrid(*others, indexing="ij"), axis=-1).reshape(-1, sys.dim - 1)
            full = np.insert(lines, j, 0.0, axis=1)
            coeffs = np.zeros((lines.shape[0], deg_j + 1))
            for e, a in c.items():
                term = np.full(lines.shape[0], float(a))
                for i, ei in enumerate(e):
                    if i != j and ei:
                        term = term * full[:, i] ** ei
                coeffs[:, deg_j - e[j]] += term
            lo, hi = axes[j].min(), axes[j].max()
            for row, base in zip(coeffs, full):
                nz = np.flatnonzero(np.abs(row) > 0)
                if nz.size == 0 or nz[0] == deg_j:
                    continue  # identically zero on the line, or a nonzero constant
                for root in np.roots(row[nz[0]:]):
                    if abs(root.imag) < 1e-12 and lo - 1e-12 <= root.real <= hi + 1e-12:
                        pt = base.copy()
                        pt[j] = 0.0 if abs(root.real) < 1e-14 else root.real
                        extra.append(pt)
    if extra:
        mesh = np.concatenate([mesh, np.array(extra)])
    return np.unique(np.round(mesh, 14), axis=0)


def admissible_p_range(r: int) -> tuple:
    """Open interval ``(1, (r + 2) / (r - 2))`` of admissible exponents."""
    if r <= 2:
        raise RIsTooSmall(f"generalized Métivier index r={r} must exceed 2")
    return (1.0, (r + 2) / (r - 2))


def check_noncharacteristic(sys: VectorFieldSystem, boundary_samples) -> tuple:
    """Return ``(ok, margin)`` with margin ``min_x max_i |X_i(x) . normal(x)|``."""
    margin = np.inf
    for point, normal in boundary_samples:
        pt = np.asarray(point, dtype=float)[None, :]
        nrm = np.asarray(normal, dtype=float)
        best = max(abs(float(f.evaluate(pt)[0] @ nrm)) for f in sys.fields)
        margin = min(margin, best)
    return bool(margin > RANK_RTOL), float(margin)


def box_boundary_samples(lower, upper, per_axis: int = 5) -> list:
    """Points on the faces of a box (corners excluded) with outward unit normals."""
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    n = lower.size
    out = []
    for k in range(n):
        others = [np.linspace(lower[i], upper[i], per_axis + 2)[1:-1] for i in range(n) if i != k]
        for combo in itertools.product(*others):
            for side, val in ((-1.0, lower[k]), (1.0, upper[k])):
                pt = list(combo)
                pt.insert(k, val)
                normal = np.zeros(n)
                normal[k] = side
                out.append((np.array(pt), normal))
    return out
