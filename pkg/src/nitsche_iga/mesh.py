"""Elements, connectivity, refinement, face traces and geometry inversion."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPatchError, InversionError
from .spline_core import (
    KnotVector,
    NurbsPatch,
    eval_geometry,
    find_span,
    local_ien,
)

_DIR_NAMES = ("xi", "eta", "zeta")


@dataclass(frozen=True)
class Element:
    """One non-degenerate knot-span box of a patch.

    ``bounds`` has shape ``(d_p, 2)``; ``ien`` lists the global basis
    indices of the ``prod(p_d + 1)`` local functions, first direction fastest.
    """

    patch_id: int
    index: int
    spans: tuple[int, ...]
    bounds: np.ndarray
    ien: np.ndarray

    @property
    def measure(self) -> float:
        return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))


def element_grid(patch: NurbsPatch) -> tuple[np.ndarray, ...]:
    """Non-degenerate span indices per direction."""
    return tuple(kv.spans() for kv in patch.knot_vectors)


def build_elements(patch: NurbsPatch, patch_id: int = 0) -> list[Element]:
    """All elements of ``patch``, numbered with the first direction fastest."""
    grid = element_grid(patch)
    elements = []
    # itertools.product varies the last factor fastest, so reverse the directions
    for idx, combo in enumerate(itertools.product(*reversed(grid))):
        spans = tuple(int(s) for s in reversed(combo))
        bounds = np.array(
            [[kv.knots[s], kv.knots[s + 1]] for kv, s in zip(patch.knot_vectors, spans)]
        )
        elements.append(Element(patch_id, idx, spans, bounds, local_ien(patch, spans)))
    return elements


def num_elements(patch: NurbsPatch) -> int:
    return int(np.prod([g.size for g in element_grid(patch)]))


def locate_element(patch: NurbsPatch, pt) -> int:
    """Id of the element whose parameter box contains ``pt``.

    On an interior knot the element on the + side wins; at the last knot the
    last element is returned.
    """
    grid = element_grid(patch)
    eid, stride = 0, 1
    for kv, g, x in zip(patch.knot_vectors, grid, np.atleast_1d(pt)):
        s = find_span(kv, float(x))
        eid += int(np.searchsorted(g, s)) * stride
        stride *= g.size
    return eid


# ---------------------------------------------------------------------------
# refinement


def _insert_along(Pw: np.ndarray, kv: KnotVector, u: float, axis: int):
    """Single knot insertion (Boehm) on homogeneous control net along ``axis``."""
    p = kv.degree
    U = kv.knots
    k = find_span(kv, u)
    Pw = np.moveaxis(Pw, axis, 0)
    n = Pw.shape[0]
    Q = np.empty((n + 1,) + Pw.shape[1:])
    Q[: k - p + 1] = Pw[: k - p + 1]
    Q[k + 1:] = Pw[k:]
    for i in range(k - p + 1, k + 1):
        a = (u - U[i]) / (U[i + p] - U[i])
        Q[i] = a * Pw[i] + (1.0 - a) * Pw[i - 1]
    new_kv = KnotVector(np.insert(U, k + 1, u), p)
    return np.moveaxis(Q, 0, axis), new_kv


def _homogeneous(patch: NurbsPatch) -> np.ndarray:
    w = patch.weight_net()[..., None]
    return np.concatenate([patch.control_net() * w, w], axis=-1)


def _from_homogeneous(kvs, Pw: np.ndarray) -> NurbsPatch:
    w = Pw[..., -1]
    return NurbsPatch(kvs, Pw[..., :-1] / w[..., None], w)


def insert_knots(patch: NurbsPatch, direction: int, values) -> NurbsPatch:
    """Insert each knot in ``values`` once along ``direction``; geometry is unchanged."""
    kvs = list(patch.knot_vectors)
    Pw = _homogeneous(patch)
    for u in values:
        Pw, kvs[direction] = _insert_along(Pw, kvs[direction], float(u), direction)
    return _from_homogeneous(kvs, Pw)


def refine_bisect(patch: NurbsPatch, times: int = 1) -> NurbsPatch:
    """Split every knot span at its midpoint, ``times`` times, in all directions."""
    if times < 0:
        raise ValueError("times must be non-negative")
    for _ in range(times):
        for d, kv in enumerate(patch.knot_vectors):
            b = kv.breaks()
            patch = insert_knots(patch, d, 0.5 * (b[:-1] + b[1:]))
    return patch


def elevate_degree(patch: NurbsPatch, direction: int, times: int = 1) -> NurbsPatch:
    """Raise the degree along ``direction`` by ``times``, keeping continuity.

    Every distinct knot gains multiplicity ``times``. The elevated space
    contains the original one, so the homogeneous control net is recovered
    exactly by collocation at the new Greville abscissae.
    """
    if times == 0:
        return patch
    kv = patch.knot_vectors[direction]
    breaks, mult = np.unique(kv.knots, return_counts=True)
    new_kv = KnotVector(np.repeat(breaks, mult + times), kv.degree + times)
    g = new_kv.greville()
    A_new = _collocation(new_kv, g)
    A_old = _collocation(kv, g)
    Pw = np.moveaxis(_homogeneous(patch), direction, 0)
    shp = Pw.shape
    rhs = A_old @ Pw.reshape(shp[0], -1)
    Qw = np.linalg.solve(A_new, rhs).reshape((new_kv.num_basis,) + shp[1:])
    kvs = list(patch.knot_vectors)
    kvs[direction] = new_kv
    return _from_homogeneous(kvs, np.moveaxis(Qw, 0, direction))


def _collocation(kv: KnotVector, pts: np.ndarray) -> np.ndarray:
    from .spline_core import basis_and_derivs

    M = np.zeros((pts.size, kv.num_basis))
    spans = find_span(kv, pts)
    vals = basis_and_derivs(kv, pts, 0)[:, 0, :]
    for r, (s, v) in enumerate(zip(spans, vals)):
        M[r, s - kv.degree: s + 1] = v
    return M


def elevate_to(patch: NurbsPatch, degree: int) -> NurbsPatch:
    """Elevate every direction to ``degree`` (no-op where already equal)."""
    for d, p in enumerate(patch.degrees):
        if p > degree:
            raise InvalidPatchError(f"cannot lower degree {p} to {degree}")
        patch = elevate_degree(patch, d, degree - p)
    return patch


# ---------------------------------------------------------------------------
# faces and traces


@dataclass(frozen=True)
class Face:
    """Parametric boundary ``direction = min`` (side 0) or ``max`` (side 1)."""

    direction: int
    side: int

    @classmethod
    def parse(cls, name) -> "Face":
        if isinstance(name, Face):
            return name
        m = re.fullmatch(r"(xi|eta|zeta)_(min|max)", str(name))
        if not m:
            raise ValueError(f"unknown face {name!r}; expected e.g. 'xi_max'")
        return cls(_DIR_NAMES.index(m.group(1)), int(m.group(2) == "max"))

    @property
    def name(self) -> str:
        return f"{_DIR_NAMES[self.direction]}_{'max' if self.side else 'min'}"

    def value(self, patch: NurbsPatch) -> float:
        kv = patch.knot_vectors[self.direction]
        return kv.end if self.side else kv.start

    def free_directions(self, patch: NurbsPatch) -> tuple[int, ...]:
        return tuple(d for d in range(patch.dim_param) if d != self.direction)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class TraceElement:
    """Boundary element: ``bounds`` over the face's free directions."""

    bounds: np.ndarray
    parent: int


@dataclass(frozen=True)
class TraceMesh:
    patch_id: int
    face: Face
    free_directions: tuple[int, ...]
    elements: list

    def measure(self) -> float:
        return float(sum(np.prod(e.bounds[:, 1] - e.bounds[:, 0]) for e in self.elements))


def trace_of_face(patch: NurbsPatch, face, patch_id: int = 0) -> TraceMesh:
    """Trace mesh of the elements adjacent to a parametric boundary face."""
    if not isinstance(face, Face):
        face = Face.parse(face)
    if not 0 <= face.direction < patch.dim_param or face.side not in (0, 1):
        raise ValueError(f"face {face} is not a boundary of a {patch.dim_param}D patch")
    grid = element_grid(patch)
    strides = np.cumprod([1] + [g.size for g in grid[:-1]])
    fixed_pos = grid[face.direction].size - 1 if face.side else 0
    free = face.free_directions(patch)
    out = []
    for combo in itertools.product(*(range(grid[d].size) for d in reversed(free))):
        pos = dict(zip(reversed(free), combo))
        pos[face.direction] = fixed_pos
        eid = int(sum(pos[d] * strides[d] for d in range(patch.dim_param)))
        bounds = np.array(
            [
                [patch.knot_vectors[d].knots[grid[d][pos[d]]],
                 patch.knot_vectors[d].knots[grid[d][pos[d]] + 1]]
                for d in free
            ]
        ).reshape(len(free), 2)
        out.append(TraceElement(bounds, eid))
    return TraceMesh(patch_id, face, free, out)


def face_point(patch: NurbsPatch, face: Face, free_coords) -> np.ndarray:
    """Full parameter point from coordinates along the face's free directions."""
    pt = np.empty(patch.dim_param)
    pt[face.direction] = face.value(patch)
    for d, c in zip(face.free_directions(patch), np.atleast_1d(free_coords)):
        pt[d] = c
    return pt


# ---------------------------------------------------------------------------
# inversion


def inverse_map(
    patch: NurbsPatch,
    x,
    seed=None,
    tol: float = 1e-10,
    max_iter: int = 30,
) -> np.ndarray:
    """Parameter point whose image is ``x`` (Newton on ``x - V(xi)``).

    Iterates are clamped to the knot box. Convergence means
    ``|V(xi) - x| < tol * diag`` with ``diag`` the control-net bounding box
    diagonal. Raises :class:`InversionError` otherwise.
    """
    x = np.asarray(x, dtype=float)
    bounds = patch.param_bounds
    pt = patch.center() if seed is None else np.array(seed, dtype=float)
    pt = np.clip(pt, bounds[:, 0], bounds[:, 1])
    scale = tol * patch.bounding_box_diagonal()
    res_norm = np.inf
    for _ in range(max_iter + 1):
        xp, jac = eval_geometry(patch, pt)
        res = x - xp
        res_norm = float(np.linalg.norm(res))
        if res_norm < scale:
            return pt
        if jac.shape[0] == jac.shape[1]:
            try:
                cond = np.linalg.cond(jac)
            except np.linalg.LinAlgError:
                cond = np.inf
            if not np.isfinite(cond) or cond > 1e14:
                raise InversionError(
                    f"singular Jacobian at {pt.tolist()}", residual=res_norm, singular=True
                )
            step = np.linalg.solve(jac, res)
        else:
            step, *_ = np.linalg.lstsq(jac, res, rcond=None)
        new = np.clip(pt + step, bounds[:, 0], bounds[:, 1])
        if np.allclose(new, pt, rtol=0.0, atol=1e-15 * (1.0 + np.abs(pt).max())):
            # clamped at the boundary with a non-zero residual: x is outside
            break
        pt = new
    raise InversionError(
        f"no convergence inverting {x.tolist()} (residual {res_norm:.3e})", residual=res_norm
    )


# ---------------------------------------------------------------------------
# simple geometry


def uniform_knots(nel: int, degree: int) -> KnotVector:
    """Open knot vector on ``[0, 1]`` with ``nel`` equal spans and single interior knots."""
    inner = np.linspace(0.0, 1.0, nel + 1)[1:-1]
    return KnotVector(np.concatenate([[0.0] * (degree + 1), inner, [1.0] * (degree + 1)]), degree)


def box_patch(lower, upper, nel, degree) -> NurbsPatch:
    """Axis-aligned box ``[lower, upper]`` with ``nel`` uniform elements per direction.

    Control points sit at the Greville abscissae, so the map is affine and
    reproduces the box exactly for any degree.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    dim = lower.size
    nel = np.broadcast_to(nel, (dim,))
    degree = np.broadcast_to(degree, (dim,))
    kvs = [uniform_knots(int(n), int(p)) for n, p in zip(nel, degree)]
    axes = [lo + (hi - lo) * kv.greville() for lo, hi, kv in zip(lower, upper, kvs)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if dim == 1:
        grid = grid.reshape(-1, 1)
    return NurbsPatch(kvs, grid)
