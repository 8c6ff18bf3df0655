"""B-spline / NURBS basis evaluation and the parent -> parameter -> physical
mapping chain for tensor-product patches of parametric dimension 1 to 3.

Conventions
-----------
All indices are 0-based. A control point with lattice index ``(i, j, k)``
has global index ``A = i + n*j + n*m*k`` (first direction fastest), which is
the 0-based form of the usual ``A = (n m)(k-1) + n(j-1) + i``. The same
ordering is used for the local basis functions of an element.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateElementError, DomainError, InvalidPatchError

# relative slack allowed when a parameter is a rounding error outside the range
_RANGE_TOL = 1e-12


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector of degree ``degree``.

    Parameters
    ----------
    knots : array_like
        Non-decreasing knot values, length ``num_basis + degree + 1``.
    degree : int
        Polynomial degree ``p >= 0``.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).copy()
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        p = int(self.degree)
        object.__setattr__(self, "degree", p)
        if p < 0:
            raise InvalidPatchError(f"degree must be non-negative, got {p}")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise InvalidPatchError(
                f"knot vector of degree {p} needs at least {2 * (p + 1)} knots"
            )
        if np.any(np.diff(knots) < 0):
            raise InvalidPatchError("knots must be non-decreasing")
        if not np.all(knots[: p + 1] == knots[0]) or knots[p + 1] == knots[0]:
            raise InvalidPatchError("first knot must be repeated exactly p+1 times")
        if not np.all(knots[-(p + 1):] == knots[-1]) or knots[-(p + 2)] == knots[-1]:
            raise InvalidPatchError("last knot must be repeated exactly p+1 times")
        _, counts = np.unique(knots, return_counts=True)
        if np.any(counts > p + 1):
            raise InvalidPatchError("knot multiplicity exceeds p+1")

    @property
    def num_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def start(self) -> float:
        return float(self.knots[0])

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    def spans(self) -> np.ndarray:
        """Indices ``i`` of the non-degenerate spans ``[knots[i], knots[i+1])``."""
        idx = np.nonzero(np.diff(self.knots) > 0)[0]
        return idx

    def breaks(self) -> np.ndarray:
        """Distinct knot values."""
        return np.unique(self.knots)

    def multiplicity(self, value: float) -> int:
        # exact comparison on purpose: knots are user input, not computed
        return int(np.count_nonzero(self.knots == value))

    def greville(self) -> np.ndarray:
        """Greville abscissae (knot averages), one per basis function."""
        p = self.degree
        if p == 0:
            return 0.5 * (self.knots[:-1] + self.knots[1:])
        csum = np.cumsum(np.concatenate([[0.0], self.knots]))
        return (csum[p + 1: p + 1 + self.num_basis] - csum[1: 1 + self.num_basis]) / p

    def find_span(self, xi):
        return find_span(self, xi)

    def basis_and_derivs(self, xi, max_order: int = 0):
        return basis_and_derivs(self, xi, max_order)


def _check_range(kv: KnotVector, xi: np.ndarray) -> np.ndarray:
    lo, hi = kv.start, kv.end
    tol = _RANGE_TOL * (hi - lo)
    if np.any(xi < lo - tol) or np.any(xi > hi + tol):
        bad = xi[(xi < lo - tol) | (xi > hi + tol)]
        raise DomainError(f"parameter {bad.ravel()[0]!r} outside knot range [{lo}, {hi}]")
    return np.clip(xi, lo, hi)


def find_span(kv: KnotVector, xi):
    """Index ``i`` with ``knots[i] <= xi < knots[i+1]``.

    At the last knot the last non-degenerate span is returned. Accepts a
    scalar or an array of parameters.
    """
    arr = np.asarray(xi, dtype=float)
    arr = _check_range(kv, arr)
    n = kv.num_basis
    span = np.searchsorted(kv.knots, arr, side="right") - 1
    span = np.clip(span, kv.degree, n - 1)
    if span.ndim == 0:
        return int(span)
    return span


def _ders_basis(knots: np.ndarray, p: int, span, xi: np.ndarray, nders: int) -> np.ndarray:
    """Non-zero basis functions and derivatives, vectorized over ``xi``.

    ``span`` is a scalar or an array broadcastable to ``xi``. Returns an
    array of shape ``(npts, nders + 1, p + 1)``.
    """
    xi = np.atleast_1d(xi).astype(float)
    npts = xi.size
    span = np.broadcast_to(np.asarray(span), (npts,))
    ndu = np.empty((npts, p + 1, p + 1))
    left = np.empty((npts, p + 1))
    right = np.empty((npts, p + 1))
    ndu[:, 0, 0] = 1.0
    for j in range(1, p + 1):
        left[:, j] = xi - knots[span + 1 - j]
        right[:, j] = knots[span + j] - xi
        saved = np.zeros(npts)
        for r in range(j):
            # lower triangle stores knot differences
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((npts, nders + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    top = min(nders, p)
    a = np.empty((npts, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:, 0, 0] = 1.0
        for k in range(1, top + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, top + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return ders


def basis_and_derivs(kv: KnotVector, xi, max_order: int = 0) -> np.ndarray:
    """Values and derivatives of the ``p+1`` basis functions non-zero at ``xi``.

    Returns ``ders`` of shape ``(max_order + 1, p + 1)`` where ``ders[k, r]``
    is the k-th derivative of basis ``find_span(kv, xi) - p + r``. For an
    array ``xi`` a leading point axis is added.
    """
    if max_order < 0:
        raise ValueError(f"max_order must be non-negative, got {max_order}")
    scalar = np.ndim(xi) == 0
    span = find_span(kv, xi)
    arr = _check_range(kv, np.atleast_1d(np.asarray(xi, dtype=float)))
    ders = _ders_basis(kv.knots, kv.degree, span, arr, max_order)
    return ders[0] if scalar else ders


class NurbsPatch:
    """Tensor-product NURBS patch.

    Parameters
    ----------
    knot_vectors : sequence of KnotVector
        One per parametric direction (1, 2 or 3).
    control_points : array_like
        Either a flat ``(ncp, d_s)`` array in global-index order or a lattice
        of shape ``(n[, m[, l]], d_s)``.
    weights : array_like, optional
        Positive weights, flat or lattice shaped. Defaults to all ones.
    """

    def __init__(self, knot_vectors: Sequence[KnotVector], control_points, weights=None):
        kvs = tuple(knot_vectors)
        if not 1 <= len(kvs) <= 3:
            raise InvalidPatchError("a patch has 1, 2 or 3 parametric directions")
        self.knot_vectors = kvs
        self.shape = tuple(kv.num_basis for kv in kvs)
        ncp = int(np.prod(self.shape))
        pts = np.asarray(control_points, dtype=float)
        if pts.ndim == len(kvs) + 1 and pts.shape[:-1] == self.shape and len(kvs) > 1:
            pts = pts.reshape(ncp, pts.shape[-1], order="F")
        if pts.ndim != 2 or pts.shape[0] != ncp:
            raise InvalidPatchError(
                f"control net has {pts.shape[0] if pts.ndim else 0} points, expected {ncp} for shape {self.shape}"
            )
        if pts.shape[1] not in (1, 2, 3) or pts.shape[1] < len(kvs):
            raise InvalidPatchError(f"unsupported spatial dimension {pts.shape[1]}")
        if weights is None:
            w = np.ones(ncp)
        else:
            w = np.asarray(weights, dtype=float)
            w = w.reshape(ncp, order="F") if w.ndim > 1 else w
        if w.shape != (ncp,):
            raise InvalidPatchError(f"expected {ncp} weights, got {w.size}")
        bad = np.nonzero(~(w > 0))[0]
        if bad.size:
            raise InvalidPatchError(
                f"weight of control point {int(bad[0])} is {w[bad[0]]!r}; weights must be positive"
            )
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        self.control_points = pts
        self.weights = w

    @property
    def dim_param(self) -> int:
        return len(self.knot_vectors)

    @property
    def dim_space(self) -> int:
        return self.control_points.shape[1]

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.knot_vectors)

    @property
    def num_control_points(self) -> int:
        return self.control_points.shape[0]

    @property
    def param_bounds(self) -> np.ndarray:
        return np.array([[kv.start, kv.end] for kv in self.knot_vectors])

    def control_net(self) -> np.ndarray:
        return self.control_points.reshape(self.shape + (self.dim_space,), order="F")

    def weight_net(self) -> np.ndarray:
        return self.weights.reshape(self.shape, order="F")

    def global_index(self, lattice) -> int:
        """0-based global index of a lattice index tuple."""
        a, stride = 0, 1
        for i, n in zip(lattice, self.shape):
            a += int(i) * stride
            stride *= n
        return a

    def bounding_box_diagonal(self) -> float:
        pts = self.control_points
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def center(self) -> np.ndarray:
        return self.param_bounds.mean(axis=1)

    def __repr__(self):
        return (
            f"NurbsPatch(degrees={self.degrees}, shape={self.shape}, dim_space={self.dim_space})"
        )


def local_ien(patch: NurbsPatch, spans: Sequence[int]) -> np.ndarray:
    """Global indices of the basis functions non-zero on the given spans,
    in local order (first direction fastest)."""
    idx = np.zeros(1, dtype=np.int64)
    stride = 1
    for kv, s, n in zip(patch.knot_vectors, spans, patch.shape):
        g = np.arange(s - kv.degree, s + 1) * stride
        # first direction fastest: each new direction is the outer axis
        idx = (g[:, None] + idx[None, :]).ravel()
        stride *= n
    return idx


def tensor_basis(patch: NurbsPatch, spans: Sequence[int], params: np.ndarray, nders: int = 1):
    """Rational basis on one element for many points.

    Parameters
    ----------
    spans : per-direction span indices (all points must lie in this element)
    params : ``(npts, d_p)`` parameter coordinates

    Returns
    -------
    ien : ``(nen,)`` global basis indices
    R : ``(npts, nen)`` rational basis values
    dR : ``(npts, d_p, nen)`` first parametric derivatives (only if ``nders >= 1``)
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    npts, dp = params.shape
    ders = [
        _ders_basis(kv.knots, kv.degree, s, params[:, d], nders)
        for d, (kv, s) in enumerate(zip(patch.knot_vectors, spans))
    ]
    # tensor product, first direction fastest -> later directions are outer axes
    N = ders[0][:, 0, :]
    dN = [ders[0][:, 1, :]] if nders else []
    for d in range(1, dp):
        val = ders[d][:, 0, :]
        N_new = (val[:, :, None] * N[:, None, :]).reshape(npts, -1)
        if nders:
            dN = [(val[:, :, None] * g[:, None, :]).reshape(npts, -1) for g in dN]
            dN.append((ders[d][:, 1, :][:, :, None] * N[:, None, :]).reshape(npts, -1))
        N = N_new
    ien = local_ien(patch, spans)
    w = patch.weights[ien]
    Nw = N * w
    W = Nw.sum(axis=1)
    R = Nw / W[:, None]
    if not nders:
        return ien, R
    dN = np.stack(dN, axis=1)  # (npts, dp, nen)
    dNw = dN * w
    dW = dNw.sum(axis=2)
    dR = (dNw - R[:, None, :] * dW[:, :, None]) / W[:, None, None]
    return ien, R, dR


def _spans_of(patch: NurbsPatch, pt: np.ndarray) -> tuple[int, ...]:
    return tuple(find_span(kv, x) for kv, x in zip(patch.knot_vectors, pt))


def as_point(patch: NurbsPatch, pt) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(pt, dtype=float))
    if pt.shape != (patch.dim_param,):
        raise ValueError(f"expected a point with {patch.dim_param} coordinates, got {pt.shape}")
    return np.array([np.clip(x, kv.start, kv.end) if abs(x - np.clip(x, kv.start, kv.end))
                     <= _RANGE_TOL * (kv.end - kv.start) else x
                     for x, kv in zip(pt, patch.knot_vectors)])


def rational_basis(patch: NurbsPatch, pt):
    """Non-zero rational basis values at one parameter point.

    Returns ``(ien, R, dR)`` with ``R`` of shape ``(nen,)`` and ``dR`` of
    shape ``(d_p, nen)``.
    """
    pt = as_point(patch, pt)
    spans = _spans_of(patch, pt)
    ien, R, dR = tensor_basis(patch, spans, pt[None, :], nders=1)
    return ien, R[0], dR[0]


def eval_geometry(patch: NurbsPatch, pt):
    """Physical point and parametric Jacobian ``dx/dxi`` of shape ``(d_s, d_p)``."""
    ien, R, dR = rational_basis(patch, pt)
    P = patch.control_points[ien]
    return R @ P, (dR @ P).T


def eval_points(patch: NurbsPatch, params) -> np.ndarray:
    """Physical coordinates of many parameter points (no derivatives)."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    out = np.empty((params.shape[0], patch.dim_space))
    for i, pt in enumerate(params):
        pt = as_point(patch, pt)
        ien, R = tensor_basis(patch, _spans_of(patch, pt), pt[None, :], nders=0)
        out[i] = R[0] @ patch.control_points[ien]
    return out


def parent_to_param(bounds, parent):
    """Affine map from the parent cube ``[-1, 1]^d`` onto a parameter box.

    Parameters
    ----------
    bounds : ``(d, 2)`` array of ``[lo, hi]`` per direction
    parent : ``(d,)`` point or ``(npts, d)`` points in the parent cube

    Returns
    -------
    (param, J) where ``J`` is the constant Jacobian determinant of the map.
    """
    b = np.atleast_2d(np.asarray(bounds, dtype=float))
    lengths = b[:, 1] - b[:, 0]
    if np.any(lengths <= 0):
        raise DegenerateElementError(f"zero-length span in bounds {b.tolist()}")
    p = np.asarray(parent, dtype=float)
    param = 0.5 * (lengths * p + (b[:, 1] + b[:, 0]))
    return param, float(np.prod(lengths / 2))


def gauss_rule(n: int):
    """``n``-point Gauss-Legendre rule on ``[-1, 1]``."""
    return np.polynomial.legendre.leggauss(int(n))


def gauss_product(ns: Sequence[int]):
    """Tensor-product Gauss rule on ``[-1, 1]^d``; first direction fastest."""
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    for n in ns:
        x, w = gauss_rule(n)
        pts = np.concatenate(
            [np.tile(pts, (len(x), 1)), np.repeat(x, pts.shape[0])[:, None]],
            axis=1,
        )
        wts = np.repeat(w, wts.size) * np.tile(wts, len(x))
    return pts, wts
