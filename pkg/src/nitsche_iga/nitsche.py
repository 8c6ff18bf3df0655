"""Nitsche coupling of two patches across a shared face.

Quadrature runs on the trace mesh of the first patch of an interface. Each
trace element is additionally cut at the images of the second patch's knot
lines so that every cell sees smooth integrands on both sides.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.optimize import brentq

from .elasticity import (
    Material,
    constitutive_matrix,
    element_dofs,
    lame_constants,
    physical_basis,
    shape_matrix,
    strain_displacement,
)
from .errors import InterfaceMismatchError, InversionError
from .mesh import Face, build_elements, locate_element, inverse_map, trace_of_face
from .model import InterfaceSpec, MultiPatchModel, _face_seed
from .spline_core import NurbsPatch, eval_geometry, gauss_product, parent_to_param

__all__ = [
    "InterfaceSpec",
    "GaussPointPair",
    "normal_matrix",
    "theta",
    "estimate_alpha",
    "jump_average",
    "generate_interface_gps",
    "assemble_coupling",
    "interface_alpha",
    "trace_alphas",
]

THETA = {1: 12.0, 2: 36.0}


def theta(p: int) -> float:
    """Degree-dependent factor of the stabilization estimate; ``12 p**2`` beyond p=2."""
    return THETA.get(int(p), 12.0 * p * p)


def estimate_alpha(mat: Material, p: int, h_e: float, theta_value: float | None = None) -> float:
    """``alpha = (lambda + mu) / 2 * theta(p) / h_e``."""
    if not h_e > 0:
        raise ValueError(f"element size must be positive, got {h_e}")
    lam, mu, _ = lame_constants(mat)
    th = theta(p) if theta_value is None else theta_value
    return 0.5 * (lam + mu) * th / h_e


def normal_matrix(n) -> np.ndarray:
    """Maps a Voigt stress vector to the traction ``sigma . n``."""
    n = np.asarray(n, dtype=float)
    if n.size == 2:
        nx, ny = n
        return np.array([[nx, 0.0, ny], [0.0, ny, nx]])
    nx, ny, nz = n
    return np.array([
        [nx, 0.0, 0.0, ny, 0.0, nz],
        [0.0, ny, 0.0, nx, nz, 0.0],
        [0.0, 0.0, nz, 0.0, ny, nx],
    ])


def jump_average(u1, u2, s1, s2, gamma: float = 0.5):
    """``(u1 - u2, gamma*s1 + (1-gamma)*s2)``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    u1, u2, s1, s2 = (np.asarray(a, dtype=float) for a in (u1, u2, s1, s2))
    return u1 - u2, gamma * s1 + (1.0 - gamma) * s2


@dataclass(frozen=True)
class GaussPointPair:
    """One interface quadrature point seen from both patches.

    ``normal`` points out of patch 1; ``weight`` includes the physical
    surface measure; ``h`` is the diameter of the patch-1 trace element that
    produced the point.
    """

    xi1: np.ndarray
    e1: int
    xi2: np.ndarray
    e2: int
    x: np.ndarray
    normal: np.ndarray
    weight: float
    h: float


def _face_frame(patch: NurbsPatch, face: Face, pt: np.ndarray):
    """Physical point, face tangents and outward unit normal."""
    x, jac = eval_geometry(patch, pt)
    free = face.free_directions(patch)
    tang = jac[:, list(free)].T
    if patch.dim_space == 2:
        a1 = tang[0]
        cross = np.array([a1[1], -a1[0]])
    else:
        cross = np.cross(tang[0], tang[1])
    meas = float(np.linalg.norm(cross))
    n = cross / meas
    transversal = jac[:, face.direction] * (1.0 if face.side else -1.0)
    if n @ transversal < 0:
        n = -n
    return x, n, meas


def _diameter(points: np.ndarray) -> float:
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def _trace_diameter(patch: NurbsPatch, face: Face, free, te) -> float:
    corners = []
    for combo in itertools.product(*te.bounds):
        full = np.empty(patch.dim_param)
        full[face.direction] = face.value(patch)
        full[list(free)] = combo
        corners.append(eval_geometry(patch, full)[0])
    return _diameter(np.array(corners))


class _Locator:
    """Inverts physical points onto patch 2, warm-starting from the last hit."""

    def __init__(self, patch: NurbsPatch, face: Face):
        self.patch = patch
        self.face = face
        self.seed = _face_seed(patch, face)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        try:
            pt = inverse_map(self.patch, x, seed=self.seed)
        except InversionError:
            try:
                pt = inverse_map(self.patch, x, seed=_face_seed(self.patch, self.face))
            except InversionError as exc:
                raise InterfaceMismatchError(
                    f"interface point {np.asarray(x).tolist()} not found on second patch "
                    f"(residual {exc.residual:.3e})", point=np.asarray(x)
                ) from exc
        kv = self.patch.knot_vectors[self.face.direction]
        if abs(pt[self.face.direction] - self.face.value(self.patch)) < 1e-8 * (kv.end - kv.start):
            pt[self.face.direction] = self.face.value(self.patch)
        self.seed = pt
        return pt


def _cut_points(p1, face1, bounds, free1, locate, p2, face2) -> list[np.ndarray]:
    """Per free direction of face 1, the parameters where patch-2 knot lines cross."""
    center = bounds.mean(axis=1)
    free2 = face2.free_directions(p2)
    cuts = []
    for k, d in enumerate(free1):
        lo, hi = bounds[k]

        def pt2_at(t, k=k):
            c = center.copy()
            c[k] = t
            full = np.empty(p1.dim_param)
            full[face1.direction] = face1.value(p1)
            full[list(free1)] = c
            return locate(eval_geometry(p1, full)[0])

        a, b = pt2_at(lo), pt2_at(hi)
        # patch-2 direction that follows this face-1 direction
        d2 = max(free2, key=lambda j: abs(b[j] - a[j]))
        s, e = sorted((a[d2], b[d2]))
        kv2 = p2.knot_vectors[d2]
        span = kv2.end - kv2.start
        knots = [u for u in kv2.breaks() if s + 1e-10 * span < u < e - 1e-10 * span]
        pts = [lo]
        for u in knots:
            t = brentq(lambda t: pt2_at(t)[d2] - u, lo, hi, xtol=1e-14 * (hi - lo + 1.0))
            pts.append(t)
        pts.append(hi)
        cuts.append(np.array(sorted(pts)))
    return cuts


def generate_interface_gps(
    model: MultiPatchModel,
    iface: InterfaceSpec,
    ngp: int | None = None,
    split: bool = True,
) -> list[GaussPointPair]:
    """Paired interface quadrature points for ``iface``.

    ``ngp`` points per direction default to ``max degree + 1`` over both
    patches. With ``split=False`` the plain trace mesh of patch 1 is used.
    """
    p1, p2 = model.patches[iface.patch1], model.patches[iface.patch2]
    f1, f2 = iface.face1, iface.face2
    if ngp is None:
        ngp = iface.ngp or max(p1.degrees + p2.degrees) + 1
    trace = trace_of_face(p1, f1, iface.patch1)
    free1 = trace.free_directions
    gp, gw = gauss_product([ngp] * len(free1))
    locate = _Locator(p2, f2)
    out = []
    for te in trace.elements:
        h = _trace_diameter(p1, f1, free1, te)
        if split:
            cuts = _cut_points(p1, f1, te.bounds, free1, locate, p2, f2)
        else:
            cuts = [b.copy() for b in te.bounds]
        for cell in itertools.product(*(zip(c[:-1], c[1:]) for c in cuts)):
            cell_bounds = np.array(cell)
            if np.any(cell_bounds[:, 1] - cell_bounds[:, 0] <= 0):
                continue
            sub, jpar = parent_to_param(cell_bounds, gp)
            for q, w in zip(sub, gw):
                xi1 = np.empty(p1.dim_param)
                xi1[f1.direction] = f1.value(p1)
                xi1[list(free1)] = q
                x, n, meas = _face_frame(p1, f1, xi1)
                xi2 = locate(x)
                out.append(GaussPointPair(
                    xi1=xi1, e1=te.parent, xi2=xi2, e2=locate_element(p2, xi2),
                    x=x, normal=n, weight=float(w * jpar * meas), h=h,
                ))
    return out


def interface_alpha(model: MultiPatchModel, iface: InterfaceSpec, h: float) -> float:
    """Resolved stabilization parameter for a trace element of size ``h``."""
    if iface.alpha is not None:
        return float(iface.alpha)
    m1, m2 = model.materials[iface.patch1], model.materials[iface.patch2]
    mat = max((m1, m2), key=lambda m: sum(lame_constants(m)[:2]))
    p = max(model.patches[iface.patch1].degrees + model.patches[iface.patch2].degrees)
    return estimate_alpha(mat, p, h, iface.theta)


def trace_alphas(model: MultiPatchModel, iface: InterfaceSpec) -> np.ndarray:
    """Stabilization parameter on every trace element of ``iface.face1``."""
    p1 = model.patches[iface.patch1]
    trace = trace_of_face(p1, iface.face1, iface.patch1)
    return np.array([
        interface_alpha(model, iface, _trace_diameter(p1, iface.face1, trace.free_directions, te))
        for te in trace.elements
    ])


def _side_operators(patch: NurbsPatch, el, xi: np.ndarray, C: np.ndarray):
    ien, R, dRdx, _, _ = physical_basis(patch, el.spans, xi)
    d = patch.dim_space
    return element_dofs(ien, d), shape_matrix(R, d), np.einsum(
        "vw,pwj->pvj", C, strain_displacement(dRdx)
    )


def assemble_coupling(
    model: MultiPatchModel,
    iface: InterfaceSpec,
    gps: list[GaussPointPair],
    offsets=None,
):
    """Coupling matrices ``K^n`` and ``K^s`` in global dof numbering.

    Pairs are batched per ``(e1, e2)`` element pair in order of first
    appearance. The global operator receives ``K^n + K^n.T + K^s``.
    """
    offsets = model.dof_offsets() if offsets is None else offsets
    ndof = int(offsets[-1])
    p1, p2 = model.patches[iface.patch1], model.patches[iface.patch2]
    el1 = build_elements(p1, iface.patch1)
    el2 = build_elements(p2, iface.patch2)
    C1 = constitutive_matrix(model.materials[iface.patch1])
    C2 = constitutive_matrix(model.materials[iface.patch2])
    g = iface.gamma
    groups: dict[tuple[int, int], list[GaussPointPair]] = {}
    for gpp in gps:
        groups.setdefault((gpp.e1, gpp.e2), []).append(gpp)
    rows, cols, vn, vs = [], [], [], []
    for (e1, e2), members in groups.items():
        xi1 = np.array([q.xi1 for q in members])
        xi2 = np.array([q.xi2 for q in members])
        w = np.array([q.weight for q in members])
        alpha = np.array([interface_alpha(model, iface, q.h) for q in members])
        nm = np.array([normal_matrix(q.normal) for q in members])
        dof1, N1, S1 = _side_operators(p1, el1[e1], xi1, C1)
        dof2, N2, S2 = _side_operators(p2, el2[e2], xi2, C2)
        jump = np.concatenate([N1, -N2], axis=2)
        avg_traction = np.concatenate(
            [g * np.einsum("pdv,pvj->pdj", nm, S1), (1.0 - g) * np.einsum("pdv,pvj->pdj", nm, S2)],
            axis=2,
        )
        Kn = -np.einsum("p,pdi,pdj->ij", w, jump, avg_traction)
        Ks = np.einsum("p,pdi,pdj->ij", alpha * w, jump, jump)
        dofs = np.concatenate([dof1 + offsets[iface.patch1], dof2 + offsets[iface.patch2]])
        m = dofs.size
        rows.append(np.repeat(dofs, m))
        cols.append(np.tile(dofs, m))
        vn.append(Kn.ravel())
        vs.append(Ks.ravel())
    if not rows:
        empty = sps.coo_matrix((ndof, ndof))
        return empty, empty.copy()
    r, c = np.concatenate(rows), np.concatenate(cols)
    Kn = sps.coo_matrix((np.concatenate(vn), (r, c)), shape=(ndof, ndof))
    Ks = sps.coo_matrix((np.concatenate(vs), (r, c)), shape=(ndof, ndof))
    return Kn, Ks


def interface_tractions(sol, iface: InterfaceSpec, gps: list[GaussPointPair]):
    """Tractions ``sigma^1 n`` and ``sigma^2 n`` at every pair (``n`` out of patch 1)."""
    t1, t2 = [], []
    for gpp in gps:
        _, _, s1 = sol.evaluate(iface.patch1, gpp.xi1)
        _, _, s2 = sol.evaluate(iface.patch2, gpp.xi2)
        nm = normal_matrix(gpp.normal)
        t1.append(nm @ s1)
        t2.append(nm @ s2)
    return np.array(t1), np.array(t2)
