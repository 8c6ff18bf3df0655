"""Linear elasticity on a single patch: constitutive law, element operators,
bulk stiffness, boundary loads and Dirichlet data.

Voigt ordering is ``(xx, yy, xy)`` in 2D and ``(xx, yy, zz, xy, yz, xz)`` in
3D with engineering shear strains. Element dofs are interleaved: local basis
``a`` owns dofs ``a*d_s + c`` for components ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sps

from .errors import InvertedElementError, MaterialError, ProjectionError
from .mesh import Element, Face, build_elements, trace_of_face
from .spline_core import NurbsPatch, gauss_product, parent_to_param, tensor_basis

FORMULATIONS = ("plane_stress", "plane_strain", "solid")


@dataclass(frozen=True)
class Material:
    E: float
    nu: float
    formulation: str = "plane_stress"

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise MaterialError(f"unknown formulation {self.formulation!r}")
        if not self.E > 0:
            raise MaterialError(f"Young's modulus must be positive, got {self.E}")
        if self.nu == 0.5:
            raise MaterialError("nu = 0.5 is incompressible; not supported")
        if not -1.0 < self.nu < 0.5:
            raise MaterialError(f"Poisson ratio must lie in (-1, 0.5), got {self.nu}")

    @property
    def dim(self) -> int:
        return 3 if self.formulation == "solid" else 2


class Lame(NamedTuple):
    lam: float
    mu: float
    lam_star: float  # plane-stress effective lambda; equals lam otherwise


def lame_constants(mat: Material) -> Lame:
    E, nu = mat.E, mat.nu
    if nu == 0.5:
        raise MaterialError("nu = 0.5 is incompressible; not supported")
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    lam_star = 2 * lam * mu / (lam + 2 * mu) if mat.formulation == "plane_stress" else lam
    return Lame(lam, mu, lam_star)


def constitutive_matrix(mat: Material) -> np.ndarray:
    lam, mu, lam_star = lame_constants(mat)
    if mat.formulation == "solid":
        C = np.zeros((6, 6))
        C[:3, :3] = lam
        C[np.arange(3), np.arange(3)] = lam + 2 * mu
        C[np.arange(3, 6), np.arange(3, 6)] = mu
        return C
    l = lam_star if mat.formulation == "plane_stress" else lam
    return np.array([[l + 2 * mu, l, 0.0], [l, l + 2 * mu, 0.0], [0.0, 0.0, mu]])


def voigt_size(dim: int) -> int:
    return 3 if dim == 2 else 6


def strain_displacement(dRdx: np.ndarray) -> np.ndarray:
    """B matrices from physical basis gradients ``(npts, d, nen)``."""
    npts, d, nen = dRdx.shape
    B = np.zeros((npts, voigt_size(d), d * nen))
    if d == 2:
        dx, dy = dRdx[:, 0], dRdx[:, 1]
        B[:, 0, 0::2] = dx
        B[:, 1, 1::2] = dy
        B[:, 2, 0::2] = dy
        B[:, 2, 1::2] = dx
    elif d == 3:
        dx, dy, dz = dRdx[:, 0], dRdx[:, 1], dRdx[:, 2]
        B[:, 0, 0::3] = dx
        B[:, 1, 1::3] = dy
        B[:, 2, 2::3] = dz
        B[:, 3, 0::3] = dy
        B[:, 3, 1::3] = dx
        B[:, 4, 1::3] = dz
        B[:, 4, 2::3] = dy
        B[:, 5, 0::3] = dz
        B[:, 5, 2::3] = dx
    else:
        raise ValueError("elasticity needs 2 or 3 spatial dimensions")
    return B


def shape_matrix(R: np.ndarray, dim: int) -> np.ndarray:
    """N matrices ``(npts, d, d*nen)`` from basis values ``(npts, nen)``."""
    npts, nen = R.shape
    N = np.zeros((npts, dim, dim * nen))
    for c in range(dim):
        N[:, c, c::dim] = R
    return N


def element_dofs(ien: np.ndarray, dim: int) -> np.ndarray:
    return (np.asarray(ien)[:, None] * dim + np.arange(dim)).ravel()


def physical_basis(patch: NurbsPatch, spans, params):
    """Basis values, physical gradients, det J and points for one element.

    Returns ``(ien, R, dRdx, detJ, x)``; ``detJ`` is that of the parameter to
    physical map only.
    """
    ien, R, dR = tensor_basis(patch, spans, params, nders=1)
    P = patch.control_points[ien]
    x = R @ P
    jac = np.einsum("pka,as->psk", dR, P)  # dx_s/dxi_k
    detJ = np.linalg.det(jac)
    dRdx = np.linalg.solve(np.transpose(jac, (0, 2, 1)), dR)
    return ien, R, dRdx, detJ, x


@dataclass(frozen=True)
class ElementMatrices:
    B: np.ndarray
    N: np.ndarray
    detJ: float
    weight: float
    x: np.ndarray
    ien: np.ndarray


def element_matrices(patch: NurbsPatch, element: Element, pt, mat: Material | None = None,
                     weight: float = 1.0) -> ElementMatrices:
    """B and N at one parameter point of ``element``."""
    pt = np.asarray(pt, dtype=float)
    ien, R, dRdx, detJ, x = physical_basis(patch, element.spans, pt[None, :])
    if detJ[0] <= 0:
        raise InvertedElementError(
            f"non-positive Jacobian {detJ[0]:.3e} in element {element.index} of patch {element.patch_id}",
            element=element.index,
        )
    d = patch.dim_space
    return ElementMatrices(strain_displacement(dRdx)[0], shape_matrix(R, d)[0],
                           float(detJ[0]), weight, x[0], ien)


def default_ngp(patch: NurbsPatch) -> tuple[int, ...]:
    return tuple(p + 1 for p in patch.degrees)


def _check_patch(patch: NurbsPatch, mat: Material):
    if patch.dim_param != patch.dim_space:
        raise ValueError("elasticity requires a solid patch (parametric dim == spatial dim)")
    if mat.dim != patch.dim_space:
        raise MaterialError(
            f"{mat.formulation} material used on a {patch.dim_space}D patch"
        )


def bulk_stiffness(
    patch: NurbsPatch,
    mat: Material,
    ngp=None,
    body_force: Callable | None = None,
    elements: list[Element] | None = None,
):
    """Patch stiffness ``K^b`` (COO, patch-local dofs) and body-force vector."""
    _check_patch(patch, mat)
    d = patch.dim_space
    C = constitutive_matrix(mat)
    ngp = default_ngp(patch) if ngp is None else tuple(np.broadcast_to(ngp, (d,)))
    gp, gw = gauss_product(ngp)
    elements = build_elements(patch) if elements is None else elements
    ndof = d * patch.num_control_points
    rows, cols, vals = [], [], []
    f = np.zeros(ndof)
    for el in elements:
        params, jpar = parent_to_param(el.bounds, gp)
        ien, R, dRdx, detJ, x = physical_basis(patch, el.spans, params)
        if np.any(detJ <= 0):
            raise InvertedElementError(
                f"non-positive Jacobian in element {el.index} of patch {el.patch_id}",
                element=el.index,
            )
        wt = gw * detJ * jpar
        B = strain_displacement(dRdx)
        Ke = np.einsum("p,pvi,vw,pwj->ij", wt, B, C, B, optimize=True)
        dofs = element_dofs(ien, d)
        n = dofs.size
        rows.append(np.repeat(dofs, n))
        cols.append(np.tile(dofs, n))
        vals.append(Ke.ravel())
        if body_force is not None:
            b = np.asarray(body_force(x), dtype=float).reshape(len(x), d)
            fe = np.einsum("p,pa,pc->ac", wt, R, b).ravel()
            np.add.at(f, dofs, fe)
    K = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ndof, ndof)
    )
    return K, f


def face_quadrature(patch: NurbsPatch, face, ngp=None):
    """Quadrature over a boundary face.

    Yields ``(element, params, weights, x, ien, R, tangents)`` per trace
    element where ``weights`` already include the physical surface measure.
    """
    face = Face.parse(face)
    trace = trace_of_face(patch, face)
    elements = build_elements(patch)
    free = trace.free_directions
    if ngp is None:
        ngp = tuple(patch.degrees[k] + 1 for k in free)
    elif np.ndim(ngp) == 0:
        ngp = (int(ngp),) * len(free)
    gp, gw = gauss_product(ngp) if free else (np.zeros((1, 0)), np.ones(1))
    for te in trace.elements:
        el = elements[te.parent]
        if free:
            sub, jpar = parent_to_param(te.bounds, gp)
        else:
            sub, jpar = np.zeros((1, 0)), 1.0
        params = np.empty((len(gw), patch.dim_param))
        params[:, face.direction] = face.value(patch)
        params[:, list(free)] = sub
        ien, R, dR = tensor_basis(patch, el.spans, params, nders=1)
        P = patch.control_points[ien]
        x = R @ P
        tang = np.einsum("pka,as->pks", dR[:, list(free), :], P)  # (npts, nfree, d_s)
        meas = surface_measure(tang, patch.dim_space)
        yield el, params, gw * jpar * meas, x, ien, R, tang


def surface_measure(tang: np.ndarray, dim: int) -> np.ndarray:
    """|a1| for edges, |a1 x a2| for faces; 1 for point faces."""
    nfree = tang.shape[1]
    if nfree == 0:
        return np.ones(tang.shape[0])
    if nfree == 1:
        return np.linalg.norm(tang[:, 0], axis=1)
    return np.linalg.norm(np.cross(tang[:, 0], tang[:, 1]), axis=1)


def neumann_load(patch: NurbsPatch, face, traction: Callable, ngp=None) -> np.ndarray:
    """Consistent load vector of a traction ``t(x) -> (npts, d_s)`` on a face."""
    d = patch.dim_space
    f = np.zeros(d * patch.num_control_points)
    for _, _, w, x, ien, R, _ in face_quadrature(patch, face, ngp):
        t = np.asarray(traction(x), dtype=float).reshape(len(x), d)
        np.add.at(f, element_dofs(ien, d), np.einsum("p,pa,pc->ac", w, R, t).ravel())
    return f


def face_control_points(patch: NurbsPatch, face) -> np.ndarray:
    """Global indices of control points on a boundary face (ascending)."""
    face = Face.parse(face)
    lattice = np.indices(patch.shape).reshape(patch.dim_param, -1, order="F")
    fixed = patch.shape[face.direction] - 1 if face.side else 0
    return np.nonzero(lattice[face.direction] == fixed)[0]


def dirichlet_projection(patch: NurbsPatch, face, g: Callable, ngp=None):
    """Control values on ``face`` that best fit the prescribed field ``g``.

    Returns ``(cp_indices, values)`` with ``values`` of shape
    ``(ncp_face, d_s)``. When the face basis is interpolatory at the control
    points (degree 1 along every free direction, or a point face) the values
    are ``g`` at the control points; otherwise the L2 projection over the face
    is solved.
    """
    face = Face.parse(face)
    cps = face_control_points(patch, face)
    free = face.free_directions(patch)
    d = patch.dim_space
    if all(patch.degrees[k] == 1 for k in free):
        x = patch.control_points[cps]
        return cps, np.asarray(g(x), dtype=float).reshape(len(cps), d)
    local = {int(a): i for i, a in enumerate(cps)}
    nf = len(cps)
    M = np.zeros((nf, nf))
    b = np.zeros((nf, d))
    for _, _, w, x, ien, R, _ in face_quadrature(patch, face, ngp):
        loc = np.array([local.get(int(a), -1) for a in ien])
        on = loc >= 0
        Rf = R[:, on]
        li = loc[on]
        M[np.ix_(li, li)] += np.einsum("p,pa,pb->ab", w, Rf, Rf)
        gx = np.asarray(g(x), dtype=float).reshape(len(x), d)
        b[li] += np.einsum("p,pa,pc->ac", w, Rf, gx)
    try:
        cond = np.linalg.cond(M)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e13:
        raise ProjectionError(f"singular Gram matrix on face {face} (cond={cond:.2e})")
    return cps, np.linalg.solve(M, b)
