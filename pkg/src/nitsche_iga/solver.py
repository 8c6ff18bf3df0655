"""Global assembly, constraint elimination, sparse solve and field evaluation.

Dof numbering is patch-major, then control point, then component:
``dof = offset[patch] + d_s * A + c``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .elasticity import (
    bulk_stiffness,
    constitutive_matrix,
    dirichlet_projection,
    neumann_load,
    physical_basis,
    shape_matrix,
    strain_displacement,
)
from .errors import SolverError
from .mesh import build_elements, locate_element
from .model import MultiPatchModel
from .nitsche import assemble_coupling, generate_interface_gps
from .spline_core import as_point

log = logging.getLogger(__name__)


@dataclass
class SparseSystem:
    K: sps.csr_matrix
    f: np.ndarray
    constrained: np.ndarray
    prescribed: np.ndarray
    offsets: np.ndarray
    model: MultiPatchModel
    interface_gps: list = field(default_factory=list)

    @property
    def ndof(self) -> int:
        return self.K.shape[0]

    def constraints(self) -> dict[int, float]:
        return dict(zip(self.constrained.tolist(), self.prescribed.tolist()))


def _shifted(M: sps.coo_matrix, off: int, n: int) -> sps.csr_matrix:
    return sps.csr_matrix((M.data, (M.row + off, M.col + off)), shape=(n, n))


def _bulk_job(args):
    patch, mat, ngp = args
    return bulk_stiffness(patch, mat, ngp=ngp)


def assemble_global(model: MultiPatchModel, threads: int = 1, ngp_interface: int | None = None,
                    split_interface: bool = True, ngp_bulk: int | None = None) -> SparseSystem:
    """Bulk, coupling and load contributions of every patch and interface.

    ``ngp_bulk`` overrides the default ``p + 1`` Gauss points per direction,
    which is not exact for rational or non-affine geometry.
    """
    offsets = model.dof_offsets()
    ndof = int(offsets[-1])
    d = model.dim
    jobs = [(p, m, ngp_bulk) for p, m in zip(model.patches, model.materials)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            bulk = list(pool.map(_bulk_job, jobs))  # map keeps order -> deterministic merge
    else:
        bulk = [_bulk_job(j) for j in jobs]
    f = np.zeros(ndof)
    K = sps.csr_matrix((ndof, ndof))
    for off, (Kb, fb) in zip(offsets, bulk):
        K = K + _shifted(Kb, off, ndof)
        f[off: off + fb.size] += fb
    for bc in model.neumann:
        fb = neumann_load(model.patches[bc.patch], bc.face, bc.function)
        f[offsets[bc.patch]: offsets[bc.patch] + fb.size] += fb
    all_gps = []
    for iface in model.interfaces:
        gps = generate_interface_gps(model, iface, ngp_interface, split=split_interface)
        all_gps.append(gps)
        Kn, Ks = assemble_coupling(model, iface, gps, offsets)
        Kn = Kn.tocsr()
        K = K + Kn + Kn.T.tocsr() + Ks.tocsr()
    K.sum_duplicates()
    K.sort_indices()

    prescribed: dict[int, float] = {}
    for bc in model.dirichlet:
        patch = model.patches[bc.patch]
        cps, values = dirichlet_projection(patch, bc.face, bc.function)
        comps = range(d) if bc.components is None else bc.components
        for c in comps:
            for a, v in zip(cps, values[:, c]):
                prescribed[int(offsets[bc.patch] + d * a + c)] = float(v)
    cdofs = np.array(sorted(prescribed), dtype=np.int64)
    cvals = np.array([prescribed[i] for i in cdofs])
    return SparseSystem(K, f, cdofs, cvals, offsets, model, all_gps)


# pivots below this fraction of the largest one are treated as zero
_SINGULAR_RTOL = 1e-13


def _factorize(A: sps.csc_matrix, check_spd: bool):
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverError(f"singular matrix: {exc}") from exc
    pivots = lu.U.diagonal()
    tiny = np.abs(pivots) <= _SINGULAR_RTOL * np.abs(pivots).max()
    bad = tiny | ~(pivots > 0) if check_spd else tiny
    if check_spd and not np.array_equal(lu.perm_r, lu.perm_c):
        raise SolverError("symmetric pivoting was not preserved; cannot read inertia")
    idx = np.nonzero(bad)[0]
    if idx.size:
        first = int(idx[0])
        kind = "numerically singular" if tiny[first] else "not positive definite"
        raise SolverError(
            f"matrix is {kind}: pivot {first} (row {int(lu.perm_c[first])}) = {pivots[first]:.3e}",
            pivot=first,
        )
    return lu


def solve_constrained(K, f, constrained=(), prescribed=(), check_spd: bool = False):
    """Solve ``K a = f`` with ``a[constrained] = prescribed`` eliminated symmetrically.

    Returns ``(a, reactions, residual)``; ``reactions = K[c] a - f[c]`` and
    ``residual`` is the relative residual of the reduced system.
    """
    K = sps.csr_matrix(K)
    f = np.asarray(f, dtype=float)
    n = K.shape[0]
    constrained = np.asarray(constrained, dtype=np.int64)
    prescribed = np.asarray(prescribed, dtype=float)
    free = np.setdiff1d(np.arange(n), constrained, assume_unique=True)
    a = np.zeros(n)
    a[constrained] = prescribed
    Kf = K[free]
    Kff = Kf[:, free].tocsc()
    rhs = f[free] - Kf[:, constrained] @ prescribed
    residual = 0.0
    if free.size:
        lu = _factorize(Kff, check_spd)
        x = lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SolverError("factorization produced non-finite values (singular system)")
        # one step of iterative refinement
        x += lu.solve(rhs - Kff @ x)
        a[free] = x
        nrm = np.linalg.norm(rhs)
        residual = float(np.linalg.norm(Kff @ x - rhs) / nrm) if nrm > 0 else 0.0
    reactions = K[constrained] @ a - f[constrained]
    return a, reactions, residual


def solve(system: SparseSystem, check_spd: bool = False) -> "SolutionField":
    """Eliminate constraints symmetrically and solve by sparse factorization.

    ``check_spd`` raises :class:`SolverError` at the first non-positive pivot.
    """
    a, reactions, residual = solve_constrained(system.K, system.f, system.constrained,
                                               system.prescribed, check_spd)
    return SolutionField(system.model, a, system.offsets, system.constrained, reactions, residual)


class SolutionField:
    """Control values per patch with displacement, strain and stress evaluation."""

    def __init__(self, model, a, offsets, constrained=None, reactions=None, residual=0.0):
        self.model = model
        self.a = np.asarray(a, dtype=float)
        self.a.setflags(write=False)
        self.offsets = offsets
        self.constrained = np.array([], dtype=int) if constrained is None else constrained
        self.reactions = np.array([]) if reactions is None else reactions
        self.residual = residual
        self._elements = {}
        self._C = [constitutive_matrix(m) for m in model.materials]

    def control_values(self, patch_id: int) -> np.ndarray:
        d = self.model.dim
        lo, hi = self.offsets[patch_id], self.offsets[patch_id + 1]
        return self.a[lo:hi].reshape(-1, d)

    def elements(self, patch_id: int):
        if patch_id not in self._elements:
            self._elements[patch_id] = build_elements(self.model.patches[patch_id], patch_id)
        return self._elements[patch_id]

    def evaluate(self, patch_id: int, pt):
        """``(u, eps, sigma)`` at one parameter point."""
        patch = self.model.patches[patch_id]
        pt = as_point(patch, pt)
        el = self.elements(patch_id)[locate_element(patch, pt)]
        u, eps, sig, _ = self.evaluate_element(patch_id, el, pt[None, :])
        return u[0], eps[0], sig[0]

    def evaluate_element(self, patch_id: int, el, params):
        """Batched fields at points inside one element; also returns ``x``."""
        patch = self.model.patches[patch_id]
        d = patch.dim_space
        ien, R, dRdx, _, x = physical_basis(patch, el.spans, params)
        ae = self.control_values(patch_id)[ien].ravel()
        u = shape_matrix(R, d) @ ae
        eps = strain_displacement(dRdx) @ ae
        sig = eps @ self._C[patch_id].T
        return u, eps, sig, x

    def reaction_resultant(self) -> np.ndarray:
        d = self.model.dim
        out = np.zeros(d)
        np.add.at(out, self.constrained % d, self.reactions)
        return out


def evaluate_field(sol: SolutionField, patch_id: int, pt):
    return sol.evaluate(patch_id, pt)


def applied_load_resultant(system: SparseSystem) -> np.ndarray:
    d = system.model.dim
    return system.f.reshape(-1, d).sum(axis=0)
