"""The solvable multi-patch problem: patches, materials, boundary data and
interface declarations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .elasticity import Material
from .errors import InterfaceMismatchError, InversionError, ModelError
from .mesh import Face, face_point, inverse_map, refine_bisect, elevate_to
from .spline_core import NurbsPatch, eval_geometry


@dataclass
class DirichletBC:
    """Prescribed displacement on a patch face; ``components=None`` fixes all."""

    patch: int
    face: Face
    function: Callable
    components: tuple[int, ...] | None = None

    def __post_init__(self):
        self.face = Face.parse(self.face)
        if self.components is not None:
            self.components = tuple(int(c) for c in self.components)


@dataclass
class NeumannBC:
    patch: int
    face: Face
    function: Callable

    def __post_init__(self):
        self.face = Face.parse(self.face)


@dataclass
class InterfaceSpec:
    """Nitsche interface between ``face1`` of ``patch1`` and ``face2`` of ``patch2``.

    Quadrature runs on the trace mesh of ``patch1``; list the finer patch
    first. ``alpha=0`` drops the stabilization term (diagnostics only);
    ``alpha=None`` means the closed-form estimate with ``theta``
    (``None`` -> default for the degree).
    """

    patch1: int
    patch2: int
    face1: Face
    face2: Face
    gamma: float = 0.5
    alpha: float | None = None
    theta: float | None = None
    ngp: int | None = None

    def __post_init__(self):
        self.face1 = Face.parse(self.face1)
        self.face2 = Face.parse(self.face2)
        if not 0.0 <= self.gamma <= 1.0:
            raise ModelError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.alpha is not None and not self.alpha >= 0:
            raise ModelError(f"explicit alpha must be non-negative, got {self.alpha}")
        if self.theta is not None and not self.theta > 0:
            raise ModelError(f"theta must be positive, got {self.theta}")


@dataclass
class MultiPatchModel:
    patches: list[NurbsPatch]
    materials: list[Material]
    dirichlet: list[DirichletBC] = field(default_factory=list)
    neumann: list[NeumannBC] = field(default_factory=list)
    interfaces: list[InterfaceSpec] = field(default_factory=list)
    options: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.patches[0].dim_space

    def dof_offsets(self) -> np.ndarray:
        """Start of each patch's dofs; patch-major numbering."""
        sizes = [self.dim * p.num_control_points for p in self.patches]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    @property
    def num_dofs(self) -> int:
        return int(self.dof_offsets()[-1])

    def validate(self, check_interfaces: bool = True) -> "MultiPatchModel":
        npatch = len(self.patches)
        if npatch == 0:
            raise ModelError("model has no patches")
        if len(self.materials) != npatch:
            raise ModelError(f"{len(self.materials)} materials for {npatch} patches")
        for i, (p, m) in enumerate(zip(self.patches, self.materials)):
            if p.dim_space != self.dim:
                raise ModelError("all patches must share the spatial dimension", f"patches[{i}]")
            if p.dim_param != p.dim_space:
                raise ModelError("patches must be solids (parametric dim == spatial dim)",
                                 f"patches[{i}]")
            if m.dim != p.dim_space:
                raise ModelError(f"{m.formulation} material on a {p.dim_space}D patch",
                                 f"patches[{i}].material")
        for kind, bcs in (("dirichlet", self.dirichlet), ("neumann", self.neumann)):
            for j, bc in enumerate(bcs):
                if not 0 <= bc.patch < npatch:
                    raise ModelError(f"unknown patch id {bc.patch}", f"{kind}[{j}].patch")
                if bc.face.direction >= self.patches[bc.patch].dim_param:
                    raise ModelError(f"face {bc.face} does not exist", f"{kind}[{j}].face")
        for j, iface in enumerate(self.interfaces):
            for attr in ("patch1", "patch2"):
                if not 0 <= getattr(iface, attr) < npatch:
                    raise ModelError(f"unknown patch id {getattr(iface, attr)}",
                                     f"interfaces[{j}].{attr}")
            if iface.patch1 == iface.patch2:
                raise ModelError("an interface joins two different patches", f"interfaces[{j}]")
            if check_interfaces:
                check_interface(self, iface)
        return self

    def refined(self, times: int) -> "MultiPatchModel":
        """Copy with every patch bisected ``times`` times."""
        return self.with_patches([refine_bisect(p, times) for p in self.patches])

    def elevated(self, degree: int) -> "MultiPatchModel":
        return self.with_patches([elevate_to(p, degree) for p in self.patches])

    def with_patches(self, patches) -> "MultiPatchModel":
        return MultiPatchModel(list(patches), list(self.materials), list(self.dirichlet),
                               list(self.neumann), list(self.interfaces), dict(self.options))


def check_interface(model: MultiPatchModel, iface: InterfaceSpec, samples: int = 4,
                    tol: float = 1e-8) -> None:
    """Sample face 1 and require every point to be invertible onto face 2."""
    p1, p2 = model.patches[iface.patch1], model.patches[iface.patch2]
    f1, f2 = iface.face1, iface.face2
    free = f1.free_directions(p1)
    ts = np.linspace(0.0, 1.0, samples)
    diag = max(p1.bounding_box_diagonal(), p2.bounding_box_diagonal())
    for combo in itertools.product(ts, repeat=len(free)):
        coords = [p1.knot_vectors[d].start + t * (p1.knot_vectors[d].end - p1.knot_vectors[d].start)
                  for d, t in zip(free, combo)]
        x, _ = eval_geometry(p1, face_point(p1, f1, coords))
        try:
            pt2 = inverse_map(p2, x, seed=_face_seed(p2, f2))
        except InversionError as exc:
            raise InterfaceMismatchError(
                f"interface {iface.patch1}:{f1} -> {iface.patch2}:{f2}: point {x.tolist()} "
                f"not found on patch {iface.patch2} (residual {exc.residual:.3e})", point=x
            ) from exc
        kv = p2.knot_vectors[f2.direction]
        if abs(pt2[f2.direction] - f2.value(p2)) > tol * (kv.end - kv.start):
            raise InterfaceMismatchError(
                f"interface {iface.patch1}:{f1} -> {iface.patch2}:{f2}: point {x.tolist()} "
                f"lies inside patch {iface.patch2}, not on face {f2}", point=x
            )
        x2, _ = eval_geometry(p2, pt2)
        if np.linalg.norm(x2 - x) > tol * diag:
            raise InterfaceMismatchError(
                f"interface faces are not coincident at {x.tolist()}", point=x
            )


def _face_seed(patch: NurbsPatch, face: Face) -> np.ndarray:
    seed = patch.center()
    seed[face.direction] = face.value(patch)
    return seed


def locate_point(model: MultiPatchModel, x) -> tuple[int, np.ndarray]:
    """First patch containing physical point ``x`` and its parameter point."""
    x = np.asarray(x, dtype=float)
    for pid, patch in enumerate(model.patches):
        try:
            return pid, inverse_map(patch, x)
        except InversionError:
            continue
    raise InversionError(f"point {x.tolist()} lies in no patch")
