"""Reference solutions, error norms and convergence studies.

Also builds the benchmark models used throughout the tests: the plane-stress
Timoshenko cantilever split at ``x = L/2`` and the 3D cantilever with an
imposed tip displacement.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elasticity import Material, constitutive_matrix, physical_basis
from .functions import Constant, Timoshenko
from .mesh import box_patch, build_elements
from .model import DirichletBC, InterfaceSpec, MultiPatchModel, NeumannBC
from .spline_core import eval_points, gauss_product, parent_to_param


@dataclass(frozen=True)
class TimoshenkoParams:
    L: float = 48.0
    D: float = 6.0
    P: float = 1000.0
    E: float = 3.0e7
    nu: float = 0.3

    @property
    def I(self) -> float:  # noqa: E743
        return self.D ** 3 / 12.0


def timoshenko_exact(params: TimoshenkoParams, x, y):
    """Exact displacement ``(.., 2)`` and Voigt stress ``(.., 3)``."""
    P, L, D, E, nu, I = params.P, params.L, params.D, params.E, params.nu, params.I
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    ux = P * y / (6 * E * I) * ((6 * L - 3 * x) * x + (2 + nu) * (y ** 2 - D ** 2 / 4))
    uy = -P / (6 * E * I) * (3 * nu * y ** 2 * (L - x) + (4 + 5 * nu) * D ** 2 * x / 4
                             + (3 * L - x) * x ** 2)
    sxx = P * (L - x) * y / I
    sxy = -P / (2 * I) * (D ** 2 / 4 - y ** 2)
    u = np.stack([ux, uy], axis=-1)
    sig = np.stack([sxx, np.zeros_like(sxx), sxy], axis=-1)
    return u, sig


def timoshenko_strain(params: TimoshenkoParams, x, y) -> np.ndarray:
    """Exact engineering strain; plane stress compliance applied to the exact stress."""
    _, sig = timoshenko_exact(params, x, y)
    E, nu = params.E, params.nu
    exx = (sig[..., 0] - nu * sig[..., 1]) / E
    eyy = (sig[..., 1] - nu * sig[..., 0]) / E
    gxy = 2 * (1 + nu) * sig[..., 2] / E
    return np.stack([exx, eyy, gxy], axis=-1)


def timoshenko_traction(params: TimoshenkoParams, y) -> np.ndarray:
    """End-face traction ``(0, t_y(y))`` with the parabolic shear profile."""
    y = np.asarray(y, dtype=float)
    ty = -params.P / (2 * params.I) * (params.D ** 2 / 4 - y ** 2)
    return np.stack([np.zeros_like(ty), ty], axis=-1)


def exact_solution(spec: dict) -> Callable:
    """Callable ``x -> (u, eps)`` from a model's ``options['exact']`` entry."""
    if spec.get("type") != "timoshenko":
        raise ValueError(f"no exact solution of type {spec.get('type')!r}")
    params = TimoshenkoParams(**{k: spec[k] for k in ("L", "D", "P", "E", "nu") if k in spec})

    def exact(x):
        u, _ = timoshenko_exact(params, x[:, 0], x[:, 1])
        return u, timoshenko_strain(params, x[:, 0], x[:, 1])

    return exact


# ---------------------------------------------------------------------------
# benchmark models


def timoshenko_model(
    left=(20, 4),
    right=(20, 4),
    degree: int = 1,
    alpha: float | None = None,
    gamma: float = 0.5,
    theta: float | None = None,
    params: TimoshenkoParams = TimoshenkoParams(),
) -> MultiPatchModel:
    """Cantilever split at ``x = L/2``; patch 0 (left) integrates the interface.

    Clamped through the exact displacement on ``x = 0``, parabolic shear
    traction on ``x = L``.
    """
    L, D = params.L, params.D
    p0 = box_patch([0.0, -D / 2], [L / 2, D / 2], left, degree)
    p1 = box_patch([L / 2, -D / 2], [L, D / 2], right, degree)
    mat = Material(params.E, params.nu, "plane_stress")
    spec = dict(L=params.L, D=params.D, P=params.P, E=params.E, nu=params.nu)
    return MultiPatchModel(
        patches=[p0, p1],
        materials=[mat, mat],
        dirichlet=[DirichletBC(0, "xi_min", Timoshenko("displacement", **spec))],
        neumann=[NeumannBC(1, "xi_max", Timoshenko("traction", **spec))],
        interfaces=[InterfaceSpec(0, 1, "xi_max", "xi_min", gamma=gamma, alpha=alpha, theta=theta)],
        options={"exact": {"type": "timoshenko", **spec}},
    )


def timoshenko_monolithic(nel=(40, 8), degree: int = 1,
                          params: TimoshenkoParams = TimoshenkoParams()) -> MultiPatchModel:
    L, D = params.L, params.D
    patch = box_patch([0.0, -D / 2], [L, D / 2], nel, degree)
    mat = Material(params.E, params.nu, "plane_stress")
    spec = dict(L=params.L, D=params.D, P=params.P, E=params.E, nu=params.nu)
    return MultiPatchModel(
        patches=[patch],
        materials=[mat],
        dirichlet=[DirichletBC(0, "xi_min", Timoshenko("displacement", **spec))],
        neumann=[NeumannBC(0, "xi_max", Timoshenko("traction", **spec))],
        options={"exact": {"type": "timoshenko", **spec}},
    )


def cantilever3d_model(
    left=(16, 4, 4),
    right=(16, 1, 2),
    degree: int = 3,
    E: float = 1000.0,
    nu: float = 0.3,
    L: float = 10.0,
    W: float = 1.0,
    H: float = 1.0,
    tip: float = 1.0,
    alpha: float | None = None,
) -> MultiPatchModel:
    """3D cantilever halves joined at ``x = L/2``; clamped at ``x = 0`` and
    pushed by ``u_z = tip`` on ``x = L``."""
    mat = Material(E, nu, "solid")
    p0 = box_patch([0.0, 0.0, 0.0], [L / 2, W, H], left, degree)
    p1 = box_patch([L / 2, 0.0, 0.0], [L, W, H], right, degree)
    return MultiPatchModel(
        patches=[p0, p1],
        materials=[mat, mat],
        dirichlet=[
            DirichletBC(0, "xi_min", Constant([0.0, 0.0, 0.0])),
            DirichletBC(1, "xi_max", Constant([0.0, 0.0, tip]), components=(2,)),
        ],
        interfaces=[InterfaceSpec(0, 1, "xi_max", "xi_min", alpha=alpha)],
    )


def cantilever3d_monolithic(nel=(32, 4, 4), degree: int = 3, E: float = 1000.0, nu: float = 0.3,
                            L: float = 10.0, W: float = 1.0, H: float = 1.0,
                            tip: float = 1.0) -> MultiPatchModel:
    mat = Material(E, nu, "solid")
    patch = box_patch([0.0, 0.0, 0.0], [L, W, H], nel, degree)
    return MultiPatchModel(
        patches=[patch],
        materials=[mat],
        dirichlet=[
            DirichletBC(0, "xi_min", Constant([0.0, 0.0, 0.0])),
            DirichletBC(0, "xi_max", Constant([0.0, 0.0, tip]), components=(2,)),
        ],
    )


# ---------------------------------------------------------------------------
# norms and rates


def error_norms(sol, exact: Callable, ngp=None) -> tuple[float, float]:
    """``(e_displacement, e_energy)`` over all patches.

    ``exact(x)`` returns the exact displacement and engineering strain at
    points ``x``. The energy norm keeps the factor 1/2 inside the root.
    """
    e_u = 0.0
    e_en = 0.0
    for pid, patch in enumerate(sol.model.patches):
        C = constitutive_matrix(sol.model.materials[pid])
        n = tuple(p + 1 for p in patch.degrees) if ngp is None else (ngp,) * patch.dim_param
        gp, gw = gauss_product(n)
        for el in sol.elements(pid):
            params, jpar = parent_to_param(el.bounds, gp)
            _, _, _, detJ, _ = physical_basis(patch, el.spans, params)
            u, eps, _, x = sol.evaluate_element(pid, el, params)
            u_ex, eps_ex = exact(x)
            wt = gw * jpar * detJ
            du = u - u_ex
            de = eps - eps_ex
            e_u += float(np.sum(wt * np.einsum("pi,pi->p", du, du)))
            e_en += float(np.sum(wt * np.einsum("pi,ij,pj->p", de, C, de)))
    return float(np.sqrt(e_u)), float(np.sqrt(0.5 * e_en))


def max_element_diagonal(model: MultiPatchModel) -> float:
    h = 0.0
    for patch in model.patches:
        for el in build_elements(patch):
            corners = np.array(list(itertools.product(*el.bounds)))
            x = eval_points(patch, corners)
            diff = x[:, None, :] - x[None, :, :]
            h = max(h, float(np.sqrt((diff ** 2).sum(-1)).max()))
    return h


def fit_rate(h, e) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


@dataclass
class LevelResult:
    level: int
    h: float
    dofs: int
    e_displacement: float
    e_energy: float


@dataclass
class ErrorReport:
    levels: list[LevelResult] = field(default_factory=list)

    def _rate(self, attr):
        if len(self.levels) < 3:
            return None
        return fit_rate([r.h for r in self.levels], [getattr(r, attr) for r in self.levels])

    @property
    def rate_displacement(self) -> float | None:
        return self._rate("e_displacement")

    @property
    def rate_energy(self) -> float | None:
        return self._rate("e_energy")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("level,h,dofs,e_disp,e_energy\n")
        for r in self.levels:
            buf.write(f"{r.level},{r.h:.10e},{r.dofs},{r.e_displacement:.10e},{r.e_energy:.10e}\n")
        rd, re_ = self.rate_displacement, self.rate_energy
        if rd is not None:
            buf.write(f"# rates: displacement={rd:.4f} energy={re_:.4f}\n")
        return buf.getvalue()


def convergence_study(model: MultiPatchModel, levels: int, degree: int | None = None,
                      exact: Callable | None = None, check_spd: bool = False,
                      threads: int = 1) -> ErrorReport:
    """Solve ``levels`` uniformly bisected meshes and collect error norms.

    Interfaces without an explicit alpha re-estimate it on every mesh.
    """
    from .solver import assemble_global, solve

    if levels < 1:
        raise ValueError("levels must be positive")
    if exact is None:
        exact = exact_solution(model.options["exact"])
    base = model.elevated(degree) if degree is not None else model
    report = ErrorReport()
    for lvl in range(levels):
        m = base.refined(lvl)
        system = assemble_global(m, threads=threads)
        sol = solve(system, check_spd=check_spd)
        e_u, e_en = error_norms(sol, exact)
        report.levels.append(LevelResult(lvl, max_element_diagonal(m), system.ndof, e_u, e_en))
    return report
