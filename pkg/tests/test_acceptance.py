"""Acceptance criteria 1-8 at their stated tolerances.

Each test records one ``criterion N: PASS|FAIL`` line. The lines are printed
immediately (visible with ``-s``), collected into the pytest terminal summary
and printed again when this file is run as a script.
"""

import time

import numpy as np

from nitsche_iga.elasticity import Material, constitutive_matrix
from nitsche_iga.errors import SolverError
from nitsche_iga.functions import Polynomial
from nitsche_iga.mesh import box_patch, inverse_map
from nitsche_iga.model import DirichletBC, InterfaceSpec, MultiPatchModel, locate_point
from nitsche_iga.nitsche import generate_interface_gps
from nitsche_iga.solver import applied_load_resultant, assemble_global, solve
from nitsche_iga.spline_core import KnotVector, basis_and_derivs, eval_geometry, find_span
from nitsche_iga.verification import (
    TimoshenkoParams,
    cantilever3d_model,
    cantilever3d_monolithic,
    convergence_study,
    timoshenko_exact,
    timoshenko_model,
    timoshenko_monolithic,
)

from conftest import ACCEPTANCE_LINES, quarter_circle

PARAMS = TimoshenkoParams()
TIP_REFERENCE = -0.0690
CONVERGENCE_BASE = ((8, 4), (6, 2))


def record(number: int, checks: dict, elapsed: float):
    """``checks`` maps a label to ``(value_text, ok)``."""
    ok = all(flag for _, flag in checks.values())
    detail = " ".join(f"{k}={v}{'' if flag else '(!)'}" for k, (v, flag) in checks.items())
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail} time={elapsed:.1f}s"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _midline(sol, model, n=100):
    xs = np.linspace(0.0, PARAMS.L, n)
    uy = []
    for x in xs:
        pid, pt = locate_point(model, [x, 0.0])
        uy.append(sol.evaluate(pid, pt)[0][1])
    exact = timoshenko_exact(PARAMS, xs, np.zeros_like(xs))[0][:, 1]
    return np.array(uy), exact


def _beam_checks(model):
    sol = solve(assemble_global(model))
    uy, exact = _midline(sol, model)
    l2 = np.linalg.norm(uy - exact) / np.linalg.norm(exact)
    tip = uy[-1]
    tip_err = abs(tip - TIP_REFERENCE) / abs(TIP_REFERENCE)
    checks = {
        "tip": (f"{tip:.6f}({tip_err:.2%})", tip_err < 0.02),
        "midline_L2": (f"{l2:.2%}", l2 < 0.02),
    }
    return sol, checks


def test_criterion_1_conforming_beam():
    t0 = time.perf_counter()
    model = timoshenko_model((20, 4), (20, 4), degree=1, alpha=1e8)
    _, checks = _beam_checks(model)
    elapsed = time.perf_counter() - t0
    checks["runtime"] = (f"{elapsed:.1f}s<10s", elapsed < 10.0)
    record(1, checks, elapsed)


def _field_samples(sol, model, pts):
    out = []
    for x in pts:
        pid, pt = locate_point(model, x)
        out.append(sol.evaluate(pid, pt)[0])
    return np.array(out)


def test_criterion_2_nonconforming_beam():
    t0 = time.perf_counter()
    model = timoshenko_model((20, 8), (20, 4), degree=1, alpha=1e8)
    sol, checks = _beam_checks(model)
    mono_model = timoshenko_monolithic((40, 8), degree=1)
    mono = solve(assemble_global(mono_model))
    gx, gy = np.meshgrid(np.linspace(0, PARAMS.L, 49), np.linspace(-3, 3, 13))
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    u_c = _field_samples(sol, model, pts)
    u_m = _field_samples(mono, mono_model, pts)
    rel = np.linalg.norm(u_c - u_m) / np.linalg.norm(u_m)
    checks["vs_monolithic_L2"] = (f"{rel:.3%}", rel < 0.01)
    record(2, checks, time.perf_counter() - t0)


_STUDIES = {}


def _study(degree):
    if degree not in _STUDIES:
        t0 = time.perf_counter()
        rep = convergence_study(timoshenko_model(*CONVERGENCE_BASE), 4, degree=degree,
                                check_spd=True)
        _STUDIES[degree] = (rep, time.perf_counter() - t0)
    return _STUDIES[degree]


def test_criterion_3_convergence_rates():
    (r1, t1), (r2, t2) = _study(1), _study(2)
    total = t1 + t2
    checks = {
        "p1_disp": (f"{r1.rate_displacement:.3f}", 1.8 <= r1.rate_displacement <= 2.2),
        "p1_energy": (f"{r1.rate_energy:.3f}", 0.85 <= r1.rate_energy <= 1.15),
        "p2_disp": (f"{r2.rate_displacement:.3f}", 2.7 <= r2.rate_displacement <= 3.3),
        "p2_energy": (f"{r2.rate_energy:.3f}", 1.8 <= r2.rate_energy <= 2.2),
        "runtime": (f"{total:.1f}s<120s", total < 120.0),
    }
    record(3, checks, total)


def test_criterion_4_midline_shear():
    t0 = time.perf_counter()
    model = timoshenko_model(*CONVERGENCE_BASE).elevated(2).refined(3)  # finest p=2 level
    sol = solve(assemble_global(model))
    sxy = []
    for x in np.linspace(0.0, PARAMS.L, 201):
        pid, pt = locate_point(model, [x, 0.0])
        sxy.append(sol.evaluate(pid, pt)[2][2])
    peak = np.abs(sxy).max()
    err = abs(peak - 250.0) / 250.0
    record(4, {"max_abs_sxy": (f"{peak:.3f}({err:.2%})", err < 0.02)}, time.perf_counter() - t0)


def _two_block_patch_test(dim, left, right, degree):
    lo2 = [1.0] + [0.0] * (dim - 1)
    p1 = box_patch([0.0] * dim, [1.0] * dim, left, degree)
    p2 = box_patch(lo2, [2.0] + [1.0] * (dim - 1), right, degree)
    mat = Material(1000.0, 0.3, "plane_strain" if dim == 2 else "solid")
    rng = np.random.default_rng(2024 + dim)
    grad = rng.normal(size=(dim, dim)) * 1e-3
    u = Polynomial.affine(rng.normal(size=dim) * 1e-3, grad)
    faces = [f"{n}_{s}" for n in ("eta", "zeta")[: dim - 1] for s in ("min", "max")]
    model = MultiPatchModel(
        [p1, p2], [mat, mat],
        dirichlet=[DirichletBC(0, "xi_min", u), DirichletBC(1, "xi_max", u)]
        + [DirichletBC(p, f, u) for p in (0, 1) for f in faces],
        interfaces=[InterfaceSpec(0, 1, "xi_max", "xi_min", gamma=0.5)],
    )
    sol = solve(assemble_global(model))
    sym = grad + grad.T
    shear = [sym[0, 1]] if dim == 2 else [sym[0, 1], sym[1, 2], sym[0, 2]]
    sig_ex = constitutive_matrix(mat) @ np.concatenate([np.diag(grad), shear])
    err = 0.0
    for pid in (0, 1):
        for pt in rng.uniform(0, 1, (50, dim)):
            err = max(err, np.abs(sol.evaluate(pid, pt)[2] - sig_ex).max())
    return err / np.abs(sig_ex).max()


def test_criterion_5_cross_interface_patch_test():
    t0 = time.perf_counter()
    e2 = _two_block_patch_test(2, (4, 4), (3, 5), 2)
    e3 = _two_block_patch_test(3, (2, 2, 2), (3, 3, 3), 1)
    record(5, {"2d": (f"{e2:.2e}", e2 < 1e-6), "3d": (f"{e3:.2e}", e3 < 1e-6)},
           time.perf_counter() - t0)


def test_criterion_6_cantilever_3d():
    t0 = time.perf_counter()
    coupled_model = cantilever3d_model()
    mono_model = cantilever3d_monolithic()
    coupled = solve(assemble_global(coupled_model))
    mono = solve(assemble_global(mono_model))
    probes = np.random.default_rng(6).uniform([0.5, 0.05, 0.05], [9.5, 0.95, 0.95], (50, 3))
    s_c, s_m = [], []
    for x in probes:
        pid, pt = locate_point(coupled_model, x)
        s_c.append(coupled.evaluate(pid, pt)[2][0])
        s_m.append(mono.evaluate(0, inverse_map(mono_model.patches[0], x))[2][0])
    s_c, s_m = np.array(s_c), np.array(s_m)
    rel = np.linalg.norm(s_c - s_m) / np.linalg.norm(s_m)
    elapsed = time.perf_counter() - t0
    record(6, {"sxx_rel_L2": (f"{rel:.2e}", rel < 0.03),
               "runtime": (f"{elapsed:.1f}s<180s", elapsed < 180.0)}, elapsed)


def test_criterion_7_stability():
    t0 = time.perf_counter()
    checks = {}
    for label, model in (("c1", timoshenko_model((20, 4), (20, 4))),
                         ("c2", timoshenko_model((20, 8), (20, 4)))):
        try:
            solve(assemble_global(model), check_spd=True)
            checks[label] = ("spd", True)
        except SolverError as exc:
            checks[label] = (f"pivot{exc.pivot}", False)
    # every level of both studies was solved with the pivot check enabled
    for degree in (1, 2):
        try:
            _study(degree)
            checks[f"c3_p{degree}"] = ("spd", True)
        except SolverError as exc:
            checks[f"c3_p{degree}"] = (f"pivot{exc.pivot}", False)
    try:
        solve(assemble_global(timoshenko_model((20, 8), (20, 4), alpha=0.0)), check_spd=True)
        checks["alpha0"] = ("spd(diagnostic-not-triggered)", True)
    except SolverError as exc:
        checks["alpha0"] = (f"rejected-at-pivot-{exc.pivot}", exc.pivot is not None)
    record(7, checks, time.perf_counter() - t0)


def test_criterion_8_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    checks = {}

    kv = KnotVector([0, 0, 0, 1, 2, 3, 4, 4, 5, 5, 5], 2)
    xi = rng.uniform(0, 5, 1000)
    vals = basis_and_derivs(kv, xi, 2)
    pou = np.abs(vals[:, 0].sum(axis=1) - 1).max()
    checks["partition_of_unity"] = (f"{pou:.1e}", pou < 1e-12)

    h = 1e-5
    fd_err = 0.0
    for x in rng.uniform(0.05, 4.95, 200):
        if np.min(np.abs(x - kv.knots)) < 1e-3 or find_span(kv, x - h) != find_span(kv, x + h):
            continue
        s = find_span(kv, x)
        d = basis_and_derivs(kv, x, 2)
        for order in (1, 2):
            up = basis_and_derivs(kv, x + h, order - 1)[order - 1]
            dn = basis_and_derivs(kv, x - h, order - 1)[order - 1]
            assert find_span(kv, x + h) == s
            fd = (up - dn) / (2 * h)
            fd_err = max(fd_err, np.abs(fd - d[order]).max() / max(1.0, np.abs(d[order]).max()))
    checks["derivative_fd"] = (f"{fd_err:.1e}", fd_err < 1e-5)

    patch = cantilever3d_model((3, 2, 2), (2, 1, 1), degree=2).patches[0]
    rt = 0.0
    for pt in rng.uniform(0, 1, (200, 3)):
        x, _ = eval_geometry(patch, pt)
        rt = max(rt, np.abs(inverse_map(patch, x, seed=patch.center()) - pt).max())
    checks["inverse_round_trip"] = (f"{rt:.1e}", rt < 1e-9)

    circ = max(abs(np.linalg.norm(eval_geometry(quarter_circle(), [t])[0]) - 1)
               for t in rng.uniform(0, 1, 200))
    checks["quarter_circle"] = (f"{circ:.1e}", circ < 1e-12)

    model3 = cantilever3d_model((4, 2, 2), (3, 1, 1), degree=2)
    gps = generate_interface_gps(model3, model3.interfaces[0])
    area = abs(sum(g.weight for g in gps) - 1.0)
    checks["interface_area"] = (f"{area:.1e}", area < 1e-10)

    system = assemble_global(timoshenko_model((20, 8), (20, 4)))
    K = system.K
    sym = abs(K - K.T).max() / abs(K).max()
    checks["symmetry"] = (f"{sym:.1e}", sym < 1e-9)

    sol = solve(system)
    load = applied_load_resultant(system)
    eq = np.abs(sol.reaction_resultant() + load).max() / np.abs(load).max()
    checks["equilibrium"] = (f"{eq:.1e}", eq < 1e-8)
    record(8, checks, time.perf_counter() - t0)


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    for test in sorted(tests, key=lambda f: int(f.__name__.split("_")[2])):
        try:
            test()
        except AssertionError:
            pass
