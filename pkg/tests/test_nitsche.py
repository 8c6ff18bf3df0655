import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nitsche_iga.elasticity import Material
from nitsche_iga.errors import InterfaceMismatchError, ModelError
from nitsche_iga.functions import Polynomial
from nitsche_iga.mesh import box_patch
from nitsche_iga.model import DirichletBC, InterfaceSpec, MultiPatchModel, check_interface
from nitsche_iga.nitsche import (
    assemble_coupling,
    estimate_alpha,
    generate_interface_gps,
    interface_alpha,
    interface_tractions,
    jump_average,
    normal_matrix,
    theta,
    trace_alphas,
)
from nitsche_iga.solver import assemble_global, solve
from nitsche_iga.spline_core import eval_geometry
from nitsche_iga.verification import error_norms, exact_solution, timoshenko_model

MAT = Material(3e7, 0.3, "plane_stress")


def two_squares(left=(2, 2), right=(3, 3), degree=1, gamma=0.5, alpha=None, dim=2):
    lo1, hi1 = [0.0] * dim, [1.0] * dim
    lo2, hi2 = [1.0] + [0.0] * (dim - 1), [2.0] + [1.0] * (dim - 1)
    p1 = box_patch(lo1, hi1, left, degree)
    p2 = box_patch(lo2, hi2, right, degree)
    mat = MAT if dim == 2 else Material(1000.0, 0.3, "solid")
    return MultiPatchModel([p1, p2], [mat, mat],
                           interfaces=[InterfaceSpec(0, 1, "xi_max", "xi_min", gamma, alpha)])


# ------------------------------------------------------------- alpha


def test_alpha_example():
    assert estimate_alpha(MAT, 1, 3.0) == pytest.approx(5.769e7, rel=1e-4)


def test_theta_values():
    assert theta(1) == 12 and theta(2) == 36 and theta(3) == 108
    assert estimate_alpha(MAT, 2, 1.0) / estimate_alpha(MAT, 1, 1.0) == pytest.approx(3.0)


@given(st.floats(1e-3, 1e3))
def test_alpha_scales_inverse_with_h(h):
    assert estimate_alpha(MAT, 1, h / 2) == pytest.approx(2 * estimate_alpha(MAT, 1, h), rel=1e-12)


def test_alpha_requires_positive_h():
    with pytest.raises(ValueError):
        estimate_alpha(MAT, 1, 0.0)


def test_alpha_policy():
    m = two_squares(alpha=5.0)
    assert interface_alpha(m, m.interfaces[0], 0.1) == 5.0
    m = two_squares(left=(4, 4))
    # trace elements of patch 1 have length 1/4
    np.testing.assert_allclose(trace_alphas(m, m.interfaces[0]), estimate_alpha(MAT, 1, 0.25))


def test_interface_spec_validation():
    with pytest.raises(ModelError):
        InterfaceSpec(0, 1, "xi_max", "xi_min", gamma=1.5)
    with pytest.raises(ModelError):
        InterfaceSpec(0, 1, "xi_max", "xi_min", alpha=-1.0)


# ------------------------------------------------------------ operators


def test_jump_average_examples():
    j, _ = jump_average([1.0, 2.0], [1.0, 2.0], np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(j, [0, 0])
    s = np.array([3.0, -1.0, 2.0])
    for g in (0.0, 0.3, 1.0):
        np.testing.assert_allclose(jump_average([0], [0], s, s, g)[1], s)
    np.testing.assert_allclose(jump_average([0], [0], [2, 0, 0], [0, 0, 0], 0.5)[1], [1, 0, 0])


@pytest.mark.parametrize("gamma", [-0.1, 1.1])
def test_jump_average_gamma_range(gamma):
    with pytest.raises(ValueError):
        jump_average([0], [0], [0], [0], gamma)


@pytest.mark.parametrize("dim", [2, 3])
def test_normal_matrix_is_traction(dim):
    rng = np.random.default_rng(12)
    n = rng.normal(size=dim)
    n /= np.linalg.norm(n)
    S = rng.normal(size=(dim, dim))
    S = S + S.T
    voigt = ([S[0, 0], S[1, 1], S[0, 1]] if dim == 2 else
             [S[0, 0], S[1, 1], S[2, 2], S[0, 1], S[1, 2], S[0, 2]])
    np.testing.assert_allclose(normal_matrix(n) @ voigt, S @ n, atol=1e-14)


# --------------------------------------------------------- gauss points


def test_conforming_pairs_coincide():
    m = two_squares(left=(2, 3), right=(2, 3), degree=2)
    gps = generate_interface_gps(m, m.interfaces[0])
    for g in gps:
        x1, _ = eval_geometry(m.patches[0], g.xi1)
        x2, _ = eval_geometry(m.patches[1], g.xi2)
        assert np.linalg.norm(x1 - x2) < 1e-12
        assert g.xi1[1] == pytest.approx(g.xi2[1], abs=1e-12)
        np.testing.assert_allclose(g.normal, [1.0, 0.0], atol=1e-14)
        assert g.weight > 0


@pytest.mark.parametrize("dim, left, right, area", [
    (2, (4, 4), (3, 5), 1.0),
    (3, (2, 2, 2), (3, 3, 3), 1.0),
])
def test_weights_sum_to_area(dim, left, right, area):
    m = two_squares(left, right, dim=dim)
    gps = generate_interface_gps(m, m.interfaces[0])
    assert abs(sum(g.weight for g in gps) - area) < 1e-10
    for g in gps:
        assert abs(np.linalg.norm(g.normal) - 1) < 1e-14
        x2, _ = eval_geometry(m.patches[1], g.xi2)
        assert np.linalg.norm(x2 - g.x) < 1e-8


def test_beam_interface_normal_and_length():
    m = timoshenko_model((20, 8), (20, 4))
    gps = generate_interface_gps(m, m.interfaces[0])
    assert abs(sum(g.weight for g in gps) - 6.0) < 1e-10
    assert all(np.allclose(g.normal, [1.0, 0.0]) for g in gps)


def test_normal_points_out_of_patch1_when_reversed():
    m = two_squares()
    rev = MultiPatchModel(m.patches, m.materials,
                          interfaces=[InterfaceSpec(1, 0, "xi_min", "xi_max")])
    gps = generate_interface_gps(rev, rev.interfaces[0])
    assert all(np.allclose(g.normal, [-1.0, 0.0]) for g in gps)


def test_mismatched_interface_detected():
    p1 = box_patch([0, 0], [1, 1], (2, 2), 1)
    p2 = box_patch([1.5, 0], [2.5, 1], (2, 2), 1)
    m = MultiPatchModel([p1, p2], [MAT, MAT],
                        interfaces=[InterfaceSpec(0, 1, "xi_max", "xi_min")])
    with pytest.raises(InterfaceMismatchError) as info:
        check_interface(m, m.interfaces[0])
    assert info.value.point is not None
    with pytest.raises(InterfaceMismatchError):
        generate_interface_gps(m, m.interfaces[0])


# ----------------------------------------------------------- coupling


def _coupling(m):
    gps = generate_interface_gps(m, m.interfaces[0])
    Kn, Ks = assemble_coupling(m, m.interfaces[0], gps)
    return Kn.toarray(), Ks.toarray()


def test_one_sided_gamma_removes_patch2_stress():
    m = two_squares(gamma=1.0)
    Kn, _ = _coupling(m)
    off = m.dof_offsets()
    assert np.abs(Kn[:, off[1]:]).max() == 0.0
    assert np.abs(Kn[:, :off[1]]).max() > 0.0
    m0 = two_squares(gamma=0.0)
    Kn0, _ = _coupling(m0)
    assert np.abs(Kn0[:, :off[1]]).max() == 0.0


def test_stabilization_psd_with_trace_nullspace():
    m = two_squares(left=(2, 2), right=(2, 2), degree=1)
    _, Ks = _coupling(m)
    np.testing.assert_allclose(Ks, Ks.T, atol=1e-9 * np.abs(Ks).max())
    ev = np.linalg.eigvalsh(Ks)
    assert ev.min() > -1e-9 * ev.max()
    # identical affine fields on both sides have zero jump
    field = Polynomial.affine([0.1, -0.2], [[1.0, 2.0], [0.5, -1.0]])
    a = np.concatenate([field(p.control_points).ravel() for p in m.patches])
    assert np.abs(Ks @ a).max() < 1e-9 * np.abs(Ks).max() * np.abs(a).max()


def test_rigid_translation_has_no_coupling_force():
    m = two_squares(left=(2, 2), right=(2, 2), degree=2)
    Kn, Ks = _coupling(m)
    a = np.tile([0.3, -0.7], m.num_dofs // 2)
    np.testing.assert_allclose((Kn + Kn.T + Ks) @ a, 0.0, atol=1e-6 * np.abs(Ks).max())


def test_global_matrix_symmetric():
    K = assemble_global(timoshenko_model((8, 4), (6, 2), degree=2)).K
    diff = abs(K - K.T).max()
    assert diff < 1e-9 * abs(K).max()


def test_smallest_eigenvalue_positive_with_estimate():
    system = assemble_global(timoshenko_model((4, 2), (3, 1), degree=2))
    free = np.setdiff1d(np.arange(system.ndof), system.constrained)
    K = system.K.toarray()[np.ix_(free, free)]
    assert K.shape[0] <= 2000
    assert np.linalg.eigvalsh(K).min() > 0


@pytest.mark.parametrize("dim, left, right, degree", [
    (2, (4, 4), (3, 5), 2),
    (3, (2, 2, 2), (3, 3, 3), 1),
])
def test_cross_interface_patch_test_displacements(dim, left, right, degree):
    m = two_squares(left, right, degree=degree, dim=dim)
    rng = np.random.default_rng(13)
    u = Polynomial.affine(rng.normal(size=dim) * 1e-3, rng.normal(size=(dim, dim)) * 1e-3)
    faces = ["eta_min", "eta_max"] + (["zeta_min", "zeta_max"] if dim == 3 else [])
    m.dirichlet = ([DirichletBC(0, "xi_min", u), DirichletBC(1, "xi_max", u)]
                   + [DirichletBC(p, f, u) for p in (0, 1) for f in faces])
    sol = solve(assemble_global(m))
    scale = np.abs(u(np.vstack([p.control_points for p in m.patches]))).max()
    for pid, patch in enumerate(m.patches):
        for pt in rng.uniform(0, 1, (20, dim)):
            ux, _, _ = sol.evaluate(pid, pt)
            x, _ = eval_geometry(patch, pt)
            assert np.abs(ux - u(x[None])[0]).max() < 1e-7 * scale


def test_cut_cells_needed_for_exactness():
    m = two_squares((4, 4), (3, 5), degree=2)
    u = Polynomial.affine([0.0, 0.0], [[1e-3, 0.0], [0.0, 0.0]])
    m.dirichlet = [DirichletBC(0, "xi_min", u), DirichletBC(1, "xi_max", u)]
    m.dirichlet += [DirichletBC(p, f, u) for p in (0, 1) for f in ("eta_min", "eta_max")]

    def err(split):
        sol = solve(assemble_global(m, split_interface=split))
        _, _, sig = sol.evaluate(1, [0.37, 0.61])
        return abs(sig[0] - sol.evaluate(0, [0.5, 0.5])[2][0]) / abs(sig[0])

    assert err(True) < 1e-9
    assert err(False) > 1e-6


def test_alpha_robustness():
    exact = exact_solution(timoshenko_model().options["exact"])
    m = timoshenko_model((16, 4), (12, 2))
    e_base = error_norms(solve(assemble_global(m)), exact)[1]
    m10 = timoshenko_model((16, 4), (12, 2), theta=120.0)
    e_10 = error_norms(solve(assemble_global(m10)), exact)[1]
    assert abs(e_10 - e_base) / e_base < 0.05


def test_interface_flux_balance():
    # bilinear edge stresses are too poor for this; use the fine quadratic mesh
    m = timoshenko_model((8, 4), (6, 2)).elevated(2).refined(2)
    system = assemble_global(m)
    sol = solve(system)
    gps = system.interface_gps[0]
    t1, t2 = interface_tractions(sol, m.interfaces[0], gps)
    w = np.array([g.weight for g in gps])
    jump = np.abs((w[:, None] * (t1 - t2)).sum(axis=0)).max()
    assert jump < 0.01 * 1000.0
