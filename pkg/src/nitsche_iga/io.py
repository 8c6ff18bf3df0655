"""JSON model files and legacy VTK export.

A model file is one JSON document (format version ``"1"``) validated against
``model_schema.json`` before any object is built. Validation errors carry a
dotted path such as ``patches[0].weights[3]``.
"""

from __future__ import annotations

import itertools
import json
import os
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .elasticity import Material
from .errors import IGAError, ModelError
from .functions import from_dict
from .mesh import Face
from .model import DirichletBC, InterfaceSpec, MultiPatchModel, NeumannBC
from .spline_core import KnotVector, NurbsPatch, eval_points

FORMAT_VERSION = "1"

VTK_QUAD = 9
VTK_HEXAHEDRON = 12


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("model_schema.json").read_text())


def _json_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# model files


def model_from_dict(doc: dict, check_interfaces: bool = True) -> MultiPatchModel:
    """Validate ``doc`` and build the model it describes."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ModelError(err.message, _json_path(err.absolute_path) or "<root>")

    mats = {}
    for i, m in enumerate(doc["materials"]):
        if m["id"] in mats:
            raise ModelError(f"duplicate material id {m['id']}", f"materials[{i}].id")
        try:
            mats[m["id"]] = Material(m["E"], m["nu"], m.get("formulation", "plane_stress"))
        except IGAError as exc:
            raise ModelError(str(exc), f"materials[{i}]") from exc

    patches, materials = [], []
    for i, pd in enumerate(doc["patches"]):
        where = f"patches[{i}]"
        if len(pd["degrees"]) != len(pd["knots"]):
            raise ModelError("one degree per knot vector required", f"{where}.degrees")
        if pd["material"] not in mats:
            raise ModelError(f"unknown material id {pd['material']}", f"{where}.material")
        try:
            kvs = [KnotVector(k, p) for k, p in zip(pd["knots"], pd["degrees"])]
        except IGAError as exc:
            raise ModelError(str(exc), f"{where}.knots") from exc
        try:
            patches.append(NurbsPatch(kvs, pd["control_points"], pd.get("weights")))
        except IGAError as exc:
            field = "weights" if "weight" in str(exc) else "control_points"
            raise ModelError(str(exc), f"{where}.{field}") from exc
        materials.append(mats[pd["material"]])

    def function(spec, where):
        try:
            return from_dict(spec)
        except (ValueError, TypeError, KeyError) as exc:
            raise ModelError(str(exc), where) from exc

    def face(name, where):
        try:
            return Face.parse(name)
        except ValueError as exc:
            raise ModelError(str(exc), where) from exc

    dirichlet = [
        DirichletBC(b["patch"], face(b["face"], f"dirichlet[{j}].face"),
                    function(b["function"], f"dirichlet[{j}].function"), b.get("components"))
        for j, b in enumerate(doc.get("dirichlet", []))
    ]
    neumann = [
        NeumannBC(b["patch"], face(b["face"], f"neumann[{j}].face"),
                  function(b["function"], f"neumann[{j}].function"))
        for j, b in enumerate(doc.get("neumann", []))
    ]
    interfaces = []
    for j, it in enumerate(doc.get("interfaces", [])):
        try:
            interfaces.append(InterfaceSpec(
                it["patch1"], it["patch2"],
                face(it["face1"], f"interfaces[{j}].face1"),
                face(it["face2"], f"interfaces[{j}].face2"),
                gamma=it.get("gamma", 0.5), alpha=it.get("alpha"),
                theta=it.get("theta"), ngp=it.get("ngp"),
            ))
        except ModelError as exc:
            raise ModelError(str(exc), f"interfaces[{j}]") from exc
    model = MultiPatchModel(patches, materials, dirichlet, neumann, interfaces,
                            dict(doc.get("options", {})))
    return model.validate(check_interfaces=check_interfaces)


def load_model(path, check_interfaces: bool = True) -> MultiPatchModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}", str(path)) from exc
    return model_from_dict(doc, check_interfaces=check_interfaces)


def model_to_dict(model: MultiPatchModel) -> dict:
    mats: list[Material] = []
    for m in model.materials:
        if m not in mats:
            mats.append(m)
    doc = {
        "version": FORMAT_VERSION,
        "materials": [{"id": i, "E": m.E, "nu": m.nu, "formulation": m.formulation}
                      for i, m in enumerate(mats)],
        "patches": [
            {
                "degrees": list(p.degrees),
                "knots": [kv.knots.tolist() for kv in p.knot_vectors],
                "control_points": p.control_points.tolist(),
                "weights": p.weights.tolist(),
                "material": mats.index(m),
            }
            for p, m in zip(model.patches, model.materials)
        ],
        "dirichlet": [],
        "neumann": [{"patch": b.patch, "face": b.face.name, "function": b.function.to_dict()}
                    for b in model.neumann],
        "interfaces": [],
        "options": model.options,
    }
    for b in model.dirichlet:
        entry = {"patch": b.patch, "face": b.face.name, "function": b.function.to_dict()}
        if b.components is not None:
            entry["components"] = list(b.components)
        doc["dirichlet"].append(entry)
    for it in model.interfaces:
        entry = {"patch1": it.patch1, "patch2": it.patch2, "face1": it.face1.name,
                 "face2": it.face2.name, "gamma": it.gamma}
        for key in ("alpha", "theta", "ngp"):
            if getattr(it, key) is not None:
                entry[key] = getattr(it, key)
        doc["interfaces"].append(entry)
    return doc


def write_model(model: MultiPatchModel, path) -> None:
    atomic_write(path, json.dumps(model_to_dict(model), indent=1) + "\n")


# ---------------------------------------------------------------------------
# VTK


def von_mises(sig: np.ndarray, material: Material) -> np.ndarray:
    """Equivalent stress from Voigt rows; 2D uses ``sigma_zz = 0`` or the
    plane strain value ``nu (sigma_xx + sigma_yy)``."""
    sig = np.atleast_2d(sig)
    if sig.shape[1] == 3:
        sxx, syy, sxy = sig.T
        szz = material.nu * (sxx + syy) if material.formulation == "plane_strain" else 0.0 * sxx
        syz = sxz = 0.0 * sxx
    else:
        sxx, syy, szz, sxy, syz, sxz = sig.T
    return np.sqrt(0.5 * ((sxx - syy) ** 2 + (syy - szz) ** 2 + (szz - sxx) ** 2)
                   + 3.0 * (sxy ** 2 + syz ** 2 + sxz ** 2))


def _lattice_cells(density: int, dim: int, base: int) -> list[list[int]]:
    n = density + 1

    def idx(*ijk):
        a, stride = 0, 1
        for v in ijk:
            a += v * stride
            stride *= n
        return base + a

    cells = []
    if dim == 2:
        for j, i in itertools.product(range(density), repeat=2):
            cells.append([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)])
    else:
        for k, j, i in itertools.product(range(density), repeat=3):
            cells.append([idx(i, j, k), idx(i + 1, j, k), idx(i + 1, j + 1, k), idx(i, j + 1, k),
                          idx(i, j, k + 1), idx(i + 1, j, k + 1), idx(i + 1, j + 1, k + 1),
                          idx(i, j + 1, k + 1)])
    return cells


def sample_solution(sol, density: int = 3):
    """Per-element lattices: ``(points, u, sigma, vonMises, cells)``."""
    if density < 1:
        raise ValueError("density must be at least 1")
    dim = sol.model.dim
    t = np.linspace(0.0, 1.0, density + 1)
    unit = np.array(list(itertools.product(t, repeat=dim)))[:, ::-1]
    pts, us, sigs, vms, cells = [], [], [], [], []
    count = 0
    for pid, patch in enumerate(sol.model.patches):
        for el in sol.elements(pid):
            lo, hi = el.bounds[:, 0], el.bounds[:, 1]
            params = lo + unit * (hi - lo)
            u, _, sig, _ = sol.evaluate_element(pid, el, params)
            pts.append(eval_points(patch, params))
            us.append(u)
            sigs.append(sig)
            vms.append(von_mises(sig, sol.model.materials[pid]))
            cells.extend(_lattice_cells(density, dim, count))
            count += len(params)
    return (np.vstack(pts), np.vstack(us), np.vstack(sigs), np.concatenate(vms), cells)


def _fmt(v: float) -> str:
    # shortest text that round-trips the double; keeps output byte-stable
    return repr(float(v))


def vtk_text(sol, density: int = 3) -> str:
    pts, u, sig, vm, cells = sample_solution(sol, density)
    dim = sol.model.dim
    npts = len(pts)
    pad = np.zeros((npts, 3 - dim))
    lines = ["# vtk DataFile Version 3.0", "nitsche_iga solution", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {npts} double"]
    lines += [" ".join(map(_fmt, row)) for row in np.hstack([pts, pad])]
    nper = 4 if dim == 2 else 8
    lines.append(f"CELLS {len(cells)} {len(cells) * (nper + 1)}")
    lines += [f"{nper} " + " ".join(map(str, c)) for c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(VTK_QUAD if dim == 2 else VTK_HEXAHEDRON)] * len(cells)
    lines += [f"POINT_DATA {npts}", "FIELD FieldData 3"]
    for name, arr in (("u", np.hstack([u, pad])), ("sigma", sig), ("vonMises", vm[:, None])):
        lines.append(f"{name} {arr.shape[1]} {npts} double")
        lines += [" ".join(map(_fmt, row)) for row in arr]
    return "\n".join(lines) + "\n"


def export_vtk(sol, path, density: int = 3) -> Path:
    """Legacy ASCII unstructured grid with point arrays ``u``, ``sigma``, ``vonMises``."""
    path = Path(path)
    atomic_write(path, vtk_text(sol, density))
    return path
