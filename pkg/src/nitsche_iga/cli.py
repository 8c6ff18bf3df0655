"""Command-line entry point: ``nitsche-iga {run,converge,inspect}``.

Failures print one line to stderr of the form
``error=<ExceptionType> path=<field path> message=<JSON string>`` and exit
nonzero (2 for model problems, 3 for solver failures, 1 otherwise).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import IGAError, ModelError, SolverError
from .io import atomic_write, export_vtk, load_model
from .mesh import num_elements
from .model import MultiPatchModel, locate_point
from .nitsche import trace_alphas
from .solver import applied_load_resultant, assemble_global, solve
from .verification import convergence_study


def _apply_overrides(model: MultiPatchModel, args) -> MultiPatchModel:
    if getattr(args, "degree", None) is not None and args.command != "converge":
        model = model.elevated(args.degree)
    changes = {}
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.gamma is not None:
        changes["gamma"] = args.gamma
    if args.gp is not None:
        changes["ngp"] = args.gp
    if changes:
        model.interfaces = [dataclasses.replace(it, **changes) for it in model.interfaces]
    return model


def tip_point(model: MultiPatchModel) -> np.ndarray:
    """``options['tip']`` or the centre of the bounding-box face of largest x."""
    if "tip" in model.options:
        return np.asarray(model.options["tip"], dtype=float)
    pts = np.vstack([p.control_points for p in model.patches])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    tip = 0.5 * (lo + hi)
    tip[0] = hi[0]
    return tip


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def cmd_run(model: MultiPatchModel, args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    system = assemble_global(model, threads=args.threads)
    sol = solve(system, check_spd=args.check_spd)
    tip = tip_point(model)
    pid, pt = locate_point(model, tip)
    u_tip, _, _ = sol.evaluate(pid, pt)
    load = applied_load_resultant(system)
    reaction = sol.reaction_resultant()
    scale = max(np.abs(reaction).max(), np.abs(load).max(), 1e-300)
    summary = {
        "patches": len(model.patches),
        "elements": sum(num_elements(p) for p in model.patches),
        "dofs": system.ndof,
        "constrained_dofs": system.constrained.size,
        "interfaces": len(model.interfaces),
        "residual": sol.residual,
        "equilibrium_error": float(np.abs(reaction + load).max() / scale),
        "tip_point": tip,
        "tip_displacement": u_tip,
        "tip_deflection": float(u_tip[-1]),
    }
    vtk = export_vtk(sol, out / "solution.vtk", density=args.density)
    summary["vtk"] = vtk
    summary["seconds"] = time.perf_counter() - t0
    text = "".join(f"{k}={_fmt(v)}\n" for k, v in summary.items())
    atomic_write(out / "summary.txt", text)
    sys.stdout.write(text)
    return summary


def cmd_converge(model: MultiPatchModel, args) -> str:
    report = convergence_study(model, args.levels, degree=args.degree, threads=args.threads)
    csv = report.to_csv()
    if args.out:
        atomic_write(args.out, csv)
    else:
        sys.stdout.write(csv)
    return csv


def cmd_inspect(model: MultiPatchModel, args) -> str:
    lines = []
    offsets = model.dof_offsets()
    for i, p in enumerate(model.patches):
        lines.append(
            f"patch={i} degrees={_fmt(p.degrees)} shape={_fmt(p.shape)} "
            f"elements={num_elements(p)} control_points={p.num_control_points} "
            f"dofs={int(offsets[i + 1] - offsets[i])} formulation={model.materials[i].formulation}"
        )
    for j, it in enumerate(model.interfaces):
        alphas = trace_alphas(model, it)
        lines.append(
            f"interface={j} patches={it.patch1},{it.patch2} faces={it.face1},{it.face2} "
            f"gamma={_fmt(it.gamma)} alpha_min={_fmt(alphas.min())} alpha_max={_fmt(alphas.max())} "
            f"alpha_source={'explicit' if it.alpha is not None else 'estimate'}"
        )
    lines.append(
        f"total patches={len(model.patches)} "
        f"elements={sum(num_elements(p) for p in model.patches)} dofs={model.num_dofs} "
        f"interfaces={len(model.interfaces)}"
    )
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nitsche-iga",
                                     description="Multi-patch NURBS elasticity with Nitsche coupling")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="model JSON file")
        p.add_argument("--alpha", type=float, help="override alpha on every interface")
        p.add_argument("--gamma", type=float, help="override gamma on every interface")
        p.add_argument("--gp", type=int, help="interface Gauss points per direction")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--degree", type=int, help="elevate every patch to this degree")

    run = sub.add_parser("run", help="solve and export VTK plus summary")
    common(run)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--density", type=int, default=3, help="VTK samples per element edge")
    run.add_argument("--check-spd", action="store_true", help="fail on a non-positive pivot")

    conv = sub.add_parser("converge", help="uniform refinement study, CSV output")
    common(conv)
    conv.add_argument("--levels", type=int, required=True)
    conv.add_argument("--out", help="CSV file (default stdout)")

    insp = sub.add_parser("inspect", help="patch, element and dof statistics")
    common(insp)
    return parser


def _error_line(exc: BaseException) -> str:
    path = getattr(exc, "path", "") or ""
    return f"error={type(exc).__name__} path={path or '-'} message={json.dumps(str(exc))}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ModelError("--threads must be positive", "--threads")
        model = _apply_overrides(load_model(args.model), args)
        {"run": cmd_run, "converge": cmd_converge, "inspect": cmd_inspect}[args.command](model, args)
    except (ModelError, FileNotFoundError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 2
    except SolverError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 3
    except (IGAError, ValueError, OSError) as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
