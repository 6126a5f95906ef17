"""Versioned JSON patch/model files and a legacy-VTK field writer.

Layout of a patch file (``format: "klshell-patch"``)::

    {"format": "klshell-patch", "version": 1,
     "patch": {"name": ..., "geometry": SURFACE, "space": SPACE,
               "material": MATERIAL, "trims": [TRIM, ...]}}

    SPACE    = {"degrees": [p, q], "knots": [[...], [...]], "weights": null | [...]}
    SURFACE  = {"space": SPACE, "control_points": [[x, y, z], ...]}
    CURVE    = {"degree": p, "knots": [...], "weights": null | [...],
                "control_points": [[u, v], ...]}
    TRIM     = {"curve": CURVE, "keep_left": true}
    MATERIAL = {"type": "isotropic", "E": ..., "nu": ..., "t": ...}
             | {"type": "laminate", "plies": [{"E1", "E2", "G12", "nu12",
                                               "angle", "thickness"}, ...]}

Control points and weights are listed in row-major tensor order: function
``(i, j)`` sits at position ``i * n2 + j`` with ``i`` running along the first
parameter.  A model file (``format: "klshell-model"``) holds a list of
patches plus ``interfaces`` (two sides, each a patch index and a parameter
curve, with optional ``t_range``/``active``) and ``cross_points``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .coupling import CrossPoint, Interface, InterfaceSide, MultiPatchModel
from .errors import FormatError
from .geometry import SurfaceMap
from .shell import Isotropic, Laminate, Patch, Ply
from .spline import KnotVector, SplineCurve, SplineSpace, eval_tensor_basis
from .trimming import TrimCurve

FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def space_to_dict(space: SplineSpace) -> dict:
    return {"degrees": [kv.degree for kv in space.knot_vectors],
            "knots": [_floats(kv.knots) for kv in space.knot_vectors],
            "weights": None if space.weights is None else _floats(space.weights)}


def space_from_dict(d: dict) -> SplineSpace:
    try:
        kvs = [KnotVector(k, p) for k, p in zip(d["knots"], d["degrees"], strict=True)]
        return SplineSpace(kvs, d.get("weights"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad spline space entry: {exc}") from exc


def curve_to_dict(curve: SplineCurve) -> dict:
    kv = curve.knot_vector
    return {"degree": kv.degree, "knots": _floats(kv.knots),
            "weights": None if curve.space.weights is None else _floats(curve.space.weights),
            "control_points": _floats(curve.control_points)}


def curve_from_dict(d: dict) -> SplineCurve:
    try:
        space = SplineSpace([KnotVector(d["knots"], d["degree"])], d.get("weights"))
        return SplineCurve(space, d["control_points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad curve entry: {exc}") from exc


def surface_to_dict(smap: SurfaceMap) -> dict:
    return {"space": space_to_dict(smap.space), "control_points": _floats(smap.control_points)}


def surface_from_dict(d: dict) -> SurfaceMap:
    try:
        return SurfaceMap(space_from_dict(d["space"]), d["control_points"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad surface entry: {exc}") from exc


def material_to_dict(mat) -> dict:
    if isinstance(mat, Isotropic):
        return {"type": "isotropic", "E": mat.E, "nu": mat.nu, "t": mat.t}
    if isinstance(mat, Laminate):
        return {"type": "laminate",
                "plies": [{"E1": p.E1, "E2": p.E2, "G12": p.G12, "nu12": p.nu12,
                           "angle": p.angle, "thickness": p.thickness} for p in mat.plies]}
    raise TypeError(f"cannot serialize material {type(mat).__name__}")


def material_from_dict(d: dict):
    kind = d.get("type")
    try:
        if kind == "isotropic":
            return Isotropic(float(d["E"]), float(d["nu"]), float(d["t"]))
        if kind == "laminate":
            return Laminate(tuple(Ply(**{k: float(v) for k, v in p.items()}) for p in d["plies"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad material entry: {exc}") from exc
    raise FormatError(f"unknown material type {kind!r}")


def patch_to_dict(patch: Patch) -> dict:
    return {"name": patch.name,
            "geometry": surface_to_dict(patch.geometry),
            "space": space_to_dict(patch.space),
            "material": material_to_dict(patch.material),
            "trims": [{"curve": curve_to_dict(c.source), "keep_left": c.keep_left}
                      for c in patch.trims]}


def patch_from_dict(d: dict) -> Patch:
    try:
        trims = [TrimCurve(curve_from_dict(t["curve"]), bool(t.get("keep_left", True)))
                 for t in d.get("trims", [])]
        return Patch(surface_from_dict(d["geometry"]), space_from_dict(d["space"]),
                     material_from_dict(d["material"]), trims, name=d.get("name", ""))
    except KeyError as exc:
        raise FormatError(f"patch entry is missing {exc}") from exc


def model_to_dict(model: MultiPatchModel) -> dict:
    return {"patches": [patch_to_dict(p) for p in model.patches],
            "interfaces": [{"name": f.name, "t_range": list(f.t_range), "active": f.active,
                            "sides": [{"patch": s.patch, "curve": curve_to_dict(s.curve)}
                                      for s in f.sides]} for f in model.interfaces],
            "cross_points": [{"name": c.name,
                              "incident": [[i, list(map(float, q))] for i, q in c.incident]}
                             for c in model.cross_points]}


def model_from_dict(d: dict) -> MultiPatchModel:
    try:
        patches = [patch_from_dict(p) for p in d["patches"]]
        ifaces = [Interface(tuple(InterfaceSide(int(s["patch"]), curve_from_dict(s["curve"]))
                                  for s in f["sides"]),
                            tuple(f.get("t_range", (0.0, 1.0))), f.get("active"),
                            f.get("name", "")) for f in d.get("interfaces", [])]
        cps = [CrossPoint([(int(i), tuple(q)) for i, q in c["incident"]], c.get("name", ""))
               for c in d.get("cross_points", [])]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad model entry: {exc}") from exc
    return MultiPatchModel(patches, ifaces, cps)


def _wrap(kind: str, key: str, body: dict) -> dict:
    return {"format": f"klshell-{kind}", "version": FORMAT_VERSION, key: body}


def _unwrap(doc: dict, kind: str) -> dict:
    if not isinstance(doc, dict) or doc.get("format") != f"klshell-{kind}":
        raise FormatError(f"not a klshell {kind} file")
    version = doc.get("version")
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(f"unsupported {kind} file version {version!r}")
    return doc


def dumps_patch(patch: Patch) -> str:
    return json.dumps(_wrap("patch", "patch", patch_to_dict(patch)), indent=1)


def loads_patch(text: str) -> Patch:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return patch_from_dict(_unwrap(doc, "patch")["patch"])


def save_patch(patch: Patch, path) -> None:
    Path(path).write_text(dumps_patch(patch))


def load_patch(path) -> Patch:
    return loads_patch(Path(path).read_text())


def save_model(model: MultiPatchModel, path) -> None:
    doc = {"format": "klshell-model", "version": FORMAT_VERSION, **model_to_dict(model)}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> MultiPatchModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from exc
    return model_from_dict(_unwrap(doc, "model"))


def _displacement(patch: Patch, coeffs, q) -> np.ndarray:
    """Displacement at ``q``; inactive functions (trimmed away) contribute zero."""
    ev = eval_tensor_basis(patch.space, q, 0)
    loc = patch.local_of[ev.indices]
    dofs = patch.offset + 3 * np.maximum(loc, 0)[..., None] + np.arange(3)
    U = np.where(loc[..., None] >= 0, np.asarray(coeffs)[dofs], 0.0)
    return np.einsum("nk,nkc->nc", ev.values[:, 0], U)


def write_vtk(path, patches, coeffs, samples: int = 4) -> int:
    """Sample the displacement on a ``samples x samples`` grid per active element
    and write a legacy ASCII unstructured grid of quads.  Cells whose centre lies
    outside the kept region are skipped.  Returns the number of cells."""
    pts_all, disp_all, cells = [], [], []
    base = 0
    s = np.linspace(0.0, 1.0, samples + 1)
    for patch in patches:
        b0, b1 = patch.domain.breaks
        for ex, ey in zip(*np.nonzero(patch.domain.active_elements().reshape(len(b0) - 1, -1))):
            u = b0[ex] + s * (b0[ex + 1] - b0[ex])
            v = b1[ey] + s * (b1[ey + 1] - b1[ey])
            U, V = np.meshgrid(u, v, indexing="ij")
            q = np.column_stack([U.ravel(), V.ravel()])
            uc = 0.5 * (u[:-1] + u[1:])
            vc = 0.5 * (v[:-1] + v[1:])
            C = np.array([(a, b) for a in uc for b in vc])
            keep = patch.domain.contains(C).reshape(samples, samples)
            if not keep.any():
                continue
            pts_all.append(patch.geometry(q))
            disp_all.append(_displacement(patch, coeffs, q))
            m = samples + 1
            for i, j in zip(*np.nonzero(keep)):
                a = base + i * m + j
                cells.append((a, a + m, a + m + 1, a + 1))
            base += m * m
    P = np.concatenate(pts_all) if pts_all else np.zeros((0, 3))
    D = np.concatenate(disp_all) if disp_all else np.zeros((0, 3))
    lines = ["# vtk DataFile Version 3.0", "klshell displacement", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(P)} double"]
    lines += [f"{x:.10g} {y:.10g} {z:.10g}" for x, y, z in P]
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += ["9"] * len(cells)
    lines += [f"POINT_DATA {len(P)}", "VECTORS displacement double"]
    lines += [f"{x:.10g} {y:.10g} {z:.10g}" for x, y, z in D]
    Path(path).write_text("\n".join(lines) + "\n")
    return len(cells)
