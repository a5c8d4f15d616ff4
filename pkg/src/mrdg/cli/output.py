"""Frame and mesh writers: CSV (17 significant digits) and legacy VTK."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..mesh import Mesh

VTK_CELL_TYPES = {("interval", 2): 3, ("tri", 3): 5, ("quad", 4): 9}


@dataclass
class FrameOutput:
    time: float
    centroids: np.ndarray
    averages: np.ndarray          # (n_e, M)
    order_code: np.ndarray        # (n_e,) int: retained degree, -1 slope-limited
    component_names: list
    coefficients: np.ndarray | None = None


def component_names(physics):
    if physics.n_comp == 1:
        return ["u"]
    if physics.dim == 1:
        return ["rho", "mom_x", "energy"]
    return ["rho", "mom_x", "mom_y", "energy"]


def write_frame(frame: FrameOutput, path_base, fmt="csv", mesh: Mesh = None,
                paper_order_codes=False):
    """Write one frame; returns the list of file paths produced."""
    codes = frame.order_code.astype(int)
    if paper_order_codes:
        codes = np.where(codes < 0, 0, codes)
    paths = []
    if fmt == "csv":
        path = str(path_base) + ".csv"
        dim = frame.centroids.shape[1]
        header = ("x," if dim == 1 else "x,y,") \
            + ",".join(frame.component_names) + ",order_code"
        rows = [header]
        for i in range(len(codes)):
            cols = [f"{c:.17g}" for c in frame.centroids[i]]
            cols += [f"{v:.17g}" for v in frame.averages[i]]
            cols.append(str(int(codes[i])))
            rows.append(",".join(cols))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")
        paths.append(path)
    elif fmt == "vtk":
        if mesh is None:
            raise ValueError("VTK output needs the mesh")
        path = str(path_base) + ".vtk"
        _write_vtk(path, mesh, frame, codes)
        paths.append(path)
    else:
        raise ValueError(f"unknown frame format {fmt!r}")
    if frame.coefficients is not None:
        cpath = str(path_base) + "_coeffs.npy"
        np.save(cpath, frame.coefficients)
        paths.append(cpath)
    return paths


def read_frame_csv(path):
    """Inverse of the CSV writer: (centroids, averages, codes, names)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    dim = 2 if header[1] == "y" else 1
    names = header[dim:-1]
    return data[:, :dim], data[:, dim:-1], data[:, -1].astype(int), names


def _write_vtk(path, mesh: Mesh, frame: FrameOutput, codes):
    n_v = len(mesh.vertices)
    lines = ["# vtk DataFile Version 3.0",
             f"mrdg frame t={frame.time:.17g}",
             "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n_v} double"]
    for v in mesh.vertices:
        x = v[0]
        y = v[1] if mesh.dim == 2 else 0.0
        lines.append(f"{x:.17g} {y:.17g} 0")
    total = int(np.sum(mesh.elem_nv + 1))
    lines.append(f"CELLS {mesh.n_elements} {total}")
    for e in range(mesh.n_elements):
        nv = int(mesh.elem_nv[e])
        lines.append(f"{nv} " + " ".join(str(int(v))
                                         for v in mesh.elem_verts[e, :nv]))
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    for e in range(mesh.n_elements):
        kind = "interval" if mesh.dim == 1 else \
            ("tri" if mesh.elem_nv[e] == 3 else "quad")
        lines.append(str(VTK_CELL_TYPES[(kind, int(mesh.elem_nv[e]))]))
    lines.append(f"CELL_DATA {mesh.n_elements}")
    for j, name in enumerate(frame.component_names):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.17g}" for v in frame.averages[:, j])
    lines.append("SCALARS order int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(c)) for c in codes)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_manifest(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def read_manifest(path):
    with open(path) as fh:
        return json.load(fh)
