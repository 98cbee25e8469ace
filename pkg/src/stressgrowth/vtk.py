"""Legacy ASCII VTK writer for hexahedral meshes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

VTK_HEXAHEDRON = 12


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _write_arrays(out, arrays, count):
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape[0] != count:
            raise ValueError(f"array {name!r} has {arr.shape[0]} entries, expected {count}")
        tail = arr.shape[1:]
        if tail == ():
            out.append(f"SCALARS {name} double 1")
            out.append("LOOKUP_TABLE default")
            out.extend(repr(float(v)) for v in arr)
        elif tail == (3,):
            out.append(f"VECTORS {name} double")
            out.extend(_fmt(v) for v in arr)
        elif tail == (3, 3):
            out.append(f"TENSORS {name} double")
            out.extend(_fmt(v) for v in arr)
        else:
            raise ValueError(f"array {name!r}: unsupported shape {arr.shape}")


def write_vtk(path, mesh, point_data=None, cell_data=None, title="stressgrowth"):
    """Write an unstructured grid with optional point and cell arrays.

    Arrays may be scalars ``(n,)``, vectors ``(n, 3)`` or tensors ``(n, 3, 3)``.
    """
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {mesh.n_nodes} double")
    out.extend(_fmt(x) for x in mesh.nodes)
    ne = mesh.n_elements
    out.append(f"CELLS {ne} {ne * 9}")
    out.extend("8 " + " ".join(str(int(i)) for i in conn) for conn in mesh.elements)
    out.append(f"CELL_TYPES {ne}")
    out.extend([str(VTK_HEXAHEDRON)] * ne)
    if cell_data:
        out.append(f"CELL_DATA {ne}")
        _write_arrays(out, cell_data, ne)
    if point_data:
        out.append(f"POINT_DATA {mesh.n_nodes}")
        _write_arrays(out, point_data, mesh.n_nodes)
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def read_vtk_header(path):
    """Counts of points and cells plus the array names found in a file written here."""
    info = {"points": None, "cells": None, "arrays": []}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "POINTS":
            info["points"] = int(parts[1])
        elif parts[0] == "CELLS":
            info["cells"] = int(parts[1])
        elif parts[0] in ("SCALARS", "VECTORS", "TENSORS"):
            info["arrays"].append(parts[1])
    return info
