"""Structured hexahedral meshes for the built-in scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# local node coordinates of the trilinear hexahedron, counter-clockwise bottom then top
HEX8_NODES = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=float)

GAUSS_1D = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# 2x2x2 rule, unit weights; ordering follows HEX8_NODES
GAUSS_POINTS = HEX8_NODES / np.sqrt(3.0)
GAUSS_WEIGHTS = np.ones(8)

# (nx, ny, nz) per stripe refinement level
STRIPE_LEVELS = {0: (2, 6, 30), 1: (2, 6, 34), 2: (2, 9, 25), 3: (2, 10, 50), 4: (3, 20, 50)}
STRIPE_SIZE = (2.0, 2.0, 8.0)
# ratio of the largest to the smallest element edge along y and z
STRIPE_GRADING = (3.0, 8.0)


@dataclass
class Mesh:
    nodes: np.ndarray
    elements: np.ndarray
    node_sets: dict = field(default_factory=dict)
    element_sets: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise ValueError("nodes must have shape (n, 3)")
        if self.elements.ndim != 2 or self.elements.shape[1] != 8:
            raise ValueError("elements must have shape (n, 8)")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise ValueError("connectivity index out of range")

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    def nearest_node(self, point):
        return int(np.argmin(np.linalg.norm(self.nodes - np.asarray(point, float), axis=1)))

    def reference_jacobians(self):
        """``det(dX/dxi)`` at every Gauss point, shape ``(n_elements, 8)``."""
        from .fem import shape_hex8

        _, dn = shape_hex8(GAUSS_POINTS)  # (8gp, 8, 3)
        jac = np.einsum("eai,gaj->egij", self.nodes[self.elements], dn)
        return np.linalg.det(jac)


def _grid(xs, ys, zs):
    nx, ny, nz = len(xs) - 1, len(ys) - 1, len(zs) - 1
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    elements = np.column_stack([
        nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k), nid(i, j + 1, k),
        nid(i, j, k + 1), nid(i + 1, j, k + 1), nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1),
    ])
    return nodes, elements, (i, j, k)


def _face_sets(nodes, lo, hi):
    tol = 1e-12 * max(1.0, float(np.max(np.abs(hi))))
    sets = {}
    for axis, name in enumerate("xyz"):
        sets[f"{name}0"] = np.flatnonzero(np.abs(nodes[:, axis] - lo[axis]) <= tol)
        sets[f"{name}1"] = np.flatnonzero(np.abs(nodes[:, axis] - hi[axis]) <= tol)
    return sets


def build_block_mesh(nx, ny, nz, lx=1.0, ly=1.0, lz=1.0):
    """Uniform box ``[0, lx] x [0, ly] x [0, lz]``.

    Node sets: the six faces ``x0 ... z1`` and the probe points ``p1 = (lx, ly, lz)``
    and ``p2 = (lx, ly, lz/2)`` when they fall on a grid node.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("element counts must be at least 1")
    xs, ys, zs = (np.linspace(0.0, length, n + 1) for n, length in ((nx, lx), (ny, ly), (nz, lz)))
    nodes, elements, _ = _grid(xs, ys, zs)
    sets = _face_sets(nodes, (0.0, 0.0, 0.0), (lx, ly, lz))
    for name, point in (("p1", (lx, ly, lz)), ("p2", (lx, ly, 0.5 * lz))):
        hit = np.flatnonzero(np.linalg.norm(nodes - np.array(point), axis=1) <= 1e-12)
        if hit.size:
            sets[name] = hit
    return Mesh(nodes, elements, sets)


def graded_coordinates(n, length, ratio, fine_end):
    """``n + 1`` coordinates on ``[0, length]`` whose edge lengths form a geometric
    sequence with ``max/min == ratio``, smallest at ``fine_end`` (``"low"`` or ``"high"``)."""
    if n == 1 or ratio == 1.0:
        return np.linspace(0.0, length, n + 1)
    q = ratio ** (1.0 / (n - 1))
    h = q ** np.arange(n)
    if fine_end == "high":
        h = h[::-1]
    x = np.concatenate([[0.0], np.cumsum(h)])
    x *= length / x[-1]
    x[-1] = length
    return x


def build_stripe_mesh(level):
    """Quarter model of the clamped stripe: ``x`` thickness, ``y`` half-width, ``z`` half-length.

    The mesh is graded towards the clamped free-edge corner ``(y = 2, z = 0)``.
    Node sets: ``clamp`` (z = 0), ``sym_x`` (x = 0), ``sym_y`` (y = 0), ``sym_z``
    (z = 8) and the remaining faces. Element sets: ``corner`` (touching the line
    y = 2, z = 0) and ``midplane`` (touching z = 8).
    """
    if level not in STRIPE_LEVELS:
        raise ValueError(f"stripe level must be one of {sorted(STRIPE_LEVELS)}")
    nx, ny, nz = STRIPE_LEVELS[level]
    lx, ly, lz = STRIPE_SIZE
    xs = np.linspace(0.0, lx, nx + 1)
    ys = graded_coordinates(ny, ly, STRIPE_GRADING[0], "high")
    zs = graded_coordinates(nz, lz, STRIPE_GRADING[1], "low")
    nodes, elements, (_, j, k) = _grid(xs, ys, zs)
    faces = _face_sets(nodes, (0.0, 0.0, 0.0), (lx, ly, lz))
    sets = {"clamp": faces["z0"], "sym_x": faces["x0"], "sym_y": faces["y0"], "sym_z": faces["z1"],
            "free_x": faces["x1"], "free_y": faces["y1"]}
    element_sets = {"corner": np.flatnonzero((j == ny - 1) & (k == 0)),
                    "midplane": np.flatnonzero(k == nz - 1)}
    return Mesh(nodes, elements, sets, element_sets)
