"""Total-Lagrangian quasi-static finite elements on trilinear hexahedra.

Element quantities are computed for all elements at once; arrays carry the
element index first and the Gauss point index second. Dofs are numbered
``3 * node + component``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import tensor as tn
from .errors import (DegenerateDirectionError, ElementInversionError, LocalConvergenceError, NotSPDError,
                     SingularMatrixError, StepFailureError)
from .mesh import GAUSS_POINTS, GAUSS_WEIGHTS, HEX8_NODES

DOF_NAMES = {"x": 0, "y": 1, "z": 2}
# roundoff allowance in the global convergence test, in units of eps * |internal force|
ROUNDOFF_FACTOR = 1000.0


def shape_hex8(xi):
    """Trilinear shape functions and their local gradients.

    ``xi`` has shape ``(..., 3)``; returns values ``(..., 8)`` and gradients ``(..., 8, 3)``.
    """
    xi = np.asarray(xi, dtype=float)
    lin = 1.0 + xi[..., None, :] * HEX8_NODES  # (..., 8, 3)
    values = 0.125 * np.prod(lin, axis=-1)
    grads = np.empty(lin.shape)
    grads[..., 0] = 0.125 * HEX8_NODES[:, 0] * lin[..., 1] * lin[..., 2]
    grads[..., 1] = 0.125 * HEX8_NODES[:, 1] * lin[..., 0] * lin[..., 2]
    grads[..., 2] = 0.125 * HEX8_NODES[:, 2] * lin[..., 0] * lin[..., 1]
    return values, grads


def reference_gradients(coords):
    """Physical shape gradients ``(ne, 8gp, 8, 3)`` and ``w det J`` ``(ne, 8gp)``."""
    coords = np.asarray(coords, dtype=float)
    _, dn = shape_hex8(GAUSS_POINTS)
    jac = np.einsum("eai,gaj->egij", coords, dn)
    det = np.linalg.det(jac)
    if np.any(det <= 0):
        raise ElementInversionError("reference element with non-positive Jacobian")
    dndx = np.einsum("gaj,egji->egai", dn, np.linalg.inv(jac))
    return dndx, det * GAUSS_WEIGHTS


# ---------------------------------------------------------------------------
# element kernel


def deformation_gradients(ue, dndx):
    """``F = I + sum_a u_a (x) grad N_a`` for element displacements ``ue`` ``(ne, 8, 3)``."""
    return tn.I3 + np.einsum("eak,egai->egki", ue, dndx)


def _b_matrix(f, dndx):
    ne, ng = dndx.shape[:2]
    b = np.empty((ne, ng, 6, 8, 3))
    for v, (i, j) in enumerate(tn.VOIGT_INDEX):
        if i == j:
            b[:, :, v] = dndx[..., :, i, None] * f[..., None, :, i]
        else:
            b[:, :, v] = dndx[..., :, j, None] * f[..., None, :, i] + dndx[..., :, i, None] * f[..., None, :, j]
    return b.reshape(ne, ng, 6, 24)


def element_arrays(f, dndx, weights, stress, tangent=None):
    """Internal forces ``(ne, 24)`` and, if ``tangent`` is given, stiffness ``(ne, 24, 24)``.

    ``stress`` is the Voigt PK2 stress ``(ne, 8, 6)`` and ``tangent`` the material
    tangent ``(ne, 8, 6, 6)`` in engineering-shear columns.
    """
    b = _b_matrix(f, dndx)
    wb = weights[..., None, None] * b
    fint = np.einsum("egvd,egv->ed", wb, stress)
    if tangent is None:
        return fint, None
    ne = f.shape[0]
    k = np.matmul(np.swapaxes(wb, -1, -2), tangent @ b).sum(axis=1)
    s = tn.voigt_unpack(stress)
    geo = np.einsum("egai,egij,egbj->eab", weights[..., None, None] * dndx, s, dndx)
    k = k.reshape(ne, 8, 3, 8, 3)
    k += geo[:, :, None, :, None] * tn.I3[None, None, :, None, :]
    return fint, k.reshape(ne, 24, 24)


def _right_cauchy_green(f):
    det_f = tn.det(f)
    if np.any(~np.isfinite(det_f)) or np.any(det_f <= 0.0):
        bad = np.unique(np.argwhere(~(det_f > 0))[:, 0])
        raise ElementInversionError(f"det F <= 0 in {bad.size} element(s), first {bad[0]}")
    return tn.transpose(f) @ f


def element_force_stiffness(coords, nodal_u, gp_states, material, dt):
    """Internal force (24), stiffness (24x24) and updated Gauss states of one element.

    ``gp_states`` is a material state with 8 entries (one per Gauss point).
    """
    coords = np.asarray(coords, dtype=float).reshape(1, 8, 3)
    ue = np.asarray(nodal_u, dtype=float).reshape(1, 8, 3)
    dndx, w = reference_gradients(coords)
    f = deformation_gradients(ue, dndx)
    c = _right_cauchy_green(f).reshape(8, 3, 3)
    resp = material.update(c, gp_states, dt)
    fint, k = element_arrays(f, dndx, w, resp.stress.reshape(1, 8, 6), resp.tangent.reshape(1, 8, 6, 6))
    return fint[0], k[0], resp.state_new


# ---------------------------------------------------------------------------
# boundary conditions


class TimeFunction:
    """Piecewise-constant hold schedule given by ``(step, value)`` pairs.

    The value at step ``k`` is that of the last pair with ``step <= k`` (zero before
    the first pair). Fractional step coordinates, used by bisected sub-steps,
    interpolate linearly between consecutive integer steps.
    """

    def __init__(self, pairs):
        pairs = sorted((int(s), float(v)) for s, v in pairs)
        steps = [s for s, _ in pairs]
        if len(set(steps)) != len(steps):
            raise ValueError("duplicate step index in time function")
        self.pairs = pairs
        self._steps = np.array(steps, dtype=float)
        self._values = np.array([v for _, v in pairs])

    @classmethod
    def constant(cls, value=0.0):
        return cls([(0, value)])

    def at_step(self, k):
        idx = np.searchsorted(self._steps, k, side="right") - 1
        return float(self._values[idx]) if idx >= 0 else 0.0

    def __call__(self, s):
        k = math.ceil(s)
        if k == s:
            return self.at_step(k)
        lo = self.at_step(k - 1)
        return lo + (s - (k - 1)) * (self.at_step(k) - lo)

    def breakpoints(self):
        return [s for s, _ in self.pairs]


@dataclass
class DirichletBC:
    node_set: str
    dof: int
    fn: TimeFunction

    def __post_init__(self):
        if isinstance(self.dof, str):
            self.dof = DOF_NAMES[self.dof]
        if self.dof not in (0, 1, 2):
            raise ValueError(f"dof must be x, y or z, got {self.dof!r}")


class BCSchedule:
    """Dirichlet data: a list of :class:`DirichletBC` entries."""

    def __init__(self, entries):
        self.entries = list(entries)

    def bind(self, mesh):
        """Resolve node sets; returns ``(dofs, owners)`` with ``owners[i]`` the entry
        index driving ``dofs[i]``. Raises ``ValueError`` on conflicting entries."""
        owner = {}
        for idx, bc in enumerate(self.entries):
            if bc.node_set not in mesh.node_sets:
                raise ValueError(f"unknown node set {bc.node_set!r}")
            for node in mesh.node_sets[bc.node_set]:
                dof = 3 * int(node) + bc.dof
                prev = owner.get(dof)
                if prev is not None and prev != idx and not self._agree(self.entries[prev].fn, bc.fn):
                    raise ValueError(f"conflicting Dirichlet values at node {node}, dof {bc.dof}")
                owner.setdefault(dof, idx)
        dofs = np.array(sorted(owner), dtype=np.int64)
        return dofs, np.array([owner[d] for d in dofs], dtype=np.int64)

    @staticmethod
    def _agree(a, b):
        ks = set(a.breakpoints()) | set(b.breakpoints()) | {0}
        return all(a.at_step(k) == b.at_step(k) for k in ks)

    def values(self, owners, s):
        vals = np.array([bc.fn(s) for bc in self.entries])
        return vals[owners] if len(vals) else np.zeros(0)


@dataclass
class SolveConfig:
    dt: float = 1.0
    steps: int = 1
    tol_rel: float = 1e-8
    tol_abs: float = 1e-12
    max_iter: int = 25
    max_bisections: int = 10

    def __post_init__(self):
        if not self.dt > 0 or self.steps < 1 or self.tol_rel <= 0 or self.tol_abs <= 0 or self.max_iter < 1:
            raise ValueError("solver settings must be positive")
        if self.max_bisections < 0:
            raise ValueError("max_bisections must be non-negative")


@dataclass
class GaussPointStore:
    """Committed Gauss-point states plus the reference quadrature data."""

    state: object
    dndx: np.ndarray
    weights: np.ndarray
    fields: dict = field(default_factory=dict)

    @classmethod
    def create(cls, mesh, material):
        dndx, w = reference_gradients(mesh.nodes[mesh.elements])
        return cls(material.initial_state(mesh.n_elements * 8), dndx, w)

    @property
    def n_elements(self):
        return self.dndx.shape[0]


@dataclass
class StepResult:
    step: int
    time: float
    u: np.ndarray
    reactions: dict
    iterations: int
    substeps: int
    residual_history: list
    fields: dict


# ---------------------------------------------------------------------------
# assembly and solution


class _Pattern:
    """Sparsity pattern shared by all assemblies of one mesh."""

    def __init__(self, elements, ndof):
        self.ndof = ndof
        edofs = (3 * elements[:, :, None] + np.arange(3)).reshape(-1, 24)
        self.edofs = edofs
        rows = np.repeat(edofs, 24, axis=1).ravel()
        cols = np.tile(edofs, (1, 24)).ravel()
        keys, self.inverse = np.unique(rows * ndof + cols, return_inverse=True)
        self.rows = keys // ndof
        self.cols = keys % ndof

    def vector(self, fe):
        return np.bincount(self.edofs.ravel(), weights=fe.ravel(), minlength=self.ndof)

    def matrix(self, ke):
        data = np.bincount(self.inverse, weights=ke.ravel(), minlength=self.rows.size)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.ndof, self.ndof))


class _IncrementFailure(Exception):
    pass


@dataclass
class _Evaluation:
    fint: np.ndarray
    force_scale: float
    response: object
    f: np.ndarray
    c: np.ndarray


class Solver:
    """Time-stepping driver: owns the displacement field and the committed store."""

    def __init__(self, mesh, material, schedule, config, reaction_sets=()):
        self.mesh = mesh
        self.material = material
        self.schedule = schedule
        self.config = config
        self.store = GaussPointStore.create(mesh, material)
        self.ndof = 3 * mesh.n_nodes
        self.u = np.zeros(self.ndof)
        self.pattern = _Pattern(mesh.elements, self.ndof)
        self.fixed, self.owners = schedule.bind(mesh)
        free = np.ones(self.ndof, dtype=bool)
        free[self.fixed] = False
        self.free = np.flatnonzero(free)
        self.reaction_sets = tuple(reaction_sets)
        self.step_index = 0
        self.fint = np.zeros(self.ndof)

    # -- evaluation -------------------------------------------------------
    def _evaluate(self, u, state_n, dt, need_tangent, guess=None):
        ue = u.reshape(-1, 3)[self.mesh.elements]
        f = deformation_gradients(ue, self.store.dndx)
        c = _right_cauchy_green(f)
        ne = f.shape[0]
        resp = self.material.update(c.reshape(-1, 3, 3), state_n, dt, need_tangent=need_tangent, guess=guess)
        fe, ke = element_arrays(f, self.store.dndx, self.store.weights, resp.stress.reshape(ne, 8, 6))
        fint = self.pattern.vector(fe)
        scale = float(np.linalg.norm(self.pattern.vector(np.abs(fe))))
        return _Evaluation(fint, scale, resp, f, c)

    def _stiffness(self, ev, state_n, dt):
        ne = ev.f.shape[0]
        tangent = ev.response.tangent
        if tangent is None:
            tangent = self.material.tangent(ev.c.reshape(-1, 3, 3), state_n, ev.response.state_new, dt)
        _, ke = element_arrays(ev.f, self.store.dndx, self.store.weights,
                               ev.response.stress.reshape(ne, 8, 6), tangent.reshape(ne, 8, 6, 6))
        return self.pattern.matrix(ke)

    def _linear_solve(self, k, rhs):
        kff = k[self.free][:, self.free].tocsc()
        try:
            du = spla.spsolve(kff, rhs)
        except RuntimeError as exc:  # singular factor
            raise _IncrementFailure(f"linear solve failed: {exc}") from exc
        if not np.all(np.isfinite(du)):
            raise _IncrementFailure("linear solve produced non-finite values")
        return du

    def _increment(self, u_n, state_n, s1, dt):
        """Newton solve of one (sub-)increment; returns ``(u, evaluation, iterations, history)``."""
        cfg = self.config
        u = u_n.copy()
        target = self.schedule.values(self.owners, s1)
        dup = target - u[self.fixed]
        history = []
        try:
            ev = self._evaluate(u, state_n, dt, need_tangent=False)
            iterations = 1
            r = ev.fint[self.free]
            if np.any(dup != 0.0):
                k = self._stiffness(ev, state_n, dt)
                rhs = -(r + k[self.free][:, self.fixed] @ dup)
            else:
                k = None
                rhs = -r
            r0 = float(np.linalg.norm(rhs))
            history.append(r0)
            floor = max(cfg.tol_abs, ROUNDOFF_FACTOR * np.finfo(float).eps * ev.force_scale)
            if not math.isfinite(r0):
                raise _IncrementFailure("non-finite initial residual")
            if k is None and r0 <= floor:
                return u, ev, iterations, history
            while True:
                if k is None:
                    k = self._stiffness(ev, state_n, dt)
                u[self.free] += self._linear_solve(k, rhs)
                u[self.fixed] = target
                ev = self._evaluate(u, state_n, dt, need_tangent=False, guess=ev.response.state_new)
                iterations += 1
                r = ev.fint[self.free]
                rn = float(np.linalg.norm(r))
                history.append(rn)
                if not math.isfinite(rn):
                    raise _IncrementFailure("non-finite residual")
                if rn <= max(cfg.tol_rel * r0, floor):
                    return u, ev, iterations, history
                if iterations >= cfg.max_iter:
                    raise _IncrementFailure(f"no convergence in {iterations} iterations (|R| = {rn:.3e})")
                k = None
                rhs = -r
        except (LocalConvergenceError, DegenerateDirectionError, ElementInversionError, NotSPDError,
                SingularMatrixError, np.linalg.LinAlgError, FloatingPointError) as exc:
            raise _IncrementFailure(f"{type(exc).__name__}: {exc}") from exc

    # -- stepping ---------------------------------------------------------
    def assemble_and_solve_step(self):
        """Advance one time step, bisecting on failure; commits only on success."""
        cfg = self.config
        k = self.step_index + 1
        u = self.u
        state = self.store.state
        pending = [(float(k - 1), float(k), 0)]
        iterations = 0
        substeps = 0
        history = []
        diss = 0.0
        failures = []
        ev = None
        while pending:
            s0, s1, depth = pending.pop()
            dt = cfg.dt * (s1 - s0)
            try:
                u_new, ev, its, hist = self._increment(u, state, s1, dt)
            except _IncrementFailure as exc:
                failures.append({"from": s0, "to": s1, "depth": depth, "reason": str(exc)})
                if depth >= cfg.max_bisections:
                    raise StepFailureError(
                        f"step {k} failed after {depth} bisections: {exc}",
                        {"step": k, "failures": failures, "iterations": iterations}) from None
                mid = 0.5 * (s0 + s1)
                pending.append((mid, s1, depth + 1))
                pending.append((s0, mid, depth + 1))
                continue
            u = u_new
            state = ev.response.state_new
            iterations += its
            substeps += 1
            history.append(hist)
            diss += float(np.sum(self.store.weights.ravel() * ev.response.dissipation_increment))
        # accept
        fields = self._gauss_fields(ev, diss)
        if hasattr(state, "lambda_acc"):
            # growth increment over the whole step, not just the last sub-step
            fields["growth"] = (state.lambda_acc - self.store.state.lambda_acc).reshape(fields["phi"].shape)
        self.u = u
        self.store.state = state
        self.fint = ev.fint
        self.store.fields = fields
        self.step_index = k
        reactions = {name: self.reaction(name) for name in self.reaction_sets}
        return StepResult(k, k * cfg.dt, u.copy(), reactions, iterations, substeps, history,
                          self.store.fields)

    def _gauss_fields(self, ev, diss):
        resp = ev.response
        ne = ev.f.shape[0]
        s = tn.voigt_unpack(resp.stress).reshape(ne, 8, 3, 3)
        j = tn.det(ev.f)
        cauchy = ev.f @ s @ tn.transpose(ev.f) / j[..., None, None]
        return {"stress": resp.stress.reshape(ne, 8, 6),
                "cauchy": tn.voigt_pack(tn.sym(cauchy), check=False),
                "phi": resp.potential_value.reshape(ne, 8),
                "growth": resp.growth_measure.reshape(ne, 8),
                "dissipation": diss}

    def reaction(self, node_set):
        """Sum of internal forces over the constrained dofs of ``node_set`` (3-vector)."""
        nodes = self.mesh.node_sets[node_set]
        dofs = (3 * nodes[:, None] + np.arange(3)).ravel()
        mask = np.isin(dofs, self.fixed)
        out = np.zeros(3)
        np.add.at(out, dofs[mask] % 3, self.fint[dofs[mask]])
        return out

    def gauss_point_coordinates(self):
        n, _ = shape_hex8(GAUSS_POINTS)
        return np.einsum("ga,eai->egi", n, self.mesh.nodes[self.mesh.elements])


def assemble_and_solve_step(solver):
    """Advance ``solver`` by one step; see :meth:`Solver.assemble_and_solve_step`."""
    return solver.assemble_and_solve_step()


def reaction_forces(solver, node_set):
    return solver.reaction(node_set)
