"""Self-check suite: randomized property checks of every numerical layer.

Each property draws random admissible inputs from a seeded generator, measures the
worst error against an independent route and compares it with a fixed tolerance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import jsonschema
import numpy as np
from scipy.optimize import brentq

from . import __version__
from . import growth as gl
from . import tensor as tn
from .fem import _right_cauchy_green, deformation_gradients, element_arrays, reference_gradients
from .isotropic import IsoParams, IsoState, iso_update
from .mesh import HEX8_NODES

QUICK_DRAWS = 100
FULL_DRAWS = 1000

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "level", "seed", "draws", "passed", "elapsed_s", "properties"],
    "properties": {
        "version": {"type": "string"},
        "level": {"enum": ["quick", "full"]},
        "seed": {"type": "integer"},
        "draws": {"type": "integer", "minimum": 1},
        "passed": {"type": "boolean"},
        "elapsed_s": {"type": "number", "minimum": 0},
        "properties": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "passed", "max_error", "tolerance", "draws"],
                "properties": {
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "max_error": {"type": ["number", "null"]},
                    "tolerance": {"type": "number"},
                    "draws": {"type": "integer", "minimum": 0},
                    "detail": {"type": "string"},
                },
            },
        },
    },
}


@dataclass
class _Result:
    name: str
    max_error: float
    tolerance: float
    draws: int
    detail: str = ""

    def as_dict(self):
        finite = bool(np.isfinite(self.max_error))
        d = {"name": self.name, "passed": bool(finite and self.max_error <= self.tolerance),
             "max_error": float(self.max_error) if finite else None,
             "tolerance": float(self.tolerance), "draws": int(self.draws)}
        if self.detail:
            d["detail"] = self.detail
        return d


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _random_stretch(rng, scale, shape=()):
    """SPD stretch ``exp(sym(scale * randn))``."""
    a = tn.sym(scale * rng.standard_normal(shape + (3, 3)))
    return tn.mat_exp(a)


def _random_deformation(rng, scale, shape=()):
    return tn.mat_exp(scale * rng.standard_normal(shape + (3, 3)))


def _random_params(rng):
    row = gl.TABLE1[rng.choice(sorted(gl.TABLE1))]
    return row


# -- tensor layer --------------------------------------------------------------


def check_sym_sqrt(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, 3, 3)))
    w = rng.uniform(0.1, 10.0, (n, 3))
    a = tn.sym(np.einsum("nik,nk,njk->nij", q, w, q))
    r = tn.sym_sqrt(a)
    err = np.linalg.norm(r @ r - a, axis=(1, 2)) / np.linalg.norm(a, axis=(1, 2))
    return _Result("tensor.sym_sqrt_reconstruction", float(err.max()), 1e-10, n)


def check_exp_inverse(rng, n):
    a = rng.standard_normal((n, 3, 3))
    a *= (rng.uniform(0, 5, n) / np.linalg.norm(a, axis=(1, 2)))[:, None, None]
    err = np.linalg.norm(tn.mat_exp(a) @ tn.mat_exp(-a) - tn.I3, axis=(1, 2))
    return _Result("tensor.exp_inverse_identity", float(err.max()), 1e-10, n)


def check_det_exp(rng, n):
    a = rng.standard_normal((n, 3, 3))
    a *= (rng.uniform(0, 5, n) / np.linalg.norm(a, axis=(1, 2)))[:, None, None]
    ref = np.exp(tn.trace(a))
    err = np.abs(tn.det(tn.mat_exp(a)) - ref) / ref
    return _Result("tensor.det_exp_trace", float(err.max()), 1e-10, n)


def check_voigt_roundtrip(rng, n):
    a = tn.sym(rng.standard_normal((n, 3, 3)))
    err = np.abs(tn.voigt_unpack(tn.voigt_pack(a)) - a).max()
    return _Result("tensor.voigt_roundtrip", float(err), 0.0, n)


# -- growth law ----------------------------------------------------------------


def check_uniaxial_roots(rng, n):
    m = rng.uniform(0.2, 3.0, n)
    m = np.where(np.abs(m - 1.0) < 1e-3, 1.5, m)
    sg = rng.uniform(10.0, 300.0, n)
    worst = 0.0
    for mi, si in zip(m, sg):
        p = gl.GrowthParams(mu=1.0, lam=1.0, kappa_g=1.0, m=float(mi), sigma_g=float(si), eta=1.0)
        for root in (si, -mi * si):
            i1, j2 = gl.invariants(np.diag([root, 0.0, 0.0]), tn.I3)
            # the three terms are each of size sigma^2
            scale = max(root**2, p.omega_hom)
            worst = max(worst, abs(float(gl.potential(i1, j2, p))) / scale)
    return _Result("growth.uniaxial_homeostatic_roots", worst, 8 * np.finfo(float).eps, n)


def _random_pair(rng, n, c_scale=0.25, g_scale=0.2):
    f = _random_deformation(rng, c_scale, (n,))
    ug = _random_stretch(rng, g_scale, (n,))
    return f, tn.transpose(f) @ f, ug, ug @ ug


def check_invariant_transformation(rng, n):
    p = gl.TABLE1["free-block"]
    _, c, ug, cg = _random_pair(rng, n)
    df = gl.driving_forces(c, cg, p)
    i1, j2 = gl.invariants(df.sigma_drv, cg)
    # intermediate route: M - chi with M = C_e S_e, chi = kappa (J_g^2 - 1) I
    ugi = tn.invert(ug)
    m_stress = ugi @ c @ df.s_pk2 @ ug
    chi = (p.kappa_g * (tn.det(cg) - 1.0))[:, None, None] * tn.I3
    b = m_stress - chi
    i1_ref = tn.trace(b)
    db = tn.deviator(b)
    j2_ref = 0.5 * tn.trace(db @ db)
    scale = np.linalg.norm(b, axis=(1, 2))
    err = np.maximum(np.abs(i1 - i1_ref) / scale, np.abs(j2 - j2_ref) / scale**2)
    return _Result("growth.invariant_transformation", float(err.max()), 1e-10, n)


def check_mandel_invariants(rng, n):
    p = gl.TABLE1["free-block"]
    f, c, _, cg = _random_pair(rng, n)
    err = gl.mandel_invariant_check(f, c, cg, p)
    return _Result("growth.mandel_kirchhoff_invariants", float(err), 1e-10, n)


def _sym_fd(fun, x, h):
    """Gradient of a scalar function of a symmetric tensor as a symmetric tensor."""
    out = np.zeros_like(x)
    for i, j in tn.VOIGT_INDEX:
        e = np.zeros_like(x)
        e[..., i, j] = e[..., j, i] = 1.0
        d = (fun(x + h[..., None, None] * e) - fun(x - h[..., None, None] * e)) / (2 * h)
        val = d if i == j else 0.5 * d
        out[..., i, j] = out[..., j, i] = val
    return out


def check_stress_energy(rng, n):
    p = gl.TABLE1["free-block"]
    _, c, _, cg = _random_pair(rng, n)
    s = gl.pk2_stress(c, cg, p)
    s_fd = 2.0 * _sym_fd(lambda x: gl.elastic_energy(x, cg, p), c, 1e-6 * np.abs(c).max(axis=(1, 2)))
    x = gl.back_stress(cg, p)
    x_fd = 2.0 * _sym_fd(lambda y: gl.growth_energy(y, p), cg, 1e-6 * np.abs(cg).max(axis=(1, 2)))
    err = max(_rel(s, s_fd), _rel(x, x_fd))
    return _Result("growth.stress_energy_consistency", err, 1e-6, n)


def _random_material_states(rng, n):
    _, c, ug, _ = _random_pair(rng, n, c_scale=0.15, g_scale=0.1)
    state = gl.GrowthState(tn.voigt_pack(tn.sym(tn.invert(ug))), np.zeros(n))
    return c, state


def _fd_tangent(c, state, p, dt):
    """Central differences of the full update, relative step 1e-6."""
    n = c.shape[0]
    h = 1e-6 * np.abs(c).max(axis=(1, 2))
    pert = h[:, None, None, None] * gl._VOIGT_BASIS
    cc = np.concatenate([c[:, None] + pert, c[:, None] - pert], axis=1).reshape(-1, 3, 3)
    st = gl.GrowthState(np.repeat(state.ug_inv, 12, axis=0), np.repeat(state.lambda_acc, 12))
    s = gl.update_material_point(cc, st, p, dt, need_tangent=False).stress.reshape(n, 2, 6, 6)
    d = (s[:, 0] - s[:, 1]) / (2.0 * h[:, None, None])
    return np.swapaxes(d, 1, 2) * gl._STRAIN_COLUMN_SCALE


def check_tangent(rng, n, perturbation=0.0):
    worst = 0.0
    sign_bad = 0
    per_row = rng.integers(0, len(gl.TABLE1), n)
    dts = rng.choice([0.5, 1.0, 2.0], n)
    c, state = _random_material_states(rng, n)
    for r, key in enumerate(sorted(gl.TABLE1)):
        for dt in (0.5, 1.0, 2.0):
            sel = np.flatnonzero((per_row == r) & (dts == dt))
            if sel.size == 0:
                continue
            p = gl.TABLE1[key]
            st = gl.GrowthState(state.ug_inv[sel], state.lambda_acc[sel])
            resp = gl.update_material_point(c[sel], st, p, dt)
            tangent = resp.tangent
            if perturbation:
                tangent = tangent.copy()
                tangent[:, 0, 1] += perturbation * np.abs(tangent).max(axis=(1, 2))
            ref = _fd_tangent(c[sel], st, p, dt)
            err = np.linalg.norm(tangent - ref, axis=(1, 2)) / np.linalg.norm(ref, axis=(1, 2))
            worst = max(worst, float(err.max()))
            sign_bad += int(np.count_nonzero(np.sign(resp.growth_measure) != np.sign(resp.potential_value)))
    return [_Result("growth.consistent_tangent_fd", worst, 1e-5, n),
            _Result("growth.sign_coupling", float(sign_bad), 0.0, n)]


def check_fixed_point(rng, n):
    """Trial states placed exactly on the homeostatic surface do not grow."""
    worst = 0.0
    used = 0
    for _ in range(n):
        p = _random_params(rng)
        ug = _random_stretch(rng, 0.05)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        direction = q @ np.diag([1.0, 0.0, 0.0]) @ q.T
        ui = tn.invert(ug)
        state = gl.GrowthState(tn.voigt_pack(tn.sym(ui)), np.array(0.0))

        def trial(a):
            # C_e = I + a e (x) e in the intermediate configuration
            return ug @ (tn.I3 + a * direction) @ ug

        def phi(a):
            c = trial(a)
            df = gl.driving_forces(c, ug @ ug, p)
            return float(gl.potential(*gl.invariants(df.sigma_drv, ug @ ug), p))

        if not phi(0.0) < 0.0 < phi(3.0):
            continue
        a = brentq(phi, 0.0, 3.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        new, rep = gl.local_solve(trial(a), state, p, 1.0)
        err = abs(float(new.lambda_acc)) + float(np.abs(new.ug_inv - state.ug_inv).max())
        worst = max(worst, err)
        used += 1
    return _Result("growth.homeostatic_fixed_point", worst if used else np.nan, 1e-9, used)


# -- isotropic model -----------------------------------------------------------


def check_iso_bounds(rng, n):
    p = IsoParams(mu=100.0, lam=800.0)
    f = _random_deformation(rng, 0.4, (n,))
    c = tn.transpose(f) @ f
    theta_n = rng.uniform(0.3, 1.9, n)
    _, _, st = iso_update(c, IsoState(theta_n), p, 10.0, need_tangent=False)
    inside = (st.theta > p.theta_minus) & (st.theta < p.theta_plus)
    return _Result("iso.stretch_within_bounds", float(np.count_nonzero(~inside)), 0.0, n)


# -- element layer -------------------------------------------------------------


def _element_forces(coords, ue, material, state, dt):
    dndx, w = reference_gradients(coords)
    f = deformation_gradients(ue, dndx)
    c = _right_cauchy_green(f)
    ne = f.shape[0]
    resp = material.update(c.reshape(-1, 3, 3), state, dt)
    fint, k = element_arrays(f, dndx, w, resp.stress.reshape(ne, 8, 6), resp.tangent.reshape(ne, 8, 6, 6))
    return fint, k


def check_element_stiffness(rng, n, perturbation=0.0):
    worst = 0.0
    material = gl.PotentialGrowthMaterial(gl.TABLE1["free-block"])
    if perturbation:
        material = _PerturbedTangent(material, perturbation)
    for _ in range(n):
        coords = (0.5 * (HEX8_NODES + 1.0) + 0.05 * rng.standard_normal((8, 3)))[None]
        ue = 0.05 * rng.standard_normal((1, 8, 3))
        state = material.initial_state(8)
        _, k = _element_forces(coords, ue, material, state, 1.0)
        h = 1e-7
        pert = h * np.eye(24).reshape(24, 8, 3)
        batch = np.concatenate([ue + pert, ue - pert])
        st48 = material.initial_state(48 * 8)
        plain = material.inner if isinstance(material, _PerturbedTangent) else material
        fint, _ = _element_forces(np.repeat(coords, 48, axis=0), batch, plain, st48, 1.0)
        k_fd = ((fint[:24] - fint[24:]) / (2 * h)).T
        worst = max(worst, _rel(k[0], k_fd))
    return _Result("fem.element_stiffness_fd", worst, 1e-6, n)


class _PerturbedTangent:
    """Fault injection: wraps a material and corrupts one tangent entry."""

    def __init__(self, inner, eps):
        self.inner = inner
        self.eps = eps

    def initial_state(self, n):
        return self.inner.initial_state(n)

    def update(self, c, state, dt, need_tangent=True, guess=None):
        resp = self.inner.update(c, state, dt, need_tangent=need_tangent, guess=guess)
        if resp.tangent is not None:
            resp.tangent = resp.tangent.copy()
            resp.tangent[..., 0, 1] += self.eps * np.abs(resp.tangent).max()
        return resp


def run_verification(level="quick", seed=0, tangent_perturbation=0.0):
    """Run every property and return a report dict validated against :data:`REPORT_SCHEMA`.

    ``tangent_perturbation`` corrupts the material tangent (test hook); any nonzero
    value must make the tangent-related properties fail.
    """
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    n = QUICK_DRAWS if level == "quick" else FULL_DRAWS
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    results = [
        check_sym_sqrt(rng, n),
        check_exp_inverse(rng, n),
        check_det_exp(rng, n),
        check_voigt_roundtrip(rng, n),
        check_uniaxial_roots(rng, n),
        check_invariant_transformation(rng, n),
        check_mandel_invariants(rng, n),
        check_stress_energy(rng, n),
        *check_tangent(rng, n, tangent_perturbation),
        check_fixed_point(rng, n),
        check_iso_bounds(rng, n),
        check_element_stiffness(rng, max(5, n // 20), tangent_perturbation),
    ]
    props = [r.as_dict() for r in results]
    report = {
        "version": __version__,
        "level": level,
        "seed": int(seed),
        "draws": n,
        "passed": all(p["passed"] for p in props),
        "elapsed_s": time.perf_counter() - t0,
        "properties": props,
    }
    jsonschema.validate(report, REPORT_SCHEMA)
    return report
