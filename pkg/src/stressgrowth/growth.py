"""Stress-driven anisotropic volumetric growth at a material point.

The growth part of the deformation is carried by the inverse growth stretch
``U_g^-1`` (``C_g = U_g^2``). Growth evolves associatively with respect to a
quadratic potential of the reference-configuration driving force
``Sigma = C_g^-1 C S - X``, at a Perzyna-type rate, and is integrated with the
exponential map

    C_g,n^-1 = U_g^-1 exp(dlam U_g^-1 f U_g^-1) U_g^-1

solved together with the rate equation by a 7x7 Newton iteration. The
rotational part of ``F_g`` is never needed; wherever it would appear the
symmetric stretch ``U_g`` is used.

All functions broadcast over leading batch axes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import _dual as ad
from . import tensor as tn
from .errors import DegenerateDirectionError, LocalConvergenceError, NotSPDError

LOCAL_TOL = 1e-10
LOCAL_MAX_ITER = 50
# converged points keep iterating down to this level while Newton still makes progress,
# so that warm-started global iterations see an update accurate to roundoff
LOCAL_POLISH_TOL = 1e-13
ASYMMETRY_WARN = 1e-8
# engineering-shear Voigt convention for the tangent: dS = D : d(E11, E22, E33, 2E12, 2E13, 2E23)
_STRAIN_COLUMN_SCALE = np.array([2.0, 2.0, 2.0, 1.0, 1.0, 1.0])
_VOIGT_BASIS = tn.voigt_unpack(np.eye(6))


@dataclass(frozen=True)
class GrowthParams:
    """Constitutive constants of the potential-based growth model.

    Units follow N/mm^2 for stresses and stiffnesses, seconds for ``eta``.
    ``eta = inf`` freezes growth (purely elastic response).
    """

    mu: float
    lam: float
    kappa_g: float
    m: float
    sigma_g: float
    eta: float
    nu: float = 1.0

    def __post_init__(self):
        for name in ("mu", "lam", "kappa_g", "m", "sigma_g", "eta", "nu"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ValueError(f"{name} must be a real number, got {value!r}")
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
            if name != "eta" and math.isinf(value):
                raise ValueError(f"{name} must be finite")
        if self.m == 1.0:
            raise ValueError("m = 1 turns the potential purely deviatoric and is not allowed")

    @property
    def omega_hom(self):
        return self.m * self.sigma_g**2

    @property
    def frozen(self):
        return math.isinf(self.eta)

    def as_dict(self):
        return {"mu": self.mu, "lambda": self.lam, "kappa_g": self.kappa_g, "m": self.m,
                "sigma_g": self.sigma_g, "eta": self.eta, "nu": self.nu}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**{k: float(v) for k, v in d.items()})


TABLE1 = {
    "free-block": GrowthParams(mu=40.0, lam=400.0, kappa_g=150.0, m=1.2, sigma_g=70.0, eta=20.0, nu=1.0),
    "constrained-block": GrowthParams(mu=40.0, lam=400.0, kappa_g=250.0, m=1.2, sigma_g=200.0, eta=100.0, nu=1.0),
    "clamped-stripe": GrowthParams(mu=100.0, lam=800.0, kappa_g=150.0, m=2.0, sigma_g=250.0, eta=100.0, nu=1.0),
}


@dataclass
class LocalReport:
    iterations: np.ndarray
    residual_norm_final: np.ndarray
    delta_lambda: np.ndarray
    converged: np.ndarray
    max_asymmetry: float = 0.0

    @property
    def all_converged(self):
        return bool(np.all(self.converged))


@dataclass
class GrowthState:
    """Internal variables at one or many integration points.

    ``ug_inv`` has shape ``(..., 6)`` (Voigt), ``lambda_acc`` shape ``(...)``.
    """

    ug_inv: np.ndarray
    lambda_acc: np.ndarray
    last_report: LocalReport | None = field(default=None, compare=False)

    @classmethod
    def virgin(cls, shape=()):
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        ug = np.broadcast_to(np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]), shape + (6,)).copy()
        return cls(ug, np.zeros(shape))

    @property
    def shape(self):
        return self.lambda_acc.shape

    def ug_inv_tensor(self):
        return tn.voigt_unpack(self.ug_inv)

    def cg(self):
        ui = self.ug_inv_tensor()
        return tn.invert(ui @ ui)

    def copy(self):
        return GrowthState(self.ug_inv.copy(), np.array(self.lambda_acc, copy=True), self.last_report)


@dataclass
class DrivingForces:
    s_pk2: np.ndarray
    x_back: np.ndarray
    gamma_m: np.ndarray
    sigma_drv: np.ndarray


@dataclass
class MaterialResponse:
    stress: np.ndarray
    tangent: np.ndarray
    state_new: object
    potential_value: np.ndarray
    dissipation_increment: np.ndarray
    # delta lambda for the potential model, growth stretch theta for the isotropic one
    growth_measure: np.ndarray | None = None


# ---------------------------------------------------------------------------
# closed-form constitutive relations


def elastic_energy(c, cg, p):
    tn.check_spd(c, "C")
    tn.check_spd(cg, "C_g")
    tr_ce = tn.trace(c @ tn.invert(cg))
    je = np.sqrt(tn.det(c) / tn.det(cg))
    return 0.5 * p.mu * (tr_ce - 3.0) - p.mu * np.log(je) + 0.25 * p.lam * (je**2 - 1.0 - 2.0 * np.log(je))


def growth_energy(cg, p):
    tn.check_spd(cg, "C_g")
    jg = np.sqrt(tn.det(cg))
    return 0.5 * p.kappa_g * (jg**2 - 1.0 - 2.0 * np.log(jg))


def _pk2(ci, det_c, cgi, det_cg, p):
    return p.mu * (cgi - ci) + (0.5 * p.lam * (det_c / det_cg - 1.0))[..., None, None] * ci


def pk2_stress(c, cg, p):
    """Second Piola-Kirchhoff stress ``mu (C_g^-1 - C^-1) + Lambda/2 ((J/J_g)^2 - 1) C^-1``."""
    tn.check_spd(c, "C")
    tn.check_spd(cg, "C_g")
    return _pk2(tn.invert(c), tn.det(c), tn.invert(cg), tn.det(cg), p)


def back_stress(cg, p):
    tn.check_spd(cg, "C_g")
    return (p.kappa_g * (tn.det(cg) - 1.0))[..., None, None] * tn.invert(cg)


def driving_forces(c, cg, p):
    s = pk2_stress(c, cg, p)
    x = back_stress(cg, p)
    gamma = tn.invert(cg) @ c @ s
    return DrivingForces(s_pk2=s, x_back=x, gamma_m=gamma, sigma_drv=gamma - x)


def invariants(sigma_drv, cg):
    """``I1 = tr(Sigma C_g)`` and ``J2 = 1/2 tr(dev(Sigma C_g)^2)``."""
    b = sigma_drv @ cg
    db = tn.deviator(b)
    return tn.trace(b), 0.5 * tn.trace(db @ db)


def potential(i1, j2, p):
    return 3.0 * j2 - (1.0 - p.m) * p.sigma_g * i1 - p.m * p.sigma_g**2


def flow_tensors(sigma_drv, cg, p):
    """Norm of the growth direction and the referential flow tensor ``f``.

    With ``A = 3 dev(Sigma C_g) - (1 - m) sigma_g I`` the direction in the
    intermediate configuration is ``N = U_g A U_g^-1``; ``||N||^2 = tr(A C_g^-1 A^T C_g)``
    and ``f = 2/||N|| C_g A``.
    """
    a = _direction(sigma_drv @ cg, p)
    cgi = tn.invert(cg)
    n_norm = np.sqrt(tn.trace(a @ cgi @ tn.transpose(a) @ cg))
    if np.any(np.abs(n_norm) < 1e-12 * p.sigma_g):
        raise DegenerateDirectionError("growth direction vanishes")
    return n_norm, (2.0 / n_norm)[..., None, None] * (cg @ a)


def _direction(b, p):
    return 3.0 * tn.deviator(b) - (1.0 - p.m) * p.sigma_g * tn.I3


def rate_term(dlam, p, dt):
    """``sign(dlam) |eta dlam / dt|^nu``."""
    if p.frozen:
        return dlam * 0.0
    k = p.eta / dt
    if p.nu == 1.0:
        return dlam * k
    return ad.apply(dlam, lambda x: np.sign(x) * np.abs(k * x) ** p.nu, lambda x: _rate_slope(x, p, dt))


def _rate_slope(dlam, p, dt):
    k = p.eta / dt
    # floor keeps the nu < 1 slope finite at dlam = 0
    return p.nu * k * np.maximum(np.abs(k * dlam), 1e-300) ** (p.nu - 1.0)


# ---------------------------------------------------------------------------
# local problem


class _Eval(NamedTuple):
    rg: object
    r_phi: object
    s: object
    phi: object
    sig: object
    cg: object


def _evaluate(ui, dlam, c, ci, det_c, cgi_n, p, dt):
    """Residual pieces at ``U_g^-1 = ui`` and ``dlam``; ``r_phi`` is scaled by ``m sigma_g^2``.

    Arguments may be plain arrays or :class:`_dual.Dual` numbers.
    """
    cgi = ad.mm(ui, ui)
    cg, det_cgi = ad.invert_with_det(cgi)
    det_cg = ad.recip(det_cgi)
    s = p.mu * (cgi - ci) + ad.scal((det_c * det_cgi - 1.0) * (0.5 * p.lam), ci)
    sig = ad.mm(cgi, ad.mm(c, s)) - ad.scal((det_cg - 1.0) * p.kappa_g, cgi)
    b = ad.mm(sig, cg)
    i1 = ad.trace(b)
    db = b - ad.scal(i1 * (1.0 / 3.0), _eye_like(i1))
    j2 = ad.sum_product(db, ad.transpose(db)) * 0.5
    phi = j2 * 3.0 - i1 * ((1.0 - p.m) * p.sigma_g) - p.omega_hom
    a = db * 3.0 - (1.0 - p.m) * p.sigma_g * tn.I3
    ca = ad.mm(cg, a)
    # tr(A C_g^-1 A^T C_g) = sum((A C_g^-1) * (C_g A))
    n_norm = ad.sqrt(ad.sum_product(ad.mm(a, cgi), ca))
    kmat = ad.scal(ad.recip(n_norm) * 2.0, ad.mm(ad.mm(ui, ca), ui))
    ex = ad.mat_exp(ad.scal(dlam, kmat))
    rg = ad.mm(ad.mm(ui, ex), ui) - cgi_n
    r_phi = phi * (1.0 / p.omega_hom) - rate_term(dlam, p, dt)
    return _Eval(rg, r_phi, s, phi, sig, cg)


def _eye_like(scalar):
    return np.broadcast_to(tn.I3, np.shape(ad.value(scalar)) + (3, 3))


def _pack7(rg, r_phi):
    return np.concatenate([tn.voigt_pack(tn.sym(rg), check=False), r_phi[..., None]], axis=-1)


def _state_tensors(state_n):
    ui_n = tn.voigt_unpack(np.asarray(state_n.ug_inv, dtype=float))
    return ui_n, ui_n @ ui_n


def local_residuals(ug_inv_trial, delta_lambda, c, state_n, p, dt):
    """Coupled residuals of the discrete growth update.

    ``r_g = -C_g,n^-1 + U_g^-1 exp(dlam U_g^-1 f U_g^-1) U_g^-1`` (symmetrised, Voigt) and
    ``r_phi = Phi - m sigma_g^2 sign(dlam) |eta dlam / dt|^nu``.
    """
    ug_inv_trial = np.asarray(ug_inv_trial, dtype=float)
    c = np.asarray(c, dtype=float)
    _, cgi_n = _state_tensors(state_n)
    ev = _evaluate(tn.voigt_unpack(tn.voigt_pack(ug_inv_trial)), np.asarray(delta_lambda, float), c,
                   tn.invert(c), tn.det(c), cgi_n, p, dt)
    return tn.voigt_pack(tn.sym(ev.rg), check=False), ev.r_phi * p.omega_hom


def _probe(x, c, cgi_n, p, dt, wrt_x=True, wrt_c=False):
    """Residual, stress and their forward-mode derivatives at ``x`` ``(n, 7)``.

    Returns ``(ev, dr, ds)`` with ``ev`` the plain evaluation, ``dr`` ``(n, 7, k)``
    and ``ds`` ``(n, 6, k)``; columns are ``[U_g^-1 (6), dlam]`` if ``wrt_x``,
    followed by the six Voigt components of ``C`` if ``wrt_c``.
    """
    n = x.shape[0]
    nx = 7 if wrt_x else 0
    k = nx + (6 if wrt_c else 0)
    ui = tn.voigt_unpack(x[:, :6])
    dlam = x[:, 6]
    if wrt_x:
        ui = ad.seed(ui, _VOIGT_BASIS, k, 0)
        d_dlam = np.zeros((n, k))
        d_dlam[:, 6] = 1.0
        dlam = ad.Dual(dlam, d_dlam)
    if wrt_c:
        c = ad.seed(c, _VOIGT_BASIS, k, nx)
    ci, det_c = ad.invert_with_det(c)
    ev = _evaluate(ui, dlam, c, ci, det_c, cgi_n, p, dt)
    rg_sym = (ev.rg + ad.transpose(ev.rg)) * 0.5
    dr = np.concatenate([ad.pack_derivative(rg_sym), ev.r_phi.d[..., None]], axis=-1)
    ds = ad.pack_derivative(ev.s)
    base = _Eval(*(ad.value(v) for v in ev))
    return base, np.swapaxes(dr, 1, 2), np.swapaxes(ds, 1, 2)


def _residual_vector(ev):
    return _pack7(ev.rg, ev.r_phi)


def _is_spd_batch(a):
    finite = np.all(np.isfinite(a), axis=(-2, -1))
    out = np.zeros(a.shape[:-2], dtype=bool)
    out[finite] = np.linalg.eigvalsh(tn.sym(a[finite]))[..., 0] > 0
    return out


def _newton(c, ug_inv_n, p, dt, tol, max_iter, x0=None):
    """Batched Newton solve on flat arrays; returns ``(x, report)``.

    Each iteration evaluates the residual (counted as one iteration) and, for points
    still active, the Jacobian. A point is converged once its residual is below
    ``tol``; it stays active until the residual drops below ``LOCAL_POLISH_TOL`` or
    stops decreasing by at least a factor 4.
    """
    n = c.shape[0]
    ui_n = tn.voigt_unpack(ug_inv_n)
    cgi_n = ui_n @ ui_n
    ci, det_c = tn.invert_with_det(c)
    if x0 is not None:
        x = np.array(x0, dtype=float)
    else:
        x = np.concatenate([ug_inv_n, np.zeros((n, 1))], axis=1)
    if p.nu != 1.0 and x0 is None:
        # explicit Perzyna predictor; the signed power has an unbounded slope at dlam = 0 for nu < 1
        ratio = _evaluate(tn.voigt_unpack(x[:, :6]), x[:, 6], c, ci, det_c, cgi_n, p, dt).phi / p.omega_hom
        x[:, 6] = dt / p.eta * np.sign(ratio) * np.abs(ratio) ** (1.0 / p.nu)
    iterations = np.zeros(n, dtype=int)
    res_norm = np.full(n, np.nan)
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    prev = np.full(n, np.inf)
    x_prev = x.copy()
    max_asym = 0.0
    for it in range(max_iter):
        xa = x[active]
        ev = _evaluate(tn.voigt_unpack(xa[:, :6]), xa[:, 6], c[active], ci[active], det_c[active],
                       cgi_n[active], p, dt)
        iterations[active] += 1
        nrm = tn.frobenius_norm(tn.sym(ev.rg)) + np.abs(ev.r_phi)
        stalled = nrm > 0.25 * prev[active]
        # a stalled polishing step is discarded in favour of the better previous iterate
        back = stalled & converged[active] & np.isfinite(nrm)
        if back.any():
            x[active[back]] = x_prev[active[back]]
            nrm = np.where(back, prev[active], nrm)
        res_norm[active] = nrm
        ok = np.isfinite(nrm) & (nrm < tol)
        converged[active[ok]] = True
        done = ok & ((nrm < LOCAL_POLISH_TOL) | stalled)
        if done.any():
            rg_ok = ev.rg[done & ~back]
            if rg_ok.shape[0]:
                asym = tn.frobenius_norm(rg_ok - tn.transpose(rg_ok)) / tn.frobenius_norm(
                    cgi_n[active[done & ~back]])
                max_asym = max(max_asym, float(np.max(asym)))
        prev[active] = nrm
        keep = ~done & np.isfinite(nrm)
        active = active[keep]
        if active.size == 0 or it == max_iter - 1:
            break
        xa = xa[keep]
        _, jac, _ = _probe(xa, c[active], cgi_n[active], p, dt)
        r = _residual_vector(_Eval(*(v[keep] for v in ev)))
        try:
            dx = np.linalg.solve(jac, -r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        x_prev[active] = xa
        xn = xa + dx
        # damp steps that leave U_g^-1 non-SPD
        for _ in range(10):
            good = _is_spd_batch(tn.voigt_unpack(xn[:, :6]))
            if np.all(good):
                break
            dx[~good] *= 0.5
            xn = xa + dx
        x[active] = xn
    report = LocalReport(iterations, res_norm, x[:, 6].copy(), converged, max_asym)
    return x, report


def _flatten(c, state_n):
    c = np.asarray(c, dtype=float)
    if c.shape[-1] == 6 and (c.ndim == 1 or c.shape[-2:] != (3, 3)):
        c = tn.voigt_unpack(c)
    batch = c.shape[:-2]
    ug = np.broadcast_to(np.asarray(state_n.ug_inv, dtype=float), batch + (6,))
    lam = np.broadcast_to(np.asarray(state_n.lambda_acc, dtype=float), batch)
    return c.reshape(-1, 3, 3), ug.reshape(-1, 6), lam.reshape(-1), batch


def _reshape_report(rep, batch):
    return LocalReport(rep.iterations.reshape(batch), rep.residual_norm_final.reshape(batch),
                       rep.delta_lambda.reshape(batch), rep.converged.reshape(batch), rep.max_asymmetry)


def local_solve(c, state_n, p, dt, tol=LOCAL_TOL, max_iter=LOCAL_MAX_ITER, raise_on_failure=True, guess=None):
    """Solve the coupled growth update for ``(U_g^-1, dlam)``.

    ``guess`` (a state with the same layout as ``state_n``) replaces the default
    starting point ``(U_g,n^-1, 0)``; the global solver passes the previous
    iterate so that the local Newton restarts close to the solution.

    Converged when ``||r_g|| + |r_phi| / (m sigma_g^2) < tol``. Returns
    ``(state_new, report)``; raises :class:`LocalConvergenceError` (carrying the
    report) if any point fails and ``raise_on_failure``.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    cf, ug, lam, batch = _flatten(c, state_n)
    n = cf.shape[0]
    if dt == 0 or p.frozen:
        rep = LocalReport(np.zeros(n, int), np.zeros(n), np.zeros(n), np.ones(n, bool))
        new = GrowthState(ug.reshape(batch + (6,)).copy(), lam.reshape(batch).copy(), _reshape_report(rep, batch))
        return new, new.last_report
    x0 = None
    if guess is not None:
        _, ug0, lam0, _ = _flatten(c, guess)
        x0 = np.concatenate([ug0, (lam0 - lam)[:, None]], axis=1)
    with np.errstate(over="ignore", invalid="ignore"):  # divergent trials are caught as non-finite
        x, rep = _newton(cf, ug, p, dt, tol, max_iter, x0)
    if rep.max_asymmetry > ASYMMETRY_WARN:
        warnings.warn(f"growth residual asymmetry {rep.max_asymmetry:.2e} before symmetrisation", RuntimeWarning)
    report = _reshape_report(rep, batch)
    new = GrowthState(x[:, :6].reshape(batch + (6,)), (lam + x[:, 6]).reshape(batch), report)
    if raise_on_failure and not rep.all_converged:
        bad = np.count_nonzero(~rep.converged)
        raise LocalConvergenceError(
            f"local growth solve failed at {bad} point(s); worst residual "
            f"{np.max(np.nan_to_num(rep.residual_norm_final, nan=np.inf)):.3e}", report)
    return new, report


def _tangent_flat(c, ug_n, ug_new, dlam, p, dt):
    ui_n = tn.voigt_unpack(ug_n)
    cgi_n = ui_n @ ui_n
    x = np.concatenate([ug_new, dlam[:, None]], axis=1)
    if dt == 0 or p.frozen:
        # growth frozen: only the explicit C-dependence of S remains
        _, _, ds = _probe(x, c, cgi_n, p, 1.0, wrt_x=False, wrt_c=True)
        return ds * _STRAIN_COLUMN_SCALE
    _, dr, ds = _probe(x, c, cgi_n, p, dt, wrt_x=True, wrt_c=True)
    dx_dc = -np.linalg.solve(dr[:, :, :7], dr[:, :, 7:])
    total = ds[:, :, 7:] + ds[:, :, :7] @ dx_dc
    return total * _STRAIN_COLUMN_SCALE


def consistent_tangent(c, state_n, converged, p, dt):
    """Algorithmic tangent ``2 dS/dC`` (6x6, engineering-shear Voigt columns).

    The sensitivity of ``U_g^-1`` to ``C`` follows from the converged local Jacobian
    by the implicit function theorem; partial derivatives are forward-mode exact.
    """
    cf, ug_n, _, batch = _flatten(c, state_n)
    ug_new = np.broadcast_to(np.asarray(converged.ug_inv, float), batch + (6,)).reshape(-1, 6)
    lam_new = np.broadcast_to(np.asarray(converged.lambda_acc, float), batch).reshape(-1)
    lam_old = np.broadcast_to(np.asarray(state_n.lambda_acc, float), batch).reshape(-1)
    d = _tangent_flat(cf, ug_n, ug_new, lam_new - lam_old, p, dt)
    return d.reshape(batch + (6, 6))


def mandel_invariant_check(f_total, c, cg, p):
    """Largest relative mismatch among ``tr((CS)^a)``, ``tr(tau^a)``, ``tr(M^a)``, a = 1..3."""
    f_total = np.asarray(f_total, float)
    s = pk2_stress(c, cg, p)
    ug = tn.sym_sqrt(cg)
    m_stress = tn.invert(ug) @ c @ s @ ug
    tau = f_total @ s @ tn.transpose(f_total)
    cs = c @ s
    worst = 0.0
    p_cs, p_tau, p_m = cs, tau, m_stress
    for _alpha in range(3):
        vals = [tn.trace(p_cs), tn.trace(p_tau), tn.trace(p_m)]
        ref = np.maximum.reduce([np.abs(v) for v in vals])
        safe = np.where(ref > 0, ref, 1.0)
        for v in vals[1:]:
            rel = np.where(ref > 0, np.abs(v - vals[0]) / safe, 0.0)
            worst = max(worst, float(np.max(rel)))
        p_cs, p_tau, p_m = p_cs @ cs, p_tau @ tau, p_m @ m_stress
    return worst


def dissipation_increment(sigma_drv, cg_old, cg_new):
    """Per-step ``Sigma : 1/2 (C_g,new - C_g,old)``; no sign is implied."""
    return 0.5 * tn.ddot(sigma_drv, np.asarray(cg_new) - np.asarray(cg_old))


def update_material_point(c, state_n, p, dt, tol=LOCAL_TOL, max_iter=LOCAL_MAX_ITER, need_tangent=True,
                          guess=None):
    """Full stress update: local solve, stress, tangent, potential, dissipation.

    ``c`` is a Voigt 6-vector (or a 3x3 tensor), optionally batched. With
    ``need_tangent=False`` the returned ``tangent`` is ``None``.
    """
    cf, ug_n, lam_n, batch = _flatten(c, state_n)
    flat_state = GrowthState(ug_n, lam_n)
    if guess is not None:
        _, ug0, lam0, _ = _flatten(c, guess)
        guess = GrowthState(ug0, lam0)
    new, report = local_solve(cf, flat_state, p, dt, tol=tol, max_iter=max_iter, guess=guess)
    ug_new = new.ug_inv
    dlam = new.lambda_acc - lam_n
    ui_n = tn.voigt_unpack(ug_n)
    cgi_n = ui_n @ ui_n
    x = np.concatenate([ug_new, dlam[:, None]], axis=1)
    ev = _evaluate(tn.voigt_unpack(ug_new), dlam, cf, tn.invert(cf), tn.det(cf), cgi_n, p, dt if dt > 0 else 1.0)
    d = _tangent_flat(cf, ug_n, ug_new, dlam, p, dt).reshape(batch + (6, 6)) if need_tangent else None
    diss = dissipation_increment(ev.sig, tn.invert(cgi_n), ev.cg)
    state_new = GrowthState(ug_new.reshape(batch + (6,)), new.lambda_acc.reshape(batch),
                            _reshape_report(report, batch))
    return MaterialResponse(
        stress=tn.voigt_pack(tn.sym(ev.s), check=False).reshape(batch + (6,)),
        tangent=d,
        state_new=state_new,
        potential_value=ev.phi.reshape(batch),
        dissipation_increment=diss.reshape(batch),
        growth_measure=dlam.reshape(batch),
    )


class PotentialGrowthMaterial:
    """Batched material used by the finite element layer."""

    name = "potential"

    def __init__(self, params, tol=LOCAL_TOL, max_iter=LOCAL_MAX_ITER):
        self.params = params
        self.tol = tol
        self.max_iter = max_iter

    def initial_state(self, n):
        return GrowthState.virgin((n,))

    def update(self, c, state, dt, need_tangent=True, guess=None):
        return update_material_point(c, state, self.params, dt, tol=self.tol, max_iter=self.max_iter,
                                     need_tangent=need_tangent, guess=guess)

    def tangent(self, c, state_n, state_new, dt):
        return consistent_tangent(c, state_n, state_new, self.params, dt)

    def with_params(self, **changes):
        return PotentialGrowthMaterial(replace(self.params, **changes), self.tol, self.max_iter)
