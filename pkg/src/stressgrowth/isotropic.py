"""Isotropic growth comparison model.

Growth is a pure dilatation ``F_g = theta I`` whose stretch evolves as
``theta_dot = k(theta) phi`` with ``phi = tr M - M_crit``. The elastic law is the
same compressible Neo-Hookean energy as in :mod:`stressgrowth.growth`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import tensor as tn
from .errors import LocalConvergenceError
from .growth import MaterialResponse, _STRAIN_COLUMN_SCALE, _VOIGT_BASIS, _pk2, dissipation_increment

ISO_TOL = 1e-12
ISO_MAX_ITER = 50
FD_STEP = 1e-6


@dataclass(frozen=True)
class IsoParams:
    mu: float
    lam: float
    m_crit: float = 80.0
    k_plus: float = 0.1
    k_minus: float = 0.1
    theta_plus: float = 2.0
    theta_minus: float = 0.25
    gamma_plus: float = 2.0
    gamma_minus: float = 3.0

    def __post_init__(self):
        for name in ("mu", "lam", "m_crit", "k_plus", "k_minus", "theta_plus", "theta_minus",
                     "gamma_plus", "gamma_minus"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite real number, got {value!r}")
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError("mu and lambda must be positive")
        if not 0 < self.theta_minus < 1 < self.theta_plus:
            raise ValueError("need 0 < theta_minus < 1 < theta_plus")
        if self.k_plus < 0 or self.k_minus < 0:
            raise ValueError("growth speeds must be non-negative")
        if self.gamma_plus <= 0 or self.gamma_minus <= 0:
            raise ValueError("shape exponents must be positive")

    def as_dict(self):
        return {"mu": self.mu, "lambda": self.lam, "m_crit": self.m_crit, "k_plus": self.k_plus,
                "k_minus": self.k_minus, "theta_plus": self.theta_plus, "theta_minus": self.theta_minus,
                "gamma_plus": self.gamma_plus, "gamma_minus": self.gamma_minus}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass
class IsoState:
    theta: np.ndarray

    @classmethod
    def virgin(cls, shape=()):
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        return cls(np.ones(shape))

    @property
    def shape(self):
        return np.shape(self.theta)

    def copy(self):
        return IsoState(np.array(self.theta, dtype=float, copy=True))


def _tr_mandel(tr_c, det_c, theta, p):
    tr_ce = tr_c / theta**2
    je2 = det_c / theta**6
    return p.mu * (tr_ce - 3.0) + 1.5 * p.lam * (je2 - 1.0)


def iso_phi(c, theta, p):
    """``tr M - M_crit`` with ``M = C_e S_e`` and ``C_e = C / theta^2``."""
    c = np.asarray(c, dtype=float)
    return _tr_mandel(tn.trace(c), tn.det(c), np.asarray(theta, dtype=float), p) - p.m_crit


def growth_velocity(theta, phi, p):
    """Speed factor ``k(theta)``; zero when ``phi == 0``. Complex-step safe in ``theta``."""
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    sign = np.sign(np.real(phi))
    # clip the bases at the bounds so that fractional powers stay real
    up = (p.theta_plus - theta) / (p.theta_plus - 1.0)
    down = (theta - p.theta_minus) / (1.0 - p.theta_minus)
    up = np.where(np.real(up) < 0, 0.0 * up, up)
    down = np.where(np.real(down) < 0, 0.0 * down, down)
    k_up = p.k_plus * up**p.gamma_plus
    k_down = p.k_minus * down**p.gamma_minus
    return np.where(sign > 0, k_up, np.where(sign < 0, k_down, 0.0 * k_up))


def _g(theta, theta_n, tr_c, det_c, p, dt):
    """Residual and its growth term ``dt k phi``."""
    phi = _tr_mandel(tr_c, det_c, theta, p) - p.m_crit
    rate = dt * growth_velocity(theta, phi, p) * phi
    return theta - theta_n - rate, rate


def _solve_theta(tr_c, det_c, theta_n, p, dt, tol=ISO_TOL, max_iter=ISO_MAX_ITER):
    """Backward-Euler stretch by Newton safeguarded with a shrinking bracket.

    ``g`` is continuous (``k phi`` vanishes with ``phi``), negative at ``theta_minus``
    and positive at ``theta_plus``, so the bracket always contains a root. The
    tolerance on ``g`` is absolute, widened by the roundoff level of its terms.
    """
    lo = np.full(theta_n.shape, p.theta_minus)
    hi = np.full(theta_n.shape, p.theta_plus)
    theta = theta_n.astype(float).copy()
    done = np.zeros(theta.shape, dtype=bool)
    h = 1e-30
    for _ in range(max_iter):
        gc, rate = _g(theta + 1j * h, theta_n, tr_c, det_c, p, dt)
        g = gc.real
        slope = gc.imag / h
        # g cannot be resolved beyond the roundoff of its terms and of theta itself
        noise = 8.0 * np.finfo(float).eps * (np.abs(rate.real) + np.abs(slope * theta))
        done |= np.abs(g) < tol + noise
        if done.all():
            break
        lo = np.where(g < 0, theta, lo)
        hi = np.where(g > 0, theta, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = theta - g / slope
        bad = ~np.isfinite(trial) | (trial <= lo) | (trial >= hi)
        trial = np.where(bad, 0.5 * (lo + hi), trial)
        theta = np.where(done, theta, trial)
    if not done.all():
        worst = float(np.max(np.abs(_g(theta, theta_n, tr_c, det_c, p, dt)[0])))
        raise LocalConvergenceError(f"isotropic stretch update did not converge (|g| = {worst:.3e})")
    return theta


def _stress(c, theta, p):
    ci, det_c = tn.invert_with_det(c)
    return _pk2(ci, det_c, (theta**-2)[..., None, None] * tn.I3, theta**6, p)


def _update_flat(c, theta_n, p, dt):
    if dt == 0:
        theta = theta_n.copy()
    else:
        theta = _solve_theta(tn.trace(c), tn.det(c), theta_n, p, dt)
    return theta, _stress(c, theta, p)


def _flatten(c, state_n):
    c = np.asarray(c, dtype=float)
    if c.shape[-1] == 6 and (c.ndim == 1 or c.shape[-2:] != (3, 3)):
        c = tn.voigt_unpack(c)
    batch = c.shape[:-2]
    theta = np.broadcast_to(np.asarray(state_n.theta, dtype=float), batch)
    return c.reshape(-1, 3, 3), theta.reshape(-1), batch


def iso_tangent(c, state_n, p, dt):
    """``2 dS/dC`` of the full update by central differences (engineering-shear columns)."""
    cf, theta_n, batch = _flatten(c, state_n)
    return _fd_tangent(cf, theta_n, p, dt).reshape(batch + (6, 6))


def _fd_tangent(cf, theta_n, p, dt):
    n = cf.shape[0]
    step = FD_STEP * np.max(np.abs(cf), axis=(-2, -1))
    pert = step[:, None, None, None] * _VOIGT_BASIS  # (n, 6, 3, 3)
    cc = np.concatenate([cf[:, None] + pert, cf[:, None] - pert], axis=1).reshape(-1, 3, 3)
    _, s = _update_flat(cc, np.repeat(theta_n, 12), p, dt)
    sv = tn.voigt_pack(s, check=False).reshape(n, 2, 6, 6)
    d = (sv[:, 0] - sv[:, 1]) / (2.0 * step[:, None, None])  # (n, column, row)
    return np.swapaxes(d, 1, 2) * _STRAIN_COLUMN_SCALE


def iso_update(c, state_n, p, dt, need_tangent=True):
    """Backward-Euler stretch update; returns ``(stress, tangent, state_new)``.

    ``tangent`` is ``None`` when ``need_tangent`` is false.
    """
    if dt < 0:
        raise ValueError("dt must be non-negative")
    cf, theta_n, batch = _flatten(c, state_n)
    theta, s = _update_flat(cf, theta_n, p, dt)
    tangent = _fd_tangent(cf, theta_n, p, dt).reshape(batch + (6, 6)) if need_tangent else None
    stress = tn.voigt_pack(tn.sym(s), check=False).reshape(batch + (6,))
    return stress, tangent, IsoState(theta.reshape(batch))


class IsotropicGrowthMaterial:
    """Batched adapter with the same interface as the potential-based material."""

    name = "isotropic"

    def __init__(self, params):
        self.params = params

    def initial_state(self, n):
        return IsoState.virgin((n,))

    def update(self, c, state, dt, need_tangent=True, guess=None):
        p = self.params
        cf, theta_n, batch = _flatten(c, state)
        theta, s = _update_flat(cf, theta_n, p, dt)
        tangent = _fd_tangent(cf, theta_n, p, dt).reshape(batch + (6, 6)) if need_tangent else None
        phi = _tr_mandel(tn.trace(cf), tn.det(cf), theta, p) - p.m_crit
        cg_old = (theta_n**2)[:, None, None] * tn.I3
        cg_new = (theta**2)[:, None, None] * tn.I3
        gamma = (theta**-2)[:, None, None] * (cf @ s)
        return MaterialResponse(
            stress=tn.voigt_pack(tn.sym(s), check=False).reshape(batch + (6,)),
            tangent=tangent,
            state_new=IsoState(theta.reshape(batch)),
            potential_value=phi.reshape(batch),
            dissipation_increment=dissipation_increment(gamma, cg_old, cg_new).reshape(batch),
            growth_measure=theta.reshape(batch),
        )

    def tangent(self, c, state_n, state_new, dt):
        return iso_tangent(c, state_n, self.params, dt)

    def with_params(self, **changes):
        return IsotropicGrowthMaterial(replace(self.params, **changes))
