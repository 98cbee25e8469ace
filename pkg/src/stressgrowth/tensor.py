"""Dense 3x3 tensor kernels.

Every function accepts arrays of shape ``(..., 3, 3)`` (or ``(..., 6)`` for Voigt
vectors) and broadcasts over the leading axes. ``invert``, ``det``, ``trace``,
``deviator`` and ``mat_exp`` are written with plain arithmetic so that they also
accept complex input; the local growth solver relies on this for complex-step
derivatives.

Voigt ordering is ``(11, 22, 33, 12, 13, 23)``.
"""

import math

import numpy as np

from .errors import AsymmetricInputError, NotSPDError, SingularMatrixError

DET_TOL = 1e-14
SYM_TOL = 1e-12
EXP_TRUNCATION = 1e-16
EXP_MAX_TERMS = 60
# scaled argument norm targeted before the Taylor series is summed
EXP_SCALE_TARGET = 0.5

VOIGT_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
_VOIGT_ROWS = np.array([i for i, _ in VOIGT_INDEX])
_VOIGT_COLS = np.array([j for _, j in VOIGT_INDEX])
# full-tensor position -> Voigt slot
_UNPACK = np.array([[0, 3, 4], [3, 1, 5], [4, 5, 2]])

I3 = np.eye(3)


def identity(shape=()):
    return np.broadcast_to(I3, tuple(shape) + (3, 3)).copy()


def trace(a):
    return a[..., 0, 0] + a[..., 1, 1] + a[..., 2, 2]


def det(a):
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


def transpose(a):
    return np.swapaxes(a, -1, -2)


def sym(a):
    return 0.5 * (a + transpose(a))


def dot(a, b):
    """Single contraction ``a . b`` for stacked 3x3 tensors."""
    return np.matmul(a, b)


def ddot(a, b):
    """Double contraction ``a : b``."""
    return np.einsum("...ij,...ij->...", a, b)


def frobenius_norm(a):
    a = np.asarray(a)
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def _scale(a):
    return np.max(np.abs(a), axis=(-2, -1))


def invert(a, tol=DET_TOL):
    """Inverse via the adjugate; raises :class:`SingularMatrixError` if ``|det a|`` is
    below ``tol * scale**3`` (``scale`` the largest absolute entry)."""
    a = np.asarray(a)
    d = det(a)
    scale = _scale(a)
    bad = np.abs(d) <= tol * scale**3
    if np.any(bad):
        raise SingularMatrixError(
            f"singular matrix: |det| = {np.min(np.abs(d)):.3e} at {np.count_nonzero(bad)} "
            "point(s)"
        )
    return invert_with_det(a)[0]


def invert_with_det(a):
    """``(inverse, det)`` without the singularity check (complex-step safe)."""
    d = det(a)
    adj = np.empty_like(a)
    adj[..., 0, 0] = a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1]
    adj[..., 0, 1] = a[..., 0, 2] * a[..., 2, 1] - a[..., 0, 1] * a[..., 2, 2]
    adj[..., 0, 2] = a[..., 0, 1] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 1]
    adj[..., 1, 0] = a[..., 1, 2] * a[..., 2, 0] - a[..., 1, 0] * a[..., 2, 2]
    adj[..., 1, 1] = a[..., 0, 0] * a[..., 2, 2] - a[..., 0, 2] * a[..., 2, 0]
    adj[..., 1, 2] = a[..., 0, 2] * a[..., 1, 0] - a[..., 0, 0] * a[..., 1, 2]
    adj[..., 2, 0] = a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]
    adj[..., 2, 1] = a[..., 0, 1] * a[..., 2, 0] - a[..., 0, 0] * a[..., 2, 1]
    adj[..., 2, 2] = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return adj / d[..., None, None], d


def deviator(a):
    a = np.asarray(a)
    return a - (trace(a) / 3.0)[..., None, None] * I3


def is_symmetric(a, tol=SYM_TOL):
    a = np.asarray(a)
    ref = np.maximum(_scale(a), np.finfo(float).tiny)
    return bool(np.all(_scale(a - transpose(a)) <= tol * ref))


def _require_symmetric(a, tol, what):
    if not is_symmetric(a, tol):
        asym = np.max(_scale(a - transpose(a)) / np.maximum(_scale(a), 1e-300))
        raise AsymmetricInputError(f"{what} requires a symmetric tensor (relative asymmetry {asym:.2e})")


def sym_eig(a, tol=SYM_TOL):
    """Eigenpairs of a symmetric tensor, eigenvalues sorted descending.

    Returns ``(values, vectors)`` with ``vectors[..., :, k]`` the k-th eigenvector.
    """
    a = np.asarray(a, dtype=float)
    _require_symmetric(a, tol, "sym_eig")
    w, v = np.linalg.eigh(sym(a))
    return w[..., ::-1], v[..., :, ::-1]


def sym_sqrt(a, tol=SYM_TOL):
    """Symmetric positive definite square root via the spectral decomposition."""
    a = np.asarray(a, dtype=float)
    if not is_symmetric(a, tol):
        raise NotSPDError("sym_sqrt requires a symmetric tensor")
    w, v = np.linalg.eigh(sym(a))
    if np.any(w <= 0.0):
        lo = float(np.min(w))
        raise NotSPDError(f"sym_sqrt requires a positive definite tensor (min eigenvalue {lo:.3e})", lo)
    return np.einsum("...ik,...k,...jk->...ij", v, np.sqrt(w), v)


def check_spd(a, what="tensor", tol=SYM_TOL):
    """Raise :class:`NotSPDError` unless every tensor in ``a`` is SPD."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        a = a.real
    if not np.all(np.isfinite(a)):
        raise NotSPDError(f"{what} has non-finite entries")
    if not is_symmetric(a, tol):
        raise NotSPDError(f"{what} is not symmetric")
    w = np.linalg.eigvalsh(sym(a))
    if np.any(w[..., 0] <= 0.0):
        lo = float(np.min(w[..., 0]))
        raise NotSPDError(f"{what} is not positive definite (min eigenvalue {lo:.3e})", lo)


def _taylor_terms(xnorm):
    """Terms needed so that ``xnorm**k / k!`` (a bound on the k-th term) drops below
    ``EXP_TRUNCATION * exp(-xnorm)`` (a lower bound on the norm of the sum)."""
    bound = 1.0
    floor = EXP_TRUNCATION * math.exp(-xnorm)
    for k in range(1, EXP_MAX_TERMS + 1):
        bound *= xnorm / k
        if bound <= floor:
            return k
    return EXP_MAX_TERMS


def mat_exp(a):
    """Exponential of a general (possibly nonsymmetric) 3x3 matrix.

    Scaling and squaring: the argument is divided by ``2**s`` so that its norm is at
    most 0.5, the Taylor series is summed until the next term is guaranteed to be
    below 1e-16 of the partial sum, then the result is squared ``s`` times. One
    ``s`` and one term count serve the whole batch.
    """
    a = np.asarray(a)
    nrm = frobenius_norm(a)
    top = float(np.max(nrm)) if nrm.size else 0.0
    if not np.isfinite(top):
        raise FloatingPointError("mat_exp argument is not finite")
    s = 0
    if top > EXP_SCALE_TARGET:
        s = int(np.ceil(np.log2(top / EXP_SCALE_TARGET)))
    x = a / 2.0**s
    nterms = _taylor_terms(top / 2.0**s)
    # Horner form of sum_k x^k / k!
    result = identity(a.shape[:-2]).astype(np.result_type(a, float))
    eye = result.copy()
    for k in range(nterms, 0, -1):
        result = eye + np.matmul(x, result) / k
    for _ in range(s):
        result = np.matmul(result, result)
    return result


def voigt_pack(a, tol=SYM_TOL, check=True):
    """Symmetric tensor -> Voigt 6-vector ``(11, 22, 33, 12, 13, 23)``."""
    a = np.asarray(a)
    if check:
        _require_symmetric(a.real if np.iscomplexobj(a) else a, tol, "voigt_pack")
    return a[..., _VOIGT_ROWS, _VOIGT_COLS]


def voigt_unpack(v):
    v = np.asarray(v)
    return v[..., _UNPACK]
