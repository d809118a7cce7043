"""3+1 metric data, the Cholesky rescaling matrix and geometric sources.

All quantities are batched: a :class:`MetricSample` holds arrays whose
leading dimensions are the batch shape of the query points, e.g. lapse
``alpha`` has shape ``batch`` and ``g_dn`` has shape ``batch + (4, 4)``.

Index conventions
-----------------
* ``dg[..., d, m, n]`` is the partial derivative of ``g_{mn}`` along ``x^d``
  (``d = 0`` is time).
* ``dsigma[..., d]`` is the derivative of the 5x5 matrix ``Sigma`` along
  ``x^d``.
* ``christoffels(ms)[..., l, m, n]`` is ``Gamma^l_{mn}``.

Metric derivatives come from the provider when it has closed forms and
otherwise from central differences with step ``1e-6 (1 + |x|)``.  The
derivatives of ``Sigma`` are always differenced numerically from
:func:`cholesky_sigma`, which keeps the provider interface to the metric
itself.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable

import numpy as np

from .errors import MetricError

FD_REL_STEP = 1e-6


@dataclass
class MetricSample:
    alpha: np.ndarray
    beta_up: np.ndarray
    gamma_dn: np.ndarray
    gamma_det: np.ndarray
    upsilon: np.ndarray
    sigma: np.ndarray
    g_dn: np.ndarray
    g_up: np.ndarray
    dg: np.ndarray
    dsigma: np.ndarray
    flat: bool = False
    static: bool = False

    @property
    def shape(self):
        return np.shape(self.alpha)

    @property
    def sqrt_gamma(self):
        return np.sqrt(self.gamma_det)

    @property
    def sqrt_minus_g(self):
        return self.alpha * np.sqrt(self.gamma_det)

    @property
    def beta_dn(self):
        return np.einsum("...ij,...j->...i", self.gamma_dn, self.beta_up)

    def __getitem__(self, idx) -> "MetricSample":
        kw = {}
        for f in fields(self):
            val = getattr(self, f.name)
            kw[f.name] = val if isinstance(val, bool) else val[idx]
        return MetricSample(**kw)

    def reshape(self, shape) -> "MetricSample":
        shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
        kw = {}
        nb = len(self.shape)
        for f in fields(self):
            val = getattr(self, f.name)
            kw[f.name] = val if isinstance(val, bool) else val.reshape(shape + val.shape[nb:])
        return MetricSample(**kw)


def cholesky_sigma(upsilon) -> np.ndarray:
    """Explicit 5x5 matrix ``Sigma`` with ``Sigma^T Sigma = diag{1, Upsilon, 1}``.

    The inner 3x3 block is the upper-triangular Cholesky factor of the
    inverse spatial metric written out component by component.
    """
    ups = np.asarray(upsilon, dtype=float)
    g11, g12, g13 = ups[..., 0, 0], ups[..., 0, 1], ups[..., 0, 2]
    g22, g23, g33 = ups[..., 1, 1], ups[..., 1, 2], ups[..., 2, 2]
    if np.any(~(g11 > 0.0)):
        raise MetricError("gamma^{11} must be positive")
    s11 = np.sqrt(g11)
    s12 = g12 / s11
    s13 = g13 / s11
    rad22 = g22 - g12**2 / g11
    if np.any(~(rad22 > 0.0)):
        raise MetricError("inverse metric not positive definite (Sigma_22 radicand)")
    s22 = np.sqrt(rad22)
    s23 = (g23 - g12 * g13 / g11) / s22
    rad33 = g33 - g13**2 / g11 - s23**2
    if np.any(~(rad33 > 0.0)):
        raise MetricError("inverse metric not positive definite (Sigma_33 radicand)")
    s33 = np.sqrt(rad33)

    sigma = np.zeros(ups.shape[:-2] + (5, 5))
    sigma[..., 0, 0] = 1.0
    sigma[..., 4, 4] = 1.0
    sigma[..., 1, 1] = s11
    sigma[..., 1, 2] = s12
    sigma[..., 1, 3] = s13
    sigma[..., 2, 2] = s22
    sigma[..., 2, 3] = s23
    sigma[..., 3, 3] = s33
    return sigma


def g_from_adm(alpha, beta_up, gamma_dn):
    alpha = np.asarray(alpha, dtype=float)
    beta_dn = np.einsum("...ij,...j->...i", gamma_dn, beta_up)
    g = np.empty(alpha.shape + (4, 4))
    g[..., 0, 0] = -(alpha**2) + np.einsum("...i,...i->...", beta_dn, beta_up)
    g[..., 0, 1:] = beta_dn
    g[..., 1:, 0] = beta_dn
    g[..., 1:, 1:] = gamma_dn
    return g


def g_up_from_adm(alpha, beta_up, upsilon):
    """Inverse 4-metric from the ADM closed forms (no 4x4 inversion)."""
    a2 = np.asarray(alpha, dtype=float) ** 2
    gu = np.empty(a2.shape + (4, 4))
    gu[..., 0, 0] = -1.0 / a2
    gu[..., 0, 1:] = beta_up / a2[..., None]
    gu[..., 1:, 0] = beta_up / a2[..., None]
    gu[..., 1:, 1:] = upsilon - beta_up[..., :, None] * beta_up[..., None, :] / a2[..., None, None]
    return gu


def adm_from_g(g_dn):
    g_dn = np.asarray(g_dn, dtype=float)
    gamma_dn = g_dn[..., 1:, 1:]
    beta_dn = g_dn[..., 0, 1:]
    upsilon = np.linalg.inv(gamma_dn)
    beta_up = np.einsum("...ij,...j->...i", upsilon, beta_dn)
    alpha2 = np.einsum("...i,...i->...", beta_dn, beta_up) - g_dn[..., 0, 0]
    if np.any(~(alpha2 > 0.0)):
        raise MetricError("metric has no positive lapse (g_00 too large)")
    return np.sqrt(alpha2), beta_up, gamma_dn


def _check_spd(gamma_dn):
    try:
        np.linalg.cholesky(gamma_dn)
    except np.linalg.LinAlgError as exc:
        raise MetricError("spatial metric gamma_ij is not symmetric positive definite") from exc
    if not np.allclose(gamma_dn, np.swapaxes(gamma_dn, -1, -2), rtol=0.0, atol=1e-14):
        raise MetricError("spatial metric gamma_ij is not symmetric")


class MetricProvider:
    """Source of ADM data at arbitrary (t, x).

    Subclasses override :meth:`adm` or :meth:`g_dn`; :meth:`dg` may return
    ``None`` to request finite differences.  Closures must broadcast over
    leading dimensions of ``x`` (shape ``batch + (3,)``).
    """

    flat = False
    static = False

    def adm(self, t, x):
        return adm_from_g(self.g_dn(t, x))

    def g_dn(self, t, x):
        return g_from_adm(*self.adm(t, x))

    def dg(self, t, x):
        return None


class Minkowski(MetricProvider):
    flat = True
    static = True

    def adm(self, t, x):
        shape = np.shape(x)[:-1]
        return np.ones(shape), np.zeros(shape + (3,)), np.broadcast_to(np.eye(3), shape + (3, 3)).copy()

    def dg(self, t, x):
        return np.zeros(np.shape(x)[:-1] + (4, 4, 4))


class DiagonalStatic(MetricProvider):
    """Static metric with zero shift and diagonal spatial part.

    ``alpha_fn(x)`` returns the lapse (shape ``batch``) and ``gamma_fn(x)``
    the diagonal entries ``gamma_ii`` (shape ``batch + (3,)``).
    """

    static = True

    def __init__(self, alpha_fn: Callable, gamma_fn: Callable):
        self.alpha_fn = alpha_fn
        self.gamma_fn = gamma_fn

    def adm(self, t, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        alpha = np.broadcast_to(np.asarray(self.alpha_fn(x), dtype=float), shape).copy()
        diag = np.broadcast_to(np.asarray(self.gamma_fn(x), dtype=float), shape + (3,))
        gamma = np.zeros(shape + (3, 3))
        for i in range(3):
            gamma[..., i, i] = diag[..., i]
        return alpha, np.zeros(shape + (3,)), gamma

    @classmethod
    def constant(cls, alpha=1.0, gamma_diag=(1.0, 1.0, 1.0)):
        gd = np.asarray(gamma_diag, dtype=float)
        return cls(lambda x: alpha, lambda x: gd)


class Analytic(MetricProvider):
    """User closures for ``g_{mn}(t, x)`` and optionally ``d_d g_{mn}(t, x)``."""

    def __init__(self, g_fn: Callable, dg_fn: Callable | None = None, static: bool = False):
        self.g_fn = g_fn
        self.dg_fn = dg_fn
        self.static = static

    def g_dn(self, t, x):
        g = np.asarray(self.g_fn(t, np.asarray(x, dtype=float)), dtype=float)
        return np.broadcast_to(g, np.shape(x)[:-1] + (4, 4)).copy()

    def dg(self, t, x):
        if self.dg_fn is None:
            return None
        dg = np.asarray(self.dg_fn(t, np.asarray(x, dtype=float)), dtype=float)
        return np.broadcast_to(dg, np.shape(x)[:-1] + (4, 4, 4)).copy()


class FrozenADM(MetricProvider):
    """Pointwise ADM data frozen in time and space (derivatives vanish).

    ``adm`` ignores ``x`` apart from its batch shape, which must match the
    stored arrays.  Used to probe algebraic identities on arbitrary metrics.
    """

    static = True

    def __init__(self, alpha, beta_up, gamma_dn):
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta_up = np.asarray(beta_up, dtype=float)
        self.gamma_dn = np.asarray(gamma_dn, dtype=float)

    def adm(self, t, x):
        shape = np.shape(x)[:-1]
        return (
            np.broadcast_to(self.alpha, shape).copy(),
            np.broadcast_to(self.beta_up, shape + (3,)).copy(),
            np.broadcast_to(self.gamma_dn, shape + (3, 3)).copy(),
        )

    def dg(self, t, x):
        return np.zeros(np.shape(x)[:-1] + (4, 4, 4))


def random_metric(rng, shape, spread=0.5, shift=0.3):
    """Random lapse in [0.5, 1.5], shift with norm below ``shift`` and SPD spatial metric."""
    shape = tuple(np.atleast_1d(shape)) if np.ndim(shape) else (int(shape),)
    a = rng.normal(scale=spread, size=shape + (3, 3))
    gamma = np.eye(3) + np.einsum("...ik,...jk->...ij", a, a) + 0.1 * np.eye(3)
    alpha = rng.uniform(0.5, 1.5, size=shape)
    beta = rng.uniform(-shift, shift, size=shape + (3,)) / np.sqrt(3.0)
    return FrozenADM(alpha, beta, gamma)


def _fd_steps(t, x):
    hx = FD_REL_STEP * (1.0 + np.abs(x))
    ht = FD_REL_STEP * (1.0 + abs(t))
    return ht, hx


def _central_difference(fn, t, x, static, out_shape):
    """Central differences of ``fn(t, x)`` in (t, x^1, x^2, x^3)."""
    out = np.zeros(np.shape(x)[:-1] + (4,) + out_shape)
    ht, hx = _fd_steps(t, x)
    if not static:
        out[..., 0, :, :] = (fn(t + ht, x) - fn(t - ht, x)) / (2.0 * ht)
    for d in range(3):
        step = np.zeros_like(x)
        step[..., d] = hx[..., d]
        h = hx[..., d][..., None, None]
        out[..., d + 1, :, :] = (fn(t, x + step) - fn(t, x - step)) / (2.0 * h)
    return out


def sample(provider: MetricProvider, t, x) -> MetricSample:
    """Evaluate all metric data at time ``t`` and points ``x`` (``batch + (3,)``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("positions must have trailing dimension 3")
    t = float(t)
    alpha, beta_up, gamma_dn = provider.adm(t, x)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0.0)):
        raise MetricError("lapse must be positive")
    _check_spd(gamma_dn)
    gamma_det = np.linalg.det(gamma_dn)
    upsilon = np.linalg.inv(gamma_dn)
    upsilon = 0.5 * (upsilon + np.swapaxes(upsilon, -1, -2))
    sigma = cholesky_sigma(upsilon)
    g_dn = g_from_adm(alpha, beta_up, gamma_dn)
    g_up = g_up_from_adm(alpha, beta_up, upsilon)
    batch = alpha.shape

    if provider.flat:
        dg = np.zeros(batch + (4, 4, 4))
        dsigma = np.zeros(batch + (4, 5, 5))
    else:
        dg = provider.dg(t, x)
        if dg is None:
            dg = _central_difference(provider.g_dn, t, x, provider.static, (4, 4))
        dg = 0.5 * (dg + np.swapaxes(dg, -1, -2))

        def sigma_at(tt, xx):
            ups = np.linalg.inv(provider.adm(tt, xx)[2])
            return cholesky_sigma(0.5 * (ups + np.swapaxes(ups, -1, -2)))

        dsigma = _central_difference(sigma_at, t, x, provider.static, (5, 5))

    return MetricSample(
        alpha=alpha,
        beta_up=np.asarray(beta_up, dtype=float),
        gamma_dn=np.asarray(gamma_dn, dtype=float),
        gamma_det=gamma_det,
        upsilon=upsilon,
        sigma=sigma,
        g_dn=g_dn,
        g_up=g_up,
        dg=dg,
        dsigma=dsigma,
        flat=bool(provider.flat),
        static=bool(provider.static),
    )


def christoffels(ms: MetricSample) -> np.ndarray:
    """``Gamma^l_{mn} = 1/2 g^{ld} (d_m g_{dn} + d_n g_{dm} - d_d g_{mn})``."""
    dg = ms.dg
    if dg is None:
        raise MetricError("metric sample has no derivatives")
    # lower[d, m, n] = d_m g_{dn} + d_n g_{dm} - d_d g_{mn}
    lower = (
        np.swapaxes(dg, -3, -2)
        + np.moveaxis(dg, -3, -1)
        - dg
    )
    gam = 0.5 * np.einsum("...ld,...dmn->...lmn", ms.g_up, lower)
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def four_velocity(prim, ms: MetricSample) -> np.ndarray:
    """``u^0 = W/alpha``, ``u^i = W (v^i - beta^i/alpha)``."""
    W = prim.lorentz
    u = np.empty(np.shape(W) + (4,))
    u[..., 0] = W / ms.alpha
    u[..., 1:] = W[..., None] * (prim.v_up - ms.beta_up / ms.alpha[..., None])
    return u


def stress_energy(prim, ms: MetricSample) -> np.ndarray:
    """``T^{mn} = rho h u^m u^n + p g^{mn}``."""
    u = four_velocity(prim, ms)
    rho_h = prim.rho * prim.h
    return rho_h[..., None, None] * u[..., :, None] * u[..., None, :] + prim.p[..., None, None] * ms.g_up


def dlog_lapse(ms: MetricSample) -> np.ndarray:
    """``d_m ln(alpha)`` from the metric derivatives via ``g^{00} = -1/alpha^2``."""
    g0 = ms.g_up[..., 0, :]
    dg00_up = -np.einsum("...a,...b,...mab->...m", g0, g0, ms.dg)
    return -0.5 * dg00_up / ms.g_up[..., 0, 0][..., None]


def source_Q(prim, ms: MetricSample) -> np.ndarray:
    """Geometric source vector ``Q`` of the conservative 3+1 system."""
    shape = np.shape(prim.rho)
    Q = np.zeros(shape + (5,))
    if ms.flat:
        return Q
    T = stress_energy(prim, ms)
    gam = christoffels(ms)
    gam_low = np.einsum("...dnm,...dj->...nmj", gam, ms.g_dn)
    # Q_j = T^{mn} (d_m g_{nj} - Gamma^d_{nm} g_{dj}),  j spatial
    kernel = ms.dg - np.swapaxes(gam_low, -3, -2)
    Q[..., 1:4] = np.einsum("...mn,...mnj->...j", T, kernel)[..., 1:]
    dlna = dlog_lapse(ms)
    Q[..., 4] = ms.alpha * (
        np.einsum("...m,...m->...", T[..., :, 0], dlna)
        - np.einsum("...mn,...nm->...", T, gam[..., 0, :, :])
    )
    return Q


def source_S(w, ms: MetricSample, eos, prim=None, u=None) -> np.ndarray:
    """Source of the rescaled system.

    ``S = sqrt(gamma) dSigma/dt U + sqrt(-g) (Sigma Q + dSigma/dx^j F^j)``.

    ``Sigma`` multiplies ``Q`` because the rescaled system is the
    conservative one multiplied from the left by ``Sigma``.
    Pass ``prim`` and ``u`` when already available to skip the recovery.
    """
    from .flux import physical_flux
    from .states import conserved_to_primitives, w_to_u

    w = np.asarray(w, dtype=float)
    if ms.flat:
        return np.zeros_like(w)
    if u is None:
        u = w_to_u(w, ms)
    if prim is None:
        prim = conserved_to_primitives(u, ms, eos)
    sg = ms.sqrt_gamma
    smg = ms.sqrt_minus_g
    S = np.einsum("...ab,...b->...a", ms.sigma, source_Q(prim, ms))
    for j in range(3):
        Fj = physical_flux(prim, u, ms, j)
        S = S + np.einsum("...ab,...b->...a", ms.dsigma[..., j + 1, :, :], Fj)
    S = smg[..., None] * S
    if not ms.static:
        S = S + sg[..., None] * np.einsum("...ab,...b->...a", ms.dsigma[..., 0, :, :], u)
    return S
