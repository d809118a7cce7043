"""Primitive, conserved and rescaled states and the maps between them.

Conserved states ``U = (D, m_1, m_2, m_3, E)`` and rescaled states
``W = sqrt(gamma) Sigma U`` are plain float arrays with a trailing axis of
length 5.  Every function broadcasts over leading dimensions and expects a
:class:`~pcpgrhd.spacetime.MetricSample` of matching batch shape (or a
scalar-shaped one that broadcasts).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eos import as_eos
from .errors import DomainError, SolverError

DEFAULT_EPS = 1e-12
RECOVERY_TOL = 1e-12
MAX_ITER = 200


def _dot_up(a, upsilon, b):
    return np.einsum("...i,...ij,...j->...", a, upsilon, b)


@dataclass
class Primitives:
    """Primitive variables with the derived kinematic and thermal quantities."""

    rho: np.ndarray
    v_dn: np.ndarray
    p: np.ndarray
    v_up: np.ndarray
    v2: np.ndarray
    lorentz: np.ndarray
    e: np.ndarray
    h: np.ndarray

    @classmethod
    def build(cls, rho, v_dn, p, ms, eos):
        eos = as_eos(eos)
        rho = np.asarray(rho, dtype=float)
        p = np.asarray(p, dtype=float)
        v_dn = np.asarray(v_dn, dtype=float)
        shape = np.broadcast_shapes(rho.shape, p.shape, v_dn.shape[:-1], ms.shape)
        rho = np.broadcast_to(rho, shape)
        p = np.broadcast_to(p, shape)
        v_dn = np.broadcast_to(v_dn, shape + (3,))
        v_up = np.einsum("...ij,...j->...i", ms.upsilon, v_dn)
        v2 = np.einsum("...i,...i->...", v_dn, v_up)
        with np.errstate(divide="ignore", invalid="ignore"):
            lorentz = 1.0 / np.sqrt(1.0 - v2)
            e = eos.e(p, rho)
        h = 1.0 + e + p / rho
        return cls(rho, v_dn, p, v_up, v2, lorentz, e, h)

    @property
    def shape(self):
        return np.shape(self.rho)

    def admissible(self):
        return (self.rho > 0.0) & (self.p > 0.0) & (self.e > 0.0) & (self.v2 < 1.0)

    def __getitem__(self, idx):
        return Primitives(
            self.rho[idx], self.v_dn[idx], self.p[idx], self.v_up[idx],
            self.v2[idx], self.lorentz[idx], self.e[idx], self.h[idx],
        )


def primitives_to_conserved(prim: Primitives, ms, eos=None, check=True) -> np.ndarray:
    """``D = rho W``, ``m_j = rho h W^2 v_j``, ``E = rho h W^2 - p``."""
    if check and not np.all(prim.admissible()):
        raise DomainError("primitives violate rho > 0, p > 0, e > 0, v < 1")
    W = prim.lorentz
    rhw2 = prim.rho * prim.h * W**2
    u = np.empty(prim.shape + (5,))
    u[..., 0] = prim.rho * W
    u[..., 1:4] = rhw2[..., None] * prim.v_dn
    u[..., 4] = rhw2 - prim.p
    return u


def q_gamma(u, upsilon) -> np.ndarray:
    """``E - sqrt(D^2 + m Upsilon m)``; ``U`` is admissible iff D > 0 and this is > 0."""
    u = np.asarray(u, dtype=float)
    m = u[..., 1:4]
    return u[..., 4] - np.sqrt(u[..., 0] ** 2 + _dot_up(m, upsilon, m))


def is_admissible_u(u, upsilon) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return (u[..., 0] > 0.0) & (q_gamma(u, upsilon) > 0.0)


def q_star(w) -> np.ndarray:
    """``W_4 - |(W_0, W_1, W_2, W_3)|``, concave in ``W``."""
    w = np.asarray(w, dtype=float)
    return w[..., 4] - np.sqrt(np.einsum("...i,...i->...", w[..., :4], w[..., :4]))


def is_admissible_w(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return (w[..., 0] > 0.0) & (q_star(w) > 0.0)


def is_in_G_eps(w, eps=DEFAULT_EPS) -> np.ndarray:
    """Membership in the closed set ``W_0 >= eps``, ``q(W) >= eps``."""
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    w = np.asarray(w, dtype=float)
    res = (w[..., 0] >= eps) & (q_star(w) >= eps)
    return bool(res) if res.ndim == 0 else res


def u_to_w(u, ms) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return ms.sqrt_gamma[..., None] * np.einsum("...ab,...b->...a", ms.sigma, u)


def w_to_u(w, ms) -> np.ndarray:
    """Invert ``W = sqrt(gamma) Sigma U`` by back substitution."""
    w = np.asarray(w, dtype=float)
    s = ms.sigma
    y = w / ms.sqrt_gamma[..., None]
    u = np.empty(np.broadcast_shapes(y.shape, s.shape[:-1]))
    u[..., 0] = y[..., 0]
    u[..., 4] = y[..., 4]
    u[..., 3] = y[..., 3] / s[..., 3, 3]
    u[..., 2] = (y[..., 2] - s[..., 2, 3] * u[..., 3]) / s[..., 2, 2]
    u[..., 1] = (y[..., 1] - s[..., 1, 2] * u[..., 2] - s[..., 1, 3] * u[..., 3]) / s[..., 1, 1]
    return u


# --------------------------------------------------------------------------
# pressure recovery
# --------------------------------------------------------------------------

def psi(p, D, E, s, eos):
    """Recovery residual ``D h(p, rho(p)) r - (E + p) r^2`` with ``r^2 = 1 - s/(E+p)^2``.

    ``s = m Upsilon m``.  The unique positive zero is the pressure of ``U``.
    """
    X = E + p
    r2 = 1.0 - s / X**2
    r = np.sqrt(r2)
    rho = D * r
    return D * eos.h(p, rho) * r - X * r2


def dpsi_dp(p, D, E, s, eos):
    X = E + p
    r = np.sqrt(1.0 - s / X**2)
    dr = s / (X**3 * r)
    rho = D * r
    h = eos.h(p, rho)
    dh = eos.dh_dp(p, rho) + eos.dh_drho(p, rho) * D * dr
    return D * dh * r + D * h * dr - 1.0 - s / X**2


def _initial_guess(D, E, s, eos):
    gamma = eos.gamma if eos.is_ideal else 4.0 / 3.0
    return (gamma - 1.0) * (E - D - np.sqrt(s))


def _bisection_point(lo, hi):
    # geometric midpoint while the bracket spans decades
    mid = np.where(lo > 0.0, np.sqrt(np.maximum(lo, 0.0) * hi), 1e-2 * hi)
    return np.where((lo > 0.0) & (hi < 4.0 * lo), 0.5 * (lo + hi), mid)


def recover_pressure(D, E, s, eos, tol=RECOVERY_TOL, max_iter=MAX_ITER):
    """Vectorised safeguarded Newton solve of ``psi(p) = 0`` for ``p > 0``.

    The bracket starts at ``[0, hi]``: ``psi(0+) < 0`` for every admissible
    state and ``hi`` is enlarged until ``psi(hi) > 0``.  Newton steps that
    leave the bracket are replaced by bisection.  Returns ``(p, iterations)``.
    """
    eos = as_eos(eos)
    D = np.asarray(D, dtype=float)
    E = np.asarray(E, dtype=float)
    s = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(D.shape, E.shape, s.shape)
    D, E, s = (np.broadcast_to(a, shape).ravel() for a in (D, E, s))
    n = D.size
    p = np.zeros(n)
    iters = np.zeros(n, dtype=int)

    # upper bracket
    hi = np.maximum(E, np.maximum(_initial_guess(D, E, s, eos), 0.0)) + 1e-300
    for _ in range(max_iter):
        bad = ~(psi(hi, D, E, s, eos) > 0.0)
        if not bad.any():
            break
        hi[bad] *= 4.0
    else:
        raise SolverError("could not bracket the pressure root")
    lo = np.zeros(n)

    x = np.clip(_initial_guess(D, E, s, eos), 0.0, hi)
    x = np.where(x > 0.0, x, _bisection_point(lo, hi))
    active = np.arange(n)
    settled = np.zeros(n, dtype=int)
    for it in range(1, max_iter + 1):
        Da, Ea, sa = D[active], E[active], s[active]
        xa = x[active]
        f = psi(xa, Da, Ea, sa, eos)
        X = Ea + xa
        neg = f < 0.0
        lo[active] = np.where(neg, np.maximum(lo[active], xa), lo[active])
        hi[active] = np.where(neg, hi[active], np.minimum(hi[active], xa))
        df = dpsi_dp(xa, Da, Ea, sa, eos)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        xn = xa - step
        lo_a, hi_a = lo[active], hi[active]
        outside = ~((xn > lo_a) & (xn < hi_a)) | ~np.isfinite(xn)
        xn = np.where(outside, _bisection_point(lo_a, hi_a), xn)

        small_res = np.abs(f) <= tol * X
        tiny_step = (np.abs(xn - xa) <= 1e-14 * xa) | (hi_a - lo_a <= 4e-16 * hi_a)
        settled[active] = np.where(small_res, settled[active] + 1, 0)
        done = (small_res & tiny_step) | (f == 0.0) | (settled[active] >= 3)
        p[active[done]] = xa[done]
        iters[active[done]] = it
        x[active] = xn
        active = active[~done]
        if active.size == 0:
            break
    else:
        raise SolverError(
            f"pressure recovery did not converge in {max_iter} iterations "
            f"for {active.size} state(s)"
        )
    return p.reshape(shape), iters.reshape(shape)


def conserved_to_primitives(u, ms, eos, tol=RECOVERY_TOL, check=True) -> Primitives:
    """Recover ``(rho, v_j, p)`` from an admissible conserved state."""
    eos = as_eos(eos)
    u = np.asarray(u, dtype=float)
    D, m, E = u[..., 0], u[..., 1:4], u[..., 4]
    s = _dot_up(m, ms.upsilon, m)
    if check:
        ok = (D > 0.0) & (E - np.sqrt(D**2 + s) > 0.0)
        if not np.all(ok):
            bad = np.argwhere(~np.atleast_1d(ok))
            raise DomainError(
                f"conserved state outside the admissible set at {len(bad)} point(s), "
                f"first index {tuple(int(i) for i in bad[0])}"
            )
    p, _ = recover_pressure(D, E, s, eos, tol=tol)
    static = s == 0.0
    if eos.is_ideal and np.any(static):
        p = np.where(static, (eos.gamma - 1.0) * (E - D), p)
    X = E + p
    v_dn = m / X[..., None]
    v_up = np.einsum("...ij,...j->...i", ms.upsilon, v_dn)
    v2 = s / X**2
    r = np.sqrt(1.0 - v2)
    rho = np.where(static, D, D * r)
    lorentz = 1.0 / r
    e = eos.e(p, rho)
    h = 1.0 + e + p / rho
    return Primitives(rho, v_dn, p, v_up, v2, lorentz, e, h)


def recovery_residual(u, prim: Primitives, ms, eos) -> np.ndarray:
    """``|psi(p)| / (E + p)`` for recovered primitives."""
    eos = as_eos(eos)
    u = np.asarray(u, dtype=float)
    s = _dot_up(u[..., 1:4], ms.upsilon, u[..., 1:4])
    return np.abs(psi(prim.p, u[..., 0], u[..., 4], s, eos)) / (u[..., 4] + prim.p)


def w_to_primitives(w, ms, eos, check=True):
    """Convenience: ``(U, Primitives)`` for a rescaled state."""
    u = w_to_u(w, ms)
    return u, conserved_to_primitives(u, ms, eos, check=check)
