"""Initial data: Riemann problems, the smooth advected wave, constants and random states."""

from __future__ import annotations

import numpy as np

from .states import Primitives, primitives_to_conserved, u_to_w

GAUSS5 = np.polynomial.legendre.leggauss(5)


def primitives_to_w(rho, v_dn, p, ms, eos):
    prim = Primitives.build(rho, v_dn, p, ms, eos)
    return u_to_w(primitives_to_conserved(prim, ms), ms)


def _velocity(v, shape):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = np.array([float(v), 0.0, 0.0])
    return np.broadcast_to(v, shape + (3,))


def riemann_1d(x, ms, eos, left, right, x0=0.5, axis=0):
    """Two constant states separated at ``x[..., axis] = x0``.

    ``left`` and ``right`` are ``(rho, v, p)`` with ``v`` a scalar (velocity
    along ``axis``) or a covariant 3-vector.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    is_left = x[..., axis] < x0

    def pick(idx):
        return np.where(is_left, float(left[idx]), float(right[idx]))

    vl = _velocity(left[1], shape) if np.ndim(left[1]) else None
    vr = _velocity(right[1], shape) if np.ndim(right[1]) else None
    v = np.zeros(shape + (3,))
    if vl is None:
        v[..., axis] = pick(1)
    else:
        v = np.where(is_left[..., None], vl, vr)
    return primitives_to_w(pick(0), v, pick(2), ms, eos)


def smooth_wave_primitives(x, t=0.0, amplitude=0.2, v1=0.2, pressure=1.0, rho0=1.0):
    """``rho = rho0 + A sin(2 pi (x - v1 t))`` advected with constant ``v1`` and ``p``."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    rho = rho0 + amplitude * np.sin(2.0 * np.pi * (x[..., 0] - v1 * t))
    v = np.zeros(shape + (3,))
    v[..., 0] = v1
    return rho, v, np.full(shape, float(pressure))


def smooth_wave(x, ms, eos, t=0.0, dx=None, **params):
    """Point values, or 5-point Gauss cell averages along axis 0 when ``dx`` is given.

    The wave is a flat-space solution; averaging the rescaled state is
    exact there because ``W = U``.
    """
    x = np.asarray(x, dtype=float)
    if dx is None:
        return primitives_to_w(*smooth_wave_primitives(x, t, **params), ms, eos)
    nodes, weights = GAUSS5
    out = 0.0
    for xi, wi in zip(nodes, weights):
        xs = x.copy()
        xs[..., 0] += 0.5 * xi * dx
        out = out + 0.5 * wi * primitives_to_w(*smooth_wave_primitives(xs, t, **params), ms, eos)
    return out


def constant_state(x, ms, eos, rho=1.0, v=0.0, p=1.0):
    shape = np.shape(x)[:-1]
    return primitives_to_w(np.full(shape, float(rho)), _velocity(v, shape), np.full(shape, float(p)), ms, eos)


def random_primitives(ms, rng, rho_range=(1e-8, 1e2), p_range=(1e-8, 1e2), vmax=1.0):
    """Log-uniform ``rho, p`` and velocity uniform in the unit ball of the spatial metric."""
    shape = ms.shape
    lr = np.log(rho_range)
    lp = np.log(p_range)
    rho = np.exp(rng.uniform(lr[0], lr[1], size=shape))
    p = np.exp(rng.uniform(lp[0], lp[1], size=shape))
    y = rng.normal(size=shape + (3,))
    y /= np.linalg.norm(y, axis=-1, keepdims=True)
    y *= (vmax * rng.uniform(size=shape) ** (1.0 / 3.0))[..., None]
    # v_dn = c y with gamma = c c^T gives v_j v^j = |y|^2
    c = np.linalg.cholesky(ms.gamma_dn)
    v_dn = np.einsum("...ij,...j->...i", c, y)
    return rho, v_dn, p


def random_admissible(x, ms, eos, rng, near_boundary_fraction=0.0, min_margin=1e-10, **kw):
    """Random admissible rescaled states.

    A fraction of the points is pushed towards the boundary of ``G_*`` by
    resetting ``W_4`` so that ``q(W) / W_4`` is log-uniform in
    ``[min_margin, 1e-2]``.
    """
    w = primitives_to_w(*random_primitives(ms, rng, **kw), ms, eos)
    if near_boundary_fraction > 0.0:
        pick = rng.uniform(size=ms.shape) < near_boundary_fraction
        margin = np.exp(rng.uniform(np.log(min_margin), np.log(1e-2), size=ms.shape))
        norm = np.linalg.norm(w[..., :4], axis=-1)
        w4 = norm / (1.0 - margin)
        w[..., 4] = np.where(pick, w4, w[..., 4])
    return w
