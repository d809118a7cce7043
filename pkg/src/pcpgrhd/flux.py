"""Physical and rescaled fluxes, characteristic speeds and LxF speed bounds.

Directions ``xi`` are covariant 3-vectors with shape ``batch + (3,)``; the
contravariant components are ``xi^j = Upsilon^{jk} xi_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eos import as_eos
from .errors import DomainError, UnsupportedEosError
from .states import conserved_to_primitives, w_to_u


@dataclass
class SpeedBound:
    """``rho_xi`` bounds the U-system, ``eta_xi = alpha rho_xi`` the W-system.

    ``splitting_only`` marks estimates that satisfy the LxF splitting
    property but are not spectral-radius bounds; they must not set a CFL
    step.
    """

    rho_xi: np.ndarray
    eta_xi: np.ndarray
    splitting_only: bool = False


def _xi_norms(xi, ms):
    xi = np.asarray(xi, dtype=float)
    xi_up = np.einsum("...ij,...j->...i", ms.upsilon, xi)
    xixi = np.einsum("...i,...i->...", xi, xi_up)
    xib = np.einsum("...i,...i->...", xi, ms.beta_up)
    return xi, xixi, xib


def physical_flux(prim, u, ms, i: int) -> np.ndarray:
    """``F^i = (D vt, vt m + p e_i, E vt + p v^i)`` with ``vt = v^i - beta^i/alpha``."""
    u = np.asarray(u, dtype=float)
    vt = prim.v_up[..., i] - ms.beta_up[..., i] / ms.alpha
    F = vt[..., None] * u
    F[..., 1 + i] += prim.p
    F[..., 4] += prim.p * prim.v_up[..., i]
    return F


def directional_flux(prim, u, ms, xi) -> np.ndarray:
    """``xi_j F^j``."""
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    xv = np.einsum("...i,...i->...", xi, prim.v_up)
    xb = np.einsum("...i,...i->...", xi, ms.beta_up)
    vt = xv - xb / ms.alpha
    F = vt[..., None] * u
    F[..., 1:4] += prim.p[..., None] * xi
    F[..., 4] += prim.p * xv
    return F


def rescaled_flux(w, ms, j: int, eos, prim=None, u=None) -> np.ndarray:
    """``H^j = sqrt(-g) Sigma F^j`` evaluated from the rescaled state."""
    if u is None:
        u = w_to_u(w, ms)
    if prim is None:
        prim = conserved_to_primitives(u, ms, as_eos(eos))
    F = physical_flux(prim, u, ms, j)
    return ms.sqrt_minus_g[..., None] * np.einsum("...ab,...b->...a", ms.sigma, F)


def directional_rescaled_flux(w, ms, xi, eos, prim=None, u=None) -> np.ndarray:
    """``xi_j H^j``."""
    if u is None:
        u = w_to_u(w, ms)
    if prim is None:
        prim = conserved_to_primitives(u, ms, as_eos(eos))
    F = directional_flux(prim, u, ms, xi)
    return ms.sqrt_minus_g[..., None] * np.einsum("...ab,...b->...a", ms.sigma, F)


def speed_bound_general(xi, ms) -> SpeedBound:
    """EOS-independent bound ``sqrt(xi_j xi^j) + |xi_j beta^j| / alpha``."""
    _, xixi, xib = _xi_norms(xi, ms)
    rho_xi = np.sqrt(xixi) + np.abs(xib) / ms.alpha
    return SpeedBound(rho_xi, ms.alpha * rho_xi)


def _cs2(prim, eos):
    if eos.is_ideal:
        return eos.gamma * prim.p / (prim.rho * prim.h)
    return eos.cs2(prim.p, prim.rho)


def _acoustic_parts(prim, xi, ms, cs2):
    _, xixi, xib = _xi_norms(xi, ms)
    xv = np.einsum("...i,...i->...", np.asarray(xi, dtype=float), prim.v_up)
    denom = 1.0 - prim.v2 * cs2
    rad = denom * xixi - (1.0 - cs2) * xv**2
    root = np.sqrt(cs2) / prim.lorentz * np.sqrt(np.maximum(rad, 0.0))
    return xv, xib, denom, root


def speed_bound_ideal(prim, xi, ms, eos) -> SpeedBound:
    """Sharper bound for the ideal EOS built from the acoustic eigenvalues."""
    eos = as_eos(eos)
    if not eos.is_ideal:
        raise UnsupportedEosError("the sharper speed bound requires the ideal EOS")
    cs2 = _cs2(prim, eos)
    xv, xib, denom, root = _acoustic_parts(prim, xi, ms, cs2)
    rho_xi = (np.abs(xv) * (1.0 - cs2) + root) / denom + np.abs(xib) / ms.alpha
    return SpeedBound(rho_xi, ms.alpha * rho_xi)


def varsigma(prim) -> np.ndarray:
    """``((rho h - p)^2 - rho^2 - p^2) W^2 / p^2``."""
    p = prim.p
    if np.any(~(p > 0.0)):
        raise DomainError("the varsigma bound needs p > 0")
    return ((prim.rho * prim.h - p) ** 2 - prim.rho**2 - p**2) * prim.lorentz**2 / p**2


def speed_bound_sigma_variant(prim, xi, ms) -> SpeedBound:
    """Alternative splitting speed; not a bound on the spectral radius."""
    vs = varsigma(prim)
    _, xixi, xib = _xi_norms(xi, ms)
    xv = np.einsum("...i,...i->...", np.asarray(xi, dtype=float), prim.v_up)
    rad = np.maximum((vs + 1.0) * xixi - vs * xv**2, 0.0)
    rho_xi = (vs * np.abs(xv) + np.sqrt(rad)) / (vs + 1.0) + np.abs(xib) / ms.alpha
    return SpeedBound(rho_xi, ms.alpha * rho_xi, splitting_only=True)


def eigenvalues(prim, xi, ms, eos) -> np.ndarray:
    """The five characteristic speeds along ``xi``, ordered (minus, 3x entropy/shear, plus)."""
    eos = as_eos(eos)
    cs2 = _cs2(prim, eos)
    xv, xib, denom, root = _acoustic_parts(prim, xi, ms, cs2)
    shift = xib / ms.alpha
    mid = xv * (1.0 - cs2)
    lam = np.empty(np.shape(xv) + (5,))
    lam[..., 0] = (mid - root) / denom - shift
    lam[..., 1] = xv - shift
    lam[..., 2] = lam[..., 1]
    lam[..., 3] = lam[..., 1]
    lam[..., 4] = (mid + root) / denom - shift
    return lam


def max_eta(prim, xi, ms, eos, bound: str = "general") -> np.ndarray:
    """Pointwise ``eta_xi`` for a CFL/viscosity estimate (``general`` or ``ideal``)."""
    if bound == "general":
        return speed_bound_general(xi, ms).eta_xi
    if bound == "ideal":
        return speed_bound_ideal(prim, xi, ms, eos).eta_xi
    raise ValueError(f"unknown speed bound {bound!r}")
