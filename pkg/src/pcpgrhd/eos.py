"""Equations of state e(p, rho) and the derived thermodynamics.

An EOS object supplies the specific internal energy and its two partial
derivatives; enthalpy, its partials and the sound speed are derived from
``h = 1 + e + p/rho`` so plug-in EOSs only implement three functions.

The EOS methods are vectorised and unchecked (they are called inside the
hot loops of the schemes).  The module-level functions are the validated
public entry points.

The admissibility theory additionally assumes a positive coefficient of
thermal expansion.  That assumption has no operational test here; only the
two inequalities checked by :func:`check_eos_conditions` are verified.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EosAdmissibilityError, EosDomainError, UnsupportedEosError

#: Pressures and densities below this are rejected, never clamped.
DOMAIN_FLOOR = 1e-30


class EosKind(enum.Enum):
    IDEAL = "ideal"
    USER_DEFINED = "user"


@dataclass(frozen=True)
class EosParams:
    kind: EosKind = EosKind.IDEAL
    gamma: float | None = 5.0 / 3.0

    def __post_init__(self):
        if self.kind is EosKind.IDEAL:
            if self.gamma is None or not (1.0 < self.gamma <= 2.0):
                raise ValueError(f"ideal EOS needs gamma in (1, 2], got {self.gamma}")


class EOS:
    """Base class: subclasses implement ``e``, ``de_dp`` and ``de_drho``."""

    is_ideal = False

    def e(self, p, rho):
        raise NotImplementedError

    def de_dp(self, p, rho):
        raise NotImplementedError

    def de_drho(self, p, rho):
        raise NotImplementedError

    def h(self, p, rho):
        return 1.0 + self.e(p, rho) + p / rho

    def dh_dp(self, p, rho):
        return self.de_dp(p, rho) + 1.0 / rho

    def dh_drho(self, p, rho):
        return self.de_drho(p, rho) - p / rho**2

    def cs2(self, p, rho):
        """Squared sound speed from the general formula."""
        h = self.h(p, rho)
        return self.dh_drho(p, rho) / (h * (1.0 / rho - self.dh_dp(p, rho)))


class IdealEOS(EOS):
    """h = 1 + Gamma p / ((Gamma - 1) rho)."""

    is_ideal = True

    def __init__(self, gamma: float = 5.0 / 3.0):
        if not (1.0 < gamma <= 2.0):
            raise ValueError(f"ideal EOS needs gamma in (1, 2], got {gamma}")
        self.gamma = float(gamma)

    def __repr__(self):
        return f"IdealEOS(gamma={self.gamma!r})"

    def e(self, p, rho):
        return p / ((self.gamma - 1.0) * rho)

    def de_dp(self, p, rho):
        return 1.0 / ((self.gamma - 1.0) * rho) + 0.0 * p

    def de_drho(self, p, rho):
        return -p / ((self.gamma - 1.0) * rho**2)

    def cs2_closed_form(self, p, rho):
        return self.gamma * p / (rho * self.h(p, rho))


class UserEOS(EOS):
    """EOS defined by three user callables e, de/dp and de/drho."""

    def __init__(
        self,
        e: Callable,
        de_dp: Callable,
        de_drho: Callable,
        name: str = "user",
    ):
        self._e, self._de_dp, self._de_drho = e, de_dp, de_drho
        self.name = name

    def __repr__(self):
        return f"UserEOS({self.name!r})"

    def e(self, p, rho):
        return self._e(p, rho)

    def de_dp(self, p, rho):
        return self._de_dp(p, rho)

    def de_drho(self, p, rho):
        return self._de_drho(p, rho)


def make_eos(params: EosParams) -> EOS:
    if params.kind is EosKind.IDEAL:
        return IdealEOS(params.gamma)
    raise UnsupportedEosError(
        "user-defined EOS must be constructed programmatically with UserEOS(...)"
    )


def as_eos(eos_or_params) -> EOS:
    if isinstance(eos_or_params, EOS):
        return eos_or_params
    if isinstance(eos_or_params, EosParams):
        return make_eos(eos_or_params)
    raise TypeError(f"expected EOS or EosParams, got {type(eos_or_params).__name__}")


def _validated(p, rho):
    p = np.asarray(p, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(~(p > DOMAIN_FLOOR)):
        raise EosDomainError(f"pressure must exceed {DOMAIN_FLOOR:g}")
    if np.any(~(rho > DOMAIN_FLOOR)):
        raise EosDomainError(f"density must exceed {DOMAIN_FLOOR:g}")
    return p, rho


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def specific_internal_energy(eos, p, rho):
    eos = as_eos(eos)
    p, rho = _validated(p, rho)
    return _scalarize(eos.e(p, rho))


def specific_enthalpy(eos, p, rho):
    eos = as_eos(eos)
    p, rho = _validated(p, rho)
    return _scalarize(eos.h(p, rho))


def _causality_holds(h, dh_dp, dh_drho, rho):
    return (h * (1.0 / rho - dh_dp) < dh_drho) & (dh_drho < 0.0)


def enthalpy_partials(eos, p, rho):
    """Return ``(dh/dp, dh/drho)``; raise if the causality inequality fails."""
    eos = as_eos(eos)
    p, rho = _validated(p, rho)
    h = eos.h(p, rho)
    dh_dp = eos.dh_dp(p, rho)
    dh_drho = eos.dh_drho(p, rho)
    if not np.all(_causality_holds(h, dh_dp, dh_drho, rho)):
        raise EosAdmissibilityError(
            "EOS violates h (1/rho - dh/dp) < dh/drho < 0 at the query point"
        )
    return _scalarize(dh_dp), _scalarize(dh_drho)


def sound_speed(eos, p, rho):
    eos = as_eos(eos)
    p, rho = _validated(p, rho)
    cs2 = eos.cs2(p, rho)
    if not np.all((cs2 > 0.0) & (cs2 < 1.0)):
        raise EosAdmissibilityError("sound speed squared outside (0, 1): non-causal EOS")
    return _scalarize(np.sqrt(cs2))


@dataclass
class EosConditionReport:
    p: np.ndarray
    rho: np.ndarray
    enthalpy_bound: np.ndarray   # h >= sqrt(1 + p^2/rho^2) + p/rho
    causality: np.ndarray        # h (1/rho - dh/dp) < dh/drho < 0

    @property
    def passed(self) -> bool:
        return bool(np.all(self.enthalpy_bound) and np.all(self.causality))

    @property
    def failures(self) -> np.ndarray:
        return np.flatnonzero(~(self.enthalpy_bound & self.causality))


def check_eos_conditions(eos, samples) -> EosConditionReport:
    """Evaluate both EOS admissibility inequalities on (p, rho) samples."""
    eos = as_eos(eos)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    p, rho = samples[:, 0], samples[:, 1]
    h = eos.h(p, rho)
    ratio = p / rho
    enthalpy_bound = h >= np.sqrt(1.0 + ratio**2) + ratio
    causality = _causality_holds(h, eos.dh_dp(p, rho), eos.dh_drho(p, rho), rho)
    return EosConditionReport(p, rho, enthalpy_bound, causality)
