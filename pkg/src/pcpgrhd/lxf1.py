"""First-order Lax-Friedrichs scheme for the rescaled system on unstructured meshes.

Update for cell ``k``::

    W_k <- W_k - dt/|I_k| sum_j |E_kj| Hhat_kj + dt S(W_k)

with ``Hhat_kj = 1/2 xi (H(W_k) + H(W_j)) - a_kj/2 (W_j - W_k)``.  Both
rescaled fluxes in ``Hhat_kj`` use the metric at the centroid of the cell
the state belongs to; with that choice each face term splits into states
of the form ``W - eta^{-1} xi H(W)`` that the LxF splitting property keeps
admissible, which is what the positivity argument needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eos import IdealEOS, as_eos
from .errors import ContractError, ConfigError, DomainError, InadmissibleStateError
from .flux import directional_rescaled_flux, max_eta
from .mesh import UnstructuredMesh
from .spacetime import MetricProvider, MetricSample, Minkowski, sample, source_S
from .states import conserved_to_primitives, is_admissible_w, q_star, w_to_u

CFL_MARGIN = 1e-6


def lambda_S_solve(w, s, tol=1e-12, max_iter=200) -> np.ndarray:
    """Source stiffness ``lambda_S``: 0 if ``q(s) >= 0``, else ``q(w + s/lambda_S) = 0``.

    Solved by bisection on ``mu = 1/lambda_S``; ``q(w + mu s)`` is concave in
    ``mu`` and positive at 0, so the positive root is unique.  The lower
    end of the final bracket is returned, which over-estimates
    ``lambda_S`` and keeps the time step on the safe side.
    """
    w = np.asarray(w, dtype=float)
    s = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(w.shape, s.shape)[:-1]
    w = np.broadcast_to(w, shape + (5,)).reshape(-1, 5)
    s = np.broadcast_to(s, shape + (5,)).reshape(-1, 5)
    if np.any(~(q_star(w) > 0.0)) or np.any(~(w[:, 0] > 0.0)):
        raise DomainError("lambda_S needs an admissible state w")
    lam = np.zeros(w.shape[0])
    need = np.flatnonzero(q_star(s) < 0.0)
    if need.size:
        wn, sn = w[need], s[need]
        lo = np.zeros(need.size)
        hi = np.ones(need.size)
        for _ in range(2100):
            grow = q_star(wn + hi[:, None] * sn) >= 0.0
            if not grow.any():
                break
            lo = np.where(grow, hi, lo)
            hi = np.where(grow, 2.0 * hi, hi)
        scale = tol * np.abs(wn[:, 4])
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            qm = q_star(wn + mid[:, None] * sn)
            pos = qm >= 0.0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
            q_lo = q_star(wn + lo[:, None] * sn)
            if np.all((q_lo <= scale) | (hi - lo <= 4e-16 * hi)):
                break
        lam[need] = 1.0 / lo
    return lam.reshape(shape)


def lxf_face_flux(wk, wj, xi, ms_k, ms_j, a, eos, bound="general"):
    """LxF flux across a face with unit normal ``xi`` (pointing k -> j).

    Raises :class:`ContractError` if ``a`` is below the local wave-speed
    bound of either state.
    """
    eos = as_eos(eos)
    wk = np.asarray(wk, dtype=float)
    wj = np.asarray(wj, dtype=float)
    uk, uj = w_to_u(wk, ms_k), w_to_u(wj, ms_j)
    pk = conserved_to_primitives(uk, ms_k, eos)
    pj = conserved_to_primitives(uj, ms_j, eos)
    need = np.maximum(max_eta(pk, xi, ms_k, eos, bound), max_eta(pj, xi, ms_j, eos, bound))
    if np.any(np.asarray(a) < need * (1.0 - 1e-14)):
        raise ContractError(f"viscosity coefficient {np.min(a)!r} below the required {np.max(need)!r}")
    Hk = directional_rescaled_flux(wk, ms_k, xi, eos, prim=pk, u=uk)
    Hj = directional_rescaled_flux(wj, ms_j, xi, eos, prim=pj, u=uj)
    return 0.5 * (Hk + Hj) - 0.5 * np.asarray(a)[..., None] * (wj - wk)


@dataclass
class StepInfo:
    dt: float
    lambda_S_max: float = 0.0
    extra: dict = field(default_factory=dict)


class LxfScheme:
    """First-order scheme bound to a mesh, metric provider and EOS."""

    def __init__(self, mesh: UnstructuredMesh, provider: MetricProvider | None = None,
                 eos=None, bound: str = "general"):
        if mesh.n_cells == 0:
            raise ConfigError("mesh.cells: mesh has no cells")
        self.mesh = mesh
        self.provider = provider or Minkowski()
        self.eos = as_eos(eos) if eos is not None else IdealEOS()
        self.bound = bound
        self._ms_cache = None

    # --------------------------------------------------------------- metric
    def field_metric(self, t):
        return self.metric(t)

    def metric(self, t) -> MetricSample:
        if self.provider.static and self._ms_cache is not None:
            return self._ms_cache
        ms = sample(self.provider, t, self.mesh.centroids)
        if self.provider.static:
            self._ms_cache = ms
        return ms

    # ------------------------------------------------------------ internals
    def _cell_state(self, w, ms):
        u = w_to_u(w, ms)
        try:
            prim = conserved_to_primitives(u, ms, self.eos)
        except DomainError as exc:
            raise InadmissibleStateError(f"inadmissible cell state: {exc}") from exc
        return u, prim

    def _face_terms(self, w, t):
        """Return (Hhat per face, a per face, cell metric, u, prim)."""
        m = self.mesh
        ms = self.metric(t)
        u, prim = self._cell_state(w, ms)
        k = m.face_k
        j = np.where(m.face_j >= 0, m.face_j, m.face_k)
        xi = m.face_normal
        ms_k, ms_j = ms[k], ms[j]
        pk, pj = prim[k], prim[j]
        a = np.maximum(
            max_eta(pk, xi, ms_k, self.eos, self.bound),
            max_eta(pj, xi, ms_j, self.eos, self.bound),
        )
        Hk = directional_rescaled_flux(w[k], ms_k, xi, self.eos, prim=pk, u=u[k])
        Hj = directional_rescaled_flux(w[j], ms_j, xi, self.eos, prim=pj, u=u[j])
        Hhat = 0.5 * (Hk + Hj) - 0.5 * a[:, None] * (w[j] - w[k])
        return Hhat, a, ms, u, prim

    def source(self, w, t, ms=None, u=None, prim=None):
        ms = ms if ms is not None else self.metric(t)
        if ms.flat:
            return np.zeros_like(w)
        if prim is None:
            u, prim = self._cell_state(w, ms)
        return source_S(w, ms, self.eos, prim=prim, u=u)

    # -------------------------------------------------------------- public
    def max_dt(self, w, t=0.0) -> float:
        """Largest step with ``dt max_k(sum a|E|/(2|I_k|) + lambda_S) <= 1 - margin``."""
        m = self.mesh
        _, a, ms, u, prim = self._face_terms(w, t)
        rate = np.zeros(m.n_cells)
        contrib = a * m.face_area
        np.add.at(rate, m.face_k, contrib)
        inner = m.interior
        np.add.at(rate, m.face_j[inner], contrib[inner])
        # a boundary face's ghost copy sits on the same side, count it once
        rate = rate / (2.0 * m.volumes)
        S = self.source(w, t, ms, u, prim)
        rate = rate + lambda_S_solve(w, S)
        top = float(np.max(rate))
        if top <= 0.0:
            return np.inf
        return (1.0 - CFL_MARGIN) / top

    def step(self, w, t, dt):
        """One forward-Euler step; raises if any output cell leaves ``G_*``."""
        w = np.asarray(w, dtype=float)
        m = self.mesh
        Hhat, _, ms, u, prim = self._face_terms(w, t)
        acc = np.zeros_like(w)
        flux = m.face_area[:, None] * Hhat
        np.add.at(acc, m.face_k, flux)
        inner = m.interior
        np.add.at(acc, m.face_j[inner], -flux[inner])
        out = w - dt * acc / m.volumes[:, None]
        if not ms.flat:
            out = out + dt * self.source(w, t, ms, u, prim)
        bad = ~is_admissible_w(out)
        if bad.any():
            raise InadmissibleStateError(
                f"first-order update left G_* in {int(bad.sum())} cell(s)",
                indices=np.flatnonzero(bad),
            )
        return out, StepInfo(dt)


def max_dt(field, mesh, provider=None, eos=None, t=0.0, bound="general"):
    return LxfScheme(mesh, provider, eos, bound).max_dt(field, t)


def step_euler(field, mesh, provider=None, dt=None, eos=None, t=0.0, bound="general"):
    scheme = LxfScheme(mesh, provider, eos, bound)
    if dt is None:
        dt = scheme.max_dt(field, t)
    return scheme.step(field, t, dt)[0]
