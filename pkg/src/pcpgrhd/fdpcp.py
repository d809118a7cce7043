"""Conservative finite-difference scheme with the parametrized PCP flux limiter.

Per Euler stage and active axis the face flux is a blend
``Hhat = theta (Hhat_high - Hhat_LF) + Hhat_LF`` of a fifth-order WENO flux
(global LxF splitting) and the first-order LxF flux.  Writing the update of
point ``i`` as ``W(theta) = W(0) + sum_l theta_l C_l`` over its six faces,
the limiter

1. builds a box ``[0, Lambda0]^6`` on which ``W_0 >= eps`` holds,
2. shrinks it vertex by vertex until ``q(W) >= eps`` at all 64 vertices
   (the feasible set is convex, so the whole box is then feasible),
3. takes for every face the smaller of the two boxes that share it.

Inactive axes (one cell thick) carry ``C = 0``; their box edges may shrink
along with a failing vertex but never enter a face theta.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .eos import IdealEOS, as_eos
from .errors import DomainError, InadmissibleStateError, SolverError, StageCFLViolation
from .flux import max_eta, rescaled_flux
from .fvpcp import ssp_rk3
from .grid import CuboidGrid
from .lxf1 import CFL_MARGIN, lambda_S_solve
from .spacetime import MetricProvider, Minkowski, sample, source_S
from .states import conserved_to_primitives, is_admissible_w, q_star, w_to_u

EPS_FLOOR = 1e-12
EPS0 = 1e-12
GHOSTS = 3
VERTEX_BITS = np.array(list(itertools.product((0, 1), repeat=6)), dtype=float)  # (64, 6)


# --------------------------------------------------------------------------
# WENO5
# --------------------------------------------------------------------------

def weno5(vm2, vm1, v0, vp1, vp2, eps=1e-40):
    """WENO-Z value at ``i + 1/2`` from the left-biased five-point stencil."""
    q0 = (2.0 * vm2 - 7.0 * vm1 + 11.0 * v0) / 6.0
    q1 = (-vm1 + 5.0 * v0 + 2.0 * vp1) / 6.0
    q2 = (2.0 * v0 + 5.0 * vp1 - vp2) / 6.0
    b0 = 13.0 / 12.0 * (vm2 - 2.0 * vm1 + v0) ** 2 + 0.25 * (vm2 - 4.0 * vm1 + 3.0 * v0) ** 2
    b1 = 13.0 / 12.0 * (vm1 - 2.0 * v0 + vp1) ** 2 + 0.25 * (vm1 - vp1) ** 2
    b2 = 13.0 / 12.0 * (v0 - 2.0 * vp1 + vp2) ** 2 + 0.25 * (3.0 * v0 - 4.0 * vp1 + vp2) ** 2
    tau = np.abs(b0 - b2)
    a0 = 0.1 * (1.0 + tau / (b0 + eps))
    a1 = 0.6 * (1.0 + tau / (b1 + eps))
    a2 = 0.3 * (1.0 + tau / (b2 + eps))
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


def _shift(arr, axis, start, n):
    return np.take(arr, np.arange(start, start + n), axis=axis)


def weno_split_flux(H, W, a, grid: CuboidGrid, axis: int):
    """High-order face fluxes along ``axis`` (``n + 1`` faces) from point values.

    ``H`` and ``W`` are point arrays ``shape + (5,)``; ghosts follow the grid
    boundary rule (periodic wrap or constant extrapolation).
    """
    fp = grid.pad(0.5 * (H + a * W), GHOSTS, axes=(axis,))
    fm = grid.pad(0.5 * (H - a * W), GHOSTS, axes=(axis,))
    nf = grid.shape[axis] + 1
    # face f sits between real points f-1 and f, i.e. padded points f+2 and f+3
    plus = weno5(*(_shift(fp, axis, f, nf) for f in range(5)))
    minus = weno5(*(_shift(fm, axis, f, nf) for f in range(5, 0, -1)))
    return plus + minus


def lxf_point_flux(H, W, a, grid: CuboidGrid, axis: int):
    """First-order LxF face fluxes along ``axis`` (``n + 1`` faces)."""
    Hp = grid.pad(H, 1, axes=(axis,))
    Wp = grid.pad(W, 1, axes=(axis,))
    nf = grid.shape[axis] + 1
    Hl, Hr = _shift(Hp, axis, 0, nf), _shift(Hp, axis, 1, nf)
    Wl, Wr = _shift(Wp, axis, 0, nf), _shift(Wp, axis, 1, nf)
    return 0.5 * (Hl + Hr) - 0.5 * a * (Wr - Wl)


# --------------------------------------------------------------------------
# limiter pieces
# --------------------------------------------------------------------------

def correction_vectors(high: dict, low: dict, dt, grid: CuboidGrid) -> np.ndarray:
    """``C`` of shape ``shape + (6, 5)``: left/right face of each axis.

    ``C_{2d}   = +dt/Delta_d (high - low)`` at the left face,
    ``C_{2d+1} = -dt/Delta_d (high - low)`` at the right face.
    """
    C = np.zeros(grid.shape + (6, 5))
    for d, hi in high.items():
        diff = hi - low[d]
        n = grid.shape[d]
        C[..., 2 * d, :] = dt / grid.dx[d] * _shift(diff, d, 0, n)
        C[..., 2 * d + 1, :] = -dt / grid.dx[d] * _shift(diff, d, 1, n)
    return C


def lambda0_box(w0, C, eps, eps0=EPS0) -> np.ndarray:
    """Box ``[0, Lambda0]^6`` keeping the first component at least ``eps``."""
    w0 = np.asarray(w0, dtype=float)
    c0 = np.asarray(C, dtype=float)[..., 0]
    neg = c0 < 0.0
    total = np.sum(np.where(neg, -c0, 0.0), axis=-1)
    ratio = np.minimum(1.0, (w0[..., 0] - eps) / (eps0 + total))
    return np.where(neg, ratio[..., None], 1.0)


def w_of_theta(w0, C, theta):
    return w0 + np.einsum("...l,...lc->...c", theta, C)


def shrink_box(w0, C, lam0, eps, tol=1e-12, max_iter=100) -> np.ndarray:
    """Shrink the box until ``q >= eps`` at every vertex.

    A failing vertex ``V`` is replaced by ``lambda V`` with
    ``q(W(lambda V)) = eps`` (bisection on [0, 1], lower end kept).
    ``Lambda^(mu)`` is the minimum of the mu-th coordinate over the scaled
    vertices with that coordinate switched on.
    """
    w0 = np.asarray(w0, dtype=float)
    C = np.asarray(C, dtype=float)
    lam0 = np.asarray(lam0, dtype=float)
    shape = w0.shape[:-1]
    w0f = w0.reshape(-1, 5)
    Cf = C.reshape(-1, 6, 5)
    l0f = lam0.reshape(-1, 6)
    out = l0f.copy()
    verts = VERTEX_BITS[None, :, :] * l0f[:, None, :]            # (N, 64, 6)
    wv = w0f[:, None, :] + np.einsum("nvl,nlc->nvc", verts, Cf)
    fail = q_star(wv) < eps
    rows = np.flatnonzero(fail.any(axis=1))
    if rows.size == 0:
        return out.reshape(shape + (6,))
    pts, vids = np.nonzero(fail[rows])
    pts = rows[pts]
    V = verts[pts, vids]
    base = w0f[pts]
    Cs = Cf[pts]
    step = np.einsum("kl,klc->kc", V, Cs)
    lo = np.zeros(pts.size)
    hi = np.ones(pts.size)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        ok = q_star(base + mid[:, None] * step) >= eps
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    else:
        if np.any(hi - lo > tol):
            raise SolverError("vertex shrink bisection did not converge")
    scale = np.ones(fail.shape)
    scale[pts, vids] = lo
    scaled = verts * scale[:, :, None]
    on = VERTEX_BITS.astype(bool)                                 # (64, 6)
    cand = np.where(on[None], scaled, np.inf)
    lam = np.min(cand, axis=1)
    out[rows] = np.minimum(l0f[rows], lam[rows])
    return out.reshape(shape + (6,))


def combine_face_thetas(Lam, grid: CuboidGrid) -> dict:
    """Face ``theta`` per active axis (``n + 1`` faces): min of the two adjacent boxes."""
    thetas = {}
    for d in grid.active:
        n = grid.shape[d]
        right_of_left = grid.pad(Lam[..., 2 * d + 1], 1, axes=(d,))   # Lambda^(2d+1) of point f-1
        left_of_right = grid.pad(Lam[..., 2 * d], 1, axes=(d,))       # Lambda^(2d) of point f
        a = _shift(right_of_left, d, 0, n + 1)
        b = _shift(left_of_right, d, 1, n + 1)
        if grid.boundary[d] == "outflow":
            # boundary faces touch a single real point
            first = [slice(None)] * 3
            first[d] = 0
            last = [slice(None)] * 3
            last[d] = n
            a[tuple(first)] = 1.0
            b[tuple(last)] = 1.0
        thetas[d] = np.minimum(a, b)
    return thetas


def cell_thetas(face_theta: dict, grid: CuboidGrid) -> np.ndarray:
    theta = np.ones(grid.shape + (6,))
    for d, th in face_theta.items():
        n = grid.shape[d]
        theta[..., 2 * d] = _shift(th, d, 0, n)
        theta[..., 2 * d + 1] = _shift(th, d, 1, n)
    return theta


# --------------------------------------------------------------------------
# scheme
# --------------------------------------------------------------------------

@dataclass
class FDStepInfo:
    dt: float
    a_star: np.ndarray
    min_theta: float = 1.0
    limited_faces: int = 0
    eps: float = EPS_FLOOR


class FDScheme:
    """WENO5 + SSP-RK3 point-value scheme with the parametrized PCP limiter."""

    def __init__(self, grid: CuboidGrid, provider: MetricProvider | None = None, eos=None,
                 slack: float = 1.1, bound: str = "general", limiter: bool = True,
                 eps_floor: float = EPS_FLOOR, eps0: float = EPS0):
        self.grid = grid
        self.provider = provider or Minkowski()
        self.eos = as_eos(eos) if eos is not None else IdealEOS()
        self.slack = slack
        self.bound = bound
        self.use_limiter = limiter
        self.eps_floor = eps_floor
        self.eps0 = eps0
        self._ms = None
        self.last_stage = None

    def field_metric(self, t):
        return self.metric(t)

    def metric(self, t):
        if self.provider.static and self._ms is not None:
            return self._ms
        ms = sample(self.provider, t, self.grid.centers())
        if self.provider.static:
            self._ms = ms
        return ms

    def _prims(self, w, ms):
        u = w_to_u(w, ms)
        try:
            return u, conserved_to_primitives(u, ms, self.eos)
        except DomainError as exc:
            raise InadmissibleStateError(f"inadmissible point value: {exc}") from exc

    def speeds(self, w, t):
        ms = self.metric(t)
        prim = None
        if self.bound != "general":
            _, prim = self._prims(w, ms)
        out = np.zeros(3)
        for d in self.grid.active:
            out[d] = np.max(max_eta(prim, np.eye(3)[d], ms, self.eos, self.bound))
        return out

    def source(self, w, t, ms=None, u=None, prim=None):
        ms = ms if ms is not None else self.metric(t)
        if ms.flat:
            return np.zeros_like(w)
        if prim is None:
            u, prim = self._prims(w, ms)
        return source_S(w, ms, self.eos, prim=prim, u=u)

    def max_dt(self, w, t=0.0) -> float:
        """``dt (sum a/Delta + lambda_S) < 1``."""
        a = self.slack * self.speeds(w, t)
        lam = 0.0
        if not self.provider.flat:
            lam = float(np.max(lambda_S_solve(w, self.source(w, t))))
        rate = float(np.sum(a / self.grid.dx)) + lam
        return np.inf if rate <= 0.0 else (1.0 - CFL_MARGIN) / rate

    def fluxes(self, w, t, a_star):
        """(high, LxF) face fluxes per active axis plus point source."""
        ms = self.metric(t)
        u, prim = self._prims(w, ms)
        high, low = {}, {}
        for d in self.grid.active:
            H = rescaled_flux(w, ms, d, self.eos, prim=prim, u=u)
            high[d] = weno_split_flux(H, w, a_star[d], self.grid, d)
            low[d] = lxf_point_flux(H, w, a_star[d], self.grid, d)
        return high, low, self.source(w, t, ms, u, prim)

    def euler_stage(self, w, t, dt, a_star):
        grid = self.grid
        speeds = self.speeds(w, t)
        if np.any(speeds > a_star):
            raise StageCFLViolation("point wave speeds exceed the stage viscosity a*", dt / 2)
        high, low, S = self.fluxes(w, t, a_star)
        lam = 0.0
        if not self.provider.flat:
            lam = float(np.max(lambda_S_solve(w, S)))
        rate = float(np.sum(a_star / grid.dx)) + lam
        if dt * rate >= 1.0:
            raise StageCFLViolation("time step violates the stage CFL condition", 1.0 / rate)

        w_low = np.array(w, dtype=float, copy=True)
        for d in grid.active:
            n = grid.shape[d]
            w_low -= dt / grid.dx[d] * (_shift(low[d], d, 1, n) - _shift(low[d], d, 0, n))
        w_low += dt * S
        C = correction_vectors(high, low, dt, grid)

        if not is_admissible_w(w_low).all():
            raise InadmissibleStateError("first-order LxF predictor left G_*")
        eps = min(self.eps_floor, float(w_low[..., 0].min()), float(q_star(w_low).min()))

        if self.use_limiter:
            lam0 = lambda0_box(w_low, C, eps, self.eps0)
            Lam = shrink_box(w_low, C, lam0, eps)
        else:
            lam0 = Lam = np.ones(grid.shape + (6,))
        face_theta = combine_face_thetas(Lam, grid)
        out = w_of_theta(w_low, C, cell_thetas(face_theta, grid))
        if self.use_limiter:
            out, face_theta = self._rounding_safeguard(w_low, C, face_theta, out, eps)
        self.last_stage = {"w0": w_low, "C": C, "Lambda0": lam0, "Lambda": Lam, "eps": eps,
                           "theta": face_theta}
        bad = ~((out[..., 0] >= eps) & (q_star(out) >= eps))
        if bad.any():
            raise InadmissibleStateError(
                f"stage update left G_eps at {int(bad.sum())} point(s), "
                f"first at {tuple(int(i) for i in np.argwhere(bad)[0])}",
                indices=np.argwhere(bad),
            )
        return out, face_theta, eps

    def _rounding_safeguard(self, w_low, C, face_theta, out, eps):
        """Halve the face thetas around points that rounding pushed below ``eps``."""
        grid = self.grid
        for _ in range(60):
            bad = ~((out[..., 0] >= eps) & (q_star(out) >= eps))
            if not bad.any():
                break
            for d, th in face_theta.items():
                n = grid.shape[d]
                touch = np.zeros(th.shape, dtype=bool)
                lo = [slice(None)] * 3
                lo[d] = slice(0, n)
                hi = [slice(None)] * 3
                hi[d] = slice(1, n + 1)
                touch[tuple(lo)] |= bad
                touch[tuple(hi)] |= bad
                if grid.boundary[d] == "periodic":
                    first = [slice(None)] * 3
                    first[d] = 0
                    last = [slice(None)] * 3
                    last[d] = n
                    both = touch[tuple(first)] | touch[tuple(last)]
                    touch[tuple(first)] = both
                    touch[tuple(last)] = both
                face_theta[d] = np.where(touch, 0.5 * th, th)
            out = w_of_theta(w_low, C, cell_thetas(face_theta, grid))
        return out, face_theta

    def step(self, w, t, dt):
        w0 = np.asarray(w, dtype=float)
        a_star = self.slack * self.speeds(w0, t)
        min_theta = 1.0
        limited = 0
        eps_min = self.eps_floor

        def euler(cur, ts):
            nonlocal min_theta, limited, eps_min
            out, theta, eps = self.euler_stage(cur, ts, dt, a_star)
            for th in theta.values():
                if th.size:
                    min_theta = min(min_theta, float(th.min()))
                    limited += int(np.count_nonzero(th < 1.0))
            eps_min = min(eps_min, eps)
            return out

        cur = ssp_rk3(euler, w0, t, dt)
        return cur, FDStepInfo(dt, a_star, min_theta, limited, eps_min)


def fd_step(scheme: FDScheme, w, t, dt):
    return scheme.step(w, t, dt)[0]
