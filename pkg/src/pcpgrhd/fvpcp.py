"""High-order PCP finite-volume scheme on uniform cuboid grids.

Each stage of a time step:

1. reconstruct a per-cell polynomial from the cell averages (ghost cells
   are filled first and reconstructed like interior cells),
2. apply the two-stage scaling limiter so that ``W_0`` and ``q(W)`` are at
   least ``eps`` on the node set (Gauss-Lobatto along one active axis times
   Gauss-Legendre along the others, plus the interior Gauss points when a
   source term is evaluated),
3. integrate LxF point fluxes over each face with the Gauss rule and the
   source over the cell with the tensor Gauss rule,
4. update the averages; SSP-RK3 chains three such Euler stages.

The cell polynomial is ``P(x) = Wbar + sum_d a_d x_d + b_d (x_d^2 - 1/12)``
in local coordinates ``x_d`` in ``[-1/2, 1/2]``; ``b = 0`` for ``K <= 1``.
Its cell average is ``Wbar`` for any coefficients.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .eos import IdealEOS, as_eos
from .errors import DomainError, InadmissibleStateError, StageCFLViolation
from .flux import directional_rescaled_flux, max_eta
from .grid import CuboidGrid, QuadratureSet, build_quadrature
from .lxf1 import CFL_MARGIN, lambda_S_solve
from .spacetime import MetricProvider, Minkowski, sample, source_S
from .states import DEFAULT_EPS, conserved_to_primitives, is_admissible_w, q_star, w_to_u

RK3_WEIGHTS = ((1.0, 0.0), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0))
RK3_STAGE_TIMES = (0.0, 1.0, 0.5)


@dataclass
class CellPolynomial:
    wbar: np.ndarray     # cells + (5,)
    a: np.ndarray        # cells + (3, 5)
    b: np.ndarray        # cells + (3, 5)

    def values(self, local) -> np.ndarray:
        """Point values at local offsets ``local`` (M, 3): ``cells + (M, 5)``."""
        local = np.asarray(local, dtype=float)
        return (
            self.wbar[..., None, :]
            + np.einsum("md,...dc->...mc", local, self.a)
            + np.einsum("md,...dc->...mc", local**2 - 1.0 / 12.0, self.b)
        )

    def scaled(self, theta, component=None) -> "CellPolynomial":
        a, b = self.a.copy(), self.b.copy()
        th = np.asarray(theta)[..., None]
        if component is None:
            a *= th[..., None]
            b *= th[..., None]
        else:
            a[..., component] *= th
            b[..., component] *= th
        return CellPolynomial(self.wbar, a, b)


@dataclass
class LimiterStats:
    theta1: int = 0
    theta2: int = 0
    vacuum: int = 0

    def add(self, other):
        self.theta1 += other.theta1
        self.theta2 += other.theta2
        self.vacuum += other.vacuum


# --------------------------------------------------------------------------
# node sets
# --------------------------------------------------------------------------

def _product(axes_nodes, axes_weights):
    """Tensor product over the three axes of per-axis (nodes, weights)."""
    pts, wts = [], []
    for combo in itertools.product(*[range(len(n)) for n in axes_nodes]):
        pts.append([axes_nodes[d][combo[d]] for d in range(3)])
        wts.append(np.prod([axes_weights[d][combo[d]] for d in range(3)]))
    return np.array(pts, dtype=float), np.array(wts, dtype=float)


def limiter_nodes(quad: QuadratureSet, active) -> np.ndarray:
    """Union over active axes of (Lobatto along the axis) x (Gauss across it)."""
    sets = []
    for d in active:
        nodes, weights = [], []
        for e in range(3):
            if e == d:
                nodes.append(quad.lobatto_nodes)
            elif e in active:
                nodes.append(quad.gauss_nodes)
            else:
                nodes.append(np.zeros(1))
            weights.append(np.ones(len(nodes[-1])))
        sets.append(_product(nodes, weights)[0])
    if not sets:
        return np.zeros((1, 3))
    return np.concatenate(sets, axis=0)


def face_rule(quad: QuadratureSet, active, axis):
    """Transverse Gauss points (x_axis = 0) and weights on a face normal to ``axis``."""
    nodes, weights = [], []
    for e in range(3):
        if e != axis and e in active:
            nodes.append(quad.gauss_nodes)
            weights.append(quad.gauss_weights)
        else:
            nodes.append(np.zeros(1))
            weights.append(np.ones(1))
    return _product(nodes, weights)


def interior_rule(quad: QuadratureSet, active):
    nodes, weights = [], []
    for e in range(3):
        if e in active:
            nodes.append(quad.gauss_nodes)
            weights.append(quad.gauss_weights)
        else:
            nodes.append(np.zeros(1))
            weights.append(np.ones(1))
    return _product(nodes, weights)


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------

def _minmod(x, y):
    return np.where(x * y > 0.0, np.sign(x) * np.minimum(np.abs(x), np.abs(y)), 0.0)


def _cweno3(wm, w0, wp, eps):
    """Third-order central WENO quadratic: returns (a, b) coefficients."""
    aL, aR = w0 - wm, wp - w0
    a_opt = 0.5 * (wp - wm)
    b_opt = 0.5 * (wp - 2.0 * w0 + wm)
    cL, cR, c0 = 0.25, 0.25, 0.5
    a0 = (a_opt - cL * aL - cR * aR) / c0
    b0 = b_opt / c0
    betaL, betaR = aL**2, aR**2
    beta0 = 13.0 / 3.0 * (wp - 2.0 * w0 + wm) ** 2 + 0.25 * (wp - wm) ** 2
    alL = cL / (eps + betaL) ** 2
    alR = cR / (eps + betaR) ** 2
    al0 = c0 / (eps + beta0) ** 2
    tot = alL + alR + al0
    wL, wR, w0_ = alL / tot, alR / tot, al0 / tot
    return w0_ * a0 + wL * aL + wR * aR, w0_ * b0


def reconstruct_padded(padded, K: int, grid: CuboidGrid, g: int) -> CellPolynomial:
    """Reconstruct on a ``g``-ghost padded average field.

    Returns polynomials for the cells one layer inside the padding, i.e.
    real cells plus ``g - 1`` ghost layers per active side.
    """
    active = grid.active
    crop = []
    for d in range(3):
        crop.append(slice(1, -1) if d in active else slice(None))
    core = padded[tuple(crop)]
    a = np.zeros(core.shape[:3] + (3, 5))
    b = np.zeros(core.shape[:3] + (3, 5))
    if K >= 1:
        scale = np.max(np.abs(padded)) if padded.size else 1.0
        for d in active:
            n = padded.shape[d]
            idx = [slice(1, -1) if e in active and e != d else slice(None) for e in range(3)]
            base = padded[tuple(idx)]
            wm = np.take(base, np.arange(0, n - 2), axis=d)
            w0 = np.take(base, np.arange(1, n - 1), axis=d)
            wp = np.take(base, np.arange(2, n), axis=d)
            if K == 1:
                a[..., d, :] = _minmod(w0 - wm, wp - w0)
            else:
                eps = (grid.dx[d] * scale) ** 2 + 1e-300
                a[..., d, :], b[..., d, :] = _cweno3(wm, w0, wp, eps)
    return CellPolynomial(core.copy(), a, b)


def reconstruct(wbar, K: int, grid: CuboidGrid) -> CellPolynomial:
    """Per-cell polynomials for the real cells of ``grid`` (ghosts from the boundary rule)."""
    if K not in (0, 1, 2):
        raise ValueError("reconstruction degree must be 0, 1 or 2")
    padded = grid.pad(np.asarray(wbar, dtype=float), 1)
    return reconstruct_padded(padded, K, grid, 1)


# --------------------------------------------------------------------------
# limiter
# --------------------------------------------------------------------------

def _safeguard(poly, vals, nodes, theta, eps, component, test):
    """Shrink ``theta`` in cells where rounding left a node just below ``eps``.

    The relative shrink starts at one ulp and grows fourfold per pass, so a
    rounding miss costs a few ulps of theta rather than a fixed fraction.
    """
    for k in range(200):
        bad = np.any(~test(vals), axis=-1) & (theta > 0.0)
        if not bad.any():
            break
        theta = np.where(bad, (1.0 - min(0.5, 2.3e-16 * 4.0**k)) * theta, theta)
        theta = np.where(bad & (theta < 1e-12), 0.0, theta)
        vals = poly.scaled(theta, component).values(nodes)
    return theta


def pcp_scaling_limiter(poly: CellPolynomial, nodes, eps=DEFAULT_EPS):
    """Two-stage scaling limiter; returns ``(limited poly, stats)``.

    Cells whose average is outside ``G_eps`` are reset to constants.
    Otherwise component 0 is squeezed towards its average until its node
    minimum is ``eps`` (theta_1), then the whole vector until the node
    minimum of ``q`` is ``eps`` (theta_2).  Cell averages are untouched.
    """
    wbar = poly.wbar
    stats = LimiterStats()
    good = (wbar[..., 0] >= eps) & (q_star(wbar) >= eps)
    stats.vacuum = int(np.count_nonzero(~good))
    a = np.where(good[..., None, None], poly.a, 0.0)
    b = np.where(good[..., None, None], poly.b, 0.0)
    poly = CellPolynomial(wbar, a, b)

    vals = poly.values(nodes)
    vmin = vals[..., 0].min(axis=-1)
    w0 = wbar[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        th1 = np.where(vmin < eps, (w0 - eps) / (w0 - vmin), 1.0)
    th1 = np.clip(np.where(good, th1, 1.0), 0.0, 1.0)
    stats.theta1 = int(np.count_nonzero(th1 < 1.0))
    if stats.theta1:
        poly1 = CellPolynomial(wbar, a, b)
        th1 = _safeguard(poly1, poly1.scaled(th1, 0).values(nodes), nodes, th1, eps, 0,
                         lambda v: v[..., 0] >= eps)
        poly = poly1.scaled(th1, 0)
        vals = poly.values(nodes)

    qmin = q_star(vals).min(axis=-1)
    qbar = q_star(wbar)
    with np.errstate(divide="ignore", invalid="ignore"):
        th2 = np.where(qmin < eps, (qbar - eps) / (qbar - qmin), 1.0)
    th2 = np.clip(np.where(good, th2, 1.0), 0.0, 1.0)
    stats.theta2 = int(np.count_nonzero(th2 < 1.0))
    if stats.theta2:
        poly2 = poly
        th2 = _safeguard(poly2, poly2.scaled(th2).values(nodes), nodes, th2, eps, None,
                         lambda v: (q_star(v) >= eps) & (v[..., 0] >= eps))
        poly = poly2.scaled(th2)
    return poly, stats


# --------------------------------------------------------------------------
# scheme
# --------------------------------------------------------------------------

@dataclass
class FVStepInfo:
    dt: float
    a_star: np.ndarray
    limiter: LimiterStats = field(default_factory=LimiterStats)
    lambda_S_max: float = 0.0


class FVScheme:
    """PCP finite-volume scheme of degree ``K`` in {0, 1, 2}."""

    ghosts = 2

    def __init__(self, grid: CuboidGrid, provider: MetricProvider | None = None, eos=None,
                 K: int = 2, eps: float = DEFAULT_EPS, slack: float = 1.1,
                 bound: str = "general", limiter: bool = True):
        if K not in (0, 1, 2):
            raise ValueError("degree K must be 0, 1 or 2")
        self.grid = grid
        self.provider = provider or Minkowski()
        self.eos = as_eos(eos) if eos is not None else IdealEOS()
        self.K = K
        self.eps = eps
        self.slack = slack
        self.bound = bound
        self.use_limiter = limiter
        self.quad = build_quadrature(K)
        act = grid.active
        self.needs_source = not self.provider.flat
        self.nodes = limiter_nodes(self.quad, act)
        self.interior_pts, self.interior_w = interior_rule(self.quad, act)
        if self.needs_source:
            self.limit_nodes = np.concatenate([self.nodes, self.interior_pts], axis=0)
        else:
            self.limit_nodes = self.nodes
        self.face_pts = {}
        self.face_w = {}
        for d in act:
            self.face_pts[d], self.face_w[d] = face_rule(self.quad, act, d)
        self._metric_cache = {}

    # ------------------------------------------------------------ geometry
    def _face_positions(self, d):
        """Positions of the face points: ``faces + (G, 3)`` with n_d + 1 faces along d."""
        g = self.grid
        lo = np.asarray(g.lower, float)
        axes = []
        for e in range(3):
            if e == d:
                axes.append(lo[e] + np.arange(g.shape[e] + 1) * g.dx[e])
            else:
                axes.append(lo[e] + (np.arange(g.shape[e]) + 0.5) * g.dx[e])
        centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return centers[..., None, :] + self.face_pts[d][None, None, None] * g.dx

    def metric(self, t):
        key = None if self.provider.static else float(t)
        if key in self._metric_cache:
            return self._metric_cache[key]
        g = self.grid
        out = {"face": {}, "node": sample(self.provider, t, g.points(self.nodes))}
        for d in g.active:
            out["face"][d] = sample(self.provider, t, self._face_positions(d))
        if self.needs_source:
            out["interior"] = sample(self.provider, t, g.points(self.interior_pts))
        if self.provider.static:
            self._metric_cache = {None: out}
        else:
            self._metric_cache = {key: out}
        return out

    # ------------------------------------------------------------ pieces
    def limited_polynomials(self, wbar):
        """Extended-cell (real + one ghost layer) limited polynomials and stats."""
        padded = self.grid.pad(np.asarray(wbar, dtype=float), self.ghosts)
        poly = reconstruct_padded(padded, self.K, self.grid, self.ghosts)
        if self.use_limiter:
            return pcp_scaling_limiter(poly, self.limit_nodes, self.eps)
        return poly, LimiterStats()

    def _real(self, arr):
        idx = tuple(slice(1, -1) if d in self.grid.active else slice(None) for d in range(3))
        return arr[idx]

    def _face_states(self, poly, d):
        """Left/right states at the face points along ``d`` (n_d + 1 faces)."""
        act = self.grid.active
        left_local = self.face_pts[d].copy()
        left_local[:, d] = 0.5
        right_local = self.face_pts[d].copy()
        right_local[:, d] = -0.5
        n = poly.wbar.shape[d]
        crop = tuple(slice(1, -1) if (e in act and e != d) else slice(None) for e in range(3))
        sub = CellPolynomial(poly.wbar[crop], poly.a[crop], poly.b[crop])
        lhs = CellPolynomial(*(np.take(x, np.arange(0, n - 1), axis=d) for x in (sub.wbar, sub.a, sub.b)))
        rhs = CellPolynomial(*(np.take(x, np.arange(1, n), axis=d) for x in (sub.wbar, sub.a, sub.b)))
        return lhs.values(left_local), rhs.values(right_local)

    def _prims(self, w, ms, where):
        u = w_to_u(w, ms)
        try:
            return u, conserved_to_primitives(u, ms, self.eos)
        except DomainError as exc:
            raise InadmissibleStateError(f"inadmissible {where} value: {exc}") from exc

    def speeds(self, poly, t):
        """Per-axis max of ``eta`` over face points (both sides) and real node values."""
        metric = self.metric(t)
        out = np.zeros(3)
        for d in self.grid.active:
            xi = np.eye(3)[d]
            if self.bound == "general":
                out[d] = max(
                    np.max(max_eta(None, xi, metric["face"][d], self.eos, "general")),
                    np.max(max_eta(None, xi, metric["node"], self.eos, "general")),
                )
                continue
            wl, wr = self._face_states(poly, d)
            msf = metric["face"][d]
            _, pl = self._prims(wl, msf, "face")
            _, pr = self._prims(wr, msf, "face")
            vals = CellPolynomial(self._real(poly.wbar), self._real(poly.a),
                                  self._real(poly.b)).values(self.nodes)
            _, pn = self._prims(vals, metric["node"], "node")
            out[d] = max(
                np.max(max_eta(pl, xi, msf, self.eos, self.bound)),
                np.max(max_eta(pr, xi, msf, self.eos, self.bound)),
                np.max(max_eta(pn, xi, metric["node"], self.eos, self.bound)),
            )
        return out

    def face_fluxes(self, poly, t, a_star):
        """Gauss-averaged LxF fluxes: dict axis -> ``faces + (5,)``."""
        metric = self.metric(t)
        fluxes = {}
        for d in self.grid.active:
            xi = np.eye(3)[d]
            wl, wr = self._face_states(poly, d)
            ms = metric["face"][d]
            ul, pl = self._prims(wl, ms, "face")
            ur, pr = self._prims(wr, ms, "face")
            Hl = directional_rescaled_flux(wl, ms, xi, self.eos, prim=pl, u=ul)
            Hr = directional_rescaled_flux(wr, ms, xi, self.eos, prim=pr, u=ur)
            point = 0.5 * (Hl + Hr) - 0.5 * a_star[d] * (wr - wl)
            fluxes[d] = np.einsum("...gc,g->...c", point, self.face_w[d])
        return fluxes

    def source_average(self, poly, t):
        """Tensor-Gauss average of ``S`` over each real cell."""
        shape = self.grid.shape + (5,)
        if not self.needs_source:
            return np.zeros(shape)
        ms = self.metric(t)["interior"]
        real = CellPolynomial(self._real(poly.wbar), self._real(poly.a), self._real(poly.b))
        vals = real.values(self.interior_pts)
        u, prim = self._prims(vals, ms, "interior Gauss point")
        S = source_S(vals, ms, self.eos, prim=prim, u=u)
        return np.einsum("...gc,g->...c", S, self.interior_w)

    def field_metric(self, t):
        """Metric at the cell centres (used for diagnostics and output)."""
        key = ("centers", None if self.provider.static else float(t))
        if getattr(self, "_center_ms", (None,))[0] != key:
            self._center_ms = (key, sample(self.provider, t, self.grid.centers()))
        return self._center_ms[1]

    def rhs_rate(self, a_star):
        return float(np.sum(a_star / self.grid.dx))

    # ------------------------------------------------------------- steps
    def max_dt(self, wbar, t=0.0) -> float:
        """Step bound ``dt (sum a/Delta + omega1 lambda_S) < omega1`` for the current field."""
        poly, _ = self.limited_polynomials(wbar)
        a_star = self.slack * self.speeds(poly, t)
        lam = 0.0
        if self.needs_source:
            lam = float(np.max(lambda_S_solve(wbar, self.source_average(poly, t))))
        w1 = self.quad.omega1
        rate = self.rhs_rate(a_star) + w1 * lam
        return np.inf if rate <= 0.0 else (1.0 - CFL_MARGIN) * w1 / rate

    def euler_stage(self, wbar, t, dt, a_star=None, stats=None):
        """One limited forward-Euler stage; returns ``(new averages, a_star)``."""
        poly, st = self.limited_polynomials(wbar)
        if stats is not None:
            stats.add(st)
        speeds = self.speeds(poly, t)
        if a_star is None:
            a_star = self.slack * speeds
        elif np.any(speeds > a_star):
            raise StageCFLViolation("node wave speeds exceed the stage viscosity a*", dt / 2)
        Sbar = self.source_average(poly, t)
        w1 = self.quad.omega1
        lam = 0.0
        if self.needs_source:
            lam = float(np.max(lambda_S_solve(wbar, Sbar)))
        if dt * (self.rhs_rate(a_star) + w1 * lam) >= w1:
            raise StageCFLViolation("time step violates the stage CFL condition",
                                    w1 / (self.rhs_rate(a_star) + w1 * lam))
        fluxes = self.face_fluxes(poly, t, a_star)
        out = update_cell_averages(wbar, fluxes, Sbar, dt, self.grid)
        bad = ~is_admissible_w(out)
        if bad.any():
            raise InadmissibleStateError(
                f"cell-average update left G_* in {int(bad.sum())} cell(s), "
                f"first at {tuple(int(i) for i in np.argwhere(bad)[0])}",
                indices=np.argwhere(bad),
            )
        return out, a_star

    def step(self, wbar, t, dt):
        """SSP-RK3 step; each stage is a limited Euler stage."""
        stats = LimiterStats()
        a_star = None

        def euler(w, ts):
            nonlocal a_star
            out, a_star = self.euler_stage(w, ts, dt, a_star, stats)
            return out

        w = ssp_rk3(euler, np.asarray(wbar, dtype=float), t, dt)
        return w, FVStepInfo(dt, a_star, stats)

    def node_values(self, wbar):
        """Limited node values of the real cells (for diagnostics and tests)."""
        poly, _ = self.limited_polynomials(wbar)
        real = CellPolynomial(self._real(poly.wbar), self._real(poly.a), self._real(poly.b))
        return real.values(self.limit_nodes)


def ssp_rk3(euler, w0, t, dt):
    """Shu-Osher SSP-RK3 from a forward-Euler operator ``euler(w, t_stage)``.

    Every stage is a convex combination of ``w0`` and an Euler update, so
    any convex invariant set of ``euler`` is preserved.
    """
    w = w0
    for (c0, c1), ts in zip(RK3_WEIGHTS, RK3_STAGE_TIMES):
        e = euler(w, t + ts * dt)
        w = c0 * w0 + c1 * e if c1 else e
    return w


def ssp_rk3_step(scheme: FVScheme, wbar, t, dt):
    return scheme.step(wbar, t, dt)[0]


def update_cell_averages(wbar, fluxes, source_avg, dt, grid: CuboidGrid):
    """``Wbar - dt sum_d (F_{d,+} - F_{d,-}) / Delta_d + dt Sbar``."""
    out = np.array(wbar, dtype=float, copy=True)
    for d, F in fluxes.items():
        n = F.shape[d]
        out -= dt / grid.dx[d] * (np.take(F, np.arange(1, n), axis=d) - np.take(F, np.arange(0, n - 1), axis=d))
    return out + dt * source_avg
