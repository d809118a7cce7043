"""Time loop, diagnostics and the convergence harness shared by the CLI and tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import problems
from .config import RunConfig
from .errors import ConfigError, InadmissibleStateError, StageCFLViolation
from .fdpcp import FDScheme
from .fvpcp import FVScheme
from .io import DiagnosticsWriter, write_order_table, write_snapshot_binary, write_snapshot_csv
from .lxf1 import LxfScheme
from .mesh import hex_mesh, load_mesh_json, prism_mesh
from .states import conserved_to_primitives, is_admissible_w, is_in_G_eps, q_star, w_to_u

log = logging.getLogger(__name__)

MAX_RETRIES = 30


def build_scheme(cfg: RunConfig):
    eos = cfg.eos()
    provider = cfg.provider()
    limiter = not cfg.disable_limiter
    if cfg.scheme == "lxf1":
        kind = cfg.mesh.get("kind", "hex")
        if kind == "json":
            mesh = load_mesh_json(cfg.base_dir / cfg.mesh["path"])
        elif kind == "prism":
            mesh = prism_mesh(n=int(cfg.mesh.get("n", 6)), layers=int(cfg.mesh.get("layers", 2)),
                              seed=int(cfg.mesh.get("seed", 0)))
        else:
            g = cfg.cuboid_grid()
            mesh = hex_mesh(g.shape, g.lower, g.upper, [b == "periodic" for b in g.boundary])
        return LxfScheme(mesh, provider, eos, cfg.speed_bound)
    grid = cfg.cuboid_grid()
    if cfg.scheme == "fvpcp":
        return FVScheme(grid, provider, eos, K=cfg.degree, eps=cfg.eps, slack=cfg.a_star_slack,
                        bound=cfg.speed_bound, limiter=limiter)
    return FDScheme(grid, provider, eos, slack=cfg.a_star_slack, bound=cfg.speed_bound,
                    limiter=limiter, eps_floor=cfg.eps)


def _positions(scheme):
    if isinstance(scheme, LxfScheme):
        return scheme.mesh.centroids, None
    return scheme.grid.centers(), scheme.grid.dx[0]


def initial_field(cfg: RunConfig, scheme, t=0.0):
    eos = scheme.eos
    ms = scheme.field_metric(t)
    x, dx = _positions(scheme)
    ic = cfg.initial
    kind = ic.get("kind")
    if kind == "riemann-1d":
        return problems.riemann_1d(x, ms, eos, ic["left"], ic["right"], x0=float(ic.get("x0", 0.5)))
    if kind == "smooth-wave":
        params = {k: float(ic[k]) for k in ("amplitude", "v1", "pressure", "rho0") if k in ic}
        averaged = isinstance(scheme, FVScheme)
        if isinstance(scheme, LxfScheme):
            # cell averages of a first-order scheme; the axis-0 width is uniform on hex meshes
            widths = np.ptp(scheme.mesh.centroids[:, 0]) / max(1, len(np.unique(scheme.mesh.centroids[:, 0])) - 1)
            return problems.smooth_wave(x, ms, eos, t, dx=widths, **params)
        return problems.smooth_wave(x, ms, eos, t, dx=dx if averaged else None, **params)
    if kind == "constant":
        return problems.constant_state(x, ms, eos, rho=ic.get("rho", 1.0), v=ic.get("v", 0.0),
                                       p=ic.get("p", 1.0))
    if kind == "random-admissible":
        rng = np.random.default_rng(cfg.seed)
        kw = {}
        for key in ("rho_range", "p_range"):
            if key in ic:
                kw[key] = tuple(float(v) for v in ic[key])
        return problems.random_admissible(
            x, ms, eos, rng,
            near_boundary_fraction=float(ic.get("near_boundary_fraction", 0.0)),
            min_margin=float(ic.get("min_margin", 1e-10)), **kw,
        )
    raise ConfigError(f"initial.kind: unknown initial condition {kind!r}")


@dataclass
class RunResult:
    w: np.ndarray
    t: float
    steps: int
    diagnostics: list = field(default_factory=list)
    min_face_theta: float = 1.0


def diagnostics_row(step, t, dt, w, ms, eos, info=None, retries=0):
    flat = w.reshape(-1, 5)
    msf = ms.reshape((flat.shape[0],))
    prim = conserved_to_primitives(w_to_u(flat, msf), msf, eos)
    row = {
        "step": step, "t": float(t), "dt": float(dt),
        "min_W0": float(flat[:, 0].min()), "min_q": float(q_star(flat).min()),
        "min_rho": float(prim.rho.min()), "min_p": float(prim.p.min()),
        "max_lorentz": float(prim.lorentz.max()), "retries": retries,
        "limited_theta1": 0, "limited_theta2": 0, "vacuum_cells": 0, "min_face_theta": 1.0,
    }
    lim = getattr(info, "limiter", None)
    if lim is not None:
        row.update(limited_theta1=lim.theta1, limited_theta2=lim.theta2, vacuum_cells=lim.vacuum)
    if hasattr(info, "min_theta"):
        row["min_face_theta"] = float(info.min_theta)
    return row


def guaranteed_set(w, info, eps):
    """Membership in the set each scheme guarantees after a compliant step.

    The FD limiter guarantees ``G_eps`` with its data-dependent stage
    ``eps``; the FV and first-order schemes guarantee the open set ``G_*``
    for the updated averages (cells with tiny but positive margins are
    legitimate there).
    """
    stage_eps = getattr(info, "eps", None)
    if stage_eps is not None:
        return is_in_G_eps(w, min(eps, stage_eps))
    return is_admissible_w(w)


def evolve(scheme, w, t_end, cfl=0.9, max_steps=1_000_000, eps=1e-12, t=0.0,
           on_step=None, diag_writer=None):
    """Advance ``w`` to ``t_end``; aborts on any state the scheme does not guarantee.

    A stage that finds its step above the stage CFL bound triggers a retry
    with half the step.
    """
    steps = 0
    min_theta = 1.0
    rows = []
    while t < t_end * (1.0 - 1e-14) and steps < max_steps:
        dt = min(cfl * scheme.max_dt(w, t), t_end - t)
        retries = 0
        while True:
            try:
                new, info = scheme.step(w, t, dt)
                break
            except StageCFLViolation as exc:
                retries += 1
                if retries > MAX_RETRIES:
                    raise
                log.info("step %d: %s; retrying with dt/2", steps, exc)
                dt = min(dt / 2.0, cfl * exc.dt_max)
            except InadmissibleStateError as exc:
                exc.step = steps
                raise
        inside = guaranteed_set(new, info, eps)
        if not np.all(inside):
            bad = np.argwhere(~np.atleast_1d(inside))
            raise InadmissibleStateError(
                f"{len(bad)} state(s) outside the admissible set, first at {tuple(int(i) for i in bad[0])}",
                indices=bad, step=steps,
            )
        w = new
        t += dt
        steps += 1
        min_theta = min(min_theta, getattr(info, "min_theta", 1.0))
        if diag_writer is not None or on_step is not None:
            row = diagnostics_row(steps, t, dt, w, scheme.field_metric(t), scheme.eos, info, retries)
            rows.append(row)
            if diag_writer is not None:
                diag_writer.write(row)
            if on_step is not None:
                on_step(steps, t, w, info)
    return RunResult(w, t, steps, rows, min_theta)


def _spacing(scheme):
    if isinstance(scheme, LxfScheme):
        return (0.0, 0.0, 0.0)
    return tuple(scheme.grid.dx)


def run(cfg: RunConfig) -> RunResult:
    """Run a configured problem, writing snapshots and diagnostics to ``output_dir``."""
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        out = cfg.base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    scheme = build_scheme(cfg)
    w = initial_field(cfg, scheme)
    eos = scheme.eos

    def snapshot(tag, t, field):
        write_snapshot_csv(out / f"snapshot_{tag}.csv", field, scheme.field_metric(t), eos)
        write_snapshot_binary(out / f"snapshot_{tag}.bin", field, _spacing(scheme), t)

    snapshot("0000000", 0.0, w)

    def on_step(step, t, field, info):
        if cfg.output_every and step % cfg.output_every == 0:
            snapshot(f"{step:07d}", t, field)

    with DiagnosticsWriter(out / "diagnostics.csv") as diag:
        diag.write(diagnostics_row(0, 0.0, 0.0, w, scheme.field_metric(0.0), eos))
        result = evolve(scheme, w, cfg.t_end, cfg.cfl, cfg.max_steps, cfg.eps,
                        on_step=on_step, diag_writer=diag)
    snapshot("final", result.t, result.w)
    return result


def l1_error_D(cfg: RunConfig, scheme, w, t):
    """Mean absolute error of ``W_0`` against the exact smooth wave (flat metric)."""
    exact = initial_field(cfg, scheme, t)
    return float(np.mean(np.abs(w[..., 0] - exact[..., 0])))


def converge(cfg: RunConfig, levels: int, output=None):
    """Run the smooth wave on ``levels`` successively doubled grids.

    Returns rows with the L1 error of ``W_0`` and the observed order.
    """
    if levels < 2:
        raise ConfigError("converge: need at least two levels")
    if cfg.initial.get("kind") != "smooth-wave":
        raise ConfigError("initial.kind: the convergence harness needs the smooth-wave problem")
    if cfg.metric.get("kind", "minkowski") != "minkowski":
        raise ConfigError("metric.kind: the smooth-wave exact solution needs the flat metric")
    base = list(cfg.grid.get("cells", (32, 1, 1)))
    rows = []
    for lev in range(levels):
        cells = [base[0] * 2**lev] + base[1:]
        lcfg = cfg.with_cells(cells)
        if lcfg.scheme == "lxf1":
            lcfg.mesh = {"kind": "hex"}
        scheme = build_scheme(lcfg)
        w = initial_field(lcfg, scheme)
        res = evolve(scheme, w, lcfg.t_end, lcfg.cfl, lcfg.max_steps, lcfg.eps)
        err = l1_error_D(lcfg, scheme, res.w, res.t)
        row = {"scheme": cfg.scheme, "n": cells[0], "dx": 1.0 / cells[0], "l1_error": err,
               "order": "", "min_face_theta": res.min_face_theta}
        if rows:
            row["order"] = float(np.log2(rows[-1]["l1_error"] / err))
        rows.append(row)
    if output is not None:
        write_order_table(output, rows)
    return rows
