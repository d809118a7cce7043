"""Run configuration: TOML parsing, validation and object construction.

Schema (all tables optional unless noted)::

    [run]                       # required
    scheme = "fvpcp"            # lxf1 | fvpcp | fdpcp
    t_end = 0.2
    max_steps = 100000
    cfl = 0.9                   # safety factor in (0, 1)
    output_dir = "out"
    output_every = 0            # snapshot cadence in steps; 0 = initial and final only
    eps = 1e-12
    a_star_slack = 1.1
    speed_bound = "general"     # general | ideal
    seed = 0

    [eos]
    kind = "ideal"
    gamma = 1.6666666666666667

    [metric]
    kind = "minkowski"          # minkowski | diagonal_static
    alpha = "1"                 # expressions in x, y, z (diagonal_static)
    gamma_11 = "1"
    gamma_22 = "1"
    gamma_33 = "1"

    [grid]                      # fvpcp, fdpcp and lxf1 with mesh.kind = "hex"
    cells = [200, 1, 1]
    lower = [0.0, 0.0, 0.0]
    upper = [1.0, 1.0, 1.0]
    boundary = ["outflow", "periodic", "periodic"]

    [mesh]                      # lxf1 only
    kind = "hex"                # hex | json | prism
    path = "mesh.json"          # json; relative to the config file
    n = 6                       # prism
    layers = 2
    seed = 0

    [initial]
    kind = "riemann-1d"         # riemann-1d | smooth-wave | constant | random-admissible
    # riemann-1d: x0, left = [rho, v1, p], right = [rho, v1, p]
    # smooth-wave: amplitude, v1, pressure, rho0
    # constant: rho, v = [v1, v2, v3], p
    # random-admissible: rho_range, p_range, near_boundary_fraction, min_margin

    [fvpcp]
    degree = 2

    [debug]
    disable_limiter = false
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy

from .eos import IdealEOS
from .errors import ConfigError
from .grid import BOUNDARIES, CuboidGrid
from .spacetime import DiagonalStatic, Minkowski

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMES = ("lxf1", "fvpcp", "fdpcp")
INITIAL_KINDS = ("riemann-1d", "smooth-wave", "constant", "random-admissible")
METRIC_KINDS = ("minkowski", "diagonal_static")
MESH_KINDS = ("hex", "json", "prism")
BOUNDS = ("general", "ideal")


@dataclass
class RunConfig:
    scheme: str
    t_end: float
    cfl: float = 0.9
    max_steps: int = 1_000_000
    output_dir: str = "out"
    output_every: int = 0
    eps: float = 1e-12
    a_star_slack: float = 1.1
    speed_bound: str = "general"
    seed: int = 0
    gamma: float = 5.0 / 3.0
    metric: dict = field(default_factory=lambda: {"kind": "minkowski"})
    grid: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=lambda: {"kind": "hex"})
    initial: dict = field(default_factory=dict)
    degree: int = 2
    disable_limiter: bool = False
    base_dir: Path = field(default_factory=Path.cwd)

    # ------------------------------------------------------------ builders
    def eos(self):
        return IdealEOS(self.gamma)

    def provider(self):
        if self.metric.get("kind", "minkowski") == "minkowski":
            return Minkowski()
        return diagonal_static_from_expressions(
            self.metric.get("alpha", "1"),
            [self.metric.get(f"gamma_{i}{i}", "1") for i in (1, 2, 3)],
        )

    def cuboid_grid(self, cells=None):
        g = self.grid
        return CuboidGrid(
            tuple(cells if cells is not None else g.get("cells", (100, 1, 1))),
            tuple(g.get("lower", (0.0, 0.0, 0.0))),
            tuple(g.get("upper", (1.0, 1.0, 1.0))),
            tuple(g.get("boundary", ("periodic", "periodic", "periodic"))),
        )

    def with_cells(self, cells):
        """Copy with a different grid resolution (used by the convergence harness)."""
        new = RunConfig(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        new.grid = dict(self.grid, cells=list(cells))
        return new


def diagonal_static_from_expressions(alpha: str, gamma_diag) -> DiagonalStatic:
    x, y, z = sympy.symbols("x y z")
    try:
        exprs = [sympy.sympify(alpha)] + [sympy.sympify(g) for g in gamma_diag]
    except (sympy.SympifyError, TypeError) as exc:
        raise ConfigError(f"metric: cannot parse expression: {exc}") from exc
    funcs = [sympy.lambdify((x, y, z), e, modules="numpy") for e in exprs]

    def call(f, pos):
        pos = np.asarray(pos, dtype=float)
        return np.broadcast_to(f(pos[..., 0], pos[..., 1], pos[..., 2]), pos.shape[:-1]).astype(float)

    return DiagonalStatic(
        lambda pos: call(funcs[0], pos),
        lambda pos: np.stack([call(f, pos) for f in funcs[1:]], axis=-1),
    )


def _num(table, key, path, problems, default=None, kind=float):
    if key not in table:
        if default is None:
            problems.append(f"{path}.{key}: required")
        return default
    val = table[key]
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            problems.append(f"{path}.{key}: must be an integer")
            return default
        return val
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        problems.append(f"{path}.{key}: must be a number")
        return default
    return float(val)


def _vec3(table, key, path, problems):
    val = table.get(key)
    if val is None:
        return None
    if not isinstance(val, list) or len(val) != 3:
        problems.append(f"{path}.{key}: must be a list of three values")
        return None
    return val


def parse_config(data: dict, base_dir=None) -> RunConfig:
    """Validate a parsed TOML document; raises :class:`ConfigError` listing every problem."""
    problems = []
    run = data.get("run")
    if not isinstance(run, dict):
        raise ConfigError("run: missing [run] table")
    scheme = run.get("scheme")
    if scheme not in SCHEMES:
        problems.append(f"run.scheme: unknown scheme {scheme!r} (expected one of {', '.join(SCHEMES)})")
    t_end = _num(run, "t_end", "run", problems)
    if t_end is not None and not t_end > 0.0:
        problems.append("run.t_end: must be positive")
    cfl = _num(run, "cfl", "run", problems, default=0.9)
    if cfl is not None and not (0.0 < cfl < 1.0):
        problems.append("run.cfl: safety factor must be < 1 (and > 0)")
    eps = _num(run, "eps", "run", problems, default=1e-12)
    if eps is not None and not eps > 0.0:
        problems.append("run.eps: must be positive")
    slack = _num(run, "a_star_slack", "run", problems, default=1.1)
    if slack is not None and slack < 1.0:
        problems.append("run.a_star_slack: must be >= 1")
    bound = run.get("speed_bound", "general")
    if bound not in BOUNDS:
        problems.append(f"run.speed_bound: unknown bound {bound!r}")
    max_steps = _num(run, "max_steps", "run", problems, default=1_000_000, kind=int)
    every = _num(run, "output_every", "run", problems, default=0, kind=int)
    seed = _num(run, "seed", "run", problems, default=0, kind=int)

    eos_t = data.get("eos", {})
    if eos_t.get("kind", "ideal") != "ideal":
        problems.append(f"eos.kind: unsupported EOS {eos_t.get('kind')!r} in config files (only 'ideal')")
    gamma = _num(eos_t, "gamma", "eos", problems, default=5.0 / 3.0)
    if gamma is not None and not (1.0 < gamma <= 2.0):
        problems.append("eos.gamma: must lie in (1, 2]")

    metric = dict(data.get("metric", {"kind": "minkowski"}))
    if metric.get("kind", "minkowski") not in METRIC_KINDS:
        problems.append(f"metric.kind: unknown metric {metric.get('kind')!r}")

    grid = dict(data.get("grid", {}))
    for key in ("cells", "lower", "upper", "boundary"):
        _vec3(grid, key, "grid", problems)
    for b in grid.get("boundary", []) if isinstance(grid.get("boundary"), list) else []:
        if b not in BOUNDARIES:
            problems.append(f"grid.boundary: unknown boundary {b!r}")

    mesh = dict(data.get("mesh", {"kind": "hex"}))
    if scheme == "lxf1" and mesh.get("kind", "hex") not in MESH_KINDS:
        problems.append(f"mesh.kind: unknown mesh kind {mesh.get('kind')!r}")
    if scheme == "lxf1" and mesh.get("kind") == "json" and "path" not in mesh:
        problems.append("mesh.path: required for a JSON mesh")

    initial = dict(data.get("initial", {}))
    if initial.get("kind") not in INITIAL_KINDS:
        problems.append(f"initial.kind: unknown initial condition {initial.get('kind')!r}")
    if initial.get("kind") == "riemann-1d":
        for side in ("left", "right"):
            st = initial.get(side)
            if not (isinstance(st, list) and len(st) == 3):
                problems.append(f"initial.{side}: must be [rho, v1, p]")

    fv = data.get("fvpcp", {})
    degree = _num(fv, "degree", "fvpcp", problems, default=2, kind=int)
    if degree is not None and degree not in (0, 1, 2):
        problems.append("fvpcp.degree: must be 0, 1 or 2")

    debug = data.get("debug", {})
    disable = bool(debug.get("disable_limiter", False))

    if problems:
        raise ConfigError(problems)
    cfg = RunConfig(
        scheme=scheme, t_end=t_end, cfl=cfl, max_steps=max_steps,
        output_dir=str(run.get("output_dir", "out")), output_every=every, eps=eps,
        a_star_slack=slack, speed_bound=bound, seed=seed, gamma=gamma, metric=metric,
        grid=grid, mesh=mesh, initial=initial, degree=degree, disable_limiter=disable,
        base_dir=Path(base_dir) if base_dir else Path.cwd(),
    )
    # building the grid and metric surfaces their own validation errors
    if scheme != "lxf1" or mesh.get("kind", "hex") == "hex":
        cfg.cuboid_grid()
    cfg.provider()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: parse error in {path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent)
