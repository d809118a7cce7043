"""Quick randomized property checks, runnable from the command line.

Each check draws fresh random states from a seeded generator and reports
PASS/FAIL with the worst observed value.  The full test-suite covers the
same properties with more samples; this is the smoke version shipped with
the package.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .eos import IdealEOS
from .errors import DomainError
from .flux import directional_flux, eigenvalues, speed_bound_general, speed_bound_ideal
from .grid import build_quadrature
from .problems import random_primitives
from .spacetime import Minkowski, cholesky_sigma, random_metric, sample, source_Q, source_S
from .states import (
    Primitives,
    conserved_to_primitives,
    primitives_to_conserved,
    q_gamma,
    q_star,
    recovery_residual,
    u_to_w,
)


@dataclass
class PropResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _metric(rng, n):
    return sample(random_metric(rng, n), 0.0, np.zeros((n, 3)))


def _random_u(rng, ms, margin_range=(1e-12, 1.0)):
    """Conserved states with ``D > 0`` and ``q_gamma > 0`` drawn directly in U-space."""
    n = ms.shape[0]
    D = np.exp(rng.uniform(np.log(1e-8), np.log(1e2), size=n))
    y = rng.normal(size=(n, 3)) * np.exp(rng.uniform(np.log(1e-6), np.log(1e3), size=n))[:, None]
    m = np.einsum("nij,nj->ni", np.linalg.cholesky(ms.gamma_dn), y)
    s = np.einsum("ni,nij,nj->n", m, ms.upsilon, m)
    base = np.sqrt(D**2 + s)
    rel = np.exp(rng.uniform(*np.log(margin_range), size=n))
    return np.column_stack([D, m, base * (1.0 + rel)])


def check_recovery(n=2000, seed=0, eos=None):
    eos = eos or IdealEOS(5.0 / 3.0)
    rng = np.random.default_rng(seed)
    ms = _metric(rng, n)
    u = _random_u(rng, ms)
    prim = conserved_to_primitives(u, ms, eos)
    res = recovery_residual(u, prim, ms, eos)
    ok = bool(np.all(prim.admissible()) and res.max() <= 1e-12)
    bad = u.copy()
    bad[:, 4] = np.sqrt(bad[:, 0] ** 2 + np.einsum("ni,nij,nj->n", bad[:, 1:4], ms.upsilon, bad[:, 1:4])) * (
        1.0 - rng.uniform(0.0, 1.0, size=n))
    rejected = 0
    for i in range(0, n, max(1, n // 20)):
        try:
            conserved_to_primitives(bad[i:i + 1], ms[i:i + 1], eos)
        except DomainError:
            rejected += 1
    ok &= rejected == len(range(0, n, max(1, n // 20)))
    return PropResult("recovery equivalence", ok, f"max residual {res.max():.2e}")


def check_splitting(n=2000, seed=1, eos=None):
    eos = eos or IdealEOS(5.0 / 3.0)
    rng = np.random.default_rng(seed)
    ms = _metric(rng, n)
    prim = Primitives.build(*random_primitives(ms, rng, vmax=0.999), ms, eos)
    u = primitives_to_conserved(prim, ms)
    xi = rng.normal(size=(n, 3))
    F = directional_flux(prim, u, ms, xi)
    worst = np.inf
    for bound in (speed_bound_general(xi, ms), speed_bound_ideal(prim, xi, ms, eos)):
        for sign in (1.0, -1.0):
            q = q_gamma(u + sign * F / bound.rho_xi[:, None], ms.upsilon)
            worst = min(worst, float((q / u[:, 4]).min()))
    lam = np.abs(eigenvalues(prim, xi, ms, eos)).max(axis=-1)
    spectral = bool(np.all(lam <= speed_bound_general(xi, ms).rho_xi * (1 + 1e-12)))
    return PropResult("LxF splitting", worst >= -1e-11 and spectral, f"min q/E {worst:.2e}")


def check_convexity(n=20000, seed=2):
    rng = np.random.default_rng(seed)
    ms = Minkowski()
    sm = sample(ms, 0.0, np.zeros((n, 3)))
    eos = IdealEOS(5.0 / 3.0)
    w1 = u_to_w(primitives_to_conserved(Primitives.build(*random_primitives(sm, rng, vmax=0.999), sm, eos), sm), sm)
    w2 = u_to_w(primitives_to_conserved(Primitives.build(*random_primitives(sm, rng, vmax=0.999), sm, eos), sm), sm)
    lam = rng.uniform(size=(n, 1))
    mix = lam * w1 + (1 - lam) * w2
    scale = np.exp(rng.uniform(-10, 10, size=(n, 1))) * w1
    concave = q_star(mix) >= lam[:, 0] * q_star(w1) + (1 - lam[:, 0]) * q_star(w2) - 1e-12 * mix[:, 4]
    ok = bool(np.all(mix[:, 0] > 0) and np.all(q_star(mix) > 0) and np.all(q_star(scale) > 0) and np.all(concave))
    return PropResult("convexity and scaling", ok, f"min q(mix)/W4 {(q_star(mix) / mix[:, 4]).min():.2e}")


def check_identities(seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for K in (0, 1, 2, 3, 4):
        quad = build_quadrature(K)
        for deg in range(2 * quad.L - 2):
            exact = (0.5 ** (deg + 1) - (-0.5) ** (deg + 1)) / (deg + 1)
            worst = max(worst, abs(quad.lobatto_weights @ quad.lobatto_nodes**deg - exact))
        for deg in range(2 * quad.Q):
            exact = (0.5 ** (deg + 1) - (-0.5) ** (deg + 1)) / (deg + 1)
            worst = max(worst, abs(quad.gauss_weights @ quad.gauss_nodes**deg - exact))
    ms = _metric(rng, 500)
    sig = cholesky_sigma(ms.upsilon)
    target = np.zeros((500, 5, 5))
    target[:, 0, 0] = target[:, 4, 4] = 1.0
    target[:, 1:4, 1:4] = ms.upsilon
    sig_err = np.abs(np.einsum("nba,nbc->nac", sig, sig) - target).max()
    detg = np.linalg.det(ms.g_dn)
    vol_err = np.abs(np.sqrt(-detg) / (ms.alpha * ms.sqrt_gamma) - 1).max()
    flat = sample(Minkowski(), 0.0, np.zeros((10, 3)))
    eos = IdealEOS()
    prim = Primitives.build(np.ones(10), np.full((10, 3), 0.1), np.ones(10), flat, eos)
    w = u_to_w(primitives_to_conserved(prim, flat), flat)
    zero = not np.any(source_Q(prim, flat)) and not np.any(source_S(w, flat, eos))
    ok = worst <= 1e-13 and sig_err <= 1e-13 and vol_err <= 1e-12 and zero
    return PropResult("quadrature/metric identities", bool(ok),
                      f"quad {worst:.1e}, sigma {sig_err:.1e}, volume {vol_err:.1e}")


CHECKS = (check_recovery, check_splitting, check_convexity, check_identities)


def run_all(seed=0, out=print):
    """Run every check; returns True when all pass."""
    results = []
    for offset, check in enumerate(CHECKS):
        t0 = time.perf_counter()
        res = check(seed=seed + offset)
        res.seconds = time.perf_counter() - t0
        results.append(res)
        out(f"{'PASS' if res.passed else 'FAIL'}  {res.name:32s} {res.detail}  ({res.seconds:.2f} s)")
    return all(r.passed for r in results)

