"""Fluxes, characteristic speeds and the LxF splitting property of the speed bounds.

The eigenvalue oracle is a finite-difference Jacobian of the directional
flux with respect to the conserved variables, built through primitives.
"""

import numpy as np
import pytest

from conftest import flat_sample
from pcpgrhd.eos import IdealEOS, UserEOS
from pcpgrhd.errors import DomainError, UnsupportedEosError
from pcpgrhd.flux import (
    directional_flux,
    directional_rescaled_flux,
    eigenvalues,
    physical_flux,
    rescaled_flux,
    speed_bound_general,
    speed_bound_ideal,
    speed_bound_sigma_variant,
    varsigma,
)
from pcpgrhd.problems import random_primitives
from pcpgrhd.spacetime import DiagonalStatic, FrozenADM, random_metric, sample
from pcpgrhd.states import Primitives, primitives_to_conserved, q_gamma, q_star, u_to_w

EOS = IdealEOS(5 / 3)
E1 = np.array([1.0, 0.0, 0.0])


def _frozen(alpha=1.0, beta=(0, 0, 0), gamma=np.eye(3), n=1):
    return sample(FrozenADM(alpha, np.array(beta, float), np.asarray(gamma, float)), 0.0, np.zeros((n, 3)))


def _state(rho, v, p, ms, eos=EOS):
    prim = Primitives.build(np.atleast_1d(rho), np.atleast_2d(v), np.atleast_1d(p), ms, eos)
    return prim, primitives_to_conserved(prim, ms)


def _random_states(rng, n, eos=EOS):
    ms = sample(random_metric(rng, n), 0.0, np.zeros((n, 3)))
    prim = Primitives.build(*random_primitives(ms, rng), ms, eos)
    xi = rng.normal(size=(n, 3))
    return ms, prim, primitives_to_conserved(prim, ms), xi


def test_static_fluid_flux_is_pressure_only():
    ms = flat_sample(1)
    prim, u = _state(1.0, [0, 0, 0], 0.7, ms)
    assert np.array_equal(physical_flux(prim, u, ms, 0)[0], [0, 0.7, 0, 0, 0])


def test_moving_fluid_mass_flux():
    ms = flat_sample(1)
    prim, u = _state(1.0, [0.5, 0, 0], 1.0, ms)
    assert physical_flux(prim, u, ms, 0)[0, 0] == pytest.approx(0.5 * 2 / np.sqrt(3), rel=1e-15)


def test_shift_enters_transport_velocity():
    ms = _frozen(beta=(0.3, 0, 0))
    prim, u = _state(1.0, [0, 0, 0], 1.0, ms)
    assert physical_flux(prim, u, ms, 0)[0, 0] == pytest.approx(-0.3 * u[0, 0], rel=1e-15)


def test_directional_flux_is_linear_in_direction(rng):
    ms, prim, u, xi = _random_states(rng, 200)
    combo = sum(xi[:, [i]] * physical_flux(prim, u, ms, i) for i in range(3))
    assert np.allclose(directional_flux(prim, u, ms, xi), combo, rtol=1e-12, atol=1e-12 * np.abs(combo).max())


def test_rescaled_flux_flat_equals_physical():
    ms = flat_sample(1)
    prim, u = _state(1.0, [0.3, -0.2, 0.1], 0.5, ms)
    for j in range(3):
        assert np.allclose(rescaled_flux(u, ms, j, EOS), physical_flux(prim, u, ms, j), rtol=1e-13, atol=1e-15)


def test_rescaled_flux_curved_composition():
    gdiag = (1.5, 0.8, 2.0)
    ms = sample(DiagonalStatic.constant(1.3, gdiag), 0.0, np.zeros((1, 3)))
    prim, u = _state(1.0, [0.2, 0.1, -0.3], 0.4, ms)
    w = u_to_w(u, ms)
    sqrt_gamma = np.sqrt(np.prod(gdiag))
    sigma = np.diag([1.0, *(1 / np.sqrt(gdiag)), 1.0])
    expect = 1.3 * sqrt_gamma * sigma @ physical_flux(prim, u, ms, 0)[0]
    assert np.allclose(rescaled_flux(w, ms, 0, EOS)[0], expect, rtol=1e-13)


def test_rescaled_flux_static_fluid_momentum_row():
    gdiag = (4.0, 1.0, 1.0)
    ms = sample(DiagonalStatic.constant(2.0, gdiag), 0.0, np.zeros((1, 3)))
    prim, u = _state(1.0, [0, 0, 0], 0.6, ms)
    H = rescaled_flux(u_to_w(u, ms), ms, 0, EOS)[0]
    # alpha sqrt(gamma) p Sigma e_1 = 2 * 2 * 0.6 * 0.5
    assert np.allclose(H, [0, 1.2, 0, 0, 0], atol=1e-15)


@pytest.mark.parametrize(
    "alpha,beta,gamma,rho,eta",
    [
        (1.0, (0, 0, 0), np.eye(3), 1.0, 1.0),
        (2.0, (1, 0, 0), np.eye(3), 1.5, 3.0),
        (1.0, (0, 0, 0), np.diag([0.25, 1, 1]), 2.0, 2.0),
    ],
)
def test_general_bound_values(alpha, beta, gamma, rho, eta):
    sb = speed_bound_general(E1, _frozen(alpha, beta, gamma))
    assert sb.rho_xi[0] == pytest.approx(rho, rel=1e-15)
    assert sb.eta_xi[0] == pytest.approx(eta, rel=1e-15)


def test_ideal_bound_rest_state_is_sound_speed():
    ms = flat_sample(1)
    prim, _ = _state(1.0, [0, 0, 0], 1.0, ms)
    assert speed_bound_ideal(prim, E1, ms, EOS).rho_xi[0] == pytest.approx(np.sqrt(10 / 21), rel=1e-14)


def test_ideal_bound_tends_to_light_speed():
    ms = flat_sample(3)
    v = np.array([0.9, 0.999, 0.999999])
    prim = Primitives.build(np.ones(3), np.column_stack([v, 0 * v, 0 * v]), np.ones(3), ms, EOS)
    r = speed_bound_ideal(prim, E1, ms, EOS).rho_xi
    assert np.all(r < 1) and np.all(np.diff(r) > 0)
    assert r[-1] > 1 - 1e-6


def test_ideal_bound_requires_ideal_eos():
    ms = flat_sample(1)
    prim, _ = _state(1.0, [0, 0, 0], 1.0, ms)
    user = UserEOS(lambda p, r: 1.5 * p / r, lambda p, r: 1.5 / r, lambda p, r: -1.5 * p / r**2)
    with pytest.raises(UnsupportedEosError):
        speed_bound_ideal(prim, E1, ms, user)


def test_bound_dominance(rng):
    ms, prim, u, xi = _random_states(rng, 10_000)
    general = speed_bound_general(xi, ms).rho_xi
    assert np.all(speed_bound_ideal(prim, xi, ms, EOS).rho_xi <= general + 1e-14 * general)
    variant = speed_bound_sigma_variant(prim, xi, ms)
    assert variant.splitting_only
    assert np.all(variant.rho_xi <= general * (1 + 1e-14))


def test_sigma_variant_rest_state():
    ms = flat_sample(1)
    prim, _ = _state(1.0, [0, 0, 0], 1.0, ms)
    vs = varsigma(prim)[0]
    assert speed_bound_sigma_variant(prim, E1, ms).rho_xi[0] == pytest.approx(np.sqrt(1 / (vs + 1)), rel=1e-14)


def test_sigma_variant_collapses_to_general_at_zero():
    # rho h - p = sqrt(rho^2 + p^2) makes varsigma vanish; the bound is then the general one
    ms = _frozen(1.5, (0.2, -0.1, 0), np.diag([1.2, 0.9, 1.1]))
    p, rho = 1.0, 1.0
    e = (np.sqrt(rho**2 + p**2) - rho) / rho
    user = UserEOS(lambda pp, rr: e + 0 * pp, lambda pp, rr: 0 * pp, lambda pp, rr: 0 * pp)
    prim = Primitives.build(np.array([rho]), np.array([[0.3, 0.2, 0.0]]), np.array([p]), ms, user)
    assert varsigma(prim)[0] == pytest.approx(0.0, abs=1e-14)
    xi = np.array([0.4, -1.0, 0.3])
    assert speed_bound_sigma_variant(prim, xi, ms).rho_xi[0] == pytest.approx(
        speed_bound_general(xi, ms).rho_xi[0], rel=1e-13
    )


def test_varsigma_needs_pressure():
    ms = flat_sample(1)
    prim = Primitives.build(np.ones(1), np.zeros((1, 3)), np.zeros(1), ms, EOS)
    with pytest.raises(DomainError):
        varsigma(prim)


def test_rest_state_eigenvalues():
    ms = flat_sample(1)
    prim, _ = _state(1.0, [0, 0, 0], 1.0, ms)
    cs = np.sqrt(10 / 21)
    assert np.allclose(eigenvalues(prim, E1, ms, EOS)[0], [-cs, 0, 0, 0, cs], atol=1e-15)
    shifted = _frozen(beta=(0.3, 0, 0))
    prim_s, _ = _state(1.0, [0, 0, 0], 1.0, shifted)
    assert np.allclose(eigenvalues(prim_s, E1, shifted, EOS)[0], np.array([-cs, 0, 0, 0, cs]) - 0.3, atol=1e-15)


def _numeric_jacobian_eigs(prim, ms, xi, eos):
    """Eigenvalues of d(xi_j F^j)/dU from central differences in primitives."""
    base = np.array([prim.rho[0], *prim.v_dn[0], prim.p[0]])

    def maps(x):
        pr = Primitives.build(x[:1], x[None, 1:4], x[4:], ms, eos)
        u = primitives_to_conserved(pr, ms)
        return u[0], directional_flux(pr, u, ms, xi)[0]

    UP = np.empty((5, 5))
    FP = np.empty((5, 5))
    for k in range(5):
        step = 1e-6 * max(abs(base[k]), 1e-3)
        xp, xm = base.copy(), base.copy()
        xp[k] += step
        xm[k] -= step
        (up, fp), (um, fm) = maps(xp), maps(xm)
        UP[:, k] = (up - um) / (2 * step)
        FP[:, k] = (fp - fm) / (2 * step)
    return np.sort(np.linalg.eigvals(np.linalg.solve(UP.T, FP.T).T).real)


@pytest.mark.parametrize("seed", range(8))
def test_eigenvalues_match_numeric_jacobian(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) * 0.3
    ms = _frozen(rng.uniform(0.6, 1.4), rng.uniform(-0.3, 0.3, 3), np.eye(3) + a @ a.T)
    v = rng.normal(size=3)
    # scale so that v_j v^j = 0.64
    v *= 0.8 / np.sqrt(v @ np.linalg.inv(np.eye(3) + a @ a.T) @ v)
    prim, _ = _state(rng.uniform(0.5, 2), v, rng.uniform(0.2, 2), ms)
    xi = rng.normal(size=3)
    got = np.sort(eigenvalues(prim, xi, ms, EOS)[0])
    ref = _numeric_jacobian_eigs(prim, ms, xi, EOS)
    assert np.allclose(got, ref, atol=1e-6)


def test_eigenvalues_bounded_by_general_bound(rng):
    ms, prim, _, xi = _random_states(rng, 10_000)
    lam = eigenvalues(prim, xi, ms, EOS)
    assert np.array_equal(lam[:, 1], lam[:, 2]) and np.array_equal(lam[:, 1], lam[:, 3])
    bound = speed_bound_general(xi, ms).rho_xi
    assert np.all(np.abs(lam).max(axis=1) <= bound * (1 + 1e-13))


@pytest.mark.parametrize("which", ["general", "ideal", "variant"])
def test_lxf_splitting_conserved(which, rng):
    ms, prim, u, xi = _random_states(rng, 10_000)
    bound = {
        "general": lambda: speed_bound_general(xi, ms),
        "ideal": lambda: speed_bound_ideal(prim, xi, ms, EOS),
        "variant": lambda: speed_bound_sigma_variant(prim, xi, ms),
    }[which]().rho_xi
    F = directional_flux(prim, u, ms, xi)
    for sgn in (1, -1):
        v = u + sgn * F / bound[:, None]
        assert np.all(q_gamma(v, ms.upsilon) >= -1e-11 * u[:, 4])
        assert np.all(v[:, 0] > -1e-11 * u[:, 0])
        strict = u + sgn * F / (1.01 * bound[:, None])
        assert np.all(q_gamma(strict, ms.upsilon) > 0)


@pytest.mark.parametrize("which", ["general", "ideal"])
def test_lxf_splitting_rescaled(which, rng):
    ms, prim, u, xi = _random_states(rng, 10_000)
    w = u_to_w(u, ms)
    sb = speed_bound_general(xi, ms) if which == "general" else speed_bound_ideal(prim, xi, ms, EOS)
    H = directional_rescaled_flux(w, ms, xi, EOS, prim=prim, u=u)
    for sgn in (1, -1):
        v = w + sgn * H / sb.eta_xi[:, None]
        assert np.all(q_star(v) >= -1e-11 * np.abs(w[:, 4]))
        assert np.all(q_star(w + sgn * H / (1.01 * sb.eta_xi[:, None])) > 0)
