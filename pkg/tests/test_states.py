"""Conserved/primitive maps, admissibility functions and the pressure recovery.

High-precision roots from mpmath are the oracle for the recovery: they give
the exact pressure of the double-rounded conserved state, which separates
solver error from the conditioning of the data itself.
"""

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flat_sample
from pcpgrhd.eos import IdealEOS
from pcpgrhd.errors import DomainError
from pcpgrhd.problems import random_primitives
from pcpgrhd.spacetime import DiagonalStatic, random_metric, sample
from pcpgrhd.states import (
    Primitives,
    conserved_to_primitives,
    dpsi_dp,
    is_admissible_u,
    is_admissible_w,
    is_in_G_eps,
    primitives_to_conserved,
    psi,
    q_gamma,
    q_star,
    recover_pressure,
    recovery_residual,
    u_to_w,
    w_to_u,
)

EOS = IdealEOS(5 / 3)


def _prim(rho, v1, p, ms=None, eos=EOS):
    ms = ms or flat_sample(1)
    return Primitives.build(np.array([rho]), np.array([[v1, 0.0, 0.0]]), np.array([p]), ms, eos), ms


def test_rest_state_forward_map():
    prim, ms = _prim(1.0, 0.0, 1.0)
    u = primitives_to_conserved(prim, ms)
    assert np.allclose(u[0], [1, 0, 0, 0, 2.5], rtol=1e-15, atol=0)


def test_moving_state_forward_map_and_back():
    prim, ms = _prim(1.0, 0.6, 1e-3)
    u = primitives_to_conserved(prim, ms)
    W = 1.25
    h = 1 + 2.5e-3
    assert u[0, 0] == pytest.approx(1.25, rel=1e-15)
    assert u[0, 1] == pytest.approx(h * W**2 * 0.6, rel=1e-15)
    assert u[0, 4] == pytest.approx(h * W**2 - 1e-3, rel=1e-15)
    back = conserved_to_primitives(u, ms, EOS)
    assert back.rho[0] == pytest.approx(1.0, rel=1e-12)
    assert back.v_dn[0, 0] == pytest.approx(0.6, abs=1e-12)
    assert back.p[0] == pytest.approx(1e-3, rel=1e-9)


def test_forward_map_rejects_inadmissible():
    prim, ms = _prim(1.0, 1.2, 1.0)
    with pytest.raises(DomainError):
        primitives_to_conserved(prim, ms)


@pytest.mark.parametrize(
    "u,expected",
    [((1, 0, 0, 0, 2.5), 1.5), ((1, 0, 0, 0, 1), 0.0), ((1, 3, 0, 0, 2), 2 - np.sqrt(10))],
)
def test_q_gamma_values(u, expected):
    assert q_gamma(np.array(u, float), np.eye(3)) == pytest.approx(expected, abs=1e-15)


def test_admissible_prims_give_positive_q(rng):
    ms = sample(random_metric(rng, 1000), 0.0, np.zeros((1000, 3)))
    prim = Primitives.build(*random_primitives(ms, rng), ms, EOS)
    assert np.all(q_gamma(primitives_to_conserved(prim, ms), ms.upsilon) > 0)


def test_rest_state_recovery():
    ms = flat_sample(1)
    prim = conserved_to_primitives(np.array([[1, 0, 0, 0, 2.5]]), ms, EOS)
    assert (prim.rho[0], prim.p[0]) == pytest.approx((1.0, 1.0), rel=1e-15)
    assert np.all(prim.v_dn == 0)


def test_tenuous_fast_roundtrip():
    prim, ms = _prim(1e-8, 0.99, 1e-8)
    back = conserved_to_primitives(primitives_to_conserved(prim, ms), ms, EOS)
    assert back.rho[0] == pytest.approx(1e-8, rel=1e-9)
    assert back.p[0] == pytest.approx(1e-8, rel=1e-9)
    assert back.v_dn[0, 0] == pytest.approx(0.99, abs=1e-9)


@pytest.mark.parametrize("u", [(1, 3, 0, 0, 2), (1, 0, 0, 0, 1), (-1, 0, 0, 0, 2), (0, 0, 0, 0, 1)])
def test_recovery_rejects_inadmissible(u):
    with pytest.raises(DomainError):
        conserved_to_primitives(np.array([u], float), flat_sample(1), EOS)


def test_rescaling_identities():
    u = np.array([[1.0, 0.2, -0.3, 0.1, 3.0]])
    flat = flat_sample(1)
    assert np.array_equal(u_to_w(u, flat), u)
    assert np.array_equal(w_to_u(u, flat), u)
    ms = sample(DiagonalStatic.constant(1.0, (1 / 4, 1 / 9, 1 / 16)), 0.0, np.zeros((1, 3)))
    w = u_to_w(u, ms)
    assert np.allclose(w, u * np.array([1, 2, 3, 4, 1]) / 24, rtol=1e-15)
    assert np.allclose(w_to_u(w, ms), u, rtol=1e-15)


def test_rescaled_map_preserves_admissibility_sign(rng):
    n = 10_000
    ms = sample(random_metric(rng, n), 0.0, np.zeros((n, 3)))
    u = np.column_stack([rng.normal(size=n), rng.normal(size=(n, 3)), rng.normal(size=n) * 3])
    w = u_to_w(u, ms)
    qg, qs = q_gamma(u, ms.upsilon), q_star(w)
    clear = np.abs(qg) > 1e-12 * np.abs(u).max(axis=1)
    assert np.array_equal(np.sign(qg[clear]), np.sign(qs[clear]))
    assert np.array_equal(np.sign(w[:, 0]), np.sign(u[:, 0]))
    assert np.array_equal(is_admissible_u(u, ms.upsilon)[clear], is_admissible_w(w)[clear])


def test_rescaled_roundtrip(rng):
    n = 10_000
    ms = sample(random_metric(rng, n), 0.0, np.zeros((n, 3)))
    u = rng.normal(size=(n, 5))
    back = w_to_u(u_to_w(u, ms), ms)
    assert np.max(np.abs(back - u) / np.abs(u).max(axis=1, keepdims=True)) < 1e-12


@pytest.mark.parametrize("w,expected", [((1, 0, 0, 0, 2.5), 1.5), ((0, 0, 0, 0, 0), 0.0)])
def test_q_star_values(w, expected):
    assert q_star(np.array(w, float)) == expected


def test_q_star_midpoint_concavity(rng):
    n = 100_000
    ms = flat_sample(n)
    w1 = u_to_w(primitives_to_conserved(Primitives.build(*random_primitives(ms, rng), ms, EOS), ms), ms)
    w2 = u_to_w(primitives_to_conserved(Primitives.build(*random_primitives(ms, rng), ms, EOS), ms), ms)
    qm = q_star(0.5 * (w1 + w2))
    assert np.all(qm >= np.minimum(q_star(w1), q_star(w2)) * (1 - 1e-12))


def test_G_eps_membership():
    assert is_in_G_eps(np.array([1, 0, 0, 0, 2.5]), 1e-12) is True
    assert is_in_G_eps(np.array([1e-13, 0, 0, 0, 1]), 1e-12) is False
    # q exactly eps: W4 = |W_0..3| + eps with exactly representable numbers
    assert is_in_G_eps(np.array([0.5, 0, 0, 0, 0.75]), 0.25) is True
    with pytest.raises(ValueError):
        is_in_G_eps(np.array([1, 0, 0, 0, 2.0]), 0.0)


def _mp_root(D, E, s, gamma):
    """Pressure of the double-rounded state in 60-digit arithmetic."""
    with mp.workdps(60):
        D, E, s, g = (mp.mpf(float(x)) for x in (D, E, s, gamma))

        def f(p):
            X = E + p
            r = mp.sqrt(1 - s / X**2)
            rho = D * r
            return D * (1 + g * p / ((g - 1) * rho)) * r - X * r**2

        lo, hi = mp.mpf(0), E
        while f(hi) <= 0:
            hi *= 2
        for _ in range(400):
            mid = (lo + hi) / 2
            if f(mid) > 0:
                hi = mid
            else:
                lo = mid
        return float((lo + hi) / 2)


@pytest.mark.parametrize("gamma", [4 / 3, 5 / 3, 2.0])
def test_recovery_matches_exact_root_of_rounded_state(gamma, rng):
    eos = IdealEOS(gamma)
    n = 60
    lorentz = 10 ** rng.uniform(0, 2, n)
    rho = 10 ** rng.uniform(-10, 2, n)
    p = 10 ** rng.uniform(-10, 2, n)
    v = np.sqrt(1 - 1 / lorentz**2)
    ms = flat_sample(n)
    prim = Primitives.build(rho, np.column_stack([v, 0 * v, 0 * v]), p, ms, eos)
    u = primitives_to_conserved(prim, ms)
    s = u[:, 1] ** 2
    got, _ = recover_pressure(u[:, 0], u[:, 4], s, eos)
    ref = np.array([_mp_root(u[i, 0], u[i, 4], s[i], gamma) for i in range(n)])
    # error bounded by the residual tolerance propagated through the slope
    X = u[:, 4] + ref
    slope = np.abs(dpsi_dp(ref, u[:, 0], u[:, 4], s, eos))
    bound = 4e-12 * X / slope + 1e-14 * ref
    assert np.all(np.abs(got - ref) <= bound)


@settings(max_examples=300, deadline=None)
@given(
    lrho=st.floats(-8, 2), lp=st.floats(-8, 2), v=st.floats(0, 0.999), gamma=st.sampled_from([4 / 3, 5 / 3, 2.0])
)
def test_recovery_residual_small(lrho, lp, v, gamma):
    eos = IdealEOS(gamma)
    prim, ms = _prim(10**lrho, v, 10**lp, eos=eos)
    u = primitives_to_conserved(prim, ms)
    back = conserved_to_primitives(u, ms, eos)
    assert back.admissible().all()
    assert recovery_residual(u, back, ms, eos)[0] <= 1e-12


def test_psi_sign_structure():
    # psi(0+) < 0 < psi(large) for an admissible state
    D, E, s = 1.0, 3.0, 2.0
    assert psi(1e-300, D, E, s, EOS) < 0
    assert psi(1e6, D, E, s, EOS) > 0
