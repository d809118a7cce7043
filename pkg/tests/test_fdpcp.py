"""Finite-difference scheme: WENO fluxes, correction vectors and the theta-box limiter."""

import numpy as np
import pytest

from conftest import flat_sample
from pcpgrhd.eos import IdealEOS
from pcpgrhd.fdpcp import (
    VERTEX_BITS,
    FDScheme,
    cell_thetas,
    combine_face_thetas,
    correction_vectors,
    lambda0_box,
    lxf_point_flux,
    shrink_box,
    w_of_theta,
    weno5,
    weno_split_flux,
)
from pcpgrhd.grid import CuboidGrid
from pcpgrhd.problems import primitives_to_w, random_admissible, riemann_1d
from pcpgrhd.spacetime import DiagonalStatic
from pcpgrhd.states import is_admissible_w, q_star

EOS = IdealEOS(5 / 3)
EPS = 1e-12


def _line(n, boundary="periodic"):
    return CuboidGrid((n, 1, 1), boundary=(boundary, "periodic", "periodic"))


def test_weno_consistency_on_constants():
    grid = _line(8)
    W = np.broadcast_to(np.array([1.0, 0.2, 0, 0, 3.0]), grid.shape + (5,)).copy()
    H = 0.7 * W
    high = weno_split_flux(H, W, 1.3, grid, 0)
    assert np.allclose(high, H[0, 0, 0], rtol=1e-14)
    assert np.allclose(lxf_point_flux(H, W, 1.3, grid, 0), H[0, 0, 0], rtol=1e-14)


def test_weno_divergence_fifth_order():
    errs = []
    for n in (32, 64, 128):
        grid = _line(n)
        x = (np.arange(n) + 0.5) / n
        H = np.repeat(np.sin(2 * np.pi * x)[:, None, None, None], 5, axis=-1)
        F = weno_split_flux(H, np.zeros_like(H), 0.0, grid, 0)
        div = (F[1:] - F[:-1]) * n
        exact = 2 * np.pi * np.cos(2 * np.pi * x)
        errs.append(np.abs(div[:, 0, 0, 0] - exact).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 4.5)


def test_weno_no_overshoot_at_step():
    v = np.where(np.arange(12) < 6, 1.0, 0.0)
    vals = weno5(*(v[k : k + 8] for k in range(5)))
    assert vals.min() >= -1e-3 and vals.max() <= 1 + 1e-3


def test_correction_vectors_zero_when_fluxes_agree(rng):
    grid = _line(6)
    F = {0: rng.normal(size=(7, 1, 1, 5))}
    assert np.all(correction_vectors(F, F, 0.1, grid) == 0)


def test_correction_vector_sign_bookkeeping():
    n, dt = 6, 0.05
    grid = _line(n)
    low = {0: np.zeros((n + 1, 1, 1, 5))}
    high = {0: np.zeros((n + 1, 1, 1, 5))}
    d = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    i = 2
    high[0][i + 1, 0, 0] = d  # face between points i and i+1
    C = correction_vectors(high, low, dt, grid)
    assert np.allclose(C[i, 0, 0, 1], -dt * n * d)
    assert np.allclose(C[i + 1, 0, 0, 0], dt * n * d)
    assert np.count_nonzero(C) == 10


def test_full_theta_reproduces_high_order_update(rng):
    n, dt = 8, 0.01
    grid = _line(n)
    high = {0: rng.normal(size=(n + 1, 1, 1, 5))}
    low = {0: rng.normal(size=(n + 1, 1, 1, 5))}
    w = rng.normal(size=(n, 1, 1, 5))
    w_low = w - dt * n * (low[0][1:] - low[0][:-1])
    w_high = w - dt * n * (high[0][1:] - high[0][:-1])
    C = correction_vectors(high, low, dt, grid)
    assert np.allclose(w_of_theta(w_low, C, np.ones((n, 1, 1, 6))), w_high, rtol=1e-13, atol=1e-13)


def test_lambda0_examples():
    w0 = np.array([1.0, 0, 0, 0, 2.0])
    C = np.zeros((6, 5))
    assert np.all(lambda0_box(w0, C, EPS) == 1)
    C[0, 0] = -0.5
    assert np.all(lambda0_box(w0, C, EPS, 1e-12) == 1)
    w0 = np.array([0.3, 0, 0, 0, 1.0])
    C[1, 0] = -0.5
    box = lambda0_box(w0, C, EPS, 1e-12)
    expect = (0.3 - 1e-12) / (1e-12 + 1.0)
    assert box[0] == pytest.approx(expect, rel=1e-15) and box[1] == pytest.approx(expect, rel=1e-15)
    assert np.all(box[2:] == 1)


def test_lambda0_box_vertices_keep_density(rng):
    n = 2000
    w0 = np.column_stack([10 ** rng.uniform(-10, 0, n), np.zeros((n, 3)), np.ones(n)])
    C = rng.normal(size=(n, 6, 5))
    box = lambda0_box(w0, C, EPS)
    verts = VERTEX_BITS[None] * box[:, None, :]
    dens = w0[:, None, 0] + np.einsum("nvl,nl->nv", verts, C[..., 0])
    assert np.all(dens >= EPS * (1 - 1e-12))


def test_shrink_box_unchanged_when_feasible():
    w0 = np.array([1.0, 0, 0, 0, 3.0])
    lam0 = np.full(6, 0.8)
    assert np.array_equal(shrink_box(w0, np.zeros((6, 5)), lam0, EPS), lam0)
    C = np.zeros((6, 5))
    C[2, 4] = 0.1
    assert np.array_equal(shrink_box(w0, C, lam0, EPS), lam0)


def test_shrink_box_linear_closed_form():
    w0 = np.array([1.0, 0, 0, 0, 2.5])
    C = np.zeros((6, 5))
    C[0, 4] = -3.0
    lam = shrink_box(w0, C, np.ones(6), EPS)
    # failing vertices are scaled as a whole, so every coordinate they switch on shrinks too
    assert np.allclose(lam, (1.5 - EPS) / 3, rtol=0, atol=1e-10)


def test_shrink_box_vertices_feasible(rng):
    n = 1000
    w0 = rng.normal(size=(n, 5))
    w0[:, 0] = 10 ** rng.uniform(-6, 0, n)
    w0[:, 4] = np.linalg.norm(w0[:, :4], axis=1) + 10 ** rng.uniform(-6, 0, n)
    C = rng.normal(size=(n, 6, 5)) * 0.3
    lam = shrink_box(w0, C, lambda0_box(w0, C, EPS), EPS)
    wv = w0[:, None] + np.einsum("nvl,nlc->nvc", VERTEX_BITS[None] * lam[:, None], C)
    assert np.all(wv[..., 0] >= EPS * (1 - 1e-12))
    assert np.all(q_star(wv) >= EPS - 1e-14)


def test_feasible_theta_set_is_convex(rng):
    w0 = np.array([0.2, 0.1, -0.05, 0.0, 0.3])
    C = rng.normal(size=(6, 5)) * 0.2
    th = rng.uniform(size=(20000, 6))
    W = w0 + th @ C
    inside = (W[:, 0] >= EPS) & (q_star(W) >= EPS)
    A, B = th[inside][:500], th[inside][500:1000]
    lam = rng.uniform(size=(len(A), 1))
    blend = w0 + (lam * A + (1 - lam) * B) @ C
    assert np.all((blend[:, 0] >= EPS) & (q_star(blend) >= EPS))


def test_face_theta_takes_the_smaller_box():
    grid = _line(4)
    Lam = np.ones((4, 1, 1, 6))
    Lam[1, 0, 0, 1] = 0.4   # right face of point 1
    Lam[2, 0, 0, 0] = 0.7   # left face of point 2
    th = combine_face_thetas(Lam, grid)[0]
    assert th[2, 0, 0] == 0.4
    assert np.all(np.delete(th[:, 0, 0], 2) == 1)
    Lam[2, 0, 0, 0] = 0.1
    assert combine_face_thetas(Lam, grid)[0][2, 0, 0] == 0.1
    assert np.all(combine_face_thetas(np.ones((4, 1, 1, 6)), grid)[0] == 1)


def test_cell_thetas_inside_boxes(rng):
    grid = CuboidGrid((5, 4, 1), boundary=("outflow", "periodic", "periodic"))
    Lam = rng.uniform(size=grid.shape + (6,))
    Lam[..., 4:] = 1.0
    theta = cell_thetas(combine_face_thetas(Lam, grid), grid)
    assert np.all(theta <= Lam)


def _riemann(n=100):
    grid = _line(n, "outflow")
    ms = flat_sample(grid.shape)
    w = riemann_1d(grid.centers(), ms, EOS, left=(1.0, 0.0, 1e3), right=(1.0, 0.0, 1e-8))
    return grid, w


def test_constant_field_fixed_point():
    grid = CuboidGrid((8, 6, 1))
    ms = flat_sample(grid.shape)
    w = primitives_to_w(np.full(grid.shape, 0.6), np.broadcast_to([0.2, 0.3, 0.0], grid.shape + (3,)),
                        np.full(grid.shape, 0.9), ms, EOS)
    scheme = FDScheme(grid, eos=EOS)
    out, info = scheme.step(w, 0.0, scheme.max_dt(w))
    assert np.allclose(out, w, rtol=1e-14, atol=1e-15)
    assert info.min_theta == 1.0


def test_riemann_step_stays_in_G_eps():
    grid, w = _riemann()
    scheme = FDScheme(grid, eos=EOS)
    t, limited = 0.0, 0
    for _ in range(20):
        dt = 0.5 * scheme.max_dt(w, t)
        w, info = scheme.step(w, t, dt)
        t += dt
        limited += info.limited_faces
        assert np.all(w[..., 0] >= info.eps) and np.all(q_star(w) >= info.eps)
    assert limited > 0


def test_predictor_admissible_on_random_fields():
    provider = DiagonalStatic(lambda x: 1 + 0.2 * np.sin(2 * np.pi * x[..., 0]),
                              lambda x: np.stack([1 + 0.1 * np.cos(2 * np.pi * x[..., 1]) ** 2] * 3, axis=-1))
    grid = CuboidGrid((8, 8, 1))
    for trial in range(50):
        rng = np.random.default_rng(trial)
        scheme = FDScheme(grid, provider, EOS)
        ms = scheme.metric(0.0)
        w = random_admissible(grid.centers(), ms, EOS, rng, near_boundary_fraction=0.2)
        dt = 0.9 * scheme.max_dt(w)
        a = scheme.slack * scheme.speeds(w, 0.0)
        out, _, eps = scheme.euler_stage(w, 0.0, dt, a)
        assert is_admissible_w(scheme.last_stage["w0"]).all()
        assert np.all(out[..., 0] >= eps) and np.all(q_star(out) >= eps)


def test_conservation_periodic(rng):
    grid = CuboidGrid((16, 12, 1))
    ms = flat_sample(grid.shape)
    w = random_admissible(grid.centers(), ms, EOS, rng)
    scheme = FDScheme(grid, eos=EOS)
    out, _ = scheme.step(w, 0.0, 0.9 * scheme.max_dt(w))
    drift = np.abs(out.sum(axis=(0, 1, 2)) - w.sum(axis=(0, 1, 2)))
    assert np.all(drift <= 1e-12 * np.maximum(1.0, np.abs(w).sum(axis=(0, 1, 2))))
