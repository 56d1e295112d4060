import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capelast import GridError, make_grid


@pytest.fixture(scope="module")
def g889():
    return make_grid(8, 8, 9, 1.0)


def test_vertical_nodes_affine_chebyshev(g889):
    k = np.arange(9)
    expected = (np.cos(k * np.pi / 8) - 1.0) / 2.0
    assert np.allclose(g889.x3, expected, atol=1e-15)
    assert g889.x3[0] == 0.0
    assert g889.x3[-1] == -1.0
    assert np.all(np.diff(g889.x3) < 0)


def test_volume_weights_sum(g889):
    total = g889.quad_volume(np.ones((8, 8, 9)))
    assert abs(total - 4 * np.pi**2) <= 1e-12 * 4 * np.pi**2


def test_quad_volume_depth_scaling():
    g = make_grid(8, 8, 11, 2.5)
    total = g.quad_volume(np.ones((8, 8, 11)))
    assert abs(total - 4 * np.pi**2 * 2.5) <= 1e-12 * total


@pytest.mark.parametrize("bad", [(7, 8, 9, 1.0), (8, 7, 9, 1.0), (2, 8, 9, 1.0),
                                 (8, 8, 4, 1.0), (8, 8, 9, 0.0), (8, 8, 9, -1.0)])
def test_make_grid_rejects(bad):
    with pytest.raises(GridError):
        make_grid(*bad)


def test_d_tan_exact_on_trig(g889):
    X1, X2, _ = g889.mesh_volume()
    f = np.cos(X1)
    err = np.abs(g889.d_tan(f, 1) + np.sin(X1)).max()
    assert err <= 1e-12


def test_d_tan_constant(g889):
    f = np.full((8, 8, 9), 3.7)
    assert np.abs(g889.d_tan(f, 1)).max() <= 1e-14
    assert np.abs(g889.d_tan(f, 2)).max() <= 1e-14


def test_d_tan_axis_validation(g889):
    with pytest.raises(GridError):
        g889.d_tan(np.zeros((8, 8, 9)), 3)
    with pytest.raises(GridError):
        g889.d_tan(np.zeros((6, 8, 9)), 1)


def test_d_tan_vs_finite_difference_oracle():
    # centered differences on the uniform tangential grid, O(h^2) agreement
    def residual(n):
        g = make_grid(n, n, 7, 1.0)
        X1, X2, _ = g.mesh_volume()
        f = np.cos(2 * X1) * np.sin(X2)
        h = 2 * np.pi / n
        fd = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2 * h)
        return np.abs(g.d_tan(f, 2) - fd).max()

    r16, r32 = residual(16), residual(32)
    assert r16 <= 0.5 * (2 * np.pi / 16) ** 2 * 10
    assert r16 / r32 > 3.0  # second-order decay of the oracle error


def test_d_vert_linear_and_quadratic(g889):
    _, _, X3 = g889.mesh_volume()
    assert np.abs(g889.d_vert(X3) - 1.0).max() <= 1e-13
    assert np.abs(g889.d_vert(X3**2) - 2 * X3).max() <= 1e-12


def test_d_vert_vs_finite_difference_oracle():
    g = make_grid(8, 8, 17, 1.0)
    _, _, X3 = g.mesh_volume()
    f = np.exp(X3)
    h = 1e-5
    oracle = (np.exp(X3 + h) - np.exp(X3 - h)) / (2 * h)
    err = np.abs(g.d_vert(f) - oracle).max()
    assert err <= 5 * h**2  # FD oracle error dominates the spectral error


def test_quad_examples(g889):
    X1, _, _ = g889.mesh_volume()
    assert abs(g889.quad_volume(np.cos(X1))) <= 1e-12
    x1s, _ = g889.mesh_surface()
    assert abs(g889.quad_surface(np.cos(x1s) ** 2) - 2 * np.pi**2) <= 1e-12


def test_sobolev_norm_examples(g889):
    x1s, _ = g889.mesh_surface()
    f = np.cos(x1s)
    assert abs(g889.sobolev_norm(f, 0) - np.pi * np.sqrt(2)) <= 1e-12
    assert g889.sobolev_norm(np.zeros((8, 8, 9)), 4) == 0.0


def test_sobolev_norm_s1_against_direct_sum():
    g = make_grid(16, 16, 9, 1.0)
    X1, _, _ = g.mesh_volume()
    f = np.cos(X1)
    direct = np.sqrt(g.norm0(f) ** 2 + g.norm0(g.d_tan(f, 1)) ** 2
                     + g.norm0(g.d_tan(f, 2)) ** 2 + g.norm0(g.d_vert(f)) ** 2)
    assert abs(g.sobolev_norm(f, 1) - direct) <= 1e-12 * direct


def test_sobolev_norm_rejects_bad_order(g889):
    with pytest.raises(GridError):
        g889.sobolev_norm(np.zeros((8, 8, 9)), 5)


def _random_trig(grid, seed, kmax):
    rng = np.random.default_rng(seed)
    X1, X2, X3 = grid.mesh_volume()
    f = np.zeros_like(X1)
    for _ in range(4):
        k1 = rng.integers(-kmax, kmax + 1)
        k2 = rng.integers(-kmax, kmax + 1)
        f += rng.normal() * np.cos(k1 * X1 + k2 * X2 + rng.uniform(0, 2 * np.pi))
    return f * (1.0 + 0.5 * X3)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_spectral_exactness_on_resolved_trig(seed):
    # exact derivative for any trig polynomial of degree < nx/2
    grid = make_grid(16, 16, 7, 1.0)
    rng = np.random.default_rng(seed)
    X1, X2, _ = grid.mesh_volume()
    k1 = int(rng.integers(-7, 8))
    k2 = int(rng.integers(-7, 8))
    ph = rng.uniform(0, 2 * np.pi)
    f = np.cos(k1 * X1 + k2 * X2 + ph)
    exact = -k1 * np.sin(k1 * X1 + k2 * X2 + ph)
    scale = max(1.0, np.abs(exact).max())
    assert np.abs(grid.d_tan(f, 1) - exact).max() <= 1e-12 * scale


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_adjointness_of_tangential_derivative(seed):
    grid = make_grid(16, 16, 9, 1.0)
    f = _random_trig(grid, seed, 5)
    h = _random_trig(grid, seed + 1, 5)
    lhs = grid.quad_volume(f * grid.d_tan(h, 1))
    rhs = -grid.quad_volume(h * grid.d_tan(f, 1))
    scale = 1.0 + abs(lhs) + abs(rhs)
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_dealias_product_removes_aliased_modes():
    g = make_grid(12, 12, 7, 1.0, dealias=True)
    X1, _, _ = g.mesh_volume()
    # k=5 sits above the retained band n/3 = 4: its square would alias onto k=2
    f = np.cos(5 * X1)
    p = g.product(f, f)
    assert np.abs(p).max() <= 1e-12
    # in-band factor: product keeps the mean, drops the out-of-band harmonic
    f3 = np.cos(3 * X1)
    p3 = g.product(f3, f3)
    ph = np.fft.rfft(p3, axis=0)
    assert np.abs(ph[6]).max() <= 1e-10
    assert abs(ph[0, 0, 0].real / 12 - 0.5) <= 1e-12
    g2 = make_grid(12, 12, 7, 1.0, dealias=False)
    assert np.abs(g2.product(f, f) - f * f).max() == 0.0
