import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from zapdisp import (JumpKernel, MicroGrid, MicroSolver, VelocityProfile, YPolynomial,
                     build_cross_section, cross_mean, exp_convolve, initial_condition, mass)
from zapdisp.errors import InvalidArgument, StabilityError, UnsupportedKernel
from zapdisp.micro import ConvState, MicroField, exp_weights

_GX, _GW = np.polynomial.legendre.leggauss(30)


def brute_convolve(u, v, L, boundary):
    """Direct O(nx^2) integration of the linear interpolant, cell by cell."""
    nx = u.shape[0]
    h = L / nx
    x = h * np.arange(nx)
    s = 0.5 * (_GX + 1.0)  # nodes on [0, 1]
    w = 0.5 * _GW
    ring = np.append(u, u[0]) if boundary == "periodic" else np.append(u, 0.0)
    k = np.arange(nx)
    ul = ring[k, None] * (1 - s) + ring[k + 1, None] * s  # (cell, node)
    xi = (k[:, None] + s) * h
    C = np.zeros(nx)
    for i in range(nx):
        if boundary == "periodic":
            # cell k sits upstream of x_i in its most recent image
            lag = x[i] - np.where(k[:, None] < i, xi, xi - L)
            images = int(np.ceil(40.0 * v / L)) + 1
            decay = sum(np.exp(-(lag + p * L) / v) for p in range(images))
        else:
            lag = x[i] - xi
            decay = np.where(k[:, None] < i, np.exp(-np.maximum(lag, 0) / v), 0.0)
        C[i] = h * np.sum(w * decay * ul)
    return C


@pytest.mark.parametrize("v", [1e-3, 0.05, 0.7, 3.0, 40.0])
def test_weights_match_quadrature(v):
    h = 0.39
    alpha, beta, gamma = exp_weights(h, np.array([v]))
    qb, _ = integrate.quad(lambda s: np.exp(-(h - s) / v) * (1 - s / h), 0, h, epsabs=1e-16, epsrel=1e-13)
    qg, _ = integrate.quad(lambda s: np.exp(-(h - s) / v) * (s / h), 0, h, epsabs=1e-16, epsrel=1e-13)
    assert 0 < alpha[0] < 1
    assert beta[0] == pytest.approx(qb, rel=1e-10, abs=1e-15)
    assert gamma[0] == pytest.approx(qg, rel=1e-10, abs=1e-15)


@settings(max_examples=200)
@given(st.floats(1e-4, 10.0), st.floats(1e-4, 1e3))
def test_weights_sum(h, v):
    alpha, beta, gamma = exp_weights(h, np.array([v]))
    assert abs(beta[0] + gamma[0] - v * (-np.expm1(-h / v))) <= 1e-13 * max(1.0, v)
    assert 0 < alpha[0] < 1 or h / v > 700


def test_weights_reject_nonpositive():
    with pytest.raises(InvalidArgument):
        exp_weights(0.1, np.array([0.0]))
    with pytest.raises(InvalidArgument):
        exp_convolve(np.ones(16), -1.0, MicroGrid(10.0, 16, build_cross_section(2)))


@pytest.mark.parametrize("v", [0.3, 1.0, 2.5])
def test_constant_field_is_steady(v):
    grid = MicroGrid(50.0, 200, build_cross_section(2))
    C = exp_convolve(np.full(200, 2.0), v, grid)
    np.testing.assert_allclose(C, 2.0 * v, rtol=1e-13)


@pytest.mark.parametrize("v", [0.2, 0.9, 3.0])
def test_spike_inflow_matches_brute_force(v):
    grid = MicroGrid(12.0, 48, build_cross_section(2), boundary="inflow-zero")
    u = np.zeros(48)
    u[10] = 1.0
    C = exp_convolve(u, v, grid)
    np.testing.assert_allclose(C, brute_convolve(u, v, grid.L, "inflow-zero"), rtol=0, atol=1e-10)
    assert not C[:10].any()
    # pure exponential decay one cell past the hat
    tail = C[12:]
    np.testing.assert_allclose(tail[1:] / tail[:-1], np.exp(-grid.h / v), rtol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([0.05, 0.4, 1.0, 4.0, 30.0]))
def test_random_periodic_fields_match_brute_force(seed, v):
    grid = MicroGrid(8.0, 32, build_cross_section(2))
    u = np.random.default_rng(seed).normal(size=32)
    C = exp_convolve(u, v, grid)
    ref = brute_convolve(u, v, grid.L, "periodic")
    assert np.max(np.abs(C - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_small_v_limit():
    grid = MicroGrid(20.0, 200, build_cross_section(2))
    u = np.sin(2 * np.pi * grid.x / grid.L) + 2
    v = 1e-3
    C = exp_convolve(u, v, grid)
    # (1/v) C -> u with error O(v/h)
    assert np.max(np.abs(C / v - u)) <= 5 * (v / grid.h) * np.max(np.abs(np.diff(u)))


def test_grid_validation():
    cs = build_cross_section(2)
    with pytest.raises(InvalidArgument):
        MicroGrid(10.0, 4, cs)
    with pytest.raises(InvalidArgument):
        MicroGrid(-1.0, 16, cs)
    with pytest.raises(InvalidArgument):
        MicroGrid(10.0, 16, cs, boundary="reflecting")


@pytest.fixture
def solver(small_grid, zappa):
    return MicroSolver(small_grid, zappa)


def test_uniform_field_is_steady(solver, small_grid):
    u0 = initial_condition("uniform", small_grid)
    np.testing.assert_allclose(solver.rhs(u0.values), 0.0, atol=1e-14)
    run = solver.run(u0, dt=0.1, t_end=5.0)
    np.testing.assert_allclose(run.snapshots[-1].values, u0.values, rtol=0, atol=1e-13)


def test_x_uniform_field_relaxes_exponentially(solver, small_grid):
    cs = small_grid.cs
    u0 = np.repeat((1 + cs.nodes)[None, :], small_grid.nx, axis=0)
    np.testing.assert_allclose(solver.jump_term(u0), 0.0, atol=1e-13)
    run = solver.run(MicroField(u0, 0.0), dt=0.05, output_times=[1.0, 3.0])
    for snap in run.snapshots:
        expected = 1 + cs.nodes * np.exp(-snap.t)
        np.testing.assert_allclose(snap.values, np.broadcast_to(expected, u0.shape), atol=1e-7)


def test_mixing_term_has_zero_mean(solver, small_grid, rng):
    u = rng.normal(size=small_grid.shape)
    np.testing.assert_allclose(cross_mean(solver.rhs(u), small_grid.cs),
                               cross_mean(solver.jump_term(u), small_grid.cs), atol=1e-14)


def test_mass_conserved_over_1000_steps(solver, small_grid):
    u = initial_condition("gaussian", small_grid, sigma=3.0).values
    m0 = mass(u, small_grid)
    for _ in range(1000):
        u = solver.step(u, 0.05)
    assert abs(mass(u, small_grid) - m0) <= 1e-10 * m0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-2, 2), st.floats(-2, 2))
def test_linearity(seed, a, b):
    grid = MicroGrid(20.0, 64, build_cross_section(4))
    s = MicroSolver(grid, JumpKernel.exponential(VelocityProfile.parabolic()))
    r = np.random.default_rng(seed)
    u1, u2 = r.normal(size=grid.shape), r.normal(size=grid.shape)
    run = lambda u: s.run(MicroField(u, 0.0), dt=0.1, t_end=1.0).snapshots[-1].values
    np.testing.assert_allclose(run(a * u1 + b * u2), a * run(u1) + b * run(u2), rtol=0, atol=1e-11)


def test_translation_equivariance(solver, small_grid, rng):
    u = rng.random(small_grid.shape)
    a = solver.run(MicroField(u, 0.0), dt=0.1, t_end=2.0).snapshots[-1].values
    b = solver.run(MicroField(np.roll(u, 7, axis=0), 0.0), dt=0.1, t_end=2.0).snapshots[-1].values
    np.testing.assert_allclose(np.roll(a, 7, axis=0), b, rtol=0, atol=1e-13)


def test_general_kernel_matches_fast_path():
    cs = build_cross_section(4)
    p = VelocityProfile.parabolic()
    vals = p(cs.nodes)

    def density(s, y):
        v = float(p(y))
        return np.where(s >= 0, np.exp(-np.maximum(s, 0) / v) / v, 0.0)

    gen = JumpKernel.general({1: p.poly, 2: 2 * p.poly ** 2}, density=density, profile=p)
    for boundary in ("periodic", "inflow-zero"):
        grid = MicroGrid(20.0, 64, cs, boundary=boundary)
        u = initial_condition("gaussian", grid, sigma=2.0, y_shape=1 + cs.nodes ** 2).values
        fast = MicroSolver(grid, JumpKernel.exponential(p)).jump_term(u)
        slow = MicroSolver(grid, gen).jump_term(u)
        np.testing.assert_allclose(slow, fast, rtol=0, atol=1e-9)
    assert vals.min() > 0


def test_general_kernel_without_density():
    grid = MicroGrid(20.0, 64, build_cross_section(4))
    with pytest.raises(UnsupportedKernel):
        MicroSolver(grid, JumpKernel.general({1: YPolynomial([1])}))


def test_threads_bitwise_identical(small_grid, zappa):
    u = initial_condition("gaussian", small_grid, sigma=3.0).values
    a = MicroSolver(small_grid, zappa, threads=1).run(MicroField(u, 0), dt=0.05, t_end=2.0)
    b = MicroSolver(small_grid, zappa, threads=4).run(MicroField(u, 0), dt=0.05, t_end=2.0)
    assert a.snapshots[-1].values.tobytes() == b.snapshots[-1].values.tobytes()


def test_dt_guard(solver, small_grid):
    u = initial_condition("uniform", small_grid)
    for dt in (0.0, -0.01, 0.2):
        with pytest.raises(StabilityError):
            solver.run(u, dt=dt, t_end=1.0)


def test_output_times_hit_exactly(solver, small_grid):
    run = solver.run(initial_condition("uniform", small_grid), dt=0.07, output_times=[0.0, 0.3, 1.0])
    assert run.times == [0.0, 0.3, 1.0]
    assert run.at(0.3).t == 0.3


@pytest.mark.parametrize("kind,kw", [("gaussian", {"sigma": 2.5}), ("step", {"x0": 10.0}),
                                     ("point", {"x0": 7.0}), ("uniform", {})])
def test_initial_conditions_have_unit_mass(small_grid, kind, kw):
    u = initial_condition(kind, small_grid, **kw)
    assert mass(u, small_grid) == pytest.approx(1.0, abs=1e-12)
    assert u.t == 0.0


def test_point_and_step_shapes(small_grid):
    p = initial_condition("point", small_grid, x0=7.0).values
    assert np.count_nonzero(p.any(axis=1)) == 1
    s = initial_condition("step", small_grid, x0=10.0).values
    assert s[0, 0] > 0 and s[-1, 0] == 0


def test_initial_condition_errors(small_grid):
    with pytest.raises(InvalidArgument):
        initial_condition("gaussian", small_grid, sigma=0.0)
    with pytest.raises(InvalidArgument):
        initial_condition("sawtooth", small_grid)
    with pytest.raises(InvalidArgument):
        initial_condition("table", small_grid, table=np.ones(3))


def test_inflow_edge_warning(zappa):
    cs = build_cross_section(4)
    grid = MicroGrid(40.0, 128, cs, boundary="inflow-zero")
    s = MicroSolver(grid, zappa)
    near = s.run(initial_condition("gaussian", grid, x0=38.0, sigma=1.0), dt=0.1, t_end=0.5)
    assert near.warnings
    far = s.run(initial_condition("gaussian", grid, x0=15.0, sigma=1.0), dt=0.1, t_end=0.5)
    assert not far.warnings
