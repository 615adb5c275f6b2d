import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daeqoi.core import QoISpec, TimeGrid, Trajectory, check_consistency
from daeqoi.exceptions import DimensionMismatchError, InvalidGridError, OutOfDomainError
from daeqoi.problems import build_problem


def make_traj(nodes_y, nodes_z=None, t_end=1.0):
    Y = np.asarray(nodes_y, dtype=float)
    Z = Y.copy() if nodes_z is None else np.asarray(nodes_z, dtype=float)
    grid = TimeGrid(0.0, t_end, Y.shape[0] - 1)
    return Trajectory(grid, Y, Z)


class TestTimeGrid:
    def test_nodes_uniform_and_exact_endpoints(self):
        grid = TimeGrid(0.0, 1.0, 10)
        assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 1.0
        np.testing.assert_allclose(np.diff(grid.nodes), grid.dt, rtol=1e-14)

    def test_refined(self):
        grid = TimeGrid(0.0, 2.0, 5).refined(4)
        assert grid.n_steps == 20 and grid.t_end == 2.0

    def test_validation(self):
        with pytest.raises(InvalidGridError):
            TimeGrid(0.0, 0.0, 10)
        with pytest.raises(InvalidGridError):
            TimeGrid(0.0, 1.0, 0)


class TestInterpolation:
    def test_midpoint_of_line(self):
        traj = make_traj([[0.0], [2.0]])
        y, _ = traj.interpolate(0.5)
        assert y[0] == 1.0

    def test_nodes_bit_exact(self):
        rng = np.random.default_rng(3)
        traj = make_traj(rng.standard_normal((11, 2)), rng.standard_normal((11, 1)))
        for k, t in enumerate(traj.grid.nodes):
            y, z = traj.interpolate(t)
            assert np.array_equal(y, traj.Y[k]) and np.array_equal(z, traj.Z[k])

    def test_interior_weights(self):
        rng = np.random.default_rng(4)
        traj = make_traj(rng.standard_normal((6, 3)))
        t = traj.grid.nodes[2] + 0.3 * traj.grid.dt
        y, _ = traj.interpolate(t)
        expected = 0.7 * traj.Y[2] + 0.3 * traj.Y[3]
        np.testing.assert_allclose(y, expected, rtol=1e-15)

    def test_out_of_domain(self):
        traj = make_traj([[0.0], [1.0]])
        with pytest.raises(OutOfDomainError):
            traj.interpolate(1.5)
        with pytest.raises(OutOfDomainError):
            traj.interpolate(-0.1)
        traj.interpolate(1.0 + 1e-13)  # inside the slack

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0), st.integers(0, 2**31 - 1))
    def test_affine_between_nodes(self, alpha, seed):
        rng = np.random.default_rng(seed)
        traj = make_traj(rng.standard_normal((5, 2)))
        k = int(rng.integers(0, 4))
        t0, t1 = traj.grid.nodes[k], traj.grid.nodes[k + 1]
        tm = t0 + alpha * (t1 - t0)
        ya, _ = traj.interpolate(t0)
        yb, _ = traj.interpolate(min(tm, t1))
        yc, _ = traj.interpolate(t1)
        np.testing.assert_allclose(yb, (1 - alpha) * ya + alpha * yc, atol=1e-12)

    def test_values_at_matches_pointwise(self):
        rng = np.random.default_rng(5)
        traj = make_traj(rng.standard_normal((8, 2)), rng.standard_normal((8, 2)))
        times = rng.uniform(0.0, 1.0, size=40)
        Y, Z = traj.values_at(times)
        for i, t in enumerate(times):
            y, z = traj.interpolate(t)
            np.testing.assert_allclose(Y[i], y, rtol=1e-15)
            np.testing.assert_allclose(Z[i], z, rtol=1e-15)


class TestPiecewiseDerivative:
    def test_single_interval_slope(self):
        traj = make_traj([[0.0], [2.0]])
        ydot, _ = traj.derivative(0.25)
        assert ydot[0] == 2.0

    def test_constant_trajectory(self):
        traj = make_traj([[1.0], [1.0], [1.0]])
        ydot, zdot = traj.derivative(0.7)
        assert ydot[0] == 0.0 and zdot[0] == 0.0

    def test_left_slope_at_interior_nodes(self):
        traj = make_traj([[0.0], [1.0], [3.0]])
        ydot, _ = traj.derivative(0.5)  # node between intervals
        assert ydot[0] == pytest.approx(2.0)  # left interval slope: (1-0)/0.5
        ydot0, _ = traj.derivative(0.0)
        assert ydot0[0] == pytest.approx(2.0)  # right slope at t0

    def test_matches_difference_quotient(self):
        from daeqoi.forward import bdf1_solve

        problem = build_problem("robertson")
        traj = bdf1_solve(problem, TimeGrid(0.0, 0.01, 10))
        ydot, _ = traj.derivative(0.0004)
        np.testing.assert_allclose(ydot, (traj.Y[1] - traj.Y[0]) / traj.grid.dt,
                                   rtol=1e-15)


class TestQoISpec:
    def test_constant_density_broadcast(self):
        qoi = QoISpec.cumulative([1.0, 2.0], [0.5])
        values = qoi.psi_y_at(np.zeros((3, 5)))
        assert values.shape == (3, 5, 2)
        assert np.all(values[..., 1] == 2.0)

    def test_callable_density(self):
        qoi = QoISpec.cumulative(lambda t: np.array([t, 1.0]), [0.0])
        np.testing.assert_allclose(qoi.psi_y_at(2.0), [2.0, 1.0])

    def test_exactly_one_kind(self):
        with pytest.raises(DimensionMismatchError):
            QoISpec.cumulative(None, [1.0])
        with pytest.raises(DimensionMismatchError):
            QoISpec("weird")
        qoi = QoISpec.terminal([1.0], [0.0])
        assert qoi.kind == QoISpec.TERMINAL


class TestConsistency:
    def test_all_builtin_problems_pass(self):
        for name in ("robertson", "pendulum1", "pendulum2", "petzold2", "ennpe"):
            kwargs = {"ns": 12} if name == "ennpe" else {}
            report = check_consistency(build_problem(name, **kwargs))
            assert report.passed, f"{name}: {report}"
            assert report.index_condition_ok

    def test_pendulum_multiplier_initialization(self):
        problem = build_problem("pendulum2")
        assert problem.z0[0] == pytest.approx((1.0 + 9.81) / 2.0)

    def test_inconsistent_data_reported_not_raised(self):
        from daeqoi.core import DAEProblem, INDEX_1

        base = build_problem("robertson")
        bad = DAEProblem(name="robertson-bad", n=2, m=1, index=INDEX_1,
                         f=base.f, g=base.g, g_y=base.g_y, g_z=base.g_z,
                         y0=base.y0, z0=np.array([0.5]))
        report = check_consistency(bad)
        assert not report.passed
        assert report.constraint_residual == pytest.approx(0.5)
