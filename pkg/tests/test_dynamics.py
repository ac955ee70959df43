"""System definitions, reference integration, and snapshot generation."""
import numpy as np
import numpy.testing as npt
import pytest

from koprop import (
    BasisSet,
    BoxDomain,
    DuffingParams,
    SnapshotSet,
    duffing_energy,
    duffing_rhs,
    duffing_system,
    generate_snapshots,
    harmonic_oscillator,
    integrate,
    integrate_batch,
    jacobian_trace,
    trajectory,
)


class TestDuffingRhs:
    def test_equilibrium(self):
        npt.assert_array_equal(duffing_rhs(np.zeros(2)), np.zeros(2))

    def test_unit_displacement(self):
        npt.assert_allclose(duffing_rhs(np.array([1.0, 0.0])), [0.0, -1.01], rtol=1e-15)

    def test_experiment_mean_point(self):
        # -kappa*x1 - kappa*a^2*eps*x1^3 = -0.4 - 0.01 * 0.4^3 = -0.40064
        out = duffing_rhs(np.array([0.4, 0.6]))
        npt.assert_allclose(out, [0.6, -0.40064], rtol=1e-14)

    def test_vectorized_batch(self):
        pts = np.random.default_rng(0).uniform(-1, 1, size=(40, 2))
        batch = duffing_rhs(pts)
        rows = np.array([duffing_rhs(p) for p in pts])
        npt.assert_allclose(batch, rows, rtol=1e-15)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            DuffingParams(mass=0.0)
        with pytest.raises(ValueError):
            DuffingParams(nonlinearity=-0.1)


class TestIntegrate:
    def test_zero_span_returns_initial_state(self):
        sys_ = duffing_system()
        x0 = np.array([0.3, -0.2])
        npt.assert_array_equal(integrate(sys_, x0, 1.0, 1.0), x0)

    def test_harmonic_period(self):
        sys_ = harmonic_oscillator()
        out = integrate(sys_, np.array([1.0, 0.0]), 0.0, 2.0 * np.pi)
        npt.assert_allclose(out, [1.0, 0.0], atol=1e-8)

    def test_forward_backward_round_trip(self):
        sys_ = duffing_system()
        x0 = np.array([0.4, 0.6])
        for tf in (10.0, 250.0):
            mid = integrate(sys_, x0, 0.0, tf)
            back = integrate(sys_, mid, tf, 0.0)
            npt.assert_allclose(back, x0, atol=1e-8)

    def test_energy_conservation_500s(self):
        sys_ = duffing_system()
        x0 = np.array([0.4, 0.6])
        e0 = duffing_energy(x0)
        ef = duffing_energy(integrate(sys_, x0, 0.0, 500.0))
        assert abs(ef - e0) / e0 < 1e-8

    def test_trajectory_sampling(self):
        sys_ = harmonic_oscillator()
        times = np.array([0.0, np.pi / 2, np.pi])
        traj = trajectory(sys_, np.array([1.0, 0.0]), times)
        npt.assert_allclose(traj[1], [0.0, -1.0], atol=1e-9)
        npt.assert_allclose(traj[2], [-1.0, 0.0], atol=1e-9)


class TestHamiltonianStructure:
    def test_jacobian_trace_vanishes(self):
        sys_ = duffing_system()
        pts = np.random.default_rng(3).uniform(-1.5, 1.5, size=(100, 2))
        assert np.abs(jacobian_trace(sys_, pts)).max() < 1e-8


class TestIntegrateBatch:
    def test_matches_reference(self):
        sys_ = duffing_system()
        pts = np.random.default_rng(5).uniform(-1.2, 1.2, size=(20, 2))
        bulk = integrate_batch(sys_, pts, 0.0, 2.5, max_step=0.005)
        ref = np.array([integrate(sys_, p, 0.0, 2.5) for p in pts])
        assert np.linalg.norm(bulk - ref, axis=1).max() < 1e-10

    def test_long_horizon_audit(self):
        # the Monte Carlo step size must stay KDE-invisible over 500 s
        sys_ = duffing_system()
        pts = np.random.default_rng(6).normal([0.4, 0.6], 0.1, size=(10, 2))
        bulk = integrate_batch(sys_, pts, 0.0, 500.0, max_step=0.05)
        ref = np.array([integrate(sys_, p, 0.0, 500.0) for p in pts])
        assert np.linalg.norm(bulk - ref, axis=1).max() < 1e-4

    def test_zero_span(self):
        sys_ = duffing_system()
        pts = np.ones((3, 2))
        npt.assert_array_equal(integrate_batch(sys_, pts, 1.0, 1.0), pts)


class TestSnapshots:
    def test_zero_count_refused(self):
        sys_ = duffing_system()
        box = BoxDomain([-1.0, -1.0], [1.0, 1.0])
        with pytest.raises(ValueError):
            generate_snapshots(sys_, box, 0, 0.1, seed=1)

    def test_count_below_basis_size_refused(self):
        sys_ = duffing_system()
        box = BoxDomain([-1.0, -1.0], [1.0, 1.0])
        basis = BasisSet.create(box, 3)
        with pytest.raises(ValueError, match="basis size"):
            generate_snapshots(sys_, box, basis.size - 1, 0.1, seed=1, basis=basis)

    def test_seeded_determinism(self):
        sys_ = duffing_system()
        box = BoxDomain([-1.0, -1.0], [1.0, 1.0])
        a = generate_snapshots(sys_, box, 200, 0.1, seed=42)
        b = generate_snapshots(sys_, box, 200, 0.1, seed=42)
        npt.assert_array_equal(a.x, b.x)
        npt.assert_array_equal(a.y, b.y)

    def test_pairs_satisfy_reference_flow(self):
        # 100-pair audit subset against the adaptive reference integrator
        sys_ = duffing_system()
        box = BoxDomain([-1.22, -1.22], [1.22, 1.22])
        snaps = generate_snapshots(sys_, box, 10_000, 0.1, seed=11)
        assert box.contains(snaps.x).all()
        idx = np.random.default_rng(0).choice(snaps.count, 100, replace=False)
        ref = np.array([integrate(sys_, x, 0.0, snaps.dt) for x in snaps.x[idx]])
        assert np.linalg.norm(snaps.y[idx] - ref, axis=1).max() < 1e-10

    def test_csv_round_trip(self, tmp_path):
        sys_ = duffing_system()
        box = BoxDomain([-1.0, -0.5], [1.0, 0.5])
        snaps = generate_snapshots(sys_, box, 50, 0.2, seed=9)
        path = tmp_path / "snapshots.csv"
        snaps.save_csv(path)
        loaded = SnapshotSet.load_csv(path)
        npt.assert_array_equal(loaded.x, snaps.x)
        npt.assert_array_equal(loaded.y, snaps.y)
        assert loaded.dt == snaps.dt
        assert loaded.seed == 9
        npt.assert_array_equal(loaded.domain.lower, box.lower)
