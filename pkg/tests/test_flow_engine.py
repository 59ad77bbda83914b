"""Flow integration, observables, and the experiment harness."""

import math

import numpy as np
import pytest

from ibflow import (PathRecord, PointCloud, containment, curve_length,
                    diameter, drift_linear, drift_none, drift_radial_rkhs,
                    euler_flow, length_decay_experiment, lyapunov_estimate,
                    ode_flow, squeeze_experiment, tilted_tracking_error,
                    wilson_interval)

from conftest import random_rotation


class TestObservables:
    def test_curve_length_square(self):
        square = PointCloud(positions=np.array(
            [[0., 0.], [1., 0.], [1., 1.], [0., 1.]]))
        assert curve_length(square, closed=True) == 4.0
        assert curve_length(square, closed=False) == 3.0

    def test_two_point_segment(self):
        seg = PointCloud(positions=np.array([[0., 0.], [3., 0.]]))
        assert curve_length(seg) == 3.0

    def test_midpoint_refinement_keeps_length(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(12, 2))
        refined = np.empty((24, 2))
        refined[0::2] = pts
        refined[1::2] = 0.5 * (pts + np.roll(pts, -1, axis=0))
        orig = curve_length(PointCloud(positions=pts), closed=True)
        fine = curve_length(PointCloud(positions=refined), closed=True)
        assert fine == pytest.approx(orig, abs=1e-12)

    def test_diameter_colinear_and_single(self):
        tri = PointCloud(positions=np.array([[0., 0.], [1., 0.], [3., 0.]]))
        assert diameter(tri) == 3.0
        assert diameter(PointCloud(positions=np.zeros((1, 2)))) == 0.0

    def test_diameter_rotation_invariant(self):
        rng = np.random.default_rng(1)
        pts = rng.normal(size=(9, 3))
        rot = random_rotation(3, rng)
        d0 = diameter(PointCloud(positions=pts))
        d1 = diameter(PointCloud(positions=pts @ rot.T))
        assert d1 == pytest.approx(d0, abs=1e-12)

    def test_diameter_bounded_by_length(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(14, 2))
        cloud = PointCloud(positions=pts)
        assert diameter(cloud) <= curve_length(cloud, closed=True) + 1e-12

    def test_containment_strict(self):
        assert containment(PointCloud(positions=np.zeros((1, 2))), 1.0)
        on_boundary = PointCloud(positions=np.array([[1.0, 0.0]]))
        assert not containment(on_boundary, 1.0)

    def test_containment_translation(self):
        cloud = PointCloud(positions=np.array([[2.0, 2.0], [2.1, 2.0]]))
        assert containment(cloud, 0.5, center=[2.05, 2.0])
        assert not containment(cloud, 0.5, center=[0.0, 0.0])

    def test_containment_monotone_in_radius(self):
        rng = np.random.default_rng(3)
        cloud = PointCloud(positions=rng.normal(size=(5, 2)))
        radii = np.linspace(0.1, 6.0, 25)
        flags = [containment(cloud, r) for r in radii]
        assert flags == sorted(flags)  # once inside, stays inside

    def test_wilson_interval(self):
        lo, hi = wilson_interval(8, 10)
        assert 0.0 <= lo < 0.8 < hi <= 1.0
        assert wilson_interval(0, 0) == (0.0, 1.0)


class TestEulerFlow:
    def test_trivial_model_rigid_translation(self, trivial_model):
        cloud = PointCloud(positions=np.array([[0., 0.], [1., 0.], [0., 2.]]))
        traj = euler_flow(trivial_model, cloud, 0.0, 1.0, 0.01,
                          rng=np.random.default_rng(4))
        d0 = diameter(traj[0])
        # rigid up to the documented jitter floor of the factorization
        for snap in traj:
            assert diameter(snap) == pytest.approx(d0, abs=1e-4)

    def test_zero_noise_linear_drift_decays(self, d2_potential_atom):
        cloud = PointCloud(positions=np.array([[1.0, 0.0]]))
        traj = euler_flow(d2_potential_atom, cloud, 0.0, 1.0, 1e-3,
                          drift=drift_linear(-np.eye(2)), zero_noise=True)
        end = traj[-1].positions[0]
        assert end[0] == pytest.approx(math.exp(-1.0), abs=2e-3)
        assert end[1] == 0.0

    def test_single_point_increments_are_brownian(self, d2_mixed):
        cloud = PointCloud(positions=np.zeros((1, 2)))
        dt = 1e-3
        traj = euler_flow(d2_mixed, cloud, 0.0, 10.0, dt,
                          rng=np.random.default_rng(5), snapshot_stride=1)
        xs = np.array([s.positions[0] for s in traj])
        inc = np.diff(xs, axis=0) / math.sqrt(dt)
        n = inc.shape[0]
        # one-point motion is standard Brownian: unit variance, no memory
        assert abs(inc[:, 0].mean()) < 5 / math.sqrt(n)
        assert abs(inc.var() - 1.0) < 5 * math.sqrt(2.0 / (2 * n))
        lag1 = np.mean(inc[1:, 0] * inc[:-1, 0])
        assert abs(lag1) < 5 / math.sqrt(n)

    def test_snapshot_times_and_exact_landing(self, d2_mixed):
        cloud = PointCloud(positions=np.zeros((1, 2)))
        traj = euler_flow(d2_mixed, cloud, 0.0, 0.333, 0.01,
                          rng=np.random.default_rng(6), snapshot_stride=10)
        times = [s.time for s in traj]
        assert times[0] == 0.0
        assert times[-1] == 0.333
        assert times[1] == pytest.approx(0.1, abs=1e-15)

    def test_requires_rng_unless_zero_noise(self, d2_mixed):
        cloud = PointCloud(positions=np.zeros((1, 2)))
        with pytest.raises(ValueError):
            euler_flow(d2_mixed, cloud, 0.0, 1.0, 0.1)

    def test_dt_validation(self, d2_mixed):
        cloud = PointCloud(positions=np.zeros((1, 2)))
        with pytest.raises(ValueError):
            euler_flow(d2_mixed, cloud, 0.0, 1.0, 2.0,
                       rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            euler_flow(d2_mixed, cloud, 1.0, 1.0, 0.1,
                       rng=np.random.default_rng(0))


class TestOdeFlow:
    def test_linear_decay_reference(self):
        times, xs = ode_flow(drift_linear(-np.eye(2)), np.array([1.0, 0.0]),
                             1.0, 1e-3)
        assert xs[-1, 0] == pytest.approx(math.exp(-1.0), abs=1e-8)
        assert times[-1] == 1.0

    def test_zero_field_fixed_point(self):
        _, xs = ode_flow(drift_none(), np.array([0.3, -0.7]), 1.0, 0.1)
        assert np.array_equal(xs[-1], np.array([0.3, -0.7]))

    def test_radial_field_contracts_inside_band(self, d2_potential_atom):
        v = drift_radial_rkhs(d2_potential_atom, 1.0, scale=1.0)
        theta = np.array([math.cos(1.1), math.sin(1.1)])
        _, xs = ode_flow(v, theta, 2.0, 1e-2)
        radii = np.linalg.norm(xs, axis=-1)
        assert np.all(np.diff(radii) < 0.0)

    def test_batched_integration(self, d2_potential_atom):
        v = drift_radial_rkhs(d2_potential_atom, 1.0, scale=1.0)
        x0 = np.array([[1.0, 0.0], [0.0, 0.5]])
        _, xs = ode_flow(v, x0, 1.0, 1e-2)
        assert xs.shape == (101, 2, 2)


class TestLyapunov:
    def test_trivial_model_estimate_vanishes(self, trivial_model):
        res = lyapunov_estimate(trivial_model, T=2.0, dt=1e-2, n_pairs=8,
                                renorm_eps=1e-3, seed=0)
        # common increments cancel up to the jitter floor
        assert abs(res.estimate) < 1e-2

    def test_reproducible(self, d2_potential_atom):
        a = lyapunov_estimate(d2_potential_atom, T=0.5, dt=1e-2, n_pairs=6, seed=3)
        b = lyapunov_estimate(d2_potential_atom, T=0.5, dt=1e-2, n_pairs=6, seed=3)
        assert a.pair_estimates == b.pair_estimates
        c = lyapunov_estimate(d2_potential_atom, T=0.5, dt=1e-2, n_pairs=6, seed=4)
        assert a.pair_estimates != c.pair_estimates

    def test_jobs_do_not_change_results(self, d2_potential_atom):
        a = lyapunov_estimate(d2_potential_atom, T=0.2, dt=1e-2, n_pairs=130,
                              seed=3, jobs=1)
        b = lyapunov_estimate(d2_potential_atom, T=0.2, dt=1e-2, n_pairs=130,
                              seed=3, jobs=4)
        assert a.pair_estimates == b.pair_estimates

    def test_renorm_eps_validated(self, d2_potential_atom):
        for eps in (1e-9, 0.5, 1e-2):
            with pytest.raises(ValueError):
                lyapunov_estimate(d2_potential_atom, T=1.0, dt=0.1,
                                  n_pairs=2, renorm_eps=eps)


class TestTracking:
    def test_deterministic_limit_floor(self, d2_potential_atom):
        x0 = PointCloud(positions=np.array([[0.5, 0.0], [0.0, 1.0]]))
        res = tilted_tracking_error(d2_potential_atom, 1.0, c=1e9, x0=x0,
                                    T=2.0, dt=1e-3, n_paths=1, seed=0,
                                    zero_noise=True)
        # pure Euler-vs-RK4 discretization gap
        assert res.mean < 1e-3

    def test_bitwise_reproducible(self, d2_potential_atom):
        x0 = PointCloud(positions=np.array([[0.5, 0.0]]))
        a = tilted_tracking_error(d2_potential_atom, 1.0, c=16.0, x0=x0,
                                  T=0.3, dt=1e-2, n_paths=3, seed=11)
        b = tilted_tracking_error(d2_potential_atom, 1.0, c=16.0, x0=x0,
                                  T=0.3, dt=1e-2, n_paths=3, seed=11)
        assert a.sup_deviations == b.sup_deviations

    def test_c_validation(self, d2_potential_atom):
        x0 = PointCloud(positions=np.array([[0.5, 0.0]]))
        with pytest.raises(ValueError):
            tilted_tracking_error(d2_potential_atom, 1.0, c=0.5, x0=x0,
                                  T=0.3, dt=1e-2, n_paths=1, seed=0)


class TestSqueezeExperiment:
    def test_report_structure_and_determinism(self, d2_potential_atom):
        kwargs = dict(R=1.0, delta=0.1, T1=0.1, T2=0.2, n_boundary=16,
                      dt=5e-3, n_paths=6, seed=42)
        rep1 = squeeze_experiment(d2_potential_atom, **kwargs)
        rep2 = squeeze_experiment(d2_potential_atom, **kwargs)
        assert rep1.paths == rep2.paths
        assert rep1.aggregate["success_count"] == rep2.aggregate["success_count"]
        assert 0.0 <= rep1.aggregate["success_frequency"] <= 1.0
        assert rep1.aggregate["n_paths"] == 6
        assert len(rep1.paths) == 6
        lo, hi = rep1.aggregate["wilson_low"], rep1.aggregate["wilson_high"]
        assert 0.0 <= lo <= rep1.aggregate["success_frequency"] <= hi <= 1.0

    def test_containment_window(self, d2_potential_atom):
        rep = squeeze_experiment(d2_potential_atom, R=1.0, delta=0.1, T1=0.1,
                                 T2=0.2, n_boundary=16, dt=5e-3, n_paths=2,
                                 seed=1)
        path = rep.paths[0]
        assert path.times[0] == 0.0 and path.times[-1] == 0.2
        assert len(path.containment_flags) == len(path.times)

    def test_expand_mode_with_outward_field(self, d2_potential_atom):
        out_field = drift_radial_rkhs(d2_potential_atom, 1.0, scale=-64.0)
        rep = squeeze_experiment(d2_potential_atom, R=1.0, delta=0.1, T1=0.25,
                                 T2=0.5, n_boundary=24, dt=5e-3, n_paths=8,
                                 seed=5, drift=out_field, mode="expand")
        assert rep.aggregate["success_frequency"] >= 0.5
        assert rep.command == "expand"

    def test_parameter_validation(self, d2_potential_atom):
        with pytest.raises(ValueError):
            squeeze_experiment(d2_potential_atom, R=1.0, delta=0.1, T1=0.3,
                               T2=0.2, n_boundary=16, dt=1e-2, n_paths=1)
        with pytest.raises(ValueError):
            squeeze_experiment(d2_potential_atom, R=1.0, delta=0.1, T1=0.1,
                               T2=0.2, n_boundary=4, dt=1e-2, n_paths=1)
        with pytest.raises(ValueError):
            squeeze_experiment(d2_potential_atom, R=0.5, delta=0.6, T1=0.1,
                               T2=0.2, n_boundary=16, dt=1e-2, n_paths=1)

    def test_time_grid_refinement_stability(self, d2_potential_atom):
        tilt = drift_radial_rkhs(d2_potential_atom, 1.0, scale=24.0)
        kwargs = dict(R=1.0, delta=0.1, T1=0.25, T2=0.5, n_boundary=16,
                      n_paths=64, drift=tilt, seed=9)
        coarse = squeeze_experiment(d2_potential_atom, dt=5e-3, **kwargs)
        fine = squeeze_experiment(d2_potential_atom, dt=2.5e-3, **kwargs)
        f1 = coarse.aggregate["success_frequency"]
        f2 = fine.aggregate["success_frequency"]
        pooled = math.sqrt((f1 * (1 - f1) + f2 * (1 - f2)) / 64 + 1e-12)
        assert abs(f1 - f2) <= 3.0 * pooled + 1e-9


class TestLengthDecay:
    def test_polyline_bounds_and_records(self, d2_solenoidal_atom):
        ang = 2 * np.pi * np.arange(24) / 24
        circle = PointCloud(positions=np.column_stack([np.cos(ang), np.sin(ang)]))
        rep = length_decay_experiment(d2_solenoidal_atom, circle, T=0.5,
                                      dt=5e-3, n_paths=4, seed=2, closed=True)
        for path in rep.paths:
            assert len(path.lengths) == len(path.times)
            # a polyline is always at least as long as any vertex gap
            assert all(length >= diam - 1e-12
                       for length, diam in zip(path.lengths, path.diameters))
        ag = rep.aggregate
        assert 0.0 <= ag["shrink_fraction"] <= 1.0
        assert len(ag["terminal_rates"]) == 4

    def test_deterministic(self, d2_solenoidal_atom):
        seg = PointCloud(positions=np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]))
        a = length_decay_experiment(d2_solenoidal_atom, seg, T=0.2, dt=1e-2,
                                    n_paths=3, seed=8)
        b = length_decay_experiment(d2_solenoidal_atom, seg, T=0.2, dt=1e-2,
                                    n_paths=3, seed=8)
        assert a.paths == b.paths
        assert a.aggregate["terminal_rates"] == b.aggregate["terminal_rates"]

    def test_needs_two_vertices(self, d2_solenoidal_atom):
        with pytest.raises(ValueError):
            length_decay_experiment(
                d2_solenoidal_atom, PointCloud(positions=np.zeros((1, 2))),
                T=0.2, dt=1e-2, n_paths=1, seed=0)


class TestPathRecord:
    def test_times_strictly_increasing(self):
        with pytest.raises(ValueError):
            PathRecord(times=(0.0, 0.0, 1.0), diameters=(1.0, 1.0, 1.0))

    def test_lengths_must_match(self):
        with pytest.raises(ValueError):
            PathRecord(times=(0.0, 1.0), diameters=(1.0, 1.0), lengths=(1.0,))
