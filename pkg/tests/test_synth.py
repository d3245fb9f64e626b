"""Seeded generators: Wishart draws, trajectories, dropout masks."""

import numpy as np
import pytest

from kgmrf.geometry import OrbitState, Spectrum, geodesic_error_deg_so3
from kgmrf.linalg import frob_norm
from kgmrf.synth import (
    So3Protocol,
    Spd2Protocol,
    TESTING_SEEDS,
    TUNING_SEEDS,
    dropout_mask,
    gaussian,
    so3_observation,
    so3_trajectory,
    spd2_trajectory,
    stream,
    trajectory_to_text,
    varying_velocity_trajectory,
    wishart_obs,
)


class TestStream:
    def test_seed_sets_disjoint(self):
        assert not set(TUNING_SEEDS) & set(TESTING_SEEDS)
        assert TUNING_SEEDS == (0, 1, 2, 3, 4)
        assert TESTING_SEEDS == (5, 6, 7, 8, 9)

    def test_reproducible(self):
        a = stream(3, "wishart").random(10)
        b = stream(3, "wishart").random(10)
        assert np.array_equal(a, b)

    def test_labels_decoupled(self):
        a = stream(3, "wishart").random(10)
        b = stream(3, "dropout").random(10)
        assert not np.array_equal(a, b)

    def test_gaussian_moments(self):
        z = gaussian(stream(0, "gauss-check"), 200000)
        assert abs(z.mean()) < 0.01
        assert z.std() == pytest.approx(1.0, abs=0.01)


class TestWishartObs:
    S_STAR = np.diag([2.1, 0.6])

    def test_mean_converges(self):
        rng = stream(0, "wishart")
        total = np.zeros((2, 2))
        n = 400
        for _ in range(n):
            total += wishart_obs(rng, self.S_STAR, 250)
        avg = total / n
        # per-entry SE from the Wishart entry covariance at m*n samples
        s = self.S_STAR
        se = np.sqrt((np.outer(np.diag(s), np.diag(s)) + s ** 2) / (250 * n))
        assert np.all(np.abs(avg - s) <= 3.0 * se + 1e-3)

    def test_rank_one_at_single_dof(self):
        c = wishart_obs(stream(1, "wishart"), self.S_STAR, 1)
        assert np.trace(c) >= 0.0
        assert abs(np.linalg.det(c)) < 1e-12

    def test_entry_variance_formula(self):
        rng = stream(2, "wishart")
        m = 8
        draws = np.array([wishart_obs(rng, self.S_STAR, m) for _ in range(20000)])
        for (i, j) in ((0, 0), (0, 1), (1, 1)):
            var = draws[:, i, j].var(ddof=1)
            expect = (self.S_STAR[i, i] * self.S_STAR[j, j]
                      + self.S_STAR[i, j] ** 2) / m
            assert var == pytest.approx(expect, rel=0.08)

    def test_psd_output(self):
        rng = stream(3, "wishart")
        for m in (1, 2, 8):
            c = wishart_obs(rng, self.S_STAR, m)
            assert np.min(np.linalg.eigvalsh(c)) >= -1e-12

    def test_rejects_indefinite_scale(self):
        with pytest.raises(ValueError):
            wishart_obs(stream(0, "wishart"), np.diag([1.0, -1.0]), 8)


class TestSpd2Trajectory:
    def test_zero_velocity_constant(self):
        traj = spd2_trajectory(Spd2Protocol(omega=0.0, horizon=50))
        assert all(np.allclose(s.m, traj.states[0].m) for s in traj.states)
        assert traj.total_variation == pytest.approx(0.0)

    def test_angle_accumulation(self):
        proto = Spd2Protocol(omega=0.08, horizon=400)
        traj = spd2_trajectory(proto)
        from kgmrf.geometry import angular_error_deg_spd2

        expect = np.degrees((0.08 * 399) % np.pi)
        expect = min(expect, 180.0 - expect)
        got = angular_error_deg_spd2(traj.states[-1].m, traj.states[0].m)
        assert got == pytest.approx(expect, abs=1e-6)

    def test_recomposition_invariant(self):
        from kgmrf.linalg import expm_skew

        traj = spd2_trajectory(Spd2Protocol(omega=0.05, horizon=30))
        for t in range(len(traj) - 1):
            r = expm_skew(traj.velocities[t])
            recomposed = r @ traj.states[t].m @ r.T
            assert frob_norm(recomposed - traj.states[t + 1].m) < 1e-10


class TestSo3Trajectory:
    def test_zero_amplitude_constant(self):
        proto = So3Protocol(amp_range=(0.0, 0.0), horizon=40)
        traj = so3_trajectory(proto, stream(0, "so3-params"))
        assert all(np.allclose(r, np.eye(3)) for r in traj.states)

    def test_velocity_bound(self):
        proto = So3Protocol(horizon=200)
        traj = so3_trajectory(proto, stream(1, "so3-params"))
        # |w|_F = sqrt(2) * axis norm; axis norm <= sum of amplitudes
        cap = np.sqrt(2.0) * 3 * 0.15 + 1e-12
        assert max(frob_norm(w) for w in traj.velocities) <= cap

    def test_states_are_rotations(self):
        traj = so3_trajectory(So3Protocol(horizon=50), stream(2, "so3-params"))
        for r in traj.states:
            assert np.allclose(r.T @ r, np.eye(3), atol=1e-9)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)

    def test_single_axis_accumulation(self):
        proto = So3Protocol(amp_range=(0.1, 0.1), freq_range=(0.01, 0.01),
                            horizon=100)

        class _FixedPhase:
            def random(self, n=None):
                return np.zeros(3) if n == 3 else 0.0

        traj = so3_trajectory(proto, _FixedPhase())
        total = sum(0.1 * np.sin(0.02 * np.pi * t) for t in range(99))
        angle = np.degrees(
            frob_norm(sum(traj.velocities)) / np.sqrt(2.0))
        # all three axes share amplitude/frequency/phase here, so the
        # summed velocity has axis norm sqrt(3) * scalar sum
        assert angle == pytest.approx(np.degrees(np.sqrt(3.0) * abs(total)), rel=1e-9)


class TestSo3Observation:
    def test_exact_at_zero_noise(self):
        traj = so3_trajectory(So3Protocol(horizon=5), stream(0, "so3-params"))
        obs = so3_observation(stream(0, "so3-noise"), traj.states[2], 0.0)
        assert np.allclose(obs, traj.states[2])

    def test_mean_error_matches_chi(self):
        import math

        rng = stream(4, "so3-noise")
        sigma = 0.05
        errs = np.array([
            geodesic_error_deg_so3(so3_observation(rng, np.eye(3), sigma), np.eye(3))
            for _ in range(10000)
        ])
        # mean angle = sigma * E||z_3||, chi(3) mean sqrt(2) Gamma(2)/Gamma(3/2)
        chi3_mean = np.sqrt(2.0) * math.gamma(2.0) / math.gamma(1.5)
        assert errs.mean() == pytest.approx(np.degrees(sigma * chi3_mean), rel=0.05)

    def test_output_valid_rotation(self):
        rng = stream(5, "so3-noise")
        r = so3_observation(rng, np.eye(3), 0.5)
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-9)


class TestDropoutMask:
    def test_zero_rate_all_present(self):
        assert dropout_mask(stream(0, "dropout"), 100, 0.0).all()

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            dropout_mask(stream(0, "dropout"), 10, 1.0)

    def test_empirical_rate(self):
        p = 0.3
        mask = dropout_mask(stream(1, "dropout"), 100000, p)
        rate = 1.0 - mask.mean()
        se = np.sqrt(p * (1 - p) / 100000)
        assert abs(rate - p) <= 3.0 * se


class TestVaryingVelocity:
    def test_zero_budget_constant(self):
        traj = varying_velocity_trajectory(0.02, 0.0, 4, 200, stream(0, "velocity-schedule"))
        assert traj.total_variation == pytest.approx(0.0)

    def test_budget_realized_exactly(self):
        for budget in (0.05, 0.1, 0.2):
            traj = varying_velocity_trajectory(
                0.02, budget, 4, 400, stream(1, "velocity-schedule"))
            assert traj.total_variation == pytest.approx(budget, abs=1e-12)

    def test_single_jump(self):
        traj = varying_velocity_trajectory(
            0.02, 0.1, 1, 100, stream(2, "velocity-schedule"))
        assert traj.total_variation == pytest.approx(0.1, abs=1e-12)


class TestSerialization:
    def test_columnar_round_trip(self, tmp_path):
        traj = spd2_trajectory(Spd2Protocol(omega=0.08, horizon=10))
        path = tmp_path / "traj.txt"
        trajectory_to_text(traj, path)
        rows = path.read_text().splitlines()
        assert len(rows) == 10
        first = np.array([float(x) for x in rows[0].split()[1:5]]).reshape(2, 2)
        assert np.allclose(first, traj.states[0].m)

    def test_bit_identical_repeats(self, tmp_path):
        outs = []
        for name in ("a.txt", "b.txt"):
            rng = stream(5, "wishart")
            draws = [wishart_obs(rng, np.diag([2.1, 0.6]), 8) for _ in range(20)]
            outs.append(np.array(draws).tobytes())
        assert outs[0] == outs[1]
