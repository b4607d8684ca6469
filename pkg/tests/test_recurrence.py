import numpy as np
import pytest

from spindecoh.model import SystemConfig, build_system
from spindecoh.recurrence import (
    particle_frequency,
    recurrence_stats,
    recurrence_time,
)

from test_model import make_custom_system


def symmetric(rows):
    g = np.array(rows, dtype=float)
    return np.triu(g, 1) + np.triu(g, 1).T


class TestParticleFrequency:
    def test_direct_formula(self):
        # particle 0 couples with {1, 1/3, 1/2}: smallest gap is 1/2 - 1/3.
        g = symmetric([
            [0, 1.0, 1 / 3, 1 / 2],
            [0, 0, 0.9, 0.8],
            [0, 0, 0, 0.7],
            [0, 0, 0, 0],
        ])
        s = make_custom_system(g)
        assert particle_frequency(s, 0) == pytest.approx(1 / 3, rel=1e-12)

    def test_degenerate_couplings(self):
        g = symmetric([
            [0, 0.4, 0.4, 0.9],
            [0, 0, 0.1, 0.2],
            [0, 0, 0, 0.3],
            [0, 0, 0, 0],
        ])
        s = make_custom_system(g)
        with pytest.raises(ValueError):
            particle_frequency(s, 0)

    def test_positive_for_random_potential(self):
        s = build_system(SystemConfig(n_particles=12, rng_seed=3))
        for l in range(12):
            assert particle_frequency(s, l) > 0.0

    def test_needs_three_particles(self):
        s = build_system(SystemConfig(n_particles=2, rng_seed=1))
        with pytest.raises(ValueError):
            particle_frequency(s, 0)


class TestRecurrenceTime:
    def test_hand_built_three_particle(self):
        # couplings (g01, g02, g12) = (1.0, 0.9, 0.75) give frequencies
        # (0.2, 0.5, 0.3); the smallest frequency gap is 0.1.
        g = symmetric([[0, 1.0, 0.9], [0, 0, 0.75], [0, 0, 0]])
        est = recurrence_time(make_custom_system(g))
        assert not est.degenerate
        assert np.allclose(sorted(est.frequencies), [0.2, 0.3, 0.5])
        assert est.period == pytest.approx(2 * np.pi / 0.1, rel=1e-10)

    def test_minimizing_pair_recorded(self):
        g = symmetric([[0, 1.0, 0.9], [0, 0, 0.75], [0, 0, 0]])
        est = recurrence_time(make_custom_system(g))
        i, j = est.minimizing_pair
        assert abs(est.frequencies[i] - est.frequencies[j]) == pytest.approx(0.1)

    def test_degenerate_flagged_not_raised(self):
        # rows 0 and 2 both end up with frequency 0.4 -> zero frequency gap
        g = symmetric([
            [0, 1.0, 0.8, 0.3],
            [0, 0, 0.6, 0.2],
            [0, 0, 0, 0.4],
            [0, 0, 0, 0],
        ])
        est = recurrence_time(make_custom_system(g))
        assert est.degenerate
        assert est.period == float("inf")

    def test_scale_covariance(self):
        s = build_system(SystemConfig(n_particles=10, rng_seed=8))
        scaled = make_custom_system(2.0 * s.couplings,
                                    amp_a=s.amp_a, amp_b=s.amp_b)
        t1 = recurrence_time(s).period
        t2 = recurrence_time(scaled).period
        assert t2 == pytest.approx(t1 / 2.0, rel=1e-12)

    def test_gap_bound(self):
        for seed in range(5):
            s = build_system(SystemConfig(n_particles=8, rng_seed=seed))
            est = recurrence_time(s)
            g = s.couplings
            off = g[~np.eye(8, dtype=bool)]
            bound = 2 * np.pi / (2 * off.max() - 2 * off.min())
            assert est.period >= bound * (1 - 1e-12)


class TestRecurrenceStats:
    CELL = SystemConfig(n_particles=10, dimension=1, density=1.0)

    def test_deterministic(self):
        s1 = recurrence_stats(self.CELL, 20, master_seed=4)
        s2 = recurrence_stats(self.CELL, 20, master_seed=4)
        assert s1 == s2

    def test_summary_fields(self):
        st = recurrence_stats(self.CELL, 30, master_seed=5)
        assert st.degenerate_fraction == 0.0
        assert st.mean > st.median  # heavy right tail
        assert np.isfinite(st.log10_mean)

    def test_density_rescales_periods(self):
        # epsilon=1: scaling rho by 8 in D=3 scales every coupling by 2 and
        # halves every period, configuration by configuration.
        cell = SystemConfig(n_particles=8, dimension=3, density=1.0)
        dense = SystemConfig(n_particles=8, dimension=3, density=8.0)
        s1 = recurrence_stats(cell, 10, master_seed=6)
        s2 = recurrence_stats(dense, 10, master_seed=6)
        assert s2.mean == pytest.approx(s1.mean / 2.0, rel=1e-9)
        assert s2.median == pytest.approx(s1.median / 2.0, rel=1e-9)

    def test_log10_mean_grows_with_n(self):
        means = [
            recurrence_stats(
                SystemConfig(n_particles=n, dimension=1, density=1.0),
                40, master_seed=7,
            ).log10_mean
            for n in (6, 12, 24)
        ]
        assert means[0] < means[1] < means[2]

    def test_rejects_tiny_sample(self):
        with pytest.raises(ValueError):
            recurrence_stats(self.CELL, 1, master_seed=1)
