"""Generator determinism, targeted moment checks, and edge-effect bounds.

The replication batches are module-scoped: the first/second-moment and
edge-margin checks share the same simulated patterns, so the whole file costs
a few hundred small simulations.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from nbnsp.estimate import kernel_ccf
from nbnsp.model import (
    ExpKernel,
    GammaKernel,
    NbnspParams,
    cross_correlation,
)
from nbnsp.simulate import (
    PointPattern,
    SimConfig,
    default_parent_margin,
    simulate_nbnsp,
    simulate_poisson,
)

TABLE1_SIM = SimConfig(
    parent_intensity=0.1,
    offspring_mean1=2.0,
    offspring_mean2=4.0,
    kernel1=GammaKernel(0.3, 1.0),
    kernel2=GammaKernel(0.4, 1.0),
    noise_intensity1=0.0,
    noise_intensity2=0.0,
    horizon=5000.0,
)
# noise intensities equal to the signal intensities lambda sigma_i
TABLE2_SIM = replace(
    TABLE1_SIM, noise_intensity1=0.2, noise_intensity2=0.4, horizon=2500.0
)
TABLE1_PARAMS = NbnspParams(
    a=10.0, kernel1=GammaKernel(0.3, 1.0), kernel2=GammaKernel(0.4, 1.0)
)

CCF_GRID = np.array([-0.7, -0.3, -0.1, 0.1, 0.3, 0.7])
CCF_H = 0.01
N_REPS = 200


def _batch(config, seed0, n_reps=N_REPS):
    counts1 = np.empty(n_reps)
    counts2 = np.empty(n_reps)
    ccf = np.empty((n_reps, CCF_GRID.size))
    for k in range(n_reps):
        pat = simulate_nbnsp(config, seed0 + k)
        counts1[k] = pat.n1
        counts2[k] = pat.n2
        ccf[k] = np.array(
            [g for _, g in kernel_ccf(pat, CCF_GRID, h=CCF_H, r_edge=1.0)]
        )
    return counts1, counts2, ccf


@pytest.fixture(scope="module")
def table1_batch():
    return _batch(TABLE1_SIM, 50_000)


@pytest.fixture(scope="module")
def table2_batch():
    return _batch(TABLE2_SIM, 60_000)


@pytest.fixture(scope="module")
def table2_batch_wide_margin():
    wide = replace(TABLE2_SIM, parent_margin=2.0 * TABLE2_SIM.parent_margin)
    return _batch(wide, 60_000)


class TestDeterminism:
    def test_bit_identical_reruns(self):
        a = simulate_nbnsp(TABLE1_SIM, 12345)
        b = simulate_nbnsp(TABLE1_SIM, 12345)
        assert np.array_equal(a.times1, b.times1)
        assert np.array_equal(a.times2, b.times2)

    def test_seeds_decorrelate(self):
        a = simulate_nbnsp(TABLE1_SIM, 1)
        b = simulate_nbnsp(TABLE1_SIM, 2)
        assert not (
            a.n1 == b.n1 and np.array_equal(a.times1, b.times1)
        )

    def test_vanishing_parent_intensity(self):
        config = replace(TABLE1_SIM, parent_intensity=1e-12, horizon=100.0)
        a = simulate_nbnsp(config, 99)
        b = simulate_nbnsp(config, 99)
        assert a.n1 == 0 and a.n2 == 0
        assert np.array_equal(a.times1, b.times1)
        assert np.array_equal(a.times2, b.times2)

    def test_output_sorted_within_window(self):
        pat = simulate_nbnsp(TABLE1_SIM, 7)
        for t in (pat.times1, pat.times2):
            assert np.all(np.diff(t) > 0.0)
            assert t[0] >= 0.0 and t[-1] <= TABLE1_SIM.horizon


class TestPoissonHelper:
    def test_zero_intensity_empty(self):
        assert simulate_poisson(0.0, 1000.0, 3).size == 0

    def test_deterministic(self):
        a = simulate_poisson(2.0, 1000.0, 11)
        b = simulate_poisson(2.0, 1000.0, 11)
        assert np.array_equal(a, b)
        c = simulate_poisson(2.0, 1000.0, 12)
        assert not np.array_equal(a, c)

    def test_mean_count(self):
        counts = np.array(
            [simulate_poisson(2.0, 1000.0, 70_000 + k).size for k in range(500)]
        )
        assert abs(counts.mean() - 2000.0) < 3.0 * math.sqrt(2000.0 / 500.0)

    def test_sorted_in_window(self):
        pts = simulate_poisson(1.5, 200.0, 4)
        assert np.all(np.diff(pts) > 0.0)
        assert pts[0] >= 0.0 and pts[-1] <= 200.0

    def test_validation(self):
        with pytest.raises(ValueError):
            simulate_poisson(-1.0, 10.0, 0)
        with pytest.raises(ValueError):
            simulate_poisson(1.0, 0.0, 0)


class TestFirstMoments:
    def test_table1_replication_means(self, table1_batch):
        counts1, counts2, _ = table1_batch
        t = TABLE1_SIM.horizon
        for counts, lam in ((counts1, 0.2), (counts2, 0.4)):
            rates = counts / t
            se = rates.std(ddof=1) / math.sqrt(rates.size)
            assert abs(rates.mean() - lam) < 4.0 * se

    def test_table2_replication_means(self, table2_batch):
        counts1, counts2, _ = table2_batch
        t = TABLE2_SIM.horizon
        assert TABLE2_SIM.intensity(1) == pytest.approx(0.4)
        assert TABLE2_SIM.intensity(2) == pytest.approx(0.8)
        for counts, lam in ((counts1, 0.4), (counts2, 0.8)):
            rates = counts / t
            se = rates.std(ddof=1) / math.sqrt(rates.size)
            assert abs(rates.mean() - lam) < 4.0 * se

    def test_table1_single_long_window(self, table1_batch):
        # T=10000 single realization within 5 replication-estimated stds
        counts1, counts2, _ = table1_batch
        pat = simulate_nbnsp(replace(TABLE1_SIM, horizon=10_000.0), 31)
        # count variance is linear in T for this process, so scale up from
        # the T=5000 batch
        for n, counts, lam in ((pat.n1, counts1, 0.2), (pat.n2, counts2, 0.4)):
            std_10k = math.sqrt(2.0) * counts.std(ddof=1)
            assert abs(n / 10_000.0 - lam) < 5.0 * std_10k / 10_000.0


def _box_smoothed_theory(params, grid, h):
    """Box-kernel-smoothed g at each grid point (what the CCF estimates)."""
    out = np.empty(grid.size)
    for i, u in enumerate(grid):
        vv = np.linspace(u - h, u + h, 81)
        out[i] = np.trapezoid(cross_correlation(params, vv), vv) / (2.0 * h)
    return out


class TestSecondMoment:
    def test_ccf_matches_theory(self, table1_batch):
        _, _, ccf = table1_batch
        want = _box_smoothed_theory(TABLE1_PARAMS, CCF_GRID, CCF_H)
        mean = ccf.mean(axis=0)
        se = ccf.std(axis=0, ddof=1) / math.sqrt(ccf.shape[0])
        assert np.all(np.abs(mean - want) < 4.0 * se)


class TestEdgeEffects:
    def test_default_margin_value(self):
        assert TABLE1_SIM.parent_margin == 40.0
        k1, k2 = ExpKernel(0.5), GammaKernel(1.0, 2.0)
        assert default_parent_margin(k1, k2) == 80.0
        config = replace(TABLE1_SIM, parent_margin=5.0)
        assert config.parent_margin == 5.0

    def test_margin_doubling_within_mc_resolution(
        self, table2_batch, table2_batch_wide_margin
    ):
        # widening the buffer must not shift the CCF beyond Monte Carlo noise
        _, _, ccf_a = table2_batch
        _, _, ccf_b = table2_batch_wide_margin
        diff = ccf_a.mean(axis=0) - ccf_b.mean(axis=0)
        se = np.sqrt(
            ccf_a.var(axis=0, ddof=1) / ccf_a.shape[0]
            + ccf_b.var(axis=0, ddof=1) / ccf_b.shape[0]
        )
        assert np.all(np.abs(diff) < 4.0 * se)

    def test_missing_margin_loses_left_edge_mass(self):
        # with no buffer, clusters seeded left of 0 are absent; for a slow
        # kernel (mean displacement 5) that costs lambda sigma E[d] ~ 1 point
        # per window, detectable against the cluster-count noise
        slow = SimConfig(
            parent_intensity=0.1,
            offspring_mean1=2.0,
            offspring_mean2=2.0,
            kernel1=ExpKernel(0.2),
            kernel2=ExpKernel(0.2),
            noise_intensity1=0.0,
            noise_intensity2=0.0,
            horizon=50.0,
        )
        bare = replace(slow, parent_margin=0.0)
        n_reps = 4000
        tot_default = np.empty(n_reps)
        tot_bare = np.empty(n_reps)
        for k in range(n_reps):
            tot_default[k] = simulate_nbnsp(slow, 90_000 + k).n1
            tot_bare[k] = simulate_nbnsp(bare, 190_000 + k).n1
        gap = tot_default.mean() - tot_bare.mean()
        se = math.sqrt(
            tot_default.var(ddof=1) / n_reps + tot_bare.var(ddof=1) / n_reps
        )
        assert gap > 4.0 * se


class TestPatternValidation:
    def test_within_component_ties_rejected(self):
        with pytest.raises(ValueError):
            PointPattern(np.array([1.0, 1.0, 2.0]), np.array([0.5]), 10.0)

    def test_cross_component_ties_flagged(self):
        pat = PointPattern(np.array([1.0, 3.0]), np.array([3.0]), 10.0)
        assert pat.has_cross_ties
        pat2 = PointPattern(np.array([1.0, 3.0]), np.array([2.0]), 10.0)
        assert not pat2.has_cross_ties

    def test_out_of_window_rejected(self):
        with pytest.raises(ValueError):
            PointPattern(np.array([-0.1, 1.0]), np.array([0.5]), 10.0)
        with pytest.raises(ValueError):
            PointPattern(np.array([1.0]), np.array([10.5]), 10.0)

    def test_shape_and_finiteness(self):
        with pytest.raises(ValueError):
            PointPattern(np.array([[1.0, 2.0]]), np.array([0.5]), 10.0)
        with pytest.raises(ValueError):
            PointPattern(np.array([1.0, np.nan]), np.array([0.5]), 10.0)

    def test_counts(self):
        pat = PointPattern(np.array([1.0, 2.0]), np.empty(0), 10.0)
        assert pat.n1 == 2 and pat.n2 == 0


class TestConfigValidation:
    def test_field_constraints(self):
        with pytest.raises(ValueError):
            replace(TABLE1_SIM, parent_intensity=0.0)
        with pytest.raises(ValueError):
            replace(TABLE1_SIM, offspring_mean1=-1.0)
        with pytest.raises(ValueError):
            replace(TABLE1_SIM, noise_intensity2=-0.5)
        with pytest.raises(ValueError):
            replace(TABLE1_SIM, horizon=math.inf)

    def test_intensity_accessor(self):
        assert TABLE2_SIM.intensity(1) == pytest.approx(0.4)
        assert TABLE2_SIM.intensity(2) == pytest.approx(0.8)
        with pytest.raises(ValueError):
            TABLE2_SIM.intensity(3)
