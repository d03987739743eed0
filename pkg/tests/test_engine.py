import math

import numpy as np
import pytest

from stickysim import bounds as bnd
from stickysim import engine as eng
from stickysim.model import DriftSpec, KappaSpec, TimeDependentRadialDrift, builtin_models

K_HALF = KappaSpec.constant(-0.5)


class TestSimConfig:
    def test_zone_resolution_invariant(self):
        with pytest.raises(eng.EngineError):
            eng.SimConfig(step_h=1e-3, horizon_T=1.0, delta=0.05)
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=1.0, delta=0.07)
        assert cfg.n_steps == 1000

    def test_step_below_horizon(self):
        with pytest.raises(eng.EngineError):
            eng.SimConfig(step_h=2.0, horizon_T=1.0, delta=10.0)

    def test_positive_fields(self):
        with pytest.raises(eng.EngineError):
            eng.SimConfig(step_h=1e-4, horizon_T=1.0, delta=0.1, paths=0)
        with pytest.raises(eng.EngineError):
            eng.SimConfig(step_h=1e-4, horizon_T=1.0, delta=0.1, reg_n=0)


class TestRngContract:
    def test_same_key_same_stream(self):
        a = eng.rng_stream(12345, 7).standard_normal(100)
        b = eng.rng_stream(12345, 7).standard_normal(100)
        assert np.array_equal(a, b)

    def test_neighbor_streams_differ(self):
        a = eng.rng_stream(12345, 7).standard_normal(1)
        b = eng.rng_stream(12345, 8).standard_normal(1)
        assert a[0] != b[0]

    def test_clt_mean_bound(self):
        n = 1_000_000
        draws = eng.rng_stream(2024, 0).standard_normal(n)
        assert abs(draws.mean()) < 4.0 / math.sqrt(n)

    def test_rejects_out_of_range(self):
        with pytest.raises(eng.EngineError):
            eng.rng_stream(-1, 0)


class TestCouplingEngine:
    def test_identical_dynamics_identical_noise(self):
        # b == b_tilde and equal starts: synchronous from the start, X == Y
        pair = builtin_models("ou", {"m": [0.0]})
        cfg = eng.SimConfig(step_h=1e-4, horizon_T=0.5, delta=0.05, paths=8,
                            seed=1, dimension=1)
        ens = eng.simulate_delta_coupling(pair, pair.kappa, [0.4], [0.4], cfg,
                                          record_times=[0.25, 0.5])
        assert np.all(ens.r_tilde == 0.0)
        assert np.array_equal(ens.X, ens.Y)

    def test_r_tilde_is_distance_exactly(self):
        pair = builtin_models("ou", {"m": [1.0, 0.0]})
        cfg = eng.SimConfig(step_h=1e-4, horizon_T=0.5, delta=0.05, paths=5,
                            seed=2, dimension=2)
        ens = eng.simulate_delta_coupling(pair, pair.kappa, [0.0, 0.0],
                                          [0.5, -0.5], cfg,
                                          record_times=[0.5])
        d = np.sqrt(np.sum((ens.X - ens.Y) ** 2, axis=-1))
        assert np.array_equal(ens.r_tilde, d)

    def test_marginal_moments_match_closed_form(self):
        # with b == b_tilde, both marginals are the same OU process; compare
        # mean/variance at T against the exact Gaussian law
        pair = builtin_models("ou", {"m": [0.0]})
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=2.0, delta=0.5, paths=4000,
                            seed=3, dimension=1)
        ens = eng.simulate_delta_coupling(pair, pair.kappa, [1.0], [-1.0], cfg,
                                          record_times=[2.0])
        for cloud, x0 in ((ens.X, 1.0), (ens.Y, -1.0)):
            vals = cloud[:, -1, 0]
            mu = x0 * math.exp(-1.0)
            var = 1.0 - math.exp(-2.0)
            se_mu = math.sqrt(var / cfg.paths)
            assert abs(vals.mean() - mu) < 4.0 * se_mu
            assert abs(vals.var() - var) < 4.0 * var * math.sqrt(2.0 / cfg.paths)

    def test_comparison_dominates_in_stable_regime(self):
        pair = builtin_models("ou", {"m": [1.0]})
        cfg = eng.SimConfig(step_h=2.5e-5, horizon_T=1.0, delta=0.05,
                            paths=64, seed=4, dimension=1)
        ens = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                          record_times=[1.0])
        assert int(ens.viol_counts[:, 0].sum()) == 0

    def test_full_record_carries_w_increments(self):
        pair = builtin_models("ou", {"m": [1.0]})
        cfg = eng.SimConfig(step_h=1e-4, horizon_T=0.1, delta=0.05, paths=3,
                            seed=5, dimension=1)
        ens = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                          full_record=True)
        assert ens.w_increments.shape == (3, cfg.n_steps)
        assert len(ens.times) == cfg.n_steps + 1

    def test_off_grid_record_time_rejected(self):
        pair = builtin_models("ou", {"m": [1.0]})
        cfg = eng.SimConfig(step_h=1e-4, horizon_T=1.0, delta=0.05, paths=1,
                            seed=6)
        with pytest.raises(eng.EngineError):
            eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                        record_times=[0.500033])

    def test_divergent_drift_flagged(self):
        # strongly expanding custom drift blows up and must be flagged
        blow = DriftSpec(dim=1, linear=[[1000.0]])
        pair = builtin_models("ou", {"m": [1.0]})
        from dataclasses import replace
        bad = replace(pair, b=blow, b_tilde=blow)
        cfg = eng.SimConfig(step_h=1e-4, horizon_T=2.0, delta=0.05, paths=4,
                            seed=7)
        ens = eng.simulate_delta_coupling(bad, bad.kappa, [1.0], [0.5], cfg,
                                          record_times=[2.0])
        assert ens.diverged.all()


class TestStickyEngine:
    def test_absorbing_at_zero_without_boundary_drift(self):
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=1.0, delta=1.0, paths=4,
                            seed=8)
        ens = eng.simulate_sticky_1d((0.0, K_HALF), cfg, r0=0.0)
        assert np.allclose(ens.zero_time, 1.0, atol=1e-9)
        assert np.all(ens.r == 0.0)

    def test_occupation_identity(self):
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=5.0, delta=1.0, paths=16,
                            seed=9, reg_n=100)
        ens = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.5)
        # zero time plus occupied time can not exceed the horizon
        assert np.all(ens.zero_time <= cfg.horizon_T + 1e-12)
        b = ens.band_time
        assert np.all(b[0.01] <= b[0.02] + 1e-12)
        assert np.all(b[0.02] <= b[0.04] + 1e-12)
        assert np.all(ens.local_time_estimate == 4.0 * 100 * b[0.01])

    def test_records_nonnegative(self):
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=5.0, delta=1.0, paths=8,
                            seed=10)
        ens = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.0,
                                     record_times=[1.0, 2.5, 5.0])
        assert np.all(ens.r >= 0.0)

    def test_regularized_mode_needs_resolution(self):
        # the literal regularized scheme recovers the boundary mass only when
        # the step resolves the layer relaxation time 1/(4 n^2)
        atom = {}
        for h, T in ((1e-3, 150.0), (1e-5, 150.0)):
            cfg = eng.SimConfig(step_h=h, horizon_T=T, delta=1.0, paths=1,
                                seed=11, reg_n=100)
            ens = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.0,
                                         boundary="regularized")
            atom[h] = float((ens.zero_time[0] + ens.band_time[0.01][0]) / T)
        true_atom = bnd.sticky_invariant_measure(1.0, K_HALF).atom_mass
        assert abs(atom[1e-5] - true_atom) < abs(atom[1e-3] - true_atom)
        assert atom[1e-3] < 0.1  # unresolved: mass escapes the boundary

    def test_sticky_mode_holds_boundary_mass_at_coarse_h(self):
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=400.0, delta=1.0, paths=1,
                            seed=12, reg_n=100)
        ens = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.0)
        atom_est = float((ens.zero_time[0] + ens.band_time[0.01][0]) / 400.0)
        true_atom = bnd.sticky_invariant_measure(1.0, K_HALF).atom_mass
        assert abs(atom_est - true_atom) < 0.05

    def test_time_dependent_drift_freezes_boundary(self):
        # decaying boundary drift: holding budgets grow, zero share increases
        drift = TimeDependentRadialDrift(m0=1.0, decay_rate=0.3, kappa=K_HALF)
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=30.0, delta=1.0, paths=32,
                            seed=13)
        ens = eng.simulate_sticky_1d(drift, cfg, r0=1.0,
                                     record_times=[10.0, 30.0])
        early = (ens.r[:, ens.time_index(10.0)] == 0.0).mean()
        late = (ens.r[:, ens.time_index(30.0)] == 0.0).mean()
        assert late >= early

    def test_bad_boundary_mode(self):
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=1.0, delta=1.0, paths=1, seed=0)
        with pytest.raises(eng.EngineError):
            eng.simulate_sticky_1d((1.0, K_HALF), cfg, boundary="clamped")


class TestDeterminism:
    def test_coupling_rerun_and_thread_independence(self):
        pair = builtin_models("ou", {"m": [1.0]})
        cfg = eng.SimConfig(step_h=1e-4, horizon_T=0.3, delta=0.05, paths=40,
                            seed=14)
        a = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                        record_times=[0.3], threads=1)
        b = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                        record_times=[0.3], threads=3)
        assert np.array_equal(a.r_tilde, b.r_tilde)
        assert np.array_equal(a.X, b.X)

    def test_sticky_rerun(self):
        cfg = eng.SimConfig(step_h=1e-3, horizon_T=3.0, delta=1.0, paths=10,
                            seed=15)
        a = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.2)
        b = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.2, threads=2)
        assert np.array_equal(a.r, b.r)
        assert np.array_equal(a.zero_time, b.zero_time)


class TestMeanField:
    def test_equal_starts_stay_identical(self):
        eta = DriftSpec(dim=1, linear=[[-0.5]])
        cfg = eng.SimConfig(step_h=1e-2, horizon_T=1.0, delta=1.0, paths=1,
                            seed=16)
        X0 = np.full((50, 1), 0.7)
        res = eng.simulate_mean_field(eta, [[1.0]], 0.3, X0, X0.copy(), cfg,
                                      record_times=[0.5, 1.0])
        assert np.array_equal(res.X, res.Y)

    def test_clouds_contract(self):
        eta = DriftSpec(dim=1, linear=[[-0.5]])
        cfg = eng.SimConfig(step_h=1e-2, horizon_T=4.0, delta=1.0, paths=1,
                            seed=17)
        X0 = np.full((100, 1), 1.0)
        Y0 = np.full((100, 1), -1.0)
        res = eng.simulate_mean_field(eta, [[1.0]], 0.05, X0, Y0, cfg,
                                      record_times=[0.0, 4.0])
        gap0 = np.abs(res.X[0] - res.Y[0]).mean()
        gapT = np.abs(res.X[-1] - res.Y[-1]).mean()
        assert gapT < 0.2 * gap0
