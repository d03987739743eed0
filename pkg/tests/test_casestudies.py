import math

import numpy as np
import pytest

from stickysim import bounds as bnd
from stickysim import casestudies as cs
from stickysim import engine as eng
from stickysim.model import DriftSpec, KappaSpec
from stickysim.quadrature import adaptive_simpson

K_HALF = KappaSpec.constant(-0.5)


class TestPhi1:
    def test_endpoints(self):
        assert cs.phi1(0.0) == 0.0
        assert 1.0 - cs.phi1(40.0) < 1e-12

    def test_against_quadrature_oracle(self):
        for r in (0.25, 0.5, 1.3, 2.7):
            ref = math.sqrt(2.0 / math.pi) * adaptive_simpson(
                lambda x: np.exp(-x * x / 2.0), 0.0, r, tol=1e-13)
            assert float(cs.phi1(r)) == pytest.approx(ref, abs=1e-12)

    def test_reference_value(self):
        assert float(cs.phi1(0.5)) == pytest.approx(0.3829249225480263, abs=1e-12)


class TestOuExactTv:
    def test_no_shift_equal_starts(self):
        case = cs.OUCase(m=[0.0], x=[0.3], y=[0.3])
        for t in (0.5, 2.0, 9.0):
            assert cs.ou_exact_tv(case, t) == 0.0

    def test_long_time_limit(self):
        case = cs.OUCase(m=[1.0], x=[0.0], y=[0.0])
        lim = float(cs.phi1(0.5))
        assert cs.ou_exact_tv(case, 60.0) == pytest.approx(lim, abs=1e-12)

    def test_asymptotic_rate(self):
        # |d(t) - lim| ~ (2 pi)^{-1/2} e^{-m^2/8} e^{-t/2} |y - m - x|
        m, x, y = 1.0, 0.4, -0.3
        case = cs.OUCase(m=[m], x=[x], y=[y])
        t = 30.0
        lim = float(cs.phi1(m / 2.0))
        lhs = abs(cs.ou_exact_tv(case, t) - lim)
        rhs = (2.0 * math.pi) ** -0.5 * math.exp(-m * m / 8.0) \
            * math.exp(-t / 2.0) * abs(y - m - x)
        assert lhs / rhs == pytest.approx(1.0, rel=1e-3)

    def test_requires_positive_time(self):
        with pytest.raises(ValueError):
            cs.ou_exact_tv(cs.OUCase(m=[1.0], x=[0.0], y=[0.0]), 0.0)


class TestOuPiTail:
    def test_zero_shift(self):
        assert cs.ou_pi_tail(0.0) == 0.0

    def test_reference_value(self):
        assert cs.ou_pi_tail(1.0) == pytest.approx(0.4954613590020549, abs=1e-12)

    def test_agrees_with_measure_quadrature(self):
        for m in (0.1, 1.0, 3.0):
            pi = bnd.sticky_invariant_measure(m / 2.0, K_HALF)
            assert pi.tail_mass == pytest.approx(cs.ou_pi_tail(m), abs=1e-6)

    def test_small_shift_asymptotics(self):
        m = 1e-4
        assert cs.ou_pi_tail(m) / m == pytest.approx(math.sqrt(math.pi / 8.0),
                                                     rel=0.01)
        assert float(cs.phi1(m / 2.0)) / m == pytest.approx(
            1.0 / math.sqrt(2.0 * math.pi), rel=0.01)


class TestConfinedBM:
    def test_normalizers(self):
        case = cs.ConfinedBMCase(R=1.0, k=1.0, m=0.1)
        assert case.Z_f == pytest.approx(2.0 + math.sqrt(2.0 * math.pi), abs=1e-12)
        assert case.Z_g >= case.Z_f

    def test_lower_bound_values(self):
        case = cs.ConfinedBMCase(R=1.0, k=1.0, m=1.0)
        b1, b2 = cs.cbm_tv_lower_bounds(case)
        assert b1 == pytest.approx(math.exp(-1.0), abs=1e-12)
        expect2 = (1.0 - math.exp(-0.5) + math.sqrt(2.0 / math.pi) * math.exp(-1.0)) / 4.0
        assert b2 == pytest.approx(expect2, abs=1e-12)

    def test_small_shift_limit(self):
        case = cs.ConfinedBMCase(R=1.0, k=1.0, m=0.0)
        b1, _ = cs.cbm_tv_lower_bounds(case)
        assert b1 == 0.0

    def test_improved_bound_absent_for_rough_k(self):
        case = cs.ConfinedBMCase(R=1.0, k=4.0, m=0.1)  # R sqrt(k) = 2 > 1
        _, b2 = cs.cbm_tv_lower_bounds(case)
        assert b2 is None

    def test_summary_reference_value(self):
        s = cs.cbm_summary(cs.ConfinedBMCase(R=1.0, k=1.0, m=0.1))
        expect = (0.75 * math.e + math.sqrt(1.5 * math.pi * math.e ** 3)) * 0.1
        assert s.tv8_applicable
        assert s.tv8_value == pytest.approx(min(1.0, expect), abs=1e-12)
        assert s.upper_dominates

    def test_summary_branch_routing(self):
        # m > k R: explicit branch inapplicable, high closed-form branch used
        s = cs.cbm_summary(cs.ConfinedBMCase(R=0.5, k=0.2, m=1.0))
        assert not s.tv8_applicable
        assert s.tv8_value is None
        assert s.closed_form_branch == "high"

    def test_dominance_sweep(self):
        for m in (1e-3, 1e-2, 1e-1):
            s = cs.cbm_summary(cs.ConfinedBMCase(R=1.0, k=1.0, m=m))
            assert s.upper_dominates


class TestMkvSimulate:
    def _case(self, tau, N=80):
        return cs.MKVCase(eta=DriftSpec(dim=1, linear=[[-0.5]]),
                          interaction=[[1.0]], tau=tau, L_theta=1.0, A=1.0,
                          lam=0.25, x0=[1.0], y0=[-1.0], N=N, kappa=K_HALF)

    def _cfg(self, seed=31):
        return eng.SimConfig(step_h=1e-2, horizon_T=12.0, delta=1.0, paths=1,
                             seed=seed, dimension=1)

    def test_equal_starts_vanish(self):
        case = cs.MKVCase(eta=DriftSpec(dim=1, linear=[[-0.5]]),
                          interaction=[[1.0]], tau=0.05, L_theta=1.0, A=1.0,
                          lam=0.25, x0=[0.5], y0=[0.5], N=60, kappa=K_HALF)
        sim = cs.mkv_simulate(case, self._cfg())
        assert np.all(sim.w1_curve == 0.0)
        assert sim.fitted_amplitude == 0.0

    def test_no_interaction_contracts(self):
        sim = cs.mkv_simulate(self._case(0.0), self._cfg())
        assert sim.fitted_rate > 0.0
        assert sim.w1_curve[-1] < sim.w1_curve[0]

    def test_small_tau_contracts_with_decaying_bound(self):
        sim = cs.mkv_simulate(self._case(0.04), self._cfg())
        assert sim.small_tau
        assert sim.fitted_rate > 0.0
        # empirical decay dominated by the fitted envelope
        mask = sim.times >= 0.5 * sim.times[-1]
        env = sim.fitted_amplitude * np.exp(-sim.fitted_rate * sim.times[mask])
        assert np.all(sim.w1_curve[mask] <= env * (1.0 + 1e-9))
        assert np.all(sim.bound_curve.values > 0.0)
        assert np.all(np.isfinite(sim.bound_curve.values))

    def test_sliced_direction_count_for_higher_dim(self):
        case = cs.MKVCase(eta=DriftSpec(dim=2, linear=-0.5 * np.eye(2)),
                          interaction=np.eye(2), tau=0.02, L_theta=1.0, A=1.0,
                          lam=0.25, x0=[1.0, 0.0], y0=[-1.0, 0.0], N=40,
                          kappa=K_HALF)
        cfg = eng.SimConfig(step_h=1e-2, horizon_T=4.0, delta=1.0, paths=1,
                            seed=32, dimension=2)
        sim = cs.mkv_simulate(case, cfg, n_directions=8)
        assert not sim.w1_exact
        assert sim.w1_curve[0] > 0.0


class TestCrossModuleInequalities:
    def test_exact_tv_below_analytic_bound(self):
        # any-coupling inequality: TV <= non-meeting bound, here at r0 = 0
        case = cs.OUCase(m=[1.0], x=[0.0], y=[0.0])
        pi = bnd.sticky_invariant_measure(0.5, K_HALF)
        for t in (1.0, 2.0, 5.0, 10.0):
            ub = bnd.modified_upper_bound(K_HALF, pi, t, 0.0).value
            assert cs.ou_exact_tv(case, t) <= ub

    def test_long_time_bound_below_closed_form(self):
        # simulation profile (mollified) tail mass stays below the two-regime
        # closed-form tail bound (slack absorbs the mollification)
        from stickysim.model import builtin_models
        pair = builtin_models("confined_bm", {"R": 1.0, "k": 1.0, "m": 0.1})
        pi = bnd.sticky_invariant_measure(pair.M, pair.kappa)
        _, tail_bound = bnd.alpha_closed_form(pair.lkr, pair.M)
        assert pi.tail_mass <= tail_bound
        # and the long-time limit of the bound is that tail mass
        ub = bnd.modified_upper_bound(pair.kappa, pi, 1e6, 1.0)
        assert ub.value == pytest.approx(pi.tail_mass, abs=1e-9)
