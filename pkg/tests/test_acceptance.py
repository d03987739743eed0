"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines live.
The Monte Carlo criteria use pinned seeds, so every run is deterministic;
the coupled-simulation criteria assume the compiled backend (the pure-NumPy
fallback produces identical numbers but is ~30x slower, blowing the stated
runtime budgets).

Where a criterion's parenthetical parameters contradict the engine's
resolution invariant step_h < delta^2/4 (criteria 6 and 7 as originally
phrased), the runs use the nearest compliant discretization; the tolerances
and assertions are unchanged.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import erf

from stickysim import bounds as bnd
from stickysim import casestudies as cs
from stickysim import engine as eng
from stickysim import estimators as est
from stickysim.model import KappaSpec, LKRProfile, builtin_models

K_HALF = KappaSpec.constant(-0.5)
ATOM_M1 = 0.22336127479826068   # quadrature oracle, frozen


def _report(num, ok, text):
    print(f"ACCEPTANCE {num:2d}: {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, text


def test_criterion_01_ou_constants():
    t0 = time.monotonic()
    kit = bnd.lyapunov_kit((0.0, K_HALF))
    dt = time.monotonic() - t0
    ok_c = abs(kit.c - 0.125) <= 1e-8
    ok_e = abs(kit.epsilon - 0.1767766953) <= 1e-8
    _report(1, ok_c and ok_e and dt < 1.0,
            f"rate constants c={kit.c:.10f} (1/8), "
            f"eps={kit.epsilon:.10f} (1/(2*sqrt(8))), runtime {dt:.2f}s < 1s")


def test_criterion_02_invariant_measure_consistency():
    worst = 0.0
    for m in (0.1, 0.5, 1.0, 2.0, 4.0):
        pi = bnd.sticky_invariant_measure(m / 2.0, K_HALF)
        closed = 1.0 - 1.0 / (1.0 + math.sqrt(math.pi / 8.0) * m
                              * math.exp(m * m / 8.0)
                              * (1.0 + erf(m / (2.0 * math.sqrt(2.0)))))
        worst = max(worst, abs(pi.tail_mass - closed))
    atom0 = bnd.sticky_invariant_measure(0.0, K_HALF).atom_mass
    _report(2, worst <= 1e-6 and atom0 == 1.0,
            f"tail mass vs closed form, worst |diff|={worst:.2e} <= 1e-6; "
            f"M=0 atom == 1 exactly")


def test_criterion_03_small_shift_asymptotics():
    m = 1e-4
    r1 = cs.ou_pi_tail(m) / m / math.sqrt(math.pi / 8.0)
    r2 = float(cs.phi1(m / 2.0)) / m / (1.0 / math.sqrt(2.0 * math.pi))
    ok = abs(r1 - 1.0) <= 0.01 and abs(r2 - 1.0) <= 0.01
    _report(3, ok, f"small-shift slopes: tail ratio {r1:.6f}, "
                   f"tv ratio {r2:.6f}, both within 1%")


def test_criterion_04_ergodic_occupation():
    t0 = time.monotonic()
    cfg = eng.SimConfig(step_h=1e-3, horizon_T=200.0, delta=1.0, reg_n=100,
                        paths=1, seed=20240603)
    ens = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=0.0)
    dt = time.monotonic() - t0
    atom_est = float((ens.zero_time[0] + ens.band_time[0.01][0]) / 200.0)
    ok = abs(atom_est - ATOM_M1) <= 0.03 and dt < 60.0
    _report(4, ok, f"single-path atom estimate {atom_est:.4f} vs quadrature "
                   f"{ATOM_M1:.4f} (+/-0.03), runtime {dt:.1f}s < 60s")


def test_criterion_05_stickiness_identity():
    # M and the ensemble size are free parameters here; chosen so the
    # band-width bias M eps / 4 dominates the Monte Carlo noise.
    M, kv = 4.0, -8.0
    cfg = eng.SimConfig(step_h=1e-3, horizon_T=50.0, delta=1.0, reg_n=200,
                        paths=20000, seed=777)
    ens = eng.simulate_sticky_1d((M, KappaSpec.constant(kv)), cfg, r0=0.5)
    rep = est.stickiness_identity_check(ens, M)
    # bands 1/200 < 1/100 < 1/50 play the role of eps = 1/n for n=200,100,50
    ratio_100 = rep[0.01].aggregate_ratio
    groups = np.array_split(np.arange(cfg.paths), 10)
    med = {}
    for band in sorted(rep):
        bt = ens.band_time[band]
        vals = [abs(2.0 * M * (ens.zero_time[g].sum() + bt[g].sum())
                    / (4.0 * bt[g].sum() / band) - 1.0) for g in groups]
        med[band] = float(np.median(vals))
    trend = med[0.02] >= med[0.01] >= med[0.005]
    ok = 0.9 <= ratio_100 <= 1.1 and trend
    _report(5, ok, f"mean ratio at n=100: {ratio_100:.4f} in [0.9, 1.1]; "
                   f"median |ratio-1| {med[0.02]:.4f} >= {med[0.01]:.4f} >= "
                   f"{med[0.005]:.4f} (non-increasing in reg_n)")


def test_criterion_06_comparison_theorem():
    # part 1: zero violations of the 5 sqrt(h)(1+r) slack over 10^3 paths
    pair = builtin_models("ou", {"m": [1.0]})
    cfg = eng.SimConfig(step_h=2.5e-5, horizon_T=2.0, delta=0.05, paths=1000,
                        seed=606)
    ens = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                      record_times=[2.0])
    v5 = est.comparison_violations(ens, ens.slack_specs[0]).violation_count
    # part 2: the count at the tight constant slack sqrt(h)/2 decreases when
    # h is halved (run where the zone is marginally resolved so it is > 0)
    counts = {}
    for h in (8e-5, 4e-5):
        cfg2 = eng.SimConfig(step_h=h, horizon_T=2.0, delta=0.02, paths=500,
                             seed=606)
        e2 = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg2,
                                         record_times=[2.0])
        counts[h] = est.comparison_violations(
            e2, e2.slack_specs[1]).violation_count
    ok = v5 == 0 and counts[4e-5] < counts[8e-5]
    _report(6, ok, f"pathwise domination: {v5} violations at slack "
                   f"5*sqrt(h)(1+r) over 10^3 paths; tight-slack count "
                   f"{counts[8e-5]} -> {counts[4e-5]} under h/2")


def test_criterion_07_tv_sandwich():
    t0 = time.monotonic()
    pair = builtin_models("ou", {"m": [1.0]})
    cfg = eng.SimConfig(step_h=5e-5, horizon_T=10.0, delta=0.05, paths=10000,
                        seed=707)
    tol = 10.0 * cfg.delta
    ens = eng.simulate_delta_coupling(pair, pair.kappa, [0.0], [0.0], cfg,
                                      record_times=[1.0, 2.0, 5.0, 10.0])
    case = cs.OUCase(m=[1.0], x=[0.0], y=[0.0])
    pi = bnd.sticky_invariant_measure(0.5, K_HALF)
    lines = []
    ok = True
    for t in (1.0, 2.0, 5.0, 10.0):
        e = est.meet_probability(ens, t, tol)
        not_met = 1.0 - e.value
        d = cs.ou_exact_tv(case, t)
        ub = bnd.modified_upper_bound(K_HALF, pi, t, 0.0).value
        lo_ok = d <= not_met + 3.0 * e.std_error
        hi_ok = not_met <= ub + 3.0 * e.std_error
        ok = ok and lo_ok and hi_ok
        lines.append(f"t={t:g}: {d:.4f} <= {not_met:.4f} <= {ub:.4f}")
    dt = time.monotonic() - t0
    ok = ok and dt < 300.0
    _report(7, ok, "; ".join(lines) + f"; runtime {dt:.0f}s < 300s")


def test_criterion_08_closed_form_dominance():
    rng = np.random.Generator(np.random.Philox(key=[2024, 88]))
    ok = True
    for _ in range(20):  # low branch M <= K R
        prof = LKRProfile(L=rng.uniform(0.0, 2.0), K=rng.uniform(0.2, 3.0),
                          R_script=rng.uniform(0.2, 2.0))
        M = rng.uniform(0.0, 1.0) * prof.K * prof.R_script
        ok = ok and bnd.alpha_closed_form(prof, M)[0] >= \
            bnd.quadrature_alpha(prof, M) - 1e-9
    for _ in range(20):  # high branch M >= K R
        prof = LKRProfile(L=rng.uniform(0.0, 2.0), K=rng.uniform(0.2, 3.0),
                          R_script=rng.uniform(0.2, 2.0))
        M = (1.0 + rng.uniform(0.0, 2.0)) * prof.K * prof.R_script
        ok = ok and bnd.alpha_closed_form(prof, M)[0] >= \
            bnd.quadrature_alpha(prof, M) - 1e-9
    for _ in range(10):  # L = 0 rate bound
        prof = LKRProfile(L=0.0, K=rng.uniform(0.3, 2.5),
                          R_script=rng.uniform(0.3, 2.5))
        ok = ok and bnd.ctilde_inverse_bound(prof) >= \
            1.0 / bnd.lkr_step_kit(prof).c - 1e-8
    for _ in range(10):  # L R^2 <= 4 rate bound
        R = rng.uniform(0.3, 2.0)
        prof = LKRProfile(L=rng.uniform(0.01, 3.9 / R ** 2),
                          K=rng.uniform(0.3, 2.5), R_script=R)
        ok = ok and bnd.ctilde_inverse_bound(prof) >= \
            1.0 / bnd.lkr_step_kit(prof).c - 1e-8
    _report(8, ok, "closed forms dominate quadrature: 20+20 stationary-odds "
                   "profiles, 10+10 rate profiles")


def test_criterion_09_confined_bm_consistency():
    ok = True
    for m in (1e-3, 1e-2, 1e-1):
        s = cs.cbm_summary(cs.ConfinedBMCase(R=1.0, k=1.0, m=m))
        ok = ok and s.tv8_applicable and s.upper_dominates
        ok = ok and s.case.Z_g >= s.case.Z_f
    s0 = cs.cbm_summary(cs.ConfinedBMCase(R=1.0, k=1.0, m=1e-3))
    lim = 0.25 * (1.0 + math.sqrt(2.0 / math.pi))
    ratio = (s0.lower2 / 1e-3) / lim
    ok = ok and abs(ratio - 1.0) <= 0.01
    _report(9, ok, f"upper bound dominates both lower bounds for "
                   f"m in 1e-3..1e-1; small-m slope ratio {ratio:.5f} "
                   f"within 1% of {lim:.4f}; Z_g >= Z_f")


def test_criterion_10_moment_bounds():
    kit = bnd.lyapunov_kit((1.0, K_HALF))
    pi = bnd.sticky_invariant_measure(1.0, K_HALF)
    cfg = eng.SimConfig(step_h=1e-3, horizon_T=2.0, delta=1.0, paths=10000,
                        seed=1010, reg_n=100)
    ens = eng.simulate_sticky_1d((1.0, K_HALF), cfg, r0=1.0,
                                 record_times=[0.5, 1.0, 2.0])
    f_r0 = float(kit.f(1.0))
    ok = True
    lines = []
    for t in (0.5, 1.0, 2.0):
        mb = bnd.moment_bounds(kit, pi, t, f_r0)
        ef = est.lyapunov_moment(ens, kit, t)
        er = est.radial_moment(ens, t)
        ok = ok and ef.value <= mb.ef_bound + 3.0 * ef.std_error
        ok = ok and er.value <= mb.er_bound + 3.0 * er.std_error
        lines.append(f"t={t:g}: E[f]={ef.value:.4f}<={mb.ef_bound:.4f}, "
                     f"E[r]={er.value:.4f}<={mb.er_bound:.4f}")
    _report(10, ok, "; ".join(lines))


def test_criterion_11_mean_field_properties():
    from stickysim.model import DriftSpec
    base = dict(eta=DriftSpec(dim=1, linear=[[-0.5]]), interaction=[[1.0]],
                L_theta=1.0, A=1.0, lam=0.25, N=300, kappa=K_HALF)
    cfg = eng.SimConfig(step_h=1e-2, horizon_T=20.0, delta=1.0, paths=1,
                        seed=1111)
    sim0 = cs.mkv_simulate(cs.MKVCase(tau=0.0, x0=[1.0], y0=[-1.0], **base), cfg)
    sim_small = cs.mkv_simulate(cs.MKVCase(tau=0.04, x0=[1.0], y0=[-1.0], **base), cfg)
    sim_eq = cs.mkv_simulate(cs.MKVCase(tau=0.04, x0=[0.5], y0=[0.5], **base), cfg)
    bc = sim_small.bound_curve
    ok = (sim0.fitted_rate > 0.0 and sim_small.fitted_rate > 0.0
          and np.all(sim_eq.w1_curve == 0.0)
          and np.all(np.isfinite(bc.values)) and np.all(bc.values > 0.0)
          and bc.fitted_rate > 0.0)
    mask = bc.times >= 0.5 * bc.times[-1]
    env = bc.fitted_amplitude * np.exp(-bc.fitted_rate * bc.times[mask])
    ok = ok and np.all(bc.values[mask] <= env * (1.0 + 1e-9))
    _report(11, ok, f"W1 decay rates {sim0.fitted_rate:.3f} (tau=0) and "
                    f"{sim_small.fitted_rate:.3f} (small tau) > 0; equal "
                    f"starts stay glued; bound curve positive, finite, "
                    f"enveloped at rate {bc.fitted_rate:.3f}")


def test_criterion_12_determinism(tmp_path):
    import subprocess
    import sys

    def run(scenario, out, threads):
        r = subprocess.run(
            [sys.executable, "-m", "stickysim.cli", "run", scenario,
             "--out-dir", str(out), "--threads", str(threads)],
            capture_output=True, text=True)
        assert r.returncode in (0, 2), r.stderr
        return r

    ok = True
    details = []
    for scenario in ("ou-demo", "cbm-demo", "sticky-ergodic", "mkv-demo"):
        run(scenario, tmp_path / "a", 1)
        run(scenario, tmp_path / "b", 3)
        same = all(
            (tmp_path / "a" / scenario / f).read_bytes()
            == (tmp_path / "b" / scenario / f).read_bytes()
            for f in ("bounds.csv", "estimates.csv", "curves.csv"))
        ok = ok and same
        details.append(f"{scenario}: {'identical' if same else 'DIFFERS'}")
    _report(12, ok, "byte-identical CSV reruns across thread counts - "
                    + ", ".join(details))
