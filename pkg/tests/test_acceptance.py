"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed (visible with ``-s``) and collected into an
"acceptance criteria" section of the terminal summary.  Criteria 4 to 8 share
one set of paired Monte-Carlo runs (K = 2, L in {16, 32}, R_min in {0.2, 4},
50 trials each), which takes a few minutes.
"""
import time

import numpy as np
import pytest

from irs_noma import ccm, sdr
from irs_noma.ee import (InfeasibleError, alt_opt_ee, dinkelbach, ee_value, parametric_value,
                         solve_parametric, sum_rate)
from irs_noma.harness import initial_phases
from irs_noma.noma_power import alt_opt_powermin, sic_rates, solve_power_lp
from irs_noma.oma import aligned_gains, oma_ee_max, oma_equal_share, oma_powermin
from irs_noma.penalty import penalized_objective_ee, penalized_objective_powermin
from irs_noma.scenario import (ScenarioConfig, effective_gain, make_realization, random_phases,
                               sample_channels)

from conftest import crandn, random_constraint_set, random_point
from oracles import (oma_grid_oracle, parametric_pg_oracle, phase_grid, power_lp_oracle,
                     single_user_ee_oracle, wirtinger_fd)

TRIALS = 50
L_VALUES = (16, 32)
RATES = (0.2, 4.0)
EE_VARIANTS = ("sdr_obj", "manifold_obj", "manifold_maxmin")


def _report(acceptance_report, number, title, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
    print(line)
    acceptance_report.append(line)
    return ok


# ------------------------------------------------------------------ paired runs

def _run_trial(cfg, trial):
    ch = sample_channels(cfg, trial)
    chn = ch.normalized(cfg.sigma2)
    R = ch.user_values(cfg.R_min)
    w0 = initial_phases(cfg, trial)
    out = {}
    for bf in ("manifold", "sdr"):
        res = alt_opt_powermin(ch, cfg, bf, w0)
        a = np.array([effective_gain(chn, res.w, k) for k in range(ch.K)])
        out[f"pm_{bf}"] = {"P": res.sum_power, "trace": res.sum_powers,
                           "ee": ee_value(res.p, a, 1.0), "rates": res.rates, "R": R}
    out["oma"] = {"P": oma_powermin(aligned_gains(chn), R, 1.0).average_power}
    for bf in EE_VARIANTS:
        try:
            res = alt_opt_ee(ch, cfg, bf, w0)
        except InfeasibleError:
            out[f"ee_{bf}"] = None
            continue
        out[f"ee_{bf}"] = {"P": res.sum_power, "ee": res.ee_values[-1]}
    return out


@pytest.fixture(scope="module")
def paired():
    runs = {}
    for R in RATES:
        for L in L_VALUES:
            cfg = ScenarioConfig(L=L, R_min=(R, R))
            runs[R, L] = [_run_trial(cfg, t) for t in range(TRIALS)]
    return runs


def _col(trials, key, field):
    return np.array([t[key][field] for t in trials])


# ------------------------------------------------------------------ criteria

def test_criterion_01_gradients(acceptance_report):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        cs = random_constraint_set(rng, K=3, L=8)
        w = random_point(rng, 8)
        rho, u = float(rng.uniform(0.5, 10.0)), float(rng.uniform(1e-3, 1.0))
        shift = max(0.0, 1e-6 - float(cs.values(w).min()))
        for fun in (lambda x: penalized_objective_powermin(cs, x, rho, u, 64.0, shift),
                    lambda x: penalized_objective_ee(cs, x, rho, u)):
            g = fun(w)[1]
            fd = wirtinger_fd(lambda x: fun(x)[0], w)
            worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 10.0
    assert _report(acceptance_report, 1, "penalized objective gradients vs finite differences", ok,
                   f"max rel err {worst:.1e} on 100 instances x 2 objectives, {elapsed:.1f} s")


def test_criterion_02_manifold_geometry(acceptance_report):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    tangency = idempotence = modulus = 0.0
    for _ in range(1000):
        L = int(rng.integers(1, 33))
        w = random_point(rng, L)
        xi = ccm.project_tangent(w, crandn(rng, L))
        tangency = max(tangency, np.abs(np.real(xi * np.conj(w))).max())
        idempotence = max(idempotence, np.abs(ccm.project_tangent(w, xi) - xi).max())
        modulus = max(modulus, np.abs(np.abs(ccm.retract(w, xi)) - 1.0).max())
    # every accepted step of every solver must lower the objective
    ascents = steps = 0
    for _ in range(100):
        L = int(rng.integers(2, 17))
        X = crandn(rng, L, L)
        A = X @ X.conj().T
        b = crandn(rng, L)

        def fun(w, A=A, b=b):
            return float(np.real(np.vdot(w, A @ w)) + 2 * np.real(np.vdot(b, w))), 2 * (A @ w + b)

        w0 = random_point(rng, L)
        traces = [ccm.minimize(fun, w0, ccm.CcmSolverParams(method=m, max_iters=100))[1]
                  for m in ("gd", "cg")]
        traces.append(ccm.minimize_trust_region(fun, lambda w, xi, A=A: 2 * (A @ xi), w0)[1])
        for tr in traces:
            d = np.diff(tr.values)
            steps += d.size
            ascents += int(np.sum(d > 0))
    elapsed = time.perf_counter() - start
    ok = (tangency <= 1e-10 and idempotence <= 1e-12 and modulus <= 1e-14 and ascents == 0
          and elapsed < 5.0)
    assert _report(acceptance_report, 2, "manifold geometry and monotone descent", ok,
                   f"tangency {tangency:.1e}, idempotence {idempotence:.1e}, modulus {modulus:.1e}, "
                   f"{ascents} ascents in {steps} accepted steps, {elapsed:.1f} s")


def test_criterion_03_power_lp(acceptance_report):
    rng = np.random.default_rng(303)
    worst_p = worst_rate = 0.0
    for _ in range(1000):
        K = int(rng.integers(1, 5))
        a = np.sort(np.exp(rng.uniform(-3.0, 4.0, K)))[::-1]
        R = rng.uniform(0.0, 3.0, K)
        p = solve_power_lp(a, R, 1.0)
        ref = power_lp_oracle(a, R, 1.0)
        worst_p = max(worst_p, np.max(np.abs(p - ref) / np.maximum(np.abs(ref), 1e-300)))
        worst_rate = max(worst_rate, np.abs(sic_rates(p, a, 1.0) - R).max())
    ok = worst_p <= 1e-9 and worst_rate <= 1e-9
    assert _report(acceptance_report, 3, "power LP vs simplex oracle", ok,
                   f"max rel component err {worst_p:.1e}, max rate residual {worst_rate:.1e}, 1000 instances")


def test_criterion_04_monotone_alternation(acceptance_report, paired):
    worst = 0.0
    runs = 0
    for R in RATES:
        for trial in paired[R, 16]:
            for bf in ("manifold", "sdr"):
                s = np.array(trial[f"pm_{bf}"]["trace"])
                worst = max(worst, float(np.max(np.diff(s) / s[:-1], initial=0.0)))
                runs += 1
    ok = worst <= 1e-9
    assert _report(acceptance_report, 4, "sum power non-increasing over alternations", ok,
                   f"largest relative increase {worst:.1e} over {runs} runs (L=16, both beamformers, "
                   f"both rate regimes)")


def test_criterion_05_manifold_vs_sdr(acceptance_report, paired):
    parts, ok, gaps = [], True, {}
    for L in L_VALUES:
        trials = paired[0.2, L]
        pm, ps = _col(trials, "pm_manifold", "P"), _col(trials, "pm_sdr", "P")
        wins = int(np.sum(pm <= ps))
        gaps[L] = 10 * np.log10(ps.mean() / pm.mean())
        ok &= pm.mean() <= ps.mean() and wins >= 0.9 * TRIALS
        parts.append(f"L={L}: mean {pm.mean():.3e} vs {ps.mean():.3e} W, wins {wins}/{TRIALS}, "
                     f"gap {gaps[L]:.2f} dB")
    ok &= gaps[32] > gaps[16]
    assert _report(acceptance_report, 5, "manifold vs SDR sum power at R_min=0.2", bool(ok), "; ".join(parts))


def test_criterion_06_noma_oma_crossover(acceptance_report, paired):
    parts, ok = [], True
    for R in RATES:
        for L in L_VALUES:
            trials = paired[R, L]
            noma, oma = _col(trials, "pm_manifold", "P").mean(), _col(trials, "oma", "P").mean()
            ok &= (oma < noma) if R < 1 else (noma < oma)
            parts.append(f"R={R:g} L={L}: NOMA {noma:.3e} OMA {oma:.3e} W")
    assert _report(acceptance_report, 6, "OMA better at low rate, NOMA better at high rate", bool(ok),
                   "; ".join(parts))


def _ee_pairs(trials, variant):
    keep = [t for t in trials if t[f"ee_{variant}"] is not None]
    return keep, len(trials) - len(keep)


def test_criterion_07_ee_vs_powermin(acceptance_report, paired):
    parts, ok = [], True
    for L in L_VALUES:
        trials, dropped = _ee_pairs(paired[4.0, L], "manifold_maxmin")
        P_ee, P_pm = _col(trials, "ee_manifold_maxmin", "P"), _col(trials, "pm_manifold", "P")
        E_ee, E_pm = _col(trials, "ee_manifold_maxmin", "ee"), _col(trials, "pm_manifold", "ee")
        dP, dE = np.mean(np.abs(P_ee - P_pm) / P_pm), np.mean(np.abs(E_ee - E_pm) / E_pm)
        ok &= dP <= 0.01 and dE <= 0.01
        parts.append(f"R=4 L={L}: mean |dP|/P {dP:.2%}, |dEE|/EE {dE:.2%} ({dropped} infeasible dropped)")
    for L in L_VALUES:
        trials, _ = _ee_pairs(paired[0.2, L], "manifold_maxmin")
        P_ee, P_pm = _col(trials, "ee_manifold_maxmin", "P").mean(), _col(trials, "pm_manifold", "P").mean()
        E_ee, E_pm = _col(trials, "ee_manifold_maxmin", "ee").mean(), _col(trials, "pm_manifold", "ee").mean()
        ok &= P_ee >= P_pm and E_ee >= E_pm
        parts.append(f"R=0.2 L={L}: sum power {P_ee:.3e} vs {P_pm:.3e} W, EE {E_ee:.4g} vs {E_pm:.4g}")
    assert _report(acceptance_report, 7, "EE maximization vs power minimization", bool(ok), "; ".join(parts))


def test_criterion_08_ee_manifold_vs_sdr(acceptance_report, paired):
    parts, ok = [], True
    for R in RATES:
        for L in L_VALUES:
            for variant in ("manifold_obj", "manifold_maxmin"):
                trials, _ = _ee_pairs(paired[R, L], variant)
                m, s = _col(trials, f"ee_{variant}", "ee"), _col(trials, "ee_sdr_obj", "ee")
                wins = int(np.sum(m >= s))
                ok &= wins >= 0.9 * len(trials)
                parts.append(f"R={R:g} L={L} {variant} {wins}/{len(trials)}")
    assert _report(acceptance_report, 8, "EE manifold variants beat sdr_obj in 90% of trials", bool(ok),
                   "; ".join(parts))


def test_criterion_09_dinkelbach(acceptance_report):
    rng = np.random.default_rng(909)
    worst_single = worst_param = 0.0
    monotone = True
    done = 0
    while done < 100:
        a = float(np.exp(rng.uniform(-1.0, 4.0)))
        R = float(rng.uniform(0.0, 2.0))
        P_max = float(rng.uniform(1.0, 20.0))
        if (2 ** R - 1) / a > P_max:
            continue
        p, st = dinkelbach([a], [R], 1.0, P_max)
        _, ref = single_user_ee_oracle(a, R, 1.0, P_max)
        worst_single = max(worst_single, abs(ee_value(p, [a], 1.0) - ref) / ref)
        monotone &= bool(np.all(np.diff(st.betas) >= 0)) and st.F <= st.epsilon
        done += 1
    done = 0
    while done < 100:
        a = np.sort(rng.uniform(0.5, 20.0, 3))[::-1]
        R = rng.uniform(0.0, 1.0, 3)
        P_max = float(rng.uniform(1.0, 5.0))
        beta = float(np.exp(rng.uniform(-3.0, 1.0)))
        try:
            p = solve_parametric(a, R, 1.0, beta, P_max)
            _, st = dinkelbach(a, R, 1.0, P_max)
        except InfeasibleError:
            continue
        _, ref = parametric_pg_oracle(a, R, 1.0, beta, P_max)
        worst_param = max(worst_param, abs(parametric_value(p, a, 1.0, beta) - ref))
        monotone &= bool(np.all(np.diff(st.betas) >= 0)) and st.F <= st.epsilon
        done += 1
    ok = worst_single <= 1e-6 and worst_param <= 1e-6 and monotone
    assert _report(acceptance_report, 9, "Dinkelbach and coordinate ascent vs oracles", ok,
                   f"K=1 max rel EE err {worst_single:.1e}; K=3 max |F err| {worst_param:.1e}; "
                   f"beta monotone and F<=eps on all runs: {monotone}")


def _psd_unit_diag_error(W):
    W = 0.5 * (W + W.conj().T)
    neg = max(0.0, -np.linalg.eigvalsh(W)[0]) / np.linalg.norm(W)
    return max(neg, np.abs(np.diag(W) - 1).max())


def test_criterion_10_sdr_machinery(acceptance_report):
    rng = np.random.default_rng(1010)
    trace_err = 0.0
    for _ in range(100):
        K, L = int(rng.integers(1, 4)), int(rng.integers(1, 17))
        ch = make_realization(crandn(rng, L), crandn(rng, K, L), crandn(rng, K))
        w = random_phases(L, rng)
        B, W = sdr.build_all_lifted(ch), sdr.lift(w)
        for k in range(K):
            lhs = np.real(np.trace(B[k] @ W)) + abs(ch.v[k]) ** 2
            trace_err = max(trace_err, abs(lhs - effective_gain(ch, w, k)) / effective_gain(ch, w, k))

    psd_err, solved = 0.0, 0
    for trial in range(10):
        cfg = ScenarioConfig(L=8)
        ch = sample_channels(cfg, trial).normalized(cfg.sigma2)
        R = ch.user_values(cfg.R_min)
        w = initial_phases(cfg, trial)
        p = solve_power_lp(np.array([effective_gain(ch, w, k) for k in range(2)]), R, 1.0)
        B, v2 = sdr.build_all_lifted(ch), np.abs(ch.v) ** 2
        for sol in (sdr.solve_sdp_powermin(B, v2, p, R), sdr.solve_sdp_ee(B, v2, p, R)):
            solved += sol.ok
            psd_err = max(psd_err, _psd_unit_diag_error(sol.W))

    grid_err, grid = 0.0, phase_grid()
    for _ in range(10):
        ch = make_realization(crandn(rng, 1), crandn(rng, 1, 1), crandn(rng, 1))
        B, v2 = sdr.build_all_lifted(ch), np.abs(ch.v) ** 2
        a = np.abs(ch.h[0, 0] * ch.g[0] * grid + ch.v[0]) ** 2
        p, R = np.array([float(rng.uniform(0.5, 2.0))]), np.array([float(rng.uniform(0.0, 0.5))])
        t = 2 ** R[0] - 1
        best_pm = np.max(p[0] * a - t)
        sol = sdr.solve_sdp_powermin(B, v2, p, R)
        if best_pm >= 0:
            grid_err = max(grid_err, abs(sol.objective - best_pm) / max(1.0, abs(best_pm)))
        feasible = p[0] * a - t >= 0
        if np.any(feasible):
            sol = sdr.solve_sdp_ee(B, v2, p, R)
            ref = np.max(p[0] * a[feasible])
            grid_err = max(grid_err, abs(sol.objective - ref) / ref)

    rank_err = 0.0
    for L in (1, 4, 16, 64):
        for _ in range(5):
            w = random_phases(L, rng)
            rank_err = max(rank_err, np.abs(sdr.extract_rank_one(sdr.lift(w)) - w).max())

    ok = trace_err <= 1e-10 and psd_err <= 1e-6 and solved == 20 and grid_err <= 1e-3 and rank_err <= 1e-10
    assert _report(acceptance_report, 10, "lifting, SDP feasibility, L=1 optimality, rank-one recovery", ok,
                   f"trace {trace_err:.1e}, PSD/diag {psd_err:.1e} ({solved}/20 optimal), "
                   f"L=1 grid {grid_err:.1e}, rank-one {rank_err:.1e}")


def test_criterion_11_oma(acceptance_report):
    rng = np.random.default_rng(1111)
    grid_err = 0.0
    for _ in range(20):
        c = np.exp(rng.uniform(-1.0, 3.0, 2))
        R = rng.uniform(0.1, 2.0, 2)
        _, ref = oma_grid_oracle(c, R, 1.0)
        grid_err = max(grid_err, abs(oma_powermin(c, R, 1.0).average_power - ref) / ref)
    symmetric = all(np.all(oma_powermin([c, c], [r, r], 1.0).alpha == 0.5)
                    for c, r in ((1.0, 1.0), (7.3, 0.2), (0.05, 4.0)))
    ee_ok = pm_ok = True
    checked = 0
    for _ in range(100):
        K = int(rng.integers(2, 4))
        c = np.exp(rng.uniform(-1.0, 3.0, K))
        R = rng.uniform(0.05, 1.0, K)
        pm_ok &= oma_powermin(c, R, 1.0).average_power <= oma_equal_share(c, R, 1.0).average_power
        try:
            equal = oma_ee_max(c, R, 1.0, 20.0, fixed_alpha=np.full(K, 1.0 / K)).ee
        except InfeasibleError:
            continue
        ee_ok &= oma_ee_max(c, R, 1.0, 20.0).ee >= equal
        checked += 1
    ok = grid_err <= 1e-6 and symmetric and ee_ok and pm_ok
    assert _report(acceptance_report, 11, "OMA baselines", bool(ok),
                   f"grid rel err {grid_err:.1e}; symmetric alpha exact: {symmetric}; "
                   f"optimized EE >= equal-share EE on {checked} instances: {ee_ok}; "
                   f"power-min <= equal share: {pm_ok}")


def test_criterion_12_sum_rate_identity(acceptance_report):
    rng = np.random.default_rng(1212)
    worst = 0.0
    for _ in range(1000):
        K = int(rng.integers(1, 6))
        p = rng.uniform(0.0, 5.0, K)
        a = np.sort(np.exp(rng.uniform(-3.0, 5.0, K)))[::-1]
        worst = max(worst, abs(np.sum(sic_rates(p, a, 1.0)) - sum_rate(p, a, 1.0)))
    ok = worst <= 1e-10
    assert _report(acceptance_report, 12, "per-user rates sum to the single-log rate", ok,
                   f"max abs err {worst:.1e} on 1000 instances")
