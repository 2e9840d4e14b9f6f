"""Fast randomized invariant checks behind ``irs-noma check``.

These mirror a subset of the test suite so an installed package can be
sanity-checked without the tests directory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import ccm, sdr
from .ee import dinkelbach, sum_rate
from .noma_power import sic_rates, solve_power_lp
from .oma import oma_equal_share, oma_powermin
from .penalty import ConstraintSet, penalized_objective_ee, penalized_objective_powermin
from .scenario import ScenarioConfig, effective_gains, random_phases, sample_channels


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _fd_grad(f, w, h=1e-6):
    out = np.empty(w.shape, dtype=complex)
    for i in range(w.size):
        e = np.zeros(w.size)
        e[i] = h
        re = (f(w + e) - f(w - e)) / (2 * h)
        im = (f(w + 1j * e) - f(w - 1j * e)) / (2 * h)
        out[i] = re + 1j * im
    return out


def check_gradients(rng, n=20) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        K, L = 3, 8
        cs = ConstraintSet(_crandn(rng, L), _crandn(rng, K, L), _crandn(rng, K),
                           rng.uniform(0.5, 2.0, K), rng.uniform(0.0, 0.3, K))
        w = ccm.normalize(_crandn(rng, L))
        shift = 1.0 + max(0.0, -cs.values(w).min())
        for fun in (lambda x: penalized_objective_powermin(cs, x, 2.0, 0.5, 8.0, shift),
                    lambda x: penalized_objective_ee(cs, x, 2.0, 0.5)):
            g = fun(w)[1]
            fd = _fd_grad(lambda x: fun(x)[0], w)
            worst = max(worst, np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-12))
    return CheckResult("penalty gradients vs finite differences", worst <= 1e-6, f"max rel err {worst:.2e}")


def check_geometry(rng, n=200) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        L = int(rng.integers(1, 20))
        w = ccm.normalize(_crandn(rng, L))
        xi = ccm.project_tangent(w, _crandn(rng, L))
        worst = max(worst, np.abs(np.real(xi * np.conj(w))).max(),
                    np.abs(ccm.project_tangent(w, xi) - xi).max(),
                    np.abs(np.abs(ccm.retract(w, xi)) - 1.0).max())
    return CheckResult("manifold projection and retraction", worst <= 1e-10, f"max deviation {worst:.2e}")


def check_power_lp(rng, n=200) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(1, 5))
        a = rng.uniform(0.1, 10.0, K)
        R = rng.uniform(0.0, 2.0, K)
        p = solve_power_lp(a, R, 1.0)
        t = 2.0 ** R - 1.0
        # p_k a_k - t_k sum_{j>k} p_j a_j >= t_k
        A = np.zeros((K, K))
        for k in range(K):
            A[k, k] = -a[k]
            A[k, k + 1:] = t[k] * a[k + 1:]
        ref = linprog(np.ones(K), A_ub=A, b_ub=-t, bounds=[(0, None)] * K, method="highs")
        worst = max(worst, np.abs(p - ref.x).max() / max(np.abs(ref.x).max(), 1e-12),
                    np.abs(sic_rates(p, a, 1.0) - R).max())
    return CheckResult("power LP back-substitution vs linprog", worst <= 1e-7, f"max err {worst:.2e}")


def check_sum_rate_identity(rng, n=500) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        K = int(rng.integers(1, 6))
        p, a = rng.uniform(0, 2, K), rng.uniform(0.01, 50, K)
        worst = max(worst, abs(np.sum(sic_rates(p, a, 1.0)) - sum_rate(p, a, 1.0)))
    return CheckResult("per-user rates sum to the single-log rate", worst <= 1e-10, f"max err {worst:.2e}")


def check_lifted_gains(rng, n=50) -> CheckResult:
    cfg = ScenarioConfig(L=6)
    worst = 0.0
    for t in range(n):
        ch = sample_channels(cfg, t).normalized(cfg.sigma2)
        w = random_phases(cfg.L, rng)
        B = sdr.build_all_lifted(ch)
        W = sdr.lift(w)
        lifted = np.real(np.einsum("kab,ba->k", B, W)) + np.abs(ch.v) ** 2
        direct = effective_gains(ch, w)
        worst = max(worst, np.abs(lifted - direct).max() / direct.max())
    return CheckResult("lifted gain identity", worst <= 1e-10, f"max rel err {worst:.2e}")


def check_oma(rng, n=100) -> CheckResult:
    ok = True
    for _ in range(n):
        c, R = rng.uniform(0.5, 50, 3), rng.uniform(0.1, 2, 3)
        ok &= oma_powermin(c, R, 1.0).average_power <= oma_equal_share(c, R, 1.0).average_power * (1 + 1e-9)
    sym = oma_powermin([2.0, 2.0], [1.0, 1.0], 1.0).alpha
    ok &= bool(np.all(sym == 0.5))
    return CheckResult("OMA airtime optimization dominates equal share", bool(ok), f"symmetric alpha {sym}")


def check_dinkelbach(rng, n=50) -> CheckResult:
    ok = True
    for _ in range(n):
        K = int(rng.integers(1, 4))
        a = np.sort(rng.uniform(1.0, 100.0, K))[::-1]
        p, st = dinkelbach(a, rng.uniform(0, 1, K), 1.0, 10.0)
        ok &= st.F <= st.epsilon and bool(np.all(np.diff(st.betas) >= -1e-12))
    return CheckResult("Dinkelbach termination and monotone ratio", bool(ok), f"{n} instances")


ALL_CHECKS = (check_gradients, check_geometry, check_power_lp, check_sum_rate_identity,
              check_lifted_gains, check_oma, check_dinkelbach)


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in ALL_CHECKS]
