"""IRS-assisted time-division OMA baselines.

Each user transmits alone in its slot with the IRS phases aligned to it, so
its gain is ``c_k = (sum_i |g_i||h_ki| + |v_k|)^2``.  A user with airtime
``alpha_k`` meets rate ``R_k`` with power ``sigma2 / c_k * (2^(R_k/alpha_k) - 1)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import lambertw

from .ee import InfeasibleError
from .scenario import ChannelRealization

log = logging.getLogger(__name__)

ALPHA_EPS = 1e-9
LN2 = np.log(2.0)


@dataclass
class OmaAllocation:
    alpha: np.ndarray
    p: np.ndarray
    c: np.ndarray
    sigma2: float = 1.0

    @property
    def average_power(self) -> float:
        return float(np.dot(self.alpha, self.p))

    @property
    def rates(self) -> np.ndarray:
        return self.alpha * np.log2(1.0 + self.p * self.c / self.sigma2)

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def ee(self) -> float:
        total = self.average_power
        if not total > 0:
            raise ValueError("energy efficiency is undefined at zero power")
        return self.sum_rate / total


def aligned_gain(ch: ChannelRealization, k: int) -> float:
    """Interference-free gain of user ``k`` with phases aligned to it."""
    amp = float(np.sum(np.abs(ch.g) * np.abs(ch.h[k])) + np.abs(ch.v[k]))
    return amp * amp


def aligned_gains(ch: ChannelRealization) -> np.ndarray:
    return np.array([aligned_gain(ch, k) for k in range(ch.K)])


def rate_power(alpha, c, R, sigma2: float) -> np.ndarray:
    """Powers meeting each rate target with equality in the given airtime."""
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(over="ignore"):
        return sigma2 / np.asarray(c, dtype=float) * np.expm1(LN2 * np.asarray(R, dtype=float) / alpha)


def airtime_cost(alpha, c, R, sigma2: float) -> np.ndarray:
    """Per-user energy ``alpha_k p_k`` at rate-binding power."""
    return np.asarray(alpha, dtype=float) * rate_power(alpha, c, R, sigma2)


def airtime_cost_deriv(alpha, c, R, sigma2: float) -> np.ndarray:
    """Derivative of :func:`airtime_cost` in ``alpha``; negative and increasing."""
    alpha = np.asarray(alpha, dtype=float)
    x = LN2 * np.asarray(R, dtype=float) / alpha
    with np.errstate(over="ignore", invalid="ignore"):
        out = sigma2 / np.asarray(c, dtype=float) * (np.expm1(x) - x * np.exp(x))
    return np.where(np.isnan(out), -np.inf, out)


def airtime_cost_second(alpha, c, R, sigma2: float) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    R = np.asarray(R, dtype=float)
    with np.errstate(over="ignore"):
        return sigma2 / np.asarray(c, dtype=float) * (LN2 * R) ** 2 / alpha ** 3 * 2.0 ** (R / alpha)


def _alpha_at_slope(mu: float, c, R, sigma2, lo, hi) -> np.ndarray:
    """Per-user solution of ``cost_k'(alpha) = mu`` clamped to ``[lo, hi]``.

    With ``x = ln2 R / alpha`` the equation reads ``(x - 1) e^(x - 1) = y / e``
    where ``y = -1 - mu c / sigma2``, so ``x = 1 + W0(y / e)``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    R = np.asarray(R, dtype=float)
    y = -1.0 - mu * np.asarray(c, dtype=float) / sigma2
    x = 1.0 + np.real(lambertw(np.maximum(y, -1.0) / np.e))
    with np.errstate(divide="ignore"):
        alpha = np.where(x > 0, LN2 * R / x, np.inf)
    return np.clip(alpha, lo, hi)


def _split_budget(c, R, sigma2, budget: float, lo, hi, tol: float = 1e-10) -> np.ndarray:
    """Minimize ``sum_k cost_k(alpha_k)`` with ``sum alpha = budget`` by dual bisection."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.sum() > budget * (1.0 + 1e-12):
        raise InfeasibleError("airtime lower bounds exceed the budget")
    if hi.sum() <= budget:
        return hi.copy()

    def total(mu):
        return float(np.sum(_alpha_at_slope(mu, c, R, sigma2, lo, hi)))

    # slopes are negative; bracket in log(-mu)
    s_hi = float(np.max(airtime_cost_deriv(hi, c, R, sigma2)))
    mu_hi = s_hi if s_hi < 0 else -1e-300
    mu_lo = min(mu_hi, -1e-300) * 2.0
    while total(mu_lo) > budget:
        mu_lo *= 16.0
        if not np.isfinite(mu_lo):
            return lo.copy()
    x_lo, x_hi = np.log(-mu_lo), np.log(-mu_hi)  # x_lo > x_hi
    alpha = _alpha_at_slope(mu_hi, c, R, sigma2, lo, hi)
    for _ in range(400):
        mid = 0.5 * (x_lo + x_hi)
        alpha = _alpha_at_slope(-np.exp(mid), c, R, sigma2, lo, hi)
        s = alpha.sum()
        if abs(s - budget) <= tol * budget:
            break
        if s > budget:
            x_hi = mid
        else:
            x_lo = mid
    return alpha


def _finish(alpha, c, R, sigma2) -> OmaAllocation:
    alpha = np.asarray(alpha, dtype=float)
    alpha = alpha / alpha.sum()
    R = np.asarray(R, dtype=float)
    p = np.where(R > 0, rate_power(alpha, c, R, sigma2), 0.0)
    return OmaAllocation(alpha=alpha, p=p, c=np.asarray(c, dtype=float), sigma2=sigma2)


def oma_powermin(c, R_min, sigma2: float) -> OmaAllocation:
    """Airtime split minimizing the average power ``sum_k alpha_k p_k``.

    Users with a zero rate target get airtime ``ALPHA_EPS`` and no power.
    """
    c = np.asarray(c, dtype=float)
    R = np.asarray(R_min, dtype=float)
    if np.any(c <= 0):
        raise ValueError("aligned gains must be positive")
    if np.any(R < 0):
        raise ValueError("rate targets must be nonnegative")
    K = c.shape[0]
    active = R > 0
    if not np.any(active):
        return OmaAllocation(alpha=np.full(K, 1.0 / K), p=np.zeros(K), c=c, sigma2=sigma2)
    alpha = np.full(K, ALPHA_EPS)
    budget = 1.0 - ALPHA_EPS * np.count_nonzero(~active)
    n = np.count_nonzero(active)
    alpha[active] = _split_budget(c[active], R[active], sigma2, budget,
                                  np.full(n, ALPHA_EPS), np.full(n, budget))
    return _finish(alpha, c, R, sigma2)


def oma_equal_share(c, R_min, sigma2: float) -> OmaAllocation:
    c = np.asarray(c, dtype=float)
    K = c.shape[0]
    return _finish(np.full(K, 1.0 / K), c, R_min, sigma2)


def _excess_ee(p_e, alpha, e, c, R, sigma2) -> float:
    rates = np.where(np.arange(len(c)) == e, alpha * np.log2(1.0 + p_e * c / sigma2), R)
    p = np.where(np.arange(len(c)) == e, p_e, np.where(R > 0, rate_power(alpha, c, R, sigma2), 0.0))
    return float(np.sum(rates) / np.dot(alpha, p))


def _best_excess_power(alpha, e, c, R, sigma2, P_max) -> float:
    """Excess user's power maximizing EE for fixed airtime (unimodal in log p)."""
    lo = max(float(rate_power(alpha[e], c[e], R[e], sigma2)), 1e-300)
    if R[e] <= 0:
        lo = P_max * 1e-15
    if lo >= P_max:
        return float(P_max)

    def neg(x):
        return -_excess_ee(np.exp(x), alpha, e, c, R, sigma2)

    res = minimize_scalar(neg, bounds=(np.log(lo), np.log(P_max)), method="bounded",
                          options={"xatol": 1e-12})
    candidates = [lo, float(P_max), float(np.exp(res.x))]
    values = [-neg(np.log(x)) for x in candidates]
    return candidates[int(np.argmax(values))]


def _best_airtime(p_e, alpha, e, c, R, sigma2, lb, tol=1e-13, max_iters=100):
    """Dinkelbach over airtime with the excess user's power fixed."""
    K = len(c)
    others = np.arange(K) != e
    r_e = float(np.log2(1.0 + p_e * c[e] / sigma2))
    lb_e = max(R[e] / r_e if r_e > 0 else 1.0, ALPHA_EPS)
    R_o, c_o, lb_o = R[others], c[others], lb[others]
    if lb_e + lb_o.sum() > 1.0 + 1e-12:
        return alpha
    lam = _excess_ee(p_e, alpha, e, c, R, sigma2)
    for _ in range(max_iters):
        slope = r_e - lam * p_e  # coefficient of alpha_e in N - lam * D
        hi = np.full(K - 1, 1.0 - lb_e)
        if slope > 0 and K > 1:
            free = _alpha_at_slope(-slope / lam, c_o, R_o, sigma2, lb_o, hi)
            if free.sum() > 1.0 - lb_e:
                free = _split_budget(c_o, R_o, sigma2, 1.0 - lb_e, lb_o, hi)
        elif K > 1:
            free = _split_budget(c_o, R_o, sigma2, 1.0 - lb_e, lb_o, hi)
        else:
            free = np.zeros(0)
        new = np.empty(K)
        new[others] = free
        new[e] = 1.0 - free.sum()
        num = new[e] * r_e + R_o.sum()
        den = new[e] * p_e + float(np.sum(airtime_cost(free, c_o, R_o, sigma2)))
        F = num - lam * den
        alpha = new
        lam_new = num / den
        if F <= tol * abs(num):
            break
        lam = lam_new
    return alpha


def oma_ee_max(c, R_min, sigma2: float, P_max: float, fixed_alpha=None,
               tol: float = 1e-8, max_iters: int = 200) -> OmaAllocation:
    """Maximize ``sum_k rates / sum_k alpha_k p_k`` under rate and power caps.

    The user with the largest gain takes any excess power; the rest transmit
    at rate-binding power.  Airtime and the excess power are updated in turn,
    started from both the equal split and the power-minimizing split, and the
    better result is returned.  ``fixed_alpha`` skips the airtime update.
    """
    c = np.asarray(c, dtype=float)
    R = np.asarray(R_min, dtype=float)
    K = c.shape[0]
    e = int(np.argmax(c))
    with np.errstate(divide="ignore"):
        lb = np.where(R > 0, R / np.log2(1.0 + P_max * c / sigma2), ALPHA_EPS)
    if lb.sum() > 1.0 + 1e-12:
        raise InfeasibleError("rate targets unreachable within the power cap")

    if fixed_alpha is not None:
        starts = [np.asarray(fixed_alpha, dtype=float)]
        if np.any(starts[0] < lb * (1 - 1e-12)):
            raise InfeasibleError("fixed airtime violates the power cap")
    else:
        starts = []
        for start in (np.full(K, 1.0 / K), oma_powermin(c, R, sigma2).alpha):
            starts.append(np.maximum(start, lb) / np.maximum(start, lb).sum())

    best, best_ee = None, -np.inf
    for alpha in starts:
        alpha = alpha.copy()
        p_e = _best_excess_power(alpha, e, c, R, sigma2, P_max)
        ee = _excess_ee(p_e, alpha, e, c, R, sigma2)
        for _ in range(max_iters if fixed_alpha is None else 0):
            alpha = _best_airtime(p_e, alpha, e, c, R, sigma2, lb)
            p_e = _best_excess_power(alpha, e, c, R, sigma2, P_max)
            ee_new = _excess_ee(p_e, alpha, e, c, R, sigma2)
            done = abs(ee_new - ee) <= tol * abs(ee)
            ee = max(ee, ee_new)
            if done:
                break
        if ee > best_ee:
            p = np.where(R > 0, rate_power(alpha, c, R, sigma2), 0.0)
            p[e] = p_e
            best, best_ee = OmaAllocation(alpha=alpha, p=p, c=c, sigma2=sigma2), ee
    return best
