"""Exact penalty with smoothing for the IRS phase sub-problems.

All constraint values are meant to be evaluated on noise-normalized channels
(``sigma2 = 1``), which keeps ``rho``, ``u`` and ``tau`` scale-free.  The
objectives here are *maximized*; :func:`exact_penalty_outer` negates them for
the manifold solver.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import ccm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PenaltyParams:
    rho0: float = 1.0
    theta_rho: float = 10.0
    u0: float = 1e-2
    u_min: float = 1e-8
    theta_u: float = 0.5
    tau: float = 1e-9
    d_min: float = 1e-6
    gamma: float = 64.0
    shift_tol: float = 1e-6
    max_outer: int = 40
    solver: str = "trust_region"
    inner: ccm.CcmSolverParams = field(default_factory=ccm.CcmSolverParams)
    trust: ccm.TrustRegionParams = field(default_factory=ccm.TrustRegionParams)

    def __post_init__(self):
        if not self.rho0 > 0 or not self.theta_rho > 1:
            raise ValueError("need rho0 > 0 and theta_rho > 1")
        if not (self.u0 > 0 and self.u_min > 0 and self.u_min <= self.u0):
            raise ValueError("need 0 < u_min <= u0")
        if not 0 < self.theta_u < 1:
            raise ValueError("theta_u must lie in (0, 1)")
        if self.tau < 0 or not self.d_min > 0 or not self.gamma > 0:
            raise ValueError("need tau >= 0, d_min > 0, gamma > 0")
        if self.solver not in ("trust_region", "line_search"):
            raise ValueError(f"unknown inner solver {self.solver!r}")


class ConstraintSet:
    """Rate constraints ``C_k(w)`` of one SIC-ordered cluster for fixed powers.

    ``C_k = p_k a_k - (2^R_k - 1) (sum_{j>k} p_j a_j + sigma2)`` with
    ``a_k = |d_k^T w + v_k|^2`` and ``d_k = h_k * g``.
    """

    def __init__(self, g, h, v, p, R_min, sigma2: float = 1.0):
        self.d = np.atleast_2d(np.asarray(h, dtype=complex)) * np.asarray(g, dtype=complex)[None, :]
        self.v = np.atleast_1d(np.asarray(v, dtype=complex))
        self.p = np.atleast_1d(np.asarray(p, dtype=float))
        self.R_min = np.atleast_1d(np.asarray(R_min, dtype=float))
        self.sigma2 = float(sigma2)
        if np.any(self.p < 0) or not np.all(np.isfinite(self.R_min)):
            raise ValueError("powers must be nonnegative and rate targets finite")
        self.snr_target = 2.0 ** self.R_min - 1.0

    @classmethod
    def from_channel(cls, ch, p, R_min, sigma2: float = 1.0) -> "ConstraintSet":
        return cls(ch.g, ch.h, ch.v, p, R_min, sigma2)

    @property
    def K(self) -> int:
        return self.d.shape[0]

    def fields(self, w: np.ndarray) -> np.ndarray:
        """Complex effective channels ``d_k^T w + v_k``."""
        return self.d @ w + self.v

    def gains(self, w: np.ndarray) -> np.ndarray:
        return np.abs(self.fields(w)) ** 2

    def _interference(self, received: np.ndarray) -> np.ndarray:
        # sum_{j>k} x_j along the last axis
        tail = np.cumsum(received[..., ::-1], axis=-1)[..., ::-1]
        out = np.zeros_like(received)
        out[..., :-1] = tail[..., 1:]
        return out

    def values(self, w: np.ndarray) -> np.ndarray:
        received = self.p * self.gains(w)
        return received - self.snr_target * (self._interference(received) + self.sigma2)

    def gain_grads(self, w: np.ndarray) -> np.ndarray:
        """Wirtinger gradients of ``a_k``, shape (K, L): ``2 s_k conj(d_k)``."""
        s = self.fields(w)
        return 2.0 * s[:, None] * np.conj(self.d)

    def values_and_grads(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = self.fields(w)
        received = self.p * np.abs(s) ** 2
        C = received - self.snr_target * (self._interference(received) + self.sigma2)
        return C, self._combine(self.p[:, None] * 2.0 * s[:, None] * np.conj(self.d))

    def _combine(self, own: np.ndarray) -> np.ndarray:
        # row k: own_k - target_k * sum_{j>k} own_j
        tail = np.cumsum(own[::-1], axis=0)[::-1]
        interf = np.zeros_like(own)
        interf[:-1] = tail[1:]
        return own - self.snr_target[:, None] * interf

    def hessvecs(self, xi: np.ndarray) -> np.ndarray:
        """Euclidean Hessians of every ``C_k`` applied to ``xi`` (w-independent)."""
        ds = self.d @ xi
        return self._combine(self.p[:, None] * 2.0 * ds[:, None] * np.conj(self.d))


def constraint_value(cs: ConstraintSet, w: np.ndarray, k: int) -> float:
    return float(cs.values(w)[k])


def constraint_grad(cs: ConstraintSet, w: np.ndarray, k: int) -> np.ndarray:
    return cs.values_and_grads(w)[1][k]


def smooth_min(C, gamma: float) -> float:
    """``(sum_k C_k^-gamma)^(-1/gamma)`` evaluated in the log domain."""
    C = np.asarray(C, dtype=float)
    if np.any(C <= 0):
        raise ValueError("smooth_min needs strictly positive arguments")
    return float(np.exp(-logsumexp(-gamma * np.log(C)) / gamma))


def smooth_min_grad(C, gamma: float) -> tuple[float, np.ndarray]:
    """Value and partial derivatives ``(f / C_k)^(gamma + 1)``."""
    C = np.asarray(C, dtype=float)
    if np.any(C <= 0):
        raise ValueError("smooth_min needs strictly positive arguments")
    logC = np.log(C)
    logf = -logsumexp(-gamma * logC) / gamma
    return float(np.exp(logf)), np.exp((gamma + 1.0) * (logf - logC))


def smooth_max(x, u: float):
    """Linear-quadratic smoothing of ``max(0, x)`` with accuracy ``u``."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, 0.0, np.where(x <= u, x * x / (2.0 * u), x - u / 2.0))
    return out if out.ndim else float(out)


def smooth_max_deriv(x, u: float):
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, 0.0, np.where(x <= u, x / u, 1.0))
    return out if out.ndim else float(out)


def _penalty(C: np.ndarray, Cgrad: np.ndarray, rho: float, u: float):
    value = rho * float(np.sum(smooth_max(-C, u)))
    # d/dw P(-C_k) = -P'(-C_k) C'_k
    grad = -rho * (smooth_max_deriv(-C, u) @ Cgrad)
    return value, grad


def penalized_objective_powermin(cs: ConstraintSet, w: np.ndarray, rho: float, u: float,
                                 gamma: float = 64.0, shift: float = 0.0):
    """Smoothed max-min objective with penalty, and its Wirtinger gradient.

    ``Q = smooth_min(C + shift) - rho * sum_k P(-C_k, u)``.  Outside the domain
    of the smooth min (some ``C_k + shift <= 0``) the value is ``-inf``.
    """
    C, Cgrad = cs.values_and_grads(w)
    shifted = C + shift
    if np.any(shifted <= 0):
        return -np.inf, np.full(w.shape, np.nan, dtype=complex)
    f, weights = smooth_min_grad(shifted, gamma)
    pen, pen_grad = _penalty(C, Cgrad, rho, u)
    return f - pen, weights @ Cgrad - pen_grad


def penalized_objective_ee(cs: ConstraintSet, w: np.ndarray, rho: float, u: float):
    """Weighted received power ``sum_k p_k a_k`` minus the smoothed penalty."""
    C, Cgrad = cs.values_and_grads(w)
    s = cs.fields(w)
    obj = float(cs.p @ np.abs(s) ** 2)
    obj_grad = (cs.p * 2.0 * s) @ np.conj(cs.d)
    pen, pen_grad = _penalty(C, Cgrad, rho, u)
    return obj - pen, obj_grad - pen_grad


def _penalty_hessvec(C, Cgrad, Chess_xi, xi, rho, u):
    # Hessian of -rho * sum_k P(-C_k, u) applied to xi
    x = -C
    d1 = smooth_max_deriv(x, u)
    d2 = np.where((x > 0) & (x < u), 1.0 / u, 0.0)
    dirs = np.real(np.conj(Cgrad) @ xi)
    return rho * (d1 @ Chess_xi) - rho * ((d2 * dirs) @ Cgrad)


def penalized_hessvec_powermin(cs: ConstraintSet, w, xi, rho, u, gamma=64.0, shift=0.0):
    """Euclidean Hessian of :func:`penalized_objective_powermin` applied to ``xi``."""
    C, Cgrad = cs.values_and_grads(w)
    Chess = cs.hessvecs(xi)
    f, phi = smooth_min_grad(C + shift, gamma)
    dirs = np.real(np.conj(Cgrad) @ xi)
    # d phi_k / d C_l = (gamma+1) (phi_k phi_l / f - phi_k delta_kl / C_k)
    dphi = (gamma + 1.0) * (phi * (phi @ dirs) / f - phi * dirs / (C + shift))
    return phi @ Chess + dphi @ Cgrad + _penalty_hessvec(C, Cgrad, Chess, xi, rho, u)


def penalized_hessvec_ee(cs: ConstraintSet, w, xi, rho, u):
    C, Cgrad = cs.values_and_grads(w)
    Chess = cs.hessvecs(xi)
    obj = (cs.p * 2.0 * (cs.d @ xi)) @ np.conj(cs.d)
    return obj + _penalty_hessvec(C, Cgrad, Chess, xi, rho, u)


class PowerMinFamily:
    """Max-min constraint objective; the smooth-min shift is frozen per anchor point."""

    def __init__(self, cs: ConstraintSet, gamma: float = 64.0, shift_tol: float = 1e-6):
        self.cs = cs
        self.gamma = gamma
        self.shift_tol = shift_tol

    def constraints(self, w):
        return self.cs.values(w)

    def score(self, w) -> float:
        return float(np.min(self.cs.values(w)))

    def objective(self, anchor, rho, u):
        shift = max(0.0, self.shift_tol - float(np.min(self.cs.values(anchor))))
        cs, gamma = self.cs, self.gamma
        return (lambda w: penalized_objective_powermin(cs, w, rho, u, gamma, shift),
                lambda w, xi: penalized_hessvec_powermin(cs, w, xi, rho, u, gamma, shift))


class EeFamily:
    def __init__(self, cs: ConstraintSet):
        self.cs = cs

    def constraints(self, w):
        return self.cs.values(w)

    def score(self, w) -> float:
        return float(self.cs.p @ self.cs.gains(w))

    def objective(self, anchor, rho, u):
        cs = self.cs
        return (lambda w: penalized_objective_ee(cs, w, rho, u),
                lambda w, xi: penalized_hessvec_ee(cs, w, xi, rho, u))


@dataclass
class PenaltyTrace:
    rho: list[float] = field(default_factory=list)
    u: list[float] = field(default_factory=list)
    violation: list[float] = field(default_factory=list)
    step: list[float] = field(default_factory=list)
    inner_iters: list[int] = field(default_factory=list)
    status: str = "running"

    @property
    def outer_iterations(self) -> int:
        return len(self.rho)


def exact_penalty_outer(family, w0: np.ndarray, pp: PenaltyParams = PenaltyParams()):
    """Outer loop of the exact penalty method with smoothing.

    Each round approximately maximizes the smoothed penalized objective from a
    warm start, shrinks the smoothing accuracy, and raises the penalty weight
    on the first round and whenever the worst violation reaches ``tau``.

    Returns ``(w, trace)``; ``trace.status`` is ``"converged"``,
    ``"max_outer"`` (best feasible iterate returned) or ``"infeasible"``.
    """
    w = ccm.normalize(np.asarray(w0, dtype=complex))
    rho, u = pp.rho0, pp.u0
    trace = PenaltyTrace()
    best_w, best_score = None, -np.inf

    for l in range(pp.max_outer):
        q, qh = family.objective(w, rho, u)

        def neg(x, q=q):
            val, grad = q(x)
            return -val, -grad

        if pp.solver == "trust_region":
            w_new, inner_trace = ccm.minimize_trust_region(neg, lambda x, xi, qh=qh: -qh(x, xi),
                                                           w, pp.trust)
        else:
            w_new, inner_trace = ccm.minimize(neg, w, pp.inner)
        violation = float(np.max(-family.constraints(w_new)))
        step = ccm.dist(w, w_new)
        trace.rho.append(rho)
        trace.u.append(u)
        trace.violation.append(violation)
        trace.step.append(step)
        trace.inner_iters.append(inner_trace.iterations)

        feasible = violation < pp.tau
        if feasible:
            score = family.score(w_new)
            if score > best_score:
                best_w, best_score = w_new, score
        if (step < pp.d_min or u <= pp.u_min) and feasible:
            trace.status = "converged"
            return w_new, trace

        u = max(pp.u_min, pp.theta_u * u)
        if l == 0 or violation >= pp.tau:
            rho *= pp.theta_rho
        w = w_new

    if best_w is not None:
        trace.status = "max_outer"
        return best_w, trace
    trace.status = "infeasible"
    log.debug("exact penalty loop ended infeasible (violation %.3g)", trace.violation[-1])
    return w, trace
