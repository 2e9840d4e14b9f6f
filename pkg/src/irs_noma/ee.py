"""Energy-efficiency maximization for uplink NOMA.

The power step is a Dinkelbach loop whose parametric sub-problem is solved by
bounded coordinate ascent; the phase step is one of several beamformers.
Powers are in watts and gains are SNR per watt (noise-normalized) unless a
``sigma2`` argument says otherwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import sdr
from .noma_power import AltOptResult, LoopParams, sic_rates, solve_power_lp
from .penalty import ConstraintSet, EeFamily, PenaltyParams, PowerMinFamily, exact_penalty_outer
from .scenario import ChannelRealization, ScenarioConfig, aligned_phases, effective_gains

log = logging.getLogger(__name__)

EE_BEAMFORMERS = ("sdr_obj", "manifold_obj", "manifold_maxmin", "aligned", "random")
# names shared with the power-minimization CLI options
EE_ALIASES = {"sdr": "sdr_obj", "manifold": "manifold_obj"}

LN2 = np.log(2.0)


class InfeasibleError(ValueError):
    """The rate targets cannot be met within the per-user power cap."""


def sum_rate(p, a, sigma2: float) -> float:
    """Single-log sum rate ``log2(1 + sum_k p_k a_k / sigma2)``."""
    return float(np.log2(1.0 + np.dot(p, a) / sigma2))


def ee_value(p, a, sigma2: float) -> float:
    total = float(np.sum(p))
    if not total > 0:
        raise ValueError("energy efficiency is undefined at zero total power")
    return sum_rate(p, a, sigma2) / total


def parametric_value(p, a, sigma2: float, beta: float) -> float:
    return sum_rate(p, a, sigma2) - beta * float(np.sum(p))


@dataclass
class PowerBounds:
    p_min: np.ndarray
    p_max: np.ndarray


def power_bounds(p, a, R_min, sigma2: float, P_max: float) -> PowerBounds:
    """Per-user box keeping every rate constraint satisfied at the other powers.

    ``p_min[k]`` makes constraint ``k`` bind; ``p_max[k]`` is the largest power
    that keeps constraints ``j < k`` (which see user ``k`` as interference)
    satisfied, capped at ``P_max``.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    target = 2.0 ** np.asarray(R_min, dtype=float) - 1.0
    received = p * a
    K = p.shape[0]
    tail = np.cumsum(received[::-1])[::-1]
    after = np.append(tail[1:], 0.0)
    p_min = target * (after + sigma2) / a
    p_max = np.full(K, float(P_max))
    for k in range(K):
        for j in range(k):
            if target[j] <= 0:
                continue
            # interference at j other than user k
            others = after[j] - received[k]
            cap = (received[j] / target[j] - others - sigma2) / a[k]
            p_max[k] = min(p_max[k], cap)
    return PowerBounds(p_min=np.maximum(p_min, 0.0), p_max=p_max)


def coordinate_update(k: int, p, a, beta: float, sigma2: float, bounds: PowerBounds) -> float:
    """Maximizer of the parametric objective along ``p_k``, clamped to the box."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    others = float(np.dot(p, a) - p[k] * a[k])
    if beta <= 0:
        p_star = np.inf
    else:
        p_star = 1.0 / (beta * LN2) - (others + sigma2) / a[k]
    lo, hi = bounds.p_min[k], bounds.p_max[k]
    return float(min(max(p_star, lo), max(hi, lo)))


def _rate_polytope(a, R_min, sigma2: float, P_max: float):
    """Feasible powers as ``G p <= h``: rate constraints, caps, nonnegativity."""
    K = a.shape[0]
    target = 2.0 ** np.asarray(R_min, dtype=float) - 1.0
    rate = np.zeros((K, K))
    for k in range(K):
        rate[k, k] = -a[k]
        rate[k, k + 1:] = target[k] * a[k + 1:]
    G = np.vstack([rate, np.eye(K), -np.eye(K)])
    h = np.concatenate([-target * sigma2, np.full(K, float(P_max)), np.zeros(K)])
    return G, h


def polytope_vertices(G, h, tol: float = 1e-9) -> np.ndarray:
    """All vertices of ``{x : G x <= h}`` by enumerating active sets (small sizes only)."""
    m, n = G.shape
    subsets = np.array(list(combinations(range(m), n)))
    A = G[subsets]
    b = h[subsets]
    det = np.linalg.det(A)
    scale = np.prod(np.linalg.norm(A, axis=2), axis=1)
    ok = np.abs(det) > 1e-12 * scale
    x = np.linalg.solve(A[ok], b[ok][..., None])[..., 0]
    slack = x @ G.T - h
    feasible = np.all(slack <= tol * (1.0 + np.abs(h)), axis=1)
    return x[feasible]


def _polygon_optimum(vertices, a, sigma2: float, beta: float) -> np.ndarray:
    """Maximize ``log2(1 + S/sigma2) - beta P`` over segments between vertex images."""
    S = vertices @ a
    P = vertices.sum(axis=1)
    i, j = np.triu_indices(len(S))
    dS, dP = S[j] - S[i], P[j] - P[i]
    lam = np.zeros_like(dS)
    with np.errstate(divide="ignore", invalid="ignore"):
        if beta > 0:
            # stationary point of the concave 1-D slice
            lam = (dS / (beta * LN2 * dP) - sigma2 - S[i]) / dS
        lam = np.where(np.isfinite(lam), np.clip(lam, 0.0, 1.0), 0.0)
    cands = np.concatenate([lam, np.zeros_like(lam), np.ones_like(lam)])
    ii, jj = np.tile(i, 3), np.tile(j, 3)
    Sc = S[ii] + cands * (S[jj] - S[ii])
    Pc = P[ii] + cands * (P[jj] - P[ii])
    best = int(np.argmax(np.log2(1.0 + Sc / sigma2) - beta * Pc))
    return (1.0 - cands[best]) * vertices[ii[best]] + cands[best] * vertices[jj[best]]


def solve_parametric(a, R_min, sigma2: float, beta: float, P_max: float,
                     tol: float = 1e-10, max_sweeps: int = 500, polish: bool = True) -> np.ndarray:
    """Maximize ``sum_rate(p) - beta * sum(p)`` over the rate-feasible box.

    Starts from the binding (minimum-power) point and sweeps users in SIC
    order, recomputing the bounds from the current iterate before each update,
    until a sweep moves ``p`` by less than ``tol`` relative.  Coordinate sweeps
    can stall where the rate constraints couple users, so with ``polish`` the
    result is compared with the exact optimum over the image of the feasible
    polytope in the (received power, total power) plane and the better point
    is returned.
    """
    a = np.asarray(a, dtype=float)
    p = solve_power_lp(a, R_min, sigma2)
    if np.any(p > P_max * (1.0 + 1e-12)):
        raise InfeasibleError(f"binding powers {p} exceed the cap {P_max}")
    K = a.shape[0]
    for _ in range(max_sweeps):
        p_old = p.copy()
        for k in range(K):
            bounds = power_bounds(p, a, R_min, sigma2, P_max)
            p[k] = coordinate_update(k, p, a, beta, sigma2, bounds)
        if np.linalg.norm(p - p_old) <= tol * max(np.linalg.norm(p), 1e-300):
            break
    if polish and K > 1:
        vertices = polytope_vertices(*_rate_polytope(a, R_min, sigma2, P_max))
        if len(vertices):
            q = np.clip(_polygon_optimum(vertices, a, sigma2, beta), 0.0, P_max)
            if parametric_value(q, a, sigma2, beta) > parametric_value(p, a, sigma2, beta):
                p = q
    return p


@dataclass
class DinkelbachState:
    beta: float = 0.0
    F: float = np.inf
    iterations: int = 0
    epsilon: float = 1e-8
    betas: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)


def dinkelbach(a, R_min, sigma2: float, P_max: float, eps: float = 1e-8,
               max_iters: int = 100) -> tuple[np.ndarray, DinkelbachState]:
    """EE-optimal powers for fixed gains.

    The returned state's ``beta`` is the ratio at the returned powers (one
    final ratio update is applied after the stopping test).
    """
    state = DinkelbachState(epsilon=eps)
    beta = 0.0
    p = None
    for _ in range(max_iters):
        state.betas.append(beta)
        p = solve_parametric(a, R_min, sigma2, beta, P_max)
        rate = sum_rate(p, a, sigma2)
        F = rate - beta * float(np.sum(p))
        state.values.append(F)
        state.iterations += 1
        state.F = F
        beta = rate / float(np.sum(p))
        if F <= eps:
            break
    state.beta = beta
    return p, state


def _ee_step(chn: ChannelRealization, p, R, w_prev, beamformer: str,
             penalty: PenaltyParams, sdp_tol: float):
    cs = ConstraintSet.from_channel(chn, p, R, 1.0)
    if beamformer == "sdr_obj":
        sol = sdr.solve_sdp_ee(sdr.build_all_lifted(chn), np.abs(chn.v) ** 2, p, R, 1.0, tol=sdp_tol)
        if not sol.ok:
            log.info("EE SDP failed (%s); keeping previous phases", sol.status)
            return None
        return sdr.extract_rank_one(sol)
    if beamformer == "manifold_obj":
        family = EeFamily(cs)
    else:
        family = PowerMinFamily(cs, gamma=penalty.gamma, shift_tol=penalty.shift_tol)
    w, trace = exact_penalty_outer(family, w_prev, penalty)
    return None if trace.status == "infeasible" else w


def alt_opt_ee(ch: ChannelRealization, cfg: ScenarioConfig, beamformer: str = "manifold_maxmin",
               w0: np.ndarray | None = None, loop: LoopParams = LoopParams(),
               penalty: PenaltyParams = PenaltyParams(), eps: float = 1e-8) -> AltOptResult:
    """Alternate Dinkelbach power control with a phase update.

    A new phase vector is kept only when its binding powers respect ``P_max``
    and the resulting EE is not lower than the current one.  ``aligned`` and
    ``random`` freeze the phases, giving a single Dinkelbach call.
    """
    beamformer = EE_ALIASES.get(beamformer, beamformer)
    if beamformer not in EE_BEAMFORMERS:
        raise ValueError(f"unknown beamformer {beamformer!r}")
    chn = ch.normalized(cfg.sigma2)
    R = ch.user_values(cfg.R_min)
    if beamformer == "aligned":
        w = aligned_phases(ch, 0)
    else:
        if w0 is None:
            raise ValueError("w0 is required for this beamformer")
        w = np.asarray(w0, dtype=complex)

    a = effective_gains(chn, w)
    p, _ = dinkelbach(a, R, 1.0, cfg.P_max, eps)
    ee = ee_value(p, a, 1.0)
    ee_values, sum_powers = [ee], [float(p.sum())]
    rejected = 0
    iterations = 1
    frozen = beamformer in ("aligned", "random")

    while not frozen and iterations < loop.max_iters:
        w_new = _ee_step(chn, p, R, w, beamformer, penalty, loop.sdp_tol)
        iterations += 1
        if w_new is None:
            rejected += 1
            break
        a_new = effective_gains(chn, w_new)
        try:
            p_new, _ = dinkelbach(a_new, R, 1.0, cfg.P_max, eps)
        except (InfeasibleError, ValueError):
            rejected += 1
            break
        ee_new = ee_value(p_new, a_new, 1.0)
        if ee_new < ee:
            rejected += 1
            break
        change = (ee_new - ee) / ee
        w, p, a, ee = w_new, p_new, a_new, ee_new
        ee_values.append(ee)
        sum_powers.append(float(p.sum()))
        if change < loop.rel_tol:
            break

    return AltOptResult(p=p, w=w, sum_powers=sum_powers, rates=sic_rates(p, a, 1.0),
                        iterations=iterations, beamformer=beamformer, ee_values=ee_values,
                        rejected_steps=rejected)
