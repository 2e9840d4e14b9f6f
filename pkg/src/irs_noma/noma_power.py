"""Uplink NOMA sum-power minimization by alternating power / phase updates."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import sdr
from .penalty import ConstraintSet, PenaltyParams, PowerMinFamily, exact_penalty_outer
from .scenario import ChannelRealization, ScenarioConfig, aligned_phases, effective_gains

log = logging.getLogger(__name__)

POWERMIN_BEAMFORMERS = ("sdr", "manifold", "manifold_maxmin", "aligned", "random")


@dataclass(frozen=True)
class LoopParams:
    rel_tol: float = 1e-4
    max_iters: int = 30
    sdp_tol: float = 1e-7


@dataclass
class AltOptResult:
    p: np.ndarray
    w: np.ndarray
    sum_powers: list[float]
    rates: np.ndarray
    iterations: int
    beamformer: str
    ee_values: list[float] = field(default_factory=list)
    rejected_steps: int = 0
    status: str = "ok"

    @property
    def sum_power(self) -> float:
        return float(np.sum(self.p))


def solve_power_lp(a, R_min, sigma2: float) -> np.ndarray:
    """Minimum sum power meeting every SIC rate target with equality.

    Back-substitution from the last decoded user, which sees no interference.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("effective gains must be positive")
    target = 2.0 ** np.asarray(R_min, dtype=float) - 1.0
    K = a.shape[0]
    p = np.zeros(K)
    interference = 0.0
    for k in range(K - 1, -1, -1):
        p[k] = target[k] * (interference + sigma2) / a[k]
        interference += p[k] * a[k]
    return p


def sic_rates(p, a, sigma2: float) -> np.ndarray:
    """Per-user SIC rates in bits/s/Hz for users in decoding order."""
    received = np.asarray(p, dtype=float) * np.asarray(a, dtype=float)
    tail = np.cumsum(received[::-1])[::-1]
    interference = np.append(tail[1:], 0.0)
    return np.log2(1.0 + received / (interference + sigma2))


def manifold_powermin_step(ch: ChannelRealization, p, R_min, w_prev, penalty: PenaltyParams):
    """Phase update maximizing the smallest rate-constraint margin."""
    cs = ConstraintSet.from_channel(ch, p, R_min, 1.0)
    family = PowerMinFamily(cs, gamma=penalty.gamma, shift_tol=penalty.shift_tol)
    w, trace = exact_penalty_outer(family, w_prev, penalty)
    if trace.status == "infeasible":
        return None
    return w


def sdr_powermin_step(ch: ChannelRealization, p, R_min, w_prev, tol: float = 1e-7):
    B = sdr.build_all_lifted(ch)
    sol = sdr.solve_sdp_powermin(B, np.abs(ch.v) ** 2, p, R_min, 1.0, tol=tol)
    if not sol.ok:
        log.info("SDP w-step failed (%s); keeping previous phases", sol.status)
        return None
    return sdr.extract_rank_one(sol)


def alt_opt_powermin(ch: ChannelRealization, cfg: ScenarioConfig, beamformer: str = "manifold",
                     w0: np.ndarray | None = None, loop: LoopParams = LoopParams(),
                     penalty: PenaltyParams = PenaltyParams()) -> AltOptResult:
    """Alternate the closed-form power LP with a phase update.

    ``ch`` holds raw (watt-scale) channels in SIC order; optimization runs on
    noise-normalized copies.  A phase update is kept only if the power LP at
    the new phases does not raise the sum power, so the sum-power sequence is
    non-increasing by construction.  ``aligned`` and ``random`` freeze the
    phases (aligned to the first SIC user, or ``w0``).
    """
    if beamformer not in POWERMIN_BEAMFORMERS:
        raise ValueError(f"unknown beamformer {beamformer!r}")
    chn = ch.normalized(cfg.sigma2)
    R = ch.user_values(cfg.R_min)
    if beamformer == "aligned":
        w = aligned_phases(ch, 0)
    else:
        if w0 is None:
            raise ValueError("w0 is required for this beamformer")
        w = np.asarray(w0, dtype=complex)

    p = solve_power_lp(effective_gains(chn, w), R, 1.0)
    sum_powers = [float(p.sum())]
    rejected = 0
    iterations = 1
    frozen = beamformer in ("aligned", "random")

    while not frozen and iterations < loop.max_iters:
        if beamformer == "sdr":
            w_new = sdr_powermin_step(chn, p, R, w, loop.sdp_tol)
        else:
            w_new = manifold_powermin_step(chn, p, R, w, penalty)
        iterations += 1
        if w_new is None:
            rejected += 1
            break
        p_new = solve_power_lp(effective_gains(chn, w_new), R, 1.0)
        if p_new.sum() > p.sum():
            rejected += 1
            break
        change = (p.sum() - p_new.sum()) / p.sum()
        w, p = w_new, p_new
        sum_powers.append(float(p.sum()))
        if change < loop.rel_tol:
            break

    return AltOptResult(p=p, w=w, sum_powers=sum_powers,
                        rates=sic_rates(p, effective_gains(chn, w), 1.0),
                        iterations=iterations, beamformer=beamformer, rejected_steps=rejected)
