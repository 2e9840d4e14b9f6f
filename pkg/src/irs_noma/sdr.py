"""Semidefinite-relaxation beamformer: lifted gains, the two SDPs, rank-one rounding."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .eigen import eigh_jacobi
from .sdp import solve_unit_diag_sdp

log = logging.getLogger(__name__)


def build_lifted(ch, k: int) -> np.ndarray:
    """Lifted gain matrix ``B_k`` of size (L+1, L+1).

    With ``wbar = [w; 1]``, ``wbar^H B_k wbar + |v_k|^2`` equals the effective
    gain ``|g^T diag(w) h_k + v_k|^2``.
    """
    z = np.conj(ch.h[k] * ch.g)
    vk = ch.v[k]
    L = z.shape[0]
    B = np.zeros((L + 1, L + 1), dtype=complex)
    B[:L, :L] = np.outer(z, z.conj())
    B[:L, L] = z * vk
    B[L, :L] = z.conj() * np.conj(vk)
    return B


def build_all_lifted(ch) -> np.ndarray:
    return np.stack([build_lifted(ch, k) for k in range(ch.K)])


def lift(w: np.ndarray) -> np.ndarray:
    wbar = np.append(w, 1.0)
    return np.outer(wbar, wbar.conj())


@dataclass
class LiftedSolution:
    W: np.ndarray
    objective: float
    status: str
    slack: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _constraint_rows(B, v2, p, R_min, sigma2):
    """``tr(F_k W) + f0_k >= 0`` for every user (SIC order)."""
    B = np.asarray(B)
    p = np.asarray(p, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    target = 2.0 ** np.asarray(R_min, dtype=float) - 1.0
    K = B.shape[0]
    F = np.empty_like(B)
    f0 = np.empty(K)
    for k in range(K):
        tail = slice(k + 1, K)
        F[k] = p[k] * B[k] - target[k] * np.einsum("j,jab->ab", p[tail], B[tail])
        f0[k] = p[k] * v2[k] - target[k] * (p[tail] @ v2[tail] + sigma2)
    return F, f0


def solve_sdp_powermin(B, v2, p, R_min, sigma2: float = 1.0, tol: float = 1e-7) -> LiftedSolution:
    """Relaxed max-min slack problem: maximize ``alpha`` with every rate
    constraint holding with margin ``alpha`` over unit-diagonal PSD ``W``.

    ``alpha`` is solved for with the lower bound ``-1`` instead of zero so
    the problem keeps a strictly feasible interior even when the current
    phases are already optimal (optimum ``alpha = 0``).  A result with
    ``alpha`` clearly below zero, including one stuck at the bound, is
    reported as ``"infeasible"``.
    """
    F, f0 = _constraint_rows(B, v2, p, R_min, sigma2)
    K, n = F.shape[0], F.shape[1]
    # any M > 0 leaves an interior when some W reaches alpha >= 0; a loose M
    # badly scales the LP block, so keep it at the noise-normalized unit
    M = 1.0
    # tr(F_k W) + f0_k = (beta - M) + s_k with beta = alpha + M >= 0, s_k >= 0
    G = np.zeros((K, K + 1))
    G[:, 0] = -1.0
    G[:, 1:] = -np.eye(K)
    c = np.zeros(K + 1)
    c[0] = -1.0
    res = solve_unit_diag_sdp(np.zeros((n, n)), F, -f0 - M, c=c, G=G, tol=tol)
    alpha = float(res.x[0]) - M
    status = res.status
    if status == "optimal" and alpha < -1e-6 * (1.0 + float(np.abs(f0).max())):
        status = "infeasible"
    return LiftedSolution(W=res.X, objective=alpha, status=status, slack=res.x[1:])


def solve_sdp_ee(B, v2, p, R_min, sigma2: float = 1.0, tol: float = 1e-7) -> LiftedSolution:
    """Relaxed weighted received-power maximization under the rate constraints."""
    F, f0 = _constraint_rows(B, v2, p, R_min, sigma2)
    p = np.asarray(p, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    n = F.shape[1]
    const = float(p @ v2)
    objective_matrix = np.einsum("k,kab->ab", p, np.asarray(B))

    active = np.linalg.norm(F.reshape(F.shape[0], -1), axis=1) > 0
    if np.any(f0[~active] < -1e-12):
        return LiftedSolution(W=np.eye(n, dtype=complex), objective=-np.inf, status="infeasible")
    F, f0 = F[active], f0[active]
    m = F.shape[0]
    if m == 0 and np.linalg.norm(objective_matrix) == 0:
        W = np.eye(n, dtype=complex)
        return LiftedSolution(W=W, objective=const, status="optimal", slack=np.zeros(0))

    res = solve_unit_diag_sdp(-objective_matrix, F, -f0, c=np.zeros(m), G=-np.eye(m), tol=tol)
    obj = float(np.real(np.trace(objective_matrix @ res.X))) + const
    return LiftedSolution(W=res.X, objective=obj, status=res.status, slack=res.x)


def extract_rank_one(sol) -> np.ndarray:
    """Unit-modulus phases from the dominant eigenvector of a lifted solution.

    The eigenvector's global phase is fixed so that the auxiliary last entry is
    real positive before it is dropped.
    """
    W = sol.W if isinstance(sol, LiftedSolution) else np.asarray(sol)
    vals, vecs = eigh_jacobi(W)
    lam = max(float(vals[-1]), 0.0)
    w_hat = np.sqrt(lam) * vecs[:, -1]
    anchor = w_hat[-1]
    if np.abs(anchor) <= 1e-12 * max(np.abs(w_hat).max(), 1e-300):
        log.warning("rank-one extraction: last entry vanishes, fixing phase on largest entry")
        anchor = w_hat[np.argmax(np.abs(w_hat))]
    if np.abs(anchor) > 0:
        w_hat = w_hat * (np.conj(anchor) / np.abs(anchor))
    w = w_hat[:-1]
    mod = np.abs(w)
    safe = mod > 1e-300
    out = np.ones_like(w)
    out[safe] = w[safe] / mod[safe]
    return out
