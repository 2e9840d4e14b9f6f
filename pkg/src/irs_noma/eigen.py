"""Complex Hermitian eigendecomposition by cyclic Jacobi rotations.

Rotations are applied in round-robin (Brent-Luk) order so that the n/2
disjoint pairs of each round are rotated together with vectorized numpy ops.
"""
from __future__ import annotations

import numpy as np


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``range(n)`` (n even) covering every pair once over n-1 rounds."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def eigh_jacobi(A: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``.  Raises ``RuntimeError`` if that never happens.
    """
    A = np.array(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    n0 = A.shape[0]
    A = 0.5 * (A + A.conj().T)
    if n0 == 1:
        return np.real(np.diag(A)).copy(), np.eye(1, dtype=complex)
    n = n0 + (n0 % 2)
    if n != n0:
        A = np.pad(A, ((0, 1), (0, 1)))
    V = np.eye(n, dtype=complex)
    scale = np.linalg.norm(A)
    if scale == 0:
        return np.zeros(n0), np.eye(n0, dtype=complex)
    rounds = _round_robin(n)
    threshold = tol * scale

    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= threshold:
            break
        for p, q in rounds:
            b = A[p, q]
            mag = np.abs(b)
            active = mag > 1e-300
            if not np.any(active):
                continue
            a_pp = np.real(A[p, p])
            a_qq = np.real(A[q, q])
            phase = np.where(active, b / np.where(active, mag, 1.0), 1.0)
            theta = 0.5 * np.arctan2(2.0 * mag, a_qq - a_pp)
            c = np.cos(theta)
            s = np.sin(theta)
            ph_conj = np.conj(phase)
            # U = diag(1, conj(phase)) @ [[c, s], [-s, c]] on each (p, q) block
            Ap = A[:, p].copy()
            Aq = A[:, q]
            A[:, p] = c * Ap - s * ph_conj * Aq
            A[:, q] = s * Ap + c * ph_conj * Aq
            Rp = A[p, :].copy()
            Rq = A[q, :]
            A[p, :] = c[:, None] * Rp - (s * phase)[:, None] * Rq
            A[q, :] = s[:, None] * Rp + (c * phase)[:, None] * Rq
            Vp = V[:, p].copy()
            Vq = V[:, q]
            V[:, p] = c * Vp - s * ph_conj * Vq
            V[:, q] = s * Vp + c * ph_conj * Vq
    else:
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off > threshold * 1e3:
            raise RuntimeError("Jacobi sweeps did not converge")

    vals = np.real(np.diag(A))[:n0]
    vecs = V[:n0, :n0]
    if n != n0:
        # the padded index stays decoupled: drop its eigenpair
        keep = np.argsort(np.abs(V[n0, :]))[:n0]
        vals = np.real(np.diag(A))[keep]
        vecs = V[:n0, keep]
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]
