"""Small dense primal-dual interior-point solver for unit-diagonal SDPs.

Solves

    min  Re tr(C X) + c . x
    s.t. Re tr(F_i X) + G_i . x = b_i,   i = 1..m
         X_jj = 1,                       j = 1..n
         X Hermitian PSD,  x >= 0

with the HKM search direction and Mehrotra predictor-corrector steps.  The
unit-diagonal rows are handled in closed form when building the Schur
complement, so the cost per iteration is O(m n^3) for the m dense rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SdpResult:
    X: np.ndarray
    x: np.ndarray
    y: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _herm(M):
    return 0.5 * (M + M.conj().T)


def _max_step(M: np.ndarray, dM: np.ndarray) -> float:
    """Largest t <= 1 keeping ``M + t dM`` positive definite (M already PD)."""
    if not np.all(np.isfinite(dM)):
        return 0.0
    try:
        Lc = np.linalg.cholesky(M)
        Linv = np.linalg.inv(Lc)
        lam_min = np.linalg.eigvalsh(_herm(Linv @ dM @ Linv.conj().T))[0]
    except np.linalg.LinAlgError:
        return 0.0
    return 1.0 if lam_min >= 0 else min(1.0, -1.0 / lam_min)


def _max_step_lp(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def solve_unit_diag_sdp(C, F, b, c=None, G=None, tol: float = 1e-7,
                        max_iter: int = 100, step_fraction: float = 0.98) -> SdpResult:
    """Interior-point solve; see module docstring for the problem form.

    ``F`` has shape (m, n, n) (Hermitian), ``G`` shape (m, n_lp), ``c`` shape
    (n_lp,).  Rows of the equality system are rescaled internally to unit
    norm.  ``status`` is ``"optimal"`` when relative primal/dual residuals and
    the relative duality gap are all at most ``tol``.
    """
    C = _herm(np.asarray(C, dtype=complex))
    n = C.shape[0]
    F = np.asarray(F, dtype=complex).reshape(-1, n, n)
    m = F.shape[0]
    b = np.asarray(b, dtype=float).reshape(m)
    if G is None:
        G = np.zeros((m, 0))
        c = np.zeros(0)
    G = np.asarray(G, dtype=float)
    if G.ndim != 2:
        G = G.reshape(m, -1)
    c = np.asarray(c, dtype=float).reshape(-1)
    n_lp = G.shape[1]

    F = 0.5 * (F + np.conj(np.transpose(F, (0, 2, 1))))
    row_norm = np.sqrt(np.sum(np.abs(F) ** 2, axis=(1, 2)) + np.sum(G ** 2, axis=1))
    row_norm[row_norm == 0] = 1.0
    F = F / row_norm[:, None, None]
    G = G / row_norm[:, None]
    b = b / row_norm
    obj_scale = max(1.0, np.linalg.norm(C), np.linalg.norm(c))
    C = C / obj_scale
    c = c / obj_scale

    # total constraint count: m dense rows + n diagonal rows
    b_full = np.concatenate([b, np.ones(n)])
    X = np.eye(n, dtype=complex)
    x = np.ones(n_lp)
    y = np.zeros(m + n)
    Z = np.eye(n, dtype=complex) * max(1.0, np.sqrt(n))
    z = np.ones(n_lp) * max(1.0, np.sqrt(n))
    nu = n + n_lp
    b_norm = 1.0 + np.linalg.norm(b_full)
    c_norm = 1.0 + np.linalg.norm(C) + np.linalg.norm(c)

    def A_op(Xm, xv):
        dense = np.real(np.einsum("kij,ji->k", F, Xm)) + G @ xv
        return np.concatenate([dense, np.real(np.diag(Xm))])

    def At_op(yv):
        M = np.einsum("k,kij->ij", yv[:m], F) + np.diag(yv[m:]).astype(complex)
        return M, G.T @ yv[:m]

    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        Aty_M, Aty_v = At_op(y)
        rp = b_full - A_op(X, x)
        Rd = C - Aty_M - Z
        rd = c - Aty_v - z
        pobj = float(np.real(np.trace(C @ X)) + c @ x)
        dobj = float(b_full @ y)
        mu = (float(np.real(np.sum(X * Z.T))) + float(x @ z)) / nu
        pres = np.linalg.norm(rp) / b_norm
        dres = (np.linalg.norm(Rd) + np.linalg.norm(rd)) / c_norm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if pres <= tol and dres <= tol and gap <= tol:
            status = "optimal"
            break
        if not np.all(np.isfinite([pobj, dobj, pres, dres, mu])):
            status = "numerical_error"
            break

        try:
            Zinv = np.linalg.inv(Z)
        except np.linalg.LinAlgError:
            status = "numerical_error"
            break
        Zinv = _herm(Zinv)
        # Schur complement M_ij = Re tr(A_i X A_j Z^-1) + G_i diag(x/z) G_j
        XF = np.einsum("ij,kjl->kil", X, F)
        XFZ = np.einsum("kil,lm->kim", XF, Zinv)
        M = np.empty((m + n, m + n))
        M[:m, :m] = np.real(np.einsum("kij,lji->kl", XFZ, F))
        M[:m, m:] = np.real(np.einsum("kii->ki", XFZ))
        M[m:, :m] = M[:m, m:].T
        M[m:, m:] = np.real(X * Zinv.T)
        if n_lp:
            M[:m, :m] += (G * (x / z)) @ G.T
        M = 0.5 * (M + M.T)
        try:
            chol = np.linalg.cholesky(M + 1e-14 * np.trace(M) / (m + n) * np.eye(m + n))
        except np.linalg.LinAlgError:
            status = "numerical_error"
            break

        def direction(sig_mu, corr_XZ=None, corr_xz=None):
            # Delta X = (sig_mu I - XZ - X dZ - corr) Z^-1, dZ = Rd - At(dy)
            R_mat = sig_mu * Zinv - X - X @ Rd @ Zinv
            if corr_XZ is not None:
                R_mat = R_mat - corr_XZ @ Zinv
            r_lp = (sig_mu - x * z - x * rd) / z
            if corr_xz is not None:
                r_lp = r_lp - corr_xz / z
            rhs = rp - A_op(R_mat, r_lp)
            dy = np.linalg.solve(chol.conj().T, np.linalg.solve(chol, rhs))
            dZ_M, dz_v = At_op(dy)
            dZ = Rd - dZ_M
            dz = rd - dz_v
            dX = _herm(R_mat + X @ dZ_M @ Zinv)
            dx = r_lp + x * dz_v / z
            return dX, dx, dy, _herm(dZ), dz

        dXa, dxa, dya, dZa, dza = direction(0.0)
        ap = min(_max_step(X, dXa), _max_step_lp(x, dxa))
        ad = min(_max_step(Z, dZa), _max_step_lp(z, dza))
        mu_aff = (float(np.real(np.sum((X + ap * dXa) * (Z + ad * dZa).T)))
                  + float((x + ap * dxa) @ (z + ad * dza))) / nu
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))
        dX, dx, dy, dZ, dz = direction(sigma * mu, dXa @ dZa, dxa * dza)

        ap = step_fraction * min(_max_step(X, dX), _max_step_lp(x, dx))
        ad = step_fraction * min(_max_step(Z, dZ), _max_step_lp(z, dz))
        if ap <= 0.0 and ad <= 0.0:
            # iterates left the cone interior numerically; no progress possible
            status = "numerical_error"
            break
        ap, ad = min(1.0, ap), min(1.0, ad)
        X = _herm(X + ap * dX)
        x = x + ap * dx
        y = y + ad * dy
        Z = _herm(Z + ad * dZ)
        z = z + ad * dz

    pobj = float(np.real(np.trace(C @ X)) + c @ x) * obj_scale
    dobj = float(b_full @ y) * obj_scale
    y_out = y.copy()
    y_out[:m] = y[:m] / row_norm * obj_scale
    y_out[m:] = y[m:] * obj_scale
    return SdpResult(X=X, x=x, y=y_out, primal_objective=pobj, dual_objective=dobj,
                     primal_residual=float(pres), dual_residual=float(dres), gap=float(gap),
                     iterations=it, status=status)
