"""Complex circle manifold geometry and a line-search Riemannian solver.

Points are complex arrays ``w`` with ``|w_i| = 1``.  Tangent vectors at ``w``
satisfy ``Re(xi * conj(w)) = 0`` elementwise.  The metric is the one inherited
from the embedding, ``<x, y> = Re(x^H y)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


class StepTooLong(ArithmeticError):
    """A retraction hit ``w_i + xi_i = 0``; the caller should shrink the step."""


def inner(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.real(np.vdot(x, y)))


def norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def normalize(z: np.ndarray) -> np.ndarray:
    """Entrywise phase of ``z``; a zero entry maps to phase 0."""
    # via the angle so subnormal entries do not overflow
    return np.exp(1j * np.angle(z))


def is_point(w: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.all(np.abs(np.abs(w) - 1.0) <= tol))


def project_tangent(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - np.real(v * np.conj(w)) * w


def riemannian_grad(w: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    """Riemannian gradient from a Wirtinger-convention Euclidean gradient."""
    return project_tangent(w, egrad)


def retract(w: np.ndarray, xi: np.ndarray) -> np.ndarray:
    z = w + xi
    mod = np.abs(z)
    if np.any(mod <= 1e-300):
        raise StepTooLong("retraction through the origin")
    return z / mod


def transport(w_new: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return project_tangent(w_new, xi)


def dist(w1: np.ndarray, w2: np.ndarray) -> float:
    """Euclidean distance in the embedding space."""
    return norm(w1 - w2)


@dataclass(frozen=True)
class CcmSolverParams:
    """Line-search solver settings.

    ``method`` is ``"gd"`` (steepest descent) or ``"cg"`` (Polak-Ribiere+
    conjugate gradient with projection transport).  With ``adaptive_step`` the
    first trial step of each iteration is twice the last accepted one.  Failed
    Armijo trials shrink the step by quadratic interpolation, clipped to
    ``[0.1, backtrack]`` times the current step.
    """

    grad_tol: float = 1e-6
    max_iters: int = 500
    c1: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 60
    method: str = "gd"
    adaptive_step: bool = True

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.c1 < 1:
            raise ValueError("c1 must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must lie in (0, 1)")
        if self.method not in ("gd", "cg"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class SolverTrace:
    values: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    steps: list[float] = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.steps)


def _checked(fun: Objective, w: np.ndarray) -> tuple[float, np.ndarray]:
    q, egrad = fun(w)
    q = float(q)
    if not np.isfinite(q) or not np.all(np.isfinite(egrad)):
        raise FloatingPointError(f"objective not finite at iterate (Q={q!r})")
    return q, egrad


def _next_trial(t: float, q: float, slope: float, q_try: float, backtrack: float) -> float:
    """Minimizer of the quadratic through ``q``, ``slope`` and ``q_try``, safeguarded."""
    curv = q_try - q - slope * t
    if not np.isfinite(q_try) or curv <= 0:
        return backtrack * t
    return float(np.clip(-slope * t * t / (2.0 * curv), 0.1 * t, backtrack * t))


def minimize(fun: Objective, w0: np.ndarray, params: CcmSolverParams = CcmSolverParams()):
    """Minimize ``fun`` over the complex circle manifold.

    ``fun(w)`` returns ``(Q, egrad)`` where ``egrad`` is the Wirtinger gradient
    ``dQ/dRe(w) + 1j dQ/dIm(w)``.  Trial points with non-finite ``Q`` are
    treated as failed Armijo tests; a non-finite value at an accepted iterate
    raises ``FloatingPointError``.

    Returns the final point and a :class:`SolverTrace`.
    """
    w = normalize(np.asarray(w0, dtype=complex))
    q, egrad = _checked(fun, w)
    rgrad = riemannian_grad(w, egrad)
    gnorm = norm(rgrad)
    trace = SolverTrace(values=[q], grad_norms=[gnorm])
    direction = -rgrad
    step = params.initial_step

    for _ in range(params.max_iters):
        if gnorm <= params.grad_tol:
            trace.status = "converged"
            return w, trace
        slope = inner(rgrad, direction)
        if slope >= 0:
            direction = -rgrad
            slope = -gnorm ** 2

        t = step
        accepted = False
        for _ in range(params.max_backtracks):
            try:
                w_try = retract(w, t * direction)
            except StepTooLong:
                t *= params.backtrack
                continue
            q_try, g_try = fun(w_try)
            if np.isfinite(q_try) and q_try <= q + params.c1 * t * slope:
                accepted = True
                break
            t = _next_trial(t, q, slope, q_try, params.backtrack)
        if not accepted:
            trace.status = "linesearch_failed"
            return w, trace

        if not np.all(np.isfinite(g_try)):
            raise FloatingPointError("gradient not finite at accepted iterate")
        w_prev_grad = rgrad
        w, q = w_try, float(q_try)
        rgrad = riemannian_grad(w, g_try)
        gnorm = norm(rgrad)
        trace.values.append(q)
        trace.grad_norms.append(gnorm)
        trace.steps.append(t)

        if params.method == "cg":
            old_g = transport(w, w_prev_grad)
            old_d = transport(w, direction)
            beta = max(0.0, inner(rgrad, rgrad - old_g) / max(inner(w_prev_grad, w_prev_grad), 1e-300))
            direction = -rgrad + beta * old_d
        else:
            direction = -rgrad
        step = 2.0 * t if params.adaptive_step else params.initial_step

    trace.status = "converged" if gnorm <= params.grad_tol else "max_iters"
    return w, trace


def riemannian_hess(w: np.ndarray, egrad: np.ndarray, ehess_xi: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Riemannian Hessian along tangent ``xi`` from Euclidean derivatives."""
    return project_tangent(w, ehess_xi - np.real(egrad * np.conj(w)) * xi)


@dataclass(frozen=True)
class TrustRegionParams:
    grad_tol: float = 1e-6
    max_iters: int = 200
    max_inner: int = 0
    accept_ratio: float = 0.1
    kappa: float = 0.1
    theta: float = 1.0
    min_radius: float = 1e-14

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")


def _truncated_cg(hess, grad, radius, max_inner, kappa, theta):
    """Steihaug-Toint truncated CG for the trust-region model."""
    eta = np.zeros_like(grad)
    h_eta = np.zeros_like(grad)
    r = grad.copy()
    r0 = norm(r)
    d = -r
    rr = inner(r, r)
    boundary = False
    for _ in range(max_inner):
        hd = hess(d)
        dhd = inner(d, hd)
        alpha = rr / dhd if dhd > 0 else np.inf
        eta_try = eta + alpha * d if np.isfinite(alpha) else None
        if dhd <= 0 or norm(eta_try) >= radius:
            # step to the boundary along d
            ed, dd, ee = inner(eta, d), inner(d, d), inner(eta, eta)
            tau = (-ed + np.sqrt(ed * ed + dd * (radius * radius - ee))) / dd
            eta = eta + tau * d
            h_eta = h_eta + tau * hd
            boundary = True
            break
        eta = eta_try
        h_eta = h_eta + alpha * hd
        r = r + alpha * hd
        rnorm = norm(r)
        if rnorm <= r0 * min(r0 ** theta, kappa):
            break
        rr_new = inner(r, r)
        d = -r + (rr_new / rr) * d
        rr = rr_new
    return eta, h_eta, boundary


def minimize_trust_region(fun: Objective, hessvec, w0: np.ndarray,
                          params: TrustRegionParams = TrustRegionParams()):
    """Riemannian trust-region minimization with a truncated-CG inner solver.

    ``hessvec(w, xi)`` returns the Euclidean (Wirtinger-convention) Hessian of
    the objective applied to ``xi``.  Steps are accepted only when the actual
    decrease is a fixed fraction of the model decrease, so accepted values are
    non-increasing.
    """
    w = normalize(np.asarray(w0, dtype=complex))
    q, egrad = _checked(fun, w)
    rgrad = riemannian_grad(w, egrad)
    gnorm = norm(rgrad)
    trace = SolverTrace(values=[q], grad_norms=[gnorm])
    max_radius = np.pi * np.sqrt(w.size)
    radius = max_radius / 8.0
    max_inner = params.max_inner or 2 * w.size

    for _ in range(params.max_iters):
        if gnorm <= params.grad_tol:
            trace.status = "converged"
            return w, trace
        if radius < params.min_radius:
            trace.status = "radius_collapsed"
            return w, trace

        def hess(xi, w=w, egrad=egrad):
            return riemannian_hess(w, egrad, hessvec(w, xi), xi)

        eta, h_eta, boundary = _truncated_cg(hess, rgrad, radius, max_inner,
                                             params.kappa, params.theta)
        model_decrease = -(inner(rgrad, eta) + 0.5 * inner(eta, h_eta))
        try:
            w_try = retract(w, eta)
            q_try, g_try = fun(w_try)
        except StepTooLong:
            q_try, g_try = np.inf, None
        if model_decrease <= 0:
            ratio = -np.inf
        else:
            ratio = (q - q_try) / model_decrease if np.isfinite(q_try) else -np.inf

        if ratio < 0.25:
            radius *= 0.25
        elif ratio > 0.75 and boundary:
            radius = min(2.0 * radius, max_radius)

        if ratio > params.accept_ratio and q_try <= q:
            if not np.all(np.isfinite(g_try)):
                raise FloatingPointError("gradient not finite at accepted iterate")
            w, q = w_try, float(q_try)
            egrad = g_try
            rgrad = riemannian_grad(w, egrad)
            gnorm = norm(rgrad)
            trace.values.append(q)
            trace.grad_norms.append(gnorm)
            trace.steps.append(norm(eta))

    trace.status = "converged" if gnorm <= params.grad_tol else "max_iters"
    return w, trace
