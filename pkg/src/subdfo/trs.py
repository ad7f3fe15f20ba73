"""Trust-region subproblem solvers in subspace coordinates.

Provides the certified Cauchy (steepest-descent) and negative-curvature
steps, an exact eigendecomposition-based solver for small dimensions with a
truncated-CG fallback for larger ones, and the acceptance ratio. All steps
respect the ball constraint and carry directly verified decrease flags.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolationError
from .interp import SubspaceModel
from .numerics import lex_positive, min_eigenpair

# Dimension threshold below which the exact eigendecomposition solver is used.
EXACT_TRS_MAX_DIM = 50

# Ball-constraint slack and certificate slack, both pure roundoff allowances.
BALL_SLACK = 1e-12
CERT_SLACK = 1e-12


@dataclass(frozen=True)
class TrsResult:
    """A trust-region step with its predicted decrease and certificates."""

    step: np.ndarray
    predicted_decrease: float
    kind: str  # cauchy | eigen | refined
    certified_first_order: bool
    certified_second_order: bool


def _decrease(model: SubspaceModel, step: np.ndarray) -> float:
    return -float(model.gradient @ step + 0.5 * step @ (model.hessian @ step))


def _flags(dec: float, delta: float, gnorm: float, hnorm: float, tau: float):
    """Directly evaluate both decrease certificates for a given step."""
    slack = CERT_SLACK * max(1.0, abs(dec))
    first = gnorm > 0.0 and dec + slack >= 0.5 * gnorm * min(
        delta, gnorm / max(hnorm, 1.0)
    )
    second = tau > 0.0 and dec + slack >= 0.5 * tau * delta**2
    return first, second


def _certify(model: SubspaceModel, delta: float, dec: float):
    gnorm = float(np.linalg.norm(model.gradient))
    hnorm = float(np.linalg.norm(model.hessian, 2)) if model.dim else 0.0
    lam, _ = min_eigenpair(model.hessian)
    return _flags(dec, delta, gnorm, hnorm, max(-lam, 0.0))


def cauchy_step(model: SubspaceModel, delta: float) -> TrsResult:
    """Best step along the negative model gradient within the ball.

    A zero gradient yields a zero step with both certificates False; callers
    needing progress at such points must use eigen_step.
    """
    if delta <= 0.0:
        raise ContractViolationError("delta must be positive")
    g = model.gradient
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return TrsResult(np.zeros(model.dim), 0.0, "cauchy", False, False)
    curv = float(g @ (model.hessian @ g))
    t_max = delta / gnorm
    if curv <= 0.0:
        t = t_max
    else:
        t = min(gnorm**2 / curv, t_max)
    step = -t * g
    dec = _decrease(model, step)
    first, second = _certify(model, delta, dec)
    return TrsResult(step, dec, "cauchy", first, second)


def eigen_step(model: SubspaceModel, delta: float) -> TrsResult:
    """Boundary step along the most negative curvature direction.

    The sign is chosen so the gradient term does not increase the model;
    exact ties go to the lexicographically positive eigenvector. When the
    model Hessian has no negative curvature the step is zero and flagged.
    """
    if delta <= 0.0:
        raise ContractViolationError("delta must be positive")
    lam, v = min_eigenpair(model.hessian)
    tau = max(-lam, 0.0)
    if tau == 0.0:
        return TrsResult(np.zeros(model.dim), 0.0, "eigen", False, False)
    inner = float(model.gradient @ v)
    if abs(inner) > 1e-12 * max(1.0, float(np.linalg.norm(model.gradient))):
        v = -v if inner > 0 else v
    step = delta * v
    dec = _decrease(model, step)
    first, second = _certify(model, delta, dec)
    return TrsResult(step, dec, "eigen", first, second)


def _secular_root(c: np.ndarray, w: np.ndarray, lam_lo: float, delta: float) -> float:
    """Solve sum c_i / (w_i + lam)^2 = delta^2 for lam in (lam_lo, inf).

    ``c`` holds squared gradient components in the eigenbasis; the norm is
    strictly decreasing in lam, so a safeguarded Newton iteration on
    1/norm(lam) - 1/delta converges quickly from the bracketing interval.
    """
    target = delta * delta

    def n2(lam):
        d = w + lam
        with np.errstate(divide="ignore", over="ignore"):
            val = float(np.sum(c / (d * d)))
        return val if math.isfinite(val) else math.inf

    hi = lam_lo + max(1.0, math.sqrt(float(np.sum(c))) / delta)
    while n2(hi) > target:
        hi = lam_lo + 2.0 * (hi - lam_lo)
    lo = lam_lo
    lam = hi
    for _ in range(100):
        d = w + lam
        n2v = float(np.sum(c / (d * d)))
        nv = math.sqrt(n2v)
        if abs(nv - delta) <= 1e-13 * delta:
            break
        if nv > delta:
            lo = lam
        else:
            hi = lam
        # Newton on phi(lam) = 1/nv - 1/delta; phi' = sum c/(w+lam)^3 / nv^3
        dphi = float(np.sum(c / (d * d * d))) / (n2v * nv)
        if dphi <= 0.0:
            lam = 0.5 * (lo + hi)
            continue
        step = (1.0 / nv - 1.0 / delta) / dphi
        lam_new = lam - step
        if not (lo < lam_new < hi):
            lam_new = 0.5 * (lo + hi)
        if lam_new == lam:
            break
        lam = lam_new
    return lam


def _exact_trs_eig(g: np.ndarray, w: np.ndarray, v: np.ndarray, delta: float) -> np.ndarray:
    """Global ball minimizer from a precomputed eigendecomposition of H."""
    p = g.size
    gt = v.T @ g
    gscale = max(1.0, float(np.linalg.norm(gt)))
    lam_bar = max(0.0, -float(w[0]))

    if w[0] > 0:
        s0 = -gt / w
        if float(s0 @ s0) <= delta * delta:
            return v @ s0

    active = np.abs(w + lam_bar) <= 1e-12 * max(1.0, abs(float(w[0])))
    if float(np.linalg.norm(gt[active])) <= 1e-13 * gscale:
        s_in = np.zeros(p)
        inactive = ~active
        s_in[inactive] = -gt[inactive] / (w[inactive] + lam_bar)
        nrm2 = float(s_in @ s_in)
        if nrm2 <= delta * delta:
            if lam_bar == 0.0:
                return v @ s_in  # singular PSD case, interior solution
            # Hard case: fill to the boundary along the bottom eigenvector.
            fill = math.sqrt(max(delta * delta - nrm2, 0.0))
            u = lex_positive(v[:, 0])
            base = v @ s_in
            plus, minus = base + fill * u, base - fill * u
            mp = float(g @ plus)
            mm = float(g @ minus)
            return plus if mp <= mm else minus  # curvature terms are equal

    lam = _secular_root(gt * gt, w, lam_bar, delta)
    s = -gt / (w + lam)
    return v @ s


def _exact_trs(g: np.ndarray, h: np.ndarray, delta: float) -> np.ndarray:
    """Global ball minimizer of g^T s + 0.5 s^T H s via eigendecomposition."""
    w, v = np.linalg.eigh(0.5 * (h + h.T))
    return _exact_trs_eig(g, w, v, delta)


def _steihaug_cg(g: np.ndarray, h: np.ndarray, delta: float) -> np.ndarray:
    """Truncated CG for larger dimensions; exits on the boundary or curvature."""
    p = g.size
    s = np.zeros(p)
    r = g.copy()
    d = -r
    rr = float(r @ r)
    if rr == 0.0:
        return s
    tol = 1e-10 * math.sqrt(rr)
    for _ in range(2 * p):
        hd = h @ d
        curv = float(d @ hd)
        if curv <= 0.0:
            return s + _boundary_tau(s, d, delta) * d
        alpha = rr / curv
        if np.linalg.norm(s + alpha * d) >= delta:
            return s + _boundary_tau(s, d, delta) * d
        s = s + alpha * d
        r = r + alpha * hd
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= tol:
            break
        d = -r + (rr_new / rr) * d
        rr = rr_new
    return s


def _boundary_tau(s: np.ndarray, d: np.ndarray, delta: float) -> float:
    """Positive root of ||s + tau d|| = delta."""
    a = float(d @ d)
    b = 2.0 * float(s @ d)
    c = float(s @ s) - delta**2
    disc = max(b * b - 4.0 * a * c, 0.0)
    return (-b + math.sqrt(disc)) / (2.0 * a)


def solve_trs(model: SubspaceModel, delta: float, mode: str = "first_order") -> TrsResult:
    """Approximate ball minimizer dominating the certified elementary steps.

    In first_order mode the result's decrease dominates the Cauchy step's;
    in second_order mode it dominates both the Cauchy and the
    negative-curvature step. A refinement solve (exact for small dimension,
    truncated CG otherwise) is kept only when it improves the decrease.
    """
    if mode not in ("first_order", "second_order"):
        raise ContractViolationError(f"unknown TRS mode {mode!r}")
    if delta <= 0.0:
        raise ContractViolationError("delta must be positive")

    g = model.gradient
    h = model.hessian
    w, v = np.linalg.eigh(h)
    gnorm = math.sqrt(float(g @ g))
    hnorm = max(abs(float(w[0])), abs(float(w[-1]))) if w.size else 0.0
    tau = max(-float(w[0]), 0.0) if w.size else 0.0

    candidates = []
    if gnorm > 0.0:
        curv = float(g @ (h @ g))
        t_max = delta / gnorm
        t = t_max if curv <= 0.0 else min(gnorm**2 / curv, t_max)
        step = -t * g
        candidates.append((step, _decrease(model, step), "cauchy"))
    if mode == "second_order" and tau > 0.0:
        u = lex_positive(v[:, 0])
        inner = float(g @ u)
        if abs(inner) > 1e-12 * max(1.0, gnorm):
            u = -u if inner > 0 else u
        step = delta * u
        candidates.append((step, _decrease(model, step), "eigen"))

    if candidates:
        if model.dim <= EXACT_TRS_MAX_DIM:
            refined = _exact_trs_eig(g, w, v, delta)
        else:
            refined = _steihaug_cg(g, h, delta)
        nrm = math.sqrt(float(refined @ refined))
        if nrm > delta:  # roundoff only; never violate the ball
            refined = refined * (delta / nrm)
        candidates.append((refined, _decrease(model, refined), "refined"))

    if not candidates:
        return TrsResult(np.zeros(model.dim), 0.0, "cauchy", False, False)
    step, dec, kind = max(candidates, key=lambda cand: cand[1])
    if dec <= 0.0:
        return TrsResult(np.zeros(model.dim), 0.0, "cauchy", False, False)
    first, second = _flags(dec, delta, gnorm, hnorm, tau)
    return TrsResult(step, dec, kind, first, second)


def decrease_ratio(f_current: float, f_trial: float, predicted_decrease: float) -> float:
    """Actual-over-predicted decrease ratio of a tentative step."""
    if not predicted_decrease > 0.0:
        raise ContractViolationError(
            "decrease ratio requires a strictly positive predicted decrease"
        )
    return (f_current - f_trial) / predicted_decrease
