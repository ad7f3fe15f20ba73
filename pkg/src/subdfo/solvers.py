"""The three random-subspace trust-region drivers and their point management.

``run_rsdfo`` is the prototype first-order method (fresh linear stencil in a
random subspace each iteration), ``run_rsdfo2`` the second-order variant with
fully quadratic subspace models, and ``run_rsdfoq`` the practical solver
maintaining primary/secondary interpolation sets with minimum-Frobenius-norm
models, a trust-region lower bound rho and geometry-aware point removal.
"""

import logging
import math
import time
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    ContractViolationError,
    DegenerateGeometryError,
    EmptyBasisError,
    ModelConstructionError,
)
from .interp import (
    InterpolationSet,
    SubspaceModel,
    build_full_quadratic_model,
    build_mfn_model,
    full_quadratic_stencil,
    lagrange_from_coords,
    model_criticality,
)
from .numerics import Basis, orthonormal_basis
from .records import RunRecord
from .seeding import derive_rng, derive_seed
from .sketch import SKETCH_KINDS, make_sketch
from .trs import decrease_ratio, solve_trs

logger = logging.getLogger(__name__)

# Hard numerical floor on trust-region radii, used only when the configured
# floor is disabled (rho_end = 0); prevents spinning on denormal radii.
RADIUS_EPS = 1e-300

CLASSIFICATIONS = ("successful", "unsuccessful", "safety", "rho_reduced")


@dataclass
class SolverConfig:
    """Shared configuration of the three solvers.

    ``q`` (maximum interpolation points) and ``delta0`` default to 2p+1 and
    0.1 * max(||x0||_inf, 1) respectively when left as None. ``rho_end`` is
    the radius floor used for termination (rho for the practical solver,
    delta for the prototype ones); 0 disables it.
    """

    p: int
    q: Optional[int] = None
    delta0: Optional[float] = None
    delta_max: float = 1e10
    gamma_dec: float = 0.5
    gamma_inc: float = 2.0
    gamma_inc_bar: float = 4.0
    gamma_s: float = 0.5
    alpha1: float = 0.1
    alpha2: float = 0.5
    eta: float = 0.1
    eta1: float = 0.1
    eta2: float = 0.7
    mu: float = 1.0
    rho_patience: int = 5
    rho_end: float = 1e-8
    max_evals: int = 1000
    max_time: Optional[float] = None
    seed: int = 0
    sketch_kind: str = "gaussian"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.p < 1:
            raise ContractViolationError("p must be at least 1")
        if not (0.0 < self.gamma_dec < 1.0 < self.gamma_inc <= self.gamma_inc_bar):
            raise ContractViolationError("need 0 < gamma_dec < 1 < gamma_inc <= gamma_inc_bar")
        if not (0.0 < self.gamma_s < 1.0):
            raise ContractViolationError("need 0 < gamma_s < 1")
        if not (0.0 < self.alpha1 <= self.alpha2 < 1.0):
            raise ContractViolationError("need 0 < alpha1 <= alpha2 < 1")
        if not (0.0 < self.eta1 <= self.eta2 < 1.0):
            raise ContractViolationError("need 0 < eta1 <= eta2 < 1")
        if not (0.0 < self.eta < 1.0):
            raise ContractViolationError("need eta in (0, 1)")
        if self.mu <= 0.0:
            raise ContractViolationError("mu must be positive")
        if self.rho_patience < 1:
            raise ContractViolationError("rho_patience must be at least 1")
        if self.rho_end < 0.0:
            raise ContractViolationError("rho_end must be nonnegative")
        if self.max_evals < 1:
            raise ContractViolationError("max_evals must be at least 1")
        if self.delta_max <= 0.0:
            raise ContractViolationError("delta_max must be positive")
        if self.delta0 is not None and not (0.0 < self.delta0 <= self.delta_max):
            raise ContractViolationError("need 0 < delta0 <= delta_max")
        q = self.resolved_q
        full = (self.p + 1) * (self.p + 2) // 2
        if not (self.p + 2 <= q <= full):
            raise ContractViolationError(
                f"need p+2 <= q <= (p+1)(p+2)/2, got q={q} for p={self.p}"
            )
        if self.sketch_kind not in SKETCH_KINDS:
            raise ContractViolationError(f"unknown sketch kind {self.sketch_kind!r}")

    @property
    def resolved_q(self) -> int:
        full = (self.p + 1) * (self.p + 2) // 2
        return min(2 * self.p + 1, full) if self.q is None else self.q

    def resolved_delta0(self, x0) -> float:
        if self.delta0 is not None:
            return self.delta0
        return 0.1 * max(float(np.max(np.abs(x0))), 1.0)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractViolationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrustRegionState:
    """Radii, iterate and the rho history ring used to gate rho reductions."""

    delta: float
    rho: float
    iterate: np.ndarray
    rho_history: list  # (rho_j, min(||s_j||, delta_j)) pairs, one per iteration

    def can_reduce_rho(self, patience: int) -> bool:
        if len(self.rho_history) <= patience:
            return False
        window = self.rho_history[-(patience + 1):]
        return window[0][0] == self.rho and all(ms <= r for r, ms in window)


@dataclass(frozen=True)
class IterationLog:
    """One line of the per-iteration trace."""

    k: int
    classification: str
    R: Optional[float]
    delta: float
    rho: Optional[float]
    sigma_m: float
    evals_used: int


class _BudgetExceeded(Exception):
    pass


class _TimeExceeded(Exception):
    pass


class _NonFiniteAtStart(Exception):
    pass


class _TracedObjective:
    """Counting/tracing wrapper enforcing the evaluation budget and time cap.

    Non-finite values are mapped to +inf (the run aborts only if the very
    first evaluation is non-finite).
    """

    def __init__(self, problem, max_evals: int, max_time: Optional[float], t_start: float):
        self._fn = problem.objective
        self.max_evals = max_evals
        self.max_time = max_time
        self.t_start = t_start
        self.count = 0
        self.best = math.inf
        self.trace = []

    def check_time(self):
        if self.max_time is not None and time.perf_counter() - self.t_start > self.max_time:
            raise _TimeExceeded

    def __call__(self, x) -> float:
        if self.count >= self.max_evals:
            raise _BudgetExceeded
        self.check_time()
        self.count += 1
        val = float(self._fn(x))
        if not math.isfinite(val):
            if self.count == 1:
                raise _NonFiniteAtStart
            val = math.inf
        if val < self.best:
            self.best = val
            self.trace.append((self.count, val))
        return val


def pdrop_heuristic(r_k: Optional[float], p: int, full_space: bool) -> int:
    """Number of primary points to demote: ceil(p/10) after bad steps, else 1.

    Clamped to [2, p] in the subspace regime and [1, p] in the full-space
    regime. A missing ratio counts as a bad step.
    """
    if p < 1:
        raise ContractViolationError("p must be at least 1")
    pd = math.ceil(p / 10) if (r_k is None or r_k < 0) else 1
    lo = 1 if full_space else 2
    return min(max(pd, lo), p)


def _primary_index_of(iset: InterpolationSet, point) -> int:
    for i, y in enumerate(iset.primary):
        if y is point:
            return i
    point = np.asarray(point, dtype=float)
    for i, y in enumerate(iset.primary):
        if y.shape == point.shape and np.array_equal(y, point):
            return i
    raise ContractViolationError("anchor point is not a member of the primary set")


def remove_single_point(
    iset: InterpolationSet,
    basis: Basis,
    tentative_step,
    delta: float,
    x_k,
) -> np.ndarray:
    """Demote the primary point scoring highest on the geometry criterion.

    Score: |Lagrange value at x_k + step| times max(dist^4 / delta^4, 1). If
    the Lagrange basis is degenerate, falls back to the distance factor
    alone. Ties go to the farthest point, then the lowest index. Returns the
    demoted point.
    """
    if len(iset.primary) < 2:
        raise ContractViolationError("need at least two primary points")
    anchor_idx = _primary_index_of(iset, x_k)
    anchor = iset.primary[anchor_idx]
    diffs = np.array(iset.primary) - anchor
    coords = diffs @ basis.columns
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    weights = np.maximum(dists**4 / delta**4, 1.0)

    try:
        lag = lagrange_from_coords(coords)
        lvals = np.abs(lag.evaluate(basis.project_coords(np.asarray(tentative_step, float))))
        scores = lvals * weights
    except DegenerateGeometryError:
        logger.debug("degenerate Lagrange set; falling back to distance-only removal")
        scores = dists**4 / delta**4

    candidates = [t for t in range(len(iset.primary)) if t != anchor_idx and t != iset.base_index]
    if not candidates:
        raise ContractViolationError("no removable primary points")
    smax = max(scores[t] for t in candidates)
    tol_s = 1e-12 * max(1.0, abs(smax))
    tied = [t for t in candidates if scores[t] >= smax - tol_s]
    dmax = max(dists[t] for t in tied)
    tol_d = 1e-12 * max(1.0, abs(dmax))
    pick = min(t for t in tied if dists[t] >= dmax - tol_d)

    removed = iset.primary[pick]
    iset.move_to_secondary(pick)
    return removed


def remove_multiple_points(
    iset: InterpolationSet,
    basis: Basis,
    count: int,
    delta: float,
    x_next,
) -> list:
    """Demote ``count`` primary points, re-scoring after each removal.

    Uses the single-point criterion with a zero tentative step evaluated at
    the (possibly updated) iterate ``x_next``.
    """
    if count >= len(iset.primary):
        raise ContractViolationError("cannot remove that many primary points")
    zero_step = np.zeros(basis.dim)
    removed = []
    for _ in range(count):
        removed.append(remove_single_point(iset, basis, zero_step, delta, x_next))
    return removed


def add_orthogonal_points(
    iset: InterpolationSet,
    x_next,
    delta_next: float,
    count: int,
    rng: np.random.Generator,
    objective: Callable,
) -> list:
    """Add ``count`` fresh primary points along new orthonormal directions.

    Directions are mutually orthonormal and orthogonal to the span of the
    existing primary offsets from ``x_next``; each new point is evaluated and
    cached. Points whose value comes back non-finite are not added.
    """
    if count < 0:
        raise ContractViolationError("count must be nonnegative")
    if count == 0:
        return []
    x_next = np.asarray(x_next, dtype=float)
    n = x_next.shape[0]
    anchor_idx = _primary_index_of(iset, x_next)
    existing = [
        y - x_next for i, y in enumerate(iset.primary) if i != anchor_idx
    ]
    existing = [d for d in existing if np.linalg.norm(d) > 0.0]
    span = orthonormal_basis(existing).columns if existing else np.zeros((n, 0))
    if span.shape[1] + count > n:
        raise ContractViolationError(
            "subspace span already full-dimensional; cannot add orthogonal directions"
        )

    frame = np.empty((n, count))
    filled = 0
    for _attempt in range(100 * count):
        v = rng.standard_normal(n)
        for _ in range(2):
            v = v - span @ (span.T @ v)
            v = v - frame[:, :filled] @ (frame[:, :filled].T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            frame[:, filled] = v / nv
            filled += 1
            if filled == count:
                break
    if filled < count:
        raise ContractViolationError("failed to draw orthogonal directions")

    added = []
    for j in range(count):
        point = x_next + delta_next * frame[:, j]
        val = objective(point)
        if math.isfinite(val):
            iset.add_primary(point, val)
            added.append(point)
    return added


def linear_stencil_model(objective, x, fx: float, p_map, delta: float) -> SubspaceModel:
    """Linear interpolation model on the stencil {0, delta e_i} in the subspace."""
    p_map = np.atleast_2d(np.asarray(p_map, dtype=float))
    p = p_map.shape[1]
    vals = np.empty(p)
    for i in range(p):
        vals[i] = objective(x + delta * p_map[:, i])
    grad = (vals - fx) / delta
    return SubspaceModel(x, p_map, fx, grad, np.zeros((p, p)))


def _finalize(problem, config, solver: str, obj: _TracedObjective, t0: float, termination: str) -> RunRecord:
    return RunRecord(
        problem=problem.name,
        n=problem.dim,
        solver=solver,
        seed=config.seed,
        trace=list(obj.trace),
        wall_time=time.perf_counter() - t0,
        termination=termination,
        total_evals=obj.count,
    )


def _run_prototype(
    problem,
    config: SolverConfig,
    order: str,
    solver_name: str,
    log_cb: Optional[Callable] = None,
    iterate_hook: Optional[Callable] = None,
) -> RunRecord:
    """Common driver for the two theoretical algorithms (linear vs quadratic models)."""
    config.validate()
    n = problem.dim
    p = config.p
    if p > n:
        raise ContractViolationError(f"p={p} exceeds problem dimension n={n}")
    if config.sketch_kind == "identity" and p != n:
        raise ContractViolationError("identity sketch requires p = n")

    t0 = time.perf_counter()
    obj = _TracedObjective(problem, config.max_evals, config.max_time, t0)
    x = np.asarray(problem.x0, dtype=float).copy()
    try:
        fx = obj(x)
    except _NonFiniteAtStart:
        return _finalize(problem, config, solver_name, obj, t0, "error")

    delta = config.resolved_delta0(x)
    termination = "budget"
    model_critical = False
    floor = config.rho_end if config.rho_end > 0.0 else RADIUS_EPS
    k = 0
    try:
        while True:
            if delta < floor:
                termination = "critical" if model_critical else "rho_floor"
                break
            if iterate_hook is not None:
                iterate_hook(k, x)
            obj.check_time()

            sketch = make_sketch(
                config.sketch_kind, n, p, derive_seed(config.seed, "sketch", k)
            )
            if order == "first":
                coords = np.vstack([np.zeros(p), delta * np.eye(p)])
            else:
                coords = full_quadratic_stencil(p, delta)
            vals = np.empty(len(coords))
            vals[0] = fx  # stencil origin is the current iterate
            for i in range(1, len(coords)):
                vals[i] = obj(x + sketch.map @ coords[i])
            if not np.all(np.isfinite(vals)):
                # The stencil left the region where f is finite: no model can
                # be built, so count the iteration as unsuccessful and shrink.
                delta_used = delta
                delta = config.gamma_dec * delta
                if log_cb is not None:
                    log_cb(
                        IterationLog(k, "unsuccessful", None, delta_used, None, math.nan, obj.count)
                    )
                k += 1
                continue
            if order == "first":
                grad = (vals[1:] - fx) / delta
                model = SubspaceModel(x, sketch.map, fx, grad, np.zeros((p, p)))
                mode = "first_order"
            else:
                model = replace(
                    build_full_quadratic_model(coords, vals), base=x, map=sketch.map
                )
                mode = "second_order"

            sigma_m, _tau_m = model_criticality(model)
            guard = float(np.linalg.norm(model.gradient)) if order == "first" else sigma_m
            result = solve_trs(model, delta, mode)
            delta_used = delta

            ratio = None
            success = False
            trial = x
            f_trial = fx
            if result.predicted_decrease > 0.0:
                model_critical = False
                trial = x + sketch.map @ result.step
                f_trial = obj(trial)
                ratio = decrease_ratio(fx, f_trial, result.predicted_decrease)
                success = ratio >= config.eta and guard >= config.mu * delta
            else:
                # Model-critical point: no ratio is defined; the acceptance
                # guard necessarily fails, so skip the trial evaluation.
                model_critical = True

            if success:
                x = trial
                fx = f_trial
                delta = min(config.gamma_inc * delta, config.delta_max)
                cls = "successful"
            else:
                delta = config.gamma_dec * delta
                cls = "unsuccessful"

            if log_cb is not None:
                log_cb(IterationLog(k, cls, ratio, delta_used, None, sigma_m, obj.count))
            k += 1
    except _BudgetExceeded:
        termination = "budget"
    except _TimeExceeded:
        termination = "time"
    except ModelConstructionError as err:
        logger.warning("run aborted: %s", err)
        termination = "error"
    return _finalize(problem, config, solver_name, obj, t0, termination)


def run_rsdfo(problem, config: SolverConfig, log_cb=None, iterate_hook=None) -> RunRecord:
    """Prototype first-order solver: fully linear models in random subspaces."""
    return _run_prototype(problem, config, "first", "rsdfo", log_cb, iterate_hook)


def run_rsdfo2(problem, config: SolverConfig, log_cb=None, iterate_hook=None) -> RunRecord:
    """Second-order solver: fully quadratic subspace models and curvature steps."""
    return _run_prototype(problem, config, "second", "rsdfo2", log_cb, iterate_hook)


def run_rsdfoq(problem, config: SolverConfig, log_cb=None, iterate_hook=None) -> RunRecord:
    """Practical subspace solver with MFN quadratic models and point reuse."""
    config.validate()
    n = problem.dim
    p = config.p
    q = config.resolved_q
    if p > n:
        raise ContractViolationError(f"p={p} exceeds problem dimension n={n}")

    t0 = time.perf_counter()
    obj = _TracedObjective(problem, config.max_evals, config.max_time, t0)
    x0 = np.asarray(problem.x0, dtype=float).copy()
    try:
        f0 = obj(x0)
    except _NonFiniteAtStart:
        return _finalize(problem, config, "rsdfoq", obj, t0, "error")

    delta0 = config.resolved_delta0(x0)
    state = TrustRegionState(delta0, delta0, x0, [])
    iset = InterpolationSet(x0, f0, p, q)
    termination = "budget"
    prev_model = None

    try:
        # Initial primary set: p random orthonormal directions at radius delta0.
        rng0 = derive_rng(config.seed, "init")
        add_orthogonal_points(iset, x0, delta0, p, rng0, obj)
        iset.recenter_to_best()

        k = 0
        while True:
            obj.check_time()
            if state.rho < RADIUS_EPS:
                termination = "rho_floor"
                break
            state.iterate = iset.base
            if iterate_hook is not None:
                iterate_hook(k, iset.base)

            basis = orthonormal_basis(iset.primary_directions())
            try:
                model = build_mfn_model(
                    iset,
                    basis,
                    prev_model,
                    dedup_tol=1e-10 * state.delta,
                    max_residual=state.delta,
                )
            except ModelConstructionError:
                # Secondary points can make a near-degenerate system; retry
                # on the primary set alone before giving up.
                trimmed = InterpolationSet(iset.base, iset.base_value, p, q)
                for i, (y, v) in enumerate(zip(iset.primary, iset.primary_values)):
                    if i != iset.base_index:
                        trimmed.add_primary(y, v)
                model = build_mfn_model(
                    trimmed, basis, prev_model, dedup_tol=1e-10 * state.delta
                )
            prev_model = model
            sigma_m, _ = model_criticality(model)
            result = solve_trs(model, state.delta, "second_order")
            snorm = float(np.linalg.norm(result.step))

            state.rho_history.append((state.rho, min(snorm, state.delta)))
            if len(state.rho_history) > config.rho_patience + 1:
                state.rho_history.pop(0)
            can_reduce = state.can_reduce_rho(config.rho_patience)

            ratio = None
            delta_next = state.delta
            if snorm < config.gamma_s * state.rho:
                ratio = -1.0
                cls = "safety"
                delta_next = max(config.gamma_dec * state.delta, state.rho)
                x_next = iset.base
                if (not can_reduce) or state.delta > state.rho:
                    remove_single_point(
                        iset, basis, np.zeros(n), state.delta, iset.base
                    )
            else:
                trial = iset.base + basis.lift(result.step)
                f_trial = obj(trial)
                ratio = decrease_ratio(iset.base_value, f_trial, result.predicted_decrease)
                if ratio < config.eta1:
                    delta_next = max(min(config.gamma_dec * state.delta, snorm), state.rho)
                elif ratio <= config.eta2:
                    delta_next = max(config.gamma_dec * state.delta, snorm, state.rho)
                else:
                    delta_next = min(
                        max(config.gamma_inc * state.delta, config.gamma_inc_bar * snorm),
                        config.delta_max,
                    )
                accepted = ratio > 0.0
                cls = "successful" if accepted else "unsuccessful"
                n_drop = pdrop_heuristic(ratio, p, full_space=(p == n))
                if p < n:
                    if math.isfinite(f_trial) and not iset.contains_primary(trial, 1e-14):
                        iset.add_primary(trial, f_trial)
                        if accepted:
                            iset.set_base(len(iset.primary) - 1)
                    x_next = iset.base
                    remove_multiple_points(iset, basis, n_drop, state.delta, x_next)
                else:
                    remove_single_point(
                        iset, basis, basis.lift(result.step), state.delta, iset.base
                    )
                    if math.isfinite(f_trial) and not iset.contains_primary(trial, 1e-14):
                        iset.add_primary(trial, f_trial)
                        if accepted:
                            iset.set_base(len(iset.primary) - 1)
                    x_next = iset.base
                    remove_multiple_points(iset, basis, n_drop, state.delta, x_next)

            rho_next = state.rho
            if ratio is not None and ratio < 0.0 and state.delta <= state.rho and can_reduce:
                rho_next = config.alpha1 * state.rho
                delta_next = config.alpha2 * state.rho
                cls = "rho_reduced"

            n_add = p + 1 - len(iset.primary)
            if n_add > 0:
                add_orthogonal_points(
                    iset,
                    iset.base,
                    delta_next,
                    n_add,
                    derive_rng(config.seed, "add", k),
                    obj,
                )
            iset.recenter_to_best()

            if log_cb is not None:
                log_cb(
                    IterationLog(k, cls, ratio, state.delta, state.rho, sigma_m, obj.count)
                )
            state.delta = delta_next
            state.rho = rho_next
            k += 1
            if config.rho_end > 0.0 and state.rho <= config.rho_end:
                termination = "rho_floor"
                break
    except _BudgetExceeded:
        termination = "budget"
    except _TimeExceeded:
        termination = "time"
    except (EmptyBasisError, ModelConstructionError) as err:
        logger.warning("run aborted: %s", err)
        termination = "error"
    return _finalize(problem, config, "rsdfoq", obj, t0, termination)


SOLVERS = {
    "rsdfo": run_rsdfo,
    "rsdfo2": run_rsdfo2,
    "rsdfoq": run_rsdfoq,
}
