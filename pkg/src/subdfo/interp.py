"""Interpolation sets, subspace quadratic models and model-quality certificates.

Maintains the primary/secondary point sets, projects secondary points into
the current subspace, and builds quadratic models either by
minimum-Frobenius-norm (MFN) interpolation against a reference Hessian or by
fully determined quadratic interpolation. Also provides linear Lagrange
polynomials for geometry management and empirical certificates for the
model-error scaling laws.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import (
    ContractViolationError,
    DegenerateGeometryError,
    ModelConstructionError,
    SingularSystemError,
)
from .numerics import Basis, min_eigenpair, solve_saddle_system
from .seeding import derive_rng

logger = logging.getLogger(__name__)

INTERP_RESIDUAL_TOL = 1e-9  # relative interpolation residual accepted
KKT_RESIDUAL_TOL = 1e-8  # optimality certificate for the MFN solve
LAGRANGE_TOL = 1e-8  # cardinality-condition tolerance


class InterpolationSet:
    """Primary and secondary interpolation points with cached values.

    The primary set always contains the base point (current iterate); the
    secondary set holds up to ``q - p - 1`` previously demoted points, each
    tagged with an insertion age so the oldest can be discarded on overflow.
    """

    def __init__(self, base, base_value: float, p: int, q: int):
        if q < p + 1:
            raise ContractViolationError("need q >= p + 1")
        self.p = int(p)
        self.q = int(q)
        self.primary = [np.asarray(base, dtype=float)]
        self.primary_values = [float(base_value)]
        self.base_index = 0
        self.secondary = []
        self.secondary_values = []
        self.secondary_ages = []
        self._age = 0

    @property
    def base(self) -> np.ndarray:
        return self.primary[self.base_index]

    @property
    def base_value(self) -> float:
        return self.primary_values[self.base_index]

    @property
    def secondary_capacity(self) -> int:
        return max(0, self.q - self.p - 1)

    def add_primary(self, point, value: float):
        self.primary.append(np.asarray(point, dtype=float))
        self.primary_values.append(float(value))

    def contains_primary(self, point, tol: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        scale = max(1.0, float(np.linalg.norm(point)))
        diffs = np.array(self.primary) - point
        return bool(np.min(np.einsum("ij,ij->i", diffs, diffs)) <= (tol * scale) ** 2)

    def move_to_secondary(self, index: int):
        """Demote primary point ``index`` to the secondary set (never the base)."""
        if index == self.base_index:
            raise ContractViolationError("cannot demote the base point")
        point = self.primary.pop(index)
        value = self.primary_values.pop(index)
        if index < self.base_index:
            self.base_index -= 1
        self.secondary.append(point)
        self.secondary_values.append(value)
        self.secondary_ages.append(self._age)
        self._age += 1
        while len(self.secondary) > self.secondary_capacity:
            oldest = int(np.argmin(self.secondary_ages))
            self.secondary.pop(oldest)
            self.secondary_values.pop(oldest)
            self.secondary_ages.pop(oldest)

    def set_base(self, index: int):
        self.base_index = int(index)

    def recenter_to_best(self):
        """Move the base marker to the primary point with smallest value."""
        self.base_index = int(np.argmin(self.primary_values))

    def primary_directions(self) -> list:
        """Offsets of the non-base primary points from the base."""
        return [
            y - self.base
            for i, y in enumerate(self.primary)
            if i != self.base_index
        ]


@dataclass
class SubspaceModel:
    """Quadratic model c + g^T s + 0.5 s^T H s over subspace coordinates.

    ``base`` and ``map`` locate the subspace in full space (x = base + map @ s);
    both may be None for a pure coordinate-space model.
    """

    base: Optional[np.ndarray]
    map: Optional[np.ndarray]
    constant: float
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gradient, dtype=float)
        h = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise ContractViolationError("model coefficients must be finite")
        if np.max(np.abs(h - h.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(h), initial=0.0)):
            raise ContractViolationError("model Hessian must be symmetric")
        self.gradient = g
        self.hessian = 0.5 * (h + h.T)
        self.constant = float(self.constant)
        if self.base is not None:
            self.base = np.asarray(self.base, dtype=float)
        if self.map is not None:
            self.map = np.atleast_2d(np.asarray(self.map, dtype=float))

    @property
    def dim(self) -> int:
        return self.gradient.shape[0]

    def value(self, s_hat) -> float:
        s = np.asarray(s_hat, dtype=float)
        return float(self.constant + self.gradient @ s + 0.5 * s @ (self.hessian @ s))

    def gradient_at(self, s_hat) -> np.ndarray:
        return self.gradient + self.hessian @ np.asarray(s_hat, dtype=float)

    def lift(self, s_hat) -> np.ndarray:
        """Full-space point base + map @ s."""
        if self.base is None or self.map is None:
            raise ContractViolationError("model has no full-space anchoring")
        return self.base + self.map @ np.asarray(s_hat, dtype=float)

    def to_json(self) -> str:
        return json.dumps(
            {
                "base": None if self.base is None else self.base.tolist(),
                "map": None if self.map is None else self.map.tolist(),
                "constant": self.constant,
                "gradient": self.gradient.tolist(),
                "hessian": self.hessian.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SubspaceModel":
        d = json.loads(text)
        return cls(
            None if d["base"] is None else np.array(d["base"]),
            None if d["map"] is None else np.array(d["map"]),
            d["constant"],
            np.array(d["gradient"]),
            np.array(d["hessian"]),
        )


def evaluate_model(model: SubspaceModel, s_hat) -> float:
    """Model value c + g^T s + 0.5 s^T H s."""
    return model.value(s_hat)


def project_secondary(iset: InterpolationSet, basis: Basis):
    """Subspace coordinates Q^T (y - base) and cached values of secondary points."""
    if not iset.secondary:
        return []
    coords = (np.array(iset.secondary) - iset.base) @ basis.columns
    return list(zip(coords, iset.secondary_values))


def secondary_projection_residuals(iset: InterpolationSet, basis: Basis):
    """Out-of-subspace residual norms ||(I - QQ^T)(y - base)|| for diagnostics."""
    q = basis.columns
    out = []
    for y in iset.secondary:
        d = y - iset.base
        out.append(float(np.linalg.norm(d - q @ (q.T @ d))))
    return out


def _dedup_coords(coords, tol: float):
    """Indices of coordinates to keep, dropping near-duplicates of earlier ones."""
    pts = np.atleast_2d(np.asarray(coords))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    keep = []
    for j in range(len(pts)):
        if keep and np.min(dist[j, keep]) < tol:
            continue
        keep.append(j)
    return keep


def build_mfn_model(
    iset: InterpolationSet,
    basis: Basis,
    prev: Optional[SubspaceModel] = None,
    dedup_tol: Optional[float] = None,
    max_residual: Optional[float] = None,
) -> SubspaceModel:
    """Minimum-Frobenius-norm quadratic interpolation over the current sets.

    Solves for the symmetric Hessian closest (Frobenius) to the previous
    model Hessian re-projected into the current subspace, subject to
    interpolating all primary and projected secondary values. The solve goes
    through the standard saddle-point system in scaled coordinates; the
    optimality certificate is its residual.

    Secondary values are used at face value at their projected coordinates.
    When ``max_residual`` is given, secondary points whose out-of-subspace
    residual exceeds it are excluded for this build: their values are
    inconsistent with any quadratic on the subspace by O(residual), which
    destroys the model once the trust region is smaller than that.
    """
    q_mat = basis.columns
    r = basis.rank
    coords = (np.array(iset.primary) - iset.base) @ q_mat
    values = list(iset.primary_values)
    if iset.secondary:
        diffs = np.array(iset.secondary) - iset.base
        sec = diffs @ q_mat
        if max_residual is not None:
            res2 = np.einsum("ij,ij->i", diffs, diffs) - np.einsum("ij,ij->i", sec, sec)
            ok = res2 <= max_residual**2
            if not np.all(ok):
                logger.debug(
                    "MFN: excluding %d stale secondary point(s)", int(np.sum(~ok))
                )
            sec = sec[ok]
            sec_vals = [v for v, keep in zip(iset.secondary_values, ok) if keep]
        else:
            sec_vals = list(iset.secondary_values)
        coords = np.vstack([coords, sec]) if len(sec) else coords
        values.extend(sec_vals)

    if dedup_tol is None:
        dedup_tol = 1e-10 * max(1.0, float(np.max(np.linalg.norm(coords, axis=1))))
    keep = _dedup_coords(coords, dedup_tol)
    if len(keep) < len(coords):
        logger.debug(
            "MFN: excluding %d duplicate projected point(s)", len(coords) - len(keep)
        )
    coords = coords[keep]
    values = [values[j] for j in keep]
    m = len(coords)
    if m < r + 1:
        raise ModelConstructionError(
            f"need at least {r + 1} distinct points, have {m}", offenders=keep
        )

    # Reference Hessian: previous model Hessian carried into the new subspace.
    if prev is None or prev.map is None:
        h_ref = np.zeros((r, r))
    else:
        cross = q_mat.T @ prev.map
        h_ref = cross @ prev.hessian @ cross.T
        h_ref = 0.5 * (h_ref + h_ref.T)

    # Scale coordinates to unit size for conditioning.
    dbar = float(np.max(np.linalg.norm(coords, axis=1)))
    if dbar <= 0.0:
        dbar = 1.0
    u = coords / dbar  # (m, r)
    h_ref_s = h_ref * dbar**2

    gram = u @ u.T
    a_block = 0.25 * gram**2
    x_block = np.hstack([np.ones((m, 1)), u])  # (m, r+1)
    resid_rhs = np.array(values) - 0.5 * np.einsum("ij,jk,ik->i", u, h_ref_s, u)
    rhs = np.concatenate([resid_rhs, np.zeros(r + 1)])

    try:
        sol = solve_saddle_system(a_block, x_block.T, rhs)
    except SingularSystemError as err:
        offenders = _closest_pair(coords)
        raise ModelConstructionError(
            f"degenerate MFN system: {err}", offenders=offenders, condition=err.condition
        ) from err

    lam = sol[:m]
    const = float(sol[m])
    grad_s = sol[m + 1 :]
    h_s = h_ref_s + 0.5 * (u.T * lam) @ u
    h_s = 0.5 * (h_s + h_s.T)

    # Optimality certificate: residual of the full KKT system.
    kkt_top = a_block @ lam + x_block @ sol[m:] - resid_rhs
    kkt_bot = x_block.T @ lam
    kkt_res = float(np.linalg.norm(np.concatenate([kkt_top, kkt_bot])))
    if kkt_res > KKT_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(rhs))):
        raise ModelConstructionError(
            f"MFN KKT residual {kkt_res:.3e} too large", offenders=_closest_pair(coords)
        )

    model = SubspaceModel(
        iset.base, q_mat, const, grad_s / dbar, h_s / dbar**2
    )
    vals = np.asarray(values)
    pred = const + u @ grad_s + 0.5 * np.einsum("ij,jk,ik->i", u, h_s, u)
    bad = np.nonzero(
        np.abs(pred - vals) > INTERP_RESIDUAL_TOL * np.maximum(1.0, np.abs(vals))
    )[0]
    if bad.size:
        raise ModelConstructionError(
            "interpolation residuals exceed tolerance", offenders=bad.tolist()
        )
    return model


def _closest_pair(coords):
    """Indices of the two closest coordinates (the usual degeneracy culprits)."""
    best, pair = math.inf, []
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            d = float(np.linalg.norm(coords[i] - coords[j]))
            if d < best:
                best, pair = d, [i, j]
    return pair


def n_quadratic_coeffs(p: int) -> int:
    """Number of coefficients of a p-dimensional quadratic: (p+1)(p+2)/2."""
    return (p + 1) * (p + 2) // 2


def full_quadratic_stencil(p: int, delta: float) -> np.ndarray:
    """Poised sample set {0} u {+-delta e_i} u {delta (e_i + e_j), i < j}."""
    pts = [np.zeros(p)]
    eye = np.eye(p)
    for i in range(p):
        pts.append(delta * eye[i])
    for i in range(p):
        pts.append(-delta * eye[i])
    for i in range(p):
        for j in range(i + 1, p):
            pts.append(delta * (eye[i] + eye[j]))
    return np.array(pts)


def build_full_quadratic_model(coords, values) -> SubspaceModel:
    """Unique quadratic interpolant through exactly (p+1)(p+2)/2 points."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    values = np.asarray(values, dtype=float)
    m, p = coords.shape
    if m != n_quadratic_coeffs(p):
        raise ContractViolationError(
            f"need exactly {n_quadratic_coeffs(p)} points for p={p}, got {m}"
        )
    dbar = float(np.max(np.linalg.norm(coords, axis=1)))
    if dbar <= 0.0:
        dbar = 1.0
    u = coords / dbar

    cols = [np.ones(m)]
    cols.extend(u[:, i] for i in range(p))
    cols.extend(0.5 * u[:, i] ** 2 for i in range(p))
    for i in range(p):
        for j in range(i + 1, p):
            cols.append(u[:, i] * u[:, j])
    design = np.column_stack(cols)

    try:
        with np.errstate(all="ignore"):
            coef = np.linalg.solve(design, values)
    except np.linalg.LinAlgError as err:
        raise ModelConstructionError(
            f"non-poised quadratic sample set: {err}",
            offenders=_closest_pair(list(coords)),
            condition=float(np.linalg.cond(design)),
        ) from err
    if not np.all(np.isfinite(coef)) or (
        np.linalg.norm(design @ coef - values)
        > INTERP_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(values)))
    ):
        raise ModelConstructionError(
            "non-poised quadratic sample set (ill-conditioned solve)",
            offenders=_closest_pair(list(coords)),
            condition=float(np.linalg.cond(design)),
        )

    const = float(coef[0])
    grad = coef[1 : p + 1] / dbar
    hess = np.zeros((p, p))
    hess[np.diag_indices(p)] = coef[p + 1 : 2 * p + 1]
    idx = 2 * p + 1
    for i in range(p):
        for j in range(i + 1, p):
            hess[i, j] = hess[j, i] = coef[idx]
            idx += 1
    return SubspaceModel(None, None, const, grad, hess / dbar**2)


@dataclass(frozen=True)
class LagrangeSet:
    """Affine Lagrange functions l_t(s) = c_t + g_t^T s for a point set."""

    constants: np.ndarray  # (m,)
    gradients: np.ndarray  # (m, p)

    def evaluate(self, s_hat) -> np.ndarray:
        return self.constants + self.gradients @ np.asarray(s_hat, dtype=float)


def lagrange_from_coords(coords) -> LagrangeSet:
    """Linear Lagrange polynomials of p+1 affinely independent p-dim points."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    m, p = coords.shape
    if m != p + 1:
        raise DegenerateGeometryError(
            f"need exactly p+1 = {p + 1} points for linear Lagrange basis, got {m}"
        )
    mat = np.hstack([np.ones((m, 1)), coords])
    try:
        with np.errstate(all="ignore"):
            inv = np.linalg.solve(mat, np.eye(m))
    except np.linalg.LinAlgError as err:
        raise DegenerateGeometryError(f"affinely dependent point set: {err}") from err
    if not np.all(np.isfinite(inv)):
        raise DegenerateGeometryError("affinely dependent point set")
    lag = LagrangeSet(inv[0, :].copy(), inv[1:, :].T.copy())
    card = np.column_stack([lag.evaluate(s) for s in coords])
    if np.max(np.abs(card - np.eye(m))) > LAGRANGE_TOL:
        raise DegenerateGeometryError("Lagrange cardinality check failed")
    return lag


def linear_lagrange(iset: InterpolationSet, basis: Basis) -> LagrangeSet:
    """Lagrange polynomials of the primary set in subspace coordinates.

    Functions are ordered like ``iset.primary``.
    """
    coords = [basis.project_coords(y - iset.base) for y in iset.primary]
    return lagrange_from_coords(np.array(coords))


@dataclass(frozen=True)
class ErrorCertificate:
    """Empirical max-error constants of a model over a sampled trust region."""

    delta: float
    kappa_ef_est: float
    kappa_eg_est: float
    kappa_eh_est: Optional[float]
    samples: int


def _ball_samples(p: int, delta: float, extra: int, seed: int) -> np.ndarray:
    """0, all +-delta e_i, and ``extra`` uniform points in the delta-ball."""
    pts = [np.zeros(p)]
    eye = np.eye(p)
    for i in range(p):
        pts.append(delta * eye[i])
        pts.append(-delta * eye[i])
    rng = derive_rng(seed, "ball", p)
    for _ in range(extra):
        d = rng.standard_normal(p)
        d /= np.linalg.norm(d)
        pts.append(delta * rng.uniform() ** (1.0 / p) * d)
    return np.array(pts)


def certify_fully_linear(
    model: SubspaceModel, f_oracle, grad_oracle, delta: float, samples: int, seed: int
) -> ErrorCertificate:
    """Measure max |f - m| / delta^2 and max grad error / delta over the ball."""
    pts = _ball_samples(model.dim, delta, samples, seed)
    p_mat = model.map
    kef = keg = 0.0
    for s in pts:
        x = model.base + p_mat @ s
        kef = max(kef, abs(f_oracle(x) - model.value(s)) / delta**2)
        err_g = p_mat.T @ np.asarray(grad_oracle(x), float) - model.gradient_at(s)
        keg = max(keg, float(np.linalg.norm(err_g)) / delta)
    return ErrorCertificate(delta, kef, keg, None, len(pts))


def certify_fully_quadratic(
    model: SubspaceModel,
    f_oracle,
    grad_oracle,
    hess_oracle,
    delta: float,
    samples: int,
    seed: int,
) -> ErrorCertificate:
    """As certify_fully_linear, with cubic/quadratic/linear error normalization."""
    pts = _ball_samples(model.dim, delta, samples, seed)
    p_mat = model.map
    kef = keg = keh = 0.0
    for s in pts:
        x = model.base + p_mat @ s
        kef = max(kef, abs(f_oracle(x) - model.value(s)) / delta**3)
        err_g = p_mat.T @ np.asarray(grad_oracle(x), float) - model.gradient_at(s)
        keg = max(keg, float(np.linalg.norm(err_g)) / delta**2)
        err_h = p_mat.T @ np.asarray(hess_oracle(x), float) @ p_mat - model.hessian
        keh = max(keh, float(np.linalg.norm(err_h, 2)) / delta)
    return ErrorCertificate(delta, kef, keg, keh, len(pts))


def model_criticality(model: SubspaceModel):
    """(sigma_m, tau_m): max of gradient norm and negative-curvature magnitude."""
    lam, _ = min_eigenpair(model.hessian)
    tau = max(-lam, 0.0)
    return max(float(np.linalg.norm(model.gradient)), tau), tau
