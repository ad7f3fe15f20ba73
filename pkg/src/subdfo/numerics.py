"""Dense linear-algebra primitives shared by the whole package.

Everything here is pure and reentrant: orthonormalization, symmetric
eigensolves and saddle-point (KKT) solves on matrices of at most a few
hundred rows, backed by NumPy/SciPy dense routines.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ContractViolationError, EmptyBasisError, SingularSystemError

# Orthonormality tolerance enforced on every Basis instance.
BASIS_ORTHO_TOL = 1e-12

# Relative residual accepted from a saddle-point solve.
SADDLE_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class Basis:
    """Orthonormal basis of a subspace, stored as the columns of an n x r matrix."""

    columns: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.columns, dtype=float))
        if q.ndim != 2 or q.shape[1] == 0:
            raise ContractViolationError("basis must have at least one column")
        if not np.all(np.isfinite(q)):
            raise ContractViolationError("basis columns must be finite")
        gram_err = np.max(np.abs(q.T @ q - np.eye(q.shape[1])))
        if gram_err > BASIS_ORTHO_TOL:
            raise ContractViolationError(
                f"basis columns not orthonormal (max |Q^T Q - I| = {gram_err:.3e})"
            )
        object.__setattr__(self, "columns", q)

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def project_coords(self, vec: np.ndarray) -> np.ndarray:
        """Coordinates Q^T v of a full-space vector in this basis."""
        return self.columns.T @ vec

    def lift(self, coords: np.ndarray) -> np.ndarray:
        """Full-space vector Q s from subspace coordinates."""
        return self.columns @ coords


def orthonormal_basis(vectors, tol: float = 1e-10) -> Basis:
    """Orthonormalize a collection of n-vectors, dropping dependent ones.

    Uses Householder QR with signs fixed so the result matches Gram-Schmidt
    orientation. A vector whose residual against the preceding ones falls
    below ``tol`` times its input norm is dropped (and the factorization
    redone without it). Raises EmptyBasisError when nothing survives.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if not vecs:
        raise EmptyBasisError("no input vectors")
    mat = np.column_stack(vecs)
    if not np.all(np.isfinite(mat)):
        raise ContractViolationError("input vectors must be finite")
    norms = np.sqrt(np.einsum("ij,ij->j", mat, mat))
    live = norms > 0.0
    mat, norms = mat[:, live], norms[live]
    while mat.shape[1] > 0:
        q, r = np.linalg.qr(mat)
        diag = np.diag(r)
        ok = np.zeros(mat.shape[1], dtype=bool)
        ok[: diag.size] = np.abs(diag) > tol * norms[: diag.size]
        if np.all(ok):
            signs = np.where(diag < 0, -1.0, 1.0)
            return Basis(q * signs)
        mat, norms = mat[:, ok], norms[ok]
    raise EmptyBasisError("all input vectors are numerically zero or dependent")


def _check_symmetric(h: np.ndarray) -> np.ndarray:
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if h.shape[0] != h.shape[1]:
        raise ContractViolationError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    asym = float(np.max(np.abs(h - h.T))) if h.size else 0.0
    if asym > 1e-12 * scale:
        raise ContractViolationError(
            f"matrix not symmetric (max |H - H^T| = {asym:.3e})"
        )
    return 0.5 * (h + h.T)


def lex_positive(v: np.ndarray) -> np.ndarray:
    """Flip the sign of v so its first significantly nonzero entry is positive."""
    v = np.asarray(v, dtype=float)
    thresh = 1e-12 * max(1.0, float(np.linalg.norm(v)))
    for x in v:
        if abs(x) > thresh:
            return -v if x < 0 else v
    return v


def min_eigenpair(h: np.ndarray):
    """Smallest eigenvalue and a unit eigenvector of a symmetric matrix.

    The eigenvector sign is normalized so its first nonzero entry is positive.
    """
    hs = _check_symmetric(h)
    w, v = np.linalg.eigh(hs)
    vec = lex_positive(v[:, 0])
    return float(w[0]), vec


def solve_saddle_system(a, b, rhs) -> np.ndarray:
    """Solve the symmetric saddle-point system [[A, B^T], [B, 0]] z = rhs.

    ``a`` is the symmetric top-left block (m x m), ``b`` the coupling block
    (k x m, possibly empty/None) and ``rhs`` the full right-hand side of
    length m + k. Near-singular systems are retried once with a small
    inertia-preserving ridge; anything worse raises SingularSystemError with
    a condition estimate.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    m = a.shape[0]
    if a.shape[1] != m:
        raise ContractViolationError("A block must be square")
    if b is None or np.size(b) == 0:
        k = 0
        kkt = a.copy()
    else:
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if b.shape[1] != m:
            raise ContractViolationError("B block has inconsistent column count")
        k = b.shape[0]
        kkt = np.zeros((m + k, m + k))
        kkt[:m, :m] = a
        kkt[m:, :m] = b
        kkt[:m, m:] = b.T
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (m + k,):
        raise ContractViolationError("rhs length inconsistent with blocks")

    scale = max(1.0, float(np.linalg.norm(rhs)))

    def attempt(mat):
        try:
            # The residual is verified below, so scipy's conditioning warning
            # is redundant noise here.
            with np.errstate(all="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                sol = scipy.linalg.solve(mat, rhs, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(sol)):
            return None
        if np.linalg.norm(kkt @ sol - rhs) > SADDLE_RESIDUAL_TOL * scale:
            return None
        return sol

    sol = attempt(kkt)
    if sol is None:
        # Ridge fallback: +ridge on the A block, -ridge on the zero block,
        # which preserves the saddle inertia.
        ridge = 1e-12 * max(1.0, float(np.linalg.norm(np.diag(kkt))))
        reg = kkt + ridge * np.diag(np.concatenate([np.ones(m), -np.ones(k)]))
        sol = attempt(reg)
    if sol is None:
        cond = float(np.linalg.cond(kkt))
        raise SingularSystemError(
            f"saddle system singular beyond regularization (cond ~ {cond:.3e})",
            condition=cond,
        )
    return sol
