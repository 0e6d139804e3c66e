"""Dense symmetric linear algebra primitives.

Every statistic downstream (correlation matrices, whitening transforms,
kernel spectra) lives on small dense symmetric matrices, so this module
keeps its own Cholesky and Jacobi routines instead of deferring to LAPACK:
callers rely on deterministic eigenvector signs, a stable eigenvalue order,
and factorization failures that name the offending pivot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NotPositiveDefinite",
    "EigenConvergenceError",
    "SymMatrix",
    "EigPair",
    "sym_eig",
    "chol_pivots",
    "chol_logdet",
    "inv_half_power",
    "inverse",
]

# Jacobi sweep cap and relative off-diagonal-norm threshold.
_SWEEP_CAP = 100
_OFF_TOL = 1e-12


class NotPositiveDefinite(ValueError):
    """A Cholesky pivot was not strictly positive.

    Attributes
    ----------
    pivot : int
        Index of the failing pivot.
    value : float
        The non-positive pivot value encountered.
    """

    def __init__(self, pivot: int, value: float):
        self.pivot = int(pivot)
        self.value = float(value)
        super().__init__(
            f"matrix is not positive definite: pivot {self.pivot} = {self.value:.6g}"
        )


class EigenConvergenceError(RuntimeError):
    """Jacobi iteration hit the sweep cap before converging."""

    def __init__(self, sweeps: int, residual: float):
        self.sweeps = int(sweeps)
        self.residual = float(residual)
        super().__init__(
            f"eigendecomposition did not converge after {self.sweeps} sweeps; "
            f"off-diagonal norm {self.residual:.3e}"
        )


class SymMatrix:
    """Dense symmetric matrix with exact (bitwise) symmetry.

    The constructor rejects input that is not exactly symmetric; use
    :meth:`symmetrized` for matrices that are symmetric only up to float
    rounding (e.g. products returned by BLAS).
    """

    __slots__ = ("a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("matrix dimension must be at least 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix entries are not exactly symmetric")
        self.a = a

    @classmethod
    def symmetrized(cls, entries) -> "SymMatrix":
        """Build from a nearly-symmetric matrix by averaging with its transpose."""
        a = np.asarray(entries, dtype=float)
        # 0.5*(a + a.T) is bitwise symmetric: IEEE addition commutes.
        return cls(0.5 * (a + a.T))

    @classmethod
    def identity(cls, dim: int) -> "SymMatrix":
        return cls(np.eye(int(dim)))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is not None:
            return self.a.astype(dtype)
        return self.a

    def __repr__(self):
        return f"SymMatrix(dim={self.dim})"


@dataclass
class EigPair:
    """Eigenvalues sorted descending with column-aligned orthogonal eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.vectors = np.asarray(self.vectors, dtype=float)
        n = self.values.shape[0]
        if self.vectors.shape != (n, n):
            raise ValueError("eigenvector matrix shape does not match value count")
        if np.any(np.diff(self.values) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        gram = self.vectors @ self.vectors.T
        err = np.linalg.norm(gram - np.eye(n))
        if err > 1e-10:
            raise ValueError(f"eigenvectors not orthogonal: residual {err:.3e}")


def _as_array(s) -> np.ndarray:
    return s.a if isinstance(s, SymMatrix) else SymMatrix(np.asarray(s, dtype=float)).a


def _off_norm_sq(a: np.ndarray) -> float:
    # summed directly over off-diagonal entries: the subtraction
    # sum(a^2) - sum(diag^2) cancels catastrophically near convergence
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    return float(np.sum(off * off))


def sym_eig(s) -> EigPair:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns values sorted descending; each eigenvector column is signed so
    its entry of largest magnitude is non-negative (lowest index on ties).
    """
    a = _as_array(s).copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return _finalize(np.array([a[0, 0]]), v)

    off = np.sqrt(_off_norm_sq(a))
    for sweep in range(_SWEEP_CAP):
        fro = np.sqrt(np.sum(a * a))
        if off <= _OFF_TOL * max(1.0, fro):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                sn = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - sn * vec_q
                v[:, q] = sn * vec_p + c * vec_q
        off = np.sqrt(_off_norm_sq(a))
    else:
        raise EigenConvergenceError(_SWEEP_CAP, off)

    return _finalize(np.diag(a).copy(), v)


def _finalize(values: np.ndarray, vectors: np.ndarray) -> EigPair:
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    for j in range(vectors.shape[1]):
        lead = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[lead, j] < 0.0:
            vectors[:, j] = -vectors[:, j]
    return EigPair(values=values, vectors=vectors)


def _chol_lower(a: np.ndarray) -> np.ndarray:
    """Cholesky factor L with a @ a.T == input; raises on non-positive pivots."""
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefinite(j, pivot)
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def _solve_lower(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.array(b, dtype=float, copy=True)
    for i in range(low.shape[0]):
        if i:
            x[i] = x[i] - low[i, :i] @ x[:i]
        x[i] = x[i] / low[i, i]
    return x


def _solve_lower_t(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.array(b, dtype=float, copy=True)
    for i in range(low.shape[0] - 1, -1, -1):
        x[i] = x[i] - low[i + 1 :, i] @ x[i + 1 :]
        x[i] = x[i] / low[i, i]
    return x


def chol_pivots(s) -> np.ndarray:
    """Diagonal of the lower Cholesky factor; raises NotPositiveDefinite."""
    return np.diag(_chol_lower(_as_array(s))).copy()


def chol_logdet(s) -> float:
    """log-determinant of a symmetric positive definite matrix via Cholesky."""
    return float(2.0 * np.sum(np.log(chol_pivots(s))))


def inverse(s) -> SymMatrix:
    """Inverse of a symmetric positive definite matrix."""
    a = _as_array(s)
    low = _chol_lower(a)
    inv = _solve_lower_t(low, _solve_lower(low, np.eye(a.shape[0])))
    return SymMatrix.symmetrized(inv)


def inv_half_power(s, floor: float = 1e-12) -> SymMatrix:
    """Inverse symmetric square root, with eigenvalues floored before the power.

    Returns V diag(max(lam, floor))^{-1/2} V^T; the floor absorbs degenerate
    directions so the operation never fails on PSD input.
    """
    if not floor > 0.0:
        raise ValueError("floor must be positive")
    pair = sym_eig(s)
    scaled = pair.vectors * np.maximum(pair.values, floor) ** -0.5
    return SymMatrix.symmetrized(scaled @ pair.vectors.T)
