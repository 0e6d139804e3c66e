"""Normalization pipeline: trained networks -> kernel spectrum and eigenfunctions.

Two stages. First, whiten each family's outputs by the inverse square root
of its ACF so the empirical second moment is the identity. Second, rotate
by the eigenvectors of P'P'^T (resp. P'^T P'), where P' is the whitened
cross-correlation; the rotated outputs estimate the orthonormal
eigenfunctions of the cross-density ratio and the eigenvalues of P'P'^T
estimate the kernel eigenvalues sigma_1 >= sigma_2 >= ...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import batch_acf, batch_ccf
from .linalg import SymMatrix, inv_half_power, sym_eig
from .netfn import MlpParams, forward

__all__ = [
    "SpectrumResult",
    "whiten",
    "cross_spectrum",
    "estimate_spectrum",
    "eigenfunctions",
    "cdr",
    "cdr_matrix",
    "total_power",
]


@dataclass
class SpectrumResult:
    """Eigenvalue estimates plus the transforms that produced them.

    sigma: descending, length min(K, L). w_f, w_g: whitening transforms
    (inverse half powers of the ACFs). q_f, q_g: orthogonal rotations.
    """

    sigma: np.ndarray
    w_f: SymMatrix
    w_g: SymMatrix
    q_f: np.ndarray
    q_g: np.ndarray


def whiten(outputs: np.ndarray, acf: SymMatrix) -> np.ndarray:
    """Transform each output row by acf^{-1/2}."""
    return np.asarray(outputs, dtype=float) @ inv_half_power(acf).a


def cross_spectrum(f_bar: np.ndarray, g_bar: np.ndarray):
    """Spectrum of the whitened cross-correlation.

    Returns (sigma, q_f, q_g): sigma are the eigenvalues of P'P'^T (equal to
    the squared singular values of P' and, on the leading min(K, L) entries,
    to the eigenvalues of P'^T P'), q_f and q_g the eigenvector matrices.
    """
    p = batch_ccf(f_bar, g_bar)
    pair_f = sym_eig(SymMatrix.symmetrized(p @ p.T))
    pair_g = sym_eig(SymMatrix.symmetrized(p.T @ p))
    m = min(p.shape)
    return pair_f.values[:m].copy(), pair_f.vectors, pair_g.vectors


def estimate_spectrum(outputs_f: np.ndarray, outputs_g: np.ndarray, eps: float) -> SpectrumResult:
    """Full pipeline on evaluation outputs: ACFs, whitening, cross spectrum."""
    r_f = batch_acf(outputs_f, eps)
    r_g = batch_acf(outputs_g, eps)
    w_f = inv_half_power(r_f)
    w_g = inv_half_power(r_g)
    sigma, q_f, q_g = cross_spectrum(outputs_f @ w_f.a, outputs_g @ w_g.a)
    return SpectrumResult(sigma=sigma, w_f=w_f, w_g=w_g, q_f=q_f, q_g=q_g)


def eigenfunctions(params: MlpParams, res: SpectrumResult, batch, side: str = "f") -> np.ndarray:
    """Evaluate normalized eigenfunction estimates Q^T W f(x) row-wise."""
    if side == "f":
        w, q = res.w_f, res.q_f
    elif side == "g":
        w, q = res.w_g, res.q_g
    else:
        raise ValueError(f"side must be 'f' or 'g', got {side!r}")
    out = forward(params, batch)
    if out.shape[1] != w.dim:
        raise ValueError(
            f"network output dim {out.shape[1]} does not match spectrum dim {w.dim}"
        )
    return out @ w.a @ q


def cdr(params: MlpParams, res: SpectrumResult, x, x_prime, side: str = "f") -> float:
    """Cross-density-ratio estimate sum_i sigma_i phi_i(x) phi_i(x'); symmetric."""
    phi_a = eigenfunctions(params, res, np.atleast_2d(np.asarray(x, dtype=float)), side)
    phi_b = eigenfunctions(params, res, np.atleast_2d(np.asarray(x_prime, dtype=float)), side)
    m = res.sigma.shape[0]
    # grouping (phi_a * phi_b) * sigma commutes bitwise, so swapping the
    # arguments returns the identical float
    return float(np.sum(phi_a[0, :m] * phi_b[0, :m] * res.sigma))


def cdr_matrix(params: MlpParams, res: SpectrumResult, rows_a, rows_b=None, side: str = "f") -> np.ndarray:
    """Pairwise CDR estimates; with one argument the matrix is symmetrized."""
    m = res.sigma.shape[0]
    phi_a = eigenfunctions(params, res, rows_a, side)[:, :m]
    if rows_b is None:
        mat = (phi_a * res.sigma) @ phi_a.T
        return 0.5 * (mat + mat.T)
    phi_b = eigenfunctions(params, res, rows_b, side)[:, :m]
    return (phi_a * res.sigma) @ phi_b.T


def total_power(sigma, divisor: float = 20.0) -> float:
    """Scalar dependence summary -(1/divisor) * sum_{i>=2} log(1 - sigma_i).

    The leading eigenvalue is the constant-eigenfunction one (identically 1
    in theory) and is skipped; remaining values are clamped at 1 - 1e-6 so
    the measure stays finite under near-strict dependence.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 1:
        raise ValueError("sigma must be a vector")
    if s.shape[0] < 2:
        return 0.0
    tail = np.minimum(s[1:], 1.0 - 1e-6)
    return float(-np.sum(np.log(1.0 - tail)) / divisor)
