"""Exact and quadrature ground truths for the kernel spectra.

For discrete chains the cross density, its kernel, and the full spectrum
are computed in closed form. For the correlated Gaussian pair the spectrum
is geometric (Hermite eigenfunctions). For arbitrary 2-D joint densities a
quadrature discretization of the density-ratio operator provides the
reference spectrum. A brute-force maximal correlation (second singular
value of the whitened joint, computed through an independent SVD route)
cross-checks the second eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import McModel
from .linalg import EigPair, SymMatrix, sym_eig

__all__ = [
    "DiscreteCdkf",
    "GridSpec",
    "DomainTooSmallError",
    "cross_density_from_joint",
    "mc_cross_density",
    "discrete_spectrum",
    "mehler_spectrum",
    "nystrom_spectrum",
    "recursion_power_spectrum",
    "brute_maximal_correlation",
    "gauss_cross_conditional_check",
    "gauss_joint_pdf",
    "gauss_grid",
]


class DomainTooSmallError(ValueError):
    """The truncated quadrature domain misses too much probability mass."""

    def __init__(self, mass: float):
        self.mass = float(mass)
        super().__init__(
            f"quadrature domain captures mass {self.mass:.6f} < 0.999; enlarge the grid"
        )


@dataclass
class DiscreteCdkf:
    """Cross density over a finite state space with its symmetric kernel.

    cross[i][j] = p(x=i, x'=j); marginal is its row sum; kernel is
    cross / sqrt(marginal_i * marginal_j).
    """

    n_states: int
    cross: np.ndarray
    marginal: np.ndarray
    kernel: SymMatrix

    def __post_init__(self):
        c = np.asarray(self.cross, dtype=float)
        if np.any(c < 0) or abs(c.sum() - 1.0) > 1e-12:
            raise ValueError("cross density entries must be non-negative and sum to 1")
        if np.max(np.abs(c - c.T)) > 1e-12:
            raise ValueError("cross density must be symmetric")


def cross_density_from_joint(joint) -> DiscreteCdkf:
    """Compose the two conditionals of a discrete joint p(x, u) into p(x, x').

    cross[i][j] = sum_u p(x'=j | u) p(u | x=i) p(x=i); requires every u-state
    to have positive marginal probability (Bayes flip is undefined otherwise).
    """
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2 or np.any(p < 0):
        raise ValueError("joint must be a non-negative 2-D table")
    total = p.sum()
    if not total > 0:
        raise ValueError("joint has zero total mass")
    p = p / total
    q_u = p.sum(axis=0)
    if np.any(q_u <= 0):
        raise ValueError("a u-state has zero marginal probability")
    cross = p @ (p / q_u[None, :]).T
    cross = 0.5 * (cross + cross.T)
    cross = cross / cross.sum()
    marginal = cross.sum(axis=1)
    if np.any(marginal <= 0):
        raise ValueError("an x-state has zero marginal probability")
    kernel = SymMatrix.symmetrized(cross / np.sqrt(np.outer(marginal, marginal)))
    return DiscreteCdkf(
        n_states=p.shape[0], cross=cross, marginal=marginal, kernel=kernel
    )


def mc_cross_density(model: McModel) -> DiscreteCdkf:
    """Exact cross density of a chain: joint p(x=i, u=j) = prior_i * transition[i, j]."""
    return cross_density_from_joint(model.prior[:, None] * model.transition)


def discrete_spectrum(d: DiscreteCdkf) -> EigPair:
    """Full eigendecomposition of the discrete kernel; leading value is 1."""
    return sym_eig(d.kernel)


def mehler_spectrum(rho: float, count: int) -> np.ndarray:
    """Geometric spectrum rho^{2(i-1)} of the correlated Gaussian pair's kernel."""
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be below 1")
    return float(rho) ** (2.0 * np.arange(int(count)))


@dataclass(frozen=True)
class GridSpec:
    """Rectangle and resolution for the quadrature spectrum."""

    x_lo: float
    x_hi: float
    u_lo: float
    u_hi: float
    n: int = 128

    def __post_init__(self):
        if self.n < 64:
            raise ValueError("need at least 64 grid points per axis")
        if not (self.x_hi > self.x_lo and self.u_hi > self.u_lo):
            raise ValueError("grid bounds are empty")


def _trapezoid_weights(lo: float, hi: float, n: int) -> np.ndarray:
    w = np.full(n, (hi - lo) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def nystrom_spectrum(joint_pdf, grid: GridSpec, n_eigs: int = 8) -> np.ndarray:
    """Leading kernel eigenvalues of an arbitrary 2-D joint density by quadrature.

    Discretizes the whitened density-ratio operator B with trapezoid weights,
    then returns the leading eigenvalues of B B^T (the kernel of the composed
    cross density). Raises DomainTooSmallError when the rectangle captures
    less than 0.999 of the mass.
    """
    xs = np.linspace(grid.x_lo, grid.x_hi, grid.n)
    us = np.linspace(grid.u_lo, grid.u_hi, grid.n)
    wx = _trapezoid_weights(grid.x_lo, grid.x_hi, grid.n)
    wu = _trapezoid_weights(grid.u_lo, grid.u_hi, grid.n)
    dens = np.asarray(joint_pdf(xs[:, None], us[None, :]), dtype=float)
    if dens.shape != (grid.n, grid.n) or np.any(dens < 0):
        raise ValueError("joint_pdf must return a non-negative (n, n) table")
    mass = float(wx @ dens @ wu)
    if mass < 1.0 - 1e-3:
        raise DomainTooSmallError(mass)
    p_x = np.maximum(dens @ wu, 1e-290)
    p_u = np.maximum(wx @ dens, 1e-290)
    b = (np.sqrt(wx)[:, None] * dens * np.sqrt(wu)[None, :]) / np.sqrt(np.outer(p_x, p_u))
    pair = sym_eig(SymMatrix.symmetrized(b @ b.T))
    return pair.values[: int(n_eigs)].copy()


def gauss_joint_pdf(rho: float):
    """Bivariate normal density with unit marginals and correlation rho."""
    det = 1.0 - rho * rho

    def pdf(x, u):
        quad = (x * x - 2.0 * rho * x * u + u * u) / det
        return np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))

    return pdf


def gauss_grid(n: int = 128, span: float = 6.0) -> GridSpec:
    """Quadrature rectangle at +-span marginal standard deviations."""
    return GridSpec(-span, span, -span, span, n)


def recursion_power_spectrum(d: DiscreteCdkf, k: int) -> np.ndarray:
    """Spectrum of the k-step cross density built by composing the conditional map.

    Equals the element-wise k-th power of the one-step spectrum.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    cond = d.cross / d.marginal[:, None]
    stepk = cond.copy()
    for _ in range(int(k) - 1):
        stepk = stepk @ cond
    cross_k = d.marginal[:, None] * stepk
    kernel_k = SymMatrix.symmetrized(cross_k / np.sqrt(np.outer(d.marginal, d.marginal)))
    return sym_eig(kernel_k).values


def brute_maximal_correlation(joint) -> float:
    """Maximal correlation of a discrete joint: second singular value of the
    whitened table D_x^{-1/2} P D_u^{-1/2} (computed via an SVD route
    independent of the Jacobi eigensolver)."""
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2 or np.any(p < 0):
        raise ValueError("joint must be a non-negative 2-D table")
    p = p / p.sum()
    p_x = p.sum(axis=1)
    p_u = p.sum(axis=0)
    if np.any(p_x <= 0) or np.any(p_u <= 0):
        raise ValueError("joint has a zero marginal entry")
    white = p / np.sqrt(np.outer(p_x, p_u))
    s = np.linalg.svd(white, compute_uv=False)
    if s.shape[0] < 2:
        raise ValueError("joint must have at least two states per side")
    return float(s[1])


def _normal_pdf(x, mean, var):
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def gauss_cross_conditional_check(rho: float, n_grid: int = 2001, span: float = 9.0):
    """Quadrature fit of the composed conditional p(x'|x) for the Gaussian pair.

    Composes u|x ~ N(rho x, 1-rho^2) with x'|u ~ N(rho u, 1-rho^2) on a grid
    and reports (mean_coeff, variance): the linear coefficient of the
    conditional mean in x and the (x-independent) conditional variance.
    """
    if not abs(rho) < 1.0:
        raise ValueError("|rho| must be below 1")
    points = np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
    u = np.linspace(-span, span, n_grid)
    xp = np.linspace(-span, span, n_grid)
    wu = _trapezoid_weights(-span, span, n_grid)
    wxp = _trapezoid_weights(-span, span, n_grid)
    var1 = 1.0 - rho * rho
    # columns: p(x'|u) on the xp grid for every u node
    flow = _normal_pdf(xp[:, None], rho * u[None, :], var1)
    means = np.empty(points.shape[0])
    variances = np.empty(points.shape[0])
    for i, x in enumerate(points):
        cond_u = _normal_pdf(u, rho * x, var1) * wu
        dens = flow @ cond_u
        mass = float(dens @ wxp)
        m = float((xp * dens) @ wxp) / mass
        v = float(((xp - m) ** 2 * dens) @ wxp) / mass
        means[i] = m
        variances[i] = v
    mean_coeff = float((means @ points) / (points @ points))
    return mean_coeff, float(variances.mean())
