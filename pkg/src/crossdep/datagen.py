"""Synthetic paired-process generators and coding schemes.

Generators: a random-transition Markov chain over discrete states, a
correlated Gaussian pair, and four 2-D joint densities (Gaussian mixture,
two moons, spiral, checkerboard) whose two coordinates play the roles of
the two processes. Coding schemes turn base data into paired (x, u)
training streams: labels (class), same-class partners (similarity), the
sample itself (maximal dependence), fixed uniform noise codes (factorial),
and sliding windows against a target series (temporal).

All samplers are pure functions of (params, n, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SymMatrix, inverse

__all__ = [
    "McModel",
    "GaussModel",
    "PairedDataset",
    "mc_build",
    "mc_identical_rows",
    "mc_sample",
    "gauss_sample",
    "uniform_sample",
    "shape_sample",
    "make_pairs",
    "temporal_pairs",
    "stream_pairs",
    "mc_pairs",
    "gauss_pairs",
    "shape_pairs",
    "wiener_readout",
    "write_pairs_csv",
]

_SCHEMES = ("raw", "class", "similarity", "maximal_dependence", "factorial", "temporal")
_SHAPE_KINDS = ("gmm", "two_moons", "spiral", "check")


@dataclass(frozen=True)
class McModel:
    """Finite-state chain: row-stochastic transition plus a prior over states."""

    n_states: int
    p_alpha: float
    transition: np.ndarray
    prior: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transition, dtype=float)
        pr = np.asarray(self.prior, dtype=float)
        if t.shape != (self.n_states, self.n_states):
            raise ValueError("transition shape does not match n_states")
        if np.any(t < 0) or np.max(np.abs(t.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be non-negative and sum to 1")
        if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be a probability vector")
        object.__setattr__(self, "transition", t)
        object.__setattr__(self, "prior", pr)


@dataclass(frozen=True)
class GaussModel:
    """Correlated scalar Gaussian pair: x ~ N(0,1), u|x ~ N(rho x, 1 - rho^2)."""

    rho_alpha: float

    def __post_init__(self):
        if not abs(self.rho_alpha) < 1.0:
            raise ValueError("correlation coefficient must satisfy |rho| < 1")


def mc_build(p_alpha: float, n_states: int = 10, seed=0) -> McModel:
    """Draw a chain: uniform base transitions, diagonal boosted by (1+j)*p_alpha.

    Off-diagonal base entries are U(0, (1-p_alpha)/n_states); the boost grows
    with the state index, so p_alpha=1 degenerates to the identity chain.
    The prior over the initial state is uniform.
    """
    if not 0.0 <= p_alpha <= 1.0:
        raise ValueError("p_alpha must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, (1.0 - p_alpha) / n_states, size=(n_states, n_states))
    base[np.diag_indices(n_states)] += (1.0 + np.arange(n_states)) * p_alpha
    sums = base.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise ValueError("degenerate transition draw: a row has zero mass")
    return McModel(
        n_states=n_states,
        p_alpha=float(p_alpha),
        transition=base / sums,
        prior=np.full(n_states, 1.0 / n_states),
    )


def mc_identical_rows(n_states: int = 10, seed=0) -> McModel:
    """A chain whose rows are all equal: the next state is independent of the current."""
    rng = np.random.default_rng(seed)
    row = rng.uniform(0.1, 1.0, size=n_states)
    row = row / row.sum()
    return McModel(
        n_states=n_states,
        p_alpha=0.0,
        transition=np.tile(row, (n_states, 1)),
        prior=np.full(n_states, 1.0 / n_states),
    )


def _mc_draw(model: McModel, n: int, rng) -> tuple:
    x_idx = rng.choice(model.n_states, size=n, p=model.prior)
    cum = np.cumsum(model.transition, axis=1)[x_idx]
    u_idx = np.minimum((cum < rng.random(n)[:, None]).sum(axis=1), model.n_states - 1)
    eye = np.eye(model.n_states)
    return eye[x_idx], eye[u_idx]


def mc_sample(model: McModel, n: int, seed=0):
    """n one-hot pairs: x from the prior, u from the x-th transition row."""
    return _mc_draw(model, n, np.random.default_rng(seed))


def _gauss_draw(model: GaussModel, n: int, rng) -> tuple:
    x = rng.standard_normal(n)
    u = model.rho_alpha * x + np.sqrt(1.0 - model.rho_alpha**2) * rng.standard_normal(n)
    return x[:, None], u[:, None]


def gauss_sample(model: GaussModel, n: int, seed=0):
    """n scalar pairs with correlation rho_alpha; both marginals are N(0,1)."""
    return _gauss_draw(model, n, np.random.default_rng(seed))


def uniform_sample(dim: int, n: int, seed=0) -> np.ndarray:
    """n points uniform on the unit cube [0,1]^dim."""
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(n, dim))


def _gmm_spec(params: dict):
    means = np.asarray(
        params.get("means", [[-2.0, -2.0], [-2.0, 2.0], [2.0, -2.0], [2.0, 2.0]]),
        dtype=float,
    )
    k = means.shape[0]
    if "covs" in params:
        covs = np.asarray(params["covs"], dtype=float)
        chols = np.linalg.cholesky(covs)
    else:
        sigma = float(params.get("sigma", 0.5))
        chols = np.tile(sigma * np.eye(2), (k, 1, 1))
    weights = np.asarray(params.get("weights", np.full(k, 1.0 / k)), dtype=float)
    weights = weights / weights.sum()
    return means, chols, weights


def _draw_gmm(params: dict, n: int, rng):
    means, chols, weights = _gmm_spec(params)
    comp = rng.choice(means.shape[0], size=n, p=weights)
    noise = rng.standard_normal((n, 2))
    pts = means[comp] + np.einsum("nij,nj->ni", chols[comp], noise)
    return pts, comp


def _draw_two_moons(params: dict, n: int, rng):
    noise = float(params.get("noise", 0.08))
    n_up = n - n // 2
    t_up = rng.uniform(0.0, np.pi, n_up)
    t_lo = rng.uniform(0.0, np.pi, n // 2)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_lo), 0.5 - np.sin(t_lo)])
    pts = np.vstack([upper, lower]) + noise * rng.standard_normal((n, 2))
    labels = np.concatenate([np.zeros(n_up, dtype=int), np.ones(n // 2, dtype=int)])
    perm = rng.permutation(n)
    return pts[perm], labels[perm]


def _draw_spiral(params: dict, n: int, rng):
    # Archimedean arms: radius grows linearly with angle over `turns` turns.
    noise = float(params.get("noise", 0.05))
    arms = int(params.get("arms", 2))
    turns = float(params.get("turns", 1.25))
    scale = float(params.get("scale", 2.0))
    arm = rng.integers(0, arms, size=n)
    frac = rng.uniform(0.05, 1.0, size=n)
    angle = 2.0 * np.pi * turns * frac + 2.0 * np.pi * arm / arms
    radius = scale * frac
    pts = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    return pts + noise * rng.standard_normal((n, 2)), arm


def _check_cells(grid: int) -> np.ndarray:
    cells = [(i, j) for i in range(grid) for j in range(grid) if (i + j) % 2 == 0]
    return np.asarray(cells, dtype=float)


def _draw_check(params: dict, n: int, rng):
    grid = int(params.get("grid", 2))
    jitter = float(params.get("jitter", 0.0))
    cells = _check_cells(grid)
    which = rng.integers(0, cells.shape[0], size=n)
    pts = (cells[which] + rng.uniform(0.0, 1.0, size=(n, 2))) / grid
    if jitter > 0.0:
        pts = pts + jitter * rng.standard_normal((n, 2))
    return pts, None


_SHAPE_DRAWS = {
    "gmm": _draw_gmm,
    "two_moons": _draw_two_moons,
    "spiral": _draw_spiral,
    "check": _draw_check,
}


def shape_sample(kind: str, params, n: int, seed=0):
    """Draw n 2-D points from the named joint density; returns (points, labels).

    labels are component/branch indices where the construction has them
    (gmm, two_moons, spiral) and None otherwise (check).
    """
    if kind not in _SHAPE_DRAWS:
        raise ValueError(f"unknown shape kind: {kind!r}")
    return _SHAPE_DRAWS[kind](dict(params or {}), n, np.random.default_rng(seed))


class PairedDataset:
    """Deterministic source of (x, u) pairs for training and evaluation.

    Backed either by a streaming pair function (fresh draws every batch) or
    by a finite base set combined with a coding scheme. batch(m, step) is a
    pure function of (m, step) given the construction.
    """

    def __init__(self, x_dim, u_dim, scheme, seed, *, pair_fn=None, x_base=None,
                 u_base=None, labels=None, codes=None, n_classes=None):
        if scheme not in _SCHEMES:
            raise ValueError(f"unknown coding scheme: {scheme!r}")
        seed = int(seed)
        if seed < 0:
            raise ValueError("dataset seed must be non-negative")
        self.x_dim = int(x_dim)
        self.u_dim = int(u_dim)
        self.scheme = scheme
        self.seed = seed
        self._pair_fn = pair_fn
        self._x_base = x_base
        self._u_base = u_base
        self._labels = labels
        self._codes = codes
        self._n_classes = n_classes
        self._partner_cache = None
        if codes is not None:
            codes.setflags(write=False)

    @property
    def n_base(self):
        return None if self._x_base is None else self._x_base.shape[0]

    @property
    def labels(self):
        return self._labels

    @property
    def x_base(self):
        return self._x_base

    @property
    def codes(self):
        return self._codes

    def batch(self, m: int, step: int):
        """m pairs for training step `step`; deterministic in (m, step)."""
        rng = np.random.default_rng((self.seed, 104729, int(step)))
        if self._pair_fn is not None:
            return self._pair_fn(int(m), rng)
        idx = rng.integers(0, self.n_base, size=int(m))
        epoch = (int(step) * int(m)) // self.n_base
        return self._emit(idx, epoch)

    def eval_batch(self, m: int, tag: int = 0):
        """m pairs from a stream disjoint from every training step."""
        rng = np.random.default_rng((self.seed, 15485863, int(tag)))
        if self._pair_fn is not None:
            return self._pair_fn(int(m), rng)
        idx = rng.integers(0, self.n_base, size=int(m))
        return self._emit(idx, 0)

    def _emit(self, idx, epoch):
        x = self._x_base[idx]
        if self.scheme in ("raw", "temporal"):
            return x, self._u_base[idx]
        if self.scheme == "class":
            return x, np.eye(self._n_classes)[self._labels[idx]]
        if self.scheme == "maximal_dependence":
            return x, self._x_base[idx]
        if self.scheme == "factorial":
            return x, self._codes[idx]
        # similarity: partner drawn per epoch from the same class
        partners = self._partner_table(epoch)
        return x, self._x_base[partners[idx]]

    def _partner_table(self, epoch):
        if self._partner_cache is not None and self._partner_cache[0] == epoch:
            return self._partner_cache[1]
        rng = np.random.default_rng((self.seed, 7919, int(epoch)))
        partner = np.arange(self.n_base)
        for c in np.unique(self._labels):
            members = np.flatnonzero(self._labels == c)
            size = members.shape[0]
            if size < 2:
                continue
            draw = rng.integers(0, size - 1, size=size)
            draw = draw + (draw >= np.arange(size))  # uniform over the other members
            partner[members] = members[draw]
        self._partner_cache = (epoch, partner)
        return partner


def stream_pairs(pair_fn, x_dim: int, u_dim: int, seed=0) -> PairedDataset:
    """Wrap a pair function (n, rng) -> (X, U) as a streaming raw dataset."""
    return PairedDataset(x_dim, u_dim, "raw", seed, pair_fn=pair_fn)


def mc_pairs(model: McModel, seed=0) -> PairedDataset:
    return stream_pairs(lambda n, rng: _mc_draw(model, n, rng),
                        model.n_states, model.n_states, seed)


def gauss_pairs(model: GaussModel, seed=0) -> PairedDataset:
    return stream_pairs(lambda n, rng: _gauss_draw(model, n, rng), 1, 1, seed)


def shape_pairs(kind: str, params=None, seed=0) -> PairedDataset:
    """The two coordinates of a 2-D joint density as the two processes."""
    if kind not in _SHAPE_DRAWS:
        raise ValueError(f"unknown shape kind: {kind!r}")
    frozen = dict(params or {})

    def draw(n, rng):
        pts, _ = _SHAPE_DRAWS[kind](frozen, n, rng)
        return pts[:, 0:1], pts[:, 1:2]

    return stream_pairs(draw, 1, 1, seed)


def make_pairs(scheme: str, x, labels=None, u=None, seed=0, code_len: int = 16) -> PairedDataset:
    """Combine base data with a coding scheme into a finite paired dataset.

    class: u is the one-hot label. similarity: u is another sample with the
    same label, re-drawn each epoch. maximal_dependence: u is the sample
    itself. factorial: u is a per-sample uniform code of length code_len,
    presampled once and immutable. raw: u must be given explicitly.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("base data must be a non-empty 2-D array")
    n = x.shape[0]
    if scheme == "raw":
        if u is None:
            raise ValueError("raw scheme requires explicit u rows")
        u = np.asarray(u, dtype=float)
        if u.shape[0] != n:
            raise ValueError("x and u row counts differ")
        return PairedDataset(x.shape[1], u.shape[1], "raw", seed, x_base=x, u_base=u)
    if scheme in ("class", "similarity"):
        if labels is None:
            raise ValueError(f"{scheme} scheme requires labels")
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValueError("labels must align with base rows")
        classes, mapped = np.unique(labels, return_inverse=True)
        if scheme == "class":
            return PairedDataset(x.shape[1], classes.shape[0], "class", seed,
                                 x_base=x, labels=mapped, n_classes=classes.shape[0])
        return PairedDataset(x.shape[1], x.shape[1], "similarity", seed,
                             x_base=x, labels=mapped)
    if scheme == "maximal_dependence":
        return PairedDataset(x.shape[1], x.shape[1], "maximal_dependence", seed, x_base=x)
    if scheme == "factorial":
        if code_len < 1:
            raise ValueError("code_len must be positive")
        codes = np.random.default_rng((int(seed), 28657)).uniform(0.0, 1.0, size=(n, code_len))
        return PairedDataset(x.shape[1], code_len, "factorial", seed, x_base=x, codes=codes)
    raise ValueError(f"unknown coding scheme: {scheme!r}")


def temporal_pairs(series, target, order: int, seed=0) -> PairedDataset:
    """x = sliding windows of `order` past inputs, u = the current target sample."""
    series = np.asarray(series, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if series.shape[0] != target.shape[0]:
        raise ValueError("series and target lengths differ")
    if order < 1:
        raise ValueError("order must be at least 1")
    if series.shape[0] < order:
        raise ValueError("series shorter than the filter order")
    windows = np.lib.stride_tricks.sliding_window_view(series, order).copy()
    aligned = target[order - 1 :][:, None].copy()
    return PairedDataset(order, 1, "temporal", seed, x_base=windows, u_base=aligned)


def wiener_readout(features, targets, eps: float = 1e-3) -> np.ndarray:
    """Ridge-regularized normal-equation solve of features @ w ~= targets."""
    f = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if f.shape[0] != y.shape[0]:
        raise ValueError("features and targets row counts differ")
    gram = SymMatrix.symmetrized(f.T @ f + eps * np.eye(f.shape[1]))
    return inverse(gram).a @ (f.T @ y)


def write_pairs_csv(path, x_rows, u_rows):
    """One pair per line: x coordinates then u coordinates, 17 significant digits."""
    x = np.asarray(x_rows, dtype=float)
    u = np.asarray(u_rows, dtype=float)
    if x.shape[0] != u.shape[0]:
        raise ValueError("x and u row counts differ")
    header = ",".join([f"x_{i}" for i in range(x.shape[1])]
                      + [f"u_{i}" for i in range(u.shape[1])])
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for xi, ui in zip(x, u):
            fh.write(",".join(f"{v:.17g}" for v in (*xi, *ui)) + "\n")
