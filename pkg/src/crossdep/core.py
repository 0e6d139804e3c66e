"""Log-determinant dependence objective and its training loop.

The score of two function families f, g over a paired batch is

    r = logdet R_FG - logdet R_F - logdet R_G

with R_F, R_G ridge-regularized second-moment (ACF) matrices of the network
outputs, P_FG their cross-correlation (CCF), and R_FG the joint block
matrix [[R_F, P_FG], [P_FG^T, R_G]]. The score is never positive; driving
it down captures dependence. Training follows a minibatch loop with
EMA-tracked statistics, bias correction, and per-sample output gradients
fed through manual backprop.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import SymMatrix, chol_logdet, inv_half_power, inverse, sym_eig
from .netfn import MlpParams, adam_init, adam_step, backward, forward, mlp_init

__all__ = [
    "CorrState",
    "TrainConfig",
    "TrainHistory",
    "TrainError",
    "init_corr_state",
    "batch_acf",
    "batch_ccf",
    "ema_update",
    "bias_correct",
    "score",
    "output_grads",
    "state_sigma",
    "train",
]


class TrainError(RuntimeError):
    """A numerical failure inside the training loop, tagged with the iteration."""

    def __init__(self, iteration: int, cause: Exception):
        self.iteration = int(iteration)
        super().__init__(f"iteration {self.iteration}: {cause}")


@dataclass
class CorrState:
    """EMA-tracked correlation statistics plus the step counter."""

    r_f: SymMatrix
    r_g: SymMatrix
    p_fg: np.ndarray
    k: int
    beta: float
    eps: float


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    k: int = 20
    l: int = 20
    batch_size: int = 256
    iterations: int = 2000
    eps: float = 1e-3
    beta: float = 0.99
    seed: int = 0
    hidden_f: tuple = (300, 300, 300)
    hidden_g: tuple = (300, 300, 300)
    update_mode: str = "simultaneous"
    inner_steps: int = 1
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    eps_adam: float = 1e-8
    log_interval: int = 100

    def __post_init__(self):
        if self.k < 1 or self.l < 1:
            raise ValueError("output dimensions k, l must be at least 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.update_mode not in ("simultaneous", "alternating"):
            raise ValueError(f"unknown update_mode: {self.update_mode!r}")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        self.hidden_f = tuple(int(h) for h in self.hidden_f)
        self.hidden_g = tuple(int(h) for h in self.hidden_g)


@dataclass
class TrainHistory:
    """Per-logged-iteration score, raw eigenvalue estimates, and wall-clock."""

    iterations: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    sigmas: list = field(default_factory=list)
    wall: list = field(default_factory=list)

    def append(self, iteration, score_value, sigma, wall_seconds):
        if self.iterations and iteration <= self.iterations[-1]:
            raise ValueError("history iterations must be strictly increasing")
        self.iterations.append(int(iteration))
        self.scores.append(float(score_value))
        self.sigmas.append(np.asarray(sigma, dtype=float))
        self.wall.append(float(wall_seconds))

    def sigma_reported(self) -> np.ndarray:
        """Logged eigenvalue estimates clamped to [0, 1]; raw values stay in .sigmas."""
        if not self.sigmas:
            return np.zeros((0, 0))
        return np.clip(np.stack(self.sigmas), 0.0, 1.0)


def init_corr_state(k: int, l: int, beta: float, eps: float) -> CorrState:
    """Fresh EMA state: zero statistics, step counter zero.

    Zero init is what the (1 - beta^k) bias correction assumes; it makes the
    corrected statistics exact weighted averages of the batch statistics, so
    the first corrected value equals the first batch value.
    """
    return CorrState(
        r_f=SymMatrix(np.zeros((k, k))),
        r_g=SymMatrix(np.zeros((l, l))),
        p_fg=np.zeros((k, l)),
        k=0,
        beta=float(beta),
        eps=float(eps),
    )


def batch_acf(outputs: np.ndarray, eps: float) -> SymMatrix:
    """(1/n) F^T F + eps I over the batch rows."""
    f = np.asarray(outputs, dtype=float)
    n = f.shape[0]
    acf = (f.T @ f) / n + eps * np.eye(f.shape[1])
    return SymMatrix.symmetrized(acf)


def batch_ccf(outputs_f: np.ndarray, outputs_g: np.ndarray) -> np.ndarray:
    """(1/n) F^T G over paired batch rows."""
    f = np.asarray(outputs_f, dtype=float)
    g = np.asarray(outputs_g, dtype=float)
    if f.shape[0] != g.shape[0]:
        raise ValueError(f"row counts differ: {f.shape[0]} vs {g.shape[0]}")
    return (f.T @ g) / f.shape[0]


def ema_update(state: CorrState, r_f: SymMatrix, r_g: SymMatrix, p_fg: np.ndarray) -> CorrState:
    """One recursive-estimator step: stat <- beta*old + (1-beta)*new; k <- k+1."""
    b = state.beta
    if r_f.dim != state.r_f.dim or r_g.dim != state.r_g.dim:
        raise ValueError("batch statistic dimensions do not match state")
    if np.shape(p_fg) != state.p_fg.shape:
        raise ValueError("batch CCF shape does not match state")
    return CorrState(
        r_f=SymMatrix(b * state.r_f.a + (1.0 - b) * r_f.a),
        r_g=SymMatrix(b * state.r_g.a + (1.0 - b) * r_g.a),
        p_fg=b * state.p_fg + (1.0 - b) * np.asarray(p_fg, dtype=float),
        k=state.k + 1,
        beta=state.beta,
        eps=state.eps,
    )


def bias_correct(state: CorrState):
    """Divide each EMA statistic by (1 - beta^k); requires at least one update."""
    if state.k < 1:
        raise ValueError("bias correction requires at least one EMA update")
    div = 1.0 - state.beta ** state.k
    return (
        SymMatrix(state.r_f.a / div),
        SymMatrix(state.r_g.a / div),
        state.p_fg / div,
    )


def _joint_block(r_f: SymMatrix, r_g: SymMatrix, p_fg: np.ndarray) -> SymMatrix:
    k, l = r_f.dim, r_g.dim
    p = np.asarray(p_fg, dtype=float)
    if p.shape != (k, l):
        raise ValueError(f"CCF shape {p.shape} does not match block dims ({k}, {l})")
    joint = np.empty((k + l, k + l))
    joint[:k, :k] = r_f.a
    joint[k:, k:] = r_g.a
    joint[:k, k:] = p
    joint[k:, :k] = p.T
    return SymMatrix(joint)


def score(r_f, r_g, p_fg) -> float:
    """logdet of the joint block matrix minus the marginal logdets; always <= 0.

    Evaluated through the Schur complement: logdet J - logdet R_F equals
    logdet(R_G - P' R_F^{-1} P), so the score is that logdet minus
    logdet R_G. At zero CCF the complement is bitwise R_G and the two terms
    cancel exactly, instead of leaving an ulp-level factorization residue.
    """
    r_f = r_f if isinstance(r_f, SymMatrix) else SymMatrix(r_f)
    r_g = r_g if isinstance(r_g, SymMatrix) else SymMatrix(r_g)
    k, l = r_f.dim, r_g.dim
    p = np.asarray(p_fg, dtype=float)
    if p.shape != (k, l):
        raise ValueError(f"CCF shape {p.shape} does not match block dims ({k}, {l})")
    complement = SymMatrix.symmetrized(r_g.a - p.T @ inverse(r_f).a @ p)
    return chol_logdet(complement) - chol_logdet(r_g)


def output_grads(r_f, r_g, p_fg, outputs_f, outputs_g):
    """Per-sample gradient of the batch score with respect to network outputs.

    Uses the supplied (bias-corrected) statistics for the inverses and the
    current batch rows for the outer-product derivative terms:

        dF[n] = (2/n) * ( (J^{-1} z_n)[:K] - R_F^{-1} f_n ),   z_n = [f_n; g_n]

    and symmetrically for dG with the bottom block.
    """
    r_f = r_f if isinstance(r_f, SymMatrix) else SymMatrix(r_f)
    r_g = r_g if isinstance(r_g, SymMatrix) else SymMatrix(r_g)
    f = np.asarray(outputs_f, dtype=float)
    g = np.asarray(outputs_g, dtype=float)
    if f.shape[0] != g.shape[0]:
        raise ValueError(f"row counts differ: {f.shape[0]} vs {g.shape[0]}")
    k = r_f.dim
    joint = _joint_block(r_f, r_g, p_fg)
    j_inv = inverse(joint).a
    rf_inv = inverse(r_f).a
    rg_inv = inverse(r_g).a
    n = f.shape[0]
    rows = np.hstack([f, g]) @ j_inv  # row n holds (J^{-1} z_n)^T
    d_f = (2.0 / n) * (rows[:, :k] - f @ rf_inv)
    d_g = (2.0 / n) * (rows[:, k:] - g @ rg_inv)
    return d_f, d_g


def state_sigma(r_f: SymMatrix, r_g: SymMatrix, p_fg: np.ndarray) -> np.ndarray:
    """Raw eigenvalue estimates from statistics: spectrum of P'P'^T after whitening."""
    w_f = inv_half_power(r_f)
    w_g = inv_half_power(r_g)
    p_bar = w_f.a @ np.asarray(p_fg, dtype=float) @ w_g.a
    return sym_eig(SymMatrix.symmetrized(p_bar @ p_bar.T)).values


def train(cfg: TrainConfig, data):
    """Minibatch training of the two families; deterministic in cfg.seed.

    `data` provides x_dim, u_dim, and batch(m, step) -> (X, U). Returns
    (f_params, g_params, corr_state, history). With update_mode
    "alternating", only one network is stepped per iteration, switching
    every cfg.inner_steps iterations; "simultaneous" steps both.
    """
    f = mlp_init((data.x_dim, *cfg.hidden_f, cfg.k), "sigmoid", (cfg.seed, 1))
    g = mlp_init((data.u_dim, *cfg.hidden_g, cfg.l), "sigmoid", (cfg.seed, 2))
    adam_f = adam_init(f, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.eps_adam)
    adam_g = adam_init(g, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.eps_adam)
    state = init_corr_state(cfg.k, cfg.l, cfg.beta, cfg.eps)
    hist = TrainHistory()
    t0 = time.perf_counter()

    for step in range(1, cfg.iterations + 1):
        try:
            x_rows, u_rows = data.batch(cfg.batch_size, step)
            out_f = forward(f, x_rows)
            out_g = forward(g, u_rows)
            state = ema_update(
                state,
                batch_acf(out_f, cfg.eps),
                batch_acf(out_g, cfg.eps),
                batch_ccf(out_f, out_g),
            )
            r_f, r_g, p = bias_correct(state)
            d_f, d_g = output_grads(r_f, r_g, p, out_f, out_g)
            if cfg.update_mode == "simultaneous":
                update_f = update_g = True
            else:
                phase = ((step - 1) // cfg.inner_steps) % 2
                update_f = phase == 0
                update_g = not update_f
            if update_f:
                adam_step(f, adam_f, backward(f, x_rows, d_f))
            if update_g:
                adam_step(g, adam_g, backward(g, u_rows, d_g))
            if step % cfg.log_interval == 0 or step == cfg.iterations:
                hist.append(step, score(r_f, r_g, p), state_sigma(r_f, r_g, p),
                            time.perf_counter() - t0)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            raise TrainError(step, exc) from exc

    return f, g, state, hist
