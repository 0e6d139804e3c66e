"""Command-line pipeline: train, spectrum, oracle, compare, demos, sweep.

Configuration is a flat text file of `dotted.key = value` lines (diff-able
and trivially parsed); every key has a documented default, see
CONFIG_DEFAULTS. Checkpoints are a versioned text format with floats at 17
significant digits so save -> load -> save is byte-identical. All CSV
output uses 17 significant digits and '\n' line endings.

The CROSSDEP_OUT_DIR environment variable overrides the output directory
(and nothing else); an explicit --out flag wins over the variable.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CorrState, TrainConfig, train
from .datagen import (
    GaussModel,
    PairedDataset,
    gauss_pairs,
    make_pairs,
    mc_build,
    mc_identical_rows,
    mc_pairs,
    mc_sample,
    shape_pairs,
    shape_sample,
    temporal_pairs,
    uniform_sample,
)
from .linalg import SymMatrix
from .netfn import MlpParams, forward
from .oracle import (
    GridSpec,
    discrete_spectrum,
    gauss_grid,
    gauss_joint_pdf,
    mc_cross_density,
    mehler_spectrum,
    nystrom_spectrum,
)
from .spectrum import cdr_matrix, eigenfunctions, estimate_spectrum

__all__ = [
    "CONFIG_DEFAULTS",
    "PRESETS",
    "load_config",
    "RunConfig",
    "Checkpoint",
    "CheckpointVersionError",
    "save_checkpoint",
    "load_checkpoint",
    "build_dataset",
    "cmd_train",
    "cmd_spectrum",
    "cmd_oracle",
    "cmd_compare",
    "cmd_factorial_demo",
    "cmd_classify",
    "cmd_sweep",
    "main",
]

CHECKPOINT_VERSION = 1
_ENV_OUT = "CROSSDEP_OUT_DIR"
_FACTORIAL_LIMIT = 512

# Every configuration key with its default; the default's type fixes the
# parse type of user-supplied values.
CONFIG_DEFAULTS = {
    "dataset.kind": "gauss",
    "dataset.seed": 0,
    "dataset.rho_alpha": 0.5,
    "dataset.p_alpha": 0.786,
    "dataset.n_states": 10,
    "dataset.dim": 8,
    "dataset.noise": 0.08,
    "dataset.arms": 2,
    "dataset.turns": 1.25,
    "dataset.scale": 2.0,
    "dataset.grid": 2,
    "dataset.jitter": 0.0,
    "dataset.components": 4,
    "dataset.spread": 2.0,
    "dataset.sigma": 0.5,
    "dataset.phi": 0.9,
    "dataset.length": 4096,
    "coding.scheme": "raw",
    "coding.code_len": 16,
    "coding.base_size": 256,
    "coding.order": 4,
    "train.k": 20,
    "train.l": 20,
    "train.batch_size": 256,
    "train.iterations": 2000,
    "train.eps": 1e-3,
    "train.beta": 0.99,
    "train.seed": 0,
    "train.update_mode": "simultaneous",
    "train.inner_steps": 1,
    "train.hidden_f": "300,300,300",
    "train.hidden_g": "300,300,300",
    "train.lr": 1e-3,
    "train.adam_beta1": 0.9,
    "train.adam_beta2": 0.999,
    "train.eps_adam": 1e-8,
    "train.log_interval": 100,
    "spectrum.eval_batch": 4096,
    "oracle.count": 20,
    "compare.tol": 1e-2,
    "out.dir": "runs/out",
}

_DATASET_KINDS = (
    "gauss", "mc", "mc_independent", "gmm", "two_moons", "spiral", "check",
    "uniform", "ar1",
)

# Named configuration bundles; a config file or key overrides still win.
# The demo training preset uses alternating updates: at these budgets the
# simultaneous default needs a longer schedule to hold the small modes.
PRESETS = {
    "gauss-half": {
        "dataset.kind": "gauss",
        "dataset.rho_alpha": 0.5,
        "train.update_mode": "alternating",
        "train.inner_steps": 200,
        "train.iterations": 2000,
    },
    "gmm": {
        "dataset.kind": "gmm",
        "dataset.components": 4,
        "dataset.spread": 2.0,
        "dataset.sigma": 0.5,
    },
}


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class RunConfig:
    """Validated flat configuration with typed values."""

    def __init__(self, values: dict):
        self.values = dict(CONFIG_DEFAULTS)
        for key, raw in values.items():
            if key not in CONFIG_DEFAULTS:
                raise ValueError(f"unknown config key: {key}")
            self.values[key] = self._parse(key, raw)
        if self.values["dataset.kind"] not in _DATASET_KINDS:
            raise ValueError(f"unknown dataset.kind: {self.values['dataset.kind']!r}")

    @staticmethod
    def _parse(key: str, raw):
        default = CONFIG_DEFAULTS[key]
        if isinstance(raw, str):
            raw = raw.strip()
            try:
                if isinstance(default, int):
                    return int(raw)
                if isinstance(default, float):
                    return float(raw)
            except ValueError as exc:
                raise ValueError(f"config key {key}: cannot parse {raw!r}") from exc
            return raw
        if isinstance(default, int) and not isinstance(raw, bool) and isinstance(raw, (int,)):
            return int(raw)
        if isinstance(default, float) and isinstance(raw, (int, float)):
            return float(raw)
        if isinstance(default, str) and isinstance(raw, str):
            return raw
        raise ValueError(f"config key {key}: unsupported value {raw!r}")

    @staticmethod
    def parse_lines(lines) -> dict:
        """key = value lines (comments, blanks allowed) to a raw-string dict."""
        values = {}
        for ln, line in enumerate(lines, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"config line {ln}: expected 'key = value', got {line!r}")
            key, raw = text.split("=", 1)
            values[key.strip()] = raw.strip()
        return values

    @classmethod
    def from_lines(cls, lines) -> "RunConfig":
        return cls(cls.parse_lines(lines))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r") as fh:
            return cls.from_lines(fh.read().splitlines())

    def __getitem__(self, key: str):
        return self.values[key]

    def replace(self, **updates) -> "RunConfig":
        merged = dict(self.values)
        for key, value in updates.items():
            dotted = key.replace("__", ".")
            if dotted not in CONFIG_DEFAULTS:
                raise ValueError(f"unknown config key: {dotted}")
            merged[dotted] = value
        return RunConfig(merged)

    def lines(self):
        """Canonical key = value lines in schema order."""
        out = []
        for key, default in CONFIG_DEFAULTS.items():
            v = self.values[key]
            if isinstance(default, float):
                out.append(f"{key} = {_fmt(v)}")
            else:
                out.append(f"{key} = {v}")
        return out

    def hidden(self, which: str):
        raw = self.values[f"train.hidden_{which}"].strip()
        if not raw:
            return ()
        return tuple(int(tok) for tok in raw.split(","))

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            k=self["train.k"],
            l=self["train.l"],
            batch_size=self["train.batch_size"],
            iterations=self["train.iterations"],
            eps=self["train.eps"],
            beta=self["train.beta"],
            seed=self["train.seed"],
            hidden_f=self.hidden("f"),
            hidden_g=self.hidden("g"),
            update_mode=self["train.update_mode"],
            inner_steps=self["train.inner_steps"],
            lr=self["train.lr"],
            adam_beta1=self["train.adam_beta1"],
            adam_beta2=self["train.adam_beta2"],
            eps_adam=self["train.eps_adam"],
            log_interval=self["train.log_interval"],
        )

    def dataset_hash(self) -> str:
        keys = [k for k in CONFIG_DEFAULTS if k.startswith(("dataset.", "coding."))]
        text = "\n".join(f"{k}={self.values[k]}" for k in keys)
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def load_config(config_path=None, preset=None) -> RunConfig:
    """Resolve a RunConfig from defaults, an optional preset, and a file."""
    if config_path is None and preset is None:
        raise ValueError("either a config file or a preset name is required")
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            known = ", ".join(sorted(PRESETS))
            raise ValueError(f"unknown preset: {preset!r} (available: {known})")
        values.update(PRESETS[preset])
    if config_path is not None:
        with open(config_path, "r") as fh:
            values.update(RunConfig.parse_lines(fh.read().splitlines()))
    return RunConfig(values)


# ---------------------------------------------------------------------------
# dataset construction


def _gmm_params(cfg: RunConfig) -> dict:
    k = cfg["dataset.components"]
    spread = cfg["dataset.spread"]
    angles = 2.0 * np.pi * np.arange(k) / max(k, 1)
    means = spread * np.column_stack([np.cos(angles), np.sin(angles)])
    if k == 1:
        means = np.zeros((1, 2))
    return {"means": means, "sigma": cfg["dataset.sigma"]}


def _shape_params(cfg: RunConfig, kind: str) -> dict:
    if kind == "gmm":
        return _gmm_params(cfg)
    if kind == "two_moons":
        return {"noise": cfg["dataset.noise"]}
    if kind == "spiral":
        return {
            "noise": cfg["dataset.noise"],
            "arms": cfg["dataset.arms"],
            "turns": cfg["dataset.turns"],
            "scale": cfg["dataset.scale"],
        }
    if kind == "check":
        return {"grid": cfg["dataset.grid"], "jitter": cfg["dataset.jitter"]}
    raise ValueError(f"not a shape kind: {kind!r}")


def _ar1_series(phi: float, length: int, seed: int) -> np.ndarray:
    if not abs(phi) < 1.0:
        raise ValueError("ar1 coefficient must satisfy |phi| < 1")
    rng = np.random.default_rng((int(seed), 3571))
    noise = np.sqrt(1.0 - phi * phi) * rng.standard_normal(length)
    series = np.empty(length)
    prev = rng.standard_normal()
    for t in range(length):
        prev = phi * prev + noise[t]
        series[t] = prev
    return series


def _materialize_base(cfg: RunConfig, kind: str, n: int, seed: int):
    """Base x rows (plus labels where the generator has them) for coded schemes."""
    if kind == "gauss":
        x, _ = gauss_pairs(GaussModel(cfg["dataset.rho_alpha"]), seed).eval_batch(n, tag=9)
        return x, None
    if kind in ("mc", "mc_independent"):
        model = (mc_build(cfg["dataset.p_alpha"], cfg["dataset.n_states"], seed)
                 if kind == "mc" else mc_identical_rows(cfg["dataset.n_states"], seed))
        x, _ = mc_sample(model, n, seed)
        return x, x.argmax(axis=1)
    if kind == "uniform":
        return uniform_sample(cfg["dataset.dim"], n, seed), None
    if kind in ("gmm", "two_moons", "spiral", "check"):
        pts, labels = shape_sample(kind, _shape_params(cfg, kind), n, seed)
        return pts, labels
    raise ValueError(f"dataset kind {kind!r} cannot provide a base sample")


def build_dataset(cfg: RunConfig):
    """PairedDataset plus extras (generator models, labels) from a config."""
    kind = cfg["dataset.kind"]
    scheme = cfg["coding.scheme"]
    seed = cfg["dataset.seed"]
    extras = {"kind": kind}

    if scheme == "raw":
        if kind == "gauss":
            model = GaussModel(cfg["dataset.rho_alpha"])
            extras["gauss_model"] = model
            return gauss_pairs(model, seed), extras
        if kind == "mc":
            model = mc_build(cfg["dataset.p_alpha"], cfg["dataset.n_states"], seed)
            extras["mc_model"] = model
            return mc_pairs(model, seed), extras
        if kind == "mc_independent":
            model = mc_identical_rows(cfg["dataset.n_states"], seed)
            extras["mc_model"] = model
            return mc_pairs(model, seed), extras
        if kind in ("gmm", "two_moons", "spiral", "check"):
            return shape_pairs(kind, _shape_params(cfg, kind), seed), extras
        raise ValueError(f"dataset kind {kind!r} has no raw (x, u) pairing")

    if scheme == "temporal":
        if kind != "ar1":
            raise ValueError("temporal coding expects dataset.kind = ar1")
        series = _ar1_series(cfg["dataset.phi"], cfg["dataset.length"], seed)
        # predict the next sample from a window of past inputs
        data = temporal_pairs(series[:-1], series[1:], cfg["coding.order"], seed=seed)
        return data, extras

    base, labels = _materialize_base(cfg, kind, cfg["coding.base_size"], seed)
    extras["labels"] = labels
    data = make_pairs(scheme, base, labels=labels, seed=seed,
                      code_len=cfg["coding.code_len"])
    return data, extras


# ---------------------------------------------------------------------------
# checkpoint persistence


class CheckpointVersionError(ValueError):
    pass


@dataclass
class Checkpoint:
    version: int
    iteration: int
    config: RunConfig
    f: MlpParams
    g: MlpParams
    state: CorrState


def _write_matrix(fh, mat: np.ndarray):
    for row in np.atleast_2d(mat):
        fh.write(" ".join(_fmt(v) for v in row) + "\n")


def _write_net(fh, tag: str, p: MlpParams):
    fh.write(f"net {tag}\n")
    fh.write("layer_sizes " + ",".join(str(s) for s in p.layer_sizes) + "\n")
    fh.write(f"output_activation {p.output_activation}\n")
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        fh.write(f"weights {i}\n")
        _write_matrix(fh, w)
        fh.write(f"biases {i}\n")
        _write_matrix(fh, b[None, :])


def save_checkpoint(path, cfg: RunConfig, f: MlpParams, g: MlpParams,
                    state: CorrState, iteration: int):
    with open(path, "w", newline="") as fh:
        fh.write(f"crossdep-checkpoint {CHECKPOINT_VERSION}\n")
        fh.write(f"iteration {int(iteration)}\n")
        fh.write("config-begin\n")
        for line in cfg.lines():
            fh.write(line + "\n")
        fh.write("config-end\n")
        _write_net(fh, "f", f)
        _write_net(fh, "g", g)
        fh.write("state\n")
        fh.write(f"k {state.k}\n")
        fh.write(f"beta {_fmt(state.beta)}\n")
        fh.write(f"eps {_fmt(state.eps)}\n")
        fh.write("r_f\n")
        _write_matrix(fh, state.r_f.a)
        fh.write("r_g\n")
        _write_matrix(fh, state.r_g.a)
        fh.write("p_fg\n")
        _write_matrix(fh, state.p_fg)
        fh.write("end\n")


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise ValueError("unexpected end of checkpoint file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, prefix: str) -> str:
        line = self.next()
        if not line.startswith(prefix):
            raise ValueError(f"corrupt checkpoint: expected {prefix!r}, got {line!r}")
        return line

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        out = np.empty((rows, cols))
        for r in range(rows):
            parts = self.next().split()
            if len(parts) != cols:
                raise ValueError(f"corrupt checkpoint: expected {cols} values per row")
            out[r] = [float(p) for p in parts]
        return out


def _read_net(reader: _Lines, tag: str) -> MlpParams:
    reader.expect(f"net {tag}")
    sizes = tuple(int(s) for s in reader.expect("layer_sizes ").split(" ", 1)[1].split(","))
    activation = reader.expect("output_activation ").split(" ", 1)[1]
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        reader.expect(f"weights {i}")
        weights.append(reader.matrix(sizes[i], sizes[i + 1]))
        reader.expect(f"biases {i}")
        biases.append(reader.matrix(1, sizes[i + 1])[0])
    return MlpParams(sizes, weights, biases, activation)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "r") as fh:
        reader = _Lines(fh.read())
    head = reader.expect("crossdep-checkpoint ")
    version = int(head.split()[1])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    iteration = int(reader.expect("iteration ").split()[1])
    reader.expect("config-begin")
    cfg_lines = []
    while True:
        line = reader.next()
        if line == "config-end":
            break
        cfg_lines.append(line)
    cfg = RunConfig.from_lines(cfg_lines)
    f = _read_net(reader, "f")
    g = _read_net(reader, "g")
    reader.expect("state")
    k = int(reader.expect("k ").split()[1])
    beta = float(reader.expect("beta ").split()[1])
    eps = float(reader.expect("eps ").split()[1])
    dim_f, dim_g = f.out_dim, g.out_dim
    reader.expect("r_f")
    r_f = reader.matrix(dim_f, dim_f)
    reader.expect("r_g")
    r_g = reader.matrix(dim_g, dim_g)
    reader.expect("p_fg")
    p_fg = reader.matrix(dim_f, dim_g)
    reader.expect("end")
    state = CorrState(SymMatrix(r_f), SymMatrix(r_g), p_fg, k, beta, eps)
    return Checkpoint(version, iteration, cfg, f, g, state)


# ---------------------------------------------------------------------------
# CSV helpers


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [cell if isinstance(cell, str) else _fmt(cell) for cell in row]
            fh.write(",".join(cells) + "\n")


def _read_value_csv(path):
    """Read (index, value) pairs; tolerates an extra leading hash column."""
    with open(path, "r") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    header = lines[0].split(",")
    try:
        idx_col = header.index("index")
    except ValueError as exc:
        raise ValueError(f"{path}: no 'index' column") from exc
    value_col = None
    for name in ("sigma", "value", "estimate"):
        if name in header:
            value_col = header.index(name)
            break
    if value_col is None:
        raise ValueError(f"{path}: no value column (sigma/value/estimate)")
    pairs = []
    for line in lines[1:]:
        parts = line.split(",")
        pairs.append((int(parts[idx_col]), float(parts[value_col])))
    pairs.sort()
    return np.array([v for _, v in pairs])


def _resolve_out(cfg: RunConfig, out_dir) -> Path:
    chosen = out_dir or os.environ.get(_ENV_OUT) or cfg["out.dir"]
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_train(config_path=None, out_dir=None, preset=None):
    """Train per config; write checkpoint, history CSV, and a run summary."""
    cfg = load_config(config_path, preset)
    out = _resolve_out(cfg, out_dir)
    data, _ = build_dataset(cfg)
    tc = cfg.train_config()
    f, g, state, hist = train(tc, data)

    ck_path = out / "checkpoint.txt"
    save_checkpoint(ck_path, cfg, f, g, state, tc.iterations)

    hist_path = out / "history.csv"
    header = ["iteration", "score"] + [f"sigma_{i+1}" for i in range(tc.k)]
    reported = hist.sigma_reported()
    rows = [
        [str(hist.iterations[i]), hist.scores[i], *reported[i]]
        for i in range(len(hist.iterations))
    ]
    _write_csv(hist_path, header, rows)

    summary_path = out / "summary.txt"
    with open(summary_path, "w", newline="") as fh:
        fh.write(f"iterations = {tc.iterations}\n")
        if hist.scores:
            fh.write(f"final_score = {_fmt(hist.scores[-1])}\n")
            fh.write("final_sigma = " + ",".join(_fmt(v) for v in reported[-1]) + "\n")
            fh.write(f"wall_seconds = {hist.wall[-1]:.3f}\n")
        else:
            fh.write("final_score = nan\nfinal_sigma =\nwall_seconds = 0.000\n")
    print(f"checkpoint: {ck_path}")
    print(f"history: {hist_path}")
    if hist.scores:
        print(f"final score {hist.scores[-1]:.6f}; "
              f"leading sigma {', '.join(f'{v:.4f}' for v in reported[-1][:4])}")
    return {"checkpoint": ck_path, "history": hist_path, "summary": summary_path}


def cmd_spectrum(checkpoint_path, eval_batch=None, out_dir=None):
    """Spectrum and eigenfunction samples of a trained checkpoint."""
    ck = load_checkpoint(checkpoint_path)
    cfg = ck.config
    out = _resolve_out(cfg, out_dir)
    data, _ = build_dataset(cfg)
    n = int(eval_batch or cfg["spectrum.eval_batch"])
    x_rows, u_rows = data.eval_batch(n, tag=0)
    res = estimate_spectrum(forward(ck.f, x_rows), forward(ck.g, u_rows),
                            cfg["train.eps"])

    spec_path = out / "spectrum.csv"
    _write_csv(spec_path, ["index", "sigma"],
               [[str(i + 1), v] for i, v in enumerate(res.sigma)])

    phi = eigenfunctions(ck.f, res, x_rows)
    keep = min(n, 512)
    func_path = out / "eigenfunctions.csv"
    header = [f"x_{i}" for i in range(x_rows.shape[1])] + \
             [f"phi_{i+1}" for i in range(phi.shape[1])]
    rows = [[*x_rows[i], *phi[i]] for i in range(keep)]
    _write_csv(func_path, header, rows)
    print(f"spectrum: {spec_path}")
    print("sigma: " + ", ".join(f"{v:.4f}" for v in res.sigma[:8]))
    return {"spectrum": spec_path, "eigenfunctions": func_path, "sigma": res.sigma}


def _check_pdf(grid_cells: int):
    """Piecewise-constant density of the alternating-cell unit square.

    Values on cell boundaries average the touching cells so trapezoid
    quadrature integrates the step function exactly when grid nodes land on
    the boundaries.
    """
    g = int(grid_cells)
    active = np.zeros((g, g))
    for i in range(g):
        for j in range(g):
            if (i + j) % 2 == 0:
                active[i, j] = 1.0
    density = active * (g * g / active.sum())

    def axis_weights(coord):
        c = np.asarray(coord) * g
        near = np.rint(c)
        on_edge = np.abs(c - near) < 1e-9
        lo = np.where(on_edge, near - 1, np.floor(c)).astype(int)
        hi = np.where(on_edge, near, np.floor(c)).astype(int)
        w_lo = np.where(on_edge, 0.5, 1.0)
        w_hi = np.where(on_edge, 0.5, 0.0)
        # outside the unit square there is no mass; clamp and zero the weight
        w_lo = np.where((lo < 0) | (lo >= g), 0.0, w_lo)
        w_hi = np.where((hi < 0) | (hi >= g), 0.0, w_hi)
        lo = np.clip(lo, 0, g - 1)
        hi = np.clip(hi, 0, g - 1)
        total = w_lo + w_hi
        scale = np.where(total > 0, 1.0 / np.maximum(total, 1e-300), 0.0)
        return lo, hi, w_lo * scale, w_hi * scale

    def pdf(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        xl, xh, wxl, wxh = axis_weights(x)
        ul, uh, wul, wuh = axis_weights(u)
        return (wxl * wul * density[xl, ul] + wxl * wuh * density[xl, uh]
                + wxh * wul * density[xh, ul] + wxh * wuh * density[xh, uh])

    return pdf


def _curve_pdf(curves, weights, t_lo, t_hi, noise, n_t=600):
    """Density of 'uniform t on a curve plus isotropic Gaussian noise'."""
    ts = np.linspace(t_lo, t_hi, n_t)
    wt = np.full(n_t, (t_hi - t_lo) / (n_t - 1))
    wt[0] *= 0.5
    wt[-1] *= 0.5
    wt = wt / (t_hi - t_lo)
    var = noise * noise

    def pdf(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.zeros(np.broadcast(x, u).shape)
        for curve, weight in zip(curves, weights):
            cx, cu = curve(ts)
            for k in range(ts.shape[0]):
                d2 = (x - cx[k]) ** 2 + (u - cu[k]) ** 2
                out += weight * wt[k] * np.exp(-0.5 * d2 / var) / (2.0 * np.pi * var)
        return out

    return pdf


def _gmm_pdf(params: dict):
    means = np.asarray(params["means"], dtype=float)
    sigma = float(params.get("sigma", 0.5))
    var = sigma * sigma
    weights = np.asarray(params.get("weights", np.full(means.shape[0], 1.0 / means.shape[0])))
    weights = weights / weights.sum()

    def pdf(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.zeros(np.broadcast(x, u).shape)
        for (mx, mu), w in zip(means, weights):
            d2 = (x - mx) ** 2 + (u - mu) ** 2
            out += w * np.exp(-0.5 * d2 / var) / (2.0 * np.pi * var)
        return out

    bound = 6.0 * sigma
    lo = means.min() - bound
    hi = means.max() + bound
    return pdf, (lo, hi)


def _oracle_pdf_and_grid(cfg: RunConfig, kind: str, n_grid: int):
    params = _shape_params(cfg, kind)
    if kind == "gmm":
        pdf, (lo, hi) = _gmm_pdf(params)
        return pdf, GridSpec(lo, hi, lo, hi, n_grid)
    if kind == "check":
        if params["jitter"] > 0:
            raise ValueError("exact oracle for 'check' requires dataset.jitter = 0")
        g = params["grid"]
        # snap the node count so cell boundaries land exactly on grid nodes
        per_cell = max(1, (n_grid - 1) // g)
        n = g * per_cell + 1
        return _check_pdf(g), GridSpec(0.0, 1.0, 0.0, 1.0, max(n, 65))
    noise = params["noise"]
    if kind == "two_moons":
        curves = [
            lambda t: (np.cos(t), np.sin(t)),
            lambda t: (1.0 - np.cos(t), 0.5 - np.sin(t)),
        ]
        pdf = _curve_pdf(curves, [0.5, 0.5], 0.0, np.pi, noise)
        lo = -1.0 - 6.0 * noise
        hi = 2.0 + 6.0 * noise
        return pdf, GridSpec(lo, hi, lo, hi, n_grid)
    if kind == "spiral":
        arms = params["arms"]
        turns = params["turns"]
        scale = params["scale"]

        def make_curve(a):
            def curve(f):
                angle = 2.0 * np.pi * turns * f + 2.0 * np.pi * a / arms
                return scale * f * np.cos(angle), scale * f * np.sin(angle)
            return curve

        pdf = _curve_pdf([make_curve(a) for a in range(arms)],
                         [1.0 / arms] * arms, 0.05, 1.0, noise)
        bound = scale + 6.0 * noise
        return pdf, GridSpec(-bound, bound, -bound, bound, n_grid)
    raise ValueError(f"no quadrature oracle for kind {kind!r}")


def cmd_oracle(config_path=None, count=None, out_dir=None, n_grid: int = 128,
               preset=None):
    """Ground-truth spectrum for the configured dataset."""
    cfg = load_config(config_path, preset)
    out = _resolve_out(cfg, out_dir)
    kind = cfg["dataset.kind"]
    count = int(count or cfg["oracle.count"])
    seed = cfg["dataset.seed"]
    if kind == "gauss":
        values = mehler_spectrum(cfg["dataset.rho_alpha"], count)
    elif kind in ("mc", "mc_independent"):
        model = (mc_build(cfg["dataset.p_alpha"], cfg["dataset.n_states"], seed)
                 if kind == "mc" else mc_identical_rows(cfg["dataset.n_states"], seed))
        values = discrete_spectrum(mc_cross_density(model)).values[:count]
    elif kind in ("gmm", "two_moons", "spiral", "check"):
        pdf, grid = _oracle_pdf_and_grid(cfg, kind, n_grid)
        values = nystrom_spectrum(pdf, grid, count)
    else:
        raise ValueError(f"no oracle for dataset kind {kind!r}")
    path = out / "oracle.csv"
    digest = cfg.dataset_hash()
    _write_csv(path, ["config_hash", "index", "value"],
               [[digest, str(i + 1), v] for i, v in enumerate(values)])
    print(f"oracle: {path}")
    print("values: " + ", ".join(f"{v:.4f}" for v in values[:8]))
    return {"oracle": path, "values": np.asarray(values)}


def cmd_compare(estimate_csv, oracle_csv, tol=None, count=None, out_dir=None):
    """Per-index error table between an estimated and a reference spectrum."""
    est = _read_value_csv(estimate_csv)
    ref = _read_value_csv(oracle_csv)
    if count is not None:
        count = int(count)
        if est.shape[0] < count or ref.shape[0] < count:
            raise ValueError(
                f"need at least {count} entries, got {est.shape[0]} and {ref.shape[0]}"
            )
        est = est[:count]
        ref = ref[:count]
    elif est.shape[0] != ref.shape[0]:
        raise ValueError(
            f"length mismatch: {est.shape[0]} estimates vs {ref.shape[0]} references "
            "(pass count to truncate)"
        )
    tol = float(tol if tol is not None else CONFIG_DEFAULTS["compare.tol"])
    abs_err = np.abs(est - ref)
    sq_err = (est - ref) ** 2
    max_abs = float(abs_err.max())
    verdict = "PASS" if max_abs <= tol else "FAIL"
    print(f"{'index':>5} {'estimate':>12} {'reference':>12} {'abs_err':>12} {'sq_err':>12}")
    for i in range(est.shape[0]):
        print(f"{i+1:>5} {est[i]:>12.6f} {ref[i]:>12.6f} {abs_err[i]:>12.3e} {sq_err[i]:>12.3e}")
    print(f"max abs error {max_abs:.3e} vs tolerance {tol:.3e}: {verdict}")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "compare.csv",
                   ["index", "estimate", "reference", "abs_error", "squared_error"],
                   [[str(i + 1), est[i], ref[i], abs_err[i], sq_err[i]]
                    for i in range(est.shape[0])])
    return {"max_abs": max_abs, "squared": sq_err, "verdict": verdict}


def _trained_spectrum(cfg: RunConfig, data):
    tc = cfg.train_config()
    f, g, state, hist = train(tc, data)
    n = cfg["spectrum.eval_batch"]
    x_rows, u_rows = data.eval_batch(n, tag=0)
    res = estimate_spectrum(forward(f, x_rows), forward(g, u_rows), cfg["train.eps"])
    return f, g, res, hist


def cmd_factorial_demo(config_path, out_dir=None):
    """Pairwise CDR matrix over a factorial-coded base set plus a dominance report."""
    cfg = RunConfig.from_file(config_path)
    if cfg["coding.scheme"] != "factorial":
        raise ValueError("factorial-demo requires coding.scheme = factorial")
    if cfg["coding.base_size"] > _FACTORIAL_LIMIT:
        raise ValueError(
            f"base_size {cfg['coding.base_size']} exceeds the demo limit {_FACTORIAL_LIMIT}"
        )
    out = _resolve_out(cfg, out_dir)
    data, _ = build_dataset(cfg)
    f, g, res, _ = _trained_spectrum(cfg, data)
    base = data.x_base
    mat = cdr_matrix(f, res, base, base)

    n = mat.shape[0]
    diag_mean = float(np.trace(mat) / n)
    off_mask = ~np.eye(n, dtype=bool)
    off_mean = float(mat[off_mask].mean())
    off_abs_mean = float(np.abs(mat[off_mask]).mean())
    ratio = off_abs_mean / diag_mean if diag_mean != 0 else float("inf")
    symmetry = float(np.max(np.abs(mat - mat.T)))

    _write_csv(out / "cdr_matrix.csv",
               [f"c_{j}" for j in range(n)],
               [list(row) for row in mat])
    report = out / "factorial_report.txt"
    with open(report, "w", newline="") as fh:
        fh.write(f"samples = {n}\n")
        fh.write(f"mean_diagonal = {_fmt(diag_mean)}\n")
        fh.write(f"mean_off_diagonal = {_fmt(off_mean)}\n")
        fh.write(f"mean_abs_off_diagonal = {_fmt(off_abs_mean)}\n")
        fh.write(f"off_over_diag_ratio = {_fmt(ratio)}\n")
        fh.write(f"symmetry_residual = {_fmt(symmetry)}\n")
    print(f"cdr matrix: {out / 'cdr_matrix.csv'}")
    print(f"mean diag {diag_mean:.4f}, mean |off| {off_abs_mean:.4f}, ratio {ratio:.4f}")
    return {"diag_mean": diag_mean, "off_mean": off_mean,
            "off_abs_mean": off_abs_mean, "ratio": ratio,
            "symmetry": symmetry, "matrix": mat}


def cmd_classify(config_path, eval_size: int = 512, out_dir=None):
    """Class-coded training plus CDR nearest-class evaluation."""
    cfg = RunConfig.from_file(config_path)
    if cfg["coding.scheme"] != "class":
        raise ValueError("classify requires coding.scheme = class")
    kind = cfg["dataset.kind"]
    out = _resolve_out(cfg, out_dir)
    data, extras = build_dataset(cfg)
    if extras.get("labels") is None:
        raise ValueError(f"dataset kind {kind!r} provides no labels")
    f, g, res, _ = _trained_spectrum(cfg, data)

    train_labels = data.labels
    classes = np.unique(train_labels)
    eval_pts, eval_labels = _materialize_base(cfg, kind, int(eval_size),
                                              cfg["dataset.seed"] + 1000003)
    unseen = set(np.unique(eval_labels)) - set(classes.tolist())
    if unseen:
        raise ValueError(f"labels at evaluation unseen in training: {sorted(unseen)}")

    mat = cdr_matrix(f, res, eval_pts, data.x_base)
    scores = np.column_stack([mat[:, train_labels == c].mean(axis=1) for c in classes])
    pred = classes[np.argmax(scores, axis=1)]  # argmax takes the lowest index on ties
    accuracy = float(np.mean(pred == eval_labels))

    same_mask = eval_labels[:, None] == train_labels[None, :]
    same_mean = float(mat[same_mask].mean())
    cross = mat[~same_mask]
    # a single class has no cross-class pairs
    cross_mean = float(cross.mean()) if cross.size else float("nan")

    report = out / "classify_report.txt"
    with open(report, "w", newline="") as fh:
        fh.write(f"eval_size = {eval_pts.shape[0]}\n")
        fh.write(f"accuracy = {_fmt(accuracy)}\n")
        fh.write(f"same_class_cdr_mean = {_fmt(same_mean)}\n")
        fh.write(f"cross_class_cdr_mean = {_fmt(cross_mean)}\n")
    print(f"accuracy {accuracy:.4f}; same-class CDR {same_mean:.3f}, "
          f"cross-class {cross_mean:.3f}")
    return {"accuracy": accuracy, "same_mean": same_mean,
            "cross_mean": cross_mean, "report": report}


def cmd_sweep(config_path, param: str, values, out_dir=None):
    """Grid over the dependence parameter: estimates vs oracle per value."""
    cfg = RunConfig.from_file(config_path)
    out = _resolve_out(cfg, out_dir)
    if param not in ("rho_alpha", "p_alpha"):
        raise ValueError("sweep param must be rho_alpha or p_alpha")
    expect_kind = "gauss" if param == "rho_alpha" else "mc"
    if cfg["dataset.kind"] != expect_kind:
        raise ValueError(f"sweep over {param} expects dataset.kind = {expect_kind}")
    rows = []
    for value in values:
        sub = cfg.replace(**{f"dataset.{param}": float(value)})
        data, _ = build_dataset(sub)
        _, _, res, _ = _trained_spectrum(sub, data)
        if expect_kind == "gauss":
            ref = mehler_spectrum(float(value), res.sigma.shape[0])
        else:
            model = mc_build(float(value), sub["dataset.n_states"], sub["dataset.seed"])
            full = discrete_spectrum(mc_cross_density(model)).values
            ref = np.zeros(res.sigma.shape[0])
            ref[: min(full.shape[0], ref.shape[0])] = full[: ref.shape[0]]
        for i in range(res.sigma.shape[0]):
            rows.append([param, value, str(i + 1), res.sigma[i], ref[i]])
        print(f"{param}={value}: sigma_2 {res.sigma[1] if len(res.sigma) > 1 else 0:.4f}")
    path = out / "sweep.csv"
    _write_csv(path, ["param", "value", "index", "estimate", "oracle"], rows)
    print(f"sweep: {path}")
    return {"sweep": path}


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdep",
        description="Dependence estimation via learned cross-density spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the two function families")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--preset", default=None, choices=sorted(PRESETS))
    p.add_argument("--out", default=None)

    p = sub.add_parser("spectrum", help="spectrum of a trained checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--eval-batch", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("oracle", help="ground-truth spectrum for a dataset config")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--preset", default=None, choices=sorted(PRESETS))
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--grid", type=int, default=128)
    p.add_argument("--out", default=None)

    p = sub.add_parser("compare", help="error table between two spectrum CSVs")
    p.add_argument("estimate_csv")
    p.add_argument("oracle_csv")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("factorial-demo", help="pairwise CDR matrix demo")
    p.add_argument("config")
    p.add_argument("--out", default=None)

    p = sub.add_parser("classify", help="CDR nearest-class evaluation")
    p.add_argument("config")
    p.add_argument("--eval-size", type=int, default=512)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="grid over the dependence parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=("rho_alpha", "p_alpha"))
    p.add_argument("--values", required=True,
                   help="comma-separated parameter values")
    p.add_argument("--out", default=None)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            cmd_train(args.config, out_dir=args.out, preset=args.preset)
        elif args.command == "spectrum":
            cmd_spectrum(args.checkpoint, eval_batch=args.eval_batch, out_dir=args.out)
        elif args.command == "oracle":
            cmd_oracle(args.config, count=args.count, out_dir=args.out,
                       n_grid=args.grid, preset=args.preset)
        elif args.command == "compare":
            result = cmd_compare(args.estimate_csv, args.oracle_csv,
                                 tol=args.tol, count=args.count, out_dir=args.out)
            return 0 if result["verdict"] == "PASS" else 2
        elif args.command == "factorial-demo":
            cmd_factorial_demo(args.config, out_dir=args.out)
        elif args.command == "classify":
            cmd_classify(args.config, eval_size=args.eval_size, out_dir=args.out)
        elif args.command == "sweep":
            values = [float(tok) for tok in args.values.split(",") if tok.strip()]
            cmd_sweep(args.config, args.param, values, out_dir=args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
