"""Acceptance gate: end-to-end recovery targets and analytic guarantees.

The trained-model criteria share module-scoped runs. Training recipes
(alternating updates with a low-learning-rate finishing phase, spectrum
read from large held-out batches with tail averaging) were fixed ahead of
time by convergence probes; tolerances come from the package contract.
"""

import dataclasses
import time

import numpy as np
import pytest

from crossdep.core import (
    TrainConfig,
    batch_acf,
    batch_ccf,
    bias_correct,
    ema_update,
    init_corr_state,
    output_grads,
    score,
    train,
)
from crossdep.datagen import (
    GaussModel,
    gauss_pairs,
    make_pairs,
    mc_build,
    mc_identical_rows,
    mc_pairs,
    shape_sample,
)
from crossdep.linalg import SymMatrix, inv_half_power
from crossdep.netfn import adam_init, adam_step, backward, forward, mlp_init
from crossdep.oracle import (
    brute_maximal_correlation,
    cross_density_from_joint,
    discrete_spectrum,
    mc_cross_density,
    mehler_spectrum,
    recursion_power_spectrum,
)
from crossdep.spectrum import cdr_matrix, estimate_spectrum, total_power


def run_phases(data, k, l, seed, phases, *, eps=1e-3, inner=200, batch=256,
               hidden=(300, 300, 300), eval_every=0, eval_n=8192):
    """Minibatch training through (steps, lr, beta) phases; alternating updates.

    Composes the public training primitives so the learning rate and EMA
    rate can change between phases. Returns (f, g, state, snapshots) where
    snapshots holds (step, sigma) pairs measured on a held-out batch.
    """
    f = mlp_init((data.x_dim, *hidden, k), "sigmoid", (seed, 1))
    g = mlp_init((data.u_dim, *hidden, l), "sigmoid", (seed, 2))
    adam_f = adam_init(f, phases[0][1], 0.9, 0.999, 1e-8)
    adam_g = adam_init(g, phases[0][1], 0.9, 0.999, 1e-8)
    state = init_corr_state(k, l, phases[0][2], eps)
    eval_x, eval_u = data.eval_batch(eval_n) if eval_every else (None, None)
    snapshots = []
    step = 0
    for steps, lr, beta in phases:
        adam_f.lr = lr
        adam_g.lr = lr
        state = dataclasses.replace(state, beta=beta)
        for _ in range(steps):
            step += 1
            x_rows, u_rows = data.batch(batch, step)
            out_f = forward(f, x_rows)
            out_g = forward(g, u_rows)
            state = ema_update(state, batch_acf(out_f, eps),
                               batch_acf(out_g, eps), batch_ccf(out_f, out_g))
            r_f, r_g, p = bias_correct(state)
            d_f, d_g = output_grads(r_f, r_g, p, out_f, out_g)
            if ((step - 1) // inner) % 2 == 0:
                adam_step(f, adam_f, backward(f, x_rows, d_f))
            else:
                adam_step(g, adam_g, backward(g, u_rows, d_g))
            if eval_every and step % eval_every == 0:
                sig = estimate_spectrum(forward(f, eval_x),
                                        forward(g, eval_u), eps).sigma
                snapshots.append((step, sig))
    return f, g, state, snapshots


def held_out_sigma(data, f, g, n=32768, eps=1e-3, tag=1):
    x_rows, u_rows = data.eval_batch(n, tag=tag)
    return estimate_spectrum(forward(f, x_rows), forward(g, u_rows), eps).sigma


@pytest.fixture(scope="module")
def gauss_half_run():
    """GAUSS rho=0.5, K=L=20, 3x300 nets, batch 256, 20k iterations."""
    data = gauss_pairs(GaussModel(0.5), seed=0)
    f, g, state, snaps = run_phases(
        data, 20, 20, 0,
        [(12000, 1e-3, 0.99), (8000, 2e-4, 0.99)])
    return {"data": data, "f": f, "g": g,
            "sigma": held_out_sigma(data, f, g)}


@pytest.fixture(scope="module")
def mc_run():
    """10-state chain at p=0.786, K=L=20, 15k iterations."""
    model = mc_build(0.786, n_states=10, seed=0)
    data = mc_pairs(model, seed=0)
    f, g, state, snaps = run_phases(
        data, 20, 20, 0,
        [(9000, 1e-3, 0.99), (6000, 2e-4, 0.997)],
        eval_every=1000, eval_n=8192)
    tail = np.mean([s for _, s in snaps[-5:]], axis=0)
    oracle = discrete_spectrum(mc_cross_density(model)).values
    return {"model": model, "data": data, "f": f, "g": g,
            "sigma": tail, "oracle": oracle}


@pytest.fixture(scope="module")
def independent_runs():
    """Forced-independence training runs: identical-rows chain, rho=0 pairs."""
    out = {}
    mc_model = mc_identical_rows(n_states=10, seed=0)
    for name, data in (("mc", mc_pairs(mc_model, seed=0)),
                       ("gauss", gauss_pairs(GaussModel(0.0), seed=0))):
        f, g, state, _ = run_phases(data, 20, 20, 0, [(2000, 1e-3, 0.99)])
        out[name] = held_out_sigma(data, f, g, n=16384)
    return out


@pytest.fixture(scope="module")
def factorial_run():
    """64 uniform 8-dim samples against fixed 16-dim noise codes, K=L=32."""
    rng = np.random.default_rng((0, 555))
    base = rng.uniform(-1.0, 1.0, size=(64, 8))
    data = make_pairs("factorial", base, seed=0, code_len=16)
    f, g, state, _ = run_phases(data, 32, 32, 0, [(2000, 1e-3, 0.99)],
                                eps=1e-5, batch=64)
    x_rows, u_rows = data.eval_batch(4096, tag=1)
    res = estimate_spectrum(forward(f, x_rows), forward(g, u_rows), 1e-5)
    return {"base": base, "f": f, "res": res}


@pytest.fixture(scope="module")
def classify_run():
    """4 well-separated Gaussian blobs, class-coded reference process."""
    params = dict(means=[[-2, -2], [-2, 2], [2, -2], [2, 2]], sigma=0.5)
    train_x, train_y = shape_sample("gmm", params, 2048, seed=(0, 1))
    test_x, test_y = shape_sample("gmm", params, 512, seed=(0, 2))
    data = make_pairs("class", train_x, labels=train_y, seed=0)
    f, g, state, _ = run_phases(data, 8, 8, 0, [(1500, 1e-3, 0.99)])
    x_rows, u_rows = data.eval_batch(8192, tag=1)
    res = estimate_spectrum(forward(f, x_rows), forward(g, u_rows), 1e-3)
    return {"train_x": train_x, "train_y": train_y, "test_x": test_x,
            "test_y": test_y, "f": f, "res": res,
            "sigma": res.sigma}


@pytest.fixture(scope="module")
def rho786_run():
    """GAUSS rho=0.786 trained through the packaged loop, dense history."""
    cfg = TrainConfig(iterations=8000, update_mode="alternating",
                      inner_steps=200, log_interval=50, seed=0)
    data = gauss_pairs(GaussModel(0.786), seed=0)
    f, g, state, hist = train(cfg, data)
    sig = np.array(hist.sigmas)
    return {"iterations": np.array(hist.iterations), "sig": sig,
            "sigma": sig[-5:].mean(axis=0)}


class TestEigenvalueRecovery:
    def test_gaussian_spectrum(self, gauss_half_run):
        # Mehler spectrum at rho=0.5: 0.25, 0.0625, 0.015625
        target = mehler_spectrum(0.5, 4)[1:]
        tol = np.array([0.02, 0.015, 0.01])
        err = np.abs(gauss_half_run["sigma"][1:4] - target)
        assert np.all(err <= tol), f"errors {err} exceed {tol}"

    def test_markov_top_eight(self, mc_run):
        err = np.abs(mc_run["sigma"][:8] - mc_run["oracle"][:8])
        assert np.max(err) <= 1e-2, f"per-eigenvalue errors {err}"


class TestLeadingEigenvalue:
    def test_every_trained_run_reports_one(self, gauss_half_run, mc_run,
                                           independent_runs, factorial_run,
                                           classify_run, rho786_run):
        leads = {
            "gauss_half": gauss_half_run["sigma"][0],
            "mc": mc_run["sigma"][0],
            "mc_independent": independent_runs["mc"][0],
            "gauss_independent": independent_runs["gauss"][0],
            "factorial": factorial_run["res"].sigma[0],
            "classify": classify_run["sigma"][0],
            "rho786": rho786_run["sigma"][0],
        }
        for name, lead in leads.items():
            assert 0.95 <= lead <= 1.01, f"{name}: sigma_1 = {lead}"


class TestIndependenceVanishing:
    def test_trailing_sigma_small(self, independent_runs):
        for name, sigma in independent_runs.items():
            assert np.all(sigma[1:] <= 0.05), f"{name}: {sigma[:5]}"


class TestTotalPower:
    def test_reference_row(self):
        value = total_power([1.0, 0.245, 0.057, 0.011, 0.002])
        assert abs(value - 0.018) <= 5e-4


class TestScoreBound:
    def test_random_draws_nonpositive_and_zero_at_independence(self):
        rng = np.random.default_rng(20240817)
        t0 = time.perf_counter()
        for _ in range(10_000):
            k = int(rng.integers(1, 6))
            l = int(rng.integers(1, 6))
            n = int(rng.integers(2, 40))
            eps = float(10.0 ** rng.uniform(-6.0, -1.0))
            f_rows = rng.normal(size=(n, k)) * rng.uniform(0.2, 3.0)
            g_rows = rng.normal(size=(n, l)) * rng.uniform(0.2, 3.0)
            r_f = batch_acf(f_rows, eps)
            r_g = batch_acf(g_rows, eps)
            assert score(r_f, r_g, batch_ccf(f_rows, g_rows)) <= 0.0
            assert score(r_f, r_g, np.zeros((k, l))) == 0.0
        assert time.perf_counter() - t0 < 60.0


class TestAffineInvariance:
    def test_hundred_transforms(self):
        rng = np.random.default_rng(77)
        worst = 0.0
        for _ in range(100):
            k = int(rng.integers(2, 7))
            l = int(rng.integers(2, 7))
            n = 60
            f_rows = rng.normal(size=(n, k))
            g_rows = rng.normal(size=(n, l))
            base = score(batch_acf(f_rows, 0.0), batch_acf(g_rows, 0.0),
                         batch_ccf(f_rows, g_rows))
            a = np.eye(k) + 0.5 * rng.normal(size=(k, k))
            b = np.eye(l) + 0.5 * rng.normal(size=(l, l))
            fa = f_rows @ a.T
            gb = g_rows @ b.T
            moved = score(batch_acf(fa, 0.0), batch_acf(gb, 0.0),
                          batch_ccf(fa, gb))
            worst = max(worst, abs(moved - base))
        assert worst <= 1e-8, f"max |score change| {worst}"


class TestGradientCorrectness:
    def test_twenty_instances_against_finite_differences(self):
        rng = np.random.default_rng(4242)
        worst = 0.0
        for _ in range(20):
            k = int(rng.integers(1, 4))
            l = int(rng.integers(1, 4))
            n = int(rng.integers(4, 11))
            eps = float(10.0 ** rng.uniform(-4.0, -2.0))
            f_rows = rng.normal(size=(n, k))
            g_rows = rng.normal(size=(n, l))

            def batch_score(fr, gr):
                return score(batch_acf(fr, eps), batch_acf(gr, eps),
                             batch_ccf(fr, gr))

            r_f = batch_acf(f_rows, eps)
            r_g = batch_acf(g_rows, eps)
            d_f, d_g = output_grads(r_f, r_g, batch_ccf(f_rows, g_rows),
                                    f_rows, g_rows)
            h = 1e-6
            scale = max(1.0, float(np.max(np.abs(d_f))), float(np.max(np.abs(d_g))))
            for rows, grads, which in ((f_rows, d_f, 0), (g_rows, d_g, 1)):
                num = np.zeros_like(rows)
                for i in range(rows.shape[0]):
                    for j in range(rows.shape[1]):
                        bump = np.zeros_like(rows)
                        bump[i, j] = h
                        if which == 0:
                            hi = batch_score(rows + bump, g_rows)
                            lo = batch_score(rows - bump, g_rows)
                        else:
                            hi = batch_score(f_rows, rows + bump)
                            lo = batch_score(f_rows, rows - bump)
                        num[i, j] = (hi - lo) / (2.0 * h)
                worst = max(worst, float(np.max(np.abs(num - grads))) / scale)
        assert worst <= 1e-5, f"max relative gradient error {worst}"


class TestPowerLawSpectra:
    def test_twenty_chains(self):
        for seed in range(20):
            d = mc_cross_density(mc_build(float(0.05 + 0.045 * seed), seed=seed))
            base = discrete_spectrum(d).values
            for k in (1, 2, 3, 5, 10):
                got = recursion_power_spectrum(d, k)
                assert np.max(np.abs(got - base**k)) <= 1e-10


class TestMaximalCorrelation:
    def test_twenty_random_joints(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            m = int(rng.integers(2, 9))
            joint = rng.uniform(0.05, 1.0, size=(m, m))
            joint = joint / joint.sum()
            cc = brute_maximal_correlation(joint)
            lam2 = discrete_spectrum(cross_density_from_joint(joint)).values[1]
            assert abs(cc * cc - lam2) <= 1e-10

    def test_two_state_closed_form(self):
        a = 0.9
        transition = np.array([[a, 1.0 - a], [1.0 - a, a]])
        joint = 0.5 * transition
        cc = brute_maximal_correlation(joint)
        assert abs(cc * cc - 0.64) <= 1e-12


class TestWienerEquilibrium:
    def test_conditional_mean_residual(self, mc_run):
        model = mc_run["model"]
        n = model.n_states
        states = np.eye(n)
        fs = forward(mc_run["f"], states)
        gs = forward(mc_run["g"], states)
        prior = model.prior
        u_marginal = model.transition.T @ prior
        joint = prior[:, None] * model.transition
        eps = 1e-3
        r_f = fs.T @ (prior[:, None] * fs) + eps * np.eye(fs.shape[1])
        r_g = gs.T @ (u_marginal[:, None] * gs) + eps * np.eye(gs.shape[1])
        w_f = inv_half_power(SymMatrix.symmetrized(r_f)).a
        w_g = inv_half_power(SymMatrix.symmetrized(r_g)).a
        f_bar = fs @ w_f
        g_bar = gs @ w_g
        p_bar = w_f @ (fs.T @ joint @ gs) @ w_g
        resid = model.transition @ g_bar - f_bar @ p_bar
        value = float(np.mean(np.sum(resid * resid, axis=1)))
        assert value <= 1e-2, f"mean squared conditional-mean residual {value}"


class TestFactorialCoding:
    def test_diagonal_dominance_and_symmetry(self, factorial_run):
        mat = cdr_matrix(factorial_run["f"], factorial_run["res"],
                         factorial_run["base"])
        n = mat.shape[0]
        diag = float(np.trace(mat) / n)
        off = float(np.abs(mat[~np.eye(n, dtype=bool)]).mean())
        assert off / diag <= 0.2, f"off/diag ratio {off / diag}"
        assert float(np.max(np.abs(mat - mat.T))) <= 1e-9


class TestClassCoding:
    def test_accuracy_and_cdr_contrast(self, classify_run):
        run = classify_run
        mat = cdr_matrix(run["f"], run["res"], run["test_x"], run["train_x"])
        class_means = np.column_stack(
            [mat[:, run["train_y"] == c].mean(axis=1) for c in range(4)])
        pred = np.argmax(class_means, axis=1)
        accuracy = float(np.mean(pred == run["test_y"]))
        assert accuracy >= 0.95, f"accuracy {accuracy}"
        rows = np.arange(run["test_y"].shape[0])
        same = class_means[rows, run["test_y"]]
        cross = (class_means.sum(axis=1) - same) / 3.0
        assert same.mean() >= 5.0 * abs(cross.mean()), \
            f"same {same.mean():.3f} vs cross {cross.mean():.3f}"


class TestSequentialConvergence:
    def test_reach_iterations_non_decreasing(self, rho786_run):
        steps = rho786_run["iterations"]
        sig = rho786_run["sig"]
        finals = rho786_run["sigma"]
        reach = []
        for i in range(1, 5):
            crossed = np.nonzero(sig[:, i] >= 0.8 * finals[i])[0]
            assert crossed.size, f"mode {i+1} never reached 80% of final"
            reach.append(int(steps[crossed[0]]))
        assert all(reach[j] <= reach[j + 1] for j in range(3)), \
            f"80% reach iterations {reach}"
