"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The heavy fixtures (multi-seed training runs at the reference settings)
are shared across criteria. Everything is seeded, so this module is
deterministic end to end. Expected runtime is on the order of ten
minutes; run it with ``pytest tests/test_acceptance.py -s`` to watch the
per-criterion lines appear.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from sharpcap import (
    BallOracleConfig,
    IgniteConfig,
    MlpSpec,
    QuadraticSurrogate,
    SearchConfig,
    Surrogate,
    base_value_and_derivs,
    candidate_sharpness,
    check_construction,
    expansion_grad,
    first_order_sharpness,
    generate_offline_dataset,
    grad_of_grad_norm_from,
    init_params,
    input_grad,
    loss_and_grad,
    loss_and_mean_output_grad,
    make_task,
    mean_output_grad,
    norm2,
    predict,
    predict_batch,
    sampled_sharpness,
    grad_ascent_search,
    evaluate_candidates,
    train_erm,
    train_ignite,
)
from sharpcap.quadratic import reference_hessian_diag
from sharpcap.seeds import derive

from conftest import central_diff_grad

MASTER = 20240
TASKS = ("quad_bowl", "neg_ackley", "neg_rastrigin", "neg_branin")
# per-task step sizes keeping plain SGD stable at each task's input scale
ETA = {"quad_bowl": 0.05, "neg_ackley": 0.02, "neg_rastrigin": 0.02, "neg_branin": 0.005}
REFERENCE = dict(lambda0=0.01, rho=0.05, r=0.05, eta_lambda=1e-3, epsilon=0.1,
                 iterations=2000, batch_size=128)


def announce(number, name, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number:>2} {name}: {status} — {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def reference_config(task_tag, seed):
    return IgniteConfig(eta_w=ETA[task_tag], seed=seed, **REFERENCE)


@pytest.fixture(scope="module")
def reference_runs():
    """8 seeds x 4 tasks x {erm, ignite} at the reference settings."""
    runs = {}
    for tag in TASKS:
        task = make_task(tag)
        spec = MlpSpec(task.dim, (64, 64))
        rows = []
        for k in range(8):
            s = derive(MASTER, k)
            data = generate_offline_dataset(task, 5000, 0.4, seed=derive(s, 0))
            cfg = reference_config(tag, derive(s, 1))
            t0 = time.perf_counter()
            m_erm, tr_erm = train_erm(data, spec, cfg)
            t_erm = time.perf_counter() - t0
            t0 = time.perf_counter()
            m_ign, tr_ign = train_ignite(data, spec, cfg)
            t_ign = time.perf_counter() - t0
            rows.append(dict(seed=s, data=data, erm=m_erm, ign=m_ign,
                             erm_trace=tr_erm, ign_trace=tr_ign,
                             erm_seconds=t_erm, ign_seconds=t_ign, cfg=cfg))
        runs[tag] = dict(task=task, spec=spec, rows=rows)
    return runs


def test_c01_gradient_correctness():
    rng = np.random.default_rng(20240811)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    max_params = 0
    for i in range(50):
        if i < 44:
            dim = int(rng.integers(2, 9))
            hidden = tuple(int(w) for w in rng.integers(4, 17, size=rng.integers(0, 3)))
        else:
            dim, hidden = 16, (36, 36)  # close to the 2000-parameter cap
        act = "tanh" if i % 2 == 0 else "relu"
        spec = MlpSpec(dim, hidden, hidden_activation=act)
        assert spec.param_count <= 2000
        max_params = max(max_params, spec.param_count)
        s = Surrogate(spec, init_params(spec, 1000 + i))
        n = int(rng.integers(2, 9))
        X = rng.uniform(-2, 2, size=(n, dim))
        z = rng.uniform(0, 1, size=n)
        _, g_loss, g_mean = loss_and_mean_output_grad(s, X, z)
        fd_loss = central_diff_grad(lambda w: loss_and_grad(s.with_params(w), X, z)[0], s.params)
        fd_mean = central_diff_grad(
            lambda w: float(np.mean(predict_batch(s.with_params(w), X))), s.params
        )
        g_in = input_grad(s, X[0])
        fd_in = central_diff_grad(lambda v: predict(s, v), X[0])
        for analytic, fd in ((g_loss, fd_loss), (g_mean, fd_mean), (g_in, fd_in)):
            # the denominator floor sits at the central-difference noise
            # level (~1e-11 absolute at step 1e-5), where the oracle itself
            # stops being able to certify a relative error
            denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-4)
            worst = max(worst, float(np.max(np.abs(analytic - fd) / denom)))
        count += 1
    elapsed = time.perf_counter() - t0
    announce(1, "gradient correctness", worst < 1e-6 and elapsed < 60.0 and count >= 50,
             f"{count} instances (max {max_params} params), worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_c02_hvp_exact_on_constant_hessian():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    q = QuadraticSurrogate(
        a_diag=rng.uniform(0.2, 0.8, 12), mean_vec=rng.uniform(-0.5, 0.5, 12), gamma=2.0
    )
    h = reference_hessian_diag(q)
    worst = 0.0
    for trial in range(5):
        omega = rng.uniform(-1.0, 1.0, 12)
        g = expansion_grad(q, omega)
        v = g / np.linalg.norm(g)
        analytic = h * v
        for r in (1e-1, 1e-3):
            vec, degenerate = grad_of_grad_norm_from(lambda w: expansion_grad(q, w), omega, r)
            assert not degenerate
            rel = float(np.max(np.abs(vec - analytic) / np.maximum(np.abs(analytic), 1e-12)))
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    announce(2, "HVP exactness on constant Hessian", worst < 1e-10 and elapsed < 5.0,
             f"worst rel err {worst:.2e} over r in {{1e-1, 1e-3}}, {elapsed:.1f}s")


def test_c03_taylor_order_of_sampled_sharpness():
    rng = np.random.default_rng(7)
    ratios = []
    for inst in range(10):
        spec = MlpSpec(4, (12, 12), hidden_activation="tanh")
        s = Surrogate(spec, init_params(spec, 100 + inst))
        X = rng.uniform(-2, 2, size=(16, 4))
        gaps = []
        for rho in (4e-3, 2e-3, 1e-3):
            fo = first_order_sharpness(s, X, rho).estimate
            sam = sampled_sharpness(s, X, rho, BallOracleConfig(num_random_directions=16, seed=inst))
            gaps.append(abs(sam - fo))
        ratios.append(gaps[0] / gaps[1])
        ratios.append(gaps[1] / gaps[2])
    med = float(np.median(ratios))
    announce(3, "second-order gap shrinkage", 3.0 <= med <= 5.0,
             f"median halving ratio {med:.2f} over 10 tanh instances")


def test_c04_multiplier_force_law(reference_runs):
    checked = 0
    ok = True
    for tag in TASKS:
        for row in reference_runs[tag]["rows"]:
            trace = row["ign_trace"]
            cfg = row["cfg"]
            pre_clamp = trace.lam[:-1] + cfg.eta_lambda * trace.constraint[:-1]
            increments = pre_clamp - trace.lam[:-1]
            ok = ok and bool(np.all(np.sign(increments) == np.sign(trace.constraint[:-1])))
            ok = ok and bool(np.all(trace.lam >= 0.0))
            ok = ok and bool(np.all(trace.lam[1:] == np.maximum(0.0, pre_clamp)))
            for col in (trace.loss, trace.grad_norm, trace.constraint, trace.lam, trace.update_norm):
                ok = ok and bool(np.all(np.isfinite(col)))
            checked += 1
    announce(4, "multiplier force law", ok,
             f"exact sign/floor identity on {checked} traces x {REFERENCE['iterations']} iterations")


def test_c05_reduction_identity_bitwise():
    ok = True
    details = []
    for tag in TASKS:
        task = make_task(tag)
        spec = MlpSpec(task.dim, (64, 64))
        data = generate_offline_dataset(task, 2000, 0.4, seed=derive(MASTER, 90))
        cfg = replace(reference_config(tag, derive(MASTER, 91)),
                      lambda0=0.0, eta_lambda=0.0, iterations=500, batch_size=64)
        m_ign, _ = train_ignite(data, spec, cfg)
        m_erm, _ = train_erm(data, spec, cfg)
        same = bool(np.array_equal(m_ign.params, m_erm.params))
        ok = ok and same
        details.append(f"{tag}:{'=' if same else '!='}")
    announce(5, "reduction identity (lambda0=0, eta_lambda=0)", ok, " ".join(details))


def test_c06_constraint_satisfaction(reference_runs):
    t0 = time.perf_counter()
    ok = True
    details = []
    for tag in ("quad_bowl", "neg_ackley"):
        rows = reference_runs[tag]["rows"]
        erm_vals = [0.05 * norm2(mean_output_grad(r["erm"], r["data"].X)) for r in rows]
        ign_vals = [0.05 * norm2(mean_output_grad(r["ign"], r["data"].X)) for r in rows]
        erm_med, ign_med = float(np.median(erm_vals)), float(np.median(ign_vals))
        ok = ok and ign_med <= 1.5 * 0.1 and erm_med > ign_med
        details.append(f"{tag}: ign {ign_med:.3f} (cap 0.15), erm {erm_med:.3f}")
    elapsed = time.perf_counter() - t0
    announce(6, "constraint satisfaction at reference settings", ok,
             "; ".join(details) + f" [{elapsed:.0f}s incl. fixture reuse]")


def test_c07_candidate_sharpness_direction(reference_runs):
    lower = 0
    details = []
    for tag in TASKS:
        task = reference_runs[tag]["task"]
        rows = reference_runs[tag]["rows"]
        erm_vals, ign_vals = [], []
        for row in rows:
            scfg = SearchConfig(method="ga", steps=100, num_candidates=128,
                                seed=derive(row["seed"], 2))
            for which, bucket in (("erm", erm_vals), ("ign", ign_vals)):
                cands = grad_ascent_search(row[which], row["data"], scfg, task.bounds)
                bucket.append(candidate_sharpness(row[which], cands, 0.05).estimate)
        erm_med, ign_med = float(np.median(erm_vals)), float(np.median(ign_vals))
        if ign_med < erm_med:
            lower += 1
        details.append(f"{tag}: {erm_med:.3f}->{ign_med:.3f}")
    announce(7, "sharpness on own candidates drops", lower >= 2,
             f"lower on {lower}/4 tasks ({'; '.join(details)})")


@pytest.fixture(scope="module")
def ackley_search_runs():
    """16 seeds of GA and ENS-MIN on neg_ackley, ERM vs sharpness-capped.

    Both searches start from designs spread uniformly over the box, which
    is where the flat-vs-sharp contrast acts: a capped surrogate funnels
    dispersed candidates coherently while a sharp one strands them in
    spurious local maxima. The two-member min ensemble keeps the min
    aggregate from regularizing so strongly on its own that the trainer
    contrast washes out.
    """
    task = make_task("neg_ackley")
    spec = MlpSpec(task.dim, (64, 64))
    ga = {"erm": [], "ign": []}
    ens = {"erm": [], "ign": []}
    for k in range(16):
        s = derive(MASTER, k)
        data = generate_offline_dataset(task, 5000, 0.4, seed=derive(s, 0))
        cfg = reference_config("neg_ackley", derive(s, 1))
        ga_cfg = SearchConfig(method="ga", steps=200, num_candidates=128,
                              init="random_box", seed=derive(s, 2))
        ens_cfg = SearchConfig(method="ens_min", steps=400, num_candidates=128,
                               ensemble_size=2, init="random_box", seed=derive(s, 2))
        for tag, trainer in (("erm", train_erm), ("ign", train_ignite)):
            single, _ = trainer(data, spec, cfg)
            cands = grad_ascent_search(single, data, ga_cfg, task.bounds)
            ga[tag].append(evaluate_candidates(cands, task).normalized[-1])
            members = [
                trainer(data, spec, replace(cfg, seed=derive(cfg.seed, m)))[0] for m in range(2)
            ]
            cands = grad_ascent_search(members, data, ens_cfg, task.bounds)
            ens[tag].append(evaluate_candidates(cands, task).normalized[-1])
    return ga, ens


def test_c08_search_gain_direction(ackley_search_runs):
    ga, ens = ackley_search_runs
    ga_diff = float(np.median(ga["ign"]) - np.median(ga["erm"]))
    ens_diff = float(np.median(ens["ign"]) - np.median(ens["erm"]))
    announce(8, "100th-percentile direction on neg_ackley", ga_diff >= 0.0 and ens_diff >= 0.0,
             f"GA diff {ga_diff:+.4f}; ENS-MIN diff {ens_diff:+.4f} (medians over 16 seeds)")


def test_c09_epsilon_sweep_shape():
    task = make_task("neg_ackley")
    spec = MlpSpec(task.dim, (64, 64))
    grid = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
    scores = {eps: [] for eps in grid}
    base_scores = []
    for k in range(8):
        s = derive(MASTER, k)
        data = generate_offline_dataset(task, 5000, 0.4, seed=derive(s, 0))
        cfg = reference_config("neg_ackley", derive(s, 1))
        scfg = SearchConfig(method="ga", steps=200, num_candidates=128,
                            init="random_box", seed=derive(s, 2))
        m, _ = train_erm(data, spec, cfg)
        cands = grad_ascent_search(m, data, scfg, task.bounds)
        base_scores.append(evaluate_candidates(cands, task).normalized[-1])
        for eps in grid:
            m, _ = train_ignite(data, spec, replace(cfg, epsilon=eps))
            cands = grad_ascent_search(m, data, scfg, task.bounds)
            scores[eps].append(evaluate_candidates(cands, task).normalized[-1])
    base = float(np.median(base_scores))
    gains = {eps: float(np.median(scores[eps]) - base) for eps in grid}
    ok = gains[0.1] >= gains[0.01] and gains[0.1] >= gains[0.5]
    pretty = ", ".join(f"{eps:g}:{100 * g:+.2f}" for eps, g in gains.items())
    announce(9, "threshold sweep shape", ok, f"gains in points {{{pretty}}}")


def test_c10_quadratic_construction_randomized():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    ok = True
    worst_h = 0.0
    for _ in range(100):
        m = int(rng.integers(2, 17))
        a_lo = float(rng.uniform(0.01, 0.9))
        a_hi = float(rng.uniform(a_lo + 0.005, 0.999))
        gamma = float(rng.uniform(1e-3, 4.0))
        q = QuadraticSurrogate(
            a_diag=rng.uniform(a_lo, a_hi, m),
            mean_vec=rng.uniform(-0.5, 0.5, m),
            gamma=gamma,
            tau=float(rng.uniform(0.5, 2.0)),
        )
        h = reference_hessian_diag(q)
        ok = ok and bool(np.all(h > 0.0))
        step = 1e-4
        w_plus = q.omega_plus
        f0 = base_value_and_derivs(q, w_plus)[0]
        for i in range(m):
            wp, wm = w_plus.copy(), w_plus.copy()
            wp[i] += step
            wm[i] -= step
            numeric = (base_value_and_derivs(q, wp)[0] - 2.0 * f0 + base_value_and_derivs(q, wm)[0]) / step**2
            worst_h = max(worst_h, abs(numeric - h[i]))
        rep = check_construction(q, samples_in_ball=100, seed=int(rng.integers(0, 2**31)))
        ok = ok and rep.bound_respected and rep.curvature_positive
    elapsed = time.perf_counter() - t0
    announce(10, "quadratic construction randomized", ok and worst_h < 1e-5 and elapsed < 30.0,
             f"100 instances, worst Hessian mismatch {worst_h:.2e}, {elapsed:.1f}s")


def test_c11_training_overhead(reference_runs):
    worst = 0.0
    details = []
    for tag in TASKS:
        rows = reference_runs[tag]["rows"]
        erm = float(np.mean([r["erm_seconds"] for r in rows]))
        ign = float(np.mean([r["ign_seconds"] for r in rows]))
        ratio = ign / erm
        worst = max(worst, ratio)
        details.append(f"{tag}:{ratio:.2f}x")
    announce(11, "per-iteration overhead envelope", worst <= 3.0,
             f"wall-time ratios {' '.join(details)} (cap 3x)")
