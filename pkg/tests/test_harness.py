import json
from dataclasses import replace
from statistics import mean

import numpy as np
import pytest

from sharpcap.config import ExperimentConfig, config_from_dict, load_config
from sharpcap.errors import ConfigError
from sharpcap.harness import (
    RunReport,
    SeedRow,
    compare,
    emit_traces,
    load_candidates,
    load_model,
    run_experiment,
    save_candidates,
    save_model,
    sweep,
    theory_report,
    write_trace_csv,
)
from sharpcap.search import CandidateSet
from sharpcap.trainers import IgniteConfig
from sharpcap.mlp import MlpSpec, Surrogate, init_params


def tiny_config(**overrides):
    base = dict(
        task="neg_branin",
        n_pool=200,
        keep_quantile=0.5,
        hidden_widths=(8,),
        trainer="ignite",
        train=IgniteConfig(iterations=60, batch_size=16, eta_w=0.001, seed=0),
        search=replace(ExperimentConfig().search, steps=10, num_candidates=16),
        num_seeds=2,
        master_seed=11,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def synthetic_report(task, levels, values_by_seed, train_seconds=1.0):
    rows = [
        SeedRow(
            seed_index=i,
            seed=100 + i,
            normalized=tuple(vals),
            raw=tuple(v * 10 for v in vals),
            sharpness=0.1,
            train_seconds=train_seconds,
            train_iterations=10,
        )
        for i, vals in enumerate(values_by_seed)
    ]
    return RunReport(config={}, task_name=task, levels=levels, rows=rows)


class TestRunExperiment:
    def test_smoke_two_seeds(self, tmp_path):
        report = run_experiment(tiny_config(), tmp_path / "out")
        assert len(report.rows) == 2
        assert not any(r.failed for r in report.rows)
        agg = report.aggregate()
        for level in (50, 80, 100):
            vals = [r.normalized[report.levels.index(level)] for r in report.rows]
            assert agg[level]["mean"] == pytest.approx(mean(vals), abs=1e-15)
        assert (tmp_path / "out" / "report.json").exists()
        assert (tmp_path / "out" / "report.csv").exists()
        assert (tmp_path / "out" / "traces" / "seed_000.csv").exists()

    def test_rerun_bitwise_identical(self, tmp_path):
        r1 = run_experiment(tiny_config(), tmp_path / "a")
        r2 = run_experiment(tiny_config(), tmp_path / "b")
        for a, b in zip(r1.rows, r2.rows):
            assert a.normalized == b.normalized
            assert a.raw == b.raw
            assert a.sharpness == b.sharpness
        csv_a = (tmp_path / "a" / "report.csv").read_text()
        csv_b = (tmp_path / "b" / "report.csv").read_text()
        # timing columns differ between runs; everything else must match
        for la, lb in zip(csv_a.splitlines(), csv_b.splitlines()):
            assert la.rsplit(",", 2)[0] == lb.rsplit(",", 2)[0]
        t_a = (tmp_path / "a" / "traces" / "seed_001.csv").read_bytes()
        t_b = (tmp_path / "b" / "traces" / "seed_001.csv").read_bytes()
        assert t_a == t_b

    def test_report_roundtrip_and_validation(self, tmp_path):
        report = run_experiment(tiny_config(), None)
        path = report.save(tmp_path / "report.json")
        loaded = RunReport.load(path)
        assert loaded.rows[0].normalized == report.rows[0].normalized
        # tamper with the stored aggregate: load must refuse it
        data = json.loads(path.read_text())
        data["aggregate"]["100"]["mean"] += 0.5
        path.write_text(json.dumps(data))
        with pytest.raises(ValueError):
            RunReport.load(path)

    def test_partial_failure_preserved(self, tmp_path, monkeypatch):
        import sharpcap.harness as hmod

        real = hmod.run_seed

        def flaky(cfg, task, seed, seed_index):
            if seed_index == 1:
                raise RuntimeError("boom")
            return real(cfg, task, seed, seed_index)

        monkeypatch.setattr(hmod, "run_seed", flaky)
        report = run_experiment(tiny_config(), tmp_path / "out")
        assert report.rows[1].failed and "boom" in report.rows[1].error
        assert len(report.ok_rows()) == 1
        csv_lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
        assert csv_lines[2].endswith("true")

    def test_all_seeds_failed_raises(self):
        cfg = tiny_config(train=IgniteConfig(iterations=80, batch_size=16, eta_w=50.0, seed=0))
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(RuntimeError):
            run_experiment(cfg, None)

    def test_ensemble_run(self, tmp_path):
        cfg = tiny_config(
            search=replace(
                ExperimentConfig().search,
                method="ens_min",
                ensemble_size=2,
                steps=5,
                num_candidates=8,
            )
        )
        report = run_experiment(cfg, tmp_path / "out")
        assert (tmp_path / "out" / "traces" / "seed_000_m0.csv").exists()
        assert (tmp_path / "out" / "traces" / "seed_000_m1.csv").exists()
        assert report.rows[0].train_iterations == 2 * cfg.train.iterations


class TestTraces:
    def test_trace_csv_schema(self, tmp_path):
        from test_trainers import linear_dataset
        from sharpcap import train_ignite

        data = linear_dataset()
        cfg = IgniteConfig(iterations=25, batch_size=8, seed=3)
        _, trace = train_ignite(data, MlpSpec(3, (6,)), cfg)
        path = write_trace_csv(trace, cfg.rho, tmp_path / "t.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,loss,grad_norm,rho_times_grad_norm,lambda,constraint"
        assert len(lines) == 1 + cfg.iterations
        body = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.all(np.isfinite(body))
        np.testing.assert_allclose(body[:, 3], cfg.rho * body[:, 2], rtol=1e-15)

    def test_emit_traces_matches_run_output(self, tmp_path):
        run_dir = tmp_path / "run"
        report = run_experiment(tiny_config(), run_dir)
        redo_dir = tmp_path / "redo"
        paths = emit_traces(report, redo_dir)
        assert len(paths) == 2
        for idx in (0, 1):
            a = (run_dir / "traces" / f"seed_{idx:03d}.csv").read_bytes()
            b = (redo_dir / f"seed_{idx:03d}.csv").read_bytes()
            assert a == b


class TestCompare:
    def test_table_one_convention(self):
        base = synthetic_report("t", (100,), [[0.881], [0.881]])
        treated = synthetic_report("t", (100,), [[0.886], [0.886]])
        table = compare(base, treated)
        assert table.rows[0].gain_points == pytest.approx(0.5, abs=1e-9)

    def test_reinforce_style_gain(self):
        base = synthetic_report("t", (100,), [[0.546], [0.546]])
        treated = synthetic_report("t", (100,), [[0.642], [0.642]])
        assert compare(base, treated).rows[0].gain_points == pytest.approx(9.6, abs=1e-9)

    def test_identical_reports_zero_gain(self):
        rep = synthetic_report("t", (50, 100), [[0.3, 0.5], [0.4, 0.6]])
        table = compare(rep, rep)
        for row in table.rows:
            assert row.gain_points == 0.0
            assert row.gain_points_median == 0.0

    def test_protocol_mismatch_rejected(self):
        a = synthetic_report("t", (100,), [[0.5], [0.5]])
        b = synthetic_report("u", (100,), [[0.5], [0.5]])
        with pytest.raises(ValueError):
            compare(a, b)
        c = synthetic_report("t", (50,), [[0.5], [0.5]])
        with pytest.raises(ValueError):
            compare(a, c)
        d = synthetic_report("t", (100,), [[0.5]])
        with pytest.raises(ValueError):
            compare(a, d)

    def test_train_time_ratio(self):
        base = synthetic_report("t", (100,), [[0.5], [0.5]], train_seconds=1.0)
        treated = synthetic_report("t", (100,), [[0.5], [0.5]], train_seconds=2.5)
        assert compare(base, treated).train_time_ratio == pytest.approx(2.5)


class TestSweep:
    def test_single_value_rejected(self):
        with pytest.raises(ConfigError):
            sweep(tiny_config(), "epsilon", [0.1])

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ConfigError):
            sweep(tiny_config(), "batch_size", [16, 32])

    def test_erm_config_rejected(self):
        with pytest.raises(ConfigError):
            sweep(tiny_config(trainer="erm"), "epsilon", [0.1, 0.2])

    def test_row_count_matches_values(self, tmp_path):
        result = sweep(tiny_config(), "epsilon", [0.05, 0.1, 0.2], tmp_path / "sweep")
        assert len(result.runs) == 3
        assert len(result.gains) == 3
        csv_lines = (tmp_path / "sweep" / "sweep.csv").read_text().splitlines()
        assert len(csv_lines) == 1 + 3 * 3  # header + values x levels


class TestTheoryReport:
    def test_default_passes_and_mentions_lambda_min(self):
        text, rep = theory_report(samples=100)
        assert rep.passed
        assert "lambda_min" in text
        assert "PASS" in text

    def test_gamma_zero_degenerate(self):
        text, rep = theory_report(gamma=0.0, samples=50)
        assert rep.degenerate and not rep.passed
        assert "degenerate: yes" in text
        assert "FAIL" in text


class TestPersistence:
    def test_model_roundtrip_exact(self, tmp_path):
        spec = MlpSpec(3, (5,))
        model = Surrogate(spec, init_params(spec, 3))
        path = save_model(model, tmp_path / "m.json")
        loaded = load_model(path)
        assert loaded.spec == spec
        np.testing.assert_array_equal(loaded.params, model.params)

    def test_candidates_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        c = CandidateSet(designs=rng.uniform(-1, 1, (10, 3)), surrogate_scores=rng.uniform(0, 1, 10))
        path = save_candidates(c, tmp_path / "c.csv")
        loaded = load_candidates(path)
        np.testing.assert_array_equal(loaded.designs, c.designs)
        np.testing.assert_array_equal(loaded.surrogate_scores, c.surrogate_scores)
        assert loaded.oracle_scores is None
        c.oracle_scores = rng.uniform(-5, 0, 10)
        path2 = save_candidates(c, tmp_path / "c2.csv")
        loaded2 = load_candidates(path2)
        np.testing.assert_array_equal(loaded2.oracle_scores, c.oracle_scores)


class TestConfigParsing:
    def test_minimal_toml(self, tmp_path):
        path = tmp_path / "e.toml"
        path.write_text('[task]\nname = "quad_bowl"\n')
        cfg = load_config(path)
        assert cfg.task == "quad_bowl"
        assert cfg.train.rho == 0.05

    def test_full_toml(self, tmp_path):
        path = tmp_path / "e.toml"
        path.write_text(
            """
[task]
name = "neg_ackley"
dim = 4
n_pool = 1000
keep_quantile = 0.3

[surrogate]
hidden_widths = [32, 32]
hidden_activation = "tanh"

[trainer]
kind = "ignite2"
lambda0 = 0.01
rho = 0.2
r = 0.2
iterations = 500

[search]
method = "ens_min"
ensemble_size = 3
steps = 50

[eval]
levels = [50, 80, 100]
seeds = [5, 6, 7]
"""
        )
        cfg = load_config(path)
        assert cfg.dim == 4 and cfg.trainer == "ignite2"
        assert cfg.train.rho == 0.2 and cfg.train.iterations == 500
        assert cfg.search.ensemble_size == 3
        assert cfg.resolved_seeds() == (5, 6, 7)

    def test_unknown_field_has_path(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"trainer": {"kindd": "erm"}})
        assert "trainer.kindd" in str(err.value)

    def test_bad_value_has_path(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"trainer": {"rho": -1.0}})
        assert "trainer" in str(err.value)

    def test_bad_task_name(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"task": {"name": "mujoco"}})
        assert "task.name" in str(err.value)

    def test_seed_count_expansion_documented_scheme(self):
        from sharpcap.seeds import derive

        cfg = config_from_dict({"eval": {"seeds": 3, "master_seed": 42}})
        assert cfg.resolved_seeds() == tuple(derive(42, i) for i in range(3))
