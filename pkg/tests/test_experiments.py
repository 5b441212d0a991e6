import csv

import numpy as np
import pytest

from arena.cli import main, parse_alphas
from arena.errors import InvalidInstanceError
from arena.experiments import (EXPERIMENT_COLUMNS, ExperimentConfig,
                               gen_instance, run_bound_report, run_experiment,
                               run_lower_bound_report, summarize)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_gen_instance_setups():
    rng = np.random.default_rng(5)
    a = gen_instance("a", queries=30, rng=rng)
    assert a.values.shape == (2, 30)
    assert np.all((a.values >= 0.3) & (a.values <= 1.0))
    b = gen_instance("b", queries=30, rng=rng)
    rows_low = np.all((b.values >= 0.3) & (b.values <= 0.5), axis=1)
    rows_high = np.all((b.values >= 1.0) & (b.values <= 1.2), axis=1)
    assert np.all(rows_low | rows_high)
    np.testing.assert_allclose(gen_instance("c").values,
                               [[1.0, 0.01], [0.01, 0.99]])
    np.testing.assert_allclose(gen_instance("d").values, [[1.0], [0.9]])
    with pytest.raises(InvalidInstanceError):
        gen_instance("z", rng=rng)


def test_gen_instance_b_mixes_row_levels():
    # over many draws both advertiser levels must appear
    rng = np.random.default_rng(6)
    highs = [bool(gen_instance("b", 4, rng).values[0, 0] > 0.9)
             for _ in range(40)]
    assert any(highs) and not all(highs)


def small_config(tmp_path, **kw):
    base = dict(setup="a", mechanisms=("spa", "rfpa"), alphas=(1.4,),
                trials=2, queries=6, seed=11, out_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_experiment_rows_and_files(tmp_path):
    res = run_experiment(small_config(tmp_path / "r1"))
    # 2 trials x (spa + rfpa(1.4))
    assert len(res.rows) == 4
    assert res.csv_path.exists() and res.summary_path.exists()
    assert res.plot_paths and res.plot_paths[0].exists()
    rows = read_csv(res.csv_path)
    assert list(rows[0].keys()) == EXPERIMENT_COLUMNS
    for row in rows:
        assert row["setup"] == "a"
        assert row["converged"] in ("True", "False")
        float(row["poa"]), float(row["lw_eq"]), float(row["lw_opt"])
    assert {r["mechanism"] for r in rows} == {"spa", "rfpa"}


def test_same_seed_reruns_are_byte_identical(tmp_path):
    r1 = run_experiment(small_config(tmp_path / "x"), plots=False)
    r2 = run_experiment(small_config(tmp_path / "y"), plots=False)
    assert r1.csv_path.read_bytes() == r2.csv_path.read_bytes()
    assert r1.summary_path.read_bytes() == r2.summary_path.read_bytes()


def test_different_seeds_differ(tmp_path):
    r1 = run_experiment(small_config(tmp_path / "x"), plots=False)
    r2 = run_experiment(small_config(tmp_path / "y", seed=12), plots=False)
    assert r1.csv_path.read_bytes() != r2.csv_path.read_bytes()


def test_trial_instances_do_not_depend_on_trial_count():
    s1 = np.random.SeedSequence(11).spawn(2)[1]
    s2 = np.random.SeedSequence(11).spawn(5)[1]
    i1 = gen_instance("a", 6, np.random.Generator(np.random.Philox(s1)))
    i2 = gen_instance("a", 6, np.random.Generator(np.random.Philox(s2)))
    assert np.array_equal(i1.values, i2.values)


def test_summarize_excludes_non_converged():
    rows = [
        {"setup": "a", "mechanism": "spa", "alpha": "", "converged": "True",
         "poa": "1.5", "lw_eq": "1.0"},
        {"setup": "a", "mechanism": "spa", "alpha": "", "converged": "False",
         "poa": "9.0", "lw_eq": "0.1"},
    ]
    out = summarize(rows)
    assert len(out) == 1
    assert out[0]["n_converged"] == 1
    assert out[0]["n_not_converged"] == 1
    assert float(out[0]["mean_poa"]) == pytest.approx(1.5)


def test_fixed_setups_override_query_count(tmp_path):
    res = run_experiment(small_config(tmp_path, setup="d", queries=50),
                         plots=False)
    assert all(r["setup"] == "d" for r in res.rows)
    # single-query instance regardless of the requested query count
    assert res.config.queries == 1


def test_bound_report_files(tmp_path):
    ev, paths = run_bound_report(tmp_path, "rfpa", 1.4, 0.56,
                                 beta_points=1024)
    csv_path = paths[0]
    rows = read_csv(csv_path)
    assert len(rows) == 1024
    assert list(rows[0].keys()) == ["alpha", "gamma", "beta", "g",
                                    "term_eta_alpha", "term_gamma", "f"]
    assert float(rows[0]["f"]) == pytest.approx(ev.f_value)
    assert paths[1].exists()  # the figure


def test_lower_bound_report_rtruth(tmp_path):
    rows, paths = run_lower_bound_report(tmp_path, "rtruth",
                                         alphas=[1.2, 1.4], plots=False)
    assert len(rows) == 2
    assert all(r["gamma_ok"] == "True" for r in rows)
    assert paths[0].exists()


def test_lower_bound_report_deterministic_kinds(tmp_path):
    rows, _ = run_lower_bound_report(tmp_path, "fpa", b2_list=[1e2, 1e3],
                                     plots=False)
    assert len(rows) == 2
    assert float(rows[1]["measured_ratio"]) > float(rows[0]["measured_ratio"])
    with pytest.raises(InvalidInstanceError):
        run_lower_bound_report(tmp_path, "nope")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def test_parse_alphas():
    assert parse_alphas("1.1:1.3:0.1") == (1.1, 1.2, 1.3)
    assert parse_alphas("1.05,1.4") == (1.05, 1.4)
    import argparse
    with pytest.raises(argparse.ArgumentTypeError):
        parse_alphas("2.0:1.0:0.1")


def test_cli_run(tmp_path, capsys):
    rc = main(["run", "--setup", "d", "--mechanisms", "spa,rfpa",
               "--alphas", "1.4", "--trials", "1", "--seed", "3",
               "--out", str(tmp_path), "--no-plots"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "experiment_d.csv" in out
    assert (tmp_path / "experiment_d.csv").exists()


def test_cli_bounds(tmp_path, capsys):
    rc = main(["bounds", "--variant", "rfpa", "--alpha", "1.4",
               "--gamma", "0.56", "--out", str(tmp_path), "--no-plots"])
    assert rc == 0
    assert "PoA bound" in capsys.readouterr().out
    assert (tmp_path / "bounds_rfpa.csv").exists()


def test_cli_lb(tmp_path, capsys):
    rc = main(["lb", "--kind", "rtruth", "--alpha", "1.4", "--eps", "1e-3",
               "--out", str(tmp_path), "--no-plots"])
    assert rc == 0
    assert "gamma_ok=True" in capsys.readouterr().out


def test_cli_verify_single_criterion(tmp_path, capsys):
    rc = main(["verify", "--out", str(tmp_path), "--criteria", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion  1" in out
    assert "1/1 criteria passed" in out
