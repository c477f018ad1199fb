import csv
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homsense.errors import InputError
from homsense.harness import (
    ExperimentConfig,
    expected_fraction,
    replay_trial,
    run_dimU_audit,
    run_experiment,
    run_hsp_sweep,
    run_noise_sweep,
    run_witness_sweep,
    trial_seed,
)
from homsense.numkit import Tolerance


def hsp_cfg(**kw):
    base = dict(experiment="hsp_sweep", grid={"family": ["perm"], "n": [2], "m": [3, 4]}, trials=10, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(InputError):
        ExperimentConfig(experiment="nope", grid={})
    with pytest.raises(InputError):
        ExperimentConfig(experiment="hsp_sweep", grid={"colour": [1]})
    with pytest.raises(InputError):
        ExperimentConfig(experiment="hsp_sweep", grid={}, trials=0)


def test_cells_are_grid_product():
    cfg = hsp_cfg(grid={"family": ["perm", "sel"], "n": [2], "m": [4, 5], "r": [4]})
    cells = cfg.cells()
    assert len(cells) == 4
    assert cells[0] == {"family": "perm", "n": 2, "m": 4, "r": 4}


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["hsp_sweep", "dimU_audit", "witness_sweep", "noise_sweep"]),
    st.lists(st.integers(1, 6), min_size=1, max_size=3),
    st.lists(st.booleans(), min_size=1, max_size=2),
    st.lists(st.floats(0.01, 0.99), min_size=1, max_size=2),
    st.integers(1, 50),
    st.integers(0, 2**62),
    st.floats(1e-14, 1e-4),
)
def test_toml_roundtrip_lossless(exp, ns, pms, fracs, trials, seed, rel):
    cfg = ExperimentConfig(exp, {"family": ["perm"], "n": ns, "sign_variant": pms, "noise_fraction": fracs},
                           trials=trials, seed=seed, tol=Tolerance(rel=rel), output="out")
    back = ExperimentConfig.from_toml(cfg.to_toml())
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_trial_seeds_distinct_and_stable():
    a = trial_seed(5, 0, 1).generate_state(2)
    b = trial_seed(5, 1, 0).generate_state(2)
    assert list(a) != list(b)
    assert list(trial_seed(5, 0, 1).generate_state(2)) == list(a)


def test_spec_hsp_cells():
    cfg = ExperimentConfig("hsp_sweep", {"family": ["perm"], "n": [2], "m": [3, 4]}, trials=100, seed=0)
    rep = run_hsp_sweep(cfg)
    fr = {c.params["m"]: c.fraction for c in rep.cells}
    assert fr == {3: Fraction(0), 4: Fraction(1)}
    cfg = ExperimentConfig("hsp_sweep", {"family": ["sign"], "n": [3], "m": [5], "sign_variant": [True]},
                           trials=20, seed=0)
    assert run_hsp_sweep(cfg).cells[0].fraction == 1
    assert all(c.matches_expectation for c in rep.cells)


def test_fractions_are_exact_ratios():
    rep = run_experiment(hsp_cfg())
    for c in rep.cells:
        rows = [r for r in rep.rows if r["cell"] == c.index]
        assert c.fraction == Fraction(sum(bool(r["success"]) for r in rows), len(rows))
        assert 0 <= c.fraction <= 1
        assert c.to_json()["success"] == f"{c.successes}/{c.trials}"


def test_reproducible_across_worker_counts():
    cfg = hsp_cfg(grid={"family": ["perm", "sel"], "n": [2], "m": [4], "r": [3]}, trials=8)
    one = run_experiment(cfg, workers=1)
    two = run_experiment(cfg, workers=2)
    assert one.canonical() == two.canonical()
    assert one.canonical() == run_experiment(cfg, workers=1).canonical()


def test_failure_replays_from_seed():
    cfg = hsp_cfg()
    rep = run_experiment(cfg)
    failing = next(c for c in rep.cells if c.first_failure_seed)
    _, cell, trial = (int(v) for v in failing.first_failure_seed.split(":"))
    row = replay_trial(cfg, cell, trial)
    orig = next(r for r in rep.rows if r["cell"] == cell and r["trial"] == trial)
    assert row["success"] == orig["success"] is False
    assert row["pairs_checked"] == orig["pairs_checked"]
    with pytest.raises(InputError):
        replay_trial(cfg, 99, 0)


def test_cells_above_caps_skipped_with_reason():
    cfg = hsp_cfg(grid={"family": ["perm"], "n": [2, 7], "m": [4, 9]}, trials=2)
    rep = run_experiment(cfg)
    skipped = [c for c in rep.cells if c.skipped]
    assert len(skipped) == 3
    assert all("cap" in c.skipped for c in skipped)
    assert all(c.trials == 0 for c in skipped)


def test_expected_fraction_table():
    assert expected_fraction({"family": "perm", "n": 2, "m": 4}) == 1.0
    assert expected_fraction({"family": "perm", "n": 2, "m": 3}) == 0.0
    assert expected_fraction({"family": "sel", "n": 2, "m": 5, "r": 2}) == 0.0
    assert expected_fraction({"family": "sign", "n": 3, "m": 5, "sign_variant": True}) == 1.0
    assert expected_fraction({"family": "sign", "n": 3, "m": 4, "sign_variant": True}) == 0.0
    assert expected_fraction({"family": "perm", "n": 4, "m": 2, "k": 1}) == 1.0
    assert expected_fraction({"family": "sel", "n": 2, "m": 5, "r": 3}) is None


def test_dimU_audit_s4():
    cfg = ExperimentConfig("dimU_audit", {"family": ["perm"], "m": [4], "n": [2]})
    rep = run_dimU_audit(cfg)
    row = rep.rows[0]
    assert row["success"] and row["max_dim_U"] <= 2 and row["within"] == "576/576"


def test_witness_sweep_selection_pairs():
    cfg = ExperimentConfig("witness_sweep", {"family": ["sel"], "m": [6], "r": [4], "d": [2]},
                           trials=2, max_pairs=60)
    rep = run_witness_sweep(cfg)
    assert rep.cells[0].fraction == 1
    assert all(r["attempted"] + r["skipped_precondition"] == 60 for r in rep.rows)


def test_noise_sweep_equality():
    cfg = ExperimentConfig("noise_sweep", {"family": ["perm"], "n": [2], "m": [5], "noise_fraction": [0.1]},
                           trials=30)
    rep = run_noise_sweep(cfg)
    assert rep.cells[0].fraction == 1
    assert all(r["equality_residual"] <= 1e-8 * r["eps_norm"] for r in rep.rows)


def test_reports_written(tmp_path):
    cfg = hsp_cfg(output=str(tmp_path / "out"), trials=3)
    rep = run_experiment(cfg)
    summary = json.loads((tmp_path / "out" / "hsp_sweep.json").read_text())
    meta = summary["metadata"]
    assert meta["generator"] == "PCG64" and meta["config_hash"] == cfg.digest()
    assert {"package_version", "timestamp", "numpy_version"} <= set(meta)
    with open(tmp_path / "out" / "hsp_sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(rep.rows) == 6
    assert {"cell", "trial", "seed", "success", "family", "m", "n"} <= set(rows[0])
