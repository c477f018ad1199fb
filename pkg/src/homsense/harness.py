"""Config-driven Monte Carlo experiments with replayable per-trial seeds.

A config names one experiment and a grid; every combination of the grid
lists is a cell.  Trial (cell, t) draws its randomness from
``SeedSequence(seed, spawn_key=(cell, t))`` so results do not depend on
scheduling or on the number of workers.  Reports are a CSV with one row per
(cell, trial) and a JSON summary whose success fractions are exact ratios
stored as "k/n".
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from . import __version__
from .certify import hsp_ksparse, hsp_pair, hsp_set
from .errors import FamilySizeError, HomsenseError, InputError, PreconditionError
from .filtration import construct_witness
from .maps import MapFamily, random_sensing_matrix
from .numkit import Subspace, Tolerance
from .pencil import audit_dimension_bound, dim_U, spectrum
from .recover import stability_report

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "SweepReport",
    "EXPERIMENTS",
    "trial_seed",
    "make_family",
    "expected_fraction",
    "run_hsp_sweep",
    "run_dimU_audit",
    "run_witness_sweep",
    "run_noise_sweep",
    "run_experiment",
    "replay_trial",
]

EXPERIMENTS = ("hsp_sweep", "dimU_audit", "witness_sweep", "noise_sweep")
GRID_KEYS = ("family", "n", "m", "r", "k", "d", "sign_variant", "noise_fraction")
GENERATOR = "PCG64"

# desk-scale limits per family kind
CAPS = {"perm": {"m": 8}, "sel": {"m": 10, "r": 5}, "sign": {"m": 12}, "selsign": {"m": 10, "r": 5}}
CAPS_N, CAPS_K = 6, 3


@dataclass
class ExperimentConfig:
    experiment: str
    grid: dict
    trials: int = 10
    seed: int = 0
    tol: Tolerance = field(default_factory=Tolerance)
    output: str = None
    workers: int = 1
    max_pairs: int = 0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InputError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.trials < 1:
            raise InputError("trials must be >= 1")
        unknown = set(self.grid) - set(GRID_KEYS)
        if unknown:
            raise InputError(f"unknown grid keys {sorted(unknown)}")
        if isinstance(self.tol, dict):
            self.tol = Tolerance(**self.tol)
        self.grid = {k: list(v) if isinstance(v, (list, tuple)) else [v] for k, v in self.grid.items()}

    def cells(self):
        keys = [k for k in GRID_KEYS if self.grid.get(k)]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def to_dict(self):
        out = {
            "experiment": self.experiment,
            "trials": self.trials,
            "seed": self.seed,
            "workers": self.workers,
            "max_pairs": self.max_pairs,
            "tol": self.tol.to_json(),
            "grid": {k: list(v) for k, v in self.grid.items()},
        }
        if self.output is not None:
            out["output"] = self.output
        return out

    def to_toml(self):
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        obj = dict(obj)
        tol = obj.pop("tol", {})
        return cls(tol=Tolerance(**tol), **obj)

    @classmethod
    def from_toml(cls, text):
        return cls.from_dict(tomli.loads(text))

    @classmethod
    def load(cls, path):
        return cls.from_toml(Path(path).read_text())

    def save(self, path):
        Path(path).write_text(self.to_toml())

    def digest(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def trial_seed(master, cell, trial):
    return np.random.SeedSequence(master, spawn_key=(cell, trial))


def trial_rng(master, cell, trial):
    return np.random.Generator(np.random.PCG64(trial_seed(master, cell, trial)))


def make_family(kind, m, r=None, A=None):
    if kind == "perm":
        return MapFamily.all_permutations(m, A)
    if kind == "sign":
        return MapFamily.all_signs(m, A)
    if kind == "sel":
        return MapFamily.all_selections(r if r is not None else m, m, A)
    if kind == "selsign":
        return MapFamily.all_signed_selections(r if r is not None else m, m, A)
    raise InputError(f"unknown family kind {kind!r}")


def _check_caps(cell):
    kind = cell.get("family")
    lim = CAPS.get(kind, {})
    for key, cap in lim.items():
        if cell.get(key) is not None and cell[key] > cap:
            return f"{key}={cell[key]} above desk-scale cap {cap} for {kind}"
    if cell.get("n", 0) > CAPS_N:
        return f"n={cell['n']} above desk-scale cap {CAPS_N}"
    if cell.get("k") is not None and cell["k"] > CAPS_K:
        return f"k={cell['k']} above desk-scale cap {CAPS_K}"
    r, m = cell.get("r"), cell.get("m")
    if r is not None and m is not None and r > m:
        return f"r={r} exceeds m={m}"
    return None


def expected_fraction(cell):
    """Known outcome of a sweep cell from the known threshold results, or None when no statement applies.

    Sufficient conditions hold for generic sensing matrices; necessary ones
    hold for every sensing matrix.
    """
    kind, n, m = cell.get("family"), cell.get("n"), cell.get("m")
    r = cell.get("r") or m
    k, pm = cell.get("k"), bool(cell.get("sign_variant", False))
    if k is not None:
        if kind in ("perm", "sel") and r >= 2 * k:
            return 1.0
        if kind in ("sign", "selsign") and pm and r >= 2 * k:
            return 1.0
        return None
    if kind == "perm" and not pm:
        if m >= 2 * n:
            return 1.0
        if n >= 2 and m % 2 == 1:
            return 0.0
    if kind == "sel" and not pm:
        if r >= 2 * n:
            return 1.0
        if r < 2 * n - 1:
            return 0.0
    if kind == "sign" and pm:
        return 1.0 if m >= 2 * n - 1 else 0.0
    if kind == "selsign" and pm and r >= 2 * n:
        return 1.0
    return None


# one trial per experiment; each returns a flat dict of recorded fields


def _hsp_trial(cell, rng, tol, max_pairs):
    n, m = cell["n"], cell["m"]
    A = rng.standard_normal((m, n))
    fam = make_family(cell["family"], m, cell.get("r"))
    pm = bool(cell.get("sign_variant", False))
    if cell.get("k") is not None:
        cert = hsp_ksparse(A, cell["k"], fam, pm, tol)
    else:
        cert = hsp_set(Subspace.full(n), fam.compose(A), pm, tol)
    return {"success": cert.holds, "witness_valid": cert.verify(), "pairs_checked": cert.pairs_checked}


def _noise_trial(cell, rng, tol, max_pairs):
    n, m = cell["n"], cell["m"]
    fam = make_family(cell["family"], m, cell.get("r"))
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    tau = fam.member(int(rng.integers(fam.cardinality())))
    y = tau.apply(A @ x)
    direction = rng.standard_normal(y.shape[0])
    direction /= np.linalg.norm(direction)
    clean = stability_report(y, np.zeros_like(y), A, fam, tol, x_star=x)
    frac = float(cell.get("noise_fraction", 0.5))
    scale = clean.noise_threshold if np.isfinite(clean.noise_threshold) else 1.0
    eps = frac * scale * direction
    rep = stability_report(y, eps, A, fam, tol, x_star=x)
    ok = bool(rep.condition_holds and rep.tau_in_fitting and rep.equality_holds and rep.bound_holds)
    return {
        "success": ok,
        "margin": rep.margin,
        "tau_in_fitting": rep.tau_in_fitting,
        "equality_residual": rep.equality_residual,
        "eps_norm": float(np.linalg.norm(eps)),
        "bound_holds": rep.bound_holds,
    }


def _witness_trial(cell, rng, tol, max_pairs):
    fam = make_family(cell["family"], cell["m"], cell.get("r"))
    d = cell["d"]
    pairs = fam.pair_orbits()
    idx = range(len(pairs))
    if max_pairs and len(pairs) > max_pairs:
        idx = sorted(rng.choice(len(pairs), size=max_pairs, replace=False).tolist())
    certified = skipped = attempted = 0
    first_bad = None
    for k in idx:
        t1, t2 = pairs.pair(k)
        seed = int(rng.integers(2**63))
        try:
            w = construct_witness(t1, t2, d, tol, rng_seed=seed)
        except PreconditionError:
            skipped += 1
            continue
        except HomsenseError:
            attempted += 1
            first_bad = first_bad or f"{t1.describe()}|{t2.describe()}"
            continue
        attempted += 1
        if w.recheck(t1, t2, tol) and hsp_pair(w.V_star, t1, t2, tol=tol).holds:
            certified += 1
        else:
            first_bad = first_bad or f"{t1.describe()}|{t2.describe()}"
    return {
        "success": certified == attempted,
        "certified": certified,
        "attempted": attempted,
        "skipped_precondition": skipped,
        "first_bad_pair": first_bad or "",
    }


def _audit_trial(cell, rng, tol, max_pairs):
    fam = make_family(cell["family"], cell["m"], cell.get("r"))
    pm = bool(cell.get("sign_variant", False))
    audit = audit_dimension_bound(fam, cell["n"], pm, True, tol=tol)
    return {
        "success": audit.all_within and audit.all_agree,
        "within": f"{audit.within_bound}/{audit.pairs_covered}",
        "agree": f"{audit.agree}/{audit.pairs_covered}",
        "max_dim_U": audit.max_dim_U,
        "bound": audit.bound,
    }


TRIALS = {
    "hsp_sweep": _hsp_trial,
    "noise_sweep": _noise_trial,
    "witness_sweep": _witness_trial,
    "dimU_audit": _audit_trial,
}


def _run_one(args):
    experiment, cell_index, cell, trial, master, tol, max_pairs = args
    rng = trial_rng(master, cell_index, trial)
    start = time.perf_counter()
    try:
        rec = TRIALS[experiment](cell, rng, tol, max_pairs)
        err = ""
    except FamilySizeError as exc:
        rec, err = {"success": None}, f"skipped: {exc}"
    except HomsenseError as exc:
        rec, err = {"success": False}, f"{type(exc).__name__}: {exc}"
    rec.update({
        "cell": cell_index,
        "trial": trial,
        "seed": f"{master}:{cell_index}:{trial}",
        "error": err,
        "wall_time": time.perf_counter() - start,
    })
    return rec


@dataclass
class CellResult:
    index: int
    params: dict
    successes: int
    trials: int
    wall_time: float
    first_failure_seed: str = None
    expected: float = None
    skipped: str = None

    @property
    def fraction(self):
        return Fraction(self.successes, self.trials) if self.trials else None

    @property
    def matches_expectation(self):
        if self.expected is None or self.fraction is None:
            return None
        return float(self.fraction) == self.expected

    def to_json(self, with_timing=True):
        out = {
            "cell": self.index,
            "params": self.params,
            "success": f"{self.successes}/{self.trials}",
            "fraction": None if self.fraction is None else float(self.fraction),
            "first_failure_seed": self.first_failure_seed,
            "expected": self.expected,
            "matches_expectation": self.matches_expectation,
            "skipped": self.skipped,
        }
        if with_timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass
class SweepReport:
    experiment: str
    cells: list
    rows: list
    metadata: dict

    def summary(self, with_timing=True):
        meta = dict(self.metadata)
        if not with_timing:
            meta.pop("timestamp", None)
        return {"metadata": meta, "cells": [c.to_json(with_timing) for c in self.cells]}

    def canonical(self):
        """Report contents without timing fields, for reproducibility comparisons."""
        rows = [{k: v for k, v in r.items() if k != "wall_time"} for r in self.rows]
        return json.dumps({"summary": self.summary(False), "rows": rows}, sort_keys=True, default=str)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        keys = ["cell", "trial", "seed", "success", "error", "wall_time"]
        extra = sorted({k for r in self.rows for k in r} - set(keys))
        params = sorted({k for c in self.cells for k in c.params})
        with open(out / f"{self.experiment}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys[:3] + params + keys[3:] + extra)
            w.writeheader()
            by_cell = {c.index: c.params for c in self.cells}
            for r in self.rows:
                w.writerow({**{p: by_cell[r["cell"]].get(p, "") for p in params}, **r})
        (out / f"{self.experiment}.json").write_text(json.dumps(self.summary(), indent=2, default=str))
        return out


def _aggregate(cfg, cells, rows):
    results = []
    for i, cell in enumerate(cells):
        mine = [r for r in rows if r["cell"] == i]
        reason = _check_caps(cell)
        skipped = reason or next((r["error"] for r in mine if r["success"] is None), None)
        counted = [r for r in mine if r["success"] is not None]
        fail = next((r["seed"] for r in counted if not r["success"]), None)
        results.append(CellResult(
            index=i,
            params=cell,
            successes=sum(1 for r in counted if r["success"]),
            trials=len(counted),
            wall_time=sum(r["wall_time"] for r in mine),
            first_failure_seed=fail,
            expected=expected_fraction(cell) if cfg.experiment == "hsp_sweep" else 1.0,
            skipped=skipped,
        ))
    return results


def run_experiment(cfg, workers=None):
    workers = cfg.workers if workers is None else workers
    cells = cfg.cells()
    n_trials = 1 if cfg.experiment == "dimU_audit" else cfg.trials
    jobs = []
    for i, cell in enumerate(cells):
        if _check_caps(cell):
            continue
        for t in range(n_trials):
            jobs.append((cfg.experiment, i, cell, t, cfg.seed, cfg.tol, cfg.max_pairs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_run_one(j) for j in jobs]
    rows.sort(key=lambda r: (r["cell"], r["trial"]))
    meta = {
        "package_version": __version__,
        "config_hash": cfg.digest(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "generator": GENERATOR,
        "numpy_version": np.__version__,
        "seed": cfg.seed,
        "experiment": cfg.experiment,
    }
    report = SweepReport(cfg.experiment, _aggregate(cfg, cells, rows), rows, meta)
    if cfg.output:
        report.write(cfg.output)
    return report


def _runner(name):
    def run(cfg, workers=None):
        if cfg.experiment != name:
            cfg = dataclasses.replace(cfg, experiment=name)
        return run_experiment(cfg, workers)

    run.__name__ = f"run_{name}"
    return run


run_hsp_sweep = _runner("hsp_sweep")
run_dimU_audit = _runner("dimU_audit")
run_witness_sweep = _runner("witness_sweep")
run_noise_sweep = _runner("noise_sweep")


def replay_trial(cfg, cell, trial):
    """Re-run one (cell, trial) exactly as the sweep did."""
    cells = cfg.cells()
    if not 0 <= cell < len(cells):
        raise InputError(f"cell index {cell} out of range")
    return _run_one((cfg.experiment, cell, cells[cell], trial, cfg.seed, cfg.tol, cfg.max_pairs))
