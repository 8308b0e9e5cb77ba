"""Benchmark harness: type-I / power grids over methods and settings.

A plan is a grid of (method, setting, hypothesis, d_z, lambda) cells;
each cell runs R independent replications (fresh dataset, one test) and
reports the rejection rate with its binomial standard error.  Seeds are
counter-based per (cell, replication), so results do not depend on how
replications are scheduled across workers.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import crt, engine, gan, stats, synth

CSV_HEADER = ["method", "setting", "hypothesis", "dz", "n", "lambda",
              "rate", "se", "runtime_s"]

METHODS = ("gcit", "crt")


class BenchCellError(RuntimeError):
    """More than 5% of a cell's replications failed."""


@dataclass(frozen=True)
class BenchPlan:
    methods: tuple = ("gcit",)
    settings: tuple = ("gaussian",)
    hypotheses: tuple = ("H0",)
    d_z_grid: tuple = (10,)
    n: int = 500
    replications: int = 100
    alpha: float = 0.05
    lambdas: tuple = (0.0,)
    statistic: str = "dcor"
    mi_band: Optional[tuple] = None     # applied to H1 cells only
    m: int = 500
    gan: gan.GanConfig = field(default_factory=gan.GanConfig)
    use_oracle_sampler: bool = False    # H0 diagnostic: true conditional law
    base_seed: int = 0
    workers: int = 1

    def validate(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods or not self.settings or not self.d_z_grid:
            raise ValueError("plan grids must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        for s in self.settings:
            if s not in synth.SETTINGS:
                raise ValueError(f"unknown setting {s!r}")
        for h in self.hypotheses:
            if h not in synth.HYPOTHESES:
                raise ValueError(f"unknown hypothesis {h!r}")
        if self.statistic not in stats.STAT_KINDS:
            raise ValueError(f"unknown statistic {self.statistic!r}")

    def cells(self):
        """Stable cell enumeration; index feeds the seed derivation."""
        out = []
        for method in self.methods:
            lams = self.lambdas if method == "gcit" else (0.0,)
            for setting in self.settings:
                for hypothesis in self.hypotheses:
                    for d_z in self.d_z_grid:
                        for lam in lams:
                            out.append(Cell(method, setting, hypothesis,
                                            int(d_z), float(lam)))
        return out


@dataclass(frozen=True)
class Cell:
    method: str
    setting: str
    hypothesis: str
    d_z: int
    lam: float


@dataclass
class BenchRow:
    method: str
    setting: str
    hypothesis: str
    d_z: int
    n: int
    lam: float
    rate: float
    se: float
    runtime_s: float
    replications: int
    failures: int


@dataclass
class BenchTable:
    rows: list

    def find(self, **kv):
        out = [r for r in self.rows
               if all(getattr(r, k) == v for k, v in kv.items())]
        if len(out) != 1:
            raise KeyError(f"{len(out)} rows match {kv}")
        return out[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r.method, r.setting, r.hypothesis, r.d_z, r.n,
                            r.lam, r.rate, r.se, f"{r.runtime_s:.3f}"])

    def to_json_summary(self):
        return json.dumps(
            {"rows": [r.__dict__ for r in self.rows]}, sort_keys=True)


def _replication(plan, cell, rep_index):
    """One end-to-end replication: data generation plus one test."""
    seed_data = int(np.random.SeedSequence(
        entropy=plan.base_seed,
        spawn_key=(_cell_key(plan, cell), rep_index, 0)).generate_state(1)[0])
    seed_test = int(np.random.SeedSequence(
        entropy=plan.base_seed,
        spawn_key=(_cell_key(plan, cell), rep_index, 1)).generate_state(1)[0])
    spec = synth.SynthSpec(setting=cell.setting, hypothesis=cell.hypothesis,
                           n=plan.n, d_z=cell.d_z, seed=seed_data)
    if cell.hypothesis == "H1" and plan.mi_band is not None:
        spec = replace(spec, mi_band=tuple(plan.mi_band))
        dataset, _ = synth.generate_mi_controlled(spec)
    else:
        dataset = synth.generate(spec)
    config = engine.TestConfig(
        statistic=plan.statistic, m=plan.m, alpha=plan.alpha,
        gan=replace(plan.gan, lam=cell.lam), seed=seed_test)
    if cell.method == "crt":
        result = crt.crt_test(dataset, config)
    elif plan.use_oracle_sampler:
        sampler = synth.OracleConditionalSampler(dataset)
        result = engine.gcit_test(
            dataset, config, sampler_factory=lambda x, z, c: sampler)
    else:
        result = engine.gcit_test(dataset, config)
    return bool(result.reject)


def _cell_key(plan, cell):
    return plan.cells().index(cell)


def _run_task(args):
    plan, cell, rep = args
    start = time.perf_counter()
    try:
        reject = _replication(plan, cell, rep)
        return cell, rep, reject, None, time.perf_counter() - start
    except Exception as exc:  # recorded per cell, re-raised above 5%
        return cell, rep, None, repr(exc), time.perf_counter() - start


def run_plan(plan):
    """Run every cell of the plan; deterministic given plan.base_seed."""
    plan.validate()
    tasks = [(plan, cell, rep)
             for cell in plan.cells()
             for rep in range(plan.replications)]
    workers = plan.workers or int(os.environ.get("CIGEN_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        outcomes = [_run_task(t) for t in tasks]

    rows = []
    for cell in plan.cells():
        cell_out = [o for o in outcomes if o[0] == cell]
        cell_out.sort(key=lambda o: o[1])  # merge in replication order
        rejects = [o[2] for o in cell_out if o[3] is None]
        failures = [o[3] for o in cell_out if o[3] is not None]
        runtimes = [o[4] for o in cell_out]
        if len(failures) / plan.replications >= 0.05:
            raise BenchCellError(
                f"cell {cell} failed {len(failures)}/{plan.replications} "
                f"replications; first failure: {failures[0]}")
        rate = float(np.mean(rejects)) if rejects else 0.0
        se = float(np.sqrt(rate * (1.0 - rate) / max(len(rejects), 1)))
        rows.append(BenchRow(
            method=cell.method, setting=cell.setting,
            hypothesis=cell.hypothesis, d_z=cell.d_z, n=plan.n,
            lam=cell.lam, rate=rate, se=se,
            runtime_s=float(np.mean(runtimes)),
            replications=len(rejects), failures=len(failures)))
    return BenchTable(rows=rows)


def lambda_sweep(plan, lambdas):
    """GCIT-only sweep pairing H0 and H1 rows for each lambda."""
    sweep = replace(plan, methods=("gcit",), hypotheses=("H0", "H1"),
                    lambdas=tuple(float(v) for v in lambdas))
    return run_plan(sweep)


def tv_lower_bound(x_generated, x_real, bins=100):
    """Histogram total-variation distance between two univariate samples.

    Shared equal-width bins span the pooled range; returns
    0.5 * sum |p_b - q_b| in [0, 1].  Identical samples give 0 and
    samples with disjoint supports give 1.
    """
    a = np.asarray(x_generated, dtype=np.float64).ravel()
    b = np.asarray(x_real, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        return 0.0
    edges = np.linspace(lo, hi, bins + 1)
    p, _ = np.histogram(a, bins=edges)
    q, _ = np.histogram(b, bins=edges)
    return float(0.5 * np.abs(p / a.size - q / b.size).sum())
