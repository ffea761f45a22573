"""Experiment drivers behind the CLI: batch simulation, parameter tuning,
parameter sweeps and offline verification of recorded traces."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, replace
from multiprocessing import Pool
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from ..channel import RssTrace, read_trace_csv
from ..sigproc import align, approx_entropy, moving_average, subset_count
from ..simnet import (AttackScenario, SimReport, distance_traces, pair_traces,
                      run_simulation)
from ..verify import PofDecision, PofParams, correlation_tests, tune, verify_pair
from .config import ExperimentConfig, TuneSpec

SWEEP_KINDS = ("distance", "time-offset", "theta", "delta-t", "K")


class SmallSampleWarning(UserWarning):
    """Too few labelled pairs for a separate train/test split."""


def _run_one(job) -> SimReport:
    world, scenario, seed, scfg, latency = job
    return run_simulation(world, scenario, seed, scfg, latency)


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with Pool(workers) as pool:
            return list(pool.imap(fn, jobs))
    return [fn(j) for j in jobs]


def simulate(cfg: ExperimentConfig, params: PofParams | None = None, workers: int = 1) -> list[SimReport]:
    """Every scenario under every seed, ordered by (scenario, seed)."""
    params = params or cfg.params
    jobs = [(cfg.world, sc, seed, cfg.session_config(sc, params), cfg.latency)
            for sc in cfg.scenarios for seed in cfg.seeds]
    return _map(_run_one, jobs, workers)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def aggregate_csv(reports: list[SimReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "seed", "verdict", "mean_rho", "passed_count"])
    for r in reports:
        label = r.scenario.get("name") or r.scenario["kind"]
        w.writerow([label, r.seed, r.verdict, _fmt(r.mean_rho),
                    "" if r.passed_count is None else r.passed_count])
    return buf.getvalue()


def write_simulation(reports: list[SimReport], out: Path, transcripts: bool = True) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    runs = out / "runs"
    runs.mkdir(exist_ok=True)
    written = []
    for r in reports:
        stem = f"{r.scenario.get('name') or r.scenario['kind']}_seed{r.seed}"
        p = runs / f"{stem}.json"
        p.write_text(r.to_json(), encoding="utf-8")
        written.append(p)
        if transcripts:
            t = runs / f"{stem}.transcript.jsonl"
            t.write_text(r.transcript_jsonl(), encoding="utf-8")
            written.append(t)
    agg = out / "aggregate.csv"
    agg.write_text(aggregate_csv(reports), encoding="utf-8")
    written.append(agg)
    return written


# tuning

@dataclass
class LabelledPair:
    label: str  # legit | adversary
    tv: RssTrace
    tc: RssTrace
    name: str


def simulated_pairs(cfg: ExperimentConfig, n_subsets: int) -> list[LabelledPair]:
    plan = cfg.tune or TuneSpec()
    p = replace(cfg.params, K=n_subsets)
    legit = AttackScenario("none", candidate_distance=plan.legit_distance)
    pairs = []
    for i in range(plan.pairs):
        s = plan.seed * 1_000_003 + i
        pairs.append(LabelledPair("legit", *pair_traces(cfg.world, legit, s, p), f"legit-{i}"))
    for i in range(plan.pairs):
        s = plan.seed * 1_000_003 + 500_000 + i
        pairs.append(LabelledPair("adversary", *pair_traces(cfg.world, plan.adversary, s, p),
                                  f"adversary-{i}"))
    return pairs


def file_pairs(cfg: ExperimentConfig) -> list[LabelledPair]:
    out = []
    for label in ("legit", "adversary"):
        for v, c in cfg.training[label]:
            out.append(LabelledPair(label, read_trace_csv(v), read_trace_csv(c), f"{v.name}|{c.name}"))
    return out


def split_pairs(pairs: list[LabelledPair], train_fraction: float, seed: int):
    """Seeded per-class split; a class with a single pair is reused for both sides."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in ("legit", "adversary"):
        group = [p for p in pairs if p.label == label]
        if len(group) < 2:
            warnings.warn(f"only {len(group)} {label} pair(s): training and held-out sets coincide",
                          SmallSampleWarning, stacklevel=2)
            train += group
            test += group
            continue
        order = rng.permutation(len(group))
        k = min(max(1, int(round(train_fraction * len(group)))), len(group) - 1)
        train += [group[i] for i in order[:k]]
        test += [group[i] for i in order[k:]]
    return train, test


def run_tuning(cfg: ExperimentConfig, K_max: int | None = None, strategy: str | None = None):
    """Tune on 30% of the labelled pairs; report held-out passing rates."""
    plan = cfg.tune or TuneSpec()
    K_max = K_max or plan.K_max
    strategy = strategy or plan.strategy
    N = cfg.params.N
    pairs = file_pairs(cfg) if cfg.training else simulated_pairs(cfg, K_max)
    aligned = {}
    for p in pairs:
        aligned[p.name] = align(p.tv, p.tc)
    avail = min(subset_count(len(a), N) for a in aligned.values())
    if avail < 1:
        raise ValueError(f"every pair needs at least N={N} aligned samples")
    K_max = min(K_max, avail)
    train, test = split_pairs(pairs, plan.train_fraction, plan.seed)
    rho = {"legit": [], "adversary": []}
    for p in train:
        a = aligned[p.name]
        rho[p.label] += correlation_tests(a, replace(cfg.params, K=subset_count(len(a), N)))
    res = tune(rho["legit"], rho["adversary"], K_max=K_max, strategy=strategy,
               d_ref=cfg.world.d_ref, d_corr=cfg.world.shadow.d_corr)
    params = res.params(N=N, M=cfg.params.M)
    held = {"legit": [], "adversary": []}
    for p in test:
        held[p.label].append(verify_pair(aligned[p.name], params).accept)
    report = {
        "tuned": json.loads(res.to_json()),
        "model_F_C": res.F_C, "model_F_M": res.F_M,
        "heldout_F_C": float(np.mean(held["legit"])),
        "heldout_F_M": float(np.mean(held["adversary"])),
        "train_pairs": {k: sum(p.label == k for p in train) for k in held},
        "test_pairs": {k: len(v) for k, v in held.items()},
        "train_rhos": {k: len(v) for k, v in rho.items()},
        "K_max": K_max, "strategy": strategy,
    }
    return res, report


# sweeps

def _runs_seed(seed: int, r: int) -> int:
    return seed * 1_000_003 + r


def fit_dcorr(distances, means) -> float:
    """Least-squares fit of exp(-d / d_corr) to a correlation curve."""
    (dc,), _ = curve_fit(lambda d, dc: np.exp(-d / dc), np.asarray(distances, float),
                         np.asarray(means, float), p0=[50.0], bounds=(1e-6, np.inf))
    return float(dc)


def _stats(x: float, values) -> tuple:
    v = np.asarray(values, dtype=float)
    return (x, float(v.mean()), float(v.std()), int(v.size))


def sweep(kind: str, grid, cfg: ExperimentConfig, runs: int = 20, seed: int = 0,
          scenario: AttackScenario | None = None, protocol: bool = True) -> list[tuple]:
    """Rows ``(x, mean, std, n)``.

    distance: per-subset correlation of a candidate x meters behind.
    time-offset: correlation with the same road recorded x seconds earlier.
    theta: passing rate of the partially-following adversary.
    delta-t: passing rate of the candidate's set collected x seconds before
    the verifier's window and relabelled into it.
    K: passing rate of ``scenario`` (default: legitimate) using K tests.
    """
    if kind not in SWEEP_KINDS:
        raise ValueError(f"unknown sweep kind {kind!r}; choose from {', '.join(SWEEP_KINDS)}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    world, params = cfg.world, cfg.params
    rows = []
    if kind == "distance":
        vals = [[] for _ in grid]
        for r in range(runs):
            tv, tcs = distance_traces(world, grid, _runs_seed(seed, r), params)
            for v, tc in zip(vals, tcs):
                v += correlation_tests(align(tv, tc), params)
        rows = [_stats(float(x), v) for x, v in zip(grid, vals)]
    elif kind == "time-offset":
        for x in grid:
            sc = AttackScenario("remote", pre_record_lead=float(x))
            vals = []
            for r in range(runs):
                tv, tc = pair_traces(world, sc, _runs_seed(seed, r), params)
                vals += correlation_tests(align(tv, tc), params)
            rows.append(_stats(float(x), vals))
    elif kind == "theta":
        for x in grid:
            sc = AttackScenario("partially-following", theta=float(x),
                                **({"follow_distance": scenario.follow_distance} if scenario else {}))
            rows.append(_stats(float(x), [_passes(cfg, sc, _runs_seed(seed, r), params, protocol)
                                          for r in range(runs)]))
    elif kind == "delta-t":
        for x in grid:
            sc = AttackScenario("mitm-delayed", variant="B", shift=float(x))
            rows.append(_stats(float(x), [_passes(cfg, sc, _runs_seed(seed, r), params, False)
                                          for r in range(runs)]))
    else:
        sc = scenario or AttackScenario("none")
        Ks = [int(k) for k in grid]
        longest = replace(params, K=max(Ks))
        outcome = {k: [] for k in Ks}
        for r in range(runs):
            tv, tc = pair_traces(world, sc, _runs_seed(seed, r), longest)
            pair = align(tv, tc)
            for k in Ks:
                outcome[k].append(float(verify_pair(pair, replace(params, K=k)).accept))
        rows = [_stats(float(k), outcome[k]) for k in Ks]
    return rows


def _passes(cfg, sc, s, params, protocol) -> float:
    if protocol:
        return float(run_simulation(cfg.world, sc, s, cfg.session_config(sc, params), cfg.latency).accepted)
    tv, tc = pair_traces(cfg.world, sc, s, params)
    return float(verify_pair(align(tv, tc), params).accept)


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "mean", "std", "n"])
    for x, m, s, n in rows:
        w.writerow([repr(x), repr(m), repr(s), n])
    return buf.getvalue()


# offline tools

def verify_traces(tv: RssTrace, tc: RssTrace, params: PofParams) -> PofDecision:
    return verify_pair(align(tv, tc), params)


def trace_apen(trace: RssTrace, m: int = 2, r_factor: float = 0.2, smooth: int = 20) -> float:
    x = moving_average(trace.rss, smooth) if smooth > 1 else np.asarray(trace.rss)
    sd = float(np.std(x))
    if sd == 0.0:
        return 0.0
    return approx_entropy(x, m, r_factor * sd)
