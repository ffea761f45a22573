"""Regenerate tests/frozen.json from the reference oracles.

Run from the repository root: python3 tests/make_frozen.py
"""

import json
import statistics
from pathlib import Path

import numpy as np

import oracles

HERE = Path(__file__).parent


def training_sets(n_sets=20):
    """Randomised overlapping correlation clouds, reproducible from the set index."""
    out = []
    for i in range(n_sets):
        rng = np.random.default_rng(1000 + i)
        mc, mm = rng.uniform(0.45, 0.75), rng.uniform(0.1, 0.4)
        n = int(rng.integers(50, 400))
        c = np.clip(rng.normal(mc, rng.uniform(0.08, 0.25), n), -1, 1)
        m = np.clip(rng.normal(mm, rng.uniform(0.08, 0.25), n), -1, 1)
        out.append((c.round(6).tolist(), m.round(6).tolist()))
    return out


def main():
    frozen = {}
    vals = []
    for seed in range(100):
        x = np.random.default_rng(seed).uniform(0, 1, 1000).tolist()
        vals.append(oracles.approx_entropy(x, 2, 0.2 * statistics.pstdev(x)))
    frozen["apen_uniform_1000"] = {"mean": statistics.fmean(vals), "sd": statistics.stdev(vals),
                                   "min": min(vals), "max": max(vals)}
    alt = [1.0, 2.0] * 100
    frozen["apen_alternating_200"] = oracles.approx_entropy(alt, 2, 0.2 * statistics.pstdev(alt))

    sets = training_sets()
    frozen["tune_sets"] = [{"train_C": c, "train_M": m, "K_max": 40,
                            "result": oracles.tune_grid(c, m, 40)} for c, m in sets]
    rng = np.random.default_rng(7)
    c = np.clip(rng.normal(0.6, 0.1, 1000), -1, 1).round(6).tolist()
    m = np.clip(rng.normal(0.25, 0.1, 1000), -1, 1).round(6).tolist()
    frozen["tune_gaussian_clouds"] = {"train_C": c, "train_M": m, "K_max": 40,
                                      "result": oracles.tune_grid(c, m, 40)}
    (HERE / "frozen.json").write_text(json.dumps(frozen) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
