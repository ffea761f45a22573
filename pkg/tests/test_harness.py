import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from pof.channel import RssTrace, write_trace_csv
from pof.harness.cli import main
from pof.harness.experiments import trace_apen
from pof.simnet import AttackScenario, World, pair_traces
from pof.verify import PofParams

RATE = 20.0


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2), encoding="utf-8")
    return path


def trace(values, t0=0.0, vid="") -> RssTrace:
    return RssTrace(t0 + np.arange(len(values)) / RATE, values, RATE, vid)


def save(tmp: Path, name: str, values) -> str:
    p = tmp / f"{name}.csv"
    write_trace_csv(trace(values, vid=name), p)
    return p.name


def walk(seed, n=2100):
    return -80 + np.cumsum(np.random.default_rng(seed).normal(size=n))


SMALL_CFG = {
    "scenarios": [{"kind": "none", "candidate_distance": 12},
                  {"kind": "mitm-parallel", "variant": "B"}],
    "seeds": [4, 5, 6],
}


# simulate

def test_simulate_cardinality_and_rerun_identical(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", SMALL_CFG)
    code, out, _ = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "a")
    assert code == 0
    runs = sorted((tmp_path / "a" / "runs").glob("*_seed*.json"))
    assert len(runs) == 6
    rows = list(csv.DictReader(open(tmp_path / "a" / "aggregate.csv")))
    assert [(r["scenario"], r["seed"]) for r in rows] == [
        (k, s) for k in ("none", "mitm-parallel") for s in ("4", "5", "6")]
    assert "none,3,3,0,0,1.0" in out
    code, _, _ = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "b", "--workers", "2")
    assert code == 0
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for f in files_a:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_aggregate_csv_round_trip(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", SMALL_CFG)
    assert run(capsys, "simulate", "--config", cfg, "--out", tmp_path)[0] == 0
    rows = list(csv.DictReader(open(tmp_path / "aggregate.csv")))
    for r in rows:
        rep = json.loads((tmp_path / "runs" / f"{r['scenario']}_seed{r['seed']}.json").read_text())
        assert r["verdict"] == rep["verdict"]
        if rep["rhos"]:
            assert float(r["mean_rho"]) == float(np.mean(rep["rhos"]))
            assert int(r["passed_count"]) == rep["passed_count"]
        else:
            assert r["mean_rho"] == "" and r["passed_count"] == ""
    summary = list(csv.DictReader(open(tmp_path / "summary.csv")))
    for s in summary:
        mine = [r for r in rows if r["scenario"] == s["scenario"]]
        rate = sum(r["verdict"] == "accept" for r in mine) / len(mine)
        assert float(s["passing_rate"]) == rate and int(s["runs"]) == len(mine)


def test_missing_route_file_exit_2(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", {"world": {"path_file": "routes/missing.csv"}})
    code, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "o")
    assert code == 2
    assert str(tmp_path / "routes" / "missing.csv") in err


def test_config_errors_are_line_anchored(tmp_path, capsys):
    text = '{\n  "seeds": [1, 2],\n  "params": {\n    "N": "big"\n  }\n}\n'
    (tmp_path / "cfg.json").write_text(text)
    code, _, err = run(capsys, "simulate", "--config", tmp_path / "cfg.json")
    assert code == 2
    assert f"{tmp_path / 'cfg.json'}:4:" in err and "params/N" in err


def test_config_unknown_key_and_bad_json(tmp_path, capsys):
    (tmp_path / "a.json").write_text('{\n  "seeds": [1],\n  "colour": "red"\n}\n')
    code, _, err = run(capsys, "simulate", "--config", tmp_path / "a.json")
    assert code == 2 and "colour" in err
    (tmp_path / "b.json").write_text('{\n  "seeds": [1,\n}\n')
    code, _, err = run(capsys, "simulate", "--config", tmp_path / "b.json")
    assert code == 2 and "b.json:3:" in err


def test_config_scenario_error_points_at_entry(tmp_path, capsys):
    text = '{\n  "scenarios": [\n    {"kind": "none"},\n    {"kind": "following-afar", "follow_distance": 10}\n  ]\n}\n'
    (tmp_path / "c.json").write_text(text)
    code, _, err = run(capsys, "simulate", "--config", tmp_path / "c.json")
    assert code == 2 and "c.json:4:" in err and "d_ref" in err


# tune

def training_config(tmp: Path, legit: int, adversary: int, same=False) -> Path:
    doc = {"legit": [], "adversary": []}
    for i in range(legit):
        x = walk(i)
        noisy = x + 0.2 * np.random.default_rng(100 + i).normal(size=len(x))
        doc["legit"].append({"verifier": save(tmp, f"lv{i}", x), "candidate": save(tmp, f"lc{i}", noisy)})
    if same:
        doc["adversary"] = list(doc["legit"])
    for i in range(adversary if not same else 0):
        x = walk(50 + i)
        anti = -x - 160 + 0.2 * np.random.default_rng(200 + i).normal(size=len(x))
        doc["adversary"].append({"verifier": save(tmp, f"av{i}", x), "candidate": save(tmp, f"ac{i}", anti)})
    return write_json(tmp / "train.json", {"training": doc, "tune": {"seed": 3}})


def test_tune_separable_pairs(tmp_path, capsys):
    cfg = training_config(tmp_path, 4, 4)
    code, out, err = run(capsys, "tune", "--config", cfg, "--out", tmp_path / "t")
    assert code == 0, err
    tuned = json.loads((tmp_path / "t" / "tuned.json").read_text())
    report = json.loads((tmp_path / "t" / "tuning_report.json").read_text())
    assert tuned["eer"] == 0.0
    assert report["heldout_F_C"] == 1.0 and report["heldout_F_M"] == 0.0
    assert report["train_pairs"] == {"legit": 1, "adversary": 1}
    assert report["test_pairs"] == {"legit": 3, "adversary": 3}
    assert "held-out F_C=1.0000 F_M=0.0000" in out


def test_tune_single_pair_warns(tmp_path, capsys):
    cfg = training_config(tmp_path, 1, 1)
    code, _, err = run(capsys, "tune", "--config", cfg, "--out", tmp_path / "t")
    assert code == 0
    assert "warning: only 1 legit pair" in err and "warning: only 1 adversary pair" in err


def test_tune_inseparable_exit_3(tmp_path, capsys):
    cfg = training_config(tmp_path, 3, 0, same=True)
    code, _, err = run(capsys, "tune", "--config", cfg, "--out", tmp_path / "t")
    assert code == 3
    assert "f_C > 0.5 and f_M < 0.5" in err


def test_tune_missing_training_file(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", {"training": {
        "legit": [{"verifier": "nope_v.csv", "candidate": "nope_c.csv"}],
        "adversary": [{"verifier": "nope_v.csv", "candidate": "nope_c.csv"}]}})
    code, _, err = run(capsys, "tune", "--config", cfg)
    assert code == 2 and "nope_v.csv" in err


# sweeps

def read_sweep(path: Path):
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["x", "mean", "std", "n"]
    return [(float(r["x"]), float(r["mean"]), float(r["std"]), int(r["n"])) for r in rows]


@pytest.mark.slow
def test_distance_sweep_decreasing_and_fit(tmp_path, capsys):
    code, _, err = run(capsys, "sweep", "distance", "--grid", "10:110:10", "--runs", "40",
                       "--out", tmp_path / "d.csv")
    assert code == 0
    rows = read_sweep(tmp_path / "d.csv")
    assert [r[0] for r in rows] == [float(d) for d in range(10, 111, 10)]
    means = [r[1] for r in rows]
    assert all(a > b for a, b in zip(means, means[1:]))
    fitted = float(err.split("fitted d_corr=")[1].split()[0])
    assert abs(fitted - 53.35) / 53.35 <= 0.15


def test_delta_t_sweep(tmp_path, capsys):
    code, _, _ = run(capsys, "sweep", "delta-t", "--grid", "0:5:1", "--runs", "20", "--trace-level",
                     "--out", tmp_path / "dt.csv")
    assert code == 0
    rows = read_sweep(tmp_path / "dt.csv")
    rate = {x: m for x, m, _, _ in rows}
    assert rate[0.0] == 1.0
    assert all(rate[x] == 0.0 for x in (3.0, 4.0, 5.0))
    assert all(n == 20 for *_, n in rows)


@pytest.mark.slow
def test_k_sweep_with_tuned_parameters(tmp_path, capsys):
    assert run(capsys, "tune", "--out", tmp_path / "t")[0] == 0
    tuned = tmp_path / "t" / "tuned.json"
    curves = {}
    for name, sc in (("legit", '{"kind": "none", "candidate_distance": 11}'),
                     ("remote", '{"kind": "remote", "pre_record_lead": 60}')):
        code, _, _ = run(capsys, "sweep", "K", "--grid", "1:20:1", "--runs", "50", "--params", tuned,
                         "--scenario", sc, "--out", tmp_path / f"{name}.csv")
        assert code == 0
        curves[name] = [m for _, m, _, _ in read_sweep(tmp_path / f"{name}.csv")]
    fc, fm = curves["legit"], curves["remote"]
    assert all(a <= b for a, b in zip(fc, fc[1:])), fc
    assert all(a >= b for a, b in zip(fm, fm[1:])), fm
    assert fc[-1] >= 0.98 and fm[-1] == 0.0


def test_sweep_grid_parsing_and_bad_kind(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "time-offset", "--grid", "0,60", "--runs", "2")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "mean", "std", "n"] and [r[0] for r in rows[1:]] == ["0.0", "60.0"]
    assert float(rows[1][1]) > float(rows[2][1])
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "speed", "--grid", "1"])
    assert exc.value.code == 2


# verify-trace

def sim_trace():
    return pair_traces(World(), AttackScenario(), 0, PofParams())[0]


def test_verify_trace_copy_accepts(tmp_path, capsys):
    tv = sim_trace()
    write_trace_csv(tv, tmp_path / "v.csv")
    write_trace_csv(tv, tmp_path / "c.csv")
    code, out, _ = run(capsys, "verify-trace", tmp_path / "v.csv", tmp_path / "c.csv")
    assert code == 0
    res = json.loads(out)
    assert res["verdict"] == "accept" and res["passed_count"] == 20
    assert np.allclose(res["rhos"], 1.0, atol=1e-12)


def test_verify_trace_shuffled_rejects(tmp_path, capsys):
    tv = sim_trace()
    shuffled = RssTrace(tv.times, np.random.default_rng(0).permutation(tv.rss), tv.rate, "C")
    write_trace_csv(tv, tmp_path / "v.csv")
    write_trace_csv(shuffled, tmp_path / "c.csv")
    code, out, _ = run(capsys, "verify-trace", tmp_path / "v.csv", tmp_path / "c.csv")
    assert code == 0
    res = json.loads(out)
    assert res["verdict"] == "reject" and res["passed_count"] == 0


def test_verify_trace_short_names_required_count(tmp_path, capsys):
    x = walk(0, 4000)
    save(tmp_path, "v", x)
    save(tmp_path, "c", x)
    code, _, err = run(capsys, "verify-trace", tmp_path / "v.csv", tmp_path / "c.csv")
    assert code == 4 and "4200" in err


def test_verify_trace_parse_error_names_row(tmp_path, capsys):
    (tmp_path / "v.csv").write_text("t_s,rss_db\n0.0,-80\n0.05,oops\n")
    write_json(tmp_path / "v.json", {"rate_hz": RATE})
    save(tmp_path, "c", walk(0, 10))
    code, _, err = run(capsys, "verify-trace", tmp_path / "v.csv", tmp_path / "c.csv")
    assert code == 2 and "v.csv:3" in err


def test_verify_trace_with_params_file(tmp_path, capsys):
    tv = sim_trace()
    write_trace_csv(tv, tmp_path / "v.csv")
    write_trace_csv(tv, tmp_path / "c.csv")
    p = write_json(tmp_path / "p.json", {"tau": 0.9, "K": 5, "alpha": 1.0, "eer": 0.0})
    code, out, _ = run(capsys, "verify-trace", tmp_path / "v.csv", tmp_path / "c.csv", "--params", p)
    assert code == 0 and len(json.loads(out)["rhos"]) == 5


# apen

def test_apen_constant_is_zero(tmp_path, capsys):
    save(tmp_path, "k", np.full(300, -70.0))
    code, out, _ = run(capsys, "apen", tmp_path / "k.csv")
    assert code == 0 and float(out) == 0.0


def test_apen_noise_above_constant(tmp_path, capsys):
    save(tmp_path, "n", np.random.default_rng(0).normal(size=500))
    code, out, _ = run(capsys, "apen", tmp_path / "n.csv", "--smooth", "1")
    assert code == 0 and float(out) > 0.0
    code, out2, _ = run(capsys, "apen", tmp_path / "n.csv")
    assert code == 0 and 0.0 < float(out2)


def test_apen_short_trace_errors(tmp_path, capsys):
    save(tmp_path, "s", [1.0, 2.0, 3.0])
    code, _, err = run(capsys, "apen", tmp_path / "s.csv", "--smooth", "1")
    assert code == 4 and "at least" in err


@pytest.mark.slow
def test_apen_simulated_drive_band():
    # smoothed ApEn of 1000-sample verifier traces over 100 seeds; reported, not pinned
    p = PofParams(K=4)
    vals = np.array([trace_apen(pair_traces(World(), AttackScenario(), s, p)[0]) for s in range(100)])
    lo, med, hi = np.percentile(vals, [2.5, 50, 97.5])
    print(f"\nsimulated smoothed ApEn over 100 seeds: median {med:.4f}, 95% band [{lo:.4f}, {hi:.4f}]")
    assert np.all(np.isfinite(vals)) and np.all(vals > 0.0)
