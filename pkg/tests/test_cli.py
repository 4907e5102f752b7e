import csv
import json
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dynuip.cli import main, parse_config_text
from dynuip.errors import ConfigError

from conftest import write_quotes

SVG = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_cfg(path, **items):
    path.write_text("".join(f"{k} = {v}\n" for k, v in items.items()))
    return path


@pytest.fixture
def fama_exact_csv(tmp_path):
    # f_t = s_{t+k}: the k-period change equals the premium with no noise
    s = np.cumsum(np.random.default_rng(3).normal(0, 0.01, 405))
    return write_quotes(tmp_path / "fama.csv", s[:400], s[5:405])


def test_estimate_writes_reports(hh_null_csv, tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "--data", str(hh_null_csv), "--k", "5", "--out-dir", str(out)]) == 0
    rows = read_csv(out / "report.csv")
    assert [r["method"] for r in rows] == ["OLS", "OLS-HH", "OLS-NW", "OLS-Andrews", "OLS-KV", "OLS-EWC",
                                                    "DynReg", "RDynReg"]
    assert len({r["beta"] for r in rows[:6]}) == 1
    dyn = rows[6]
    assert dyn["lr_df"] != "" and float(dyn["lr_lambda"]) >= 0
    assert "RDynReg filter truncation P = 50" in (out / "report.txt").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "estimate" and len(manifest["inputs"]) == 1


def test_estimate_method_subset(hh_null_csv, tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "--data", str(hh_null_csv), "--k", "5", "--methods", "ols,rdynreg",
                 "--out-dir", str(out)]) == 0
    assert [r["method"] for r in read_csv(out / "report.csv")] == ["OLS", "RDynReg"]


def test_estimate_fama_exact(fama_exact_csv, tmp_path):
    out = tmp_path / "est"
    assert main(["estimate", "--data", str(fama_exact_csv), "--design", "fama", "--k", "5",
                 "--methods", "ols,nw", "--out-dir", str(out)]) == 0
    rows = read_csv(out / "report.csv")
    assert float(rows[0]["beta"]) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("argv, code", [
    (["estimate", "--data", "missing.csv"], 3),
    (["estimate"], 2),
    (["bogus"], 2),
    (["factorize", "10", "5"], 4),
    (["factorize", "0", "5"], 2),
    (["simulate", "--config", "nope.cfg"], 2),
])
def test_exit_codes(argv, code, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == code


def test_bad_data_row(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,spot,forward\n1990-01-05,1.0,1.0\n1990-01-12,abc,1.0\n")
    assert main(["estimate", "--data", str(bad), "--out-dir", str(tmp_path / "o")]) == 3


def test_unknown_method(hh_null_csv, tmp_path):
    assert main(["estimate", "--data", str(hh_null_csv), "--methods", "gmm",
                 "--out-dir", str(tmp_path / "o")]) == 2


def test_factorize_prints(capsys):
    assert main(["factorize"]) == 0
    text = capsys.readouterr().out
    assert "theta = 1, 0.836" in text and "lag cap reached" in text
    assert main(["factorize", "5", "5"]) == 0
    assert "white noise" in capsys.readouterr().out


def test_config_parsing():
    cfg = parse_config_text("# comment\nT = 300  # trailing\n\nreps=4\nlabel = AUD\n")
    assert cfg == {"T": 300, "reps": 4, "label": "AUD"}
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("Tee = 3\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("T = 3\nT = 4\n")
    with pytest.raises(ConfigError, match="invalid value"):
        parse_config_text("T = many\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("T 3\n")


def test_simulate_rejects_unknown_key(tmp_path):
    cfg = write_cfg(tmp_path / "bad.cfg", T=250, replications=5)
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2


def test_simulate_small_run(tmp_path):
    cfg = write_cfg(tmp_path / "sim.cfg", T=250, reps=10, label="AUD")
    out = tmp_path / "sim"
    t0 = time.perf_counter()
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert time.perf_counter() - t0 < 5
    rows = read_csv(out / "report.csv")
    sizes = {r["method"] for r in rows if r["metric"] == "size_5pct"}
    assert len(sizes) == 8
    power = [r for r in rows if r["metric"].startswith("power@") and r["method"] == "RDynReg"]
    assert len(power) == 7
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["T"] == 250 and len(summary["alternatives"]) == 7

    root = ET.parse(out / "power_AUD.svg").getroot()
    lines = root.findall(f"{SVG}polyline")
    assert sorted(p.get("data-label") for p in lines) == ["OLS", "OLS-KV", "OLS-NW", "RDynReg"]
    assert all(len(p.get("points").split()) == 7 for p in lines)
    texts = {t.get("class"): t.text for t in root.iter(f"{SVG}text") if t.get("class")}
    assert texts == {"xlabel": "beta", "ylabel": "rejection rate"}


def test_simulate_is_reproducible_and_replayable(tmp_path):
    cfg = write_cfg(tmp_path / "sim.cfg", T=200, reps=4, methods="ols,nw,kv,rdynreg", label="x")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out-dir", str(b)]) == 0
    assert main(["replay", str(a / "manifest.json"), "--out-dir", str(c)]) == 0
    for name in ("report.csv", "power_x.svg", "summary.json", "report.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_seed_override_changes_output(tmp_path):
    cfg = write_cfg(tmp_path / "sim.cfg", T=200, reps=3, methods="ols", power="no")
    main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--seed", "7", "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a/report.csv").read_text() != (tmp_path / "b/report.csv").read_text()
    assert json.loads((tmp_path / "b/manifest.json").read_text())["seed"] == 7
    assert not list((tmp_path / "a").glob("*.svg"))


def test_replay_missing_manifest(tmp_path):
    assert main(["replay", str(tmp_path / "none.json")]) == 2


def test_roll_single_window(hh_null_csv, tmp_path):
    out = tmp_path / "roll"
    n = 900 - 10
    assert main(["roll", "--data", str(hh_null_csv), "--k", "5", "--window", str(n),
                 "--out-dir", str(out)]) == 0
    rows = read_csv(out / "report.csv")
    assert [r["method"] for r in rows] == ["OLS", "RDynReg"]
    root = ET.parse(out / "roll_OLS.svg").getroot()
    assert len(root.findall(f"{SVG}circle")) == 1
    assert len(root.findall(f"{SVG}polyline")) == 1


def test_roll_follows_break(tmp_path):
    rng = np.random.default_rng(21)
    T, k = 700, 1
    prem = rng.normal(0, 0.01, T)
    beta = np.where(np.arange(T) < 350, -1.0, 1.0)
    # s_{t+1} - s_t = beta_t (f_t - s_t) + small noise
    s = np.empty(T + k)
    s[0] = 0.0
    for t in range(T):
        s[t + 1] = s[t] + beta[t] * prem[t] + rng.normal(0, 0.001)
    path = write_quotes(tmp_path / "brk.csv", s[:T], s[:T] + prem)
    out = tmp_path / "roll"
    assert main(["roll", "--data", str(path), "--design", "fama", "--k", "1", "--window", "150",
                 "--step", "50", "--methods", "ols,nw", "--contract-days", "5",
                 "--out-dir", str(out)]) == 0
    rows = [r for r in read_csv(out / "report.csv") if r["method"] == "OLS-NW"]
    assert float(rows[0]["estimate"]) == pytest.approx(-1.0, abs=0.15)
    assert float(rows[-1]["estimate"]) == pytest.approx(1.0, abs=0.15)
    root = ET.parse(out / "roll_OLS-NW.svg").getroot()
    assert len(root.findall(f"{SVG}path")) == 2 and len(root.findall(f"{SVG}line[@class='null']")) == 1


def test_kv_table_command(tmp_path):
    out = tmp_path / "kv.csv"
    assert main(["kv-table", "--paths", "200", "--steps", "50", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("# kv fixed-b table version=1 seed=20240101 paths=200 steps=50")
