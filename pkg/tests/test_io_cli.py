import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvlsw import (
    AnalysisConfig,
    ConfigurationError,
    DomainError,
    ParameterError,
    ParseError,
    ResultTable,
    load_csv,
    log_return,
    scale_to_band,
)
from mvlsw.cli import main, manifest_path
from mvlsw.io import write_series_csv

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"
TRIVARIATE = CONFIGS / "trivariate.json"


def write(path, text):
    path.write_text(text)
    return path


# -- load_csv --------------------------------------------------------------------------

def test_load_csv_well_formed(tmp_path):
    f = write(tmp_path / "a.csv", "time,ch1,ch2\n0,1,5\n1,2,6\n2,3,7\n3,4,8\n")
    s = load_csv(f)
    np.testing.assert_array_equal(s.values, [[1, 2, 3, 4], [5, 6, 7, 8]])
    assert s.channel_names == ("ch1", "ch2") and s.sampling_rate == 1.0


def test_load_csv_rate_from_seconds(tmp_path):
    rows = "\n".join(f"{k / 100},{math.sin(k)}" for k in range(50))
    s = load_csv(write(tmp_path / "b.csv", "time,eeg\n" + rows + "\n"))
    assert s.sampling_rate == pytest.approx(100.0)
    assert load_csv(tmp_path / "b.csv", sampling_rate=250).sampling_rate == 250


@pytest.mark.parametrize("body,line,msg", [
    ("time,a,b\n0,1,2\n1,3\n", 3, "fields"),
    ("time,a\n0,1\n1,x\n", 3, "non-numeric"),
    ("time,a\n0,1\n1,2\n3,3\n", 4, "non-uniform"),
    ("t,a\n0,1\n", 1, "header"),
    ("time,a\n", 2, "no data"),
    ("time,a\n0,1\n1,nan\n", 3, "non-finite"),
])
def test_load_csv_errors(tmp_path, body, line, msg):
    with pytest.raises(ParseError, match=msg) as err:
        load_csv(write(tmp_path / "bad.csv", body))
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


# -- domain utilities -----------------------------------------------------------------

def test_scale_to_band():
    assert scale_to_band(50, 1) == (25, 50)
    assert scale_to_band(50, 4) == (3.125, 6.25)
    for j in range(1, 8):
        assert scale_to_band(37.0, j)[0] == scale_to_band(37.0, j + 1)[1]
    with pytest.raises(ParameterError):
        scale_to_band(0, 1)
    with pytest.raises(ParameterError):
        scale_to_band(50, 0)


def test_log_return():
    r = log_return([100.0, 100.0, 100.0 * math.e])
    assert r.mask[0] and r[1] == 0.0
    assert r[2] == pytest.approx(100.0)
    r2 = log_return([1.0, 1.5, 2.0, 3.0], n=2)
    assert r2.mask[:2].all()
    assert r2[2] == pytest.approx(100 * math.log(2) / 2)
    assert abs(r2[2] - 34.657) < 1e-3
    with pytest.raises(DomainError):
        log_return([1.0, 0.0, 2.0])
    with pytest.raises(DomainError):
        log_return([1.0, -3.0])
    with pytest.raises(ParameterError):
        log_return([1.0, 2.0], n=0)


# -- result tables -----------------------------------------------------------------------

finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, st.integers(1, 9), st.integers(1, 9), st.integers(1, 5),
                          st.integers(1, 5), st.one_of(st.none(), finite),
                          st.sampled_from(["windowed", "spectral", "partial"]),
                          st.one_of(st.none(), st.booleans())), max_size=20))
def test_result_table_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    ResultTable(rows).write_csv(path)
    assert ResultTable.read_csv(path).rows == rows


def test_result_table_format(tmp_path):
    t = ResultTable([(0.1, 1, 2, 1, 3, None, "windowed", True), (None, 1, 1, 1, 2, 0.5, "p-value", None)])
    t.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["time,j,jprime,p,q,value,kind,significant",
                     "0.1,1,2,1,3,,windowed,true", ",1,1,1,2,0.5,p-value,"]
    write(tmp_path / "bad.csv", "time,value\n")
    with pytest.raises(ParseError):
        ResultTable.read_csv(tmp_path / "bad.csv")


# -- configuration --------------------------------------------------------------------------

def test_config_validation():
    cfg = AnalysisConfig(pairs="1:1-2:2", controls=["3:1"], lag_seconds=0.034)
    assert cfg.pairs[0].jp == 2 and cfg.controls == [(3, 1)]
    assert cfg.lag_samples(100) == 3
    assert AnalysisConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    for bad in ({"window": 0}, {"levels": 2, "pairs": ["3:1-1:1"]}, {"quantiles": [1.2]},
                {"nsim": 10}, {"sampling_rate": -1}, {"unknown": 1}):
        with pytest.raises(ConfigurationError):
            AnalysisConfig.from_dict(bad)
    with pytest.raises(ConfigurationError):
        AnalysisConfig(pairs=["1:1-1:3"]).check_channels(2)


# -- command line ---------------------------------------------------------------------------

def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_is_deterministic(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("simulate", "--config", TRIVARIATE, "--seed", 42, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    s = load_csv(tmp_path / "a.csv")
    assert s.values.shape == (3, 1000) and s.sampling_rate == pytest.approx(100)
    manifest = json.loads(manifest_path(tmp_path / "a.csv").read_text())
    assert manifest["seed"] == 42 and manifest["model"]["model"] == "ar2_mixture"
    assert set(manifest["versions"]) >= {"mvlsw", "numpy", "scipy", "python"}


def test_simulate_mvlsw_model(tmp_path):
    out = tmp_path / "x.csv"
    assert run("simulate", "--config", CONFIGS / "cross_scale.json", "--seed", 3, "--out", out) == 0
    assert load_csv(out).values.shape == (2, 1024)


def test_decompose_sums_to_input(tmp_path):
    x, d = tmp_path / "x.csv", tmp_path / "d.csv"
    run("simulate", "--config", TRIVARIATE, "--seed", 1, "--out", x)
    assert run("decompose", "--input", x, "--levels", 4, "--out", d) == 0
    src, comps = load_csv(x), load_csv(d)
    assert comps.channel_names[:5] == ("ch1_D1", "ch1_D2", "ch1_D3", "ch1_D4", "ch1_S4")
    total = comps.values.reshape(3, 5, -1).sum(axis=1)
    assert np.max(np.abs(total - src.values)) <= 1e-8


def test_coherence_design_contrast(tmp_path):
    pair_means = []
    for seed in range(5):
        x, c = tmp_path / f"x{seed}.csv", tmp_path / f"c{seed}.csv"
        run("simulate", "--config", TRIVARIATE, "--seed", seed, "--out", x)
        assert run("coherence", "--input", x, "--levels", 4, "--window", 50, "--step", 10,
                   "--pairs", "1:1-1:2", "--squared", "--out", c) == 0
        rows = ResultTable.read_csv(c).rows
        t = np.array([r[0] for r in rows])
        v = np.array([r[5] for r in rows])
        assert {r[6] for r in rows} == {"windowed-squared"}
        pair_means.append((v[t < 5].mean(), v[t >= 5].mean()))
    early, late = np.mean(pair_means, axis=0)
    assert early >= 3 * late


def test_coherence_with_thresholds_and_replay(tmp_path):
    x, null, c = tmp_path / "x.csv", tmp_path / "null.json", tmp_path / "c.csv"
    run("simulate", "--config", TRIVARIATE, "--seed", 5, "--out", x)
    assert run("null-threshold", "--input", x, "--levels", 4, "--pairs", "1:1-1:2",
               "--nsim", 100, "--seed", 2, "--out", null) == 0
    doc = json.loads(null.read_text())
    assert doc["meta"]["T"] == 1000 and doc["meta"]["P"] == 3
    assert run("coherence", "--input", x, "--levels", 4, "--pairs", "1:1-1:2",
               "--thresholds", null, "--out", c) == 0
    rows = ResultTable.read_csv(c).rows
    thr = [q["abs"] for q in doc["quantiles"] if q["level"] == 0.99][0]
    assert all(r[7] == (abs(r[5]) > thr) for r in rows)
    # replay from the manifest alone reproduces the file
    again = tmp_path / "again.csv"
    assert run("replay", manifest_path(c), "--out", again) == 0
    assert again.read_bytes() == c.read_bytes()


def test_replay_detects_changed_input(tmp_path, capsys):
    x, d = tmp_path / "x.csv", tmp_path / "d.csv"
    run("simulate", "--config", TRIVARIATE, "--seed", 5, "--out", x)
    run("decompose", "--input", x, "--levels", 2, "--out", d)
    x.write_text(x.read_text().replace("0.0,", "0.0,1", 1))
    assert run("replay", manifest_path(d)) == 1
    assert "changed" in capsys.readouterr().err


def test_coherence_in_process_null_and_lag_seconds(tmp_path):
    x, c = tmp_path / "x.csv", tmp_path / "c.csv"
    run("simulate", "--config", TRIVARIATE, "--seed", 6, "--out", x)
    assert run("coherence", "--input", x, "--levels", 4, "--pairs", "1:1-1:2",
               "--lag-seconds", 0.05, "--nsim", 100, "--out", c) == 0
    m = json.loads(manifest_path(c).read_text())
    assert m["result"]["lag_samples"] == 5
    assert m["result"]["threshold_squared"] == pytest.approx(m["result"]["threshold_abs"] ** 2)
    assert all(r[7] is not None for r in ResultTable.read_csv(c).rows)


def test_coherence_methods(tmp_path):
    x = tmp_path / "x.csv"
    run("simulate", "--config", TRIVARIATE, "--seed", 7, "--out", x)
    assert run("coherence", "--input", x, "--levels", 3, "--method", "spectral", "-M", 16,
               "--pairs", "1:1-1:2", "--out", tmp_path / "s.csv") == 0
    rows = ResultTable.read_csv(tmp_path / "s.csv").rows
    assert len(rows) == 1000 and rows[0][6] == "spectral"
    assert run("coherence", "--input", x, "--levels", 3, "--method", "partial",
               "--pairs", "1:1-1:2", "--controls", "1:3", "--out", tmp_path / "p.csv") == 0
    assert ResultTable.read_csv(tmp_path / "p.csv").rows[0][6] == "partial"


def test_spectrum_command(tmp_path):
    x, s = tmp_path / "x.csv", tmp_path / "s.csv"
    run("simulate", "--config", CONFIGS / "cross_scale.json", "--seed", 1, "--out", x)
    assert run("spectrum", "--input", x, "--levels", 2, "-M", 8, "--out", s) == 0
    rows = ResultTable.read_csv(s).rows
    # J=2, P=2: four diagonal entries plus the six (j,p) < (j',q) pairs
    assert len(rows) == 10 * 1024


def test_permtest_command(tmp_path):
    files = []
    for seed in range(6):
        f = tmp_path / f"s{seed}.csv"
        run("simulate", "--config", TRIVARIATE, "--seed", seed, "--out", f)
        files.append(f)
    out = tmp_path / "perm.csv"
    assert run("permtest", "--group-a", *files[:3], "--group-b", *files[3:], "--levels", 4,
               "--pairs", "1:1-1:2", "--nperm", 200, "--seed", 1, "--out", out) == 0
    rows = ResultTable.read_csv(out).rows
    p = [r for r in rows if r[6] == "p-value"]
    assert len(p) == 1 and 1 / 201 <= p[0][5] <= 1
    assert {r[6] for r in rows} == {"median-a", "median-b", "t-statistic", "p-value"}


def test_config_file_and_band_labels(tmp_path):
    x, c = tmp_path / "x.csv", tmp_path / "c.csv"
    run("simulate", "--config", TRIVARIATE, "--seed", 8, "--out", x)
    assert run("coherence", "--config", CONFIGS / "analysis.json", "--input", x,
               "--window", 40, "--out", c) == 0
    m = json.loads(manifest_path(c).read_text())
    assert m["config"]["window"] == 40 and m["config"]["seed"] == 7
    assert m["result"]["bands_hz"]["1"] == [25.0, 50.0]


@pytest.mark.parametrize("argv,needle", [
    (["decompose", "--input", "missing.csv", "--out", "o.csv"], "missing.csv"),
    (["coherence", "--input", "{x}", "--levels", "4", "--pairs", "1:1-1:9", "--out", "o.csv"],
     "channel"),
    (["coherence", "--input", "{x}", "--levels", "12", "--out", "o.csv"], "too large"),
    (["decompose", "--input", "{x}", "--wavelet", "db11", "--out", "o.csv"], "vanishing"),
])
def test_errors_are_single_line(tmp_path, capsys, argv, needle, monkeypatch):
    monkeypatch.chdir(tmp_path)
    x = tmp_path / "x.csv"
    write_series_csv(x, load_csv(write(tmp_path / "seed.csv", "time,a,b\n" + "".join(
        f"{k},{np.sin(k)},{np.cos(k)}\n" for k in range(64)))))
    code = main([a.replace("{x}", str(x)) for a in argv])
    err = capsys.readouterr().err
    assert code == 1
    assert err.count("\n") == 1 and err.startswith(f"mvlsw {argv[0]}: error:")
    assert needle in err


def test_module_entry_point(tmp_path):
    out = tmp_path / "x.csv"
    proc = subprocess.run([sys.executable, "-m", "mvlsw", "simulate", "--config", str(TRIVARIATE),
                           "--seed", "1", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists() and manifest_path(out).exists()
