import csv
import hashlib
import json

import numpy as np
import pytest

from bdfpos import cli
from bdfpos.errors import ParseError, ValidationError
from bdfpos.momentum import load_table


@pytest.fixture
def cache(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    monkeypatch.setenv("BDFP_CACHE_DIR", str(d))
    return d


def run_main(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_defaults_filled():
    cfg, _ = cli.parse_config(["energy", "--alpha", "0.05", "--cutoff", "30"], env={})
    assert cfg.alpha == 0.05 and cfg.cutoff == 30.0
    assert cfg.box is None and cfg.grid == 64 and cfg.radial_points == 1024
    assert cfg.output_format == "json"
    assert cfg.cache_dir == ".bdfp_cache"


def test_negative_coupling_names_field(capsys):
    with pytest.raises(ValidationError) as info:
        cli.parse_config(["energy", "--alpha", "-1"], env={})
    assert info.value.field == "alpha"
    code, _, err = run_main(["energy", "--alpha", "-1"], capsys)
    assert code == 2 and "alpha" in err


@pytest.mark.parametrize(
    "argv, name",
    [
        (["energy", "--grid", "15"], "grid"),
        (["sweep", "--alphas", "0.1,0.05"], "alphas"),
        (["energy", "--box", "-3"], "box"),
        (["energy", "--alpha", "nan"], "alpha"),
        (["energy", "--seed", "1.5"], "seed"),
    ],
)
def test_validation_errors(argv, name):
    with pytest.raises(ValidationError) as info:
        cli.parse_config(argv, env={})
    assert info.value.field == name


def test_flag_overrides_file(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\nalpha = 0.02\ncutoff = 12   # trailing\ncartesian_points = 32\nbox_length = auto\n")
    cfg, _ = cli.parse_config(["energy", "--config", str(cfg_file), "--alpha", "0.07"], env={})
    assert cfg.alpha == 0.07 and cfg.cutoff == 12.0 and cfg.grid == 32 and cfg.box is None


def test_parse_errors_carry_location(tmp_path):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("alpha = 0.02\nthis line is wrong\n")
    with pytest.raises(ParseError, match=r"bad.cfg:2"):
        cli.parse_config(["energy", "--config", str(cfg_file)], env={})
    cfg_file.write_text("colour = blue\n")
    with pytest.raises(ParseError, match="colour"):
        cli.parse_config(["energy", "--config", str(cfg_file)], env={})
    with pytest.raises(ParseError, match="command line"):
        cli.parse_config(["energy", "--bogus"], env={})
    with pytest.raises(ParseError):
        cli.parse_config(["launch"], env={})


def test_cache_dir_from_environment(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("cache_dir = from_file\n")
    cfg, _ = cli.parse_config(["pekar", "--config", str(cfg_file)], env={"BDFP_CACHE_DIR": "from_env"})
    assert cfg.cache_dir == "from_env"
    cfg, _ = cli.parse_config(["pekar", "--config", str(cfg_file)], env={})
    assert cfg.cache_dir == "from_file"


def test_free_dispersion_cache(cache, tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, stdout, _ = run_main(["dispersion", "--alpha", "0", "--cutoff", "10", "--out", str(out)], capsys)
    assert code == 0
    files = list(cache.iterdir())
    assert len(files) == 1
    t = load_table(files[0], 0.0, 10.0, 1024)
    assert np.all(t.g0 == 1.0) and np.array_equal(t.g1, t.p)
    assert out.read_bytes() == files[0].read_bytes()
    assert json.loads(stdout)["results"]["residual"] == 0.0


def test_dispersion_cache_reused_byte_for_byte(cache, capsys):
    argv = ["dispersion", "--alpha", "0.02", "--cutoff", "10"]
    assert run_main(argv, capsys)[0] == 0
    (path,) = cache.iterdir()
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    mtime = path.stat().st_mtime_ns
    code, _, err = run_main(argv, capsys)
    assert code == 0 and "reused" in err
    assert hashlib.sha256(path.read_bytes()).hexdigest() == digest
    assert path.stat().st_mtime_ns == mtime


def test_pekar_report(cache, tmp_path, capsys):
    out = tmp_path / "p.csv"
    code, stdout, _ = run_main(["pekar", "--out", str(out)], capsys)
    assert code == 0
    r = json.loads(stdout)["results"]
    assert r["E"] == r["T"] - r["V"]
    assert abs(r["V"] - 2 * r["T"]) / r["T"] <= 1e-3
    assert out.read_text().startswith("# E=")


def test_energy_report_schema_and_warnings(cache, tmp_path, capsys):
    out = tmp_path / "e.csv"
    code, stdout, err = run_main(["energy", "--grid", "16", "--out", str(out), "--format", "csv"], capsys)
    assert code == 0
    payload = json.loads(stdout)
    assert set(payload) == {"config", "warnings", "results"}
    codes = {w["code"] for w in payload["warnings"]}
    assert {"ALPHA_LOG_CUTOFF", "BAND_BELOW_CUTOFF"} <= codes
    assert "[ALPHA_LOG_CUTOFF]" in err
    res = payload["results"]
    assert len(res["records"]) >= 21
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["alpha", "lambda", "kinetic", "exchange_hartree", "exchange_overlap", "total"]
    assert [float(r["total"]) for r in rows] == [r["total"] for r in res["records"]]


def test_small_box_and_memory_warnings(cache, tmp_path, capsys):
    cfg_file = tmp_path / "w.cfg"
    cfg_file.write_text("memory_budget_mb = 0.001\nscan_points = 3\nlambda_span = 0.9, 1.1\n")
    code, stdout, _ = run_main(["energy", "--config", str(cfg_file), "--grid", "48", "--box", "500"], capsys)
    codes = {w["code"] for w in json.loads(stdout)["warnings"]}
    assert code == 0 and {"BOX_SMALL", "MEMORY_BUDGET"} <= codes


def test_stage_errors_exit_nonzero(cache, capsys):
    # box far too small for the trial state: the scan stage fails
    code, _, err = run_main(["energy", "--grid", "8", "--box", "1"], capsys)
    assert code == 1 and "scan" in err


def test_energy_rejects_zero_coupling(cache, capsys):
    code, _, err = run_main(["energy", "--alpha", "0", "--grid", "16"], capsys)
    assert code == 2 and "alpha" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["structure-check", "--seed", "3"],
        ["energy", "--grid", "16"],
    ],
)
def test_runs_are_byte_identical(cache, tmp_path, capsys, argv):
    out = tmp_path / "r.json"
    outputs = []
    for _ in range(2):
        code, stdout, _ = run_main(argv + ["--out", str(out), "--format", "json"], capsys)
        assert code == 0
        outputs.append((stdout, out.read_bytes()))
    assert outputs[0] == outputs[1]


def test_structure_check_depends_on_seed(cache, tmp_path, capsys):
    a = json.loads(run_main(["structure-check", "--seed", "1"], capsys)[1])["results"]
    b = json.loads(run_main(["structure-check", "--seed", "2"], capsys)[1])["results"]
    assert a["spectrum_ok"] and a["classify_ok"]
    assert a["worst"] != b["worst"]


def test_full_precision_round_trip(cache, tmp_path, capsys):
    out = tmp_path / "e.json"
    _, stdout, _ = run_main(["energy", "--grid", "16", "--out", str(out)], capsys)
    recs = json.loads(out.read_text())
    scan = cli.run(cli.parse_config(["energy", "--grid", "16"])[0])[1]["scan"]
    assert [r["total"] for r in recs] == [e.total for e in scan.energies]
    assert [r["lambda"] for r in recs] == [e.lam for e in scan.energies]


def test_sweep_csv(cache, tmp_path, capsys):
    cfg_file = tmp_path / "s.cfg"
    cfg_file.write_text("scan_points = 9\nradial_points = 512\n")
    out = tmp_path / "s.csv"
    code, _, _ = run_main(
        ["sweep", "--config", str(cfg_file), "--grid", "32", "--alphas", "0,0.06,0.12", "--out", str(out)], capsys
    )
    assert code == 0
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["alpha", "E_min", "two_m", "slope", "reference_slope"]
    assert rows[0]["slope"] == "" and float(rows[0]["E_min"]) == 2.0
    slopes = [float(r["slope"]) for r in rows[1:]]
    assert all(s < 0 for s in slopes)
