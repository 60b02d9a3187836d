import json

import pytest
from click.testing import CliRunner

from sigprice import cli

CONFIG = {
    "market": {"model": "GARCH", "seed": 4},
    "experiment": {
        "order": 3,
        "days": 15,
        "basis_paths": 400,
        "mc_paths": 1000,
        "family_counts": [3, 3, 3, 3],
        "held_out_counts": [2, 2, 2, 2],
    },
}


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps(CONFIG))
    return tmp_path


def invoke(workdir, *args):
    runner = CliRunner()
    return runner.invoke(cli.main, list(args), catch_exceptions=False)


def test_pipeline(workdir):
    cfg, out = str(workdir / "cfg.json"), str(workdir / "out")
    r = invoke(workdir, "simulate", "--config", cfg, "--out", out, "--count", "3", "--seed", "9")
    assert r.exit_code == 0
    lines = (workdir / "out" / "paths.jsonl").read_text().splitlines()
    assert len(lines) == 3 and len(json.loads(lines[0])["values"]) == 16

    assert invoke(workdir, "price-family", "--config", cfg, "--out", out).exit_code == 0
    prices = (workdir / "out" / "prices.csv").read_text().splitlines()
    assert prices[0] == "payoff_id,price,std_err" and len(prices) == 13

    assert invoke(workdir, "fit-functionals", "--config", cfg, "--out", out).exit_code == 0
    fns = json.loads((workdir / "out" / "functionals.json").read_text())
    assert len(fns) == 12 and fns[0]["order"] == 3

    r = invoke(
        workdir, "implied-sig", "--config", cfg, "--out", out,
        "--functionals", f"{out}/functionals.json", "--prices", f"{out}/prices.csv",
    )
    assert r.exit_code == 0
    implied = json.loads((workdir / "out" / "implied.json").read_text())
    assert implied["coeffs"][0] == 1.0

    r = invoke(workdir, "price", "--config", cfg, "--out", out, "--implied", f"{out}/implied.json")
    assert r.exit_code == 0
    assert len((workdir / "out" / "predicted.csv").read_text().splitlines()) == 9


def test_experiment_and_sweep(workdir):
    cfg, out = str(workdir / "cfg.json"), str(workdir / "out")
    r = invoke(workdir, "experiment", "--config", cfg, "--out", out)
    assert r.exit_code == 0 and "GARCH: R2=" in r.output
    assert (workdir / "out" / "table.csv").exists()
    assert (workdir / "out" / "GARCH_scatter.svg").exists()
    r = invoke(workdir, "sweep", "--config", cfg, "--out", out, "--sizes", "4,12")
    assert r.exit_code == 0
    assert (workdir / "out" / "sweep.csv").read_text().count("\n") == 3


def run_entry(monkeypatch, capsys, *args):
    monkeypatch.setattr("sys.argv", ["sigprice", *args])
    with pytest.raises(SystemExit) as exc:
        cli.run()
    return exc.value.code, capsys.readouterr().err


def test_stage_tagged_failures(workdir, monkeypatch, capsys):
    bad = workdir / "bad.json"
    bad.write_text(json.dumps({"model": "Heston"}))
    code, err = run_entry(monkeypatch, capsys, "simulate", "--config", str(bad), "--out", str(workdir))
    assert code != 0 and "[config]" in err

    code, err = run_entry(
        monkeypatch, capsys, "sweep", "--config", str(workdir / "cfg.json"),
        "--out", str(workdir), "--sizes", "4,99",
    )
    assert code != 0 and "[family]" in err

    (workdir / "broken.json").write_text("{not json")
    code, err = run_entry(monkeypatch, capsys, "simulate", "--config", str(workdir / "broken.json"))
    assert code != 0 and "[config]" in err


def test_success_exit_code(workdir, monkeypatch, capsys):
    monkeypatch.setattr(
        "sys.argv",
        ["sigprice", "simulate", "--config", str(workdir / "cfg.json"), "--out", str(workdir), "--count", "1"],
    )
    cli.run()  # returns normally


def test_order_and_days_override(workdir):
    cfg, out = str(workdir / "cfg.json"), str(workdir / "o2")
    r = invoke(workdir, "fit-functionals", "--config", cfg, "--out", out, "--order", "2", "--days", "10")
    assert r.exit_code == 0
    fns = json.loads((workdir / "o2" / "functionals.json").read_text())
    assert fns[0]["order"] == 2
