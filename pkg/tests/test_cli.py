"""In-process command tests.

Each subcommand runs through ``main`` on the bundled data, so these
cover argument parsing, the config merge rules, output files (delimited,
JSON, and rendered PNG), and the exit-code mapping for bad inputs.
"""

import json
from importlib import resources

import pytest

from ntscorisk.cli import main
from ntscorisk.market import read_model

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.fixture(scope="module")
def model_path():
    """Bundled 5-asset model JSON as a plain filesystem path."""
    with resources.as_file(
        resources.files("ntscorisk.data") / "synthetic_model.json"
    ) as path:
        yield str(path)


def _is_png(path):
    return path.read_bytes()[:8] == PNG_MAGIC


def test_fit_writes_model_and_is_deterministic(bundled_csv_path, tmp_path, capsys):
    out1 = tmp_path / "run1"
    assert main(["fit", "--input", str(bundled_csv_path), "--output", str(out1)]) == 0
    stdout = capsys.readouterr().out
    assert "fitted alpha=" in stdout

    doc = json.loads((out1 / "model.json").read_text())
    assert 0.0 < doc["alpha"] < 2.0
    model, symbols = read_model(out1 / "model.json")
    assert symbols == ["INDEX", "AAA", "BBB", "CCC"]
    assert model.n_assets == 3

    ks_lines = (out1 / "ks.csv").read_text().splitlines()
    assert ks_lines[0] == "symbol,ks_statistic,ks_pvalue"
    assert len(ks_lines) == 5
    assert _is_png(out1 / "fit_cdf.png")

    out2 = tmp_path / "run2"
    assert main(["fit", "--input", str(bundled_csv_path), "--output", str(out2)]) == 0
    assert (out2 / "model.json").read_bytes() == (out1 / "model.json").read_bytes()


def test_risk_reports_and_writes(model_path, tmp_path, capsys):
    out = tmp_path / "risk"
    assert main(["risk", "--input", model_path, "--output", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "VaR(index)" in stdout
    assert "CoCVaR" in stdout

    doc = json.loads((out / "risk.json").read_text())
    assert doc["zeta"] == 0.05
    assert doc["eta"] == 0.05
    assert doc["method"] == "quadrature"
    assert doc["cocvar"] > doc["covar"] > 0.0
    assert _is_png(out / "risk.png")


def test_mcs_method_reports_a_standard_error(model_path, tmp_path):
    out = tmp_path / "mcs"
    rc = main(
        [
            "risk",
            "--input",
            model_path,
            "--output",
            str(out),
            "--method",
            "mcs",
            "--samples",
            "30000",
            "--seed",
            "3",
        ]
    )
    assert rc == 0
    doc = json.loads((out / "risk.json").read_text())
    assert doc["method"] == "mcs"
    assert doc["M"] == 30000
    assert doc["stderr"] > 0.0
    assert abs(doc["cocvar"] - doc["cocvar_quadrature"]) < 4.0 * doc["stderr"]


def test_percent_flag_touches_stdout_not_files(model_path, tmp_path, capsys):
    out_a = tmp_path / "plain"
    assert main(["risk", "--input", model_path, "--output", str(out_a)]) == 0
    plain = capsys.readouterr().out
    out_b = tmp_path / "pct"
    assert (
        main(["risk", "--input", model_path, "--output", str(out_b), "--percent"]) == 0
    )
    pct = capsys.readouterr().out
    assert "%" not in plain
    assert "%" in pct
    assert (out_a / "risk.json").read_bytes() == (out_b / "risk.json").read_bytes()


def test_weights_file_accepts_both_formats(model_path, tmp_path):
    w_json = tmp_path / "w.json"
    w_json.write_text("[0.4, 0.3, 0.1, 0.1, 0.1]\n")
    out_a = tmp_path / "a"
    assert (
        main(["risk", "--input", model_path, "--output", str(out_a), str(w_json)]) == 0
    )

    w_txt = tmp_path / "w.txt"
    w_txt.write_text("0.4, 0.3, 0.1, 0.1, 0.1\n")
    out_b = tmp_path / "b"
    assert (
        main(["risk", "--input", model_path, "--output", str(out_b), str(w_txt)]) == 0
    )

    a = json.loads((out_a / "risk.json").read_text())
    b = json.loads((out_b / "risk.json").read_text())
    assert a["cocvar"] == b["cocvar"]


def test_short_position_maps_to_exit_4(model_path, tmp_path, capsys):
    w = tmp_path / "w.txt"
    w.write_text("0.6 0.6 -0.2 0.0 0.0\n")
    rc = main(["risk", "--input", model_path, "--output", str(tmp_path / "o"), str(w)])
    assert rc == 4
    assert "weights problem" in capsys.readouterr().err


def test_mct_writes_ranked_table(model_path, tmp_path, capsys):
    out = tmp_path / "mct"
    assert main(["mct", "--input", model_path, "--output", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "TOTAL" in stdout

    lines = (out / "mct.csv").read_text().splitlines()
    assert lines[0] == "symbol,mct_covar,rank_covar,mct_cocvar,rank_cocvar"
    assert len(lines) == 7
    assert lines[1].startswith("AAA,")
    assert lines[6].startswith("TOTAL,")
    ranks = [int(line.split(",")[2]) for line in lines[1:6]]
    assert sorted(ranks) == [1, 2, 3, 4, 5]
    assert _is_png(out / "mct.png")


def test_frontier_small_sweep(model_path, tmp_path, capsys):
    out = tmp_path / "front"
    rc = main(
        [
            "frontier",
            "--input",
            model_path,
            "--output",
            str(out),
            "--points",
            "5",
            "--samples",
            "20000",
            "--seed",
            "7",
        ]
    )
    assert rc == 0
    assert "5 frontier points" in capsys.readouterr().out

    lines = (out / "frontier.csv").read_text().splitlines()
    assert lines[0].startswith("mu_star,cocvar,converged,w_1")
    assert len(lines) == 6
    doc = json.loads((out / "frontier.json").read_text())
    assert len(doc) == 5
    assert all(p["converged"] for p in doc)
    assert _is_png(out / "frontier.png")


def test_budget_respects_config_only_measure(model_path, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"measure": "covar", "iters": 3, "samples": 20000}))
    out = tmp_path / "bud"
    rc = main(["budget", "--config", str(cfg), "--input", model_path, "--output", str(out)])
    assert rc == 0
    assert "3 steps on covar" in capsys.readouterr().out

    doc = json.loads((out / "budget.json").read_text())
    assert doc["measure"] == "covar"
    assert doc["box_halfwidth"] == pytest.approx(4e-4)
    assert len(doc["iterations"]) == 4
    lines = (out / "budget.csv").read_text().splitlines()
    assert lines[0].startswith("iter,risk,ret,w_1")
    assert len(lines) == 5
    assert _is_png(out / "budget.png")


def test_flags_override_config_values(model_path, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"zeta": 0.2, "eta": 0.1}))
    out = tmp_path / "o"
    rc = main(
        [
            "risk",
            "--config",
            str(cfg),
            "--input",
            model_path,
            "--output",
            str(out),
            "--zeta",
            "0.05",
        ]
    )
    assert rc == 0
    doc = json.loads((out / "risk.json").read_text())
    assert doc["zeta"] == 0.05
    assert doc["eta"] == 0.1


def test_unknown_config_key_exits_2(model_path, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"bogus": 1}')
    rc = main(["risk", "--config", str(cfg), "--input", model_path])
    assert rc == 2
    assert "unknown config key" in capsys.readouterr().err


def test_missing_input_exits_2(tmp_path, capsys):
    rc = main(["risk", "--output", str(tmp_path)])
    assert rc == 2
    assert "needs --input" in capsys.readouterr().err


def test_bad_level_exits_2(model_path, tmp_path, capsys):
    rc = main(
        ["risk", "--input", model_path, "--output", str(tmp_path), "--zeta", "1.5"]
    )
    assert rc == 2
    assert "(0, 1)" in capsys.readouterr().err
