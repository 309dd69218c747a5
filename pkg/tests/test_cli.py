import json
import re

import numpy as np
import pytest

from fermicluster import cli
from fermicluster.model import hubbard_dimer
from fermicluster.modelfile import ModelFileError, RunConfig, format_model, parse_model
from fermicluster.report import RunReport, Verdict, parse_json, render_csv, render_json, render_text

GOOD = """
[model]
n_modes = 2
beta = 1.5
mu = 0.1

[kinetic]
0 0 0.2 0
0 1 0.5 0.25

[interaction]
order = 2
0 1 1 0 0.3 0

[run]
N = 4, 8
seed = 17
"""


def test_parse_model():
    mf = parse_model(GOOD)
    k = mf.spec.kinetic
    assert k[1, 0] == np.conj(k[0, 1]) == 0.5 - 0.25j
    assert mf.spec.beta == 1.5 and mf.spec.mu == 0.1
    assert mf.run.N == (4, 8) and mf.run.seed == 17
    assert mf.spec.interactions[0].coefficients == {(0, 1, 1, 0): 0.3}


def test_format_roundtrip():
    spec = hubbard_dimer(U=0.123456789)
    mf = parse_model(format_model(spec, RunConfig(seed=3)))
    assert np.array_equal(mf.spec.kinetic, spec.kinetic)
    assert mf.spec.interactions[0].coefficients == spec.interactions[0].coefficients
    assert mf.run.seed == 3


@pytest.mark.parametrize(
    "text,line,col",
    [
        ("[model]\nn_modes = 2\nbeta = 1\nmu = 0\nbogus = 1\n", 5, 1),
        ("[model]\nn_modes = 2\nbeta = 1.0x\nmu = 0\n", 3, 8),
        ("[model]\nn_modes = 2\nbeta = 1\nmu = 0\n[kinetic]\n0 1 1 0\n1 0 1 1\n", 7, 1),
        ("[model]\nn_modes = 2\nbeta = 1\nmu = 0\n[kinetic]\n0 1 1\n", 6, 1),
        ("[model]\nn_modes = 2\nbeta = 1\nmu = 0\n[interaction]\n0 1 1 0 1 0\n", 6, 1),
        ("[model]\nn_modes = 2\nbeta = 1\nmu = 0\n[run]\ncolour = 3\n", 6, 1),
        ("[nope]\n", 1, 1),
        ("[model]\nn_modes = 2\nbeta = 1\nmu = 0\n[kinetic]\n0 0 1 0.5\n", 6, 7),
    ],
)
def test_parse_errors(text, line, col):
    with pytest.raises(ModelFileError) as exc:
        parse_model(text)
    assert (exc.value.line, exc.value.col) == (line, col)


def test_missing_key():
    with pytest.raises(ModelFileError):
        parse_model("[model]\nn_modes = 2\nbeta = 1\n")


def sample_report():
    return RunReport(
        "cluster-check", "m.model", {"N": [8, 16]}, ["m", "lhs", "rhs", "pass"],
        [[1, 0.1 + 0.2, 1 / 3, True], [2, 1e-300, 2.0, None]],
        {"delta": 4.780460579967157}, [Verdict("row", True, "ok")], ["omega*||V||_{3δ} = 0.4 <= 0.5: yes"],
        0.5, "0.1.0", 7,
    )


def test_json_roundtrip():
    r = sample_report()
    back = parse_json(render_json(r))
    assert back == r
    assert "0.30000000000000004" in render_json(r)


def test_csv_and_text():
    r = sample_report()
    lines = render_csv(r).splitlines()
    assert lines[0] == "m,lhs,rhs,pass"
    assert lines[1] == "1,0.30000000000000004,0.33333333333333331,yes"
    assert lines[2].endswith(",n/a")
    assert "omega*||V||_{3δ} = 0.4 <= 0.5: yes" in render_text(r)


def test_cli_cluster_check(tmp_path):
    out = tmp_path / "cc.csv"
    assert cli.main(["cluster-check", "hubbard_dimer", "--format", "csv", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "m,lhs,rhs,pass" and all(r.endswith(",yes") for r in rows[1:])


def test_cli_cluster_check_text(capsys):
    assert cli.main(["cluster-check", "hubbard_dimer"]) == 0
    text = capsys.readouterr().out
    line = next(ln for ln in text.splitlines() if ln.startswith("omega*"))
    assert re.fullmatch(r"omega\*\|\|V\|\|_\{3δ\} = (\S+) <= 0\.5: yes", line)
    assert float(line.split()[2]) == pytest.approx(0.4, rel=1e-12)


def test_cli_discretize_ratios(tmp_path):
    out = tmp_path / "d.json"
    assert cli.main(["discretize", "hubbard_dimer_u03", "--format", "json", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    ratios = [row[rep["columns"].index("ratio")] for row in rep["rows"][1:]]
    assert len(ratios) == 3 and all(1.6 <= r <= 2.4 for r in ratios)


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.model"
    bad.write_text("[model]\nn_modes = x\n")
    assert cli.main(["exact", str(bad)]) == 2
    assert "bad.model:2:11" in capsys.readouterr().err
    assert cli.main(["exact", str(tmp_path / "missing.model")]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate", "single_mode"])
    assert exc.value.code == 2


def test_cli_assertion_failure_exit_1(tmp_path, capsys, monkeypatch):
    # a sabotaged right-hand side makes every row fail
    from fermicluster import bounds

    model = tmp_path / "m.model"
    model.write_text(format_model(hubbard_dimer(U=1e-4)))
    monkeypatch.setattr(bounds, "clustering_rhs", lambda *a: -1.0)
    assert cli.main(["cluster-check", str(model)]) == 1
    assert "assertion failed" in capsys.readouterr().err


def test_cli_determinism(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert cli.main(["bounds", "hubbard_dimer", "--format", "json", "--seed", "99", "--out", str(p)]) == 0
    ra, rb = parse_json(a.read_text()), parse_json(b.read_text())
    assert ra.comparable() == rb.comparable()
    assert ra.seed == 99


def test_bundled_models_listed():
    assert {"single_mode", "hubbard_dimer", "hubbard_dimer_u03"} <= set(cli.bundled_models())
