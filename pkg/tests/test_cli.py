import json

import pytest

from dralab.cli import (
    COLUMNS, dump_config, emit_report, load_config, load_report, main, parse_config,
)
from dralab.audit import judge
from dralab.errors import SchemaError


def _cfg(tmp_path, jobs):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"jobs": jobs}))
    return str(p)


def _job(tmp_path, **kw):
    base = {"command": "run", "seed": 1, "output": str(tmp_path / "out.csv"), "dist": "exp:1",
            "trials": 2000}
    base.update(kw)
    return base


def test_run_strawman_exact(capsys):
    rc = main(["run", "--dist", "two", "--n", "1", "--strategy", "strawman", "--fine", "const:0",
               "--trials", "exact", "--seed", "1"])
    assert rc == 0
    assert "mean=1.5" in capsys.readouterr().out


def test_usage_errors(monkeypatch):
    monkeypatch.delenv("DRA_LAB_SEED", raising=False)
    assert main(["run", "--dist", "bogus", "--seed", "1"]) == 2
    assert main(["run", "--dist", "exp:1"]) == 2
    assert main(["frobnicate"]) == 2
    assert main([]) == 2
    assert main(["run", "--trials", "12.5", "--seed", "1"]) == 2


def test_env_seed(monkeypatch, tmp_path):
    monkeypatch.setenv("DRA_LAB_SEED", "3")
    out = tmp_path / "r.csv"
    assert main(["run", "--trials", "1e4", "--out", str(out)]) == 0
    assert load_report(str(out))[0]["seed"] == "3"


def test_failing_audit_exit_code(tmp_path):
    # an equal-revenue grid beats the optimal auction, so the sweep reports a failure
    rc = main(["sweep", "--dist", "er", "--strategy", "ergrid:5", "--fine", "const:1",
               "--trials", "1e5", "--seed", "2", "--out", str(tmp_path / "s.csv")])
    assert rc == 1


def test_audit_exit_zero(tmp_path):
    assert main(["audit", "--theorem", "mhr", "--dist", "two", "--fine", "const:1",
                 "--seed", "1", "--format", "json", "--out", str(tmp_path / "a.json")]) == 0
    rows = load_report(str(tmp_path / "a.json"))
    assert rows[0]["verdict"] == "pass" and list(rows[0]) == list(COLUMNS)


def test_demo_commit(capsys):
    assert main(["demo-commit", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "verify: True" in out and "m+1: False" in out


def test_config_round_trip(tmp_path):
    path = _cfg(tmp_path, [_job(tmp_path), _job(tmp_path, command="audit-theorem",
                                                theorem="regular", params={"r": 4},
                                                output=str(tmp_path / "b.csv"))])
    a = load_config(path)
    dump_config(a, str(tmp_path / "again.json"))
    b = load_config(str(tmp_path / "again.json"))
    assert a == b
    dump_config(b, str(tmp_path / "third.json"))
    assert (tmp_path / "again.json").read_text() == (tmp_path / "third.json").read_text()


@pytest.mark.parametrize("patch,where", [
    ({"dist": "gauss"}, "jobs[0].dist"),
    ({"seed": "x"}, "jobs[0].seed"),
    ({"fine": "const:-1"}, "jobs[0].fine"),
    ({"trials": 0}, "jobs[0].trials"),
    ({"command": "dance"}, "jobs[0].command"),
    ({"color": "red"}, "jobs[0]"),
    ({"n": 0}, "jobs[0].n"),
])
def test_schema_errors(tmp_path, patch, where):
    with pytest.raises(SchemaError, match=__import__("re").escape(where)):
        load_config(_cfg(tmp_path, [_job(tmp_path, **patch)]))


def test_missing_seed(tmp_path):
    job = _job(tmp_path)
    del job["seed"]
    with pytest.raises(SchemaError, match="seed"):
        load_config(_cfg(tmp_path, [job]))


def test_duplicate_output(tmp_path):
    with pytest.raises(SchemaError, match="duplicates"):
        parse_config({"jobs": [_job(tmp_path), _job(tmp_path)]})


def test_bad_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "jobs": [\n oops ]}')
    with pytest.raises(SchemaError, match="line 3"):
        load_config(str(p))


def test_config_runs(tmp_path):
    path = _cfg(tmp_path, [_job(tmp_path), _job(tmp_path, command="sweep",
                                                params={"ns": [1, 2]},
                                                output=str(tmp_path / "sw.csv"))])
    assert main(["--config", path]) == 0
    assert len(load_report(str(tmp_path / "sw.csv"))) == 2
    assert main(["--config", str(tmp_path / "missing.json")]) == 2


def test_report_round_trip(tmp_path):
    reps = [judge("a", 1.0, 2.0, std_error=0.1, dist="exp:1", n=1, seed=3),
            judge("b", 0.1 + 0.2, 1 / 3, "ge")]
    text = emit_report(reps, str(tmp_path / "r.csv"))
    rows = load_report(str(tmp_path / "r.csv"))
    assert emit_report(rows, None) == text
    assert float(rows[1]["mean"]) == 0.1 + 0.2
    text = emit_report(reps, str(tmp_path / "r.json"), "json")
    assert emit_report(load_report(str(tmp_path / "r.json")), None, "json") == text


def test_atomic_write_leaves_no_temp(tmp_path):
    emit_report([judge("a", 1.0, 2.0)], str(tmp_path / "x.csv"))
    assert sorted(p.name for p in tmp_path.iterdir()) == ["x.csv"]
