import json

import pytest

from hopsi.cli import main

UNWANTED = """a : ch(drop{})
b : ch(drop{})
assume {[0]: drop{}}
'a<[0]>.0 | a(\\x:drop{})x.'x<b>.0
"""
MOBILITY = """a : ch(drop{})
assume {[0]: drop{}}
'a<[0]>.0 | a(\\x:drop{})x.run x
"""
OMEGA = "a : ch^2\n'a<a(X).(X | 'a<X>.0)>.0 | a(X).(X | 'a<X>.0)\n"
LEVELS = "a : ch^2\n'a<a(Y).0>.0 | a(X).X\n"


@pytest.fixture
def src(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_ok(src, capsys):
    code, out, _ = run(capsys, "check", src("m.hopi", MOBILITY))
    assert code == 0 and out.splitlines()[0] == "ok"
    # the received term's handle is unknown statically
    assert "no handle (deadlock)" in out


def test_check_reports_rule_and_json(src, capsys):
    code, out, _ = run(capsys, "check", src("u.hopi", UNWANTED), "--json")
    report = json.loads(out)
    assert code == 1 and report["result"] == "ill-typed"
    assert report["errors"][0]["rule"] == "T-OUT"


def test_check_levels(src, capsys):
    code, out, _ = run(capsys, "check", src("l.hopi2", LEVELS))
    assert code == 0 and out.splitlines()[0] == "ok (level 2)"
    code, out, _ = run(capsys, "check", src("o.hopi2", OMEGA))
    assert code == 1 and "LEVEL" in out and "2 < 2" in out


def test_check_untyped_rho(src, capsys):
    code, out, _ = run(capsys, "check", src("c.rho", "@0!(0) | @0?(y).*y"))
    assert code == 0 and "nothing to check" in out


def test_parse_error_exit_code(src, capsys):
    path = src("bad.hopi", "a : ch(drop{})\n'a<\n")
    code, _, err = run(capsys, "check", path)
    assert code == 2 and err.startswith(f"{path}:3:1: ")


def test_bad_arguments_exit_2(capsys):
    assert main(["frobnicate"]) == 2


def test_wrong_is_detected(src, capsys):
    path = src("u.hopi", UNWANTED)
    code, _, err = run(capsys, "run", path, "--detect-wrong")
    assert code == 3 and "1 wrong" in err
    code, _, _ = run(capsys, "run", path)
    assert code == 0


def test_first_on_a_normal_form_prints_nothing(src, capsys):
    code, out, err = run(capsys, "run", src("n.hopi", "0"), "--strategy", "first")
    assert (code, out) == (0, "")
    assert err == "# 1 states, 1 normal forms, 0 wrong, depth exceeded: no\n"


def test_run_trace_and_report(src, tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out, _ = run(capsys, "run", src("m.hopi", MOBILITY), "--report", str(rep))
    assert code == 0
    lines = out.splitlines()
    assert lines and lines[0].startswith("1\tR-COM")
    summary = json.loads(rep.read_text())
    assert summary["states"] >= 2 and summary["wrong"] == []


def test_json_trace_lines_parse(src, capsys):
    _, out, _ = run(capsys, "run", src("m.hopi", MOBILITY), "--trace", "json")
    assert all(isinstance(json.loads(l), dict) for l in out.splitlines())


def test_rho_run(src, capsys):
    code, out, _ = run(capsys, "run", src("c.rho", "@0!(*@0) | @0?(y).*y"))
    assert code == 0 and out == "1\tCOMM\t-\t*@0\n"


def test_seed_from_environment_wins(src, capsys, monkeypatch):
    path = src("o.hopi2", OMEGA)
    args = ("run", path, "--strategy", "random", "--max-steps", "4")
    first = run(capsys, *args, "--seed", "7")
    monkeypatch.setenv("HOPSI_SEED", "7")
    assert run(capsys, *args, "--seed", "99") == first
    monkeypatch.setenv("HOPSI_SEED", "seven")
    assert run(capsys, *args)[0] == 2


def test_runs_are_byte_identical(src, capsys):
    path = src("o.hopi2", OMEGA)
    a = run(capsys, "run", path, "--strategy", "random", "--seed", "3")
    b = run(capsys, "run", path, "--strategy", "random", "--seed", "3")
    assert a == b


def test_encode(src, capsys):
    assert run(capsys, "encode", src("d.rho", "*@0")) == (0, "0\n", "")
    code, out, _ = run(capsys, "encode", src("c.rho", "@0!(0) | @0?(y).*y"))
    assert code == 0 and "run" in out


def test_encode_typed_needs_annotations(src, capsys):
    code, _, err = run(capsys, "encode", "--typed", src("c.rhot", "@0!(0) | @0?(y).*y"))
    assert code == 1 and err
    code, _, _ = run(capsys, "encode", "--typed", src("t.rhot", "@0!(0 : <B>) | @0?(y:<B>).*y"))
    assert code == 0


def test_assumptions(capsys):
    code, out, _ = run(capsys, "assumptions", "--instance", "hopi", "--trials", "30", "--json")
    report = json.loads(out)
    assert code == 0 and report["result"] == "pass"
    assert {r["failures"] for r in report["assumptionReport"]} == {0}


def test_mutant_is_a_counterexample(capsys):
    code, out, _ = run(
        capsys, "assumptions", "--instance", "hopi", "--mutant", "compose", "--only", "T-ASS-WEAK", "--trials", "1000"
    )
    assert code == 4 and out.rstrip().endswith("counterexample")


def test_eq(src, capsys):
    a = src("a.rho", "@0!(0) | *@0")
    b = src("b.rho", "*@0 | @0!(0)")
    c = src("c.rho", "*@0")
    assert run(capsys, "eq", a, b) == (0, "equivalent\n", "")
    assert run(capsys, "eq", a, c)[0] == 1
    assert run(capsys, "eq", src("d.rho", "@(@0!(0))!(0)"), src("e.rho", "@0!(0)"), "--relation", "nameeq")[0] == 1
    assert run(capsys, "eq", src("h.rho", "@(0|0)!(0)"), src("i.rho", "@0!(0)"), "--relation", "nameeq")[0] == 0
    assert run(capsys, "eq", src("f.rho", "@(*@0)!(0)"), src("g.rho", "@(*@0 | 0)!(0)"), "--relation", "nameeq")[0] == 0


def test_eq_hopi(src, capsys):
    a = src("a.hopi", "a : ch(drop{})\n'a<[0]>.0 | run [0]")
    b = src("b.hopi", "a : ch(drop{})\nrun [0] | 'a<[0]>.0")
    assert run(capsys, "eq", a, b) == (0, "equivalent\n", "")
