import json

import pytest

from pact.cli import main
from conftest import BOOKSELLER, LEMONS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_ok(capsys):
    code, out, err = run(capsys, "check", BOOKSELLER)
    assert code == 0 and err == ""
    assert "ok" in out


def test_check_missing_file(capsys):
    code, _, err = run(capsys, "check", "missing.pact")
    assert code == 2 and "missing.pact" in err


def test_check_mutant(tmp_path, capsys, bookseller_text):
    bad = tmp_path / "bad.pact"
    bad.write_text(bookseller_text.replace("if broadcast(accept = buyer.choose(Bool))", "if price < 10"))
    code, _, err = run(capsys, "check", str(bad))
    lines = err.strip().splitlines()
    assert code == 1 and len(lines) == 1
    assert lines[0].startswith(f"{bad}:17:3: B002:")


def test_check_json(capsys):
    code, out, _ = run(capsys, "check", BOOKSELLER, "--format", "json")
    assert code == 0 and json.loads(out)["errors"] == 0


def test_project_buyer(capsys):
    code, out, _ = run(capsys, "project", BOOKSELLER, "--role", "buyer")
    assert code == 0
    assert out.splitlines() == [
        "let bookseller_buyer () =",
        "  send(title, seller)",
        "  price = recv(seller)",
        "  accept = choose(Bool)",
        "  send(accept, seller)",
        "  if accept then begin",
        "    book = recv(seller)",
        "    balance -= send(price, seller)",
        "  end",
    ]


def test_project_unknown_role(capsys):
    code, _, err = run(capsys, "project", BOOKSELLER, "--role", "broker")
    assert code == 1 and "broker" in err


def test_game_summary(capsys):
    code, out, _ = run(capsys, "game", BOOKSELLER, "--beliefs", LEMONS)
    assert code == 0
    assert out.splitlines()[0] == "8 terminals, 4 decision info sets, 1 chance node"


def test_solve_naive_stage(capsys):
    code, out, _ = run(capsys, "solve", BOOKSELLER, "--beliefs", LEMONS, "--level", "1",
                       "--noise", "0.01", "--format", "tsv")
    assert code == 0
    rows = [r.split("\t") for r in out.splitlines()[1:]]
    seller_top = [float(r[5]) for r in rows if r[0] == "1" and r[1] == "seller" and r[4] == "2"]
    assert len(seller_top) == 2 and min(seller_top) >= 0.99


def test_solve_level0_is_verbatim(capsys):
    code, out, _ = run(capsys, "solve", BOOKSELLER, "--beliefs", LEMONS, "--level", "0", "--format", "json")
    data = json.loads(out)
    assert code == 0 and len(data["levels"]) == 1
    seller = [e for e in data["levels"][0]["policies"] if e["role"] == "seller"]
    assert {e["observed"]["book.quality"]: e["probs"]["2"] for e in seller} == {"high": 0.9, "low": 0.1}


@pytest.mark.parametrize("flag", [["--noise", "0"], ["--noise", "-1"], ["--level", "-2"]])
def test_solve_rejects_bad_overrides(capsys, flag):
    code, _, err = run(capsys, "solve", BOOKSELLER, "--beliefs", LEMONS, *flag)
    assert code == 1 and "profile error" in err


def test_solve_profile_error_names_key(tmp_path, capsys):
    prof = json.loads(open(LEMONS).read())
    del prof["priors"]["book.quality"]
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prof))
    code, _, err = run(capsys, "solve", BOOKSELLER, "--beliefs", str(path))
    assert code == 1 and "book.quality" in err


def test_simulate_single_trial(tmp_path, capsys):
    traces = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "simulate", BOOKSELLER, "--beliefs", LEMONS, "--trials", "1",
                       "--seed", "7", "--traces", str(traces))
    assert code == 0
    assert "0 conformance failure(s)" in out
    assert len(traces.read_text().splitlines()) == 1


def test_simulate_with_policy_file(tmp_path, capsys):
    pol = tmp_path / "pol.json"
    assert run(capsys, "solve", BOOKSELLER, "--beliefs", LEMONS, "--format", "json", "--out", str(pol))[0] == 0
    code, out, _ = run(capsys, "simulate", BOOKSELLER, "--beliefs", LEMONS, "--policies", str(pol),
                       "--trials", "50", "--format", "json", "--schedule", "random:3")
    assert code == 0 and json.loads(out)["conformance_failures"] == 0


def test_outputs_are_deterministic(capsys):
    args = ["simulate", BOOKSELLER, "--beliefs", LEMONS, "--trials", "200", "--seed", "4"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]
