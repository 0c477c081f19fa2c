import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.cli import ConfigError, Record, Report, emit_report, main, parse_report, run_suite, validate


def test_tree_suite_passes():
    rep = run_suite("tree", {"q": 2, "depth": 3}, seed=1)
    assert rep.ok() and [r.name for r in rep.records] == sorted(r.name for r in rep.records)
    assert all(r.anchor and r.runtime is None for r in rep.records)


def test_reports_are_byte_identical():
    a = emit_report(run_suite("tree", {"q": 3, "depth": 2}, seed=7))
    b = emit_report(run_suite("tree", {"q": 3, "depth": 2}, seed=7))
    assert a == b


def test_invalid_parameters():
    with pytest.raises(ConfigError):
        validate("tree", {"q": 6})
    with pytest.raises(ConfigError):
        validate("iwasawa", {"p": 4})
    with pytest.raises(ConfigError):
        validate("tree", {"colour": 1})
    with pytest.raises(ConfigError):
        validate("nope", {})


def test_empty_and_text_output():
    assert json.loads(emit_report([])) == []
    rep = run_suite("locaut", {}, seed=0)
    text = emit_report(rep, "text")
    assert len(text.strip().splitlines()) == len(rep.records)


words = st.text(alphabet="abcxyz._=", min_size=1, max_size=12)
records = st.builds(Record, words, words, st.sampled_from(["pass", "fail", "capped", "exploratory"]),
                    st.one_of(st.none(), st.integers(), st.lists(st.integers(), max_size=3)),
                    st.one_of(st.none(), st.floats(0, 10, allow_nan=False)))


@settings(max_examples=50)
@given(st.lists(records, max_size=4), st.integers(0, 2**64 - 1))
def test_emit_parse_roundtrip(recs, seed):
    rep = Report("tree", {"q": 2}, seed, records=recs)
    assert parse_report(emit_report(rep)) == [rep]


def test_statuses_drive_the_exit_code(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 2, "K": 1, "r": 2}))
    # the literal commutation relations fail; everything else passes
    assert main(["run", "--suite", "iwasawa", "--config", str(cfg), "--format", "text"]) == 1
    out = capsys.readouterr().out
    fails = [line for line in out.splitlines() if line.startswith("FAIL")]
    assert fails and all(".literal." in line for line in fails)
    cfg.write_text(json.dumps({"q": 2, "depth": 3}))
    assert main(["run", "--suite", "tree", "--config", str(cfg)]) == 0
    cfg.write_text(json.dumps({"q": 10}))
    assert main(["run", "--suite", "tree", "--config", str(cfg)]) == 2


def test_exploratory_status_does_not_fail():
    rep = run_suite("etale", {"q": 4, "m": 1, "system": "constant"}, seed=0)
    statuses = {r.name: r.status for r in rep.records}
    assert statuses["etale.constant.qp_fact"] == "exploratory"
    assert rep.ok()


def test_capped_status():
    rep = run_suite("locaut", {"q": 3, "e": 1, "m": 2, "cap": 100}, seed=0)
    assert {r.status for r in rep.records} >= {"capped"}
    assert not rep.ok()
