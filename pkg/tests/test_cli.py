import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import LIVE, REFERENCE
from obdastream.cli import UsageError, main, parse_duration, parse_stream_arg


@pytest.fixture
def running(fixtures):
    return ["--ontology", str(fixtures / "running.onto"), "--mappings", str(fixtures / "running.map"),
            "--data", str(fixtures / "tables")]


def _run_args(fixtures, tmp_path, *extra):
    return ["run", "--ontology", str(fixtures / "running.onto"), "--mappings", str(fixtures / "running.map"),
            "--data", str(fixtures / "tables"), "--query", str(fixtures / "critical_mode.starql"),
            "--stream", f"{LIVE}={fixtures / 'live.csv'}", "--stream", f"{REFERENCE}={fixtures / 'reference.csv'}",
            *extra]


class TestHelpers:
    def test_durations(self):
        assert parse_duration("60s") == 60_000
        assert parse_duration("1min") == 60_000
        assert parse_duration("1year") == 31_536_000_000
        assert parse_duration("250") == 250
        with pytest.raises(UsageError):
            parse_duration("5parsecs")

    def test_stream_arg(self):
        assert parse_stream_arg("a=x.csv") == ("a", Path("x.csv"), 0)
        assert parse_stream_arg("a=x.csv,setback=1min")[2] == 60_000
        with pytest.raises(UsageError):
            parse_stream_arg("x.csv")
        with pytest.raises(UsageError):
            parse_stream_arg("a=x.csv,speed=2")


class TestStaticCommands:
    def test_validate_ok(self, fixtures, capsys):
        assert main(["validate", "--ontology", str(fixtures / "running.onto"), "--data",
                     str(fixtures / "running.csv"), "--query", str(fixtures / "critical_mode.starql")]) == 0
        assert "ok" in capsys.readouterr().out

    def test_validate_bad_starql(self, fixtures, capsys):
        bad = fixtures / "starql" / "invalid" / "unknown-pulse.starql"
        assert main(["validate", "--query", str(bad)]) == 1
        assert "unknown-pulse" in capsys.readouterr().out

    def test_validate_unsatisfiable(self, tmp_path, capsys):
        onto = tmp_path / "o.onto"
        onto.write_text("disjoint A B\n")
        data = tmp_path / "d.csv"
        data.write_text("kind,subject,predicate,object\nconcept,a,A,\nconcept,a,B,\n")
        assert main(["validate", "--ontology", str(onto), "--data", str(data)]) == 1

    def test_rewrite(self, fixtures, capsys):
        assert main(["rewrite", "--ontology", str(fixtures / "running.onto"), "--query", "q(x) :- Reliable(x)"]) == 0
        out = capsys.readouterr().out
        assert "Reliable(x)" in out and "agg:min testScore >= 0.9" in out

    def test_rewrite_bare_atoms(self, fixtures, capsys):
        assert main(["rewrite", "--ontology", str(fixtures / "running.onto"), "--query", "Reliable(x)"]) == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 2

    def test_unfold(self, fixtures, running, capsys):
        assert main(["unfold", *running, "--query", "q(x) :- Reliable(x)"]) == 0
        out = capsys.readouterr().out
        assert "reliable_sensors" in out and "GroupHaving" in out
        assert out.count("Scan") == 4

    def test_unknown_concept(self, fixtures, running, capsys):
        assert main(["unfold", *running, "--query", "q(x) :- Nope(x)"]) == 1
        assert "Nope" in capsys.readouterr().err

    def test_explain_stable(self, fixtures, running, capsys):
        args = ["explain", *running, "--query", str(fixtures / "critical_mode.starql")]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_parse_error_exit(self, tmp_path, capsys):
        onto = tmp_path / "bad.onto"
        onto.write_text("A sub B\nthis is not an axiom\n")
        assert main(["rewrite", "--ontology", str(onto), "--query", "q(x) :- A(x)"]) == 2
        assert "2" in capsys.readouterr().err

    def test_starql_syntax_error(self, tmp_path, running, capsys):
        q = tmp_path / "q.starql"
        q.write_text("CREATE STREAM S AS SELECT\n")
        assert main(["explain", *running, "--query", str(q)]) == 2
        assert "line" in capsys.readouterr().err


class TestRun:
    def test_critical_mode(self, fixtures, tmp_path):
        out, met = tmp_path / "out.csv", tmp_path / "m.jsonl"
        assert main(_run_args(fixtures, tmp_path, "--out", str(out), "--metrics", str(met))) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["tick_ms", "subject", "concept"]
        assert rows[1:] and {r[1] for r in rows[1:]} == {"s2"}
        lines = [json.loads(x) for x in met.read_text().splitlines()]
        assert lines[0]["type"] == "counters" and lines[0]["rows"] == len(rows) - 1

    def test_store_and_modes_agree(self, fixtures, tmp_path):
        store = tmp_path / "store"
        assert main(["ingest", "--stream", f"{REFERENCE}={fixtures / 'reference.csv'}", "--store", str(store),
                     "--range", "60s", "--slide", "1s"]) == 0
        outs = []
        for extra in ([], ["--store", str(store)], ["--store", str(store), "--mws", "off", "--workers", "3"],
                      ["--store", str(store), "--index-threshold", "inf"]):
            out = tmp_path / f"o{len(outs)}.csv"
            assert main(_run_args(fixtures, tmp_path, "--out", str(out), *extra)) == 0
            outs.append(out.read_bytes())
        assert len(set(outs)) == 1

    def test_failure_removes_stale_output(self, fixtures, tmp_path):
        out = tmp_path / "out.csv"
        out.write_text("stale\n")
        args = _run_args(fixtures, tmp_path, "--out", str(out))
        args[args.index("--query") + 1] = str(fixtures / "starql" / "invalid" / "kind-mixing.starql")
        assert main(args) == 1
        assert not out.exists()

    def test_missing_stream(self, fixtures, tmp_path, capsys):
        args = ["run", "--ontology", str(fixtures / "running.onto"), "--mappings", str(fixtures / "running.map"),
                "--data", str(fixtures / "tables"), "--query", str(fixtures / "critical_mode.starql"),
                "--stream", f"{LIVE}={fixtures / 'live.csv'}"]
        assert main(args) == 1
        assert REFERENCE in capsys.readouterr().err

    def test_bad_workers(self, fixtures, tmp_path):
        assert main(_run_args(fixtures, tmp_path, "--workers", "0")) == 1

    def test_setback_for_unknown_stream(self, fixtures, tmp_path):
        args = _run_args(fixtures, tmp_path) + ["--stream", f"other={fixtures / 'live.csv'},setback=1s"]
        assert main(args) == 1


class TestIngestAndBench:
    def test_ingest(self, fixtures, tmp_path, capsys):
        store = tmp_path / "s"
        assert main(["ingest", "--stream", str(fixtures / "reference.csv"), "--store", str(store)]) == 0
        assert capsys.readouterr().out.startswith("windows ")
        assert {p.name for p in store.iterdir()} == {"windows.csv", "values.f64", "times.i64"}

    def test_bench(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        assert main(["bench", "--windows", "200", "--cycles", "2", "--workers", "1,2", "--queries", "avg",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 2 * 2 * 2
        assert {r["scans"] for r in rows if r["mws"] == "on"} == {"0"}
        assert "median_total_ms" in capsys.readouterr().err

    def test_bench_unknown_query(self):
        assert main(["bench", "--windows", "10", "--queries", "median"]) == 1

    def test_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "obdastream.cli", "--help"], capture_output=True, text=True)
        assert r.returncode == 0 and "bench" in r.stdout
