import csv
import io
import json
from fractions import Fraction

import pytest

from ppir.capacity import ProblemConfig, capacity_report
from ppir.cli import main
from ppir.dataset import Dataset, build_dataset, select_candidate
from ppir.errors import RegimeUnsupported
from ppir.experiment import COLUMNS, ExperimentSpec, emit_table, parse_value, run_experiment, run_repetitions
from ppir.net import TcpDatabaseServer


def test_experiment_ppir_example():
    res = run_experiment(ExperimentSpec("ppir", 2, (4, 6, 10), (3,), 8, s=13))
    assert res.download_symbols == 14
    assert res.measured_rate == Fraction(4, 7)
    assert res.retrieved_indices == {3: (13,)}
    assert res.verdict == "PASS"


def test_experiment_mppir_example():
    res = run_experiment(ExperimentSpec("mppir", 2, (4, 6, 10, 12), (1, 3), 4, lam=2, s=13))
    assert res.download_symbols == 24
    assert res.measured_rate == Fraction(2, 3)
    assert res.retrieved_indices == {1: (1, 2), 3: (13, 14)}
    assert res.verdict == "PASS"


def test_experiment_tcp_matches_inproc():
    kw = dict(scheme="mppir", n=2, sizes=(4, 6, 10, 12), omega=(1, 3), length=4, lam=2, seed=5)
    a = run_experiment(ExperimentSpec(**kw))
    b = run_experiment(ExperimentSpec(**kw, transport="tcp"))
    assert a.transcripts == b.transcripts
    assert a.as_dict() == {**b.as_dict(), "spec": a.as_dict()["spec"]}


def test_experiment_multiple_blocks():
    res = run_experiment(ExperimentSpec("ppir", 2, (4, 6, 10), (2,), 24, seed=2))
    assert len(res.transcripts) == 3
    assert res.verdict == "PASS"


def test_experiment_single_server():
    res = run_experiment(ExperimentSpec("single_server", 1, (3, 3, 3), (1, 2), 5))
    assert res.measured_rate == Fraction(2, 3)
    assert res.verdict == "PASS"


def test_regime_unsupported():
    with pytest.raises(RegimeUnsupported) as info:
        run_experiment(ExperimentSpec("mppir", 2, (2,) * 6, (1, 2), 4))
    assert info.value.capacity.upper == Fraction(4, 7)


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("ppir", 2, (4, 6), (1, 2))
    with pytest.raises(ValueError):
        ExperimentSpec("ppir", 2, (4, 6), (1,), lam=2)
    spec = ExperimentSpec.from_dict({"scheme": "mppir", "n": 2, "sizes": [4, 6, 10, 12], "omega": [1, 3], "lambda": 2})
    assert spec.lam == 2
    assert ExperimentSpec.from_dict(spec.to_dict()) == spec


def test_repetitions_independent():
    spec = ExperimentSpec("ppir", 2, (4, 6, 10), (1,), 8, repetitions=3, seed=9)
    results = run_repetitions(spec)
    assert all(r.verdict == "PASS" for r in results)
    assert len({r.transcripts for r in results}) == 3


def test_emit_table_csv_roundtrip():
    res = run_experiment(ExperimentSpec("ppir", 2, (4, 6, 10), (3,), 8, s=13))
    rows = list(csv.DictReader(io.StringIO(emit_table([res], "csv").decode())))
    assert len(rows) == 1
    parsed = {k: parse_value(v) for k, v in rows[0].items()}
    lower = parsed.pop("lower")  # numeric below η = Γ/2
    assert lower == pytest.approx(4 / 7, abs=1e-9)
    assert parsed == {
        "n": 2, "gamma": 3, "eta": 1, "lambda": 1,
        "upper": Fraction(4, 7), "measured": Fraction(4, 7), "verdict": "PASS",
    }


def test_emit_table_empty_and_formats():
    assert emit_table([], "csv").decode() == ",".join(COLUMNS) + "\n"
    assert json.loads(emit_table([], "json")) == []
    rep = capacity_report(ProblemConfig(2, 4, 3))
    md = emit_table([rep], "markdown").decode().splitlines()
    assert md[0].startswith("| n | gamma") and len(md) == 3
    with pytest.raises(ValueError):
        emit_table([], "xml")


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("2/3") == Fraction(2, 3)
    assert parse_value("0.5") == 0.5
    assert parse_value("PASS") == "PASS"


# -- command line ------------------------------------------------------------


def test_cli_capacity(capsysbinary):
    assert main(["capacity", "--n", "2", "--classes", "3", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsysbinary.readouterr().out.decode())))
    assert [parse_value(r["upper"]) for r in rows][0] == Fraction(4, 7)
    assert len(rows) == 3


def test_cli_retrieve(capsysbinary):
    code = main(["retrieve", "--sizes", "4,6,10", "--L", "8", "--omega", "3", "--s", "13", "--format", "json"])
    assert code == 0
    out = json.loads(capsysbinary.readouterr().out)
    assert out["measured_rate"] == "4/7" and out["retrieved_indices"] == {"3": [13]}


def test_cli_retrieve_unsupported(capsysbinary):
    code = main(["retrieve", "--sizes", "2,2,2,2,2,2", "--L", "4", "--omega", "1,2", "--format", "csv"])
    assert code == 2
    rows = list(csv.DictReader(io.StringIO(capsysbinary.readouterr().out.decode())))
    assert rows[0]["upper"] == "4/7" and rows[0]["measured"] == ""


def test_cli_spec_file(tmp_path, capsysbinary):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"scheme": "mppir", "n": 2, "sizes": [4, 6, 10, 12], "omega": [1, 3], "lambda": 2, "L": 4}))
    assert main(["retrieve", "--spec", str(spec), "--format", "csv"]) == 0
    row = next(csv.DictReader(io.StringIO(capsysbinary.readouterr().out.decode())))
    assert row["measured"] == "2/3" and row["verdict"] == "PASS"


def test_cli_dataset_and_endpoints(tmp_path, capsysbinary):
    path = tmp_path / "ds.json"
    assert main(["dataset", "gen", "--sizes", "4,6,10", "--L", "8", "--seed", "4", "--out", str(path)]) == 0
    ds = Dataset.load(path)
    assert ds == build_dataset((4, 6, 10), 8, seed=4)
    with TcpDatabaseServer(ds, ("127.0.0.1", 0)) as a, TcpDatabaseServer(ds, ("127.0.0.1", 0)) as b:
        eps = ",".join(f"{h}:{p}" for h, p in (a.address, b.address))
        assert main(["retrieve", "--dataset", str(path), "--endpoints", eps, "--omega", "2", "--s", "20"]) == 0
    out = json.loads(capsysbinary.readouterr().out)
    assert out["download_symbols"] == 14
    assert out["messages"]["2"] == [list(ds.message(select_candidate(ds.classification, 20, 2)))]


def test_cli_audit(capsysbinary):
    assert main(["audit", "--n", "2", "--classes", "2"]) == 0
    report = json.loads(capsysbinary.readouterr().out)
    assert report["verdict"] == "PASS"
    assert main(["audit", "--n", "2", "--classes", "3", "--budget", "10"]) == 2


def test_cli_bench(capsysbinary):
    assert main(["bench", "--sizes", "4,6,10,12", "--L", "4", "--eta", "2", "--lambda", "2", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsysbinary.readouterr().out.decode())))
    assert len(rows) == 6
    assert {r["measured"] for r in rows} == {"2/3"}
