import orjson
import pytest
import yaml
from click.testing import CliRunner

from coarse_clt.cli import cli, cli_main
from coarse_clt.core.documents import save_graph_structure
from coarse_clt.core.graph import Edge, GraphStructure
from coarse_clt.core.groups import OpaqueGroup
from coarse_clt.services import fixtures, verification


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def f2_file(tmp_path, runner):
    target = tmp_path / "f2.json"
    result = runner.invoke(cli, ["comb", "--free", "2", "-o", str(target)])
    assert result.exit_code == 0, result.output
    return target


def read(path):
    return orjson.loads(path.read_bytes())


def test_comb_then_analyze(tmp_path, runner, f2_file):
    out = tmp_path / "report.json"
    result = runner.invoke(cli, ["analyze", str(f2_file), "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = read(out)
    assert report["growth_rate"] == pytest.approx(3.0, abs=1e-9)
    assert report["diagnosis"] == "semisimple"
    assert report["stationary"] == pytest.approx([0, 0.25, 0.25, 0.25, 0.25], abs=1e-9)
    assert report["large_growth"] == [0, 1, 2, 3, 4]
    assert [c["maximal"] for c in report["components"]] == [False, True]


def test_analyze_prints_json_to_stdout(runner, f2_file):
    result = runner.invoke(cli, ["analyze", str(f2_file)])
    assert result.exit_code == 0
    assert orjson.loads(result.output)["vertices"] == 5


def test_comb_raag_with_fellow_traveler_check(tmp_path, runner):
    target = tmp_path / "z2.json"
    result = runner.invoke(
        cli,
        ["comb", "--raag", "a,b", "--commute", "a-b", "--fellow-traveler", "4", "-o", str(target)],
    )
    assert result.exit_code == 0, result.output
    assert "fellow-traveler constant 3" in result.output
    doc = read(target)
    assert doc["group"] == {"kind": "raag", "generators": ["a", "b"], "commutations": [["a", "b"]]}


def test_sample_is_reproducible(tmp_path, runner, f2_file):
    first, second = tmp_path / "one.txt", tmp_path / "two.txt"
    base = ["sample", "-a", str(f2_file), "-n", "12", "-c", "50", "--seed", "3"]
    assert runner.invoke(cli, base + ["-o", str(first)]).exit_code == 0
    assert runner.invoke(cli, base + ["--jobs", "2", "-o", str(second)]).exit_code == 0
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text().splitlines()
    assert len(lines) == 50
    assert all(len(line.split()) == 12 for line in lines)


def test_sample_edge_format(tmp_path, runner, f2_file):
    target = tmp_path / "edges.txt"
    args = ["sample", "-a", str(f2_file), "-n", "3", "-c", "5", "--seed", "1", "--format", "edges"]
    assert runner.invoke(cli, args + ["-o", str(target)]).exit_code == 0
    rows = [list(map(int, line.split())) for line in target.read_text().splitlines()]
    assert all(row[0] < 4 and all(4 <= e < 16 for e in row[1:]) for row in rows)


def test_loops_and_tv(tmp_path, runner):
    gm = save_graph_structure(fixtures.golden_mean(), tmp_path / "gm.json")
    loops_out = tmp_path / "loops.json"
    result = runner.invoke(cli, ["loops", str(gm), "--cutoff", "30", "-o", str(loops_out)])
    assert result.exit_code == 0, result.output
    loops = read(loops_out)
    assert loops["vertex"] == 0
    assert [entry["word"] for entry in loops["loops"]] == ["a", "b a"]
    assert loops["identities"]["return_residual"] < 1e-6

    tv_out = tmp_path / "tv.json"
    result = runner.invoke(cli, ["tv", str(gm), "--n", "4", "--n", "8", "-o", str(tv_out)])
    assert result.exit_code == 0, result.output
    entries = read(tv_out)["entries"]
    assert [e["n"] for e in entries] == [4, 8]
    assert entries[1]["value"] < entries[0]["value"]


def test_loops_default_vertex_skips_transient_start(tmp_path, runner, f2_file):
    out = tmp_path / "loops.json"
    result = runner.invoke(cli, ["loops", str(f2_file), "--cutoff", "2", "-o", str(out)])
    assert result.exit_code == 0, result.output
    report = read(out)
    assert report["vertex"] == 1
    assert report["captured_mass"] == pytest.approx(5 / 9)


def test_clt_outputs_and_manifest(tmp_path, runner, f2_file):
    config = tmp_path / "experiment.yaml"
    config.write_text(
        yaml.safe_dump(
            {
                "automaton": "f2.json",
                "action": {"kind": "hyperplane-count", "params": {"letter": "a"}},
                "n": [20],
                "samples": 2000,
                "observables": ["displacement", "translation"],
            }
        )
    )
    report, samples, manifest = tmp_path / "r.json", tmp_path / "s.csv", tmp_path / "m.json"
    args = [
        "clt", "--config", str(config), "--seed", "4", "-o", str(report),
        "--samples-csv", str(samples), "--manifest", str(manifest),
    ]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    first = report.read_bytes()
    data = orjson.loads(first)
    assert data["seed"] == 4
    assert [run["observable"] for run in data["runs"]] == ["displacement", "translation"]

    lines = samples.read_text().splitlines()
    assert lines[0] == "index,length,observable,normalized"
    assert len(lines) == 1 + 2 * 2000

    record = read(manifest)
    assert record["subcommand"] == "clt"
    assert record["seed"] == 4
    assert record["outputs"] == [str(report), str(samples)]
    assert set(record["inputs"]) == {str(config), str(tmp_path / "f2.json")}
    assert "started_at" in record

    assert runner.invoke(cli, args).exit_code == 0
    assert report.read_bytes() == first


def test_clt_rejects_invalid_config(tmp_path):
    config = tmp_path / "bad.json"
    config.write_bytes(orjson.dumps({"automaton": "f2.json", "n": 1}))
    assert cli_main(["clt", "--config", str(config), "--seed", "1"]) == 1


def test_library_errors_exit_with_one(tmp_path, runner):
    finite = GraphStructure(2, 0, (Edge(0, 0, 1, ("x",)),), OpaqueGroup("x"))
    path = save_graph_structure(finite, tmp_path / "finite.json")
    result = runner.invoke(cli, ["analyze", str(path)])
    assert result.exit_code == 1
    assert "Error: Spectral error: finite language" in result.output


@pytest.mark.parametrize(
    "argv",
    [
        ["clt", "--config", "missing.json", "--seed", "1"],
        ["--bogus"],
        ["verify"],
        ["comb", "--free", "2", "--commute", "ab"],
        ["comb", "--free", "2", "--raag", "a,b"],
    ],
)
def test_usage_errors_exit_with_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert cli_main(argv) == 1


def test_sample_requires_seed(f2_file):
    assert cli_main(["sample", "-a", str(f2_file), "-n", "4"]) == 1


def test_verify_exit_codes(monkeypatch, capsys):
    assert cli_main(["verify", "--fixtures"]) == 0
    assert "PASS  sphere counts" in capsys.readouterr().out
    monkeypatch.setattr(verification, "CHECKS", [("always failing", lambda: (False, "no"))])
    assert cli_main(["verify", "--fixtures"]) == 2
    assert "FAIL  always failing: no" in capsys.readouterr().out


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output
