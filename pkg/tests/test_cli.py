"""Command line: subcommands, output formats, config embedding and exit codes"""

import io
import json
import os

import pytest

from src.cli import EXIT_INPUT, EXIT_OK, EXIT_REFUSED, EXIT_USAGE, run
from src.henon_core import load_map_spec

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DISSIPATIVE = os.path.join(ROOT, "maps", "dissipative.json")
CONSERVATIVE = os.path.join(ROOT, "maps", "conservative.json")
CLASSICAL = os.path.join(ROOT, "maps", "classical.json")
INTRO_F = os.path.join(ROOT, "families", "intro_f.json")
INTRO_G = os.path.join(ROOT, "families", "intro_g.json")


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """No henon_config.json and no HENON_* variables leak into the tests"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("HENON_WORKERS", raising=False)
    monkeypatch.delenv("HENON_CACHE_PATH", raising=False)


def cli(*argv):
    out = io.StringIO()
    code = run(list(argv), stdout=out)
    return code, out.getvalue()


def cli_json(*argv):
    code, text = cli(*argv)
    assert code == EXIT_OK
    return json.loads(text)


def csv_rows(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_eval():
    data = cli_json("eval", "--map", DISSIPATIVE, "--point", "0,0")
    assert data["orbit"] == [["0/1", "0/1"], ["0/1", "1/2"]]
    assert data["command"] == "eval"


def test_eval_inverse():
    data = cli_json("eval", "--map", DISSIPATIVE, "--point", "0,0", "--inverse")
    assert data["orbit"][1] == ["1/1", "0/1"]


def test_output_embeds_config_and_hash():
    data = cli_json("jacobian", "--map", DISSIPATIVE, "--seed", "9")
    assert data["jacobian"] == "1/2"
    assert data["dynamical_degree"] == 2
    assert data["config"]["seed"] == 9
    assert data["map_hash"] == load_map_spec(DISSIPATIVE).canonical_hash()


def test_output_is_deterministic():
    argv = ("height", "--map", CONSERVATIVE, "--point", "0,1/3")
    assert cli(*argv) == cli(*argv)


def test_height():
    data = cli_json("height", "--map", CONSERVATIVE, "--point", "0,1/3")
    assert data["per_place"]["3"]["plus_log_p"] == "1/1"
    assert data["per_place"]["3"]["minus_log_p"] == "1/2"
    assert set(data) >= {"h_plus", "h_minus", "per_place", "error"}


def test_height_with_cache(tmp_path):
    cache = str(tmp_path / "cache.jsonl")
    first = cli_json("height", "--map", CONSERVATIVE, "--point", "0,1/3", "--cache", cache)
    second = cli_json("height", "--map", CONSERVATIVE, "--point", "0,1/3", "--cache", cache)
    assert first == second
    assert os.path.exists(cache)


def test_family_jacobian():
    data = cli_json("jacobian", "--family", INTRO_G, "--samples", "0,3/4")
    assert data["jacobian_map"] == "1/2 + 1/1*t"
    assert data["excluded"] == ["-1/2"]
    assert [s["verdict"] for s in data["dissipativity"]["samples"]] == ["dissipative", "not dissipative"]


def test_green_point_and_grid():
    data = cli_json("green", "--map", DISSIPATIVE, "--point", "1,1")
    assert data["value"] == 0.0
    assert data["escaped"] is False

    code, text = cli("green", "--map", DISSIPATIVE, "--grid", "--resolution", "2", "--format", "csv")
    assert code == EXIT_OK
    rows = csv_rows(text)
    assert rows[0] == "re,im,G_plus,G_minus,err"
    assert len(rows) == 5


def test_periodic():
    data = cli_json("periodic", "--map", DISSIPATIVE, "--max-period", "1")
    assert data["rational_points"] == [["1/2", "1/2"], ["1/1", "1/1"]]
    assert [m["prime"] for m in data["modp"]] == [101, 103]


def test_exceptional():
    data = cli_json("exceptional", "--family-f", INTRO_F, "--family-g", INTRO_G, "--max-iterate", "1")
    assert data["pairs"][0]["rational_params"] == ["0/1"]


def test_unit_locus():
    data = cli_json("unit-locus", "--family-f", INTRO_F, "--family-g", INTRO_G, "--resolution", "16")
    assert data["empty"] is True


def test_sweep_csv_out(tmp_path):
    out = tmp_path / "report.csv"
    code, _ = cli("sweep", "--family-f", INTRO_F, "--family-g", INTRO_G, "--params", "-5/2,0",
                  "--max-period", "1", "--out", str(out))
    assert code == EXIT_OK
    lines = csv_rows(out.read_text())
    assert lines[0] == "b,count,flag,max_pair_height"
    assert lines[1].startswith("-5/2,1,")
    assert lines[2].startswith("0/1,,shared-iterate")

    header = [line for line in out.read_text().splitlines() if line.startswith("#")]
    assert header[0] == "# command=sweep"
    assert json.loads(header[1][len("# config="):])["seed"] == 0
    assert header[2].startswith("# family_hash=")

    sibling = json.loads((tmp_path / "report.json").read_text())
    assert sibling["exceptional"] == ["0/1"]
    assert sibling["d_observed"] == 1


def test_usage_errors():
    assert cli()[0] == EXIT_USAGE
    assert cli("height", "--map", DISSIPATIVE)[0] == EXIT_USAGE
    assert cli("frobnicate")[0] == EXIT_USAGE


def test_invalid_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"factors": [{"poly": ["0", "1"], "delta": "1"}]}')
    assert cli("jacobian", "--map", str(bad))[0] == EXIT_INPUT
    assert cli("jacobian", "--map", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    assert cli("height", "--map", DISSIPATIVE, "--point", "1/2")[0] == EXIT_INPUT
    assert cli("jacobian", "--map", DISSIPATIVE, "--tol", "0")[0] == EXIT_INPUT


def test_refusals(tmp_path):
    assert cli("height", "--map", DISSIPATIVE, "--point", "0,2", "--eps", "1e-15")[0] == EXIT_REFUSED
    config = tmp_path / "tight.json"
    config.write_text(json.dumps({"resultant_degree_cap": 2}))
    code, _ = cli("periodic", "--map", DISSIPATIVE, "--max-period", "2",
                  "--resultant", "--config", str(config))
    assert code == EXIT_REFUSED


def test_config_file_is_read(tmp_path):
    config = tmp_path / "henon_config.json"
    config.write_text(json.dumps({"tol": 1e-6, "seed": 4}))
    data = cli_json("jacobian", "--map", DISSIPATIVE)
    assert data["config"]["tol"] == 1e-6
    assert data["config"]["seed"] == 4


def test_sweep_json_out_writes_csv_sibling(tmp_path):
    out = tmp_path / "report.json"
    code, _ = cli("sweep", "--family-f", INTRO_F, "--family-g", INTRO_G, "--params", "0",
                  "--max-period", "1", "--out", str(out))
    assert code == EXIT_OK
    assert json.loads(out.read_text())["exceptional"] == ["0/1"]
    assert csv_rows((tmp_path / "report.csv").read_text())[1].startswith("0/1,,shared-iterate")


def test_grid_csv_carries_config_and_hash():
    code, text = cli("green", "--map", DISSIPATIVE, "--grid", "--resolution", "2", "--format", "csv", "--seed", "3")
    assert code == EXIT_OK
    header = [line for line in text.splitlines() if line.startswith("#")]
    assert header[0] == "# command=green"
    assert json.loads(header[1][len("# config="):])["seed"] == 3
    assert header[2] == "# map_hash=" + load_map_spec(DISSIPATIVE).canonical_hash()


def test_measure_and_compare(tmp_path):
    data = cli_json("measure", "--map", CLASSICAL, "--period", "5")
    assert data["points"] >= 4
    assert data["low_quality"] is False
    assert data["support"]["passed"] is True

    cloud = tmp_path / "cloud.csv"
    assert cli("measure", "--map", CLASSICAL, "--period", "5", "--out", str(cloud))[0] == EXIT_OK
    text = cloud.read_text()
    assert "# period=5 seed=0" in text.splitlines()
    assert "# command=measure" in text.splitlines()

    data = cli_json("measure-compare", "--a", str(cloud), "--b", str(cloud))
    assert data["discrepancy"] == pytest.approx(0, abs=1e-6)

    data = cli_json("measure-compare", "--a", str(cloud), "--b", str(cloud),
                    "--map-a", CLASSICAL, "--map-b", CLASSICAL)
    assert data["small"] is True
    assert data["shared_iterate"] == [1, 1]


def test_curve_mass():
    with open("henon_config.json", "w") as fh:
        json.dump({"quad_points": 64}, fh)
    data = cli_json("curve-mass", "--map", DISSIPATIVE)
    assert abs(data["mass"] - 1.0) < 0.05
    assert data["regular"] is True
    assert len(data["radii"]) == 8

    data = cli_json("curve-mass", "--map", DISSIPATIVE, "--alpha", "1", "--disk", "10000,0,10")
    assert data["harmonicity_defect"] <= 1e-6


def test_common(tmp_path):
    f = tmp_path / "f.json"
    g = tmp_path / "g.json"
    f.write_text(json.dumps({"factors": [{"poly": ["-5/2", "0", "1"], "delta": "1/2"}]}))
    g.write_text(json.dumps({"factors": [{"poly": ["0", "0", "1"], "delta": "-2"}]}))
    data = cli_json("common", "--map-f", str(f), "--map-g", str(g), "--max-period", "1")
    assert data["shared_iterate"] is None
    assert data["points"] == [{"point": ["-1/1", "-1/1"], "methods": ["exact", "numeric"]}]

    data = cli_json("common", "--map-f", DISSIPATIVE, "--map-g", DISSIPATIVE, "--max-period", "1")
    assert data["shared_iterate"] == [1, 1]


def test_northcott():
    data = cli_json("northcott", "--map", DISSIPATIVE, "--bound", "3", "--max-period", "1")
    assert data["checked"] == 169
    assert data["certified_periodic"] == ["1/2,1/2", "1/1,1/1"]
    assert data["agree"] is True


@pytest.mark.parametrize("argv,field", [
    (("unit-locus", "--family-f", INTRO_F, "--family-g", INTRO_G, "--resolution", "8"), "resolution"),
    (("curve-mass", "--map", DISSIPATIVE, "--r-lo", "10", "--r-hi", "5"), "r_lo"),
    (("curve-mass", "--map", DISSIPATIVE, "--radii", "3"), "radii"),
    (("common", "--map-f", DISSIPATIVE, "--map-g", CONSERVATIVE, "--max-period", "0"), "max_period"),
    (("periodic", "--map", DISSIPATIVE, "--max-period", "0"), "max_period"),
    (("periodic", "--map", DISSIPATIVE, "--max-period", "1", "--prime", "9"), "prime"),
    (("periodic", "--map", DISSIPATIVE, "--max-period", "1", "--prime", "4"), "prime"),
    (("measure", "--map", DISSIPATIVE, "--period", "0"), "period"),
    (("sweep", "--family-f", INTRO_F, "--family-g", INTRO_G, "--params", "0", "--max-period", "0"), "max_period"),
    (("northcott", "--map", DISSIPATIVE, "--bound", "0"), "bound"),
])
def test_out_of_range_arguments_exit_2(argv, field, capsys):
    code, text = cli(*argv)
    assert code == EXIT_INPUT
    assert text == ""
    assert f"[field: {field}]" in capsys.readouterr().err


def test_library_value_errors_exit_2(capsys):
    # the grid resolution floor is only enforced inside green_grid
    code, _ = cli("green", "--map", DISSIPATIVE, "--grid", "--resolution", "1")
    assert code == EXIT_INPUT
    assert "resolution" in capsys.readouterr().err
