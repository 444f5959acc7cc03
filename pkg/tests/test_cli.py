import json

import pytest

from wellgeo.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, main

SPURIOUS_ZERO = {
    "expression": "((x+1)^2+y^2)*((x-1)^2+y^2)*(x^2+(y-0.5)^2)",
    "dimension": 2,
    "wells": [[-1, 0], [1, 0]],
}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_geodesic_double_well(capsys):
    code, out = run(capsys, "geodesic", "--potential", "builtin:double_well")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert abs(doc["energy"] - 2 / 3) < 2e-3
    assert doc["from"] == "p1" and doc["to"] == "p2"


def test_geodesic_unknown_well(capsys):
    code, _ = run(capsys, "geodesic", "--to", "nowhere")
    assert code == EXIT_ERROR


def test_geodesic_forced_non_convergence(capsys):
    # the straight double-well segment is already critical, so bend the problem
    code, out = run(capsys, "geodesic", "--potential", "builtin:six_well", "--to", "p3", "--max-iterations", "1",
                    "--restarts", "0")
    assert code == EXIT_NOT_CONVERGED
    assert json.loads(out)["converged"] is False


def test_bad_arguments_exit_one(capsys):
    assert main(["geodesic", "--nodes", "many"]) == EXIT_ERROR
    assert main(["geodesic", "--nodes", "2"]) == EXIT_ERROR
    assert main(["nonsense"]) == EXIT_ERROR
    assert main(["geodesic", "--potential", "builtin:no_such_thing"]) == EXIT_ERROR
    assert main(["geodesic", "--param", "eps"]) == EXIT_ERROR


def test_help_exits_zero(capsys):
    assert main(["--help"]) == EXIT_OK


@pytest.mark.parametrize(
    "param, n_profiles, obstructed",
    [("eps=0.9", 1, False), ("eps=0.3", 2, True)],
)
def test_connect_alikakos_fusco(capsys, param, n_profiles, obstructed):
    code, out = run(capsys, "connect", "--potential", "builtin:alikakos_fusco", "--param", param,
                    "--nodes", "128", "--format", "table")
    assert code == EXIT_OK
    assert out.startswith(f"profiles: {n_profiles}")
    assert ("no minimizing connection" in out) is obstructed


def test_connect_double_well_writes_profile(capsys, tmp_path):
    code, out = run(capsys, "connect", "--out", str(tmp_path))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert len(doc["profiles"]) == 1 and doc["obstructed"] is False
    assert (tmp_path / "profile_0.csv").read_text().startswith("x,u1,u2,W,ekin")
    assert (tmp_path / "curve.csv").exists()


def test_distances_two_wells(capsys):
    code, out = run(capsys, "distances", "--format", "table")
    assert code == EXIT_OK
    assert "p1-p2: STRICT" in out


def test_distances_json(capsys):
    code, out = run(capsys, "distances", "--nodes", "64")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert [p["classification"] for p in doc["obstruction"]["pairs"]] == ["STRICT"]


def test_bad_potential_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["distances", "--potential", str(bad)]) == EXIT_ERROR
    assert main(["distances", "--potential", str(tmp_path / "missing.json")]) == EXIT_ERROR
    bad.write_text(json.dumps({"expression": "x^2+", "dimension": 2, "wells": [[0, 0], [1, 0]]}))
    assert main(["distances", "--potential", str(bad)]) == EXIT_ERROR


def test_potential_file_round_trip(capsys, tmp_path):
    f = tmp_path / "dw.json"
    f.write_text(json.dumps({"expression": "(1-x^2)^2/4+y^2/2", "dimension": 2, "wells": [[-1, 0], [1, 0]]}))
    code, out = run(capsys, "geodesic", "--potential", str(f))
    assert code == EXIT_OK
    assert abs(json.loads(out)["energy"] - 2 / 3) < 2e-3


def test_sweep_without_transition(capsys):
    code, out = run(capsys, "sweep-epsilon", "--lo", "0.8", "--hi", "0.9", "--nodes", "128")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["estimate"] is None and "no transition" in doc["message"]


def test_sweep_single_point(capsys):
    code, out = run(capsys, "sweep-epsilon", "--lo", "0.5", "--hi", "0.5", "--nodes", "128")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert len(doc["points"]) == 1


def test_oracle_command(capsys, tmp_path):
    code, out = run(capsys, "oracle", "--resolution", "200", "--margin", "0.3", "--out", str(tmp_path))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert 2 / 3 * 0.98 <= doc["cost"] <= 2 / 3 * 1.09
    assert (tmp_path / "path.csv").read_text().startswith("t,x1,x2")


def test_oracle_accepts_coordinates(capsys):
    code, out = run(capsys, "oracle", "--from=-1,0", "--to", "0.5,0.5", "--resolution", "64")
    assert code == EXIT_OK and json.loads(out)["cost"] > 0


def test_oracle_bad_resolution(capsys):
    assert main(["oracle", "--resolution", "4"]) == EXIT_ERROR


def test_validate_exit_codes(capsys, tmp_path):
    assert main(["validate"]) == EXIT_OK
    f = tmp_path / "spurious.json"
    f.write_text(json.dumps(SPURIOUS_ZERO))
    assert main(["validate", "--potential", str(f)]) == EXIT_NOT_CONVERGED
    assert main(["validate", "--potential", str(tmp_path / "nope.json")]) == EXIT_ERROR


def test_outputs_are_deterministic(capsys, tmp_path):
    argv = ["geodesic", "--potential", "builtin:six_well", "--to", "p3", "--nodes", "48", "--restarts", "2",
            "--seed", "5"]
    docs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        assert main(argv + ["--out", str(out_dir)]) == EXIT_OK
        capsys.readouterr()
        docs.append(out_dir)
    for name in ("geodesic.json", "curve.csv"):
        assert (docs[0] / name).read_bytes() == (docs[1] / name).read_bytes()
    meta = json.loads((docs[0] / "metadata.json").read_text())
    assert "timestamp" in meta
    assert "timestamp" not in (docs[0] / "geodesic.json").read_text()


def test_numbers_have_twelve_significant_digits(capsys):
    _, out = run(capsys, "geodesic", "--nodes", "64")
    energy = json.loads(out)["energy"]
    assert float(f"{energy:.12g}") == energy
