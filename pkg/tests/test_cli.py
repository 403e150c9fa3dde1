import json
import subprocess
import sys

import pytest

from bubblereduce.cli import EXIT_CERT, EXIT_OK, EXIT_USAGE, energy_map, main
from bubblereduce.model_core import Bubble, model_to_dict
from bubblereduce.reduction import ConcentrationAnsatz
from bubblereduce.residual import energy, energy_excess

from conftest import maxpoint_model, symmetric_landscape


@pytest.fixture
def land_cfg(tmp_path):
    path = tmp_path / "land.json"
    path.write_text(json.dumps(model_to_dict(symmetric_landscape())))
    return str(path)


def run(argv, tmp_path, name="out.txt"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, out.read_text() if out.exists() else ""


def rows_of(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return lines[0].split(","), [l.split(",") for l in lines[1:]]


@pytest.mark.parametrize("argv", [
    [],
    ["--bogus"],
    ["constants", "--dims", "4,3"],
    ["check-lemma", "--dims", "4,3,1"],
    ["check-lemma", "--lemma", "9.9", "--dims", "4,3,1"],
    ["transform-demo", "--profile", "nope"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err.lower()


def test_missing_and_malformed_config_exit_2(tmp_path):
    assert main(["solve-reduced", "--config", str(tmp_path / "none.json"), "--epsilon", "1e-3"]) \
        == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve-reduced", "--config", str(bad), "--epsilon", "1e-3"]) == EXIT_USAGE
    bad.write_text(json.dumps({"N": 5, "k": 4, "h": 1, "model": "maxpoint"}))
    assert main(["energy-map", "--config", str(bad)]) == EXIT_USAGE


def test_perturbative_route_needs_epsilon(land_cfg):
    assert main(["solve-reduced", "--config", land_cfg]) == EXIT_USAGE
    assert main(["energy-map", "--config", land_cfg, "--grid", "1"]) == EXIT_USAGE
    assert main(["residual-sweep", "--config", land_cfg]) == EXIT_USAGE


def test_constants_table(tmp_path):
    code, text = run(["constants", "--dims", "4,3,1", "--gamma", "1.5"], tmp_path)
    assert code == EXIT_OK
    assert "# sign_ledger: pass" in text
    cols, rows = rows_of(text)
    assert cols[:5] == ["N", "k", "h", "gamma", "name"]
    assert {r[4] for r in rows} >= {"b1", "b2", "b3", "b4"}
    assert all(float(r[cols.index("rel_diff")]) < 1e-5 for r in rows)


def test_constants_fail_on_impossible_tolerance(tmp_path):
    code, text = run(["constants", "--dims", "4,3,1", "--gamma", "1.5", "--tol", "1e-300"],
                     tmp_path)
    assert code == EXIT_CERT


def test_check_lemma_interaction(tmp_path):
    code, text = run(["check-lemma", "--lemma", "5.1", "--dims", "4,3,1"], tmp_path)
    assert code == EXIT_OK
    assert "# lemma: 5.1" in text
    cols, rows = rows_of(text)
    assert [float(r[0]) for r in rows] == [10.0, 20.0, 40.0, 80.0]


def test_transform_demo_roundtrip(tmp_path):
    code, text = run(["transform-demo", "--profile", "power2"], tmp_path)
    assert code == EXIT_OK
    cols, rows = rows_of(text)
    for r in rows:
        assert float(r[cols.index("psi_roundtrip")]) == pytest.approx(float(r[2]), rel=1e-12)


def test_solve_reduced_json(land_cfg, tmp_path):
    code, text = run(["solve-reduced", "--config", land_cfg, "--epsilon", "1e-3"], tmp_path)
    assert code == EXIT_OK
    doc = json.loads(text)
    assert doc["certificates"]["degree"] == -1
    lams = [b["lambda"] for b in doc["bubbles"]]
    assert lams[0] == pytest.approx(lams[1], rel=1e-12)


def test_solve_reduced_rejects_thm24_flag_for_perturbative(land_cfg):
    assert main(["solve-reduced", "--config", land_cfg, "--epsilon", "1e-3", "--thm24"]) \
        == EXIT_USAGE


def test_output_is_deterministic(land_cfg, tmp_path):
    argv = ["energy-map", "--config", land_cfg, "--epsilon", "1e-2", "--grid", "2",
            "--range", "0.5,2"]
    a = run(argv, tmp_path, "a.txt")
    b = run(argv, tmp_path, "b.txt")
    assert a[0] == b[0] == EXIT_OK
    assert a[1] == b[1]


def test_energy_map_single_cell_equals_energy():
    land = symmetric_landscape()
    header, cols, rows = energy_map(land, 1e-2, grid=1, trange=(1.0, 1.0))
    assert len(rows) == 1
    l1, l2, e, ex = rows[0]
    assert l1 == l2 == pytest.approx(100.0)
    model = land.with_epsilon(1e-2)
    a = ConcentrationAnsatz(tuple(Bubble(p.dims, p.center, lam)
                                  for p, lam in zip(land.points, (l1, l2))), levels=(1.0, 1.0),
                            anchors=[p.center for p in land.points])
    assert ex == pytest.approx(energy_excess(a, model), rel=1e-10)
    assert e == pytest.approx(energy(a, model), rel=1e-10)


def test_energy_map_symmetric_under_swap():
    header, cols, rows = energy_map(symmetric_landscape(), 1e-2, grid=3, trange=(0.5, 2.0))
    table = {(round(r[0], 9), round(r[1], 9)): r[3] for r in rows}
    for (a, b), v in table.items():
        assert table[(b, a)] == pytest.approx(v, rel=1e-9, abs=1e-12)
    assert any(h.startswith("minimum_cell:") for h in header)


def test_energy_map_maxpoint_separation(tmp_path):
    path = tmp_path / "mp.json"
    path.write_text(json.dumps(model_to_dict(maxpoint_model(50.0))))
    code, text = run(["energy-map", "--config", str(path), "--separation", "80", "--grid", "1"],
                     tmp_path)
    assert code == EXIT_OK
    assert "# separation: 80.0" in text


def test_console_module_entry(tmp_path):
    out = tmp_path / "t.csv"
    proc = subprocess.run([sys.executable, "-m", "bubblereduce.cli", "transform-demo",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK
    assert out.read_text().startswith("# profile: bubble1")
