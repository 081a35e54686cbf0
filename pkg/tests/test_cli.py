import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from wkbcover.cli import main

DEMO = Path(__file__).resolve().parents[1] / "demos" / "configs"


@pytest.fixture
def runner():
    return CliRunner()


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _n4(tmp_path, **changes):
    doc = json.loads((DEMO / "n4_reference.json").read_text())
    for k, v in changes.items():
        if isinstance(v, dict):
            doc[k] = {**doc.get(k, {}), **v}
        else:
            doc[k] = v
    return _write(tmp_path, doc)


def test_cover_n3_and_svg(runner, tmp_path):
    res = runner.invoke(main, ["cover", "--config", str(DEMO / "n3_minimal.json"), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "cover.json").read_text())
    assert len(doc["cover"]["turning_points"]) == 2
    svg = (tmp_path / "cover.svg").read_text()
    for gid in ("cycles", "cuts", "turning-points", "punctures"):
        assert f'id="{gid}"' in svg
    assert svg.count('class="turning-point"') == 2
    assert svg.count('class="puncture"') == 3
    assert svg.count('class="cut"') == 1


def test_duplicate_punctures_exit_2(runner, tmp_path):
    cfg = _write(tmp_path, {"schema_version": 1, "spec": {"z": [-1, 1, -1], "r": [1, 1, 1]}})
    res = runner.invoke(main, ["cover", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code == 2
    assert "error" in res.output


def test_schema_violation_exit_2(runner, tmp_path):
    cfg = _write(tmp_path, {"schema_version": 1, "spec": {"z": [-1, 1], "r": "x"}})
    res = runner.invoke(main, ["periods", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code == 2


def test_wkb_order_labels_and_exact_checks(runner, tmp_path):
    res = runner.invoke(main, ["wkb", "--config", str(DEMO / "n3_minimal.json"), "--out", str(tmp_path),
                               "--order", "2", "--exact"])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "wkb.json").read_text())
    assert doc["voros"]["orders"] == [-1, 0, 1, 2]
    assert all(doc["exact_checks"]["symmetric_identity_zero"].values())
    assert all(doc["exact_checks"]["turning_residue_zero"].values())


def test_periods_deterministic(runner, tmp_path):
    cfg = str(DEMO / "n3_minimal.json")
    docs = []
    for sub in ("a", "b"):
        res = runner.invoke(main, ["periods", "--config", cfg, "--out", str(tmp_path / sub)])
        assert res.exit_code == 0, res.output
        d = json.loads((tmp_path / sub / "periods.json").read_text())
        d["meta"].pop("timestamp")
        docs.append(d)
    assert docs[0] == docs[1]


@pytest.mark.slow
def test_gterms_without_q1(runner, tmp_path):
    cfg = _n4(tmp_path, spec={"Q1": None})
    res = runner.invoke(main, ["gterms", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "gterms.json").read_text())
    assert doc["G_minus1"] == [0.0, 0.0] and doc["G_one"] == [0.0, 0.0]


@pytest.mark.slow
def test_monodromy_grid(runner, tmp_path):
    cfg = _n4(tmp_path)
    res = runner.invoke(main, ["monodromy", "--config", cfg, "--out", str(tmp_path),
                               "--hbar-grid", "0.2,0.1,0.05,0.025", "--order", "2"])
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "monodromy.json").read_text())
    assert doc["representation"]["relation_defect"] < 1e-8
    for item in doc["punctures"]:
        assert abs(item["scaling_fit"]["slope"] - 3) < 0.45


def test_monodromy_bad_grid(runner, tmp_path):
    res = runner.invoke(main, ["monodromy", "--config", _n4(tmp_path), "--out", str(tmp_path),
                               "--hbar-grid", "0.1,0.2"])
    assert res.exit_code == 2


def test_verify_closedness(runner, tmp_path):
    res = runner.invoke(main, ["verify", "--suite", "closedness", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert "[PASS]  8" in res.output and "control" in res.output
    assert json.loads((tmp_path / "verify.json").read_text())["results"][0]["passed"]


@pytest.mark.slow
def test_verify_recursion_exact_reports_failure(runner, tmp_path):
    # criterion 1 fails on the literal v_2 closed form; verify must say so and exit 4
    res = runner.invoke(main, ["verify", "--suite", "recursion-exact", "--out", str(tmp_path)])
    assert res.exit_code == 4
    assert "[FAIL]  1" in res.output
    assert "[PASS]  2" in res.output and "[PASS]  3" in res.output


def test_verify_unknown_suite(runner, tmp_path):
    res = runner.invoke(main, ["verify", "--suite", "nope", "--out", str(tmp_path)])
    assert res.exit_code == 2
