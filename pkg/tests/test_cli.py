import json

import pytest

from inst3d.cli import main


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_synth_run_round_trip(workdir, capsys):
    assert main(["synth", "--seed", "1", "--instances", "3", "--frames", "4", "--points", "40",
                 "--out", "scene.json"]) == 0
    (workdir / "cfg.json").write_text(json.dumps({"D": 12, "D3d": 6, "D2d": 8, "K": 2, "heads": 2,
                                                  "isr_heads": 2, "n_scene_tokens": 2}))
    args = ["run", "--scene", "scene.json", "--config", "cfg.json", "--out", "b1.bin", "--report", "r.json",
            "--figures", "figs"]
    assert main(args) == 0
    assert "ours=5" in capsys.readouterr().out
    report = json.loads((workdir / "r.json").read_text())
    assert report["tokens"]["total"] == 5 and report["schema_version"] == 1
    assert sorted(p.name for p in (workdir / "figs").iterdir()) == ["omega.png", "token_counts.png",
                                                                    "view_counts.png"]
    assert main(["run", "--scene", "scene.json", "--config", "cfg.json", "--out", "b2.bin"]) == 0
    assert (workdir / "b1.bin").read_bytes() == (workdir / "b2.bin").read_bytes()


def test_bad_inputs_exit_nonzero(workdir):
    assert main(["run", "--scene", "missing.json", "--out", "x.bin"]) == 2
    (workdir / "g.json").write_text(json.dumps({"variants": [{"name": "a", "fusion": "qformer"}]}))
    assert main(["ablate", "--grid", "g.json"]) == 2


def test_verify_fault_exit_status(workdir, capsys):
    assert main(["verify", "--suite", "invariants", "--fault", "spatial-antisymmetry", "--report", "v.json"]) == 1
    assert "spatial.antisymmetric_channels" in capsys.readouterr().err
    assert json.loads((workdir / "v.json").read_text())["passed"] is False
    assert main(["verify", "--suite", "oracles"]) == 0


def test_ablate(workdir, capsys):
    (workdir / "g.json").write_text(json.dumps({
        "scenes": [{"seed": 0, "instances": 3, "frames": 4}],
        "base": {"D": 12, "D3d": 6, "D2d": 8, "K": 2, "heads": 2, "isr_heads": 2},
        "variants": [{"name": "mcmf"}, {"name": "parallel", "fusion": "parallel"}]}))
    assert main(["ablate", "--grid", "g.json", "--out-dir", "out"]) == 0
    assert "parallel" in capsys.readouterr().out
    assert {p.name for p in (workdir / "out").iterdir()} == {"ablation.csv", "ablation.json", "ablation.png"}
