import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from twotls.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, PRESETS, main, parse_sweep


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def test_spectrum_csv(capsys):
    phi = -math.atan(0.4)
    code, out, _ = run(["spectrum", "--g2", "1", "--delta", "0.4", "--phi", repr(phi),
                        "--sweep", "omega:-1:1:3", "--format", "csv"], capsys)
    assert code == EXIT_OK
    assert out.startswith("# config: ")
    table = rows(out)
    assert len(table) == 3
    # unit transmission at w = 0 on the ridge
    assert float(table[1]["T"]) == pytest.approx(1.0, abs=1e-12)


def test_json_carries_config(capsys):
    code, out, _ = run(["spectrum", "--g2", "2", "--sweep", "omega:-1:1:5", "--format", "json"], capsys)
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["config"]["g2"] == 2.0 and len(data["results"]) == 5


def test_deterministic_output(capsys):
    argv = ["two-photon", "--geometry", "copropagating", "--grid-n", "256", "--sweep", "phi:1:2:2"]
    first = run(argv, capsys)[1]
    assert first == run(argv, capsys)[1]


def test_config_round_trip(tmp_path, capsys):
    out = tmp_path / "run.json"
    assert run(["two-photon", "--preset", "fig6", "--grid-n", "256", "--sweep", "phi:1:2:2",
                "--format", "json", "--out", str(out)], capsys)[0] == EXIT_OK
    first = json.loads(out.read_text())
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(first["config"]))
    again = tmp_path / "again.json"
    assert run(["two-photon", "--config", str(cfg), "--out", str(again), "--jobs", "2"], capsys)[0] == EXIT_OK
    second = json.loads(again.read_text())
    assert second["results"] == first["results"]


def test_csv_file_gets_config_sibling(tmp_path, capsys):
    out = tmp_path / "map.csv"
    code, _, _ = run(["map", "--sweep", "phi:0:3:2", "--sweep", "g2T:1:2:2", "--format", "csv",
                      "--out", str(out)], capsys)
    assert code == EXIT_OK
    assert len(list(csv.DictReader(out.open()))) == 4
    assert json.loads((tmp_path / "map.csv.config.json").read_text())["command"] == "map"


def test_flags_override_preset(capsys):
    data = json.loads(run(["map", "--preset", "fig5b", "--g2", "2", "--sweep", "phi:0:1:2",
                           "--sweep", "g2T:1:2:2", "--format", "json"], capsys)[1])
    assert data["config"]["preset"] == "fig5b" and data["config"]["g2"] == 2.0


def test_flat_window_map_anchor(capsys):
    # [PAPER] panel (c): unit transmission at Delta = g2, phi = 3 pi/2
    data = json.loads(run(["map", "--preset", "fig5c", "--sweep", f"phi:{1.5 * math.pi}:{1.5 * math.pi}:1",
                           "--sweep", "g2T:10:10:1", "--format", "json"], capsys)[1])
    assert data["results"][0]["transmission"] == pytest.approx(1.0, abs=1e-6)


def test_counterpropagating_preset(capsys):
    # [PAPER] photons leave in opposite directions at phi = 3 pi/2
    data = json.loads(run(["two-photon", "--preset", "fig7", "--grid-n", "1024",
                           "--sweep", f"phi:{1.5 * math.pi}:{1.5 * math.pi}:1", "--format", "json"], capsys)[1])
    assert data["results"][0]["P_opposite"] == pytest.approx(1.0, abs=1e-3)


def test_dump_writes_arrays(tmp_path, capsys):
    code, _, _ = run(["two-photon", "--grid-n", "128", "--phi", "1", "--dump", str(tmp_path)], capsys)
    assert code == EXIT_OK
    files = sorted(p.name for p in tmp_path.glob("*.npy"))
    assert files == ["point00000_cc.npy", "point00000_dd.npy"]
    assert np.all(np.load(tmp_path / files[0]) >= 0)


def test_optimize_reports_trace(capsys):
    code, out, _ = run(["optimize", "--objective", "sorter", "--grid-n", "256", "--g2", "0",
                        "--sweep", "phi:0:6:3", "--budget", "20"], capsys)
    data = json.loads(out)
    assert code == EXIT_OK
    assert data["results"]["value"] == 0.0 and data["results"]["trace"]


def test_presets_resolve(capsys):
    for name in PRESETS:
        # invalid sweep is rejected after the preset is resolved
        code, _, err = run([_command_of(name), "--preset", name, "--sweep", "nonsense:0:1:2"], capsys)
        assert code == EXIT_USAGE and "nonsense" in err


def _command_of(preset):
    return {"fig3": "spectrum", "fig4": "spectrum"}.get(preset, "map" if preset.startswith("fig5") else "two-photon")


@pytest.mark.parametrize("argv", [
    ["two-photon", "--T", "0"],
    ["two-photon", "--grid-n", "8"],
    ["map", "--sweep", "phi:0:1:2"],
    ["spectrum", "--sweep", "omega:1:1:5"],
    ["two-photon", "--non-markov"],
    ["map", "--preset", "fig99"],
    ["optimize"],
    ["unknown"],
])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == EXIT_USAGE


def test_numerical_precondition(capsys):
    code, _, err = run(["two-photon", "--g2", "50", "--grid-n", "64"], capsys)
    assert code == EXIT_NUMERICAL and "numerical precondition" in err


def test_validation_failure_exit(capsys):
    # the reference integrator refuses a grid this coarse
    code, out, err = run(["validate", "--suites", "oracle", "--oracle-n", "128"], capsys)
    assert code == EXIT_VALIDATION
    assert json.loads(out)["results"]["passed"] is False
    assert "FAILED oracle" in err


def test_validation_pass(capsys):
    code, out, _ = run(["validate", "--suites", "unitarity", "cavity"], capsys)
    assert code == EXIT_OK and json.loads(out)["results"]["passed"]


def test_parse_sweep():
    axis = parse_sweep("phi:0:6.28:100")
    assert (axis.name, axis.lo, axis.hi, axis.n) == ("phi", 0.0, 6.28, 100)
    for bad in ("phi:0:1", "phi:a:1:2", "phi:0:1:0", "phi:0:nan:3"):
        with pytest.raises(ValueError):
            parse_sweep(bad)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "twotls", "spectrum", "--sweep", "omega:0:1:2", "--format",
                           "csv"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "omega" in proc.stdout
