import json
import re
import subprocess
import sys

import pytest

from gproa import __version__
from gproa.cli import EXIT_CONFIG, EXIT_INVALID, EXIT_OK, EXIT_UNSTABLE, bundled, main
from gproa.io import fmt, read_csv

BISTABLE = str(bundled("bistable.json"))
BISTABLE_ASSESS = str(bundled("bistable_assess.json"))


def ieee9_dict():
    return json.loads(bundled("ieee9_microgrid.json").read_text())


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_fmt():
    assert fmt(0.1 + 0.2) == "0.3"
    assert fmt(1 / 3) == "0.333333333333333"
    assert fmt(-0.0) == "0"
    assert fmt(True) == "1" and fmt(None) == ""
    assert fmt(376.99111843077515) == "376.991118430775"


def test_validate_bundled_passes(capsys):
    assert main(["validate", "--model", "ieee9"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 4


def test_validate_negative_gain(tmp_path, capsys):
    d = ieee9_dict()
    d["gains"][2]["KQ"] = -0.2
    assert main(["validate", "--model", write(tmp_path, "m.json", d)]) == EXIT_INVALID
    assert "KQ of bus 3" in capsys.readouterr().out


def test_validate_disconnected(tmp_path, capsys):
    d = ieee9_dict()
    d["branches"] = [b for b in d["branches"] if {b["from"], b["to"]} != {3, 6}]
    assert main(["validate", "--model", write(tmp_path, "m.json", d)]) == EXIT_INVALID
    assert "disconnected" in capsys.readouterr().out


def test_validate_controller_graph(tmp_path, capsys):
    d = ieee9_dict()
    d["laplacian"] = [[0, 0, 0], [0, 1, -1], [0, -1, 1]]
    assert main(["validate", "--model", write(tmp_path, "m.json", d)]) == EXIT_INVALID
    assert "rank" in capsys.readouterr().out


def test_malformed_json(tmp_path, capsys):
    path = write(tmp_path, "m.json", '{"buses": 9,')
    assert main(["simulate", "--model", path, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "malformed JSON" in capsys.readouterr().err


def test_missing_key_named(tmp_path, capsys):
    d = ieee9_dict()
    del d["set_points"]
    path = write(tmp_path, "m.json", d)
    assert main(["simulate", "--model", path, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "set_points" in capsys.readouterr().err


def test_simulate_outage(tmp_path):
    assert main(["simulate", "--model", "ieee9", "--out", str(tmp_path), "--seed", "7"]) == EXIT_OK
    header, cols, rows = read_csv(tmp_path / "trajectory.csv")
    assert re.fullmatch(rf"# gproa {__version__} config_sha256=[0-9a-f]{{64}} seed=7", header)
    assert cols == ["t"] + [f"x_{i}" for i in range(1, 13)]
    assert len(rows) == 2001
    last = [float(v) for v in rows[-1][1:]]
    assert max(abs(v) for v in last) < 1e-3
    raw = (tmp_path / "trajectory.csv").read_bytes()
    assert b"\r" not in raw


def test_simulate_without_disturbance_is_constant(tmp_path):
    assert main(["simulate", "--model", "ieee9", "--out", str(tmp_path), "--no-disturbance",
                 "--t-n", "2"]) == EXIT_OK
    _, _, rows = read_csv(tmp_path / "trajectory.csv")
    assert all(abs(float(v)) < 1e-9 for r in rows for v in r[1:])


def test_simulate_flag_override(tmp_path):
    # scale 1 means no change at all, whatever the configured branch
    assert main(["simulate", "--model", "ieee9", "--out", str(tmp_path), "--scale", "1",
                 "--t-n", "3"]) == EXIT_OK
    _, _, rows = read_csv(tmp_path / "trajectory.csv")
    assert all(abs(float(v)) < 1e-9 for r in rows for v in r[1:])


def test_assess_file_contract(tmp_path):
    out = tmp_path / "run"
    assert main(["assess", "--model", BISTABLE, "--assess", BISTABLE_ASSESS, "--steps", "4",
                 "--out", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names == ["log.csv", "roa_0001.csv", "roa_0002.csv", "roa_0003.csv", "roa_0004.csv",
                     "snapshot.json"]
    header, cols, rows = read_csv(out / "roa_0004.csv")
    assert cols == ["step", "x_axis", "y_axis", "mu", "sigma", "member"] and len(rows) == 101
    assert all(r[2] == "0" for r in rows)
    lh, lcols, lrows = read_csv(out / "log.csv")
    assert lh == header and lcols == ["step", "x_1", "accepted", "v_hat", "wall_ms"]
    assert all(r[-1] == "" for r in lrows)
    snap = json.loads((out / "snapshot.json").read_text())
    assert snap["header"] == header and snap["iteration"] == 4


def test_assess_delta_override(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["assess", "--model", BISTABLE, "--assess", BISTABLE_ASSESS, "--steps", "1",
          "--out", str(a)])
    main(["assess", "--model", BISTABLE, "--assess", BISTABLE_ASSESS, "--steps", "1",
          "--delta", "0.5", "--out", str(b)])
    assert (a / "roa_0001.csv").read_bytes() != (b / "roa_0001.csv").read_bytes()


def test_assess_timing_flag(tmp_path):
    main(["assess", "--model", BISTABLE, "--assess", BISTABLE_ASSESS, "--steps", "1",
          "--out", str(tmp_path), "--timing"])
    _, _, rows = read_csv(tmp_path / "log.csv")
    assert all(float(r[-1]) > 0 for r in rows)


def test_assess_unstable_equilibrium(tmp_path):
    model = write(tmp_path, "m.json", {"type": "builtin", "system": "linear_decay",
                                       "params": {"rate": -1.0}})
    assert main(["assess", "--model", model, "--assess", BISTABLE_ASSESS,
                 "--out", str(tmp_path / "o")]) == EXIT_UNSTABLE


def test_assess_bad_override(tmp_path):
    assert main(["assess", "--model", BISTABLE, "--assess", BISTABLE_ASSESS, "--delta", "2",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_builtin(tmp_path, capsys):
    model = write(tmp_path, "m.json", {"type": "builtin", "system": "nope"})
    assert main(["validate", "--model", model]) == EXIT_CONFIG
    assert "system" in capsys.readouterr().err


def test_resume_matches_uninterrupted(tmp_path):
    full, part = tmp_path / "full", tmp_path / "part"
    common = ["assess", "--model", BISTABLE, "--assess", BISTABLE_ASSESS]
    assert main(common + ["--steps", "6", "--out", str(full)]) == EXIT_OK
    assert main(common + ["--steps", "3", "--out", str(part)]) == EXIT_OK
    assert main(common + ["--steps", "3", "--out", str(part), "--resume",
                          str(part / "snapshot.json")]) == EXIT_OK
    for k in range(1, 7):
        name = f"roa_{k:04d}.csv"
        assert (full / name).read_bytes() == (part / name).read_bytes()
    assert (full / "snapshot.json").read_bytes() == (part / "snapshot.json").read_bytes()


def test_console_script_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gproa.cli", "validate", "--model", "ieee9"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    d = ieee9_dict()
    d["gains"][0]["KP"] = -3
    r = subprocess.run([sys.executable, "-m", "gproa.cli", "validate", "--model",
                        write(tmp_path, "bad.json", d)], capture_output=True, text=True)
    assert r.returncode == 5 and "KP of bus 1" in r.stdout
