import csv
import json

import pytest

from nehari_forge.cli import main
from nehari_forge.runner import extrema_for_comparison, reproduce


def write(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


RECT = {"type": "rectangle", "x0": 0, "x1": 2, "y0": 0, "y1": 1}


def test_solve_preset(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--preset", "square-negconst", "--out", str(out), "--resolution", "16", "--quiet"]) == 0
    for f in ("manifest.json", "field_gs.csv", "field_lens.csv", "contours_gs.svg", "contours_lens.svg",
              "contours_gs.csv", "symmetry.json"):
        assert (out / f).exists(), f
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok"
    assert set(m["solutions"]) == {"gs", "lens"}
    assert m["solutions"]["gs"]["morse_index"] == 1 and m["solutions"]["lens"]["morse_index"] == 2
    assert len(m["config_hash"]) == 64
    assert not list(out.glob("*.tmp"))


def test_invalid_p_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, {"domain": RECT, "potential": "0", "p": 1.5})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"


def test_eigs_piecewise(tmp_path):
    cfg = write(tmp_path, {"domain": RECT, "potential": "10*step(x-1)", "mode": "eigs"})
    out = tmp_path / "o"
    assert main(["eigs", "--config", cfg, "--out", str(out), "--resolution", "16", "--quiet"]) == 0
    spec = json.loads((out / "spectrum.json").read_text())
    assert spec["unique_principal"] is True
    assert spec["assumptions"]["positive_definite"] is True


def test_solver_failure_exit_1(tmp_path):
    cfg = write(tmp_path, {"domain": RECT, "potential": "0", "mode": "lens", "seed_lens": "x*(2-x)*y*(1-y)"})
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out), "--resolution", "8", "--quiet"]) == 1
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "failed" and m["errors"]["lens"]["class"] == "PartVanished"


def test_missing_seed_is_config_error(tmp_path):
    cfg = write(tmp_path, {"domain": RECT, "potential": "0", "mode": "gs"})
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_symmetry_command(tmp_path):
    out = tmp_path / "o"
    main(["solve", "--preset", "rect-step10", "--out", str(out), "--resolution", "16", "--quiet"])
    sym = tmp_path / "s"
    args = ["symmetry", "--preset", "rect-step10", "--field", str(out / "field_gs.csv"), "--out", str(sym), "--quiet"]
    assert main(args) == 0
    rep = json.loads((sym / "symmetry.json").read_text())
    assert [t["transform"] for t in rep["transforms"]] == ["reflect-x"]
    assert rep["transforms"][0]["classification"] == "even"


def test_continuation_command(tmp_path):
    out = tmp_path / "o"
    assert main(["continuation", "--preset", "square-negconst", "--out", str(out), "--resolution", "16", "--quiet"]) == 0
    rows = list(csv.DictReader((out / "continuation.csv").open()))
    assert [float(r["p"]) for r in rows] == [3.0, 2.5, 2.2, 2.1, 2.05, 2.02]


def test_deterministic_fields(tmp_path):
    for k in (1, 2):
        main(["solve", "--preset", "disk-shifted", "--out", str(tmp_path / f"o{k}"), "--resolution", "8", "--quiet"])
    for f in ("field_gs.csv", "field_lens.csv"):
        assert (tmp_path / "o1" / f).read_bytes() == (tmp_path / "o2" / f).read_bytes()


def test_reproduce_table(tmp_path):
    rows, _ = reproduce(tmp_path, resolution=16, names=["square-negconst", "rect-step35"])
    by = {(r["preset"], r["solution"], r["quantity"]): r for r in rows}
    gs = by[("square-negconst", "gs", "max")]
    assert gs["reference"] == 2.18 and abs(gs["deviation_pct"]) < 10
    assert "reflect-x: broken" in by[("rect-step35", "lens", "energy")]["symmetry"]
    assert (tmp_path / "reproduce_table.csv").exists()


def test_sign_flip_comparison():
    class R:
        mode, u_min, u_max, energy = "lens", -6.5, 8.7, 1.0

    v = extrema_for_comparison(R(), {"min": -8.67, "max": 6.53})
    assert v["min"] == -8.7 and v["max"] == 6.5


@pytest.mark.parametrize("argv", [["solve"], ["solve", "--out", "x"], ["frobnicate"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
