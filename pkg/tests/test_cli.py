from __future__ import annotations

import json

import numpy as np
import pytest

from triparabola import cli as cli_mod
from triparabola.cli import load_mask, main, parse_range, read_config, save_mask_csv
from triparabola.roth import corner_membership, fixture_mask


def run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_parse_range_forms():
    assert parse_range("4..7") == [4, 5, 6, 7]
    assert parse_range("2,5,7") == [2, 5, 7]
    assert parse_range("3") == [3]
    with pytest.raises(Exception):
        parse_range("7..4")


def test_read_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# defaults\ntrials = 3\nwhich-arg = 2  # inline\n")
    assert read_config(p) == {"trials": "3", "which_arg": "2"}
    p.write_text("oops\n")
    with pytest.raises(Exception, match="key = value"):
        read_config(p)


def test_multiplier_scan_report_is_deterministic(capsys):
    argv = ["multiplier-scan", "--path", "non_stationary", "--grid-log2", "1..6"]
    c1, o1, _ = run(argv, capsys)
    c2, o2, _ = run(argv, capsys)
    assert c1 == c2 == 0 and o1 == o2
    rep = json.loads(o1)
    assert rep["schema"] == 1 and rep["command"] == "multiplier-scan"
    assert len(rep["result"]["rows"]) == 6 and "fit" in rep["result"]


def test_out_dir_files_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["--out", str(d), "prune", "--seed", "3"], capsys)[0] == 0
    for name in ("prune.json", "prune.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = json.loads((a / "prune.json").read_text())
    assert len(rep["result"]["selected"]) <= rep["result"]["window_bound"]


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("seed = 5\nrho = 0.2\n")
    _, out, _ = run(["--config", str(cfg), "prune"], capsys)
    conf = json.loads(out)["config"]
    assert conf["seed"] == 5 and conf["rho"] == 0.2
    _, out, _ = run(["--config", str(cfg), "prune", "--seed", "9"], capsys)
    conf = json.loads(out)["config"]
    assert conf["seed"] == 9 and conf["rho"] == 0.2


def test_usage_errors_exit_1(capsys):
    assert run(["multiplier-scan", "--grid-log2", "x..y"], capsys)[0] == 1
    assert run(["no-such-command"], capsys)[0] == 1
    assert run(["sublevel-mc", "--alpha", "0.5"], capsys)[0] == 1
    assert run(["refine", "--density", "2"], capsys)[0] == 1


def test_failed_check_exits_2(capsys, monkeypatch):
    from triparabola import sublevel

    monkeypatch.setattr(sublevel.RefinementCascade, "bound_check", lambda self: {"E1": False})
    code, out, err = run(["refine", "--resolution", "16", "--density", "0.5"], capsys)
    assert code == 2 and "cascade inequality failed" in err
    assert json.loads(out)["result"]["checks"] == {"E1": False}


def test_mask_csv_roundtrip(tmp_path):
    m = np.zeros((4, 4), dtype=bool)
    m[0, 3] = m[1, 0] = True
    p = tmp_path / "m.csv"
    save_mask_csv(m, p)
    assert np.array_equal(load_mask(p), m)
    # first file row is the top (largest y)
    assert p.read_text().splitlines()[0] == "1,0,0,0"


def test_pgm_masks(tmp_path):
    m = fixture_mask("square", 16)
    img = (m.T[::-1] * 255).astype(np.uint8)
    p5 = tmp_path / "m.pgm"
    p5.write_bytes(b"P5\n# mask\n16 16\n255\n" + img.tobytes())
    p2 = tmp_path / "m2.pgm"
    p2.write_text("P2\n16 16\n255\n" + "\n".join(" ".join(map(str, r)) for r in img) + "\n")
    assert np.array_equal(load_mask(p5), m) and np.array_equal(load_mask(p2), m)
    bad = tmp_path / "bad.csv"
    bad.write_text("1,0\n")
    with pytest.raises(Exception, match="square"):
        load_mask(bad)


def test_roth_find_on_strip(tmp_path, capsys):
    S = fixture_mask("strip", 256)
    p = tmp_path / "strip.csv"
    save_mask_csv(S, p)
    code, out, _ = run(["roth-find", "--mask", str(p), "--epsilon", f"{S.mean():.6f}"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    x, y, t = res["corner"]
    assert res["found"] and t > 0 and all(corner_membership(S, x, y, t))


def test_roth_find_density_too_high(tmp_path, capsys):
    p = tmp_path / "strip.csv"
    save_mask_csv(fixture_mask("strip", 64), p)
    code, _, err = run(["roth-find", "--mask", str(p), "--epsilon", "0.5"], capsys)
    assert code == 1 and "error" in err


def test_corner_count_split(tmp_path, capsys):
    p = tmp_path / "sq.csv"
    save_mask_csv(fixture_mask("square", 256), p)
    code, out, _ = run(["corner-count", "--mask", str(p), "--k", "4", "--kL", "2", "--kH", "6"], capsys)
    assert code == 0
    res = json.loads(out)["result"]
    sp = res["split"]
    assert sp["defect"] <= 1e-6 * abs(sp["I"])
    assert run(["corner-count", "--mask", str(p), "--k", "4"], capsys)[0] == 1


def test_sublevel_and_decay_commands(capsys):
    code, out, _ = run(["sublevel-mc", "--alpha", "0.3", "--beta", "0.4", "--samples", "10000"], capsys)
    assert code == 0
    lo, hi = json.loads(out)["result"]["ci95"]
    assert 0 <= lo <= hi <= 1
    code, out, _ = run(["decay-fit", "--kind", "non_stationary", "--k", "1..6"], capsys)
    assert code == 0 and json.loads(out)["result"]["fit"]["slope"] < -1


def test_operator_apply_roundtrip(tmp_path, capsys):
    out_path = tmp_path / "o.bin"
    code, out, _ = run(["operator-apply", "--op", "Hj", "--j", "1", "--n", "32",
                        "--bandwidth", "4", "--output", str(out_path)], capsys)
    assert code == 0 and out_path.exists()
    code, out2, _ = run(["operator-apply", "--op", "hl-maximal", "--input", str(out_path)], capsys)
    assert code == 0 and json.loads(out2)["result"]["grid"] == [32, 32]


def test_version_flag(capsys):
    code, out, _ = run(["--version"], capsys)
    assert code == 0 and cli_mod.__version__ in out
