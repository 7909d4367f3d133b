import json

import numpy as np
import pytest

from weylscale import cli
from weylscale.testfn import Grid, make_bump


def test_validate_defaults():
    c = cli.validate_config("")
    assert isinstance(c, cli.ExperimentConfig)
    assert c.grid_points == 4096 and c.nodes == 33 and len(c.lambdas) == 7
    npt_l = np.geomspace(1.0, 1e-3, 7)
    assert np.allclose(c.lambdas, npt_l)


def test_validate_parses_file_and_overrides():
    text = "experiment = ir-slope\nmass = 0.5  # comment\nlambda-grid = 1:0.01:5\nK = 128\n"
    c = cli.validate_config(text, {"mass": "2"})
    assert c.experiment == "ir-slope" and c.mass == 2.0 and c.K == 128
    assert c.lambda_grid == (1.0, 0.01, 5)


def test_validate_collects_every_error():
    text = "grid_points = 1000\nmass = -1\nbogus = 3\nnodes = x\nsamples = 5\nformat = xml\n"
    errs = cli.validate_config(text)
    assert isinstance(errs, list)
    joined = "\n".join(errs)
    for key in ("grid_points", "mass", "bogus", "nodes", "samples", "format"):
        assert key in joined
    assert len(errs) == 6
    assert cli.validate_config("no equals sign")[0].startswith("line 1")


def test_config_hash_ignores_output():
    a = cli.validate_config("output = a")
    b = cli.validate_config("output = b")
    assert cli.config_hash(a) == cli.config_hash(b)
    assert cli.config_hash(a) != cli.config_hash(cli.validate_config("seed = 1"))


def test_validate_command(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text("experiment = bessel\n")
    assert cli.main(["validate", str(good)]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = nothing\n")
    assert cli.main(["validate", str(bad)]) == 2
    assert "experiment" in capsys.readouterr().err
    assert cli.main(["validate", str(tmp_path / "missing.cfg")]) == 2


def test_run_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "bessel", "--output", str(out)]) == 0
    lines = (out / "bessel.csv").read_text().splitlines()
    assert lines[0] == "x,K0,K1" and len(lines) == 65
    m = json.loads((out / "manifest.json").read_text())
    assert m["schema"] == cli.MANIFEST_SCHEMA and m["pass"] is True
    assert m["artifact"] == "bessel.csv" and "output" not in m["config"]
    assert m["config_hash"] == cli.config_hash(cli.validate_config("experiment = bessel"))


def test_run_json_format(tmp_path):
    out = tmp_path / "j"
    assert cli.main(["run", "ir-slope", "--format", "json", "--output", str(out)]) == 0
    d = json.loads((out / "ir-slope.json").read_text())
    assert d["columns"] == ["mass", "norm_sq"] and len(d["rows"]) == 6
    m = json.loads((out / "manifest.json").read_text())
    assert m["pass"] and m["summary"]["r2"] > 0.99


def test_ir_slope_null_symbol(tmp_path):
    assert cli.main(["run", "ir-slope", "--ir-symbol", "null", "--output", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["pass"]


@pytest.mark.parametrize("experiment", ["bessel", "norm-equivalence"])
def test_byte_reproducible(tmp_path, experiment):
    bodies = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["run", experiment, "--output", str(out)]) == 0
        bodies.append([(out / f).read_bytes() for f in (f"{experiment}.csv", "manifest.json")])
    assert bodies[0] == bodies[1]


def test_seed_changes_draws(tmp_path):
    for s in ("0", "1"):
        cli.main(["run", "norm-equivalence", "--seed", s, "--output", str(tmp_path / s)])
    a = (tmp_path / "0" / "norm-equivalence.csv").read_text()
    b = (tmp_path / "1" / "norm-equivalence.csv").read_text()
    assert a != b


def test_exit_code_config(tmp_path):
    assert cli.main(["run", "bessel", "--mass", "0", "--output", str(tmp_path)]) == 2
    assert cli.main(["run", "bessel", "--grid-points", "1000", "--output", str(tmp_path)]) == 2
    assert cli.main(["run", "bessel", "--symbol", str(tmp_path / "none.json")]) == 2


def test_exit_code_guard(tmp_path):
    # a symbol with a nonzero real moment violates the precondition of the sweep
    sym = tmp_path / "bump.json"
    sym.write_text(json.dumps(make_bump(0.0, 1.0, 1.0, Grid()).to_json()))
    code = cli.main(["run", "sweep-notiso", "--symbol", str(sym), "--nodes", "3",
                     "--output", str(tmp_path / "o")])
    assert code == 3
    assert not (tmp_path / "o" / "manifest.json").exists()


def test_exit_code_io(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "bessel", "--output", str(blocker / "sub")]) == 4


def test_render_csv_formats():
    o = cli.Outcome(("a", "b", "c"), [(1, 0.1, True)])
    assert cli.render_csv(o) == "a,b,c\n1,0.10000000000000001,true\n"
