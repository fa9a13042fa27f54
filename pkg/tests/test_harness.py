import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from strathom.errors import ConfigError
from strathom.harness import presets
from strathom.harness.cli import main
from strathom.harness.config import ExperimentConfig, LawSpec, load, parse, serialize
from strathom.harness.report import emit, to_csv, to_plotdata, to_table
from strathom.harness.runner import ConvergenceReport, run_common_atom_demo, run_convergence
from strathom.media import LayeredProfile

SOFT_2D = """
name = "soft2d"

[profile]
length = 1
background = 1

[[profile.feature]]
center = "1/3"
kind = "soft"
width_exp = 1
value_exp = 1

[law]
kind = "heat"
A = [[1, 0], [0, 1]]

[grid]
d = 2
extents = [1.0]
resolutions = [8]

[solver]
method = "pcg"
tol = 1e-10

[sweep]
eps = ["1/10", "1/100"]
f = [1.0]

[output]
dir = "{out}"
formats = ["csv", "plotdata"]
figures = {figures}
solutions = true
"""


def write_config(tmp_path, text=SOFT_2D, figures="false", name="cfg.toml"):
    out = tmp_path / "out"
    path = tmp_path / name
    path.write_text(text.format(out=out, figures=figures))
    return path, out


# -- configuration ---------------------------------------------------------------

def test_config_parses_rationals(tmp_path):
    path, _ = write_config(tmp_path)
    cfg = load(path)
    assert cfg.eps_list == (0.1, 0.01)
    assert cfg.profile.features[0].center == presets.soft("1/3").center


@pytest.mark.parametrize("name", sorted(presets.PRESETS))
def test_config_round_trip(name):
    cfg = presets.get(name)
    again = parse(serialize(cfg))
    assert again == cfg
    assert parse(serialize(again)).digest() == cfg.digest()


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("name", ["E1", "E2", "E3", "E4"])
def test_shipped_configs_match_presets(name):
    from dataclasses import replace
    cfg = load(CONFIG_DIR / f"{name.lower()}.toml")
    expected = replace(presets.get(name), preset=cfg.preset, solutions=cfg.solutions)
    assert cfg == expected


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("law_*.toml")), ids=lambda p: p.stem)
def test_shipped_law_configs(path, capsys):
    assert main(["tensors", str(path)]) == 0
    assert "interface matrix" in capsys.readouterr().out


@pytest.mark.parametrize("patch,message", [
    (("eps = [\"1/10\", \"1/100\"]", "eps = [0.01, 0.1]"), "decreasing"),
    (("kind = \"heat\"", "kind = \"plastic\""), "law kind"),
    (("[grid]", "[grid]\nbogus = 1"), "unknown keys"),
    (("d = 2", "d = 4"), "grid.d"),
    (("method = \"pcg\"", "method = \"oracle\""), "oracle"),
    (("f = [1.0]", "f = [1.0, 2.0]"), "sweep.f"),
])
def test_config_errors(tmp_path, patch, message):
    text = SOFT_2D.replace(*patch)
    with pytest.raises(ConfigError, match=message):
        parse(text.format(out=tmp_path, figures="false"))


def test_config_rejects_bad_toml():
    with pytest.raises(ConfigError):
        parse("[profile\n")


def test_iso_law_needs_three_dimensions():
    with pytest.raises(ConfigError):
        ExperimentConfig(law=LawSpec("iso", l=1.0), d=1, f=(1.0,))


# -- runner ----------------------------------------------------------------------

def test_e1_rows_and_jump():
    rep = run_convergence(presets.get("E1"))
    assert len(rep.rows) == len(presets.EPS_1D)
    l1 = rep.column("l1_error")
    assert l1[-1] < l1[0]
    assert rep.rows[-1]["jump@0.333333"] == pytest.approx(1 / 12, rel=1e-3)


def test_constant_profile_single_eps_is_discretization_error():
    errs = []
    for res in (4, 8, 16):
        cfg = ExperimentConfig(law=LawSpec("heat", A=((1.0, 0.0), (0.0, 1.0))), d=2, extents=(1.0,),
                               resolutions=(res,), eps_list=(0.1,), f=(1.0,))
        rep = run_convergence(cfg)
        assert len(rep.rows) == 1
        errs.append(rep.rows[0]["l1_error"])
    assert errs == [0.0, 0.0, 0.0]  # fine and effective problems coincide on the same grid


def test_nested_profile_rejected_by_run():
    with pytest.raises(ConfigError):
        run_convergence(presets.get("E4"))


def test_rows_ordered_and_parallel_equals_serial():
    cfg = presets.get("E2").with_overrides(resolutions=(8, 16), eps_list=(1e-1, 1e-2))
    a, b = run_convergence(cfg, serial=True), run_convergence(cfg, serial=False)
    assert to_csv(a) == to_csv(b)
    assert [(r["resolution"], r["eps"]) for r in a.rows] == [(8, 0.1), (8, 0.01), (16, 0.1), (16, 0.01)]


def test_solver_failure_recorded_per_row(tmp_path):
    text = SOFT_2D.replace("kind = \"soft\"", "kind = \"stiff\"").replace("value_exp = 1", "value_exp = -1")
    text = text.replace("tol = 1e-10", "tol = 1e-10\nmax_iter = 20").replace("resolutions = [8]", "resolutions = [16]")
    cfg = parse(text.format(out=tmp_path, figures="false"))
    cfg = cfg.with_overrides(max_iter=60)
    rep = run_convergence(cfg)
    assert [r["status"] for r in rep.rows] == ["ok", "solver-failure"]
    assert math.isnan(rep.rows[1]["l1_error"])


def test_common_atom_demo_1d():
    rep = run_common_atom_demo(presets.get("E4"))
    assert rep.kind == "common-atom" and len(rep.rows) == 4
    assert all(r["distance"] > 0 for r in rep.rows)
    same = presets.get("E4").with_overrides(profile_b=presets.get("E4").profile)
    assert all(r["distance"] == 0 for r in run_common_atom_demo(same).rows)
    with pytest.raises(ConfigError):
        run_common_atom_demo(presets.get("E1"))


def test_common_atom_demo_2d_separates():
    """With transverse directions the two families keep a positive distance
    while each family's Cauchy increments shrink."""
    rep = run_common_atom_demo(presets.get("E4-2D"))
    dist = rep.column("distance")
    assert dist.min() > 4e-3
    assert rep.rows[-1]["cauchy_a"] < rep.rows[1]["cauchy_a"]
    assert rep.rows[-1]["cauchy_b"] < rep.rows[1]["cauchy_b"]
    assert rep.metadata["separation_ratio"] > 5


# -- reports ---------------------------------------------------------------------

def test_csv_header_contract():
    rep = run_convergence(presets.get("E1"))
    header = to_csv(rep).splitlines()[0]
    assert header.startswith("eps,h,l1_error,l2_error,energy_fine,energy_eff,iterations,")
    rows = list(csv.DictReader(io.StringIO(to_csv(rep))))
    assert float(rows[0]["eps"]) == 0.1


def test_empty_report_gives_header_only_csv():
    rep = ConvergenceReport("empty", ("eps", "h", "l1_error"), ())
    assert to_csv(rep) == "eps,h,l1_error\n"
    assert "eps" in to_table(rep)


def test_plotdata_blocks():
    rep = run_convergence(presets.get("E1"))
    blocks = to_plotdata(rep).strip().split("\n\n")
    assert blocks[0].startswith("# h")
    assert all(len(b.splitlines()) == 1 + len(rep.rows) for b in blocks)


def test_emit_is_byte_stable_and_writes_sidecar(tmp_path):
    cfg = presets.get("E1")
    rep = run_convergence(cfg)
    a = emit(rep, ("csv", "plotdata"), tmp_path / "a", config=cfg)
    b = emit(run_convergence(cfg), ("csv", "plotdata"), tmp_path / "b", config=cfg)
    for pa, pb in zip(a, b):
        if pa.endswith(".json"):
            meta = json.loads(Path(pa).read_text())
            assert meta["config_sha256"] == cfg.digest() and "created" in meta
        else:
            assert Path(pa).read_bytes() == Path(pb).read_bytes()


def test_emit_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rep = ConvergenceReport("x", ("eps",), ())
    with pytest.raises(ConfigError):
        emit(rep, ("csv",), blocker / "sub")


# -- command line ----------------------------------------------------------------

def test_cli_run_writes_outputs(tmp_path, capsys):
    path, out = write_config(tmp_path, figures="true")
    assert main(["run", str(path), "--serial"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert {"soft2d.csv", "soft2d.plotdata", "soft2d.meta.json", "figures"} <= set(names)
    assert (out / "figures" / "soft2d_convergence.png").stat().st_size > 0
    assert (out / "soft2d_effective.csv").read_text().startswith("# bulk")
    first = (out / "soft2d.csv").read_bytes()
    assert main(["run", str(path)]) == 0
    assert (out / "soft2d.csv").read_bytes() == first


def test_cli_flags_override_config(tmp_path):
    path, _ = write_config(tmp_path)
    other = tmp_path / "elsewhere"
    assert main(["run", str(path), "--out", str(other), "--tol", "1e-8", "--serial"]) == 0
    assert (other / "soft2d.csv").exists()


def test_cli_preset(tmp_path, capsys):
    assert main(["run", "--preset", "E1", "--out", str(tmp_path)]) == 0
    assert "l1_error" in capsys.readouterr().out
    assert (tmp_path / "E1.csv").exists()


def test_cli_config_errors_exit_1(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.toml")]) == 1
    assert main(["run"]) == 1
    assert main(["run", "--preset", "nope"]) == 1
    assert main(["run", "--preset", "E4", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_solver_failure_exit_2(tmp_path):
    text = SOFT_2D.replace("kind = \"soft\"", "kind = \"stiff\"").replace("value_exp = 1", "value_exp = -1")
    text = text.replace("tol = 1e-10", "tol = 1e-10\nmax_iter = 2")
    path, _ = write_config(tmp_path, text=text)
    assert main(["run", str(path)]) == 2


def test_cli_demo(tmp_path, capsys):
    assert main(["demo-common-atom", "--preset", "E4", "--out", str(tmp_path)]) == 0
    assert "separation ratio" in capsys.readouterr().out
    assert (tmp_path / "E4.csv").read_text().startswith("eps,h,distance,cauchy_a,cauchy_b")


def test_cli_tensors(tmp_path, capsys):
    law = tmp_path / "law.toml"
    law.write_text('[law]\nkind = "heat"\nA = [[2, 1], [1, 2]]\n[grid]\nd = 2\n')
    assert main(["tensors", str(law), "--json", "--out", str(tmp_path)]) == 0
    data = json.loads(capsys.readouterr().out)
    np.testing.assert_allclose(data["a_perp"], [[2, 1], [1, 0.5]])
    np.testing.assert_allclose(data["a_par"], [[0, 0], [0, 1.5]])
    assert (tmp_path / "tensors.json").exists()
    iso = tmp_path / "iso.toml"
    iso.write_text('[law]\nkind = "iso"\nl = 3\n')
    assert main(["tensors", str(iso)]) == 0
    assert "interface matrix (3x3)" in capsys.readouterr().out
    iso.write_text('[law]\nkind = "iso"\n')
    assert main(["tensors", str(iso)]) == 1


def test_cli_verify_config(tmp_path, capsys):
    path, _ = write_config(tmp_path)
    assert main(["verify", str(path)]) == 0
    wrong = SOFT_2D + '\n[limits.nu]\ndensity = [[0, 1, 1.0]]\natoms = [["1/2", 1.0]]\n[limits.m]\ndensity = [[0, 1, 1.0]]\n'
    path, _ = write_config(tmp_path, text=wrong, name="wrong.toml")
    assert main(["verify", str(path)]) == 3
    assert "VIOLATED" in capsys.readouterr().out


def test_cli_verify_acceptance_subset(capsys):
    assert main(["verify", "--criteria", "1,5,10"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3 and "3/3 criteria passed" in out
