"""TOML configuration parsing/validation and the command-line front end."""

import json
import math

import numpy as np
import pytest

from airgapfe.cli import main
from airgapfe.config import build_problem, load_config
from airgapfe.errors import ConfigurationError
from airgapfe.mesh import load_mesh
from airgapfe.postproc import read_csv

STATIC_TOML = """\
[stator]
r_inner = 1.0
r_outer = 1.5
n_boundary = 32
n_layers = 4
region_tag = 0
interface = "inner"
[stator.dirichlet]
outer = 0.0

[rotor]
r_inner = 0.5
r_outer = 0.9
n_boundary = 32
n_layers = 4
region_tag = 1
interface = "outer"
[rotor.dirichlet]
inner = 0.0

[materials.0]
nu = 1.0
jz = 1.0
[materials.1]
nu = 1.0

[airgap]
r_st = 1.0
rho_rt = 0.9
nu0 = 1.0
ell_z = 1.0

[solver]
mode = "static"

[output]
csv = "trace.csv"
vtk = "solution.vtk"
"""


def write_config(tmp_path, text=STATIC_TOML, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- config parsing ----------------------------------------------------------

def test_load_config_defaults(tmp_path):
    config = load_config(write_config(tmp_path))
    assert config.solver.mode == "static"
    assert config.solver.tol == 1e-10
    assert config.solver.interior == "direct"
    assert config.sint is True
    assert config.harmonics is None
    assert len(config.config_hash) == 16


def test_missing_section(tmp_path):
    with pytest.raises(ConfigurationError, match=r"\[airgap\]"):
        load_config(write_config(
            tmp_path, STATIC_TOML.replace("[airgap]", "[airgap2]")))


def test_missing_key_names_path(tmp_path):
    broken = STATIC_TOML.replace('interface = "inner"\n', "", 1)
    with pytest.raises(ConfigurationError, match="stator.interface"):
        load_config(write_config(tmp_path, broken))


def test_bad_toml(tmp_path):
    with pytest.raises(ConfigurationError, match="parse error"):
        load_config(write_config(tmp_path, "not = [valid"))


def test_bad_sint_and_harmonics(tmp_path):
    with pytest.raises(ConfigurationError, match="sint"):
        load_config(write_config(
            tmp_path, STATIC_TOML.replace("[airgap]",
                                          '[airgap]\nsint = "maybe"')))
    with pytest.raises(ConfigurationError, match="harmonics"):
        load_config(write_config(
            tmp_path, STATIC_TOML.replace("[airgap]",
                                          '[airgap]\nharmonics = "some"')))


def test_explicit_harmonics_list(tmp_path):
    config = load_config(write_config(
        tmp_path, STATIC_TOML.replace("[airgap]",
                                      "[airgap]\nharmonics = [1, 2, 5]")))
    assert np.array_equal(config.harmonics.orders, [1, 2, 5])


def test_transient_needs_dt(tmp_path):
    bad = STATIC_TOML.replace('mode = "static"', 'mode = "transient"')
    with pytest.raises(ConfigurationError, match="dt"):
        load_config(write_config(tmp_path, bad))


def test_build_problem_validates(tmp_path):
    problem = build_problem(load_config(write_config(tmp_path)))
    assert problem.operator.geometry.xi > 1.0
    assert problem.sub_st.dirichlet and problem.sub_rt.dirichlet


def test_build_problem_requires_dirichlet(tmp_path):
    bad = STATIC_TOML.replace("[stator.dirichlet]\nouter = 0.0\n", "")
    with pytest.raises(ConfigurationError, match="Dirichlet"):
        build_problem(load_config(write_config(tmp_path, bad)))


def test_build_problem_rejects_net_rotor_current(tmp_path):
    bad = STATIC_TOML.replace("[materials.1]\nnu = 1.0",
                              "[materials.1]\nnu = 1.0\njz = 5.0")
    with pytest.raises(ConfigurationError, match="net current"):
        build_problem(load_config(write_config(tmp_path, bad)))


def test_build_problem_rejects_closing_gap(tmp_path):
    bad = STATIC_TOML + "\n[motion]\nt = [0.0]\nalpha = [0.0]\n" \
        "d_ecc = [0.2]\ngamma_ecc = [0.0]\n"
    with pytest.raises(ConfigurationError, match="eccentricity"):
        build_problem(load_config(write_config(tmp_path, bad)))


def test_config_with_mesh_files(tmp_path):
    """generate + mesh-file configs load identically to generator configs."""
    assert main(["generate", "--config", str(write_config(tmp_path)),
                 "--out", str(tmp_path)]) == 0
    text = STATIC_TOML
    for side, spec in (("stator", 'mesh = "stator.mesh"'),
                       ("rotor", 'mesh = "rotor.mesh"')):
        start = text.index(f"[{side}]")
        end = text.index("r_inner", start)
        tail = text.index("interface", start)
        text = text[:end] + text[tail:]
        text = text.replace(f"[{side}]", f"[{side}]\n{spec}", 1)
    problem = build_problem(load_config(write_config(tmp_path, text,
                                                     "meshcfg.toml")))
    ref = build_problem(load_config(write_config(tmp_path)))
    assert problem.sub_st.mesh.equals(ref.sub_st.mesh)
    assert problem.sub_rt.mesh.equals(ref.sub_rt.mesh)


# -- CLI ---------------------------------------------------------------------

def test_generate_writes_loadable_and_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["generate", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["generate", "--config", str(cfg), "--out", str(out2)]) == 0
    for name in ("stator.mesh", "rotor.mesh"):
        load_mesh(out1 / name)
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_solve_static_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    samples = read_csv(out / "trace.csv")
    assert len(samples) == 1
    # symmetric excitation transmits no torque
    assert abs(samples[0].torque) <= 1e-12
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header.startswith("# airgapfe ")
    assert (out / "solution.vtk").exists()


def test_solve_reruns_identical(tmp_path):
    cfg = write_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(out2)]) == 0
    assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()


def test_solve_transient_snapshots(tmp_path):
    text = STATIC_TOML.replace(
        '[solver]\nmode = "static"',
        '[solver]\nmode = "transient"\ndt = 0.25\nt_end = 1.0')
    text += "\n[motion]\nt = [0.0, 1.0]\nalpha = [0.0, 0.3]\n" \
        "d_ecc = [0.0, 0.0]\ngamma_ecc = [0.0, 0.0]\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out),
                 "--snapshot-every", "2"]) == 0
    samples = read_csv(out / "trace.csv")
    assert len(samples) == 4
    assert (out / "snapshot_0000.vtk").exists()
    assert (out / "snapshot_0001.vtk").exists()


def test_validation_error_exit_code(tmp_path, capsys):
    bad = STATIC_TOML.replace("r_st = 1.0", "r_st = 0.8")  # xi <= 1
    cfg = write_config(tmp_path, bad)
    assert main(["solve", "--config", str(cfg),
                 "--out", str(tmp_path)]) == 2
    assert "validation error" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, capsys):
    cfg = write_config(
        tmp_path, STATIC_TOML.replace('[solver]\nmode = "static"',
                                      '[solver]\nmode = "static"\nmaxit = 1'))
    assert main(["solve", "--config", str(cfg),
                 "--out", str(tmp_path)]) == 3
    assert "solver failure" in capsys.readouterr().err


def test_verify_config_validation_precedes_checks(tmp_path, capsys):
    bad = write_config(tmp_path, STATIC_TOML.replace("r_st = 1.0",
                                                     "r_st = 0.8"))
    assert main(["verify", "--config", str(bad),
                 "--out", str(tmp_path)]) == 2


def test_verify_fast_report(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify", "--fast", "--out", str(out)]) == 0
    report = json.loads((out / "verify_report.json").read_text())
    assert report["passed"] is True
    names = {c["name"] for c in report["checks"]}
    assert "dense_equivalence" in names and "annulus_convergence" in names
    text = capsys.readouterr().out
    assert "PASS  dense_equivalence" in text
