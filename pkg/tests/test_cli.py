import json
import subprocess
import sys

import numpy as np
import pytest

from grasshopper import cli
from grasshopper.analytic import R02, R03
from grasshopper.lattice import Lattice, dump_configuration, init_shape, load_configuration


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, name, **cfg):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    return path


SMALL_2D = dict(mode="anneal", dimension=2, M=400, d=0.4, room=1.3,
                schedule={"start_factor": 1.0, "steps_per_temperature": 2000, "max_sweeps": 15})


def test_analytic_values(capsys):
    assert run(capsys, "analytic", "disk", "--d", "0")[1].strip() == "1"
    assert run(capsys, "analytic", "firstzero", "--n", "2")[1].strip() == "0.97720502380583973"
    code, out, _ = run(capsys, "analytic", "modes", "--d", "0.4")
    assert code == 0 and [r.split(",")[0] for r in out.split()[1:]] == ["9", "17"]
    code, out, _ = run(capsys, "analytic", "halfspace", "--N", "3", "--kd", "1.0")
    assert code == 0 and float(out) < 0


def test_analytic_curves(capsys):
    code, out, _ = run(capsys, "analytic", "ball", "--curve", "0", "0.5", "6")
    rows = out.split()
    assert code == 0 and rows[0] == "d,probability" and len(rows) == 7
    code, out, _ = run(capsys, "analytic", "diskmode", "--n", "3", "--curve", "0.1", "1.0", "4")
    assert code == 0 and len(out.split()) >= 5


def test_analytic_errors(capsys):
    code, _, err = run(capsys, "analytic", "ball", "--d", "5")
    assert code == 2 and "error" in err
    assert run(capsys, "analytic", "disk")[0] == 2
    assert run(capsys, "analytic", "nosuchkind")[0] == 2
    assert run(capsys, "analytic", "diskmode", "--n", "1", "--d", "0.3")[0] == 2


def test_verify_targets(capsys):
    code, out, _ = run(capsys, "verify", "halfspace", "--N", "3", "--kd", "2.0")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "verify", "delta", "--N", "2", "--d", "0.4", "--M", "400", "--trials", "200")
    assert code == 0 and json.loads(out)["worst_relative_deviation"] <= 1e-12
    code, out, _ = run(capsys, "verify", "ball", "--d", "0.5", "--M", "20000")
    assert code == 0 and abs(json.loads(out)["relative_deviation"]) < 0.01
    code, out, err = run(capsys, "verify", "ball", "--d", "0.5", "--M", "2000", "--tol", "1e-9")
    assert code == 1 and "exceeds" in err and not json.loads(out)["passed"]


def test_verify_diskpert(capsys):
    code, out, _ = run(capsys, "verify", "diskpert", "--n", "5", "--d", "0.6", "--eps", "0.001")
    assert code == 0 and json.loads(out)["passed"]


def dump_of(tmp_path, name, N, d, M, shape, **kw):
    lat = Lattice.for_problem(N, d, M, room=kw.pop("room", 1.0))
    c = init_shape(lat, M, shape, **kw)
    path = tmp_path / f"{name}.dump"
    path.write_text(dump_configuration(c, d, seed=0, probability=0.0))
    return path


def test_analyze_cog(tmp_path, capsys):
    path = dump_of(tmp_path, "cog", 2, 0.4, 10000, "cog", n=9, eps=0.05, room=1.3)
    code, out, _ = run(capsys, "analyze", str(path), "--out", str(tmp_path / "rep"))
    doc = json.loads(out)
    assert code == 0 and doc["modes"][0][0] == 9 and doc["components"] == 1
    assert (tmp_path / "rep.json").exists()
    assert (tmp_path / "rep_hist.csv").read_text().startswith("r_low,r_high,count")
    assert (tmp_path / "rep_modes.csv").read_text().startswith("mode,amplitude")


def test_analyze_ball_and_shell(tmp_path, capsys):
    path = dump_of(tmp_path, "ball", 3, 0.5, 8000, "ball")
    code, out, _ = run(capsys, "analyze", str(path))
    doc = json.loads(out)
    assert code == 0 and doc["regime"] == "solid ball" and doc["isotropic"]
    d = 1.25 * R03
    from grasshopper.oracle import optimal_shell_radius

    rho = optimal_shell_radius(d)[0]
    path = dump_of(tmp_path, "shell", 3, d, 20000, "shell", rho=rho, room=1.2)
    code, out, _ = run(capsys, "analyze", str(path), "--expect-shell")
    doc = json.loads(out)
    assert code == 0 and doc["cavities"] == 1 and doc["regime"] == "shell" and doc["isotropic"]


def test_analyze_bad_dumps(tmp_path, capsys):
    bad = tmp_path / "bad.dump"
    bad.write_text("not a dump\n")
    assert run(capsys, "analyze", str(bad))[0] == 2
    assert run(capsys, "analyze", str(tmp_path / "missing.dump"))[0] == 2
    path = dump_of(tmp_path, "ok", 2, 0.4, 400, "ball")
    lines = path.read_text().splitlines()
    (tmp_path / "short.dump").write_text("\n".join(lines[:-3]) + "\n")
    assert run(capsys, "analyze", str(tmp_path / "short.dump"))[0] == 2


def test_invalid_configs(tmp_path, capsys):
    bad = write_config(tmp_path, "bad", **SMALL_2D, colour="green")
    code, _, err = run(capsys, "solve", str(bad))
    assert code == 2 and "colour" in err
    no_d = write_config(tmp_path, "nod", **{k: v for k, v in SMALL_2D.items() if k != "d"})
    assert run(capsys, "solve", str(no_d))[0] == 2
    shell2 = write_config(tmp_path, "s2", **SMALL_2D | {"init": {"shape": "shell", "rho": 0.1}})
    assert run(capsys, "solve", str(shell2))[0] == 2
    assert run(capsys, "solve", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "sweep", str(write_config(tmp_path, "sw", **SMALL_2D)))[0] == 2


def test_solve_outputs(tmp_path, capsys):
    cfg = write_config(tmp_path, "small", **SMALL_2D)
    code, out, _ = run(capsys, "--output-dir", str(tmp_path / "o"), "solve", str(cfg))
    assert code == 0 and out.startswith("best_probability")
    doc = json.loads((tmp_path / "o" / "small.json").read_text())
    config, header = load_configuration((tmp_path / "o" / "small.dump").read_text())
    assert config.occupied_count == 400 and header["d"] == 0.4
    assert doc["best_probability"] >= doc["initial_probability"] - 1e-12
    assert not (tmp_path / "o" / "small.checkpoint.json").exists()
    assert (tmp_path / "o" / "small.log").exists()


def test_zero_sweeps_returns_initial_shape(tmp_path, capsys):
    cfg = write_config(tmp_path, "zero", **SMALL_2D | {"schedule": {"start_factor": 1.0, "max_sweeps": 0}})
    assert run(capsys, "--output-dir", str(tmp_path), "solve", str(cfg))[0] == 0
    config, _ = load_configuration((tmp_path / "zero.dump").read_text())
    ref = init_shape(Lattice.for_problem(2, 0.4, 400, room=1.3), 400, "ball")
    assert np.array_equal(config.sorted_cells(), ref.sorted_cells())


def test_outputs_independent_of_threads(tmp_path, capsys):
    cfg = dict(SMALL_2D, mode="tempering",
               tempering={"T_low": 1e-5, "T_high": 1e-3, "replicas": 3, "swap_interval": 500, "sweeps": 4})
    path = write_config(tmp_path, "pt", **cfg)
    outs = []
    for threads in ("1", "3"):
        d = tmp_path / f"t{threads}"
        assert run(capsys, "--threads", threads, "--output-dir", str(d), "solve", str(path))[0] == 0
        outs.append(((d / "pt.json").read_bytes(), (d / "pt.dump").read_bytes()))
    assert outs[0] == outs[1]


def test_solve_interrupt_and_resume(tmp_path, capsys, monkeypatch):
    cfg = write_config(tmp_path, "ir", **SMALL_2D)
    assert run(capsys, "--output-dir", str(tmp_path / "full"), "solve", str(cfg))[0] == 0
    calls = {"n": 0}

    def stop_after_five(self):
        calls["n"] += 1
        return calls["n"] > 5

    monkeypatch.setattr(cli.StopFlag, "__call__", stop_after_five)
    part = tmp_path / "part"
    code, _, err = run(capsys, "--output-dir", str(part), "solve", str(cfg))
    assert code == 130 and "checkpoint" in err
    assert (part / "ir.checkpoint.json").exists() and not (part / "ir.json").exists()
    monkeypatch.setattr(cli.StopFlag, "__call__", lambda self: False)
    assert run(capsys, "--output-dir", str(part), "solve", str(cfg), "--resume")[0] == 0
    assert (part / "ir.json").read_bytes() == (tmp_path / "full" / "ir.json").read_bytes()
    assert (part / "ir.dump").read_bytes() == (tmp_path / "full" / "ir.dump").read_bytes()
    assert run(capsys, "--output-dir", str(part), "solve", str(cfg), "--resume")[0] == 2


def test_sweep_rows(tmp_path, capsys):
    cfg = dict(SMALL_2D, d_grid=[0.4, 0.4, 0.45])
    del cfg["d"]
    path = write_config(tmp_path, "sw", **cfg)
    code, out, _ = run(capsys, "--output-dir", str(tmp_path), "sweep", str(path))
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == ",".join(cli.SWEEP_COLUMNS) and len(rows) == 4
    assert rows[1] == rows[2]
    assert (tmp_path / "sw_002.json").exists()
    # completed points are reused
    before = (tmp_path / "sw_000.json").stat().st_mtime_ns
    code, again, _ = run(capsys, "--output-dir", str(tmp_path), "sweep", str(path))
    assert again == out and (tmp_path / "sw_000.json").stat().st_mtime_ns == before


def test_sweep_empty_grid(tmp_path, capsys):
    cfg = dict(SMALL_2D, d_grid=[])
    del cfg["d"]
    code, out, _ = run(capsys, "--output-dir", str(tmp_path), "sweep", str(write_config(tmp_path, "e", **cfg)))
    assert code == 0 and out == ",".join(cli.SWEEP_COLUMNS) + "\n"


def test_sweep_in_R0_units(tmp_path, capsys):
    cfg = dict(mode="anneal", dimension=3, M=2000, d_grid=[0.6], d_unit="R0",
               schedule={"start_factor": 1.0, "steps_per_temperature": 2000, "max_sweeps": 3})
    code, out, _ = run(capsys, "--output-dir", str(tmp_path), "sweep", str(write_config(tmp_path, "r", **cfg)))
    doc = json.loads((tmp_path / "r_000.json").read_text())
    assert code == 0 and doc["d"] == pytest.approx(0.6 * R03)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "grasshopper", "analytic", "disk", "--d", "0.4"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and 0 < float(res.stdout) < 1
    assert R02 > 0
