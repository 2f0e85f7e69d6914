import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from aerialmanip.cli import EXIT_BAD_INPUT, EXIT_OK, main
from aerialmanip.rotor import BENCH_FIT
from aerialmanip.sim import LOG_COLUMNS
from aerialmanip.trajectory import sample_mission, pick_place_mission

HOVER = "controller = dflc\nmission = hover\nduration = 0.1\npayload = none\n"


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_writes_log_trace_and_plots(tmp_path, capsys):
    scen = tmp_path / "s.txt"
    scen.write_text(HOVER)
    out = tmp_path / "log.csv"
    code = main(["simulate", "--scenario", str(scen), "--out", str(out), "--trace", str(tmp_path / "ee.csv"),
                 "--plot-dir", str(tmp_path / "plots"), "--seedless"])
    assert code == EXIT_OK and "completed" in capsys.readouterr().out
    rows = read_rows(out)
    assert rows[0][:2] == ["time", "X"] and len(rows) == 52
    assert read_rows(tmp_path / "ee.csv")[0] == ["time", "x", "y", "z", "phi", "theta", "psi"]
    assert read_rows(tmp_path / "plots" / "Z.csv")[0] == ["time", "Z"]
    assert len(list((tmp_path / "plots").iterdir())) == len(LOG_COLUMNS) - 1


def test_simulate_is_byte_reproducible(tmp_path):
    scen = tmp_path / "s.txt"
    scen.write_text(HOVER)
    for name in ("a.csv", "b.csv"):
        assert main(["simulate", "--scenario", str(scen), "--out", str(tmp_path / name),
                     "--controller", "fmrlc"]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_simulate_divergence_still_exits_zero(tmp_path, capsys):
    scen = tmp_path / "s.txt"
    # a 50 ms physics step is far too coarse for the joint modes
    scen.write_text("controller = dflc\nmission = hover\nhover_theta1 = 0.3\nhover_Z = 1\nduration = 5\n"
                    "dt_physics = 0.05\ndt_control = 0.05\n")
    out = tmp_path / "log.csv"
    assert main(["simulate", "--scenario", str(scen), "--out", str(out)]) == EXIT_OK
    assert "diverged" in capsys.readouterr().out
    assert read_rows(out)[-1][-1].startswith("divergence:")


@pytest.mark.parametrize("text", ["controller = pid\n", "this is not a key value file\n",
                                  "duration = soon\n", "mission = /nonexistent/mission.txt\n"])
def test_simulate_malformed_scenario(tmp_path, text, capsys):
    scen = tmp_path / "bad.txt"
    scen.write_text(text)
    assert main(["simulate", "--scenario", str(scen), "--out", str(tmp_path / "x.csv")]) == EXIT_BAD_INPUT
    assert "error" in capsys.readouterr().err


def test_simulate_missing_scenario(tmp_path):
    assert main(["simulate", "--scenario", str(tmp_path / "nope"), "--out", str(tmp_path / "x")]) == EXIT_BAD_INPUT


def test_fit_command(tmp_path):
    pwm = np.linspace(1100, 1900, 9)
    lines = ["pwm,omega_sq,thrust,power"]
    sq = BENCH_FIT["a"][0] * pwm + BENCH_FIT["b"][0]
    thrust = BENCH_FIT["c"][0] * pwm + BENCH_FIT["d"][0]
    power = (BENCH_FIT["e"][0] * pwm + BENCH_FIT["h"][0]) * np.sqrt(sq)
    lines += [",".join(repr(float(v)) for v in r) for r in zip(pwm, sq, thrust, power)]
    data = tmp_path / "bench.csv"
    data.write_text("\n".join(lines) + "\n")
    out = tmp_path / "fit.txt"
    assert main(["fit", "--data", str(data), "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    a = float(next(l for l in text.splitlines() if l.startswith("a =")).split("=")[1].split("#")[0])
    assert a == pytest.approx(420.5, rel=1e-9)
    first = out.read_bytes()
    main(["fit", "--data", str(data), "--out", str(out)])
    assert out.read_bytes() == first


def test_fit_rank_deficient(tmp_path):
    data = tmp_path / "bench.csv"
    data.write_text("pwm,omega_sq,thrust,power\n1500,2e5,300,40\n1500,2e5,301,40\n")
    assert main(["fit", "--data", str(data), "--out", str(tmp_path / "f")]) == EXIT_BAD_INPUT


def test_plan_matches_trajectory_module(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["plan", "--out", str(out), "--mission-out", str(tmp_path / "m.txt")]) == EXIT_OK
    rows = read_rows(out)
    assert len(rows) == 8002 and rows[0][0] == "time" and len(rows[0]) == 19
    table = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(table, sample_mission(pick_place_mission(), table[:, 0]))
    assert table[-1, 0] == pytest.approx(80.0)
    # the written mission file plans the same trajectory
    again = tmp_path / "again.csv"
    assert main(["plan", "--mission", str(tmp_path / "m.txt"), "--out", str(again), "--duration", "80"]) == EXIT_OK
    np.testing.assert_allclose(np.array(read_rows(again)[1:], dtype=float), table, atol=1e-12)


def test_plan_empty_mission_is_header_only(tmp_path):
    (tmp_path / "empty.txt").write_text("# nothing planned\n")
    out = tmp_path / "t.csv"
    assert main(["plan", "--mission", str(tmp_path / "empty.txt"), "--out", str(out)]) == EXIT_OK
    assert out.read_text().count("\n") == 1


def test_plan_rejects_bad_step(tmp_path):
    assert main(["plan", "--out", str(tmp_path / "t.csv"), "--dt", "0"]) == EXIT_BAD_INPUT


def test_mixer_hover_and_saturation(capsys):
    assert main(["mixer", "--thrust", "9.81"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "rotor,omega_sq,omega,pwm"
    sq = [float(l.split(",")[1]) for l in lines[1:5]]
    assert max(sq) - min(sq) <= 1e-9 * max(sq)  # shared constants: equal speeds
    assert "speed saturation = False" in lines[-1]
    assert main(["mixer", "--thrust", "100"]) == EXIT_OK
    assert "speed saturation = True, pwm saturation = True" in capsys.readouterr().out


def test_mixer_per_rotor_constants_are_asymmetric(capsys, tmp_path):
    out = tmp_path / "mix.csv"
    assert main(["mixer", "--thrust", "9.81", "--per-rotor", "--out", str(out)]) == EXIT_OK
    sq = [float(r[1]) for r in read_rows(out)[1:5]]
    assert len(set(sq)) == 4
    bar = next(l for l in out.read_text().splitlines() if "omega_bar" in l)
    assert abs(float(bar.split("=")[1])) > 1.0


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "aerialmanip.cli", "mixer", "--thrust", "9.81"],
                         capture_output=True, text=True, env={"AMS_LOG_LEVEL": "DEBUG", "PATH": ""})
    assert res.returncode == 0 and res.stdout.startswith("rotor,")
    res = subprocess.run([sys.executable, "-m", "aerialmanip.cli", "simulate"], capture_output=True, text=True)
    assert res.returncode == 2  # argparse usage error
