import csv
import subprocess
import sys

import numpy as np
import pytest

from gridpassivity.case_io import load_shipped_case, parse_case
from gridpassivity.cli import apply_controls, main


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_powerflow_outputs(tmp_path):
    assert main(["powerflow", "--out", str(tmp_path)]) == 0
    pf = _rows(tmp_path / "powerflow.csv")
    assert len(pf) == 11
    slack = next(r for r in pf if r["type"] == "slack")
    assert float(slack["angle[deg]"]) == pytest.approx(-6.8)
    assert len(_rows(tmp_path / "machines.csv")) == 4


@pytest.mark.parametrize("mode", ["none", "gov"])
def test_passivity_without_exciter_has_non_passive_bus(tmp_path, mode):
    assert main(["passivity", "--controls", mode, "--out", str(tmp_path)]) == 0
    summary = _rows(tmp_path / "passivity_summary.csv")
    assert len(summary) == 4
    assert any(r["passive"] == "false" for r in summary)
    sweep = _rows(tmp_path / "sweep_bus1.csv")
    assert len(sweep) in (400, 401)


def test_passivity_single_bus_and_grid_override(tmp_path):
    assert main(["passivity", "--bus", "3", "--grid", "0.1:10:25", "--out", str(tmp_path)]) == 0
    assert [r["bus"] for r in _rows(tmp_path / "passivity_summary.csv")] == ["3"]
    assert len(_rows(tmp_path / "sweep_bus3.csv")) in (25, 26)


def test_passivity_after_tune_is_all_passive(tmp_path):
    main(["tune", "--out", str(tmp_path)])
    tuned = tmp_path / "kundur2area_tuned.case"
    assert tuned.exists()
    assert main(["passivity", "--case", str(tuned), "--out", str(tmp_path / "after")]) == 0
    summary = _rows(tmp_path / "after" / "passivity_summary.csv")
    assert all(r["passive"] == "true" for r in summary)


def test_tune_reports_failure_with_tuning_exit_code(tmp_path):
    status = main(["tune", "--out", str(tmp_path)])
    rows = _rows(tmp_path / "tune_summary.csv")
    assert len(rows) == 4
    failed = [r for r in rows if r["passive"] == "false"]
    assert (status == 7) == bool(failed)
    # the written case stays loadable whatever the outcome
    assert len(parse_case(tmp_path / "kundur2area_tuned.case").machines) == 4


def test_eigen_outputs(tmp_path):
    assert main(["eigen", "--controls", "gov+exc", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "eigenvalues.csv")
    case = apply_controls(load_shipped_case(), "gov+exc")
    from gridpassivity.equilibrium import solve_case_equilibrium
    n_states = sum(m.n_states for m in solve_case_equilibrium(case).models)
    assert len(rows) == n_states
    re = np.array([float(r["real[1/s]"]) for r in rows])
    assert np.sum(re > -1e-6) == 1      # the rotational mode only


def test_zero_event_simulation_is_flat(tmp_path):
    assert main(["simulate", "--horizon", "1", "--dt", "0.01", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "trajectory.csv")
    assert len(rows) == 101 * 4
    assert max(abs(float(r["d_omega[rad/s]"])) for r in rows) <= 1e-6
    first = {r["bus"]: float(r["v_mag[pu]"]) for r in rows[:4]}
    assert all(abs(float(r["v_mag[pu]"]) - first[r["bus"]]) <= 1e-6 for r in rows)


def test_simulate_with_event_is_deterministic(tmp_path):
    args = ["simulate", "--horizon", "0.5", "--dt", "0.01", "--event", "0.1:7:1.0"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert b"rad/s" in a.splitlines()[0]


def test_config_events_are_used(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[simulation]\ndt = 0.01\nhorizon = 0.3\n[event]\ntime = 0.1\nbus = 9\ndelta_p = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "trajectory.csv")
    assert float(rows[-1]["t[s]"]) == pytest.approx(0.3)
    assert abs(float(rows[-1]["d_omega[rad/s]"])) > 1e-6


@pytest.mark.parametrize("argv,code", [
    ([], 2), (["bogus"], 2), (["passivity", "--grid", "a:b"], 2),
    (["powerflow", "--case", "/nonexistent.case"], 3),
    (["passivity", "--bus", "8"], 3),
    (["simulate", "--event", "0.1:99:1"], 8),
    (["simulate", "--event", "garbage"], 3),
])
def test_exit_codes(tmp_path, argv, code):
    if argv and argv[0] in ("powerflow", "passivity", "simulate"):
        argv = argv + ["--out", str(tmp_path), "--horizon", "0.2"] if argv[0] == "simulate" else argv + ["--out", str(tmp_path)]
    assert main(argv) == code


def test_bad_case_file_exit_code(tmp_path):
    bad = tmp_path / "bad.case"
    bad.write_text("[case]\nname = x\n")
    assert main(["powerflow", "--case", str(bad), "--out", str(tmp_path)]) == 3


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gridpassivity", "powerflow", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "powerflow.csv" in res.stdout
