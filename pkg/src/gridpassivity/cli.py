"""Command-line entry point: ``gridpassivity <command> --case ... --out ...``."""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import errors as E
from .case_io import CaseFile, RunConfig, emit_case, parse_case, parse_config, shipped_case_path
from .equilibrium import solve_case_equilibrium
from .linear_analysis import FrequencyGrid, full_system_eigenanalysis, linearize_equilibrium, passivity_sweep
from .simulator import LoadStep, Scenario, build_system, simulate
from .tuner import tune_machine

COMMANDS = ("powerflow", "passivity", "tune", "eigen", "simulate")
CONTROL_MODES = ("case", "none", "gov", "gov+exc", "gov+exc+pss")

EXIT_OK = 0
EXIT_CODES = [
    # most specific first
    (E.CaseError, 3),
    (E.NetworkError, 3),
    (E.ModelError, 3),
    (E.PowerFlowError, 4),
    (E.EquilibriumError, 5),
    (E.AnalysisError, 6),
    (E.TuningError, 7),
    (E.SimulationError, 8),
    (E.GridPassivityError, 1),
]
EXIT_USAGE = 2


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    if isinstance(exc, OSError):
        return 3
    return 1


def apply_controls(case: CaseFile, mode: str) -> CaseFile:
    """Switch governors, exciters and stabilizers on or off for every machine."""
    if mode == "case":
        return case
    if mode not in CONTROL_MODES:
        raise E.CaseError(f"unknown control mode {mode!r}")
    gov = "gov" in mode
    exc = "exc" in mode
    pss = "pss" in mode
    machines = []
    for m in case.machines:
        c = m.controllers
        c = replace(c, governor=replace(c.governor, enabled=gov),
                    exciter=replace(c.exciter, enabled=exc),
                    pss=replace(c.pss, enabled=pss))
        machines.append(replace(m, controllers=c))
    return replace(case, machines=tuple(machines))


def _num(x: float) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.12g}"


def _write_csv(path: Path, header, rows, note: str | None = None) -> Path:
    with open(path, "w", newline="") as fh:
        if note:
            fh.write(note + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if not isinstance(v, str) else v for v in row])
    return path


def _grid(config: RunConfig, override: str | None) -> FrequencyGrid:
    if override:
        return FrequencyGrid.parse(override, config.include_dc)
    return FrequencyGrid(config.grid_lo, config.grid_hi, config.grid_n, config.include_dc)


def _equilibrium(case, config):
    return solve_case_equilibrium(case, config.pf_tol, config.pf_max_iter)


def cmd_powerflow(case, config, out: Path, args, log):
    ep = _equilibrium(case, config)
    pf = ep.power_flow
    rows = []
    for b, v, s in zip(case.buses, pf.v, pf.s_inj):
        rows.append([b.id, b.kind, abs(v), math.degrees(np.angle(v)), s.real, s.imag])
    files = [_write_csv(out / "powerflow.csv",
                        ["bus", "type", "v_mag[pu]", "angle[deg]", "p_inj[pu]", "q_inj[pu]"], rows)]
    mrows = []
    for bus, model, x in zip(ep.buses, ep.models, ep.x_hat):
        c = model.controllers
        mrows.append([bus, x[0], x[2], x[3], model.params.p_ref, model.params.e_fd,
                      c.exciter.v_ref if c.exciter.enabled else float("nan")])
    files.append(_write_csv(out / "machines.csv",
                            ["bus", "delta[rad]", "eq_t[pu]", "ed_t[pu]", "p_ref[pu]", "e_fd[pu]",
                             "v_ref[pu]"], mrows))
    log(f"power flow converged in {pf.iterations} iterations, mismatch {pf.mismatch:.3e} pu; "
        f"equilibrium residual {ep.residual_norm:.3e}")
    return EXIT_OK, files


def _selected(ep, bus):
    if bus is None:
        return list(range(len(ep.buses)))
    if bus not in ep.buses:
        raise E.CaseError(f"bus {bus} has no machine")
    return [ep.buses.index(bus)]


def cmd_passivity(case, config, out, args, log):
    ep = _equilibrium(case, config)
    lms = linearize_equilibrium(ep, config.fd_step)
    grid = _grid(config, args.grid)
    files, rows = [], []
    for k in _selected(ep, args.bus):
        rep = passivity_sweep(lms[k], grid, config.eps)
        bus = ep.buses[k]
        files.append(_write_csv(out / f"sweep_bus{bus}.csv", ["omega[rad/s]", "min_eig[pu]"],
                                zip(rep.grid, rep.min_eig)))
        band = rep.violation_band or (float("nan"), float("nan"))
        w, m = rep.worst
        rows.append([bus, rep.hurwitz, rep.abscissa, rep.passive, band[0], band[1], w, m])
        log(f"bus {bus}: hurwitz={rep.hurwitz} passive={rep.passive} band={rep.violation_band}")
    files.insert(0, _write_csv(out / "passivity_summary.csv",
                               ["bus", "hurwitz", "abscissa[1/s]", "passive", "band_lo[rad/s]",
                                "band_hi[rad/s]", "worst_omega[rad/s]", "worst_min_eig[pu]"], rows))
    return EXIT_OK, files


def tune_case(case, config, grid=None, buses=None, log=lambda s: None):
    """Tune every selected machine; returns the updated case and per-bus outcomes."""
    ep = _equilibrium(case, config)
    grid = grid or _grid(config, None)
    outcomes = []
    new_case = case
    for k in (range(len(ep.buses)) if buses is None else buses):
        bus = ep.buses[k]
        v = complex(ep.v_hat[k])
        i = complex(ep.i_hat[k])
        res = tune_machine(bus, ep.models[k], v, i, config.margin, config.max_tb, config.n_tc,
                           config.bump_factor, grid, config.eps, config.fd_step)
        outcomes.append(res)
        log(f"bus {bus}: passive={res.passive} t_b={res.t_b:.4g} t_c={res.t_c:.4g} "
            f"bumped={res.bumped} {res.message}")
        if res.passive:
            rec = case.machine(bus)
            kept = res.model.controllers.exciter
            exc = replace(rec.controllers.exciter, t_b=kept.t_b, t_c=kept.t_c)
            params = replace(rec.params, xd_t=res.model.params.xd_t, xq_t=res.model.params.xq_t)
            new_case = new_case.with_machine(
                replace(rec, params=params, controllers=replace(rec.controllers, exciter=exc)))
    return new_case, outcomes


def cmd_tune(case, config, out, args, log):
    ep_buses = None
    if args.bus is not None:
        if args.bus not in case.machine_buses:
            raise E.CaseError(f"bus {args.bus} has no machine")
        ep_buses = [case.machine_buses.index(args.bus)]
    new_case, outcomes = tune_case(case, config, _grid(config, args.grid), ep_buses, log)
    files = []
    path = out / f"{case.name}_tuned.case"
    path.write_text(emit_case(new_case))
    files.append(path)
    rows = [[o.bus, o.t_b, o.t_c, o.bumped, o.passive,
             o.report.worst[1] if o.report is not None else float("nan"), o.message]
            for o in outcomes]
    files.append(_write_csv(out / "tune_summary.csv",
                            ["bus", "t_b[s]", "t_c[s]", "reactance_bump", "passive",
                             "worst_min_eig[pu]", "note"], rows))
    failed = [o.bus for o in outcomes if not o.passive]
    if failed:
        log(f"tuning failed for buses {failed}")
        return exit_code_for(E.TuningFailed("")), files
    return EXIT_OK, files


def cmd_eigen(case, config, out, args, log):
    ep = _equilibrium(case, config)
    rep = full_system_eigenanalysis(linearize_equilibrium(ep, config.fd_step), ep.h_reduced)
    rows = [[lam.real, lam.imag, abs(lam.imag) / (2 * math.pi), z]
            for lam, z in zip(rep.eigenvalues, rep.damping_ratios)]
    f = _write_csv(out / "eigenvalues.csv", ["real[1/s]", "imag[rad/s]", "freq[Hz]", "damping_ratio"], rows)
    log(f"spectral abscissa {rep.abscissa:.6g} 1/s "
        f"(excluding rotational mode: {rep.abscissa_excluding_rotational:.6g}); "
        f"{rep.near_zero.size} near-zero mode(s)")
    return EXIT_OK, [f]


def _parse_event(text: str) -> LoadStep:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise E.CaseError(f"event must be time:bus:dp[:dq], got {text!r}")
    return LoadStep(float(parts[0]), int(parts[1]), float(parts[2]),
                    float(parts[3]) if len(parts) == 4 else 0.0)


def cmd_simulate(case, config, out, args, log):
    ep = _equilibrium(case, config)
    system = build_system(case, ep)
    dt = args.dt if args.dt is not None else config.dt
    horizon = args.horizon if args.horizon is not None else config.horizon
    events = [LoadStep(e.time, e.bus, e.delta_p, e.delta_q) for e in config.events]
    events += [_parse_event(t) for t in (args.event or [])]
    events.sort(key=lambda e: e.time)
    try:
        scenario = Scenario(horizon, dt, tuple(events))
    except ValueError as exc:
        raise E.CaseError(str(exc)) from exc
    path = out / "trajectory.csv"
    try:
        traj = simulate(system, scenario, omega_s=case.omega_s)
    except E.NonFiniteState as exc:
        if exc.trajectory is not None:
            with open(path, "w") as fh:
                exc.trajectory.to_csv(fh)
        log(f"simulation diverged at t = {exc.time:.4f} s; partial trajectory written")
        raise
    with open(path, "w") as fh:
        traj.to_csv(fh)
    log(f"simulated {horizon} s with dt {dt} s; final |d_omega| max "
        f"{np.max(np.abs(traj.d_omega[-1])):.3e} rad/s")
    return EXIT_OK, [path]


HANDLERS = {"powerflow": cmd_powerflow, "passivity": cmd_passivity, "tune": cmd_tune,
            "eigen": cmd_eigen, "simulate": cmd_simulate}


def run_pipeline(cmd: str, case: CaseFile, config: RunConfig, out, args=None, log=print):
    """Run one command; returns ``(exit_status, written_files)``."""
    if cmd not in HANDLERS:
        raise ValueError(f"unknown command {cmd!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    args = args or argparse.Namespace(bus=None, grid=None, dt=None, horizon=None, event=None)
    return HANDLERS[cmd](case, config, out, args, log)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridpassivity",
                                description="Decentralized passivity analysis of power networks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--case", default=str(shipped_case_path()),
                       help="case file (default: shipped two-area case)")
        s.add_argument("--config", help="run configuration file")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--controls", default="case", choices=CONTROL_MODES,
                       help="override which controllers are active on every machine")
        if name in ("passivity", "tune"):
            s.add_argument("--bus", type=int, help="restrict to one machine bus")
            s.add_argument("--grid", help="frequency grid lo:hi:n in rad/s")
        if name == "simulate":
            s.add_argument("--dt", type=float, help="step size in s")
            s.add_argument("--horizon", type=float, help="simulated time in s")
            s.add_argument("--event", action="append",
                           help="load step time:bus:dp[:dq] (pu); repeatable")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    for attr in ("bus", "grid", "dt", "horizon", "event"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    log = lambda s: print(s, file=sys.stderr)  # noqa: E731
    try:
        case = apply_controls(parse_case(args.case), args.controls)
        config = parse_config(args.config) if args.config else RunConfig()
        if args.grid:
            try:
                _grid(config, args.grid)
            except ValueError as exc:
                log(f"error: {exc}")
                return EXIT_USAGE
        status, files = run_pipeline(args.command, case, config, args.out, args, log)
    except (E.GridPassivityError, OSError) as exc:
        log(f"error: {type(exc).__name__}: {exc}")
        return exit_code_for(exc)
    for f in files:
        print(f)
    return status


if __name__ == "__main__":
    sys.exit(main())
