"""Lag tuning on the reference bus and on a batch of random exciter-destabilized machines.

    python scripts/tuner_demo.py --count 20 --seed 1
"""
import argparse

import numpy as np

from gridpassivity.errors import TuningFailed
from gridpassivity.linear_analysis import linearize_bus, passivity_sweep
from gridpassivity.synthetic import lag_example_machine, synthetic_violating_machines
from gridpassivity.tuner import TuningConstraints, bus_factory, find_violation_band, tune_lag


def tune_one(label, m):
    exc = m.model.controllers.exciter
    rep = passivity_sweep(linearize_bus(m.model, m.x_hat, m.u_hat))
    band = find_violation_band(rep)
    try:
        res = tune_lag(bus_factory(m.model, m.v, m.i), band, TuningConstraints(exc.k_a, exc.t_a))
        result = f"t_b = {res.t_b:.4g} s, t_c = {res.t_c:.4g} s, worst min_eig {res.report.worst[1]:.3e}"
    except TuningFailed as err:
        result = f"failed: {err}"
    print(f"{label}: K_a = {exc.k_a:g}, band [{band.lo:.3g}, {band.hi:.3g}] rad/s -> {result}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--min-band-lo", type=float, default=0.05)
    args = ap.parse_args()
    tune_one("reference bus", lag_example_machine())
    machines = synthetic_violating_machines(np.random.default_rng(args.seed), args.count,
                                            min_band_lo=args.min_band_lo)
    for k, m in enumerate(machines):
        tune_one(f"machine {k:2d}", m)


if __name__ == "__main__":
    main()
