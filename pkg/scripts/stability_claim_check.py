"""Check that every configuration whose buses pass the sweep and whose network
passes the certificate settles after a load step.

    python scripts/stability_claim_check.py --seeds 7 8 9
"""
import argparse

from gridpassivity.validation import evaluate_configuration, synthetic_configurations


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[7])
    args = ap.parse_args()
    counter = 0
    print("seed,configuration,buses_passive,network_passes,premise,converged,final_distance,note")
    for seed in args.seeds:
        for cfg in synthetic_configurations(seed):
            o = evaluate_configuration(cfg)
            counter += o.counterexample
            print(f"{seed},{cfg.name},{sum(o.bus_passive)}/{len(o.bus_passive)},{o.network_passes},"
                  f"{o.premise},{o.converged},{o.final_distance:.3e},{o.note}")
    print(f"counterexamples: {counter}")
    return 1 if counter else 0


if __name__ == "__main__":
    raise SystemExit(main())
