"""Sup-distance of the FreeJacobi e1 measure to the semicircle law as N grows."""
import argparse
import time

import numpy as np

from specmeasure import ConvergenceStudy, DomainProbe, OperatorSpec, Semicircle, run_cdf_convergence
from specmeasure.io import atomic_write, format_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ns", default="50,100,200,400,800,1600,2000")
    parser.add_argument("--grid-points", type=int, default=50)
    parser.add_argument("--output", help="CSV path (default: stdout)")
    args = parser.parse_args()

    Ns = [int(v) for v in args.ns.split(",")]
    grid = np.linspace(-1.9, 1.9, args.grid_points + 2)[1:-1]
    study = ConvergenceStudy(OperatorSpec("FreeJacobi"), DomainProbe.basis(1), Ns, grid,
                             oracle=Semicircle(0.0, 2.0))
    start = time.perf_counter()
    report = run_cdf_convergence(study)
    rows = [(N, report.sup_distance[(N, 0.0)], report.sup_distance[(N, 0.0)] * N) for N in Ns]
    text = format_csv(["N", "sup_distance", "N_times_distance"], rows,
                      [f"elapsed_s={time.perf_counter() - start:.2f}"])
    if args.output:
        atomic_write(args.output, text)
    else:
        print(text, end="")


if __name__ == "__main__":
    main()
