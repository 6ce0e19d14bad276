"""Stone reconstruction error versus epsilon for a chosen operator and interval."""
import argparse

import numpy as np

from specmeasure import DomainProbe, OperatorSpec, build_truncation, stone_limit_study
from specmeasure.io import format_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", default="FreeJacobi")
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--a", type=float, default=-1.0)
    parser.add_argument("--b", type=float, default=1.0)
    parser.add_argument("--levels", type=int, default=10, help="number of epsilon halvings")
    args = parser.parse_args()

    T = build_truncation(OperatorSpec(args.kind), args.n)
    x = DomainProbe.basis(1).vector(args.n)
    epsilons = [0.1 / 2 ** k for k in range(args.levels + 1)]
    study = stone_limit_study(T, args.a, args.b, x, epsilons)
    print(format_csv(["epsilon", "error", "ratio", "panels"],
                     [(*row, p) for row, p in zip(study.rows(), study.panels)],
                     [f"endpoint_distance={study.endpoint_distance:.6g}",
                      f"rate_ok={study.rate_ok}"]), end="")


if __name__ == "__main__":
    main()
