"""Build the three center coresets on one point set and print their sizes
and approximation ratios.

Run with ``python3 demos/coresets_demo.py``.
"""

import math

import numpy as np

from projclust.coresets import (
    frank_wolfe_coreset,
    fw_objective,
    greedy_center_coreset,
    meb_coreset,
    optimal_center,
    simplex_lower_bound,
)
from projclust.geometry import center_value, meb


def main():
    X = np.random.default_rng(3).normal(size=(500, 30))
    eps = 0.1
    for rho in (1, 2, 4):
        o = optimal_center(X, rho)
        cs = greedy_center_coreset(X, rho, eps, o)
        print(f"greedy rho={rho}: size {len(cs)}, value ratio {center_value(X, cs.witness, rho) / o.value:.4f}")
    cs = frank_wolfe_coreset(X, eps)
    ratio = fw_objective(X, cs.witness) / fw_objective(X, X.mean(axis=0))
    print(f"frank-wolfe: size {len(cs)}, objective ratio {ratio:.5f}")
    cs = meb_coreset(X, eps)
    ratio = center_value(X, cs.witness, math.inf) / meb(X).radius
    print(f"meb: size {len(cs)}, radius ratio {ratio:.4f}")
    r = simplex_lower_bound(10_000, 10, 2)
    print(f"simplex, 10 of 10000 vertices: best ratio {r['ratio']:.4f}")


if __name__ == "__main__":
    main()
