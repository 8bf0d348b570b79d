"""Cluster high-dimensional points through a random projection and compare
with the exact optimum.

Run with ``python3 demos/project_and_cluster.py``.
"""

import numpy as np

from projclust.clustering import ProblemSpec, brute_force_optimal
from projclust.pipeline import PipelineConfig, cluster_via_projection


def main():
    rng = np.random.default_rng(0)
    # two well separated blobs in 200 dimensions
    X = np.vstack([rng.normal(size=(5, 200)), rng.normal(size=(5, 200)) + 4.0])
    spec = ProblemSpec(k=2, q=0, rho=2)
    opt = brute_force_optimal(X, spec).value
    for m in (5, 20, 80):
        sol = cluster_via_projection(X, PipelineConfig(spec, epsilon=0.5, seed=1, m=m))
        print(f"m={m:3d}  lifted={sol.value:.4f}  naive={sol.meta['naive_lift_value']:.4f}  "
              f"ratio to optimum={sol.value / opt:.4f}")


if __name__ == "__main__":
    main()
