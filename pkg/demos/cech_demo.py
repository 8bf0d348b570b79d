"""Compare the Cech filtration of a point set with that of its projection.

Run with ``python3 demos/cech_demo.py``.
"""

import numpy as np

from projclust.cech import build_cech, compare_filtrations
from projclust.projection import make_projection, project


def main():
    X = np.random.default_rng(5).normal(size=(25, 100))
    K = build_cech(X, 3)
    print(f"{len(K.simplices)} simplices up to 3 vertices")
    for m in (5, 20, 60):
        img = build_cech(project(X, make_projection(100, m, seed=2)), 3)
        rep = compare_filtrations(K, img, 0.4, 2.0)
        print(f"m={m:3d}  ratios in [{rep.min_ratio:.3f}, {rep.max_ratio:.3f}]  "
              f"band={rep.passed}  inclusions={rep.inclusion_passed}")


if __name__ == "__main__":
    main()
