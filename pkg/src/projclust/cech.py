"""Čech filtrations from minimum-enclosing-ball radii, and the sandwich check
between the filtrations of a point set and of its random projection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .geometry import as_points, meb_radii_batch
from .projection import DimensionBudget, ProjectionMap, project, projective_dimension

DEFAULT_BUDGET = 10**6


def colex_key(simplex: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(sorted(simplex, reverse=True))


def enumerate_simplices(n: int, max_size: int) -> list[tuple[int, ...]]:
    """All vertex subsets of size 1..max_size in colexicographic order.

    Faces precede their cofaces in this order.
    """
    out = [s for size in range(1, max_size + 1) for s in combinations(range(n), size)]
    out.sort(key=colex_key)
    return out


def count_simplices(n: int, max_size: int) -> int:
    return sum(math.comb(n, size) for size in range(1, max_size + 1))


@dataclass
class FilteredComplex:
    """Simplices (sorted vertex tuples, colex order) with their MEB radii."""

    simplices: list[tuple[int, ...]]
    radii: np.ndarray
    index: dict = field(default=None, repr=False)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=np.float64)
        if self.index is None:
            self.index = {s: i for i, s in enumerate(self.simplices)}

    def __len__(self) -> int:
        return len(self.simplices)

    def radius(self, simplex) -> float:
        return float(self.radii[self.index[tuple(sorted(simplex))]])

    def at(self, alpha: float) -> set[tuple[int, ...]]:
        """The complex at scale ``alpha``: simplices with radius <= alpha."""
        return {s for s, r in zip(self.simplices, self.radii) if r <= alpha}

    def monotonicity_violations(self, tol: float = 0.0) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        """Pairs (facet, simplex) whose radii decrease under inclusion."""
        bad = []
        for s, r in zip(self.simplices, self.radii):
            if len(s) < 2:
                continue
            for face in combinations(s, len(s) - 1):
                if self.radius(face) > r + tol:
                    bad.append((face, s))
        return bad

    def to_text(self) -> str:
        return "".join(
            " ".join(map(str, s)) + "\t" + repr(float(r)) + "\n" for s, r in zip(self.simplices, self.radii)
        )

    @classmethod
    def from_text(cls, text: str) -> "FilteredComplex":
        simplices, radii = [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            verts, r = line.split("\t")
            simplices.append(tuple(int(v) for v in verts.split()))
            radii.append(float(r))
        return cls(simplices, np.array(radii))


def build_cech(P, s_max: int, budget: int = DEFAULT_BUDGET) -> FilteredComplex:
    """Every simplex of dimension <= ``s_max`` labelled with its MEB radius."""
    X = as_points(P)
    n = X.shape[0]
    if s_max < 1:
        raise ValueError(f"s_max must be >= 1, got {s_max}")
    size = min(s_max + 1, n)
    total = count_simplices(n, size)
    if total > budget:
        raise ValueError(f"complex would have {total} simplices, over the budget of {budget}")
    simplices = enumerate_simplices(n, size)
    radii = np.empty(len(simplices))
    by_size: dict[int, list[int]] = {}
    for i, s in enumerate(simplices):
        by_size.setdefault(len(s), []).append(i)
    for k, rows in by_size.items():
        verts = np.array([simplices[i] for i in rows], dtype=np.intp).reshape(len(rows), k)
        radii[rows] = meb_radii_batch(X, verts)
    return FilteredComplex(simplices, radii)


def cech_dimension(n: int, epsilon: float, lam: float = 1.0, coreset_constant: float = 1.0) -> int:
    """Target dimension for radius preservation (q=0, rho=inf)."""
    return projective_dimension(
        DimensionBudget(n=max(n, 2), q=0, epsilon=epsilon, rho=math.inf, lam=lam, coreset_constant=coreset_constant)
    )


@dataclass
class SandwichReport:
    epsilon: float
    c_slack: float
    min_ratio: float
    max_ratio: float
    violations: list
    inclusion_violations: list
    checked: int

    @property
    def passed(self) -> bool:
        """Every radius ratio lies in ``[1 - c eps, 1 + c eps]``."""
        return not self.violations

    @property
    def inclusion_passed(self) -> bool:
        """The filtration inclusions hold for every scale."""
        return not self.inclusion_violations

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c_slack": self.c_slack,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "checked": self.checked,
            "violations": [list(s) for s in self.violations],
            "inclusion_violations": [list(s) for s in self.inclusion_violations],
            "pass": self.passed,
            "inclusion_pass": self.inclusion_passed,
        }


def compare_filtrations(source: FilteredComplex, image: FilteredComplex, epsilon: float, c_slack: float = 2.0) -> SandwichReport:
    """Per-simplex radius comparison of two filtrations on the same simplices.

    Two verdicts are reported. The band check asks
    ``(1 - c eps) r_P <= r_Q <= (1 + c eps) r_P``. The inclusion check asks
    ``C_{(1-c eps) a}(P) ⊆ C_a(Q) ⊆ C_{(1+c eps) a}(P)`` for every scale
    ``a``, which per simplex reads ``r_P / (1 + c eps) <= r_Q <= r_P / (1 - c eps)``.
    Neither implies the other: the band is tighter above and looser below.
    """
    if source.simplices != image.simplices:
        raise ValueError("filtrations are built on different simplices")
    lo_f, hi_f = 1.0 - c_slack * epsilon, 1.0 + c_slack * epsilon
    rp, rq = source.radii, image.radii
    tol = 1e-12 * max(float(rp.max(initial=0.0)), 1.0)
    band_bad = (rq < lo_f * rp - tol) | (rq > hi_f * rp + tol)
    incl_bad = (rq * hi_f < rp - tol) | (rq * lo_f > rp + tol)
    pos = rp > 0
    ratios = rq[pos] / rp[pos]
    return SandwichReport(
        epsilon=float(epsilon),
        c_slack=float(c_slack),
        min_ratio=float(ratios.min()) if ratios.size else 1.0,
        max_ratio=float(ratios.max()) if ratios.size else 1.0,
        violations=[source.simplices[i] for i in np.flatnonzero(band_bad)],
        inclusion_violations=[source.simplices[i] for i in np.flatnonzero(incl_bad)],
        checked=len(source),
    )


def verify_sandwich(P, pmap: ProjectionMap, s_max: int, epsilon: float, c_slack: float = 2.0,
                    budget: int = DEFAULT_BUDGET) -> SandwichReport:
    """Build the filtrations of ``P`` and of its image and compare them."""
    if c_slack <= 1:
        raise ValueError(f"c_slack must exceed 1, got {c_slack}")
    if not 0.0 < epsilon <= (c_slack - 1.0) / c_slack:
        raise ValueError(f"epsilon must lie in (0, (c-1)/c] = (0, {(c_slack - 1.0) / c_slack}], got {epsilon}")
    X = as_points(P)
    return compare_filtrations(build_cech(X, s_max, budget), build_cech(project(X, pmap), s_max, budget), epsilon, c_slack)


def inclusions_hold(source: FilteredComplex, image: FilteredComplex, epsilon: float, c_slack: float, alphas) -> bool:
    """Set-level check of the two filtration inclusions on a grid of scales."""
    lo_f, hi_f = 1.0 - c_slack * epsilon, 1.0 + c_slack * epsilon
    for a in alphas:
        if not source.at(lo_f * a) <= image.at(a):
            return False
        if not image.at(a) <= source.at(hi_f * a):
            return False
    return True
