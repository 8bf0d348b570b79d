"""Solvers for the projective clustering cost ``f_k^q(P, rho)``.

``brute_force_optimal`` is exact on tiny inputs and serves as the oracle for
everything else. The heuristics (``k_center_greedy``, ``lloyd_kmeans``,
``alternating_qflat``) run at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    QFlat,
    as_points,
    assign,
    best_fit_flat_l2,
    distances_to_flat,
    format_rho,
    meb,
    norm_of,
    objective,
    parse_rho,
)
from .projection import STREAM_SOLVER, ProjectionMap, project, rng_stream

BRUTE_FORCE_MAX_N = 12
BRUTE_FORCE_MAX_K = 3


@dataclass(frozen=True)
class ProblemSpec:
    k: int = 1
    q: int = 0
    rho: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.q < 0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        object.__setattr__(self, "rho", parse_rho(self.rho))

    def to_dict(self) -> dict:
        return {"k": self.k, "q": self.q, "rho": format_rho(self.rho)}


@dataclass
class ClusteringSolution:
    flats: list[QFlat]
    assignment: np.ndarray
    value: float
    spec: ProblemSpec | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_flats(cls, P, flats, rho, spec=None, **meta) -> "ClusteringSolution":
        """Assign every point to its nearest flat and evaluate the cost."""
        X = as_points(P)
        a, dist = assign(X, flats)
        return cls(list(flats), a, norm_of(dist, rho), spec, dict(meta))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict() if self.spec else None,
            "value": self.value,
            "flats": [F.to_dict() for F in self.flats],
            "assignment": [int(i) for i in self.assignment],
            **({"meta": self.meta} if self.meta else {}),
        }


def clusters_of(assignment, k: int) -> list[np.ndarray]:
    assignment = np.asarray(assignment)
    return [np.flatnonzero(assignment == j) for j in range(k)]


# ---------------------------------------------------------------------------
# Single-cluster fitting
# ---------------------------------------------------------------------------

def _irls_flat(X: np.ndarray, q: int, rho: float, iters: int = 30) -> QFlat:
    """Local search for an L_rho best q-flat: reweighted principal components
    started from the squared-loss fit, keeping the best candidate seen."""
    best = best_fit_flat_l2(X, q)
    best_val = norm_of(distances_to_flat(X, best), rho)
    power = 16.0 if math.isinf(rho) else rho
    F = best
    for _ in range(iters):
        dist = distances_to_flat(X, F)
        top = float(dist.max())
        if top == 0.0:
            break
        w = np.maximum(dist / top, 1e-8) ** (power - 2.0)
        F = best_fit_flat_l2(X, q, weights=w)
        val = norm_of(distances_to_flat(X, F), rho)
        if val < best_val * (1.0 - 1e-12):
            best, best_val = F, val
        else:
            break
    return best


def fit_flat(X, q: int, rho) -> QFlat:
    """Best single q-flat for a cluster: exact for rho=2, and for q=0 with
    any rho; local search otherwise."""
    from .coresets import optimal_center

    X = as_points(X)
    rho = parse_rho(rho)
    if rho == 2:
        return best_fit_flat_l2(X, q)
    if q == 0:
        return QFlat(optimal_center(X, rho).center)
    return _irls_flat(X, q, rho)


def _cluster_cost(X: np.ndarray, q: int, rho: float) -> float:
    """Exact single-cluster cost used by the brute-force oracle: the sum of
    squared residuals for rho=2, the MEB radius for rho=inf."""
    if rho == 2:
        if X.shape[0] <= q + 1:
            return 0.0
        F = best_fit_flat_l2(X, q)
        r = distances_to_flat(X, F)
        return float(math.fsum(r * r))
    return meb(X).radius if X.shape[0] > 1 else 0.0


# ---------------------------------------------------------------------------
# Exact oracle
# ---------------------------------------------------------------------------

def check_brute_force_supported(n: int, d: int, spec: ProblemSpec) -> None:
    if n > BRUTE_FORCE_MAX_N or spec.k > BRUTE_FORCE_MAX_K:
        raise ValueError(
            f"brute force needs n <= {BRUTE_FORCE_MAX_N} and k <= {BRUTE_FORCE_MAX_K}, got n={n}, k={spec.k}"
        )
    if spec.rho == 2:
        if spec.q >= d:
            raise ValueError(f"q={spec.q} must be < d={d}")
        return
    if math.isinf(spec.rho) and spec.q == 0:
        return
    raise ValueError("brute force supports rho=2 with any q < d, or rho=inf with q=0")


def brute_force_optimal(P, spec: ProblemSpec) -> ClusteringSolution:
    """Exact ``f_k^q(P, rho)`` by enumerating every partition into at most k
    parts (restricted-growth strings), with branch-and-bound pruning on the
    cost of the partial blocks.
    """
    X = as_points(P)
    n, d = X.shape
    check_brute_force_supported(n, d, spec)
    rho, q, k = spec.rho, spec.q, spec.k
    l2 = rho == 2
    cache: dict[int, float] = {}

    def cost(mask: int) -> float:
        v = cache.get(mask)
        if v is None:
            idx = [i for i in range(n) if mask >> i & 1]
            v = _cluster_cost(X[idx], q, rho)
            cache[mask] = v
        return v

    def combine(costs) -> float:
        return math.fsum(costs) if l2 else max(costs, default=0.0)

    best = [math.inf, None]
    masks = [0] * k

    def recurse(i: int, used: int) -> None:
        if combine(cost(m) for m in masks[:used]) >= best[0]:
            return
        if i == n:
            best[0] = combine(cost(m) for m in masks[:used])
            best[1] = masks[:used]
            return
        for j in range(min(used + 1, k)):
            masks[j] |= 1 << i
            recurse(i + 1, max(used, j + 1))
            masks[j] &= ~(1 << i)

    recurse(0, 0)
    blocks = [[i for i in range(n) if m >> i & 1] for m in best[1]]
    flats = []
    for idx in blocks:
        Y = X[idx]
        if l2:
            flats.append(best_fit_flat_l2(Y, q))
        else:
            flats.append(QFlat(np.array(meb(Y).center)))
    while len(flats) < k:
        flats.append(flats[-1])
    sol = ClusteringSolution.from_flats(X, flats, rho, spec, solver="brute_force")
    sol.meta["partition_value"] = math.sqrt(best[0]) if l2 else best[0]
    return sol


# ---------------------------------------------------------------------------
# Heuristics
# ---------------------------------------------------------------------------

def k_center_greedy(P, k: int) -> ClusteringSolution:
    """Farthest-point traversal from point 0 (2-approximation for k-center)."""
    X = as_points(P)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    centers = [0]
    dist = np.linalg.norm(X - X[0], axis=1)
    while len(centers) < k:
        j = int(np.argmax(dist))
        centers.append(j)
        dist = np.minimum(dist, np.linalg.norm(X - X[j], axis=1))
    flats = [QFlat(X[j]) for j in centers]
    return ClusteringSolution.from_flats(
        X, flats, math.inf, ProblemSpec(k, 0, math.inf), solver="k_center_greedy", centers=centers
    )


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    d2 = np.sum((X - X[first]) ** 2, axis=1)
    while len(chosen) < k:
        total = float(d2.sum())
        if total == 0.0:
            rest = [i for i in range(n) if i not in chosen]
            chosen.append(int(rng.choice(rest)))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((X - X[chosen[-1]]) ** 2, axis=1))
    return X[chosen].copy()


def lloyd_kmeans(P, k: int, seed: int = 0, max_iters: int = 100, n_init: int = 1) -> ClusteringSolution:
    """Lloyd iterations from k-means++ seeding; the best of ``n_init`` runs.

    An emptied cluster keeps its previous center, so the cost never
    increases between iterations.
    """
    X = as_points(P)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    spec = ProblemSpec(k, 0, 2)
    best = None
    for run in range(n_init):
        rng = rng_stream(seed, STREAM_SOLVER, run)
        C = kmeans_pp_init(X, k, rng)
        history = []
        labels = None
        for _ in range(max_iters):
            flats = [QFlat(c) for c in C]
            new, dist = assign(X, flats)
            history.append(norm_of(dist, 2))
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            for j in range(k):
                members = labels == j
                if members.any():
                    C[j] = X[members].mean(axis=0)
        sol = ClusteringSolution.from_flats(X, [QFlat(c) for c in C], 2, spec, solver="lloyd_kmeans", history=history)
        if best is None or sol.value < best.value:
            best = sol
    return best


def hartigan_moves(X: np.ndarray, labels: np.ndarray, k: int, max_passes: int = 50) -> np.ndarray | None:
    """Single-point moves for k-means with exact cost deltas.

    Moving ``x`` from cluster A to B changes the cost by
    ``|B|/(|B|+1) |x - mu_B|^2 - |A|/(|A|-1) |x - mu_A|^2``. Moves that lower
    the cost are applied until none is left. Returns the final centers, or
    None when some cluster is empty.
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k).astype(float)
    if np.any(counts == 0):
        return None
    sums = np.zeros((k, X.shape[1]))
    np.add.at(sums, labels, X)
    for _ in range(max_passes):
        moved = False
        for i, x in enumerate(X):
            a = labels[i]
            if counts[a] <= 1:
                continue
            mu = sums / counts[:, None]
            d2 = np.sum((mu - x) ** 2, axis=1)
            gain = counts / (counts + 1.0) * d2
            gain[a] = np.inf
            b = int(np.argmin(gain))
            if gain[b] < counts[a] / (counts[a] - 1.0) * d2[a] * (1.0 - 1e-12):
                labels[i] = b
                counts[a] -= 1
                counts[b] += 1
                sums[a] -= x
                sums[b] += x
                moved = True
        if not moved:
            break
    return sums / counts[:, None]


def _init_flats(X: np.ndarray, k: int, q: int, rng: np.random.Generator) -> list[QFlat]:
    """D^2 seeding generalized to flats: each new flat is fitted through q+1
    points, the first drawn with probability proportional to the squared
    distance to the flats chosen so far."""
    n = X.shape[0]
    flats: list[QFlat] = []
    d2 = np.ones(n)
    for _ in range(k):
        total = float(d2.sum())
        first = int(rng.choice(n, p=d2 / total)) if total > 0 else int(rng.integers(n))
        rest = rng.choice(np.delete(np.arange(n), first), size=min(q, n - 1), replace=False)
        F = best_fit_flat_l2(X[np.concatenate([[first], rest]).astype(np.intp)], q)
        flats.append(F)
        d2 = np.minimum(d2, distances_to_flat(X, F) ** 2) if len(flats) > 1 else distances_to_flat(X, F) ** 2
    return flats


def alternating_qflat(
    P, spec: ProblemSpec, seed: int = 0, max_iters: int = 100, restarts: int = 10
) -> ClusteringSolution:
    """Alternate nearest-flat assignment and per-cluster refits.

    Each restart starts from k flats fitted through q+1 random points. A
    refit is exact for rho=2 and for q=0; other cases use a reweighted local
    search. Refits that would raise a cluster's cost are rejected, so the
    total cost never increases. Returns the best restart.
    """
    X = as_points(P)
    n, d = X.shape
    k, q, rho = spec.k, spec.q, spec.rho
    if q >= d:
        raise ValueError(f"q={q} must be < d={d}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    best = None
    for run in range(restarts):
        rng = rng_stream(seed, STREAM_SOLVER, run)
        flats = _init_flats(X, k, q, rng)
        labels, dist = assign(X, flats)
        value = norm_of(dist, rho)
        history = [value]
        for _ in range(max_iters):
            new_flats = list(flats)
            for j in range(k):
                idx = labels == j
                if not idx.any():
                    continue
                Y = X[idx]
                cand = fit_flat(Y, q, rho)
                if norm_of(distances_to_flat(Y, cand), rho) <= norm_of(distances_to_flat(Y, flats[j]), rho):
                    new_flats[j] = cand
            new_labels, new_dist = assign(X, new_flats)
            new_value = norm_of(new_dist, rho)
            if new_value > value:
                break
            improved = new_value < value * (1.0 - 1e-12)
            changed = not np.array_equal(new_labels, labels)
            flats, labels, value = new_flats, new_labels, new_value
            history.append(value)
            if not improved and not changed:
                break
        if rho == 2 and q == 0:
            centers = hartigan_moves(X, labels, k)
            if centers is not None:
                cand = [QFlat(c) for c in centers]
                cand_value = norm_of(assign(X, cand)[1], rho)
                if cand_value < value:
                    flats, value = cand, cand_value
                    history.append(value)
        sol = ClusteringSolution.from_flats(X, flats, rho, spec, solver="alternating_qflat", history=history)
        if best is None or sol.value < best.value:
            best = sol
    return best


# ---------------------------------------------------------------------------
# Dispatch and verification
# ---------------------------------------------------------------------------

SOLVERS = ("auto", "brute_force", "k_center", "lloyd", "alternating")


def solve(P, spec: ProblemSpec, solver: str = "auto", seed: int = 0) -> ClusteringSolution:
    """Run one of the solvers; ``"auto"`` uses brute force when it applies and
    otherwise the natural heuristic for the spec."""
    X = as_points(P)
    n, d = X.shape
    if solver == "auto":
        try:
            check_brute_force_supported(n, d, spec)
            solver = "brute_force"
        except ValueError:
            if spec.q == 0 and math.isinf(spec.rho):
                solver = "k_center"
            elif spec.q == 0 and spec.rho == 2:
                solver = "lloyd"
            else:
                solver = "alternating"
    if solver == "brute_force":
        return brute_force_optimal(X, spec)
    if solver == "k_center":
        if spec.q != 0 or not math.isinf(spec.rho):
            raise ValueError("k_center solver needs q=0 and rho=inf")
        sol = k_center_greedy(X, min(spec.k, n))
        sol.spec = spec
        return sol
    if solver == "lloyd":
        if spec.q != 0 or spec.rho != 2:
            raise ValueError("lloyd solver needs q=0 and rho=2")
        return lloyd_kmeans(X, min(spec.k, n), seed=seed, n_init=5)
    if solver == "alternating":
        return alternating_qflat(X, ProblemSpec(min(spec.k, n), spec.q, spec.rho), seed=seed)
    raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")


@dataclass
class PreservationReport:
    source_value: float
    image_value: float
    epsilon: float

    @property
    def ratio(self) -> float:
        if self.source_value == 0.0:
            return 1.0 if self.image_value == 0.0 else math.inf
        return self.image_value / self.source_value

    @property
    def passed(self) -> bool:
        return 1.0 - self.epsilon <= self.ratio <= 1.0 + self.epsilon

    def to_dict(self) -> dict:
        return {
            "source_value": self.source_value,
            "image_value": self.image_value,
            "ratio": self.ratio,
            "epsilon": self.epsilon,
            "pass": self.passed,
        }


def verify_objective_preservation(P, pmap: ProjectionMap, spec: ProblemSpec, epsilon: float) -> PreservationReport:
    """Exact optima before and after projection, compared as a ratio."""
    X = as_points(P)
    check_brute_force_supported(X.shape[0], X.shape[1], spec)
    check_brute_force_supported(X.shape[0], pmap.m, spec)
    src = brute_force_optimal(X, spec).value
    img = brute_force_optimal(project(X, pmap), spec).value
    return PreservationReport(src, img, float(epsilon))


__all__ = [
    "ProblemSpec",
    "ClusteringSolution",
    "brute_force_optimal",
    "k_center_greedy",
    "lloyd_kmeans",
    "alternating_qflat",
    "fit_flat",
    "solve",
    "verify_objective_preservation",
    "objective",
]
