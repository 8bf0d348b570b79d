"""Coresets for the single-center problem.

A coreset here is a subset of the input whose affine hull contains an
approximately optimal center. Three constructions are provided:

* :func:`greedy_center_coreset` for any norm, given an optimal center;
* :func:`frank_wolfe_coreset` for the squared loss;
* :func:`meb_coreset` for the max norm.

:func:`simplex_lower_bound` evaluates the standard-simplex instance on which
small subsets provably fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .geometry import affine_residual, as_points, center_value, meb, norm_of, parse_rho


@dataclass
class Coreset:
    """Selected point ids, the witness center, and a per-step trace.

    Each trace row is ``(index, distance, value)``; its meaning depends on the
    construction (see the builders).
    """

    indices: list[int]
    witness: np.ndarray
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("coreset indices must be distinct")
        self.witness = np.asarray(self.witness, dtype=np.float64).reshape(-1)

    def __len__(self) -> int:
        return len(self.indices)

    def hull_residual(self, P) -> float:
        """Distance of the witness from the affine hull of the selected points."""
        return affine_residual(self.witness, P, self.indices)

    def to_dict(self) -> dict:
        return {
            "indices": list(map(int, self.indices)),
            "witness": self.witness.tolist(),
            "trace": [[int(i), float(a), float(b)] for i, a, b in self.trace],
        }

    def to_text(self) -> str:
        lines = ["indices " + " ".join(str(int(i)) for i in self.indices)]
        lines.append("witness " + " ".join(repr(float(x)) for x in self.witness))
        for i, a, b in self.trace:
            lines.append(f"trace {int(i)} {float(a)!r} {float(b)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Coreset":
        indices, witness, trace = [], None, []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            tag, *rest = line.split()
            if tag == "indices":
                indices = [int(t) for t in rest]
            elif tag == "witness":
                witness = [float(t) for t in rest]
            elif tag == "trace":
                trace.append((int(rest[0]), float(rest[1]), float(rest[2])))
            else:
                raise ValueError(f"line {lineno}: unknown record {tag!r}")
        if witness is None:
            raise ValueError("coreset record has no witness line")
        return cls(indices, np.array(witness), trace)


@dataclass(frozen=True)
class CenterOracle:
    rho: float
    center: np.ndarray
    value: float


# ---------------------------------------------------------------------------
# Optimal centers
# ---------------------------------------------------------------------------

def weiszfeld(X: np.ndarray, tol: float = 1e-9, max_iter: int = 100_000) -> np.ndarray:
    """Geometric median by Weiszfeld iteration, with the Vardi-Zhang step
    when an iterate lands on a data point."""
    y = X.mean(axis=0)
    for _ in range(max_iter):
        diff = X - y
        dist = np.linalg.norm(diff, axis=1)
        at = dist <= 1e-15
        w = 1.0 / np.where(at, 1.0, dist)
        w[at] = 0.0
        # gradient of sum of distances (subgradient-free part)
        R = -(diff * w[:, None]).sum(axis=0)
        rnorm = float(np.linalg.norm(R))
        eta = int(at.sum())
        if eta == 0 and rnorm <= tol:
            break
        if eta and rnorm <= eta:
            # sitting on a data point that is optimal
            break
        T = (w @ X) / w.sum()
        if eta:
            r = rnorm
            y_new = max(0.0, 1.0 - eta / r) * T + min(1.0, eta / r) * y
        else:
            y_new = T
        if np.linalg.norm(y_new - y) <= 1e-16 * (1.0 + np.linalg.norm(y)):
            y = y_new
            break
        y = y_new
    return y


def _lp_center(X: np.ndarray, rho: float, tol: float) -> np.ndarray:
    """Minimizer of ``sum ||x - p||^rho`` for finite ``rho > 1``."""
    scale = float(np.max(np.linalg.norm(X - X.mean(axis=0), axis=1))) or 1.0
    Z = (X - X.mean(axis=0)) / scale

    def fun(y):
        diff = y - Z
        dist = np.linalg.norm(diff, axis=1)
        f = np.sum(dist**rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(dist > 0, dist ** (rho - 2), 0.0)
        g = rho * (w[:, None] * diff).sum(axis=0)
        return f, g

    res = minimize(fun, np.zeros(X.shape[1]), jac=True, method="BFGS", options={"gtol": tol, "maxiter": 10_000})
    return X.mean(axis=0) + scale * res.x


def optimal_center(P, rho) -> CenterOracle:
    """Point minimizing ``delta(c) = (sum ||c - p||^rho)^(1/rho)``.

    Exact for ``rho`` in {2, inf} (centroid, MEB center); Weiszfeld for
    ``rho = 1``; quasi-Newton otherwise.
    """
    X = as_points(P)
    rho = parse_rho(rho)
    if rho == 2:
        c = X.mean(axis=0)
    elif math.isinf(rho):
        c = np.array(meb(X).center)
    elif rho == 1:
        c = weiszfeld(X)
    else:
        c = _lp_center(X, rho, tol=1e-7)
    return CenterOracle(rho=rho, center=c, value=center_value(X, c, rho))


# ---------------------------------------------------------------------------
# Greedy contraction coreset (any norm)
# ---------------------------------------------------------------------------

def greedy_iteration_cap(epsilon: float) -> int:
    """``ceil((4/eps) ln(4/eps))``."""
    return math.ceil((4.0 / epsilon) * math.log(4.0 / epsilon))


def _closest_on_segment(a: np.ndarray, b: np.ndarray, o: np.ndarray) -> np.ndarray:
    ab = b - a
    den = float(ab @ ab)
    if den == 0.0:
        return a.copy()
    t = min(1.0, max(0.0, float((o - a) @ ab) / den))
    return a + t * ab


def greedy_center_coreset(P, rho, epsilon: float, oracle: CenterOracle | None = None) -> Coreset:
    """Grow an approximate center by repeated contraction toward the optimum.

    Starting from the input point closest to the optimal center ``o``, each
    step picks the point ``s`` maximizing ``d(c, s) / d(o, s)`` and moves ``c``
    to the point of segment ``[c, s]`` closest to ``o``. The loop ends once
    ``delta(c) <= (1 + eps) delta(o)`` or after
    ``ceil((4/eps) ln(4/eps)) - 1`` steps, so the coreset never exceeds the
    cap. Trace rows are ``(chosen index, d(c, o), delta(c))``, the first row
    describing the start point.
    """
    X = as_points(P)
    rho = parse_rho(rho)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if oracle is None:
        oracle = optimal_center(X, rho)
    o = np.asarray(oracle.center, dtype=np.float64)
    dist_o = np.linalg.norm(X - o, axis=1)
    start = int(np.argmin(dist_o))
    c = X[start].copy()
    delta_o = float(oracle.value)
    target = (1.0 + epsilon) * delta_o * (1.0 + 1e-9)
    selected = [start]
    value = center_value(X, c, rho)
    trace = [(start, float(np.linalg.norm(c - o)), value)]
    if delta_o == 0.0:
        return Coreset(selected, c, trace)
    cap = greedy_iteration_cap(epsilon)
    zero_tol = 1e-12 * max(delta_o, 1.0)
    while value > target and len(trace) < cap:
        dist_c = np.linalg.norm(X - c, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist_o > zero_tol, dist_c / dist_o, np.where(dist_c > zero_tol, np.inf, 0.0))
        s = int(np.argmax(ratio))
        c = _closest_on_segment(c, X[s], o)
        if s not in selected:
            selected.append(s)
        value = center_value(X, c, rho)
        trace.append((s, float(np.linalg.norm(c - o)), value))
    return Coreset(selected, c, trace)


# ---------------------------------------------------------------------------
# Frank-Wolfe coreset (squared loss)
# ---------------------------------------------------------------------------

def fw_objective(X: np.ndarray, y: np.ndarray) -> float:
    """``g = sum ||y - p_i||^2`` for the point ``y = A x``."""
    return float(np.sum((X - y) ** 2))


def frank_wolfe_coreset(P, epsilon: float, steps: int | None = None) -> Coreset:
    """Frank-Wolfe on ``g(x) = sum_i ||A x - A e_i||^2`` over the simplex.

    ``A`` holds the points as columns and is only touched through products
    ``A x`` and ``A^T y``. The first iterate is the vertex closest to the
    centroid; each further iterate moves toward the vertex with the smallest
    gradient entry using the exact line search. ``steps`` counts iterates
    (default ``2 ceil(1/eps)``), so the k-th iterate is a combination of at
    most k points. Trace rows are ``(vertex, step size, g)``, one per iterate.
    """
    X = as_points(P)
    n = X.shape[0]
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if steps is None:
        steps = 2 * math.ceil(1.0 / epsilon)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    total = X.sum(axis=0)
    mu = total / n
    start = int(np.argmin(np.linalg.norm(X - mu, axis=1)))
    x = np.zeros(n)
    x[start] = 1.0
    y = X[start].copy()
    selected = [start]
    trace = [(start, 1.0, fw_objective(X, y))]
    for _ in range(steps - 1):
        grad = 2.0 * (X @ (n * y - total))
        i = int(np.argmin(grad))
        direction = X[i] - y
        den = float(direction @ direction)
        if den == 0.0:
            gamma = 0.0
        else:
            gamma = min(1.0, max(0.0, float((mu - y) @ direction) / den))
        x *= 1.0 - gamma
        x[i] += gamma
        y = y + gamma * direction
        if gamma > 0.0 and i not in selected:
            selected.append(i)
        trace.append((i, gamma, fw_objective(X, y)))
    return Coreset(selected, y, trace)


# ---------------------------------------------------------------------------
# MEB coreset (max norm)
# ---------------------------------------------------------------------------

def meb_coreset(P, epsilon: float) -> Coreset:
    """Farthest-point core set for the minimum enclosing ball.

    Keeps the exact ball of the selected subset and adds the farthest input
    point until every point lies within ``(1 + eps)`` of the subset radius,
    with at most ``ceil(2/eps)`` points. Trace rows are
    ``(added index, its distance to the old center, subset radius)``.
    """
    X = as_points(P)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    cap = math.ceil(2.0 / epsilon)
    selected = [0]
    ball = meb(X[selected])
    trace = [(0, 0.0, 0.0)]
    while True:
        dist = np.linalg.norm(X - ball.center, axis=1)
        far = int(np.argmax(dist))
        if dist[far] <= (1.0 + epsilon) * ball.radius or len(selected) >= cap or far in selected:
            break
        selected.append(far)
        ball = meb(X[selected])
        trace.append((far, float(dist[far]), ball.radius))
    return Coreset(selected, np.array(ball.center), trace)


# ---------------------------------------------------------------------------
# Standard-simplex lower bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplexInstance:
    """Unit coordinate vectors ``e_1..e_n`` of ``R^n``."""

    n: int

    def points(self) -> np.ndarray:
        return np.eye(self.n)

    def distances(self, x) -> np.ndarray:
        """``||x - e_i||`` for all i, without forming the dense point matrix."""
        x = np.asarray(x, dtype=np.float64)
        sq = float(x @ x) - 2.0 * x + 1.0
        return np.sqrt(np.maximum(sq, 0.0))

    def barycenter(self, c: int | None = None) -> np.ndarray:
        c = self.n if c is None else c
        x = np.zeros(self.n)
        x[:c] = 1.0 / c
        return x


_DENSE_LIMIT = 2000


def simplex_lower_bound(n: int, c: int, rho) -> dict:
    """Analytic and directly evaluated costs of the full and the partial
    barycenter on the standard simplex.

    ``delta_o = n^(1/rho) sqrt((n-1)/n)`` and
    ``delta_oprime = (c ((c-1)/c)^(rho/2) + (n-c) ((c+1)/c)^(rho/2))^(1/rho)``.
    The direct values come from the point-set objective (dense for small
    ``n``, a structured distance evaluation otherwise).
    """
    rho = parse_rho(rho)
    if math.isinf(rho):
        raise ValueError("simplex lower bound needs a finite rho")
    if not 1 <= c < n:
        raise ValueError(f"need 1 <= c < n, got c={c}, n={n}")
    delta_o = n ** (1.0 / rho) * math.sqrt((n - 1) / n)
    delta_op = (c * ((c - 1) / c) ** (rho / 2) + (n - c) * ((c + 1) / c) ** (rho / 2)) ** (1.0 / rho)
    inst = SimplexInstance(n)
    o, op = inst.barycenter(), inst.barycenter(c)
    if n <= _DENSE_LIMIT:
        X = inst.points()
        num_o, num_op = center_value(X, o, rho), center_value(X, op, rho)
    else:
        num_o, num_op = norm_of(inst.distances(o), rho), norm_of(inst.distances(op), rho)
    return {
        "n": n,
        "c": c,
        "rho": rho,
        "delta_o": delta_o,
        "delta_oprime": delta_op,
        "ratio": delta_op / delta_o,
        "numeric_delta_o": num_o,
        "numeric_delta_oprime": num_op,
        "numeric_ratio": num_op / num_o,
        "max_abs_error": max(abs(num_o - delta_o), abs(num_op - delta_op)),
    }
