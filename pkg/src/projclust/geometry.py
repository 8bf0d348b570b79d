"""Geometric primitives: point sets, affine flats, distances, spans and
minimum enclosing balls.

A point set is an ``(n, d)`` float array; the id of a point is its row index.
Norms ``rho`` are positive reals or ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

ORTHO_TOL = 1e-9
RANK_TOL = 1e-10


def as_points(P, *, name: str = "P") -> np.ndarray:
    """Validate and return a point set as a C-contiguous ``(n, d)`` float array."""
    X = np.ascontiguousarray(P, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array of points, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must contain at least one point of dimension >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return X


def parse_rho(rho) -> float:
    """Normalize a norm parameter: positive number >= 1, or ``inf``/``"inf"``."""
    if isinstance(rho, str):
        token = rho.strip().lower()
        if token in ("inf", "infinity", "∞"):
            return math.inf
        rho = float(token)
    rho = float(rho)
    if math.isnan(rho) or rho < 1:
        raise ValueError(f"rho must be >= 1 or inf, got {rho}")
    return rho


def format_rho(rho: float):
    rho = parse_rho(rho)
    if math.isinf(rho):
        return "inf"
    return int(rho) if float(rho).is_integer() else rho


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QFlat:
    """Affine flat ``anchor + span(basis)``; ``basis`` has orthonormal rows.

    An empty basis (shape ``(0, d)``) is a single point.
    """

    anchor: np.ndarray
    basis: np.ndarray = field(default=None)

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=np.float64).reshape(-1)
        d = anchor.shape[0]
        basis = self.basis
        if basis is None:
            basis = np.zeros((0, d))
        basis = np.asarray(basis, dtype=np.float64).reshape(-1, d) if d else np.zeros((0, 0))
        q = basis.shape[0]
        if q >= d and d > 0:
            raise ValueError(f"flat dimension q={q} must be < d={d}")
        if q:
            gram = basis @ basis.T
            if np.max(np.abs(gram - np.eye(q))) > ORTHO_TOL:
                raise ValueError("flat basis is not orthonormal")
        object.__setattr__(self, "anchor", _frozen(anchor))
        object.__setattr__(self, "basis", _frozen(basis))

    @property
    def d(self) -> int:
        return self.anchor.shape[0]

    @property
    def q(self) -> int:
        return self.basis.shape[0]

    @classmethod
    def point(cls, x) -> "QFlat":
        return cls(np.asarray(x, dtype=np.float64))

    def project(self, X) -> np.ndarray:
        """Orthogonal projection of points onto the flat."""
        X = np.asarray(X, dtype=np.float64)
        Y = X - self.anchor
        if self.q:
            return self.anchor + (Y @ self.basis.T) @ self.basis
        return np.broadcast_to(self.anchor, X.shape).copy()

    def sample(self, coeffs) -> np.ndarray:
        """Points ``anchor + coeffs @ basis`` for coefficient rows of length q."""
        coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1, self.q)
        return self.anchor + coeffs @ self.basis

    def to_dict(self) -> dict:
        return {"anchor": self.anchor.tolist(), "basis": self.basis.tolist()}


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"ball radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "center", _frozen(np.reshape(self.center, -1)))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, X, tol: float = 1e-9) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.linalg.norm(X - self.center, axis=1) <= self.radius + tol


# ---------------------------------------------------------------------------
# Orthonormalization and spans
# ---------------------------------------------------------------------------

def orthonormalize(V, tol: float = RANK_TOL) -> np.ndarray:
    """Rank-revealing Gram-Schmidt with one re-orthogonalization pass.

    Rows of ``V`` are processed in order; a row whose residual norm falls
    below ``tol`` times the largest input row norm is dropped. Returns the
    orthonormal rows as an ``(r, d)`` array.
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    d = V.shape[1]
    if V.shape[0] == 0:
        return np.zeros((0, d))
    scale = float(np.max(np.linalg.norm(V, axis=1)))
    if scale == 0.0:
        return np.zeros((0, d))
    Q = np.empty((min(V.shape), d))
    r = 0
    for v in V:
        w = v.copy()
        for _ in range(2):
            for j in range(r):
                w -= (Q[j] @ w) * Q[j]
        nw = float(np.linalg.norm(w))
        if nw > tol * scale:
            Q[r] = w / nw
            r += 1
            if r == d:
                break
    return Q[:r].copy()


def complete_basis(B, q: int, d: int) -> np.ndarray:
    """Extend orthonormal rows ``B`` to ``q`` rows using coordinate axes."""
    B = np.asarray(B, dtype=np.float64).reshape(-1, d)[:q]
    if B.shape[0] >= q:
        return B
    rows = list(B)
    for axis in np.eye(d):
        if len(rows) == q:
            break
        w = axis.copy()
        for _ in range(2):
            for b in rows:
                w -= (b @ w) * b
        nw = float(np.linalg.norm(w))
        if nw > 1e-6:
            rows.append(w / nw)
    return np.array(rows).reshape(q, d)


def span_basis(P, indices: Sequence[int] | None = None) -> np.ndarray:
    """Orthonormal basis (rows) of the linear span of the selected points."""
    X = as_points(P)
    if indices is not None:
        X = X[np.asarray(indices, dtype=int)]
    return orthonormalize(X)


def affine_hull(P, indices: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Anchor and orthonormal basis of the affine hull of the selected points."""
    X = as_points(P)
    if indices is not None:
        X = X[np.asarray(indices, dtype=int)]
    anchor = X[0].copy()
    return anchor, orthonormalize(X[1:] - anchor) if len(X) > 1 else np.zeros((0, X.shape[1]))


def affine_residual(x, P, indices: Sequence[int] | None = None) -> float:
    """Distance from ``x`` to the affine hull of the selected points."""
    anchor, B = affine_hull(P, indices)
    y = np.asarray(x, dtype=np.float64) - anchor
    if B.shape[0]:
        y = y - (B @ y) @ B
    return float(np.linalg.norm(y))


# ---------------------------------------------------------------------------
# Distances and the clustering objective
# ---------------------------------------------------------------------------

def point_to_flat_distance(p, F: QFlat) -> float:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape[0] != F.d:
        raise ValueError(f"dimension mismatch: point has d={p.shape[0]}, flat has d={F.d}")
    y = p - F.anchor
    if F.q:
        y = y - (F.basis @ y) @ F.basis
    return float(np.linalg.norm(y))


def distances_to_flat(X, F: QFlat) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != F.d:
        raise ValueError(f"dimension mismatch: points have d={X.shape[1]}, flat has d={F.d}")
    Y = X - F.anchor
    if F.q:
        Y = Y - (Y @ F.basis.T) @ F.basis
    return np.sqrt(np.einsum("ij,ij->i", Y, Y))


def distance_matrix(X, flats: Sequence[QFlat]) -> np.ndarray:
    """``(n, k)`` matrix of point-to-flat distances."""
    if len(flats) == 0:
        raise ValueError("flat list must be nonempty")
    return np.column_stack([distances_to_flat(X, F) for F in flats])


def assign(X, flats: Sequence[QFlat]) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-flat assignment (lowest index on ties) and the distances."""
    D = distance_matrix(X, flats)
    a = np.argmin(D, axis=1)
    return a, D[np.arange(D.shape[0]), a]


def norm_of(dists, rho) -> float:
    """``(sum dists**rho)**(1/rho)``, or ``max`` for ``rho=inf``.

    The sum is evaluated after scaling by the largest entry, so large ``rho``
    does not overflow.
    """
    rho = parse_rho(rho)
    dists = np.asarray(dists, dtype=np.float64).reshape(-1)
    if dists.size == 0:
        return 0.0
    top = float(np.max(dists))
    if math.isinf(rho) or top == 0.0:
        return top
    if rho == 1:
        return float(math.fsum(dists))
    if rho == 2:
        return math.sqrt(math.fsum(dists * dists))
    return top * math.fsum((dists / top) ** rho) ** (1.0 / rho)


def objective(P, flats: Sequence[QFlat], rho) -> float:
    """Projective clustering cost of ``P`` against a candidate set of flats."""
    X = as_points(P)
    flats = list(flats)
    if not flats:
        raise ValueError("flat list must be nonempty")
    for F in flats:
        if F.d != X.shape[1]:
            raise ValueError(f"dimension mismatch: points have d={X.shape[1]}, flat has d={F.d}")
    _, dist = assign(X, flats)
    return norm_of(dist, rho)


def center_value(P, c, rho) -> float:
    """Cost of a single point center, ``delta(c)``."""
    X = as_points(P)
    return norm_of(np.linalg.norm(X - np.asarray(c, dtype=np.float64), axis=1), rho)


# ---------------------------------------------------------------------------
# Best-fit flats under the squared loss
# ---------------------------------------------------------------------------

def best_fit_flat_l2(P, q: int, weights=None) -> QFlat:
    """Affine q-flat minimizing the (weighted) sum of squared distances.

    The anchor is the centroid and the basis holds the top-q principal
    directions. Missing directions (rank-deficient input) are completed from
    coordinate axes.
    """
    X = as_points(P)
    n, d = X.shape
    if not 0 <= q < d:
        raise ValueError(f"need 0 <= q < d, got q={q}, d={d}")
    if weights is None:
        centroid = X.mean(axis=0)
        Y = X - centroid
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != n or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        centroid = (w @ X) / w.sum()
        Y = (X - centroid) * np.sqrt(w)[:, None]
    if q == 0:
        return QFlat(centroid)
    _, s, Vt = np.linalg.svd(Y, full_matrices=False)
    keep = s > RANK_TOL * max(float(s[0]) if s.size else 0.0, 1e-300)
    B = orthonormalize(Vt[keep][:q])
    return QFlat(centroid, complete_basis(B, q, d))


def scatter_residual(P, q: int) -> float:
    """Sum of the d-q smallest eigenvalues of the centered scatter matrix."""
    X = as_points(P)
    Y = X - X.mean(axis=0)
    ev = np.linalg.eigvalsh(Y.T @ Y)
    return float(max(np.sum(ev[: X.shape[1] - q]), 0.0))


# ---------------------------------------------------------------------------
# Minimum enclosing ball
# ---------------------------------------------------------------------------

def _circumball(X: np.ndarray, idx: list[int]) -> tuple[np.ndarray, float] | None:
    """Smallest ball with all points ``X[idx]`` on its boundary.

    The center lies in the affine hull of the points. Returns None when the
    points are affinely dependent.
    """
    base = X[idx[0]]
    if len(idx) == 1:
        return base.copy(), 0.0
    V = X[idx[1:]] - base
    G = V @ V.T
    rhs = 0.5 * np.diag(G)
    alpha = np.linalg.lstsq(G, rhs, rcond=None)[0]
    c = base + alpha @ V
    r2 = np.sum((X[idx] - c) ** 2, axis=1)
    scale = max(float(np.max(np.diag(G))), 1e-300)
    if np.max(r2) - np.min(r2) > 1e-8 * scale:
        return None
    return c, math.sqrt(float(np.max(r2)))


def _inside(x: np.ndarray, c: np.ndarray, r: float) -> bool:
    return float(np.linalg.norm(x - c)) <= r * (1.0 + 1e-12) + 1e-12


def _meb_welzl(X: np.ndarray, order: list[int]) -> tuple[np.ndarray, float]:
    """Move-to-front Welzl recursion with a pivoting outer loop."""
    d = X.shape[1]

    def mtf(end: int, boundary: list[int]) -> tuple[np.ndarray, float]:
        if boundary:
            ball = _circumball(X, boundary)
            if ball is None:
                # affinely dependent boundary (floating-point degeneracy):
                # fall back to the ball spanned by the farthest boundary pair
                B = X[boundary]
                D = np.linalg.norm(B[:, None, :] - B[None, :, :], axis=2)
                a, b = np.unravel_index(int(np.argmax(D)), D.shape)
                c = 0.5 * (B[a] + B[b])
                ball = (c, float(np.max(np.linalg.norm(B - c, axis=1))))
        else:
            ball = (None, -1.0)
        if len(boundary) == d + 1:
            return ball
        i = 0
        while i < end:
            j = order[i]
            c, r = ball
            if r < 0 or not _inside(X[j], c, r):
                ball = mtf(i, boundary + [j])
                order.pop(i)
                order.insert(0, j)
            i += 1
        return ball

    # Pivoting: seed with a prefix, then repeatedly fold in the worst outsider.
    c, r = mtf(1, [])
    for _ in range(4 * len(order) + 10):
        dist = np.linalg.norm(X[order] - c, axis=1)
        k = int(np.argmax(dist))
        if dist[k] <= r * (1.0 + 1e-12) + 1e-12:
            break
        j = order.pop(k)
        order.insert(0, j)
        c, r = mtf(len(order), [])
    return c, r


def meb_exact(P) -> Ball:
    X = as_points(P)
    c, _ = _meb_welzl(X, list(range(X.shape[0])))
    if c is None:
        c = X[0]
    r = float(np.max(np.linalg.norm(X - c, axis=1)))
    return Ball(c, r)


def _affine_circumcenter(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenter of the rows of ``T`` within their affine hull, plus its
    barycentric coordinates."""
    base = T[0]
    if T.shape[0] == 1:
        return base.copy(), np.ones(1)
    V = T[1:] - base
    G = V @ V.T
    alpha = np.linalg.lstsq(G, 0.5 * np.diag(G), rcond=None)[0]
    lam = np.concatenate(([1.0 - alpha.sum()], alpha))
    return base + alpha @ V, lam


def meb_pivot(P, max_iter: int | None = None) -> Ball:
    """Exact MEB by an active-set walk for high dimensions.

    A support set ``T`` stays on the boundary of a ball that encloses every
    point. Each round moves the center toward the circumcenter of ``T``;
    a point reaching the boundary on the way joins ``T``, and once the
    circumcenter is reached a point with negative barycentric coordinate
    leaves. The loop stops when the circumcenter lies in the convex hull of
    ``T``, which certifies optimality.
    """
    X = as_points(P)
    n, d = X.shape
    c = X[0].copy()
    T = [int(np.argmax(np.linalg.norm(X - c, axis=1)))]
    scale = float(np.max(np.abs(X - X.mean(axis=0)))) or 1.0
    max_iter = max_iter or 50 * (n + d) + 100
    for _ in range(max_iter):
        cc, lam = _affine_circumcenter(X[T])
        delta = cc - c
        r2 = float(np.sum((X[T[0]] - c) ** 2))
        if np.linalg.norm(delta) > 1e-14 * scale:
            # earliest point of P \ T to hit the moving boundary
            inT = np.zeros(n, dtype=bool)
            inT[T] = True
            diff = X[T[0]] - X
            denom = 2.0 * (diff @ delta)
            num = r2 - np.sum((c - X) ** 2, axis=1)
            num = np.maximum(num, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where((denom > 0) & ~inT, num / denom, np.inf)
            j = int(np.argmin(t))
            if t[j] < 1.0:
                c = c + t[j] * delta
                T.append(j)
                continue
            c = cc
        neg = int(np.argmin(lam))
        if lam[neg] >= -1e-12 or len(T) == 1:
            break
        T.pop(neg)
    r = float(np.max(np.linalg.norm(X - c, axis=1)))
    return Ball(c, r)


def meb_coreset_approx(P, eps: float = 1e-7) -> Ball:
    """Core-set iteration: exact ball of a growing subset until every point
    lies within ``(1 + eps)`` of its radius."""
    X = as_points(P)
    far = int(np.argmax(np.linalg.norm(X - X[0], axis=1)))
    S = sorted({0, far})
    while True:
        c = meb_pivot(X[S]).center
        rS = float(np.max(np.linalg.norm(X[S] - c, axis=1)))
        dist = np.linalg.norm(X - c, axis=1)
        k = int(np.argmax(dist))
        if dist[k] <= (1.0 + eps) * rS or k in S:
            return Ball(c, float(dist[k]))
        S.append(k)


def meb(P, method: str = "auto") -> Ball:
    """Minimum enclosing ball.

    ``"welzl"`` is the combinatorial move-to-front recursion, used by
    ``"auto"`` when ``d <= 10`` or ``n <= 8``; ``"pivot"`` is the exact
    active-set walk used otherwise; ``"coreset"`` grows a core set until
    the ball is within a factor ``1 + 1e-7``. The returned radius is always
    the maximal distance from the returned center, so every input point is
    enclosed.
    """
    X = as_points(P)
    n, d = X.shape
    if n == 1:
        return Ball(X[0], 0.0)
    if method == "auto":
        method = "welzl" if (d <= 10 or n <= 8) else "pivot"
    if method in ("welzl", "exact"):
        return meb_exact(X)
    if method == "pivot":
        return meb_pivot(X)
    if method == "coreset":
        return meb_coreset_approx(X)
    raise ValueError(f"unknown meb method {method!r}")


def meb_radius_small(X: np.ndarray) -> float:
    """Exact MEB radius for a handful of points."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return float(meb_radii_batch(X, np.arange(X.shape[0])[None, :])[0])


def meb_radii_batch(X: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    """Exact MEB radii of many small vertex sets of equal size ``s``.

    ``simplices`` is an ``(N, s)`` integer array of row indices into ``X``.
    The MEB of a set is the circumball of some subset of it; every subset
    pattern is evaluated for all N sets at once and the smallest circumball
    that encloses the whole set wins. Pairs use half the distance, so an
    edge's radius is computed the same way wherever it appears.
    """
    X = np.asarray(X, dtype=np.float64)
    S = np.atleast_2d(np.asarray(simplices, dtype=np.intp))
    N, s = S.shape
    if s == 1:
        return np.zeros(N)
    pts = X[S]  # (N, s, d)
    best = np.full(N, np.inf)
    for size in range(2, s + 1):
        for T in combinations(range(s), size):
            T = list(T)
            base = pts[:, T[0], :]
            if size == 2:
                center = 0.5 * (pts[:, T[0], :] + pts[:, T[1], :])
                diff = pts[:, T[0], :] - pts[:, T[1], :]
                radius = 0.5 * np.sqrt(np.sum(diff * diff, axis=1))
            else:
                V = pts[:, T[1:], :] - base[:, None, :]
                G = np.einsum("nid,njd->nij", V, V)
                rhs = 0.5 * np.einsum("nii->ni", G)
                scale = np.maximum(np.einsum("nii->n", G), 1e-300)
                det = np.linalg.det(G / scale[:, None, None])
                ok = np.abs(det) > 1e-12
                G_safe = np.where(ok[:, None, None], G, np.eye(size - 1))
                alpha = np.linalg.solve(G_safe, rhs[..., None])[..., 0]
                center = base + np.einsum("ni,nid->nd", alpha, V)
                radius = np.where(ok, np.linalg.norm(center - base, axis=1), np.inf)
            dist = np.linalg.norm(pts - center[:, None, :], axis=2)
            encloses = np.all(dist <= radius[:, None] * (1.0 + 1e-9) + 1e-12, axis=1)
            best = np.where(encloses & (radius < best), radius, best)
    return best
