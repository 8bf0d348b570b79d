"""Seeded random orthogonal projections, target-dimension formulas and
empirical distortion checks.

A projection ``R^d -> R^m`` is ``x -> sqrt(d/m) * Q x`` where the rows of
``Q`` are an orthonormal basis of a uniformly random m-dimensional subspace.

Randomness comes from the counter-based Philox generator. Every consumer
draws from its own stream, keyed by ``(seed, stream)``:

* ``STREAM_MATRIX`` fills the Gaussian matrix that is orthonormalized into ``Q``;
* ``STREAM_SUBSETS`` drives subset, vector and flat sampling in the verifiers;
* ``STREAM_SOLVER`` is reserved for randomized solvers run on projected data.

so adding trials to a verifier never perturbs the projection matrix.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import QFlat, as_points, distances_to_flat, orthonormalize

STREAM_MATRIX = 0
STREAM_SUBSETS = 1
STREAM_SOLVER = 2

MATRIX_MAGIC = b"PRJM"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIQQq")


def rng_stream(seed: int, stream: int, substream: int = 0) -> np.random.Generator:
    """Independent Philox generator for ``(seed, stream, substream)``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(stream), int(substream)))
    return np.random.Generator(np.random.Philox(ss))


def _check_eps(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return epsilon


# ---------------------------------------------------------------------------
# Target dimensions
# ---------------------------------------------------------------------------

def jl_dimension(n: int, epsilon: float) -> int:
    """``ceil(36 ln(n) / eps^2)``, the classical pairwise-distance bound."""
    epsilon = _check_eps(epsilon)
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return math.ceil(36.0 * math.log(n) / epsilon**2)


def subspace_dimension(n: int, c: int, epsilon: float, lam: float = 1.0) -> int:
    """``ceil(lam * c * ln(n) / eps^2)``: dimension that embeds the spans of all
    c-subsets of an n-point set."""
    epsilon = _check_eps(epsilon)
    if n < 2 or c < 1:
        raise ValueError("need n >= 2 and c >= 1")
    return max(1, math.ceil(lam * c * math.log(n) / epsilon**2))


def coreset_size_bound(q: int, epsilon: float, coreset_constant: float = 1.0) -> float:
    """Concrete stand-in for the coreset size at accuracy ``epsilon / 2``:
    ``const * (q+1)^2 * (2/eps) * ln(2(q+1)/eps + e)``."""
    epsilon = _check_eps(epsilon)
    return coreset_constant * (q + 1) ** 2 * (2.0 / epsilon) * math.log(2.0 * (q + 1) / epsilon + math.e)


@dataclass(frozen=True)
class DimensionBudget:
    n: int
    q: int = 0
    epsilon: float = 0.5
    rho: float = 2.0
    lam: float = 1.0
    coreset_constant: float = 1.0

    def __post_init__(self):
        _check_eps(self.epsilon)
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.q < 0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if self.lam <= 0 or self.coreset_constant <= 0:
            raise ValueError("lam and coreset_constant must be positive")


def projective_dimension(budget: DimensionBudget) -> int:
    """Target dimension that preserves every q-flat objective of the point set.

    ``ceil(lam * C * ln(n) / eps^2)`` with ``C`` from :func:`coreset_size_bound`.
    The value does not depend on ``k`` or ``rho``.
    """
    C = coreset_size_bound(budget.q, budget.epsilon, budget.coreset_constant)
    return math.ceil(budget.lam * C * math.log(budget.n) / budget.epsilon**2)


def target_dimension(budget: DimensionBudget, d: int) -> int:
    """:func:`projective_dimension` clamped to the source dimension."""
    return min(int(d), projective_dimension(budget))


# ---------------------------------------------------------------------------
# Projection maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionMap:
    """Scaled orthogonal projection; ``matrix`` is ``sqrt(d/m) * Q``."""

    d: int
    m: int
    seed: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = np.array(self.matrix, dtype=np.float64, copy=True)
        if M.shape != (self.m, self.d):
            raise ValueError(f"matrix shape {M.shape} does not match (m, d)=({self.m}, {self.d})")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def scale(self) -> float:
        return math.sqrt(self.d / self.m)

    @property
    def unscaled(self) -> np.ndarray:
        """Rows of the underlying orthogonal projection (orthonormal)."""
        return self.matrix / self.scale

    def apply_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        if p.shape[0] != self.d:
            raise ValueError(f"dimension mismatch: point has d={p.shape[0]}, map expects d={self.d}")
        return self.matrix @ p

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return self.apply_point(X)
        return project(X, self)

    def map_flat(self, F: QFlat) -> QFlat:
        """Image of a flat: anchor and basis projected, basis re-orthonormalized."""
        anchor = self.apply_point(F.anchor)
        if F.q == 0:
            return QFlat(anchor)
        B = orthonormalize(F.basis @ self.matrix.T)
        if B.shape[0] >= self.m:
            raise ValueError("image flat fills the target space")
        return QFlat(anchor, B)

    # binary sidecar -------------------------------------------------------
    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, self.d, self.m, int(self.seed))
        return head + np.ascontiguousarray(self.matrix, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ProjectionMap":
        if len(buf) < _HEADER.size:
            raise ValueError("truncated projection file")
        magic, version, d, m, seed = _HEADER.unpack_from(buf)
        if magic != MATRIX_MAGIC:
            raise ValueError("not a projection matrix file (bad magic)")
        if version != MATRIX_VERSION:
            raise ValueError(f"unsupported projection file version {version}")
        body = buf[_HEADER.size:]
        if len(body) != 8 * d * m:
            raise ValueError(f"projection file body has {len(body)} bytes, expected {8 * d * m}")
        M = np.frombuffer(body, dtype="<f8").reshape(m, d)
        return cls(d=int(d), m=int(m), seed=int(seed), matrix=M)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ProjectionMap":
        return cls.from_bytes(Path(path).read_bytes())


def random_orthonormal_rows(m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``(m, d)`` matrix whose rows are an orthonormal basis of a Haar-random
    m-dimensional subspace of ``R^d``."""
    G = rng.standard_normal((d, m))
    Q, R = np.linalg.qr(G)
    # sign fix makes the QR factorization unique, hence Haar distributed
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return (Q * signs).T.copy()


def make_projection(d: int, m: int, seed: int = 0) -> ProjectionMap:
    if not 1 <= m <= d:
        raise ValueError(f"need 1 <= m <= d, got m={m}, d={d}")
    Q = random_orthonormal_rows(m, d, rng_stream(seed, STREAM_MATRIX))
    return ProjectionMap(d=d, m=m, seed=int(seed), matrix=math.sqrt(d / m) * Q)


def project(P, pmap: ProjectionMap) -> np.ndarray:
    """Image of every point, in input order.

    Rows are mapped one at a time with the same kernel as
    :meth:`ProjectionMap.apply_point`, so batch and streamed projections of
    the same point agree bit for bit.
    """
    X = as_points(P)
    if X.shape[1] != pmap.d:
        raise ValueError(f"dimension mismatch: points have d={X.shape[1]}, map expects d={pmap.d}")
    M = pmap.matrix
    out = np.empty((X.shape[0], pmap.m))
    for i, row in enumerate(X):
        out[i] = M @ row
    return out


# ---------------------------------------------------------------------------
# Empirical distortion checks
# ---------------------------------------------------------------------------

@dataclass
class DistortionReport:
    """Ratios image/source for the sampled quantities.

    ``squared`` tells whether the ratios compare squared lengths (pairwise
    check) or plain lengths (subspace and flat checks).
    """

    epsilon: float
    min_ratio: float
    max_ratio: float
    checked: int
    skipped: int
    squared: bool
    extra: dict = field(default_factory=dict)

    @property
    def max_expansion(self) -> float:
        return max(self.max_ratio - 1.0, 0.0)

    @property
    def max_contraction(self) -> float:
        return max(1.0 - self.min_ratio, 0.0)

    @property
    def max_distortion(self) -> float:
        return max(self.max_expansion, self.max_contraction)

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + self.epsilon and self.min_ratio >= 1.0 - self.epsilon

    def to_dict(self) -> dict:
        out = {
            "epsilon": self.epsilon,
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "max_expansion": self.max_expansion,
            "max_contraction": self.max_contraction,
            "max_distortion": self.max_distortion,
            "checked": self.checked,
            "skipped": self.skipped,
            "squared": self.squared,
            "pass": self.passed,
        }
        out.update(self.extra)
        return out


def _ratio_report(src, img, epsilon, squared, extra=None) -> DistortionReport:
    src = np.asarray(src, dtype=np.float64)
    img = np.asarray(img, dtype=np.float64)
    zero = src <= 0.0
    ok = ~zero
    ratios = img[ok] / src[ok]
    # a zero source distance is preserved only if the image is zero as well
    broken = int(np.sum(zero & (img > 1e-12)))
    if ratios.size:
        lo, hi = float(ratios.min()), float(ratios.max())
    else:
        lo = hi = 1.0
    if broken:
        hi = math.inf
    return DistortionReport(
        epsilon=float(epsilon),
        min_ratio=lo,
        max_ratio=hi,
        checked=int(ratios.size),
        skipped=int(np.sum(zero)),
        squared=squared,
        extra=dict(extra or {}),
    )


def _sq_pdist(X: np.ndarray) -> np.ndarray:
    from scipy.spatial.distance import pdist

    return pdist(X, "sqeuclidean")


def verify_pairwise_distortion(P, pmap: ProjectionMap, epsilon: float) -> DistortionReport:
    """All pairwise squared-distance ratios; pairs of duplicate points are skipped."""
    X = as_points(P)
    Y = project(X, pmap)
    return _ratio_report(_sq_pdist(X), _sq_pdist(Y), epsilon, squared=True, extra={"m": pmap.m, "seed": pmap.seed})


def verify_subspace_distortion(
    P, pmap: ProjectionMap, c: int, epsilon: float, trials: int = 100, pairs: int = 10, seed: int | None = None
) -> DistortionReport:
    """Norm ratios of ``u - v`` for random ``u, v`` in the linear span of random
    c-subsets.

    Besides the sampled ratios, the report records the extreme singular
    values of the map restricted to each sampled span (``sv_min``, ``sv_max``),
    which bound the ratio over every pair in that span.
    """
    X = as_points(P)
    n = X.shape[0]
    if not 1 <= c <= n:
        raise ValueError(f"need 1 <= c <= n, got c={c}, n={n}")
    rng = rng_stream(pmap.seed if seed is None else seed, STREAM_SUBSETS)
    src, img = [], []
    sv_lo, sv_hi = math.inf, 0.0
    for _ in range(trials):
        S = rng.choice(n, size=c, replace=False)
        A = X[S]
        coeff_u = rng.standard_normal((pairs, c))
        coeff_v = rng.standard_normal((pairs, c))
        W = (coeff_u - coeff_v) @ A
        src.append(np.linalg.norm(W, axis=1))
        img.append(np.linalg.norm(W @ pmap.matrix.T, axis=1))
        B = orthonormalize(A)
        if B.shape[0]:
            s = np.linalg.svd(B @ pmap.matrix.T, compute_uv=False)
            sv_lo = min(sv_lo, float(s.min()))
            sv_hi = max(sv_hi, float(s.max()))
    return _ratio_report(
        np.concatenate(src),
        np.concatenate(img),
        epsilon,
        squared=False,
        extra={"m": pmap.m, "seed": pmap.seed, "c": c, "trials": trials, "sv_min": sv_lo, "sv_max": sv_hi},
    )


def random_flat_in_span(A: np.ndarray, q: int, rng: np.random.Generator) -> QFlat:
    """Random q-flat inside the linear span of the rows of ``A``."""
    B = orthonormalize(A)
    r = B.shape[0]
    if q >= max(r, 1) and q > 0:
        raise ValueError(f"span has dimension {r}, cannot host a {q}-flat")
    anchor = rng.standard_normal(A.shape[0]) @ A
    if q == 0:
        return QFlat(anchor)
    dirs = orthonormalize(rng.standard_normal((q, r)) @ B)
    return QFlat(anchor, dirs)


def verify_flat_distance_distortion(
    P, pmap: ProjectionMap, c: int, q: int, epsilon: float, trials: int = 100, seed: int | None = None
) -> DistortionReport:
    """Ratios ``d(pi(p), pi(Q)) / d(p, Q)`` for random q-flats ``Q`` in the span
    of random c-subsets and every point ``p``."""
    X = as_points(P)
    n = X.shape[0]
    if not 0 <= q < c <= n:
        raise ValueError(f"need q < c <= n, got q={q}, c={c}, n={n}")
    rng = rng_stream(pmap.seed if seed is None else seed, STREAM_SUBSETS, 1)
    Y = project(X, pmap)
    src, img = [], []
    for _ in range(trials):
        S = rng.choice(n, size=c, replace=False)
        Q = random_flat_in_span(X[S], q, rng)
        src.append(distances_to_flat(X, Q))
        img.append(distances_to_flat(Y, pmap.map_flat(Q)))
    return _ratio_report(
        np.concatenate(src),
        np.concatenate(img),
        epsilon,
        squared=False,
        extra={"m": pmap.m, "seed": pmap.seed, "c": c, "q": q, "trials": trials},
    )
