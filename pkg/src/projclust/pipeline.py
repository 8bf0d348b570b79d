"""Project-solve-lift clustering and the single-pass streaming engine."""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol

import numpy as np

from .clustering import ClusteringSolution, ProblemSpec, clusters_of, fit_flat, solve
from .geometry import QFlat, as_points, orthonormalize
from .projection import DimensionBudget, ProjectionMap, make_projection, project, projective_dimension

# accuracy handed to the projection is eps / EPS_SPLIT
EPS_SPLIT = 5


@dataclass(frozen=True)
class PipelineConfig:
    spec: ProblemSpec
    epsilon: float = 0.5
    seed: int = 0
    solver: str = "auto"
    lam: float = 1.0
    coreset_constant: float = 1.0
    m: int | None = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def inner_epsilon(self) -> float:
        return self.epsilon / EPS_SPLIT

    def dimension(self, n: int, d: int) -> int:
        """Target dimension for an n-point input in ``R^d``, clamped to d."""
        if self.m is not None:
            return max(1, min(int(self.m), d))
        if n < 2:
            return d
        budget = DimensionBudget(
            n=n, q=self.spec.q, epsilon=self.inner_epsilon, rho=self.spec.rho,
            lam=self.lam, coreset_constant=self.coreset_constant,
        )
        return min(d, projective_dimension(budget))


def naive_lift(F: QFlat, pmap: ProjectionMap) -> QFlat:
    """Pull a flat of the target space back through the pseudo-inverse."""
    pinv = pmap.unscaled.T / pmap.scale
    anchor = pinv @ F.anchor
    if F.q == 0:
        return QFlat(anchor)
    return QFlat(anchor, orthonormalize(F.basis @ pinv.T))


def cluster_via_projection(P, cfg: PipelineConfig) -> ClusteringSolution:
    """Approximate projective clustering through a random projection.

    Projects to ``m`` dimensions (sized for accuracy ``eps/5``), solves there,
    takes the pre-images of the k projected clusters (disjoint, thanks to
    lowest-index tie breaking) and refits one q-flat per pre-image in the
    original space. The returned value is the cost in the original space;
    ``meta`` records ``m``, the projected value and the cost of the naively
    lifted projected flats.
    """
    X = as_points(P)
    n, d = X.shape
    spec = cfg.spec
    m = cfg.dimension(n, d)
    pmap = make_projection(d, m, cfg.seed)
    Y = project(X, pmap)
    low = solve(Y, spec, cfg.solver, seed=cfg.seed)
    lifted = []
    groups = clusters_of(low.assignment, len(low.flats))
    for idx in groups:
        if idx.size == 0:
            continue
        lifted.append(fit_flat(X[idx], spec.q, spec.rho))
    while len(lifted) < spec.k:
        lifted.append(lifted[-1])
    sol = ClusteringSolution.from_flats(X, lifted, spec.rho, spec, solver=f"projected:{low.meta.get('solver', cfg.solver)}")
    naive = ClusteringSolution.from_flats(X, [naive_lift(F, pmap) for F in low.flats], spec.rho)
    sol.meta.update(
        m=m,
        d=d,
        seed=cfg.seed,
        inner_epsilon=cfg.inner_epsilon,
        projected_value=low.value,
        naive_lift_value=naive.value,
        projected_assignment=[int(a) for a in low.assignment],
    )
    return sol


# ---------------------------------------------------------------------------
# Streaming
# ---------------------------------------------------------------------------

class StreamSolver(Protocol):
    """Seam for an m-dimensional streaming solver fed with projected points."""

    def update(self, y: np.ndarray) -> None: ...

    def query(self, spec: ProblemSpec) -> float: ...


@dataclass
class StreamState:
    """Projection matrix plus the buffer of projected points.

    ``n_expected`` is the stream length announced in advance; it sizes the
    projection. Ingesting more points than announced sets ``guarantee_void``.
    """

    pmap: ProjectionMap
    n_expected: int
    buffer: np.ndarray = field(default=None, repr=False)
    n_seen: int = 0
    sink: StreamSolver | None = None

    def __post_init__(self):
        if self.buffer is None:
            self.buffer = np.empty((max(self.n_expected, 1), self.pmap.m))

    @classmethod
    def create(cls, d: int, n_expected: int, spec: ProblemSpec, epsilon: float, seed: int = 0,
               lam: float = 1.0, coreset_constant: float = 1.0, m: int | None = None,
               sink: StreamSolver | None = None) -> "StreamState":
        if m is None:
            budget = DimensionBudget(n=max(n_expected, 2), q=spec.q, epsilon=epsilon, rho=spec.rho,
                                     lam=lam, coreset_constant=coreset_constant)
            m = projective_dimension(budget)
        m = max(1, min(int(m), d))
        return cls(make_projection(d, m, seed), n_expected, sink=sink)

    @property
    def d(self) -> int:
        return self.pmap.d

    @property
    def m(self) -> int:
        return self.pmap.m

    @property
    def points(self) -> np.ndarray:
        """Read-only view of the projected points ingested so far."""
        view = self.buffer[: self.n_seen]
        view.flags.writeable = False
        return view

    @property
    def coordinates_stored(self) -> int:
        return self.d * self.m + self.n_seen * self.m

    @property
    def guarantee_void(self) -> bool:
        return self.n_seen > self.n_expected

    def ingest(self, p) -> "StreamState":
        y = self.pmap.apply_point(p)
        if self.n_seen == self.buffer.shape[0]:
            grown = np.empty((2 * self.buffer.shape[0], self.m))
            grown[: self.n_seen] = self.buffer[: self.n_seen]
            self.buffer = grown
        self.buffer[self.n_seen] = y
        self.n_seen += 1
        if self.sink is not None:
            self.sink.update(y)
        return self

    def space_report(self) -> dict:
        matrix = self.d * self.m
        buf = self.n_seen * self.m
        return {"matrix_coords": matrix, "buffer_coords": buf, "total": matrix + buf}

    # checkpoints -----------------------------------------------------------
    def save(self, directory) -> None:
        """Write the projection matrix sidecar, the buffer and a small header."""
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        self.pmap.save(path / "projection.bin")
        np.save(path / "buffer.npy", self.buffer[: self.n_seen])
        (path / "state.json").write_text(json.dumps({"n_expected": self.n_expected, "n_seen": self.n_seen}))

    @classmethod
    def load(cls, directory) -> "StreamState":
        path = Path(directory)
        pmap = ProjectionMap.load(path / "projection.bin")
        header = json.loads((path / "state.json").read_text())
        data = np.load(path / "buffer.npy")
        if data.shape != (header["n_seen"], pmap.m):
            raise ValueError("checkpoint buffer does not match its header")
        state = cls(pmap, int(header["n_expected"]))
        state.buffer = np.empty((max(state.n_expected, data.shape[0], 1), pmap.m))
        state.buffer[: data.shape[0]] = data
        state.n_seen = data.shape[0]
        return state


def stream_ingest(state: StreamState, p) -> StreamState:
    """Project one point into the buffer; the original point is not kept."""
    return state.ingest(p)


def stream_query(state: StreamState, spec: ProblemSpec, solver: str = "auto", seed: int | None = None) -> float:
    """Approximate ``f_k^q`` of the stream from the projected buffer.

    Any (k, q, rho) can be asked of the same buffer.
    """
    if state.n_seen == 0:
        raise ValueError("stream buffer is empty")
    if state.guarantee_void:
        warnings.warn("stream is longer than announced; the projection size guarantee does not hold", stacklevel=2)
    Y = np.array(state.points)
    return solve(Y, spec, solver, seed=state.pmap.seed if seed is None else seed).value


def space_report(state: StreamState) -> dict:
    return state.space_report()


# ---------------------------------------------------------------------------
# Point files
# ---------------------------------------------------------------------------

class PointFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def iter_csv_points(source, d: int | None = None) -> Iterator[np.ndarray]:
    """Yield points from newline-delimited comma-separated rows, reading the
    source once. Blank lines are skipped; a malformed row raises
    :class:`PointFileError` carrying its line number."""
    close = False
    if isinstance(source, (str, Path)):
        source = open(source, "r", encoding="utf-8")
        close = True
    try:
        for lineno, line in enumerate(source, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = np.array([float(tok) for tok in line.split(",")], dtype=np.float64)
            except ValueError:
                raise PointFileError(f"malformed row {line[:40]!r}", lineno) from None
            if not np.all(np.isfinite(row)):
                raise PointFileError("non-finite coordinate", lineno)
            if d is None:
                d = row.shape[0]
            elif row.shape[0] != d:
                raise PointFileError(f"expected {d} coordinates, got {row.shape[0]}", lineno)
            yield row
    finally:
        if close:
            source.close()


def read_points(source) -> np.ndarray:
    rows = list(iter_csv_points(source))
    if not rows:
        raise PointFileError("no points")
    return np.vstack(rows)


def format_points(X) -> str:
    """CSV text with 17 significant digits, so values round-trip exactly."""
    buf = io.StringIO()
    for row in np.atleast_2d(X):
        buf.write(",".join(f"{float(v):.17g}" for v in row))
        buf.write("\n")
    return buf.getvalue()


def write_points(path, X) -> None:
    Path(path).write_text(format_points(X), encoding="utf-8")


def ingest_stream(state: StreamState, rows: Iterable) -> StreamState:
    for row in rows:
        state.ingest(row)
    return state
