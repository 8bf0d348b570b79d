import io
import math

import numpy as np
import pytest

from projclust.clustering import ProblemSpec, brute_force_optimal, solve
from projclust.geometry import objective
from projclust.pipeline import (
    EPS_SPLIT,
    PipelineConfig,
    PointFileError,
    StreamState,
    cluster_via_projection,
    format_points,
    ingest_stream,
    iter_csv_points,
    read_points,
    space_report,
    stream_ingest,
    stream_query,
)
from projclust.projection import DimensionBudget, make_projection, project, projective_dimension


class ConsumeOnce:
    """Row source that can be iterated once and counts every coordinate read."""

    def __init__(self, X):
        self._rows = [np.array(r) for r in X]
        self.coords_read = 0
        self._used = False

    def __iter__(self):
        if self._used:
            raise RuntimeError("source already consumed")
        self._used = True
        for r in self._rows:
            self.coords_read += r.size
            yield r


# --- project-solve-lift --------------------------------------------------------

def test_config_validation_and_split():
    with pytest.raises(ValueError):
        PipelineConfig(ProblemSpec(), epsilon=1.0)
    cfg = PipelineConfig(ProblemSpec(2, 1, 2), epsilon=0.5)
    assert cfg.inner_epsilon == pytest.approx(0.5 / EPS_SPLIT) and EPS_SPLIT == 5
    want = projective_dimension(DimensionBudget(n=10**6, q=1, epsilon=0.1))
    assert cfg.dimension(10**6, 10**9) == want
    assert cfg.dimension(10**6, 30) == 30


def test_full_dimension_matches_direct_solve(rng):
    for s in range(5):
        X = rng.normal(size=(10, 12))
        spec = ProblemSpec(2, 0, 2)
        sol = cluster_via_projection(X, PipelineConfig(spec, 0.5, seed=s, m=12))
        assert abs(sol.value - solve(X, spec, seed=s).value) <= 1e-9
        assert sol.meta["m"] == 12


def test_single_cluster_refit_is_centroid(rng):
    X = rng.normal(size=(30, 20))
    sol = cluster_via_projection(X, PipelineConfig(ProblemSpec(1, 0, 2), 0.5, seed=1, m=3))
    assert np.allclose(sol.flats[0].anchor, X.mean(axis=0))


def test_lifted_beats_naive_lift_and_meets_bound(rng):
    ok = 0
    for s in range(10):
        X = rng.normal(size=(10, 40))
        spec = ProblemSpec(2, 0, 2)
        opt = brute_force_optimal(X, spec).value
        sol = cluster_via_projection(X, PipelineConfig(spec, 0.5, seed=s, m=8))
        assert sol.value <= sol.meta["naive_lift_value"] + 1e-9
        assert sol.value == pytest.approx(objective(X, sol.flats, 2), rel=1e-12)
        ok += sol.value <= 1.5 * opt
    assert ok >= 9


@pytest.mark.parametrize("spec", [ProblemSpec(2, 1, 2), ProblemSpec(3, 0, math.inf), ProblemSpec(2, 0, 1)])
def test_pipeline_other_specs(rng, spec):
    X = rng.normal(size=(60, 30))
    sol = cluster_via_projection(X, PipelineConfig(spec, 0.5, seed=2, m=10))
    assert len(sol.flats) == spec.k and all(F.q == spec.q and F.d == 30 for F in sol.flats)
    assert sol.value == pytest.approx(objective(X, sol.flats, spec.rho), rel=1e-9)


def test_preimages_are_disjoint_and_cover(rng):
    X = rng.normal(size=(25, 15))
    sol = cluster_via_projection(X, PipelineConfig(ProblemSpec(3, 0, 2), 0.5, seed=0, m=5))
    a = np.array(sol.meta["projected_assignment"])
    assert a.shape == (25,) and set(a.tolist()) <= {0, 1, 2}


# --- streaming -----------------------------------------------------------------

def test_stream_matches_offline_bit_exact(rng):
    X = rng.normal(size=(80, 25))
    for spec, solver in [(ProblemSpec(3, 0, 2), "lloyd"), (ProblemSpec(2, 0, math.inf), "k_center"),
                         (ProblemSpec(2, 1, 2), "alternating")]:
        st = StreamState.create(25, 80, spec, 0.5, seed=11, m=7)
        ingest_stream(st, X)
        offline = solve(project(X, make_projection(25, 7, 11)), spec, solver, seed=11).value
        assert stream_query(st, spec, solver) == offline


def test_stream_projection_equals_batch_bytes(rng):
    X = rng.normal(size=(40, 16))
    st = StreamState.create(16, 40, ProblemSpec(), 0.5, seed=3, m=5)
    ingest_stream(st, X)
    assert st.points.tobytes() == project(X, st.pmap).tobytes()


def test_one_projection_serves_all_queries(rng):
    X = rng.normal(size=(12, 20))
    st = StreamState.create(20, 12, ProblemSpec(), 0.5, seed=3, m=6)
    ingest_stream(st, X)
    before = st.points.copy()
    vals = {(k, rho): stream_query(st, ProblemSpec(k, 0, rho)) for k in (1, 2, 3) for rho in (2, math.inf)}
    assert np.array_equal(st.points, before)
    assert vals[(1, 2)] >= vals[(2, 2)] >= vals[(3, 2)]
    assert stream_query(st, ProblemSpec(12, 0, 2), "lloyd") == pytest.approx(0.0, abs=1e-12)


def test_stream_full_dimension_is_offline_on_raw_points(rng):
    X = rng.normal(size=(10, 6))
    spec = ProblemSpec(2, 0, 2)
    st = StreamState.create(6, 10, spec, 0.5, seed=0, m=6)
    ingest_stream(st, X)
    assert stream_query(st, spec) == pytest.approx(brute_force_optimal(X, spec).value, rel=1e-12)


def test_interleaved_orders_same_multiset(rng):
    X = rng.normal(size=(15, 8))
    perm = rng.permutation(15)
    a = StreamState.create(8, 15, ProblemSpec(), 0.5, seed=5, m=4)
    b = StreamState.create(8, 15, ProblemSpec(), 0.5, seed=5, m=4)
    ingest_stream(a, X)
    ingest_stream(b, X[perm])
    assert np.array_equal(a.points[perm], b.points)
    assert stream_query(a, ProblemSpec(1, 0, 2)) == pytest.approx(stream_query(b, ProblemSpec(1, 0, 2)), rel=1e-12)


def test_ledger_exact_after_every_ingest(rng):
    d, m = 30, 9
    st = StreamState.create(d, 50, ProblemSpec(), 0.5, seed=1, m=m)
    assert space_report(st) == {"matrix_coords": d * m, "buffer_coords": 0, "total": d * m}
    for i, row in enumerate(rng.normal(size=(50, d)), 1):
        stream_ingest(st, row)
        rep = space_report(st)
        assert rep["buffer_coords"] == i * m and rep["total"] == (i + d) * m == st.coordinates_stored
        if i == d:
            assert rep["total"] == 2 * d * m


def test_ledger_at_desk_scale():
    d, n = 500, 1000
    spec = ProblemSpec(1, 1, 2)
    st = StreamState.create(d, n, spec, 0.5, seed=0)
    m = st.m
    assert m == min(d, projective_dimension(DimensionBudget(n=n, q=1, epsilon=0.5)))
    rng = np.random.default_rng(0)
    src = ConsumeOnce(rng.normal(size=(n, d)))
    ingest_stream(st, src)
    assert src.coords_read == n * d
    assert space_report(st)["total"] == (n + d) * m


def test_one_pass_contract(rng):
    X = rng.normal(size=(20, 10))
    src = ConsumeOnce(X)
    st = StreamState.create(10, 20, ProblemSpec(), 0.5, seed=0, m=3)
    ingest_stream(st, src)
    assert src.coords_read == X.size
    with pytest.raises(RuntimeError):
        ingest_stream(st, src)


def test_stream_longer_than_announced_voids_guarantee(rng):
    st = StreamState.create(5, 3, ProblemSpec(), 0.5, seed=0, m=2)
    ingest_stream(st, rng.normal(size=(5, 5)))
    assert st.guarantee_void and st.n_seen == 5
    with pytest.warns(UserWarning):
        stream_query(st, ProblemSpec())


def test_stream_rejects_wrong_dimension_and_empty_query():
    st = StreamState.create(5, 3, ProblemSpec(), 0.5, seed=0, m=2)
    with pytest.raises(ValueError):
        stream_query(st, ProblemSpec())
    with pytest.raises(ValueError):
        stream_ingest(st, np.zeros(4))


def test_points_view_is_read_only(rng):
    st = StreamState.create(4, 2, ProblemSpec(), 0.5, seed=0, m=2)
    ingest_stream(st, rng.normal(size=(2, 4)))
    with pytest.raises(ValueError):
        st.points[0, 0] = 1.0


def test_sink_receives_every_projected_point(rng):
    class Recorder:
        def __init__(self):
            self.rows = []

        def update(self, y):
            self.rows.append(y.copy())

        def query(self, spec):
            return 0.0

    rec = Recorder()
    st = StreamState.create(6, 4, ProblemSpec(), 0.5, seed=2, m=3, sink=rec)
    ingest_stream(st, rng.normal(size=(4, 6)))
    assert np.array_equal(np.array(rec.rows), st.points)


def test_checkpoint_resume(tmp_path, rng):
    X = rng.normal(size=(30, 12))
    full = StreamState.create(12, 30, ProblemSpec(), 0.5, seed=8, m=4)
    ingest_stream(full, X)
    part = StreamState.create(12, 30, ProblemSpec(), 0.5, seed=8, m=4)
    ingest_stream(part, X[:13])
    part.save(tmp_path / "ck")
    resumed = StreamState.load(tmp_path / "ck")
    ingest_stream(resumed, X[13:])
    assert resumed.points.tobytes() == full.points.tobytes()
    assert resumed.space_report() == full.space_report()


# --- point files -----------------------------------------------------------------

def test_csv_round_trip_exact(rng):
    X = rng.normal(size=(7, 3)) * 10.0 ** rng.integers(-8, 8, size=(7, 3))
    assert np.array_equal(read_points(io.StringIO(format_points(X))), X)


def test_csv_errors_carry_line_numbers():
    with pytest.raises(PointFileError) as e:
        read_points(io.StringIO("1,2\n\n3,x\n"))
    assert e.value.line == 3
    with pytest.raises(PointFileError) as e:
        read_points(io.StringIO("1,2\n3,4,5\n"))
    assert e.value.line == 2
    with pytest.raises(PointFileError, match="no points"):
        read_points(io.StringIO("\n\n"))


def test_iter_csv_points_is_lazy():
    src = io.StringIO("1,2\n3,4\nbad\n")
    it = iter_csv_points(src)
    assert np.array_equal(next(it), [1.0, 2.0])
    assert np.array_equal(next(it), [3.0, 4.0])
    with pytest.raises(PointFileError):
        next(it)
