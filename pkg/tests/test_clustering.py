import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_meb_radius, unit_square
from projclust.clustering import (
    ClusteringSolution,
    ProblemSpec,
    alternating_qflat,
    brute_force_optimal,
    fit_flat,
    k_center_greedy,
    lloyd_kmeans,
    solve,
    verify_objective_preservation,
)
from projclust.geometry import QFlat, assign, objective
from projclust.projection import make_projection


def labelling_oracle(X, k, q, rho):
    """Exhaustive search over all k^n labellings with closed-form block costs."""
    n = X.shape[0]
    best = math.inf
    for lab in itertools.product(range(k), repeat=n):
        parts = [X[[i for i in range(n) if lab[i] == j]] for j in range(k)]
        parts = [B for B in parts if len(B)]
        if rho == 2:
            tot = 0.0
            for B in parts:
                C = B - B.mean(axis=0)
                ev = np.sort(np.linalg.eigvalsh(C.T @ C))
                tot += max(0.0, ev[: X.shape[1] - q].sum())
            best = min(best, math.sqrt(tot))
        else:
            best = min(best, max(brute_meb_radius(B) for B in parts))
    return best


def _value_is_fresh(X, sol, rho):
    assert sol.value == pytest.approx(objective(X, sol.flats, rho), rel=1e-9, abs=1e-12)
    a, _ = assign(X, sol.flats)
    assert np.array_equal(a, sol.assignment)


# --- spec ------------------------------------------------------------------------

def test_problem_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec(0, 0, 2)
    with pytest.raises(ValueError):
        ProblemSpec(1, -1, 2)
    assert ProblemSpec(2, 1, "inf").to_dict() == {"k": 2, "q": 1, "rho": "inf"}


# --- brute force --------------------------------------------------------------------

def test_brute_force_examples():
    P = np.array([[0.0, 0.0], [5.0, 1.0]])
    for rho in (2, math.inf):
        assert brute_force_optimal(P, ProblemSpec(2, 0, rho)).value == 0.0
    P = np.array([[0.0, 0], [1, 0], [10, 0], [11, 0]])
    assert brute_force_optimal(P, ProblemSpec(2, 0, math.inf)).value == pytest.approx(0.5)
    assert brute_force_optimal(unit_square(), ProblemSpec(1, 0, 2)).value == pytest.approx(math.sqrt(2))


def test_brute_force_rejects_unsupported():
    X = np.zeros((4, 3))
    with pytest.raises(ValueError):
        brute_force_optimal(np.zeros((13, 2)), ProblemSpec(1, 0, 2))
    with pytest.raises(ValueError):
        brute_force_optimal(X, ProblemSpec(4, 0, 2))
    with pytest.raises(ValueError):
        brute_force_optimal(X, ProblemSpec(1, 1, math.inf))
    with pytest.raises(ValueError):
        brute_force_optimal(X, ProblemSpec(1, 0, 1))


@pytest.mark.parametrize("k,q,rho", [(1, 0, 2), (2, 0, 2), (3, 0, 2), (2, 1, 2), (2, 0, math.inf), (3, 0, math.inf)])
def test_brute_force_matches_labelling_oracle(rng, k, q, rho):
    for _ in range(4):
        X = rng.normal(size=(int(rng.integers(k, 8)), 3))
        sol = brute_force_optimal(X, ProblemSpec(k, q, rho))
        assert sol.value == pytest.approx(labelling_oracle(X, k, q, rho), rel=1e-9, abs=1e-12)
        _value_is_fresh(X, sol, rho)


def test_brute_force_monotone_in_k_and_q(rng):
    for _ in range(5):
        X = rng.normal(size=(8, 4))
        for rho in (2, math.inf):
            vals = [brute_force_optimal(X, ProblemSpec(k, 0, rho)).value for k in (1, 2, 3)]
            assert vals[0] >= vals[1] - 1e-12 >= vals[2] - 2e-12
        vals = [brute_force_optimal(X, ProblemSpec(1, q, 2)).value for q in range(4)]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))


# --- heuristics ---------------------------------------------------------------------

def test_k_center_examples(rng):
    X = rng.normal(size=(7, 3))
    assert k_center_greedy(X, 7).value == 0.0
    sol = k_center_greedy(X, 1)
    assert sol.value == pytest.approx(np.linalg.norm(X - X[0], axis=1).max())
    assert sol.value <= 2 * brute_meb_radius(X) + 1e-12


def test_k_center_two_blobs(rng):
    a = rng.uniform(-0.25, 0.25, size=(5, 2))
    b = rng.uniform(-0.25, 0.25, size=(5, 2)) + [20, 0]
    X = np.vstack([a, b])
    sol = k_center_greedy(X, 2)
    assert sol.value <= 1.0
    assert sol.value <= 2 * brute_force_optimal(X, ProblemSpec(2, 0, math.inf)).value + 1e-12


def test_k_center_two_approximation(rng):
    for _ in range(10):
        X = rng.normal(size=(10, 3))
        for k in (1, 2, 3):
            opt = brute_force_optimal(X, ProblemSpec(k, 0, math.inf)).value
            assert k_center_greedy(X, k).value <= 2 * opt + 1e-12


def test_lloyd_examples(rng):
    X = rng.normal(size=(6, 2))
    assert lloyd_kmeans(X, 6, seed=1).value == pytest.approx(0.0, abs=1e-12)
    X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    sol = lloyd_kmeans(X, 2, seed=0, n_init=3)
    assert sol.value == pytest.approx(brute_force_optimal(X, ProblemSpec(2, 0, 2)).value)


def test_lloyd_history_non_increasing(rng):
    for s in range(10):
        X = rng.normal(size=(60, 3))
        h = lloyd_kmeans(X, 4, seed=s).meta["history"]
        assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_lloyd_duplicated_data_same_centers(rng):
    # the centers found on X are a Lloyd fixpoint of X stacked twice
    X = rng.normal(size=(20, 2))
    a = lloyd_kmeans(X, 3, seed=4)
    XX = np.vstack([X, X])
    labels, _ = assign(XX, a.flats)
    for j, F in enumerate(a.flats):
        assert np.allclose(XX[labels == j].mean(axis=0), F.anchor, atol=1e-12)
    assert ClusteringSolution.from_flats(XX, a.flats, 2).value == pytest.approx(math.sqrt(2) * a.value)


def test_alternating_two_skew_lines(rng):
    t = rng.uniform(-3, 3, size=10)
    L1 = np.stack([t, np.zeros(10), np.zeros(10)], axis=1)
    L2 = np.stack([np.zeros(10), t, np.ones(10) * 5], axis=1)
    X = np.vstack([L1, L2])
    sol = alternating_qflat(X, ProblemSpec(2, 1, 2), seed=0)
    assert sol.value <= 1e-6


def test_alternating_hyperplane_is_pca(rng):
    X = rng.normal(size=(30, 4))
    sol = alternating_qflat(X, ProblemSpec(1, 3, 2), seed=0)
    C = X - X.mean(axis=0)
    assert sol.value == pytest.approx(math.sqrt(np.linalg.eigvalsh(C.T @ C)[0]), rel=1e-9)


def test_alternating_best_of_restarts_matches_brute_force(rng):
    hits = 0
    for s in range(20):
        X = rng.normal(size=(int(rng.integers(4, 11)), 3))
        opt = brute_force_optimal(X, ProblemSpec(2, 0, 2)).value
        sol = alternating_qflat(X, ProblemSpec(2, 0, 2), seed=s)
        hits += sol.value <= opt * (1 + 1e-6)
    assert hits == 20


def test_alternating_non_increasing_for_l2(rng):
    X = rng.normal(size=(40, 3))
    sol = alternating_qflat(X, ProblemSpec(3, 1, 2), seed=2, restarts=1)
    h = sol.meta["history"]
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


@pytest.mark.parametrize("rho", [1, 3, math.inf])
def test_alternating_other_norms_fresh_values(rng, rho):
    X = rng.normal(size=(25, 3))
    sol = alternating_qflat(X, ProblemSpec(2, 1, rho), seed=1, restarts=3)
    _value_is_fresh(X, sol, rho)


def test_fit_flat_l1_not_worse_than_l2_fit(rng):
    X = rng.normal(size=(30, 3))
    X[:3] += 40  # outliers
    l1 = fit_flat(X, 1, 1)
    l2 = fit_flat(X, 1, 2)
    assert objective(X, [l1], 1) <= objective(X, [l2], 1) + 1e-9


# --- dispatch and invariants -------------------------------------------------------

@pytest.mark.parametrize("solver", ["auto", "k_center", "lloyd", "alternating"])
def test_solver_outputs_have_fresh_values(rng, solver):
    X = rng.normal(size=(30, 4))
    spec = {"k_center": ProblemSpec(3, 0, math.inf), "lloyd": ProblemSpec(3, 0, 2)}.get(solver, ProblemSpec(2, 1, 2))
    _value_is_fresh(X, solve(X, spec, solver, seed=5), spec.rho)


def test_solve_rejects_mismatched_solver():
    with pytest.raises(ValueError):
        solve(np.zeros((3, 2)), ProblemSpec(1, 0, 2), "k_center")
    with pytest.raises(ValueError):
        solve(np.zeros((3, 2)), ProblemSpec(1, 0, 2), "nope")


def test_heuristics_never_beat_brute_force(rng):
    for s in range(15):
        X = rng.normal(size=(int(rng.integers(3, 10)), 3))
        for spec, solver in [(ProblemSpec(2, 0, 2), "lloyd"), (ProblemSpec(2, 0, math.inf), "k_center"),
                             (ProblemSpec(2, 1, 2), "alternating"), (ProblemSpec(3, 0, 2), "alternating")]:
            opt = brute_force_optimal(X, spec).value
            assert solve(X, spec, solver, seed=s).value >= opt - 1e-9


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 7), st.integers(1, 3)), elements=st.floats(-20, 20, allow_nan=False)),
       st.integers(1, 3), st.sampled_from([2.0, math.inf]))
def test_brute_force_scale_equivariant(X, k, rho):
    spec = ProblemSpec(k, 0, rho)
    a = brute_force_optimal(X, spec).value
    b = brute_force_optimal(3.0 * X, spec).value
    assert b == pytest.approx(3.0 * a, rel=1e-9, abs=1e-9)


# --- preservation -------------------------------------------------------------------

def test_preservation_full_dimension_is_exact(rng):
    X = rng.normal(size=(8, 10))
    for rho in (2, math.inf):
        r = verify_objective_preservation(X, make_projection(10, 10, 0), ProblemSpec(2, 0, rho), 0.1)
        assert r.passed and abs(r.ratio - 1) < 1e-9


def test_preservation_at_reduced_dimension(rng):
    # m = 10 of d = 40, far from identity-equivalent
    passes = 0
    for s in range(10):
        X = rng.normal(size=(10, 40))
        for rho in (2, math.inf):
            passes += verify_objective_preservation(X, make_projection(40, 10, s), ProblemSpec(2, 0, rho), 0.5).passed
    assert passes >= 18


def test_meb_radius_preservation(rng):
    X = rng.normal(size=(10, 40))
    r = verify_objective_preservation(X, make_projection(40, 20, 3), ProblemSpec(1, 0, math.inf), 0.5)
    assert r.passed
