import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import nnls

from oracles import normal_equations_solve
from scatsize.bank import FormFactorBank, build_bank, linear_grid
from scatsize.estimator import (
    DegenerateEstimateError,
    FullSuppressionError,
    GridMismatchError,
    SizeDistributionEstimate,
    SuppressionPolicy,
    estimate_constrained,
    estimate_unconstrained,
    min_norm_solve,
    normalize_distribution,
    select_suppression,
    solve_with_suppression,
    weights_to_number_density,
    write_estimate,
)
from scatsize.phantom import PhantomSpec, SizeDistributionSpec, SpectrumVector, synthesize_phantom


def spectrum(bank, values):
    return SpectrumVector(bank.frequencies, np.asarray(values, dtype=float), "form_factor")


def random_bank(rng, n_sizes, n_freqs):
    m = rng.uniform(0.05, 1.0, (n_sizes, n_freqs))
    m /= m.max(axis=1, keepdims=True)
    return FormFactorBank(np.arange(1.0, n_sizes + 1), np.arange(1.0, n_freqs + 1), m, np.ones(n_sizes))


# -- Method 1 ---------------------------------------------------------------


def test_zero_input(small_bank):
    est = estimate_unconstrained(spectrum(small_bank, np.zeros(13)), small_bank)
    assert np.all(est.weights == 0) and est.residual_l2 == 0


@pytest.fixture(scope="module")
def sparse_bank():
    # four sizes far enough apart for cond ~ 1e3
    return build_bank([20, 40, 60, 80], linear_grid(3, 9, 0.5))


def test_bank_row_gives_one_hot(sparse_bank, small_bank):
    for bank, tol in ((sparse_bank, 1e-10), (small_bank, 1e-7)):
        # the 7-size bank has cond ~ 1e8, so roundoff is eps * cond there
        for j in range(bank.shape[0]):
            est = estimate_unconstrained(spectrum(bank, bank.matrix[j]), bank)
            expected = np.zeros(bank.shape[0])
            expected[j] = 1.0
            assert np.abs(est.weights - expected).max() <= tol


def test_three_by_five_against_normal_equations(rng):
    while True:
        m = rng.uniform(0.1, 1.0, (3, 5))
        s = np.linalg.svd(m, compute_uv=False)
        if s[-1] / s[0] >= 1e-3:
            break
    bank = FormFactorBank([1.0, 2.0, 3.0], np.arange(1.0, 6), m, np.ones(3))
    target = np.array([0.2, 0.5, 0.3]) @ m
    ref = normal_equations_solve(m, target)
    np.testing.assert_allclose(ref, [0.2, 0.5, 0.3], atol=1e-12)
    est = estimate_unconstrained(spectrum(bank, target), bank)
    np.testing.assert_allclose(est.weights, ref, atol=1e-8)


@pytest.mark.parametrize("n_sizes", [3, 8])
def test_least_squares_optimality(rng, n_sizes):
    bank = random_bank(rng, n_sizes, 12)
    target = rng.uniform(0, 1, 12)
    est = estimate_unconstrained(spectrum(bank, target), bank)
    for _ in range(100):
        d = rng.normal(size=n_sizes)
        d /= np.linalg.norm(d)
        assert np.linalg.norm((est.weights + 1e-4 * d) @ bank.matrix - target) >= est.residual_l2 - 1e-10


def test_least_squares_optimality_full_bank(full_bank, rng):
    # weights reach ~1e8 here, so the residual itself is only known to about
    # eps * |w| * |F|; the margin is that evaluation error, not a looser optimum
    target = rng.uniform(0, 1, 61)
    est = estimate_unconstrained(spectrum(full_bank, target), full_bank)
    slack = 1e-10 + 8 * np.finfo(float).eps * np.abs(est.weights).sum()
    for _ in range(100):
        d = rng.normal(size=100)
        d /= np.linalg.norm(d)
        assert np.linalg.norm((est.weights + 1e-4 * d) @ full_bank.matrix - target) >= est.residual_l2 - slack


def test_min_norm_in_rank_deficient_case(rng):
    # duplicate a row: the null space is spanned by e_0 - e_2
    m = rng.uniform(0.1, 1, (2, 6))
    m = np.vstack([m, m[0]])
    target = rng.uniform(0, 1, 6)
    a = min_norm_solve(m, target)
    null = np.array([1.0, 0.0, -1.0]) / np.sqrt(2)
    for t in np.linspace(-1, 1, 21):
        alt = a + t * null
        assert np.linalg.norm(alt @ m - target) == pytest.approx(np.linalg.norm(a @ m - target), abs=1e-10)
        assert np.linalg.norm(a) <= np.linalg.norm(alt) + 1e-10
    assert a[0] == pytest.approx(a[2], rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(min_value=1e-3, max_value=1e3))
def test_linearity(seed, gamma):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng, 6, 12)
    target = rng.uniform(0, 1, 12)
    a = estimate_unconstrained(spectrum(bank, target), bank).weights
    b = estimate_unconstrained(spectrum(bank, gamma * target), bank).weights
    assert np.linalg.norm(b - gamma * a) <= 1e-12 * np.linalg.norm(gamma * a) * np.linalg.cond(bank.matrix)


@pytest.mark.parametrize("gamma", [0.25, 2.0, 1024.0])
def test_linearity_exact_for_powers_of_two(full_bank, rng, gamma):
    target = rng.uniform(0, 1, 61)
    a = estimate_unconstrained(spectrum(full_bank, target), full_bank).weights
    b = estimate_unconstrained(spectrum(full_bank, gamma * target), full_bank).weights
    assert np.array_equal(b, gamma * a)


@pytest.mark.parametrize("seed", range(5))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng, 7, 12)
    target = rng.uniform(0, 1, 12)
    perm = rng.permutation(7)
    shuffled = FormFactorBank(bank.sizes, bank.frequencies, bank.matrix[perm], bank.row_scales[perm])
    a = estimate_unconstrained(spectrum(bank, target), bank).weights
    b = estimate_unconstrained(spectrum(shuffled, target), shuffled).weights
    np.testing.assert_allclose(b, a[perm], rtol=1e-9, atol=1e-12)


def test_grid_mismatch(small_bank):
    other = SpectrumVector(small_bank.frequencies + 0.01, np.ones(13), "form_factor")
    with pytest.raises(GridMismatchError):
        estimate_unconstrained(other, small_bank)
    with pytest.raises(ValueError):
        estimate_unconstrained(SpectrumVector(small_bank.frequencies, np.ones(13), "bsc"), small_bank)


# -- suppression ------------------------------------------------------------


def test_select_nothing_when_flat():
    assert select_suppression(np.full(5, 0.3), SuppressionPolicy(threshold_fraction=0.05)) == frozenset()


def test_select_negatives_always():
    assert select_suppression([1.0, -0.2, 0.8], SuppressionPolicy(threshold_fraction=0.0)) == {1}


def test_select_threshold_rule():
    got = select_suppression([1.0, 0.02, -0.03, 0.04, 0.9], SuppressionPolicy("threshold", 0.05))
    assert got == {1, 2, 3}


def test_contiguous_run_picks_largest_fluctuation():
    a = [1.0, 0.01, 0.02, 0.9, 0.01, 0.04, -0.02, 0.8]
    # run 1-2 fluctuates by 0.01, run 4-6 by 0.03 + 0.06; the negative joins regardless
    assert select_suppression(a, SuppressionPolicy("contiguous_run", 0.05)) == {4, 5, 6}


def test_contiguous_run_tie_goes_to_first():
    # both runs step by exactly 0.25
    a = [8.0, 0.125, 0.375, 7.0, 0.25, 0.5, 6.0]
    assert select_suppression(a, SuppressionPolicy("contiguous_run", 0.1)) == {1, 2}


def test_full_suppression():
    with pytest.raises(FullSuppressionError):
        select_suppression([-1.0, -2.0], SuppressionPolicy())


def test_policy_validation():
    with pytest.raises(ValueError):
        SuppressionPolicy(mode="fancy")
    with pytest.raises(ValueError):
        SuppressionPolicy(threshold_fraction=1.0)
    with pytest.raises(ValueError):
        SuppressionPolicy(max_iterations=0)


# -- Method 2 ---------------------------------------------------------------


def test_feasible_solution_is_fixed_point(small_bank):
    w = np.array([0.3, 0.5, 1.0, 0.8, 0.4, 0.6, 0.2])
    ft = spectrum(small_bank, w @ small_bank.matrix)
    m1 = estimate_unconstrained(ft, small_bank)
    m2 = estimate_constrained(ft, small_bank)
    assert m2.suppressed == frozenset() and m2.converged and m2.iterations == 0
    assert np.array_equal(m1.weights, m2.weights)


def test_single_row_on_full_bank(full_bank):
    for j in (9, 29, 49, 79):
        ft = spectrum(full_bank, full_bank.matrix[j])
        est = estimate_constrained(ft, full_bank, SuppressionPolicy(threshold_fraction=0.05))
        assert np.all(est.weights >= 0)
        assert abs(int(np.argmax(est.weights)) - j) <= 1
        ref, _ = nnls(full_bank.matrix.T, ft.values, maxiter=10_000)
        assert np.argmax(ref) == np.argmax(est.weights)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["threshold", "contiguous_run"]),
       st.floats(0.0, 0.5), st.integers(1, 50))
def test_constrained_properties(seed, mode, theta, iters):
    rng = np.random.default_rng(seed)
    bank = random_bank(rng, int(rng.integers(2, 9)), 12)
    ft = spectrum(bank, rng.uniform(0, 1, 12))
    m1 = estimate_unconstrained(ft, bank)
    try:
        m2 = estimate_constrained(ft, bank, SuppressionPolicy(mode, theta, iters))
    except FullSuppressionError:
        return
    assert all(m2.weights[i] == 0.0 for i in m2.suppressed)
    assert m2.residual_l2 >= m1.residual_l2 - 1e-12
    assert m2.iterations <= iters


def test_idempotent_at_convergence(full_bank):
    _, ft, _ = synthesize_phantom(PhantomSpec(SizeDistributionSpec.gaussian(50, 8)), full_bank)
    est = estimate_constrained(ft, full_bank)
    assert est.converged
    again = solve_with_suppression(ft, full_bank, est.suppressed)
    assert np.array_equal(again, est.weights)


def test_iteration_cap_reported(full_bank):
    _, ft, _ = synthesize_phantom(PhantomSpec(SizeDistributionSpec.gaussian(50, 8)), full_bank)
    est = estimate_constrained(ft, full_bank, SuppressionPolicy(max_iterations=1))
    assert est.iterations == 1 and not est.converged


# -- conversions ------------------------------------------------------------


def test_normalize_examples():
    np.testing.assert_array_equal(normalize_distribution(np.array([0, 1.0, 0])), [0, 1, 0])
    np.testing.assert_allclose(normalize_distribution(np.array([2, 2, 0, -1.0])), [0.5, 0.5, 0, 0])
    with pytest.raises(DegenerateEstimateError):
        normalize_distribution(np.array([-1.0, 0.0]))


@given(arrays(float, 6, elements=st.floats(1e-3, 1e3)), st.floats(1e-3, 1e3))
def test_normalize_scale_invariant(v, gamma):
    p = normalize_distribution(v)
    np.testing.assert_allclose(p, v / v.sum(), rtol=1e-12)
    np.testing.assert_allclose(normalize_distribution(gamma * v), p, rtol=1e-12)


def test_number_density_examples():
    bank = FormFactorBank([50.0], [5.0], [[1.0]], [3.7e-13])
    est = SizeDistributionEstimate(np.array([1.0]), frozenset(), 0.0, "unconstrained")
    np.testing.assert_allclose(weights_to_number_density(est, bank, 3.7e-13), [1.0])
    assert np.all(weights_to_number_density(np.zeros(1), bank, 1.0) == 0)
    with pytest.raises(ValueError):
        weights_to_number_density(est, bank, 0.0)


def test_number_density_round_trip_well_conditioned(small_bank):
    # exact on a bank whose conditioning leaves room for it
    _, ft, truth = synthesize_phantom(PhantomSpec(SizeDistributionSpec.uniform(30, 60)), small_bank)
    est = estimate_unconstrained(ft, small_bank)
    dens = weights_to_number_density(est, small_bank, ft.scale)
    support = truth.number_densities > 0
    np.testing.assert_allclose(dens[support], truth.number_densities[support], rtol=1e-6)


def test_write_estimate(small_bank, tmp_path):
    ft = spectrum(small_bank, small_bank.matrix[2] + 0.01 * small_bank.matrix[5])
    est = estimate_constrained(ft, small_bank, SuppressionPolicy(threshold_fraction=0.05))
    write_estimate(est, small_bank, tmp_path / "e.csv", tmp_path / "e.json")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "size_um,weight,probability,suppressed"
    assert len(lines) == 8
    assert sum(int(line.split(",")[3]) for line in lines[1:]) == len(est.suppressed) > 0
    summary = json.loads((tmp_path / "e.json").read_text())
    assert summary["method"] == "constrained" and summary["policy"]["threshold_fraction"] == 0.05
